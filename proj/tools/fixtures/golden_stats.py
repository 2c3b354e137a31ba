#!/usr/bin/env python3
"""Table-style statistics of a QA file, counted without the C++ code.

Output is the committed golden report the stats tests compare against.
Usage: golden_stats.py QA_FILE
"""

import json
import sys


def main():
    with open(sys.argv[1], encoding="utf-8") as f:
        records = [json.loads(l) for l in f if l.strip()][1:]
    n = len(records)
    docs = {}
    for r in records:
        docs[r["doc_id"]] = docs.get(r["doc_id"], 0) + 1
    extractive = sum(1 for r in records if r["question_type"] == "extractive")
    out = {
        "num_templates_used": len({r["template_id"] for r in records}),
        "num_questions": n,
        "pct_extractive": 100.0 * extractive / n,
        "pct_boolean": 100.0 * (n - extractive) / n,
        "pct_single_page": 100.0 * sum(1 for r in records if len(r["page_scope"]) == 1) / n,
        "avg_question_tokens": sum(len(r["question"].split()) for r in records) / n,
        "avg_answer_tokens": sum(len(r["answers"][0].split()) for r in records) / n,
        "avg_entities_per_question": sum(r["num_question_entities"] for r in records) / n,
        "avg_questions_per_doc": n / len(docs),
    }
    print(json.dumps(out, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
