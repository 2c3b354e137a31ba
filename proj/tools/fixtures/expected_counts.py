#!/usr/bin/env python3
"""Closed-form question counts for per_entity generation with the simple suite.

Every simple template is document-scoped, extractive, and has no value slots,
so a document yields one question per templated type that has a non-line-item
entity with a non-empty value and a known page, provided all such entities of
that type sit on one page. Usage: expected_counts.py CLEAN_KIE_FILE SUITE_FILE
"""

import json
import sys


def value(e):
    v = e.get("cleaned_value")
    return v if v is not None else e["raw_value"]


def main():
    with open(sys.argv[1], encoding="utf-8") as f:
        docs = [json.loads(l) for l in f if l.strip()][1:]
    with open(sys.argv[2], encoding="utf-8") as f:
        types = [json.loads(l) for l in f if l.strip()][1:]
    types = [t["target_type"] for t in types]
    per_split = {"train": 0, "dev": 0, "test": 0}
    for d in docs:
        for t in types:
            ents = [e for e in d["entities"]
                    if e["type_name"] == t and not e.get("line_item_id") and value(e)]
            if not any(e["page_indices"] for e in ents):
                continue
            pages = {p for e in ents for p in e["page_indices"]}
            if len(pages) == 1:
                per_split[d["split"]] += 1
    print(json.dumps({"total": sum(per_split.values()), "per_split": per_split}, indent=2))


if __name__ == "__main__":
    main()
