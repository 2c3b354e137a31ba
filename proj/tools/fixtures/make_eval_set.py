#!/usr/bin/env python3
"""Writes the planted groundedness evaluation set.

Forty single-page documents, one question each, ten per label. The expected
label counts and ANLS come from how each record was built, plus a separate
edit-distance implementation here.

usage: make_eval_set.py OUT_DIR
"""

import json
import sys
from pathlib import Path

E, B = "extractive", "boolean"

# (planted label, question type, gold, prediction, OCR text)
RECORDS = [
    ("correct_grounded", E, "Acme Media", "Acme Media", "REMIT TO ACME MEDIA"),
    ("correct_grounded", E, "130.00", "130.00", "TOTAL 130.00"),
    ("correct_grounded", E, "01/30/20", "01/30/20", "Flight Date 01/30/20"),
    ("correct_grounded", E, "Hogan & Hartson LLP", "Hogan & Hartson LLP", "HOGAN & HARTSON LLP"),
    ("correct_grounded", E, "Embassy Of The State Of Qatar", "Embassy Of The State Of Qatar",
     "Registrant EMBASSY OF THE STATE OF QATAR"),
    ("correct_grounded", B, "Yes", "yes", "Cashier Dewi"),
    ("correct_grounded", B, "No", "No", "Cashier Budi"),
    ("correct_grounded", B, "Yes", "YES", "Table 4"),
    ("correct_grounded", E, "1154288", "1154288", "Charity 1154288"),
    ("correct_grounded", E, "Chad Horrell", "Chad Horrell", "Agent CHAD HORRELL"),

    ("mis_extraction", E, "/ Chad Horrell", "Chad Horrell", "Agent : / Chad Horrell Date 01/30/20"),
    ("mis_extraction", E, "Acme Media", "Acme Media Group", "REMIT TO ACME MEDIA GROUP"),
    ("mis_extraction", E, "130.00", "12.50", "SUBTOTAL 12.50 TOTAL 130.00"),
    ("mis_extraction", E, "01/30/20", "02/14/20", "Date 01/30/20 Due 02/14/20"),
    ("mis_extraction", E, "James A. Coppola", "Manager", "James A. Coppola Manager"),
    ("mis_extraction", E, "1154288", "12345", "Ref 123 45 Charity 1154288"),
    ("mis_extraction", E, "Hogan & Hartson LLP", "Washington DC", "Hogan & Hartson LLP Washington DC"),
    ("mis_extraction", E, "CHOC BANANA", "ICED TEA", "CHOC BANANA 10.000 ICED TEA 12.000"),
    ("mis_extraction", E, "10.000", "12.000", "CHOC BANANA 10.000 ICED TEA 12.000"),
    ("mis_extraction", E, "New York", "350 Fifth Ave", "350 Fifth Ave New York NY"),

    ("misprint", E, "01/30/20", "01/30/28", "Flight Date 01/30/20"),
    ("misprint", E, "1154288", "1154289", "Charity 1154288"),
    ("misprint", E, "Acme Media Group", "Acme Media Grovp", "ACME MEDIA GROUP"),
    ("misprint", E, "130.00", "130.08", "TOTAL 130.00"),
    ("misprint", E, "Hogan & Hartson LLP", "Hogan & Hartsen LLP", "HOGAN & HARTSON LLP"),
    ("misprint", E, "Embassy Of The State Of Qatar", "Embassy Of The State Of Quatar",
     "EMBASSY OF THE STATE OF QATAR"),
    ("misprint", E, "CHOC BANANA", "CHOC BANANNA", "CHOC BANANA 10.000"),
    ("misprint", E, "Chad Horrell", "Chad Horell", "Agent Chad Horrell"),
    ("misprint", E, "12.000", "12.090", "ICED TEA 12.000"),
    ("misprint", E, "Washington DC", "Washingten DC", "Washington DC 20004"),

    ("other", E, "Embassy Of The State Of Qatar", "Government Of Japan--Japan External Trade Organization",
     "Registrant Embassy Of The State Of Qatar"),
    ("other", E, "01/30/20", "03/15/19", "Flight Date 01/30/20"),
    ("other", E, "1154288", "", "Charity 1154288"),
    ("other", E, "Acme Media", "Globex", "REMIT TO ACME MEDIA"),
    ("other", E, "130.00", "99.99", "TOTAL 130.00"),
    ("other", E, "6278", "6228", "Invoice 6278"),
    ("other", E, "Chad Horrell", "Jane Smith", "Agent Chad Horrell"),
    ("other", E, "CHOC BANANA", "LATTE", "CHOC BANANA 10.000"),
    ("other", E, "New York", "Boston", "350 Fifth Ave New York NY"),
    ("other", B, "Yes", "Maybe", "Cashier Dewi"),
]


def levenshtein(a, b):
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def anls(pred, gold):
    n = max(len(pred), len(gold))
    nl = 0.0 if n == 0 else levenshtein(pred, gold) / n
    return 1 - nl if nl < 0.5 else 0.0


def main():
    out = Path(sys.argv[1])
    kie = [json.dumps({"name": "planted-eval", "ontology": [
        {"name": "field", "parent": None, "display_phrases": ["field"], "format_class": "string"}]})]
    qa = [json.dumps({"name": "planted-eval", "provenance": {
        "config_digest": "", "suite_digest": "", "source_digest": ""}})]
    preds = []
    for i, (_, qtype, gold, pred, ocr) in enumerate(RECORDS):
        doc_id = f"ev-{i:02d}"
        words = ocr.split()
        tokens = [{"token_id": f"t{k}", "page_index": 0, "text": w,
                   "bbox": [round(0.02 + 0.09 * (k % 10), 2), 0.1 + 0.05 * (k // 10),
                            round(0.1 + 0.09 * (k % 10), 2), 0.14 + 0.05 * (k // 10)]}
                  for k, w in enumerate(words)]
        kie.append(json.dumps({"doc_id": doc_id, "page_count": 1, "tokens": tokens, "entities": [],
                               "line_items": [], "split": "test"}))
        qa_id = f"planted-{i:02d}"
        record = {"qa_id": qa_id, "doc_id": doc_id, "split": "test", "page_scope": [0],
                  "question": f"What is the field of record {i}?", "question_type": qtype,
                  "answers": [gold], "entity_ids_used": [], "answer_entity_ids": [],
                  "answer_token_spans": [], "template_id": "planted",
                  "num_question_entities": 1 if qtype == B else 0, "bindings": {}}
        if qtype == B:
            record["candidate_value"] = "x"
        qa.append(json.dumps(record))
        preds.append(json.dumps({"qa_id": qa_id, "prediction": pred}))

    counts = {}
    for label, *_ in RECORDS:
        counts[label] = counts.get(label, 0) + 1
    scores = [anls(p, g) for _, _, g, p, _ in RECORDS]
    expected = {"num_questions": len(RECORDS), "groundedness": counts,
                "anls": sum(scores) / len(scores)}

    (out / "eval_kie.jsonl").write_text("\n".join(kie) + "\n")
    (out / "eval_qa.jsonl").write_text("\n".join(qa) + "\n")
    (out / "eval_predictions.jsonl").write_text("\n".join(preds) + "\n")
    (out / "eval_expected.json").write_text(json.dumps(expected, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
