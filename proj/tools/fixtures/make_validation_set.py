#!/usr/bin/env python3
"""Writes a three-rater validation label set and its expected report.

Rates and kappas are computed here with exact fractions.

usage: make_validation_set.py OUT_DIR
"""

import json
import random
import sys
from fractions import Fraction
from pathlib import Path

CATEGORIES = ["none", "template", "cleaning", "annotation", "other"]
RATERS = 3
QUESTIONS = 200


def fleiss(rows):
    n = sum(rows[0])
    big_n = len(rows)
    p_bar = sum(Fraction(sum(c * (c - 1) for c in r), n * (n - 1)) for r in rows) / big_n
    k = len(rows[0])
    p_e = sum((Fraction(sum(r[j] for r in rows), big_n * n)) ** 2 for j in range(k))
    if p_e == 1:
        return Fraction(1)
    return (p_bar - p_e) / (1 - p_e)


def main():
    rng = random.Random(7)
    records = []
    for i in range(QUESTIONS):
        truth = rng.choices(CATEGORIES, weights=[88, 4, 3, 3, 2])[0]
        labels = []
        for _ in range(RATERS):
            if rng.random() < 0.85:
                labels.append(truth)
            else:
                labels.append(rng.choice(CATEGORIES))
        records.append({"qa_id": f"val-{i:03d}", "labels": labels})

    matrix = [[r["labels"].count(c) for c in CATEGORIES] for r in records]
    expected = {"num_questions": QUESTIONS, "num_raters": RATERS,
                "overall_kappa": float(fleiss(matrix)), "categories": {}}
    for j, c in enumerate(CATEGORIES):
        count = sum(1 for row in matrix if 2 * row[j] > RATERS)
        binary = [[row[j], RATERS - row[j]] for row in matrix]
        expected["categories"][c] = {"count": count, "rate_pct": 100.0 * count / QUESTIONS,
                                     "kappa": float(fleiss(binary))}

    out = Path(sys.argv[1])
    (out / "validation_labels.jsonl").write_text("".join(json.dumps(r) + "\n" for r in records))
    (out / "validation_expected.json").write_text(json.dumps(expected, indent=2, sort_keys=True) + "\n")
    (out / "kappa_matrix.txt").write_text(
        "# subjects x categories: none template cleaning annotation other\n" +
        "".join(" ".join(str(c) for c in row) + "\n" for row in matrix))


if __name__ == "__main__":
    main()
