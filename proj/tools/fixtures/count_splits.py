#!/usr/bin/env python3
"""Count documents, entities, line items and tokens per split of a KIE file.

Written independently of the C++ loader; its output is the committed
manifest the loader tests compare against. Usage: count_splits.py KIE_FILE
"""

import json
import sys
from collections import Counter


def main():
    docs, ents, items, toks = Counter(), Counter(), Counter(), Counter()
    with open(sys.argv[1], encoding="utf-8") as f:
        lines = [l for l in f if l.strip()]
    for line in lines[1:]:
        doc = json.loads(line)
        s = doc["split"]
        docs[s] += 1
        ents[s] += len(doc["entities"])
        items[s] += len(doc["line_items"])
        toks[s] += len(doc["tokens"])
    out = {s: {"documents": docs[s], "entities": ents[s], "line_items": items[s], "tokens": toks[s]}
           for s in ("train", "dev", "test")}
    print(json.dumps(out, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
