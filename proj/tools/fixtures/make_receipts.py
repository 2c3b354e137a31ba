#!/usr/bin/env python3
"""Generate the synthetic receipt corpus used by the tests.

The output is deterministic: running this script twice yields identical
files. Usage: make_receipts.py OUT_DIR
"""

import json
import random
import sys
from pathlib import Path

SEED = 20240601
NUM_DOCS = 200

ONTOLOGY = [
    {"name": "store_name", "parent": None,
     "display_phrases": ["store name", "name of the store", "merchant name"], "format_class": "string"},
    {"name": "store_address", "parent": None,
     "display_phrases": ["store address", "address of the store"], "format_class": "string"},
    {"name": "receipt_date", "parent": None,
     "display_phrases": ["date of the receipt", "transaction date", "purchase date"], "format_class": "date"},
    {"name": "receipt_number", "parent": None,
     "display_phrases": ["receipt number", "transaction number"], "format_class": "integer"},
    {"name": "cashier", "parent": None,
     "display_phrases": ["cashier", "name of the cashier"], "format_class": "string"},
    {"name": "menu", "parent": None,
     "display_phrases": ["menu entry"], "format_class": "other"},
    {"name": "item_name", "parent": "menu",
     "display_phrases": ["menu item", "name of the item", "item name"], "format_class": "string"},
    {"name": "item_quantity", "parent": "menu",
     "display_phrases": ["quantity", "number of servings"], "format_class": "integer"},
    {"name": "item_unit_price", "parent": "menu",
     "display_phrases": ["unit price", "price per unit"], "format_class": "integer"},
    {"name": "item_price", "parent": "menu",
     "display_phrases": ["price", "total price", "cost"], "format_class": "integer"},
    {"name": "summary", "parent": None,
     "display_phrases": ["summary amount"], "format_class": "other"},
    {"name": "subtotal", "parent": "summary",
     "display_phrases": ["subtotal", "subtotal amount"], "format_class": "integer"},
    {"name": "tax", "parent": "summary",
     "display_phrases": ["tax", "tax amount"], "format_class": "integer"},
    {"name": "total", "parent": "summary",
     "display_phrases": ["total", "total amount", "amount to be paid"], "format_class": "integer"},
    {"name": "payment", "parent": None,
     "display_phrases": ["payment amount"], "format_class": "other"},
    {"name": "cash", "parent": "payment",
     "display_phrases": ["amount of cash paid", "cash amount"], "format_class": "integer"},
    {"name": "change", "parent": "payment",
     "display_phrases": ["amount of change", "change in cash"], "format_class": "integer"},
]

STORE_A = ["KOPI", "WARUNG", "BAKMI", "ROTI", "SATE", "NASI", "TEH", "MIE", "DAPUR", "KEDAI",
           "BAKSO", "SOTO", "PONDOK", "RUMAH", "SARI"]
STORE_B = ["SENJA", "NUSANTARA", "MELATI", "KENANGA", "PELANGI", "MERDEKA", "SEJAHTERA",
           "BAHAGIA", "CEMPAKA", "ANGGREK", "SAMUDRA", "BINTANG", "PURNAMA", "JAYA"]
STREETS = ["Merdeka", "Sudirman", "Thamrin", "Diponegoro", "Gatot Subroto", "Asia Afrika",
           "Braga", "Dago", "Riau", "Cihampelas", "Pemuda", "Pahlawan"]
CITIES = ["Bandung", "Jakarta", "Surabaya", "Bogor", "Depok", "Malang", "Semarang"]
FIRST = ["Budi", "Siti", "Agus", "Dewi", "Rina", "Eko", "Putri", "Andi", "Wati", "Joko",
         "Sri", "Hendra", "Maya", "Yusuf", "Lina"]
LAST = ["Santoso", "Wijaya", "Pratama", "Lestari", "Saputra", "Hidayat", "Kusuma", "Gunawan",
        "Halim", "Setiawan"]
FOOD_A = ["CHOC", "ICED", "HOT", "SPICY", "SWEET", "GREEN", "BLACK", "CHEESE", "GARLIC",
          "HONEY", "LEMON", "MANGO", "BEEF", "CHICKEN", "TUNA", "EGG", "MATCHA", "VANILLA"]
FOOD_B = ["BANANA", "LATTE", "TEA", "NOODLE", "RICE", "BREAD", "TOAST", "CAKE", "WINGS",
          "BURGER", "DUMPLING", "SOUP", "PUDDING", "FRIES", "WAFFLE", "SMOOTHIE", "SATAY"]
MONTHS = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"]


def thousands(v):
    return f"{v:,}".replace(",", ".")


class Layout:
    """Places tokens on pages line by line with page-normalized boxes."""

    def __init__(self):
        self.tokens = []
        self.page = 0
        self.y = 0.04
        self.x = 0.05

    def newline(self):
        self.y += 0.035
        self.x = 0.05

    def new_page(self):
        self.page += 1
        self.y = 0.04
        self.x = 0.05

    def put(self, text):
        ids = []
        for word in text.split():
            width = min(0.011 * len(word), 0.4)
            if self.x + width > 0.95:
                self.newline()
            tid = f"t{len(self.tokens)}"
            self.tokens.append({
                "token_id": tid,
                "page_index": self.page,
                "text": word,
                "bbox": [round(self.x, 4), round(self.y, 4),
                         round(self.x + width, 4), round(self.y + 0.025, 4)],
            })
            ids.append(tid)
            self.x += width + 0.012
        return ids


def make_doc(i, rng):
    doc_id = f"rcpt-{i:04d}"
    split = "train" if i % 10 < 7 else ("dev" if i % 10 == 7 else "test")
    two_pages = rng.random() < 0.12
    dup_prices = rng.random() < 0.18
    repeat_store = rng.random() < 0.08
    layout = Layout()
    entities = []
    line_items = []

    def add_entity(type_name, raw, label=None, line_item_id=None, link=True):
        if label:
            layout.put(label)
        ids = layout.put(raw.replace("\n", " "))
        eid = f"e{len(entities)}"
        entities.append({
            "entity_id": eid,
            "type_name": type_name,
            "raw_value": raw,
            "token_span": ids if link else [],
            "line_item_id": line_item_id,
            "page_indices": [layout.page],
        })
        return eid

    store = f"{rng.choice(STORE_A)} {rng.choice(STORE_B)}"
    if rng.random() < 0.5:
        store += " " + rng.choice(["CAFE", "RESTO", "EXPRESS", "CORNER", "HOUSE"])
    add_entity("store_name", store)
    layout.newline()
    address = f"Jl. {rng.choice(STREETS)} No. {rng.randint(1, 250)}"
    if rng.random() < 0.4:
        address += f", {rng.choice(CITIES)}"
    add_entity("store_address", address)
    layout.newline()
    day, month, year = rng.randint(1, 28), rng.randint(1, 12), rng.choice([2021, 2022, 2023])
    style = rng.randrange(3)
    if style == 0:
        date = f"{day:02d}/{month:02d}/{year}"
    elif style == 1:
        date = f"{year}-{month:02d}-{day:02d}"
    else:
        date = f"{day} {MONTHS[month - 1]} {year}"
    add_entity("receipt_date", date, label="Date:")
    layout.newline()
    number = f"#{rng.randint(1000, 999999):06d}"
    add_entity("receipt_number", number, label="No.")
    layout.newline()
    add_entity("cashier", f"{rng.choice(FIRST)} {rng.choice(LAST)}", label="Cashier:",
               link=rng.random() >= 0.1)
    layout.newline()

    n_items = rng.randint(2, 6)
    names = set()
    prices = []
    subtotal = 0
    for pos in range(1, n_items + 1):
        while True:
            name = f"{rng.choice(FOOD_A)} {rng.choice(FOOD_B)}"
            if name not in names:
                names.add(name)
                break
        qty = rng.randint(1, 4)
        unit = rng.randint(10, 190) * 500
        if dup_prices and pos == 2:
            qty, unit = prev_qty, prev_unit
        price = qty * unit
        prev_qty, prev_unit = qty, unit
        subtotal += price
        prices.append(price)
        li = f"li{pos}"
        ids = [
            add_entity("item_name", name, line_item_id=li),
            add_entity("item_quantity", str(qty), line_item_id=li),
            add_entity("item_unit_price", thousands(unit), line_item_id=li),
            add_entity("item_price", ("Rp " if rng.random() < 0.3 else "") + thousands(price),
                       line_item_id=li),
        ]
        line_items.append({"line_item_id": li, "position": pos, "entity_ids": ids})
        layout.newline()

    tax = (subtotal // 1000) * 100
    total = subtotal + tax
    cash = ((total // 50000) + 1) * 50000
    add_entity("subtotal", thousands(subtotal), label="SUBTOTAL")
    layout.newline()
    add_entity("tax", thousands(tax), label="TAX 10%")
    layout.newline()
    add_entity("total", "Rp " + thousands(total), label="TOTAL")
    layout.newline()
    if two_pages:
        layout.new_page()
    add_entity("cash", thousands(cash), label="CASH")
    layout.newline()
    add_entity("change", thousands(cash - total), label="CHANGE")
    layout.newline()
    if repeat_store:
        add_entity("store_name", store.title() + " " + rng.choice(["Cabang Dago", "Pusat", "Outlet 2"]),
                   label="Thank you for visiting")
    else:
        layout.put("THANK YOU")

    return {
        "doc_id": doc_id,
        "page_count": layout.page + 1,
        "split": split,
        "tokens": layout.tokens,
        "entities": entities,
        "line_items": line_items,
    }


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(SEED)
    header = {"name": "synthetic-receipts", "ontology": ONTOLOGY}
    with open(out / "receipts.jsonl", "w", encoding="utf-8") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for i in range(NUM_DOCS):
            f.write(json.dumps(make_doc(i, rng), sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
