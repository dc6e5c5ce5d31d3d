"""Seeded synthetic procurement data for tests, demos and benchmarks.

Descriptions come from a handful of topic clusters, and amounts are drawn
log-normally around a per-cluster median, so description similarity carries
information about the amount.
"""
from __future__ import annotations

import csv
import datetime as _dt
from typing import Optional

import numpy as np

from .ingest import ContractRecord, format_amount

CLUSTERS = (
    ("construction and reconstruction of the regional road section",
     ("asphalt", "road", "bridge", "highway", "section", "paving", "reconstruction", "culvert")),
    ("supply of medicines and pharmaceutical products for hospitals",
     ("medicines", "vaccines", "insulin", "pharmaceutical", "hospital", "antibiotics", "clinical", "drugs")),
    ("supply of electricity and natural gas for heating",
     ("electricity", "energy", "gas", "heating", "fuel", "power", "thermal", "coal")),
    ("procurement of computer equipment and software licences",
     ("computers", "servers", "software", "licences", "laptops", "network", "printers", "storage")),
    ("cleaning and security services for public buildings",
     ("cleaning", "security", "guarding", "maintenance", "janitorial", "buildings", "premises", "hygiene")),
    ("school textbooks and educational materials",
     ("textbooks", "school", "notebooks", "education", "teaching", "pupils", "books", "materials")),
)
CLUSTER_MEDIANS = (180e6, 45e6, 600e6, 12e6, 4e6, 25e6)

_PLACES = ("Skopje", "Bitola", "Kumanovo", "Prilep", "Tetovo", "Veles", "Ohrid", "Gostivar",
           "Shtip", "Strumica", "Kavadarci", "Kochani", "Kichevo", "Struga", "Radovish", "Gevgelija")
_INSTITUTION_KINDS = ("Ministry of", "Municipality of", "Public Enterprise", "Clinical Hospital",
                      "Agency for", "Fund for")
_SUPPLIER_WORDS = ("Alfa", "Beta", "Granit", "Vardar", "Makstil", "Pelister", "Sileks", "Tikvesh",
                   "Zegin", "Replek", "Energo", "Inženering", "Strojtex", "Mermeren", "Balkan", "Krin")
_SUPPLIER_FORMS = ("DOOEL", "DOO", "AD")


def institution_names(n: int) -> list[str]:
    return [f"{_INSTITUTION_KINDS[i % len(_INSTITUTION_KINDS)]} {_PLACES[(i // len(_INSTITUTION_KINDS)) % len(_PLACES)]}"
            + (f" {i // (len(_INSTITUTION_KINDS) * len(_PLACES)) + 1}" if i >= len(_INSTITUTION_KINDS) * len(_PLACES) else "")
            for i in range(n)]


def supplier_names(n: int) -> list[str]:
    words, forms = len(_SUPPLIER_WORDS), len(_SUPPLIER_FORMS)
    return [f"{_SUPPLIER_WORDS[i % words]} {_PLACES[(i // words) % len(_PLACES)]} {_SUPPLIER_FORMS[i % forms]}"
            + (f" {i // (words * len(_PLACES)) + 1}" if i >= words * len(_PLACES) else "")
            for i in range(n)]


def synthetic_records(n: int, institutions: int = 8, suppliers: int = 20, clusters: int = 5,
                      seed: int = 0, first_year: int = 2016, years: int = 6,
                      prefix: str = "syn", sigma: float = 0.35) -> list[ContractRecord]:
    """``n`` records using exactly ``min(n, institutions)`` institutions and
    ``min(n, suppliers)`` suppliers."""
    if not 1 <= clusters <= len(CLUSTERS):
        raise ValueError(f"clusters must be between 1 and {len(CLUSTERS)}")
    rng = np.random.default_rng(seed)
    inst_names = institution_names(institutions)
    sup_names = supplier_names(suppliers)
    inst_idx = np.concatenate([np.arange(min(n, institutions)),
                               rng.integers(0, institutions, max(0, n - institutions))])
    sup_idx = np.concatenate([np.arange(min(n, suppliers)),
                              rng.integers(0, suppliers, max(0, n - suppliers))])
    rng.shuffle(inst_idx)
    rng.shuffle(sup_idx)
    start = _dt.date(first_year, 1, 1).toordinal()
    span = _dt.date(first_year + years - 1, 12, 31).toordinal() - start
    out = []
    for i in range(n):
        c = int(rng.integers(0, clusters))
        base, words = CLUSTERS[c]
        extra = " ".join(rng.choice(words, size=2, replace=False))
        subject = f"{base} {extra} lot {int(rng.integers(1, 9))}"
        amount = int(round(CLUSTER_MEDIANS[c] * float(np.exp(rng.normal(0.0, sigma)))))
        date = _dt.date.fromordinal(start + int(rng.integers(0, span + 1)))
        out.append(ContractRecord(f"{prefix}-{i + 1}", inst_names[inst_idx[i]], subject,
                                  sup_names[sup_idx[i]], date, max(amount, 1)))
    return out


# Source-style export headers and the alias map that reads them.
SOURCE_HEADER = ("No.", "Contracting authority", "Subject of the contract", "Procurement holder",
                 "Date of the contract", "Value of the contract in denars")
SOURCE_ALIASES = {
    "Contracting authority": "authority",
    "Subject of the contract": "subject",
    "Procurement holder": "supplier",
    "Date of the contract": "date",
    "Value of the contract in denars": "amount",
}


def write_source_csv(path, records: list[ContractRecord], blank_supplier_rows: Optional[set] = None) -> None:
    """Write records as a raw export: numbering column, ``DD.MM.YYYY`` dates,
    dot-grouped amounts. Row numbers in ``blank_supplier_rows`` (1-based)
    get an empty supplier cell."""
    blank = blank_supplier_rows or set()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SOURCE_HEADER)
        for i, r in enumerate(records, start=1):
            writer.writerow((i, r.authority, r.subject, "" if i in blank else r.supplier,
                             r.date.strftime("%d.%m.%Y"), format_amount(r.amount)))
