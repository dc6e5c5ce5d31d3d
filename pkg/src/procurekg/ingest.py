"""Reading, merging and normalizing periodic procurement CSV exports.

Rows are carried as text cells. ``normalize`` maps source headers onto the
five canonical fields, canonicalizes amounts and dates, and *flags* rows it
cannot make sense of instead of dropping them; rejection is left to the
validation stage.
"""
from __future__ import annotations

import csv
import datetime as _dt
import fnmatch
import io
import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

CANONICAL_FIELDS = ("authority", "subject", "supplier", "date", "amount")

# Columns written by ``write_normalized_csv`` in addition to the canonical five.
NORMALIZED_HEADER = ("record_id",) + CANONICAL_FIELDS + ("source", "flag")


class IngestError(ValueError):
    pass


class RaggedRowError(IngestError):
    def __init__(self, path, line: int, expected: int, found: int):
        super().__init__(f"{path}: line {line} has {found} cells, header has {expected}")
        self.line = line


class ColumnMismatchError(IngestError):
    pass


class MissingFieldError(IngestError):
    def __init__(self, name: str):
        super().__init__(f"missing canonical field: {name}")
        self.field = name


class AmountFormatError(IngestError):
    pass


class NonPositiveAmountError(IngestError):
    pass


class DateFormatError(IngestError):
    pass


class ImpossibleDateError(DateFormatError):
    pass


@dataclass(frozen=True)
class ContractRecord:
    record_id: str
    authority: str
    subject: str
    supplier: str
    date: _dt.date
    amount: int

    def __post_init__(self):
        if self.amount <= 0:
            raise NonPositiveAmountError(f"{self.record_id}: amount must be positive")
        if not self.authority.strip() or not self.supplier.strip():
            raise IngestError(f"{self.record_id}: authority and supplier must be non-empty")


@dataclass
class RecordTable:
    """Text table with per-row identifiers, provenance and validity flags.

    ``flags[i]`` is ``None`` for a clean row, otherwise a short reason.
    """

    columns: tuple[str, ...]
    rows: list[tuple[str, ...]]
    record_ids: list[str]
    provenance: list[str]
    flags: list[Optional[str]] = field(default_factory=list)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        if not self.flags:
            self.flags = [None] * len(self.rows)
        n = len(self.rows)
        if not (len(self.record_ids) == len(self.provenance) == len(self.flags) == n):
            raise IngestError("row, id, provenance and flag lists differ in length")
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise IngestError(f"row {self.record_ids[i]} has {len(row)} cells, expected {width}")
        if len(set(self.record_ids)) != n:
            seen = set()
            dupes = sorted({r for r in self.record_ids if r in seen or seen.add(r)})
            raise IngestError(f"duplicate record ids: {', '.join(dupes[:5])}")

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list[str]:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def dicts(self) -> list[dict[str, str]]:
        return [dict(zip(self.columns, row)) for row in self.rows]

    @property
    def is_canonical(self) -> bool:
        return self.columns == CANONICAL_FIELDS

    def records(self) -> list[ContractRecord]:
        """ContractRecords for every unflagged row of a normalized table."""
        if not self.is_canonical:
            raise IngestError("records() requires a normalized table")
        out = []
        for rid, row, flag in zip(self.record_ids, self.rows, self.flags):
            if flag is not None:
                continue
            authority, subject, supplier, date, amount = row
            out.append(ContractRecord(rid, authority, subject, supplier,
                                      _dt.date.fromisoformat(date), int(amount)))
        return out


def normalize_name(name: str) -> str:
    return " ".join(name.split()).casefold()


def read_csv(path, encoding: str = "utf-8") -> RecordTable:
    path = Path(path)
    stem = path.stem
    try:
        fh = open(path, encoding=encoding, newline="")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: missing header row") from None
        except UnicodeDecodeError as exc:
            raise IngestError(f"{path}: not valid {encoding}: {exc}") from None
        columns = tuple(h.lstrip("\ufeff").strip() for h in header)
        rows, ids = [], []
        try:
            for cells in reader:
                if not cells or (len(cells) == 1 and not cells[0].strip()):
                    continue
                if len(cells) != len(columns):
                    raise RaggedRowError(path, reader.line_num, len(columns), len(cells))
                rows.append(tuple(cells))
                ids.append(f"{stem}-{len(rows)}")
        except UnicodeDecodeError as exc:
            raise IngestError(f"{path}: not valid {encoding}: {exc}") from None
    return RecordTable(columns, rows, ids, [path.name] * len(rows))


def merge_tables(tables: Sequence[RecordTable]) -> RecordTable:
    """Concatenate tables over the columns they share (case-insensitive)."""
    if not tables:
        raise IngestError("merge_tables needs at least one table")
    shared = set(map(normalize_name, tables[0].columns))
    for t in tables[1:]:
        shared &= set(map(normalize_name, t.columns))
    if not shared:
        listing = "; ".join(f"[{', '.join(t.columns)}]" for t in tables)
        raise ColumnMismatchError(f"tables share no columns: {listing}")
    columns = tuple(c for c in tables[0].columns if normalize_name(c) in shared)
    keys = [normalize_name(c) for c in columns]
    rows, ids, prov, flags = [], [], [], []
    for t in tables:
        index = {normalize_name(c): i for i, c in enumerate(t.columns)}
        picks = [index[k] for k in keys]
        rows.extend(tuple(row[i] for i in picks) for row in t.rows)
        ids.extend(t.record_ids)
        prov.extend(t.provenance)
        flags.extend(t.flags)
    return RecordTable(columns, rows, ids, prov, flags)


def parse_amount(text: str) -> int:
    """Whole denars from text such as ``241.083.174.450`` or ``1.500,50``."""
    raw = text
    s = re.sub(r"[.\s\u00a0\u202f]", "", text)
    m = re.fullmatch(r"([+-]?)(\d+)(?:,(\d{1,2}))?", s)
    if not m:
        raise AmountFormatError(f"not a denar amount: {raw!r}")
    sign, whole, frac = m.groups()
    value = Decimal(f"{sign}{whole}.{frac or '0'}").quantize(Decimal(1), rounding=ROUND_HALF_UP)
    if value <= 0:
        raise NonPositiveAmountError(f"amount must be positive: {raw!r}")
    return int(value)


def format_amount(n: int) -> str:
    """Dot-grouped rendering used in source exports: 9656285000 -> 9.656.285.000."""
    return f"{n:,}".replace(",", ".")


_DATE_FORMATS = (
    (re.compile(r"(\d{1,2})\.(\d{1,2})\.(\d{4})"), "dmy"),
    (re.compile(r"(\d{1,2})/(\d{1,2})/(\d{4})"), "dmy"),
    (re.compile(r"(\d{4})-(\d{2})-(\d{2})"), "ymd"),
)


def parse_date(text: str) -> str:
    """ISO 8601 ``YYYY-MM-DD`` from ``DD.MM.YYYY``, ``DD/MM/YYYY`` or ISO input."""
    s = text.strip()
    for pattern, order in _DATE_FORMATS:
        m = pattern.fullmatch(s)
        if not m:
            continue
        a, b, c = (int(g) for g in m.groups())
        y, mo, d = (c, b, a) if order == "dmy" else (a, b, c)
        try:
            return _dt.date(y, mo, d).isoformat()
        except ValueError:
            raise ImpossibleDateError(f"impossible date in cell {text!r}") from None
    raise DateFormatError(f"unparseable date in cell {text!r}")


def _resolve_columns(columns: Sequence[str], alias_map: Mapping[str, str]) -> dict[str, int]:
    aliases = {normalize_name(k): v for k, v in alias_map.items()}
    for name in CANONICAL_FIELDS:
        aliases.setdefault(name, name)
    found: dict[str, int] = {}
    for i, col in enumerate(columns):
        canon = aliases.get(normalize_name(col))
        if canon is None:
            continue
        if canon not in CANONICAL_FIELDS:
            raise IngestError(f"alias for {col!r} targets unknown field {canon!r}")
        if canon in found:
            raise IngestError(f"columns {columns[found[canon]]!r} and {col!r} both map to {canon}")
        found[canon] = i
    for name in CANONICAL_FIELDS:
        if name not in found:
            raise MissingFieldError(name)
    return found


def normalize(table: RecordTable, drop_patterns: Iterable[str] = (),
              alias_map: Optional[Mapping[str, str]] = None) -> RecordTable:
    """Drop matching columns, rename to canonical fields, canonicalize cells.

    Drop patterns are shell-style globs compared case-insensitively against
    whitespace-normalized column names.
    """
    patterns = [normalize_name(p) for p in drop_patterns]
    kept = [c for c in table.columns
            if not any(fnmatch.fnmatchcase(normalize_name(c), p) for p in patterns)]
    positions = {c: table.columns.index(c) for c in kept}
    resolved = _resolve_columns(kept, alias_map or {})
    picks = [positions[kept[resolved[name]]] for name in CANONICAL_FIELDS]

    rows, flags = [], []
    for row, prior in zip(table.rows, table.flags):
        cells = [" ".join(row[i].split()) for i in picks]
        problems = [f"empty {name}" for name, v in zip(CANONICAL_FIELDS, cells) if not v]
        if cells[3]:
            try:
                cells[3] = parse_date(cells[3])
            except DateFormatError as exc:
                problems.append(str(exc))
        if cells[4]:
            try:
                cells[4] = str(parse_amount(cells[4]))
            except IngestError as exc:
                problems.append(str(exc))
        if prior:
            problems.insert(0, prior)
        rows.append(tuple(cells))
        flags.append("; ".join(problems) or None)
    return RecordTable(CANONICAL_FIELDS, rows, list(table.record_ids),
                       list(table.provenance), flags)


def normalized_csv_text(table: RecordTable) -> str:
    if not table.is_canonical:
        raise IngestError("only normalized tables can be written")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(NORMALIZED_HEADER)
    for rid, row, src, flag in zip(table.record_ids, table.rows, table.provenance, table.flags):
        writer.writerow((rid, *row, src, flag or ""))
    return buf.getvalue()


def write_normalized_csv(table: RecordTable, path) -> None:
    text = normalized_csv_text(table)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_normalized_csv(path) -> RecordTable:
    """Inverse of ``write_normalized_csv``; ids, provenance and flags survive."""
    raw = read_csv(path)
    if tuple(normalize_name(c) for c in raw.columns) != NORMALIZED_HEADER:
        raise ColumnMismatchError(
            f"{path}: expected header {','.join(NORMALIZED_HEADER)}, got {','.join(raw.columns)}")
    rows, ids, prov, flags = [], [], [], []
    for cells in raw.rows:
        ids.append(cells[0])
        rows.append(tuple(cells[1:6]))
        prov.append(cells[6])
        flags.append(cells[7] or None)
    return RecordTable(CANONICAL_FIELDS, rows, ids, prov, flags)


def table_from_records(records: Iterable[ContractRecord], source: str = "synthetic") -> RecordTable:
    """Normalized table holding already-validated records."""
    rows, ids = [], []
    for r in records:
        ids.append(r.record_id)
        rows.append((r.authority, r.subject, r.supplier, r.date.isoformat(), str(r.amount)))
    return RecordTable(CANONICAL_FIELDS, rows, ids, [source] * len(rows))
