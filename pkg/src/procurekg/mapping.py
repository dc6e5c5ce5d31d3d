"""Declarative table-to-RDF mapping (an RML-like subset).

A mapping document is JSON with three keys::

    {
      "base_iri": "https://procurement.example.org/",
      "entities": {
        "contract":    {"class": "Contract",    "template": "contract/{record_id}"},
        "institution": {"class": "Institution", "template": "institution/{authority}"},
        "supplier":    {"class": "Supplier",    "template": "supplier/{supplier}"}
      },
      "properties": [
        {"column": "authority", "predicate": "hasInstitution", "datatype": "iri"},
        ...
      ]
    }

Class and predicate names that are not absolute IRIs resolve against
``base_iri``. A property whose datatype is ``iri`` links the contract to the
entity minted from the same column.
"""
from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Optional

from . import rdf
from .ingest import IngestError, RecordTable, parse_amount, parse_date
from .rdf import IRI, Graph, Literal, Triple
from .vocab import DEFAULT_BASE_IRI, LABEL, TYPE, Vocabulary

ENTITY_KINDS = ("contract", "institution", "supplier")
DATATYPES = {
    "iri": None,
    "string": rdf.XSD_STRING,
    "integer": rdf.XSD_INTEGER,
    "decimal": rdf.XSD_DECIMAL,
    "date": rdf.XSD_DATE,
}
ROW_ID = "record_id"

_TEMPLATE = re.compile(r"([^{}/\s]+)/\{([^{}]+)\}")


class MappingError(ValueError):
    pass


class MissingBaseIRIError(MappingError):
    def __init__(self):
        super().__init__("missing base_iri")


class DuplicateRuleError(MappingError):
    pass


class MappingFormatError(MappingError):
    pass


class SlugError(MappingError):
    pass


@dataclass(frozen=True)
class EntityRule:
    kind: str
    class_iri: IRI
    segment: str
    column: str


@dataclass(frozen=True)
class PropertyRule:
    column: str
    predicate: IRI
    datatype: str  # key of DATATYPES


@dataclass(frozen=True)
class MappingSpec:
    base_iri: str
    entities: dict[str, EntityRule]
    properties: tuple[PropertyRule, ...]

    @property
    def vocabulary(self) -> Vocabulary:
        return Vocabulary.for_base(self.base_iri)

    def columns(self) -> set[str]:
        cols = {r.column for r in self.properties}
        cols.update(e.column for e in self.entities.values())
        cols.discard(ROW_ID)
        return cols


def _check_keys(obj, allowed: set, where: str, required: set = frozenset()) -> None:
    if not isinstance(obj, dict):
        raise MappingFormatError(f"{where}: expected an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise MappingFormatError(f"{where}: unknown key(s) {', '.join(unknown)}")
    missing = sorted(required - set(obj))
    if missing:
        raise MappingFormatError(f"{where}: missing key(s) {', '.join(missing)}")


def _resolve(name, base: str, where: str) -> IRI:
    if not isinstance(name, str) or not name:
        raise MappingFormatError(f"{where}: expected a non-empty name")
    text = name if re.match(r"[A-Za-z][A-Za-z0-9+.\-]*:", name) else base + name
    try:
        return IRI(text)
    except rdf.TermError as exc:
        raise MappingFormatError(f"{where}: {exc}") from None


def parse_mapping(doc: str) -> MappingSpec:
    try:
        data = json.loads(doc)
    except json.JSONDecodeError as exc:
        raise MappingFormatError(f"malformed mapping document: {exc}") from None
    return mapping_from_dict(data)


def mapping_from_dict(data) -> MappingSpec:
    _check_keys(data, {"base_iri", "entities", "properties"}, "mapping")
    base = data.get("base_iri")
    if not base:
        raise MissingBaseIRIError()
    if not isinstance(base, str) or not base.endswith("/"):
        raise MappingFormatError("base_iri must be text ending with '/'")
    try:
        IRI(base)
    except rdf.TermError as exc:
        raise MappingFormatError(f"base_iri: {exc}") from None

    raw_entities = data.get("entities")
    _check_keys(raw_entities, set(ENTITY_KINDS), "entities", set(ENTITY_KINDS))
    entities = {}
    for kind in ENTITY_KINDS:
        rule = raw_entities[kind]
        where = f"entities.{kind}"
        _check_keys(rule, {"class", "template"}, where, {"class", "template"})
        m = _TEMPLATE.fullmatch(str(rule["template"]))
        if not m:
            raise MappingFormatError(f"{where}: template must look like 'segment/{{column}}'")
        entities[kind] = EntityRule(kind, _resolve(rule["class"], base, where), m.group(1), m.group(2))
    if entities["contract"].column != ROW_ID:
        raise MappingFormatError("entities.contract: template must use {record_id}")

    raw_props = data.get("properties")
    if not isinstance(raw_props, list) or not raw_props:
        raise MappingFormatError("properties: expected a non-empty list")
    link_columns = {e.column for k, e in entities.items() if k != "contract"}
    props, seen = [], set()
    for i, rule in enumerate(raw_props):
        where = f"properties[{i}]"
        _check_keys(rule, {"column", "predicate", "datatype"}, where, {"column", "predicate", "datatype"})
        column, datatype = rule["column"], rule["datatype"]
        if not isinstance(column, str) or not column:
            raise MappingFormatError(f"{where}: column must be a non-empty name")
        if datatype not in DATATYPES:
            raise MappingFormatError(f"{where}: unknown datatype {datatype!r}")
        if datatype == "iri" and column not in link_columns:
            raise MappingFormatError(f"{where}: no entity is minted from column {column!r}")
        predicate = _resolve(rule["predicate"], base, where)
        if (column, predicate) in seen:
            raise DuplicateRuleError(f"{where}: column {column!r} already maps to {predicate}")
        seen.add((column, predicate))
        props.append(PropertyRule(column, predicate, datatype))
    return MappingSpec(base, entities, tuple(props))


def load_mapping(path) -> MappingSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_mapping(fh.read())


def default_mapping(base_iri: str = DEFAULT_BASE_IRI) -> MappingSpec:
    """The five-property procurement mapping."""
    return mapping_from_dict({
        "base_iri": base_iri,
        "entities": {
            "contract": {"class": "Contract", "template": "contract/{record_id}"},
            "institution": {"class": "Institution", "template": "institution/{authority}"},
            "supplier": {"class": "Supplier", "template": "supplier/{supplier}"},
        },
        "properties": [
            {"column": "authority", "predicate": "hasInstitution", "datatype": "iri"},
            {"column": "supplier", "predicate": "hasSupplier", "datatype": "iri"},
            {"column": "amount", "predicate": "hasAmount", "datatype": "decimal"},
            {"column": "date", "predicate": "hasDate", "datatype": "date"},
            {"column": "subject", "predicate": "hasDescription", "datatype": "string"},
        ],
    })


def slug(label: str) -> str:
    text = unicodedata.normalize("NFC", label).lower()
    text = "-".join(text.split())
    return "".join(ch for ch in text if ch.isalnum() or ch == "-")


def mint_iri(base: str, kind: str, label: str) -> IRI:
    if not label or not label.strip():
        raise SlugError(f"cannot mint a {kind} IRI from an empty label")
    s = slug(label)
    if not s:
        raise SlugError(f"label {label!r} has no letters or digits to build a {kind} IRI")
    return IRI(f"{base}{kind}/{s}")


@dataclass
class RowError:
    record_id: str
    column: str
    message: str


@dataclass
class MappingResult:
    graph: Graph
    errors: list[RowError] = field(default_factory=list)
    contracts: int = 0
    institutions: int = 0
    suppliers: int = 0


def _literal(cell: str, datatype: str, flagged: bool) -> Literal:
    if flagged:
        if datatype == "decimal" or datatype == "integer":
            cell = str(parse_amount(cell))
        elif datatype == "date":
            cell = parse_date(cell)
    return Literal(cell, DATATYPES[datatype])


def map_table(table: RecordTable, spec: MappingSpec, include_flagged: bool = False) -> MappingResult:
    """Run ``spec`` over ``table``; see ``execute_mapping``."""
    columns = {c: i for i, c in enumerate(table.columns)}
    missing = sorted(spec.columns() - set(columns))
    if missing:
        raise MappingError(f"mapping refers to column(s) absent from the table: {', '.join(missing)}")

    base = spec.base_iri
    contract_rule = spec.entities["contract"]
    linked = [spec.entities[k] for k in ENTITY_KINDS if k != "contract"]
    by_column = {e.column: e for e in linked}
    graph = Graph()
    result = MappingResult(graph)
    # entity kind -> IRI -> labels seen
    labels: dict[str, dict[IRI, set[str]]] = {e.kind: {} for e in linked}
    minted: dict[tuple[str, str], IRI] = {}

    def entity_iri(rule: EntityRule, label: str) -> IRI:
        key = (rule.kind, label)
        iri = minted.get(key)
        if iri is None:
            iri = minted[key] = mint_iri(base, rule.segment, label)
        labels[rule.kind].setdefault(iri, set()).add(label)
        return iri

    add = graph.add
    for rid, row, flag in zip(table.record_ids, table.rows, table.flags):
        flagged = flag is not None
        if flagged and not include_flagged:
            continue
        try:
            contract = mint_iri(base, contract_rule.segment, rid)
        except MappingError as exc:
            result.errors.append(RowError(rid, ROW_ID, str(exc)))
            continue
        add(Triple(contract, TYPE, contract_rule.class_iri))
        result.contracts += 1
        for rule in spec.properties:
            cell = row[columns[rule.column]]
            try:
                if rule.datatype == "iri":
                    obj = entity_iri(by_column[rule.column], cell)
                else:
                    if flagged and not cell:
                        raise MappingError("empty cell")
                    obj = _literal(cell, rule.datatype, flagged)
            except (MappingError, IngestError) as exc:
                result.errors.append(RowError(rid, rule.column, str(exc)))
                continue
            add(Triple(contract, rule.predicate, obj))
        # entities minted from columns without a linking property still exist
        for e in linked:
            cell = row[columns[e.column]]
            if not any(r.column == e.column and r.datatype == "iri" for r in spec.properties):
                try:
                    entity_iri(e, cell)
                except MappingError as exc:
                    result.errors.append(RowError(rid, e.column, str(exc)))

    for e in linked:
        for iri, names in labels[e.kind].items():
            add(Triple(iri, TYPE, e.class_iri))
            add(Triple(iri, LABEL, Literal(min(names))))
        if e.kind == "institution":
            result.institutions = len(labels[e.kind])
        elif e.kind == "supplier":
            result.suppliers = len(labels[e.kind])
    graph.freeze()
    return result


def execute_mapping(table: RecordTable, spec: Optional[MappingSpec] = None,
                    include_flagged: bool = False) -> Graph:
    """Convert a normalized table into a frozen graph.

    Each contract row yields its type triple plus one triple per property
    rule; each distinct institution and supplier yields a type and a label
    triple. Flagged rows are skipped unless ``include_flagged`` is set, in
    which case fields that fail to parse are left out (see ``map_table`` for
    the per-row error list) so the validator can report the gaps.
    """
    if spec is None:
        spec = default_mapping()
    return map_table(table, spec, include_flagged).graph


def expected_triple_count(contracts: int, institutions: int, suppliers: int) -> int:
    """Size of a graph built with the default mapping."""
    return 6 * contracts + 2 * institutions + 2 * suppliers
