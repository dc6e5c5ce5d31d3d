"""Canned procurement analyses run through the query engine."""
from __future__ import annotations

import datetime as _dt
import difflib
import re
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Optional, Union

from .mapping import mint_iri
from .query import SolutionTable, run_query
from .rdf import IRI, Graph, Literal
from .vocab import DEFAULT_BASE_IRI, Vocabulary

METRICS = (
    "total_contracts",
    "total_amount",
    "year_most_contracts",
    "institution_most_contracts",
    "highest_contract_value",
    "supplier_highest_total",
    "most_supplier_diverse_institution",
    "most_common_pair",
    "avg_contracts_per_institution",
    "top_avg_contract_value_institution",
    "max_contracts_by_institution",
    "highest_total_institution_in_year",
    "top_contract_in_window",
)


class AnalyticsError(ValueError):
    pass


class InstitutionNotFound(AnalyticsError):
    def __init__(self, institution: str, suggestions: list[str]):
        hint = f"; nearest: {', '.join(suggestions)}" if suggestions else ""
        super().__init__(f"unknown institution {institution}{hint}")
        self.suggestions = suggestions


@dataclass(frozen=True)
class ReportRow:
    metric: str
    value: object
    entity: Optional[IRI] = None
    related: Optional[IRI] = None
    note: Optional[str] = None

    def to_dict(self) -> dict:
        value = self.value
        if isinstance(value, Decimal):
            value = int(value) if value == value.to_integral_value() else float(value)
        return {
            "metric": self.metric,
            "value": value,
            "entity": None if self.entity is None else self.entity.value,
            "related": None if self.related is None else self.related.value,
            "note": self.note,
        }


@dataclass(frozen=True)
class QuarterStats:
    year: int
    quarter: int
    count: int
    total: int
    min: int
    max: int
    mean: float
    median: float
    stddev: float

    @property
    def label(self) -> str:
        return f"{self.year} Q{self.quarter}"


@dataclass(frozen=True)
class TrendSeries:
    institution: IRI
    label: str
    points: tuple[tuple[_dt.date, int], ...]


def _prefix(vocab: Vocabulary) -> str:
    return f"PREFIX : <{vocab.base}>\n"


def _first(table: SolutionTable) -> Optional[tuple]:
    return table.rows[0] if table.rows else None


def _label(graph: Graph, vocab: Vocabulary, entity: Optional[IRI]) -> Optional[str]:
    if entity is None:
        return None
    lit = graph.value(entity, vocab.label)
    return lit.lexical if isinstance(lit, Literal) else entity.value


def _int(value) -> Optional[int]:
    return None if value is None else int(value)


def latest_contract_date(graph: Graph, vocab: Vocabulary) -> Optional[_dt.date]:
    row = _first(run_query(graph, _prefix(vocab) +
                           "SELECT (MAX(?d) AS ?latest) WHERE { ?c a :Contract ; :hasDate ?d }"))
    return row[0] if row else None


def canned_report(graph: Graph, vocab: Optional[Vocabulary] = None, year: Optional[int] = None,
                  window: tuple[int, int, int] = (12, 20, 31)) -> list[ReportRow]:
    """Headline statistics of a procurement graph, one row per metric.

    ``year`` selects the year for the highest-total-institution metric
    (default: year of the latest contract). ``window`` is (month, first day,
    last day) for the top-contract metric; the default is late December.
    Argmax ties go to the lexicographically smallest IRI.
    """
    v = vocab or Vocabulary.for_base(DEFAULT_BASE_IRI)
    P = _prefix(v)
    q = lambda text: run_query(graph, P + text)  # noqa: E731
    rows: list[ReportRow] = []

    def entity_row(metric, table, note=None):
        r = _first(table)
        entity = r[0] if r else None
        rows.append(ReportRow(metric, _label(graph, v, entity), entity, note=note))

    total = q("SELECT (COUNT(?c) AS ?n) (SUM(?a) AS ?s) WHERE { ?c a :Contract ; :hasAmount ?a }").rows[0]
    n_contracts = total[0]
    rows.append(ReportRow("total_contracts", n_contracts))
    rows.append(ReportRow("total_amount", int(total[1])))

    r = _first(q("SELECT ?y (COUNT(?c) AS ?n) WHERE { ?c a :Contract ; :hasDate ?d } "
                 "GROUP BY (YEAR(?d) AS ?y) ORDER BY DESC(?n) ASC(?y) LIMIT 1"))
    rows.append(ReportRow("year_most_contracts", r[0] if r else None))

    per_inst = q("SELECT ?i (COUNT(?c) AS ?n) WHERE { ?c a :Contract ; :hasInstitution ?i } "
                 "GROUP BY ?i ORDER BY DESC(?n) ASC(?i)")
    entity_row("institution_most_contracts", per_inst)

    r = _first(q("SELECT ?c ?a WHERE { ?c a :Contract ; :hasAmount ?a } ORDER BY DESC(?a) ASC(?c) LIMIT 1"))
    rows.append(ReportRow("highest_contract_value", _int(r[1].to_python()) if r else None,
                          r[0] if r else None))

    entity_row("supplier_highest_total",
               q("SELECT ?s (SUM(?a) AS ?t) WHERE { ?c a :Contract ; :hasSupplier ?s ; :hasAmount ?a } "
                 "GROUP BY ?s ORDER BY DESC(?t) ASC(?s) LIMIT 1"))
    entity_row("most_supplier_diverse_institution",
               q("SELECT ?i (COUNT(DISTINCT ?s) AS ?k) WHERE { ?c a :Contract ; :hasInstitution ?i ; "
                 ":hasSupplier ?s } GROUP BY ?i ORDER BY DESC(?k) ASC(?i) LIMIT 1"))

    r = _first(q("SELECT ?i ?s (COUNT(?c) AS ?n) WHERE { ?c a :Contract ; :hasInstitution ?i ; :hasSupplier ?s } "
                 "GROUP BY ?i ?s ORDER BY DESC(?n) ASC(?i) ASC(?s) LIMIT 1"))
    if r:
        pair = f"{_label(graph, v, r[0])} / {_label(graph, v, r[1])}"
        rows.append(ReportRow("most_common_pair", pair, r[0], r[1], note=f"contracts={r[2]}"))
    else:
        rows.append(ReportRow("most_common_pair", None))

    n_inst = len(per_inst)
    rows.append(ReportRow("avg_contracts_per_institution", n_contracts / n_inst if n_inst else None))

    entity_row("top_avg_contract_value_institution",
               q("SELECT ?i (AVG(?a) AS ?m) WHERE { ?c a :Contract ; :hasInstitution ?i ; :hasAmount ?a } "
                 "GROUP BY ?i ORDER BY DESC(?m) ASC(?i) LIMIT 1"))
    rows.append(ReportRow("max_contracts_by_institution", per_inst.rows[0][1] if n_inst else 0))

    if year is None:
        latest = latest_contract_date(graph, v)
        year = latest.year if latest else None
    if year is not None:
        entity_row("highest_total_institution_in_year",
                   q("SELECT ?i (SUM(?a) AS ?t) WHERE { ?c a :Contract ; :hasInstitution ?i ; :hasAmount ?a ; "
                     f":hasDate ?d FILTER(YEAR(?d) = {int(year)}) }} GROUP BY ?i ORDER BY DESC(?t) ASC(?i) LIMIT 1"),
                   note=f"year={year}")
    else:
        rows.append(ReportRow("highest_total_institution_in_year", None))

    month, first, last = window
    r = _first(q("SELECT ?c ?a WHERE { ?c a :Contract ; :hasAmount ?a ; :hasDate ?d "
                 f"FILTER(MONTH(?d) = {int(month)} && DAY(?d) >= {int(first)} && DAY(?d) <= {int(last)}) }} "
                 "ORDER BY DESC(?a) ASC(?c) LIMIT 1"))
    rows.append(ReportRow("top_contract_in_window", _int(r[1].to_python()) if r else None,
                          r[0] if r else None, note=f"month={month} days={first}-{last}"))
    return rows


def report_dict(rows: list[ReportRow]) -> dict[str, ReportRow]:
    return {r.metric: r for r in rows}


def quarterly_stats(graph: Graph, window_years: int = 5,
                    vocab: Optional[Vocabulary] = None) -> list[QuarterStats]:
    """Per-quarter amount statistics over the last ``window_years`` calendar
    years, counted back from the latest contract date in the graph."""
    if window_years <= 0:
        raise AnalyticsError(f"window_years must be positive, got {window_years}")
    v = vocab or Vocabulary.for_base(DEFAULT_BASE_IRI)
    latest = latest_contract_date(graph, v)
    if latest is None:
        raise AnalyticsError("graph has no dated contracts")
    first_year = latest.year - window_years + 1
    table = run_query(graph, _prefix(v) + f"""
        SELECT ?y ?q (COUNT(?c) AS ?n) (SUM(?a) AS ?total) (MIN(?a) AS ?lo) (MAX(?a) AS ?hi)
               (AVG(?a) AS ?mean) (MEDIAN(?a) AS ?med) (STDDEV(?a) AS ?sd)
        WHERE {{ ?c a :Contract ; :hasAmount ?a ; :hasDate ?d FILTER(YEAR(?d) >= {first_year}) }}
        GROUP BY (YEAR(?d) AS ?y) (QUARTER(?d) AS ?q)
        ORDER BY ?y ?q""")
    return [QuarterStats(y, qtr, n, int(total), int(lo), int(hi), float(mean), float(med), float(sd))
            for y, qtr, n, total, lo, hi, mean, med, sd in table.rows]


def above_average_contracts(graph: Graph, vocab: Optional[Vocabulary] = None) -> list[tuple[IRI, int]]:
    """Contracts whose amount strictly exceeds the (exact) mean amount,
    largest first."""
    v = vocab or Vocabulary.for_base(DEFAULT_BASE_IRI)
    table = run_query(graph, _prefix(v) + "SELECT ?c ?a WHERE { ?c a :Contract ; :hasAmount ?a }")
    if not table.rows:
        return []
    amounts = [(c, a.to_python()) for c, a in table.rows]
    mean = sum(Fraction(a) for _, a in amounts) / len(amounts)
    above = [(c, int(a)) for c, a in amounts if Fraction(a) > mean]
    above.sort(key=lambda ca: (-ca[1], ca[0].value))
    return above


def resolve_institution(graph: Graph, institution: Union[IRI, str],
                        vocab: Optional[Vocabulary] = None) -> IRI:
    """IRI of an institution given its IRI or its name."""
    v = vocab or Vocabulary.for_base(DEFAULT_BASE_IRI)
    known = graph.subjects(v.type, v.Institution)
    if isinstance(institution, IRI):
        candidate = institution
    elif re.match(r"[A-Za-z][A-Za-z0-9+.\-]*://", institution):
        candidate = IRI(institution)
    else:
        try:
            candidate = mint_iri(v.base, "institution", institution)
        except ValueError:
            candidate = None
    if candidate in known:
        return candidate
    wanted = str(candidate or institution).rsplit("/", 1)[-1]
    slugs = {k.value.rsplit("/", 1)[-1]: k.value for k in known}
    near = difflib.get_close_matches(wanted, list(slugs), n=3, cutoff=0.5)
    raise InstitutionNotFound(str(candidate or institution), [slugs[s] for s in near])


def institution_trend(graph: Graph, institution: Union[IRI, str],
                      vocab: Optional[Vocabulary] = None) -> TrendSeries:
    """Date-sorted (date, amount) points for every contract of an institution."""
    v = vocab or Vocabulary.for_base(DEFAULT_BASE_IRI)
    iri = resolve_institution(graph, institution, v)
    table = run_query(graph, _prefix(v) + f"""
        SELECT ?d ?a ?c WHERE {{ ?c a :Contract ; :hasInstitution {iri.n3()} ; :hasDate ?d ; :hasAmount ?a }}
        ORDER BY ?d ?c""")
    points = tuple((d.to_python(), int(a.to_python())) for d, a, _ in table.rows)
    return TrendSeries(iri, _label(graph, v, iri), points)
