import datetime as dt

import pytest

from procurekg.ingest import ContractRecord, table_from_records
from procurekg.mapping import default_mapping, execute_mapping
from procurekg.vocab import DEFAULT_BASE_IRI, Vocabulary

BASE = DEFAULT_BASE_IRI


def rec(rid, authority, supplier, date, amount, subject="supply of goods"):
    if isinstance(date, str):
        date = dt.date.fromisoformat(date)
    return ContractRecord(rid, authority, subject, supplier, date, amount)


def graph_of(records, base=BASE):
    return execute_mapping(table_from_records(records), default_mapping(base))


@pytest.fixture
def vocab():
    return Vocabulary.for_base(BASE)


@pytest.fixture
def six_contracts():
    """Institution A holds 4 contracts, B holds 2."""
    return [
        rec("t-1", "Institution A", "Supplier X", "2020-03-10", 100, "road repair works"),
        rec("t-2", "Institution A", "Supplier Y", "2020-11-02", 250, "medicines supply"),
        rec("t-3", "Institution A", "Supplier X", "2021-01-15", 400, "road asphalt works"),
        rec("t-4", "Institution A", "Supplier Z", "2021-12-24", 50, "office paper"),
        rec("t-5", "Institution B", "Supplier X", "2021-06-30", 900, "power plant fuel"),
        rec("t-6", "Institution B", "Supplier Y", "2021-12-28", 300, "medicines supply"),
    ]


@pytest.fixture
def six_graph(six_contracts):
    return graph_of(six_contracts)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
