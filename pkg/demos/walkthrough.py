"""End-to-end tour of the command line on a seeded synthetic export.

Run with ``python demos/walkthrough.py [workdir]``. Every step calls the same
entry point as the ``procurekg`` command, so the printed commands can be
pasted into a shell.
"""
import json
import shlex
import sys
import tempfile
from pathlib import Path

from procurekg.cli import run
from procurekg.synthetic import SOURCE_ALIASES, synthetic_records, write_source_csv


def step(title, *argv):
    print(f"\n== {title}\n$ procurekg {shlex.join(argv)}", flush=True)
    code = run(list(argv))
    print(f"(exit {code})", flush=True)
    return code


def main(workdir: Path) -> None:
    workdir.mkdir(parents=True, exist_ok=True)
    # Two yearly exports, one of them with a row whose supplier is missing.
    records = synthetic_records(400, institutions=25, suppliers=60, seed=7, first_year=2017, years=5)
    write_source_csv(workdir / "export-a.csv", records[:200], blank_supplier_rows={12})
    write_source_csv(workdir / "export-b.csv", records[200:])
    config = workdir / "config.json"
    config.write_text(json.dumps({"alias_map": SOURCE_ALIASES, "drop_patterns": ["No."]}, indent=2))
    cfg = ("--config", str(config))

    norm, graph = workdir / "contracts.csv", workdir / "contracts.nt"
    step("merge and normalize the exports", "ingest", "--input", str(workdir / "export-a.csv"),
         str(workdir / "export-b.csv"), "--output", str(norm), *cfg)
    flagged = [line for line in norm.read_text(encoding="utf-8").splitlines() if not line.endswith(",")]
    print(f"{len(flagged) - 1} flagged row(s):", *flagged[1:], sep="\n  ")

    step("map to RDF (flagged rows are skipped)", "map", "--input", str(norm), "--output", str(graph), *cfg)
    print(f"{sum(1 for _ in graph.open(encoding='utf-8'))} triples written to {graph.name}")

    step("mapping the flagged row too is blocked by validation", "map", "--input", str(norm),
         "--include-flagged", "--output", str(workdir / "with-flagged.nt"), *cfg)

    step("validate the clean graph", "validate", "--graph", str(graph), *cfg)
    step("canned report", "report", "--graph", str(graph), *cfg)

    query = workdir / "per-year.rq"
    query.write_text("PREFIX : <https://procurement.example.org/>\n"
                     "SELECT ?year (COUNT(?c) AS ?contracts) (MEDIAN(?a) AS ?median)\n"
                     "WHERE { ?c :hasAmount ?a ; :hasDate ?d }\n"
                     "GROUP BY (YEAR(?d) AS ?year) ORDER BY ?year\n", encoding="utf-8")
    step("contracts and median value per year", "query", "--graph", str(graph), "--query", str(query), *cfg)

    step("quarterly statistics for the last two years", "stats", "--graph", str(graph), "--window-years", "2",
         "--svg", str(workdir / "quarters.svg"), *cfg)
    step("one institution over time", "trend", "--graph", str(graph), "--institution", records[0].authority,
         "--svg", str(workdir / "trend.svg"), "--output", str(workdir / "trend.csv"), *cfg)
    step("estimate a new contract", "predict", "--graph", str(graph),
         "supply of insulin and antibiotics for the clinical hospital", *cfg)
    step("held-out comparison with the median baseline", "evaluate", "--input", str(norm), "--seed", "3", *cfg)
    print(f"\noutputs are in {workdir}")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="procurekg-")))
