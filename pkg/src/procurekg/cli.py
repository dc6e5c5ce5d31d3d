"""``procurekg`` command line: one executable, one subcommand per pipeline stage.

Exit status: 0 success, 1 validation failure, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import analytics, estimator
from .charts import render_svg_chart
from .ingest import merge_tables, normalize, normalized_csv_text, read_csv, read_normalized_csv
from .mapping import default_mapping, load_mapping, map_table
from .query import format_cell, json_cell, run_query
from .rdf import read_ntriples, serialize_ntriples
from .shapes import builtin_shapes, load_shapes, validate
from .vocab import DEFAULT_BASE_IRI, Vocabulary

log = logging.getLogger("procurekg")

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2
ENCODINGS = {"utf-8": "utf-8", "utf8": "utf-8", "cp1251": "cp1251", "windows-1251": "cp1251"}


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    alias_map: dict = field(default_factory=dict)
    drop_patterns: list = field(default_factory=list)
    mapping: Optional[str] = None
    shapes: Optional[str] = None
    base_iri: Optional[str] = None
    k: int = estimator.DEFAULT_K
    seed: int = 0
    encoding: str = "utf-8"
    window_years: int = 5
    dimension: int = estimator.DEFAULT_DIMENSION

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        cfg = cls(**data)
        # file references are relative to the config file
        for key in ("mapping", "shapes"):
            ref = getattr(cfg, key)
            if ref is not None:
                ref_path = (path.parent / ref) if not Path(ref).is_absolute() else Path(ref)
                if not ref_path.exists():
                    raise ConfigError(f"{key} file not found: {ref_path}")
                setattr(cfg, key, str(ref_path))
        if cfg.k < 1:
            raise ConfigError("k must be at least 1")
        return cfg


def _config(args) -> PipelineConfig:
    return PipelineConfig.load(args.config) if args.config else PipelineConfig()


def _vocab(args, cfg: PipelineConfig) -> Vocabulary:
    if cfg.base_iri:
        return Vocabulary.for_base(cfg.base_iri)
    mapping_path = getattr(args, "mapping", None) or cfg.mapping
    if mapping_path:
        return load_mapping(mapping_path).vocabulary
    return Vocabulary.for_base(DEFAULT_BASE_IRI)


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _table_text(header: Sequence[str], rows: list[Sequence], fmt: str) -> str:
    if fmt == "json":
        return json.dumps([{h: json_cell(v) for h, v in zip(header, r)} for r in rows],
                          indent=2, ensure_ascii=False) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([format_cell(v) for v in r])
    return buf.getvalue()


def _graph(args):
    if not args.graph:
        raise ConfigError("--graph is required")
    return read_ntriples(args.graph).freeze()


# --- subcommands ---------------------------------------------------------------

def cmd_ingest(args, cfg: PipelineConfig) -> int:
    encoding = ENCODINGS.get((args.encoding or cfg.encoding).lower())
    if encoding is None:
        raise ConfigError(f"unsupported encoding {args.encoding or cfg.encoding!r}")
    tables = [read_csv(p, encoding) for p in args.input]
    table = normalize(merge_tables(tables), cfg.drop_patterns, cfg.alias_map)
    flagged = sum(f is not None for f in table.flags)
    log.info("ingested %d rows from %d file(s); %d flagged", len(table), len(tables), flagged)
    _emit(normalized_csv_text(table), args.output)
    return EXIT_OK


def _shapes(args, cfg, vocab):
    path = getattr(args, "shapes", None) or cfg.shapes
    return load_shapes(path) if path else builtin_shapes(vocab)


def cmd_map(args, cfg: PipelineConfig) -> int:
    mapping_path = args.mapping or cfg.mapping
    spec = load_mapping(mapping_path) if mapping_path else default_mapping(cfg.base_iri or DEFAULT_BASE_IRI)
    table = read_normalized_csv(args.input)
    result = map_table(table, spec, include_flagged=args.include_flagged)
    for err in result.errors:
        log.warning("row %s, column %s: %s", err.record_id, err.column, err.message)
    report = validate(result.graph, _shapes(args, cfg, spec.vocabulary))
    if not report.conforms and not args.allow_invalid:
        sys.stderr.write(report.to_json())
        log.error("graph does not conform (%d violations); nothing written", len(report.violations))
        return EXIT_INVALID
    log.info("mapped %d contracts, %d institutions, %d suppliers into %d triples",
             result.contracts, result.institutions, result.suppliers, len(result.graph))
    _emit(serialize_ntriples(result.graph), args.output)
    return EXIT_OK


def cmd_validate(args, cfg: PipelineConfig) -> int:
    graph = _graph(args)
    report = validate(graph, _shapes(args, cfg, _vocab(args, cfg)))
    _emit(report.to_json(), args.output)
    return EXIT_OK if report.conforms else EXIT_INVALID


def cmd_query(args, cfg: PipelineConfig) -> int:
    if not args.query:
        raise ConfigError("--query is required")
    graph = _graph(args)
    text = Path(args.query).read_text(encoding="utf-8")
    table = run_query(graph, text)
    _emit(table.to_json() if args.format == "json" else table.to_csv(), args.output)
    return EXIT_OK


def cmd_report(args, cfg: PipelineConfig) -> int:
    rows = analytics.canned_report(_graph(args), _vocab(args, cfg), year=args.year)
    dicts = [r.to_dict() for r in rows]
    header = ["metric", "value", "entity", "related", "note"]
    _emit(_table_text(header, [[d[h] for h in header] for d in dicts], args.format), args.output)
    return EXIT_OK


def cmd_stats(args, cfg: PipelineConfig) -> int:
    window = args.window_years if args.window_years is not None else cfg.window_years
    rows = analytics.quarterly_stats(_graph(args), window, _vocab(args, cfg))
    header = ["year", "quarter", "count", "total", "min", "max", "mean", "median", "stddev"]
    _emit(_table_text(header, [[getattr(r, h) for h in header] for r in rows], args.format), args.output)
    if args.svg:
        Path(args.svg).write_text(render_svg_chart(rows), encoding="utf-8")
    return EXIT_OK


def cmd_trend(args, cfg: PipelineConfig) -> int:
    if not args.institution:
        raise ConfigError("--institution is required")
    series = analytics.institution_trend(_graph(args), args.institution, _vocab(args, cfg))
    _emit(_table_text(["date", "amount"], [list(p) for p in series.points], args.format), args.output)
    if args.svg:
        Path(args.svg).write_text(render_svg_chart(series), encoding="utf-8")
    return EXIT_OK


def _graph_index(graph, vocab: Vocabulary, dimension: int, seed: int) -> estimator.VectorIndex:
    table = run_query(graph, f"PREFIX : <{vocab.base}>\n"
                             "SELECT ?c ?t ?a WHERE { ?c a :Contract ; :hasDescription ?t ; :hasAmount ?a }")
    ids, texts, amounts = [], [], []
    for c, t, a in table.rows:
        if len(t.lexical.strip()) < 3:
            continue
        ids.append(c.value)
        texts.append(t.lexical)
        amounts.append(int(a.to_python()))
    if not ids:
        raise estimator.EstimatorError("graph has no contracts with descriptions and amounts")
    return estimator.VectorIndex.from_texts(ids, texts, amounts, dimension, seed)


def cmd_predict(args, cfg: PipelineConfig) -> int:
    description = " ".join(args.description).strip()
    if not description:
        raise ConfigError("description must not be empty")
    k = args.k or cfg.k
    index = _graph_index(_graph(args), _vocab(args, cfg), cfg.dimension, 0)
    print(estimator.predict_amount(description, index, k))
    return EXIT_OK


def cmd_evaluate(args, cfg: PipelineConfig) -> int:
    records = read_normalized_csv(args.input).records()
    seed = args.seed if args.seed is not None else cfg.seed
    result = estimator.evaluate_estimator(records, args.split, seed, args.k or cfg.k, cfg.dimension)
    header = ["model", "rmse", "mae", "r2", "n"]
    rows = [["median_baseline", *result.baseline.to_dict().values()],
            ["embedding_knn", *result.knn.to_dict().values()]]
    _emit(_table_text(header, rows, args.format), args.output)
    return EXIT_OK


COMMANDS = {
    "ingest": (cmd_ingest, "merge and normalize CSV exports into a normalized CSV"),
    "map": (cmd_map, "map a normalized CSV to canonical N-Triples (validated)"),
    "validate": (cmd_validate, "validate a graph against shapes; exit 1 on violations"),
    "query": (cmd_query, "run a query file against a graph"),
    "report": (cmd_report, "headline procurement statistics"),
    "stats": (cmd_stats, "quarterly amount statistics, optionally as an SVG bar chart"),
    "trend": (cmd_trend, "contract history of one institution, optionally as an SVG chart"),
    "predict": (cmd_predict, "estimate the amount of a contract from its description"),
    "evaluate": (cmd_evaluate, "compare the kNN estimator with the median baseline"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config file (JSON)")
    common.add_argument("--output", help="output file (default: stdout)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="procurekg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    p = {}
    for name, (_, help_text) in COMMANDS.items():
        p[name] = sub.add_parser(name, parents=[common], help=help_text, description=help_text)

    p["ingest"].add_argument("--input", nargs="+", required=True, help="source CSV file(s)")
    p["ingest"].add_argument("--encoding", help="utf-8 (default) or cp1251")

    p["map"].add_argument("--input", required=True, help="normalized CSV")
    p["map"].add_argument("--mapping", help="mapping document (JSON)")
    p["map"].add_argument("--shapes", help="shapes document (JSON); built-in shapes by default")
    p["map"].add_argument("--include-flagged", action="store_true", help="also map rows flagged at ingest")
    p["map"].add_argument("--allow-invalid", action="store_true", help="write the graph even if validation fails")

    for name in ("validate", "query", "report", "stats", "trend", "predict"):
        p[name].add_argument("--graph", required=True, help="N-Triples graph file")
        p[name].add_argument("--mapping", help="mapping document, used for its base IRI")
    p["validate"].add_argument("--shapes", help="shapes document (JSON)")
    p["query"].add_argument("--query", required=True, help="query file")
    for name in ("query", "report", "stats", "trend", "evaluate"):
        p[name].add_argument("--format", choices=("csv", "json"), default="csv")
    p["report"].add_argument("--year", type=int, help="year for the highest-total institution metric")
    p["stats"].add_argument("--window-years", type=int)
    p["stats"].add_argument("--svg", help="write a bar chart here")
    p["trend"].add_argument("--institution", required=True, help="institution IRI or name")
    p["trend"].add_argument("--svg", help="write a trend chart here")
    p["predict"].add_argument("description", nargs="*", help="contract description")
    p["predict"].add_argument("--k", type=int)
    p["evaluate"].add_argument("--input", required=True, help="normalized CSV")
    p["evaluate"].add_argument("--split", type=float, default=0.8)
    p["evaluate"].add_argument("--seed", type=int)
    p["evaluate"].add_argument("--k", type=int)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)
    if getattr(args, "k", None) is not None and args.k < 1:
        sys.stderr.write("procurekg: error: --k must be at least 1\n")
        return EXIT_USAGE
    handler = COMMANDS[args.command][0]
    try:
        return handler(args, _config(args))
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"procurekg {args.command}: error: {exc}\n")
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
