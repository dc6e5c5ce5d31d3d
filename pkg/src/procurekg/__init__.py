"""Procurement contract records to a validated RDF knowledge graph, with a
small SPARQL-style query engine, canned analytics and a similarity-based
amount estimator."""
from .analytics import (
    QuarterStats,
    ReportRow,
    TrendSeries,
    above_average_contracts,
    canned_report,
    institution_trend,
    quarterly_stats,
)
from .charts import render_svg_chart
from .estimator import (
    Metrics,
    VectorIndex,
    baseline_median,
    embed_ngram,
    evaluate_estimator,
    knn,
    load_vectors,
    predict_amount,
    regression_metrics,
)
from .ingest import (
    ContractRecord,
    RecordTable,
    merge_tables,
    normalize,
    parse_amount,
    parse_date,
    read_csv,
)
from .mapping import MappingSpec, default_mapping, execute_mapping, mint_iri, parse_mapping
from .query import QueryPlan, SolutionTable, builtin_temporal, evaluate, parse_query, run_query
from .rdf import IRI, Graph, Literal, Triple, parse_ntriples, serialize_ntriples
from .shapes import ValidationReport, builtin_shapes, validate
from .vocab import Vocabulary

__version__ = "0.1.0"
