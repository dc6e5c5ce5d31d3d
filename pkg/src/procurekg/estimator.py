"""Contract amount estimation by exact cosine k-nearest-neighbour search over
description embeddings, with a median-of-neighbours predictor and an
evaluation harness against a constant median baseline.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .ingest import ContractRecord, RecordTable
from .rdf import Graph, Literal
from .vocab import DEFAULT_BASE_IRI, Vocabulary

DEFAULT_DIMENSION = 256
DEFAULT_K = 9
METRIC_SCALE = 1_000_000  # metrics are reported in millions of denars


class EstimatorError(ValueError):
    pass


class VectorFileError(EstimatorError):
    def __init__(self, path, errors: list[tuple[int, str]]):
        shown = "; ".join(f"line {n}: {msg}" for n, msg in errors[:10])
        more = f" (+{len(errors) - 10} more)" if len(errors) > 10 else ""
        super().__init__(f"{path}: {shown}{more}")
        self.errors = errors


def _bucket(gram: str, dimension: int, key: bytes) -> int:
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little") % dimension


def ngram_counts(text: str, dimension: int = DEFAULT_DIMENSION, seed: int = 0) -> np.ndarray:
    """Un-normalized hashed character 3-gram counts."""
    if dimension < 16:
        raise EstimatorError(f"dimension must be at least 16, got {dimension}")
    s = text.strip().lower()
    if len(s) < 3:
        raise EstimatorError(f"text too short to embed: {text!r}")
    key = str(seed).encode("ascii")
    counts = np.zeros(dimension)
    for i in range(len(s) - 2):
        counts[_bucket(s[i:i + 3], dimension, key)] += 1
    return counts


def embed_ngram(text: str, dimension: int = DEFAULT_DIMENSION, seed: int = 0) -> np.ndarray:
    """L2-normalized hashed character 3-gram vector; deterministic in (text, dimension, seed)."""
    counts = ngram_counts(text, dimension, seed)
    return counts / np.linalg.norm(counts)


def cosine(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


class VectorIndex:
    """Exact cosine-similarity index over id-keyed vectors with known amounts.

    ``embedder`` (text -> vector) is set when the index was built from texts
    with a known embedding, so descriptions can be queried directly.
    """

    def __init__(self, ids: Sequence[str], vectors, amounts: Sequence[int],
                 embedder: Optional[Callable[[str], np.ndarray]] = None):
        matrix = np.asarray(vectors, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != len(ids) or len(ids) != len(amounts):
            raise EstimatorError("ids, vectors and amounts must align")
        if matrix.shape[1] == 0:
            raise EstimatorError("vectors must have positive dimension")
        if not np.all(np.isfinite(matrix)):
            raise EstimatorError("vectors contain non-finite values")
        if len(set(ids)) != len(ids):
            raise EstimatorError("record ids must be unique")
        norms = np.linalg.norm(matrix, axis=1)
        if np.any(norms == 0):
            bad = [ids[i] for i in np.flatnonzero(norms == 0)[:5]]
            raise EstimatorError(f"zero vector(s) for {', '.join(bad)}")
        self.ids = list(ids)
        self.unit = matrix / norms[:, None]
        self.amounts = np.asarray(amounts, dtype=np.int64)
        self.dimension = matrix.shape[1]
        self.embedder = embedder
        # rank of each id in ascending id order, for tie-breaking
        self._id_rank = np.empty(len(ids), dtype=np.int64)
        self._id_rank[np.argsort(np.array(self.ids, dtype=object), kind="stable")] = np.arange(len(ids))

    def __len__(self) -> int:
        return len(self.ids)

    def amount_of(self, record_id: str) -> int:
        return int(self.amounts[self.ids.index(record_id)])

    @classmethod
    def from_texts(cls, ids: Sequence[str], texts: Sequence[str], amounts: Sequence[int],
                   dimension: int = DEFAULT_DIMENSION, seed: int = 0) -> "VectorIndex":
        embed = lambda t: embed_ngram(t, dimension, seed)  # noqa: E731
        vectors = np.array([embed(t) for t in texts]).reshape(len(texts), dimension)
        return cls(ids, vectors, amounts, embedder=embed)

    @classmethod
    def from_records(cls, records: Sequence[ContractRecord], dimension: int = DEFAULT_DIMENSION,
                     seed: int = 0) -> "VectorIndex":
        return cls.from_texts([r.record_id for r in records], [r.subject for r in records],
                              [r.amount for r in records], dimension, seed)


def knn(index: VectorIndex, query, k: int = DEFAULT_K) -> list[tuple[str, float]]:
    """Top-k entries by cosine similarity, descending; ties by ascending id."""
    if len(index) == 0:
        raise EstimatorError("index is empty")
    if k < 1:
        raise EstimatorError(f"k must be at least 1, got {k}")
    q = np.asarray(query, dtype=float).ravel()
    if q.shape[0] != index.dimension:
        raise EstimatorError(f"query has dimension {q.shape[0]}, index has {index.dimension}")
    norm = np.linalg.norm(q)
    if not np.isfinite(norm) or norm == 0:
        raise EstimatorError("query vector must be finite and non-zero")
    # Row-wise sum keeps identical rows bit-identical (BLAS kernels may not).
    sims = (index.unit * (q / norm)).sum(axis=1)
    order = np.lexsort((index._id_rank, -sims))[:min(k, len(index))]
    return [(index.ids[i], float(sims[i]) + 0.0) for i in order]


def round_half_away(x) -> int:
    return int(Decimal(str(x)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def median_amount(amounts: Sequence[int]) -> int:
    """Median in whole denars; even counts average the middle pair and round
    half away from zero."""
    if len(amounts) == 0:
        raise EstimatorError("median of no amounts")
    xs = sorted(int(a) for a in amounts)
    mid = len(xs) // 2
    if len(xs) % 2:
        return xs[mid]
    return round_half_away(Decimal(xs[mid - 1] + xs[mid]) / 2)


def predict_from_vector(vector, index: VectorIndex, k: int = DEFAULT_K) -> int:
    neighbours = knn(index, vector, k)
    pos = {rid: i for i, rid in enumerate(index.ids)}
    return median_amount([int(index.amounts[pos[rid]]) for rid, _ in neighbours])


def predict_amount(description: str, index: VectorIndex, k: int = DEFAULT_K,
                   embed: Optional[Callable[[str], np.ndarray]] = None) -> int:
    """Median amount of the ``k`` contracts whose descriptions are most similar."""
    embed = embed or index.embedder
    if embed is None:
        raise EstimatorError("index has no embedder; pass embed= or use predict_from_vector")
    return predict_from_vector(embed(description), index, k)


@dataclass(frozen=True)
class ConstantPredictor:
    value: int

    def __call__(self, _description=None) -> int:
        return self.value


def baseline_median(train: Sequence[int]) -> ConstantPredictor:
    """Predict the training median for every input."""
    if len(train) == 0:
        raise EstimatorError("baseline needs at least one training amount")
    return ConstantPredictor(median_amount(train))


@dataclass(frozen=True)
class Metrics:
    rmse: float
    mae: float
    r2: Optional[float]  # None when the test amounts have zero variance
    n: int

    def to_dict(self) -> dict:
        return {"rmse": self.rmse, "mae": self.mae, "r2": self.r2, "n": self.n}


def regression_metrics(y_true, y_pred, scale: float = 1.0) -> Metrics:
    """RMSE, MAE and R^2 (against the mean of ``y_true``), in units of ``scale``."""
    t = np.asarray(y_true, dtype=float) / scale
    p = np.asarray(y_pred, dtype=float) / scale
    if t.shape != p.shape or t.size == 0:
        raise EstimatorError("need equally sized, non-empty truth and prediction arrays")
    err = p - t
    ss_res = float(np.sum(err ** 2))
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    return Metrics(
        rmse=math.sqrt(ss_res / t.size),
        mae=float(np.mean(np.abs(err))),
        r2=None if ss_tot == 0 else 1.0 - ss_res / ss_tot,
        n=int(t.size),
    )


def train_test_split(records: Sequence, split_fraction: float, seed: int) -> tuple[list, list]:
    """Seeded shuffle, then the first ``split_fraction`` of rows train."""
    if not 0 < split_fraction < 1:
        raise EstimatorError(f"split_fraction must be in (0, 1), got {split_fraction}")
    n = len(records)
    order = np.random.default_rng(seed).permutation(n)
    n_train = min(max(int(round(n * split_fraction)), 1), n - 1)
    shuffled = [records[i] for i in order]
    return shuffled[:n_train], shuffled[n_train:]


@dataclass(frozen=True)
class Evaluation:
    knn: Metrics
    baseline: Metrics
    n_train: int
    n_test: int


def evaluate_estimator(records: Sequence[ContractRecord], split_fraction: float = 0.8, seed: int = 0,
                       k: int = DEFAULT_K, dimension: int = DEFAULT_DIMENSION,
                       embed_seed: int = 0) -> Evaluation:
    """Score the kNN median estimator and the median baseline on the same
    held-out rows. Metrics are in millions of denars."""
    if len(records) < 10:
        raise EstimatorError(f"need at least 10 records, got {len(records)}")
    train, test = train_test_split(list(records), split_fraction, seed)
    index = VectorIndex.from_records(train, dimension, embed_seed)
    baseline = baseline_median([r.amount for r in train])
    truth = [r.amount for r in test]
    knn_pred = [predict_amount(r.subject, index, k) for r in test]
    base_pred = [baseline(r.subject) for r in test]
    return Evaluation(
        knn=regression_metrics(truth, knn_pred, METRIC_SCALE),
        baseline=regression_metrics(truth, base_pred, METRIC_SCALE),
        n_train=len(train),
        n_test=len(test),
    )


AmountSource = Union[Mapping[str, int], RecordTable, Graph, Iterable[ContractRecord]]


def _amount_lookup(source: AmountSource, vocab: Optional[Vocabulary] = None) -> dict[str, int]:
    if isinstance(source, Mapping):
        return {str(k): int(v) for k, v in source.items()}
    if isinstance(source, RecordTable):
        return {r.record_id: r.amount for r in source.records()}
    if isinstance(source, Graph):
        v = vocab or Vocabulary.for_base(DEFAULT_BASE_IRI)
        out = {}
        for t in source.triples((None, v.hasAmount, None)):
            if isinstance(t.object, Literal):
                try:
                    amount = int(t.object.to_python())
                except ValueError:
                    continue
                out[t.subject.value] = amount
                out[t.subject.value.rsplit("/", 1)[-1]] = amount
        return out
    return {r.record_id: r.amount for r in source}


def load_vectors(path, amounts: AmountSource, vocab: Optional[Vocabulary] = None) -> VectorIndex:
    """Read a vector file: first line the dimension, then one
    ``record_id<TAB>v1 v2 ... vD`` line per record."""
    lookup = _amount_lookup(amounts, vocab)
    errors: list[tuple[int, str]] = []
    ids, vectors, values = [], [], []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        try:
            dimension = int(header)
            if dimension <= 0:
                raise ValueError
        except ValueError:
            raise VectorFileError(path, [(1, f"expected a positive dimension, found {header!r}")]) from None
        seen = set()
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            rid, tab, rest = line.partition("\t")
            if not tab:
                errors.append((lineno, "missing tab between record id and values"))
                continue
            try:
                vec = [float(x) for x in rest.split()]
            except ValueError:
                errors.append((lineno, "non-numeric vector component"))
                continue
            if len(vec) != dimension:
                errors.append((lineno, f"dimension mismatch: expected {dimension} values, found {len(vec)}"))
                continue
            if not all(math.isfinite(x) for x in vec):
                errors.append((lineno, "non-finite vector component"))
                continue
            if not any(vec):
                errors.append((lineno, f"zero-norm vector for {rid}"))
                continue
            if rid not in lookup:
                errors.append((lineno, f"unknown record id {rid!r}"))
                continue
            if rid in seen:
                errors.append((lineno, f"duplicate record id {rid!r}"))
                continue
            seen.add(rid)
            ids.append(rid)
            vectors.append(vec)
            values.append(lookup[rid])
    if errors:
        raise VectorFileError(path, errors)
    return VectorIndex(ids, np.array(vectors, dtype=float).reshape(len(ids), dimension), values)


def write_vectors(path, ids: Sequence[str], vectors) -> None:
    matrix = np.asarray(vectors, dtype=float)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{matrix.shape[1]}\n")
        for rid, row in zip(ids, matrix):
            fh.write(rid + "\t" + " ".join(repr(float(x)) for x in row) + "\n")
