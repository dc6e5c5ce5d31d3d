import hashlib
import math
import random
from collections import Counter

import numpy as np
import pytest

import oracles
from procurekg.estimator import (
    EstimatorError,
    VectorFileError,
    VectorIndex,
    baseline_median,
    cosine,
    embed_ngram,
    evaluate_estimator,
    knn,
    load_vectors,
    median_amount,
    predict_amount,
    regression_metrics,
    train_test_split,
    write_vectors,
)
from procurekg.synthetic import synthetic_records


def reference_embedding(text, dimension=256, seed=0):
    """Hashed 3-gram bag built directly from the documented scheme."""
    s = text.strip().lower()
    grams = Counter(s[i:i + 3] for i in range(len(s) - 2))
    vec = [0.0] * dimension
    for gram, n in grams.items():
        h = hashlib.blake2b(gram.encode(), digest_size=8, key=str(seed).encode()).digest()
        vec[int.from_bytes(h, "little") % dimension] += n
    norm = math.sqrt(sum(x * x for x in vec))
    return [x / norm for x in vec]


class TestEmbedding:
    def test_matches_reference(self):
        for text in ("water pipeline repair", "Набавка на лекови", "abc"):
            for dim, seed in ((256, 0), (64, 3), (16, 9)):
                assert np.allclose(embed_ngram(text, dim, seed), reference_embedding(text, dim, seed),
                                   rtol=0, atol=1e-15)

    def test_single_gram(self):
        v = embed_ngram("abc")
        assert np.count_nonzero(v) == 1 and math.isclose(float(np.linalg.norm(v)), 1.0)

    def test_deterministic_and_case_insensitive(self):
        assert np.array_equal(embed_ngram("Road Works"), embed_ngram("road works"))
        assert not np.array_equal(embed_ngram("road works", seed=0), embed_ngram("road works", seed=1))

    def test_similar_descriptions_score_higher(self):
        base = "water pipeline repair"
        near = cosine(embed_ngram(base), embed_ngram("water pipeline repairs"))
        far = cosine(embed_ngram(base), embed_ngram("office furniture"))
        ref_near = float(np.dot(reference_embedding(base), reference_embedding("water pipeline repairs")))
        ref_far = float(np.dot(reference_embedding(base), reference_embedding("office furniture")))
        assert math.isclose(near, ref_near, rel_tol=1e-12) and math.isclose(far, ref_far, abs_tol=1e-12)
        # 19 of the 20 trigrams are shared; hashing can only add collisions
        assert near >= math.sqrt(19 / 20) - 1e-12
        assert near > far

    @pytest.mark.parametrize("text,dim", [("ab", 64), ("  a ", 64), ("abcd", 8)])
    def test_errors(self, text, dim):
        with pytest.raises(EstimatorError):
            embed_ngram(text, dim)


def index_of(vectors, amounts=None, ids=None):
    n = len(vectors)
    return VectorIndex(ids or [f"r{i:05d}" for i in range(n)], vectors, amounts or [1] * n)


class TestKnn:
    def test_identity_first(self):
        rng = np.random.default_rng(0)
        vecs = rng.normal(size=(20, 8))
        idx = index_of(vecs)
        top = knn(idx, vecs[7] * 3.0, 3)
        assert top[0][0] == "r00007" and math.isclose(top[0][1], 1.0, rel_tol=1e-12)

    def test_orthogonal_all_zero(self):
        idx = index_of([[1.0, 0, 0], [0, 1.0, 0], [0, 2.0, 0]])
        result = knn(idx, [0, 0, 5.0], 9)
        assert [s for _, s in result] == [0.0, 0.0, 0.0]
        assert [rid for rid, _ in result] == ["r00000", "r00001", "r00002"]

    def test_clipped_to_index_size(self):
        assert len(knn(index_of([[1.0, 0], [0, 1.0], [1.0, 1.0]]), [1.0, 0], 9)) == 3

    def test_ties_by_record_id(self):
        idx = VectorIndex(["b", "c", "a"], [[1.0, 0], [2.0, 0], [3.0, 0]], [1, 2, 3])
        assert [rid for rid, _ in knn(idx, [1.0, 0], 2)] == ["a", "b"]

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 600))
        vecs = rng.normal(size=(n, 64))
        dup = rng.integers(0, n, size=n // 10)
        vecs[rng.integers(0, n, size=n // 10)] = vecs[dup]
        ids = [f"id-{x}" for x in rng.permutation(n)]
        idx = VectorIndex(ids, vecs, [1] * n)
        q = vecs[int(rng.integers(0, n))] + rng.normal(scale=0.5, size=64)
        k = int(rng.integers(1, 30))
        sims = (vecs * q).sum(axis=1) / (np.linalg.norm(vecs, axis=1) * np.linalg.norm(q))
        want = sorted(range(n), key=lambda i: (-sims[i], ids[i]))[:k]
        assert [rid for rid, _ in knn(idx, q, k)] == [ids[i] for i in want]

    def test_fsum_oracle_small(self):
        rng = np.random.default_rng(5)
        vecs = rng.normal(size=(50, 16))
        idx = index_of(vecs)
        q = rng.normal(size=16)
        unit = [list(v / np.linalg.norm(v)) for v in vecs]
        want = oracles.brute_knn(unit, list(q), 7)
        assert [rid for rid, _ in knn(idx, q, 7)] == [f"r{i:05d}" for i in want]

    @pytest.mark.parametrize("scale", [0.5, 2.0, 1024.0, 3.7, 1e-3])
    def test_scale_invariance(self, scale):
        rng = np.random.default_rng(11)
        idx = index_of(rng.normal(size=(300, 32)))
        q = rng.normal(size=32)
        assert [r for r, _ in knn(idx, q, 9)] == [r for r, _ in knn(idx, q * scale, 9)]

    def test_errors(self):
        idx = index_of([[1.0, 0]])
        for bad_query, k in (([1.0, 0, 0], 1), ([0.0, 0.0], 1), ([1.0, 0], 0)):
            with pytest.raises(EstimatorError):
                knn(idx, bad_query, k)
        with pytest.raises(EstimatorError):
            knn(VectorIndex([], np.zeros((0, 2)), []), [1.0, 0], 1)
        with pytest.raises(EstimatorError):
            index_of([[0.0, 0.0]])
        with pytest.raises(EstimatorError):
            VectorIndex(["a", "a"], [[1.0], [2.0]], [1, 2])


class TestPrediction:
    def test_odd_median(self):
        idx = index_of([[1.0, i * 1e-3] for i in range(9)], list(range(1, 10)))
        assert predict_amount("x", idx, 9, embed=lambda _: np.array([1.0, 0.0])) == 5

    def test_clipped_even_median(self):
        idx = index_of([[1.0, 0], [0, 1.0], [1.0, 1.0], [1.0, -1.0]], [10, 20, 30, 40])
        assert predict_amount("x", idx, 9, embed=lambda _: np.array([1.0, 0.0])) == 25

    def test_exact_match_with_k1(self):
        texts = ["supply of insulin pens"] + [f"asphalt road section {i} reconstruction" for i in range(8)]
        idx = VectorIndex.from_texts([f"r{i}" for i in range(9)], texts, [100] + [900] * 8)
        assert predict_amount("supply of insulin pens", idx, 1) == 100

    def test_rounding_half_away(self):
        assert median_amount([1, 2]) == 2
        assert median_amount([1, 2, 3, 4]) == 3
        assert median_amount([10**15, 10**15 + 1]) == 10**15 + 1

    def test_median_robust_to_one_perturbation(self):
        rng = random.Random(3)
        for _ in range(200):
            xs = [rng.randint(1, 1000) for _ in range(9)]
            i = rng.randrange(9)
            ys = list(xs)
            ys[i] = rng.choice([1, 10**9, rng.randint(1, 1000)])
            s = sorted(xs)
            assert s[3] <= median_amount(ys) <= s[5]

    def test_baseline(self):
        assert baseline_median([1, 2, 3])("anything") == 2
        assert baseline_median([1, 2, 3, 4])() == 3
        assert baseline_median([7])() == 7
        with pytest.raises(EstimatorError):
            baseline_median([])


class TestMetrics:
    def test_perfect(self):
        m = regression_metrics([1, 2, 3], [1, 2, 3])
        assert (m.rmse, m.mae, m.r2, m.n) == (0.0, 0.0, 1.0, 3)

    def test_mean_predictor(self):
        assert abs(regression_metrics([1, 2, 6], [3, 3, 3]).r2) <= 1e-12

    def test_arithmetic(self):
        m = regression_metrics([3, 4], [0, 0])
        assert math.isclose(m.rmse, math.sqrt(12.5), rel_tol=1e-12) and math.isclose(m.mae, 3.5, rel_tol=1e-12)
        assert m.rmse >= m.mae >= 0

    def test_zero_variance(self):
        m = regression_metrics([5, 5], [4, 6])
        assert m.r2 is None and m.rmse == 1.0

    def test_scale(self):
        m = regression_metrics([3e6, 4e6], [0, 0], scale=1e6)
        assert math.isclose(m.mae, 3.5)

    def test_baseline_r2_can_be_negative(self):
        assert regression_metrics([1, 2, 30], [2, 2, 2]).r2 < 0


class TestEvaluation:
    def test_split_deterministic(self):
        data = list(range(100))
        a = train_test_split(data, 0.8, 7)
        assert a == train_test_split(data, 0.8, 7)
        assert len(a[0]) == 80 and sorted(a[0] + a[1]) == data
        assert a != train_test_split(data, 0.8, 8)
        with pytest.raises(EstimatorError):
            train_test_split(data, 1.0, 0)

    def test_knn_beats_baseline(self):
        records = synthetic_records(300, clusters=5, seed=1)
        ev = evaluate_estimator(records, 0.8, seed=1, k=9)
        assert ev.n_train == 240 and ev.n_test == 60
        assert ev.knn.rmse < ev.baseline.rmse and ev.knn.r2 > ev.baseline.r2

    def test_too_few(self):
        with pytest.raises(EstimatorError):
            evaluate_estimator(synthetic_records(5), 0.8)


class TestVectorFiles:
    def test_round_trip(self, tmp_path):
        p = tmp_path / "v.tsv"
        write_vectors(p, ["a", "b"], [[1.0, 0.5, 0.25], [0.0, 1.0, 0.0]])
        idx = load_vectors(p, {"a": 10, "b": 20})
        assert len(idx) == 2 and idx.dimension == 3 and idx.amount_of("b") == 20

    def test_errors_per_line(self, tmp_path):
        p = tmp_path / "v.tsv"
        p.write_text("3\na\t1 2 3\nb\t1 2\nc\t0 0 0\nzz\t1 1 1\na\t1 1 1\n", encoding="utf-8")
        with pytest.raises(VectorFileError) as exc:
            load_vectors(p, {"a": 1, "b": 2, "c": 3})
        messages = dict(exc.value.errors)
        assert "dimension mismatch" in messages[3]
        assert "zero-norm" in messages[4]
        assert "unknown record id" in messages[5]
        assert "duplicate" in messages[6]

    def test_bad_header(self, tmp_path):
        p = tmp_path / "v.tsv"
        p.write_text("x\n", encoding="utf-8")
        with pytest.raises(VectorFileError, match="line 1"):
            load_vectors(p, {})
