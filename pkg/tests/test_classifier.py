import math

import numpy as np
import pytest
from scipy import sparse

from grlstop.classifier import (
    BatchEstimator,
    RelevanceModel,
    class_weights,
    estimate_batches,
    fit_relevance,
    fit_tfidf,
    weighted_logistic_loss,
)
from grlstop.corpus import RankedTopic, generate_synthetic, make_batches


def random_problem(rng, n=30, d=12, density=0.3):
    X = sparse.random(n, d, density=density, random_state=rng, format="csr")
    y = rng.random(n) < 0.3
    y[0], y[1] = True, False
    sw = np.where(y, 1.0, rng.uniform(0.05, 1.0))
    params = rng.normal(size=d + 1)
    return X, y, sw, params


def central_diff(f, x, h=1e-6):
    g = np.empty_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


class TestTfidf:
    def test_single_token(self):
        tf = fit_tfidf([["x"]])
        row = tf.transform([["x"]]).toarray()[0]
        assert np.count_nonzero(row) == 1
        assert np.linalg.norm(row) == pytest.approx(1.0)

    def test_ubiquitous_token_idf_one(self):
        tf = fit_tfidf([["a", "b"], ["a"], ["a", "c"]])
        assert tf.idf[tf.vocabulary["a"]] == pytest.approx(1.0)

    def test_hand_computed(self):
        docs = [["a", "b"], ["a", "c", "c"], ["a"]]
        tf = fit_tfidf(docs)
        # D = 3; df(a) = 3, df(b) = df(c) = 1
        idf_a = math.log(4 / 4) + 1
        idf_b = math.log(4 / 2) + 1
        assert tf.idf[tf.vocabulary["b"]] == pytest.approx(idf_b)
        assert tf.idf[tf.vocabulary["c"]] == pytest.approx(idf_b)
        X = tf.transform(docs).toarray()
        raw = np.array([idf_a, 2 * idf_b])  # doc 2: a once, c twice
        raw /= np.linalg.norm(raw)
        assert X[1, tf.vocabulary["a"]] == pytest.approx(raw[0])
        assert X[1, tf.vocabulary["c"]] == pytest.approx(raw[1])
        assert tf.vocabulary == {"a": 0, "b": 1, "c": 2}

    def test_all_empty(self):
        with pytest.raises(ValueError):
            fit_tfidf([[], []])

    def test_idf_nonnegative_finite(self, rng):
        docs = [[f"t{j}" for j in rng.integers(0, 20, 8)] for _ in range(50)]
        tf = fit_tfidf(docs)
        assert np.all(np.isfinite(tf.idf)) and np.all(tf.idf >= 1.0)
        assert sorted(tf.vocabulary.values()) == list(range(tf.n_features))


class TestLoss:
    def test_gradient_matches_finite_differences(self, rng):
        for _ in range(50):
            X, y, sw, params = random_problem(rng)
            loss, grad = weighted_logistic_loss(X, y, sw, params)
            num = central_diff(lambda p: weighted_logistic_loss(X, y, sw, p)[0], params)
            np.testing.assert_allclose(grad, num, rtol=1e-5, atol=1e-7)

    def test_loss_value(self, rng):
        X, y, sw, params = random_problem(rng)
        z = X @ params[:-1] + params[-1]
        p = 1 / (1 + np.exp(-z))
        expected = np.sum(sw * -(y * np.log(p) + (1 - y) * np.log(1 - p))) + 0.5 * params[:-1] @ params[:-1]
        assert weighted_logistic_loss(X, y, sw, params)[0] == pytest.approx(expected)


class TestFit:
    def test_class_weights(self):
        assert class_weights([1, 0, 1, 0]) == (1.0, 1.0)
        assert class_weights([1] * 5 + [0] * 50) == (1.0, pytest.approx(0.1))
        assert class_weights([1] * 5 + [0] * 2) == (1.0, 1.0)

    def test_separable(self):
        docs = [["good", "x"], ["good", "y"], ["good"], ["bad", "x"], ["bad", "y"], ["bad"], ["bad", "z"]]
        y = np.array([1, 1, 1, 0, 0, 0, 0], dtype=bool)
        tf = fit_tfidf(docs)
        model = fit_relevance(tf.transform(docs), y)
        assert not model.degenerate
        assert (model.predict(tf.transform(docs)) == y).all()

    def test_converged(self, rng):
        X, y, _, _ = random_problem(rng, n=80)
        model = fit_relevance(X, y)
        w_pos, w_neg = model.class_weights
        sw = np.where(y, w_pos, w_neg)
        _, grad = weighted_logistic_loss(X, y, sw, np.append(model.weights, model.bias))
        assert np.abs(grad).max() < 1e-3

    def test_degenerate(self):
        X = sparse.csr_matrix(np.eye(3))
        m = fit_relevance(X, [False, False, False])
        assert m.degenerate and m.constant is False
        assert not m.predict(X).any()
        m = fit_relevance(X, [True, True, True])
        assert m.predict(X).all()

    def test_deterministic(self, rng):
        X, y, _, _ = random_problem(rng, n=60)
        a, b = fit_relevance(X, y), fit_relevance(X, y)
        assert np.array_equal(a.weights, b.weights) and a.bias == b.bias


class TestEstimates:
    def _topic(self):
        return RankedTopic.from_labels("t", [1, 1, 0, 0, 1, 1, 0, 0], texts=["s"] * 8)

    def test_all_relevant_prediction(self):
        br = make_batches(self._topic(), 4)
        always = RelevanceModel(np.zeros(1), 0.0, (1.0, 1.0), degenerate=True, constant=True)
        X = sparse.csr_matrix(np.ones((8, 1)))
        np.testing.assert_array_equal(estimate_batches(always, X, br, 2), [1.0, 1.0, 1.0])

    def test_degenerate_zero(self):
        br = make_batches(self._topic(), 4)
        never = RelevanceModel(np.zeros(1), 0.0, (1.0, 1.0), degenerate=True, constant=False)
        X = sparse.csr_matrix(np.ones((8, 1)))
        np.testing.assert_array_equal(estimate_batches(never, X, br, 1), [0.0] * 4)
        assert len(estimate_batches(never, X, br, 5)) == 0

    def test_uneven_batches(self):
        topic = RankedTopic.from_labels("t", [1] * 7, texts=["s"] * 7)
        br = make_batches(topic, 3)  # sizes 3, 3, 1
        X = sparse.csr_matrix(np.ones((7, 1)))
        w = RelevanceModel(np.array([1.0]), 0.0, (1.0, 1.0))
        np.testing.assert_array_equal(estimate_batches(w, X, br, 1), [1.0, 1.0, 1.0])

    def test_synthetic_accuracy_and_monotone(self):
        for t in generate_synthetic(3, 2000, 0.02, "high", seed=31):
            br = make_batches(t, 100)
            est = BatchEstimator(br)
            maes = []
            for E in range(1, 51):
                maes.append(np.abs(est.estimates(E) - br.batch_proportions[E:]).mean())
            assert max(maes[4:]) <= 0.1
            for a, b in zip(maes, maes[1:]):
                assert b <= a + 0.02

    def test_unexamined_labels_do_not_matter(self):
        (t,) = generate_synthetic(1, 600, 0.05, "mid", seed=8)
        br = make_batches(t, 30)
        E = 6
        cut = br.end_rank(E)
        rng = np.random.default_rng(0)
        tail = np.array([d.relevant for d in t.docs[cut:]])
        shuffled = list(t.docs[:cut]) + [
            type(d)(d.doc_id, bool(lab), d.text) for d, lab in zip(t.docs[cut:], rng.permutation(tail))
        ]
        t2 = RankedTopic(t.topic_id, tuple(shuffled))
        a = BatchEstimator(br).estimates(E)
        b = BatchEstimator(make_batches(t2, 30)).estimates(E)
        np.testing.assert_array_equal(a, b)

    def test_needs_text(self):
        br = make_batches(RankedTopic.from_labels("t", [1, 0]), 2)
        with pytest.raises(ValueError, match="text"):
            BatchEstimator(br)
