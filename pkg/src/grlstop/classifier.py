"""TF-IDF features and a cost-weighted logistic-regression relevance model.

The model is refit on the examined prefix of a ranking and its hard
predictions are averaged per unexamined batch to estimate how many relevant
documents each batch still holds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, sparse

from . import kernels
from .corpus import BatchedRanking, tokens

MAX_ITER = 1000
GTOL = 1e-4


@dataclass(frozen=True)
class TfidfModel:
    vocabulary: dict
    idf: np.ndarray
    fitted_on: int

    @property
    def n_features(self) -> int:
        return len(self.idf)

    def transform(self, docs: Sequence[Sequence[str]]) -> sparse.csr_matrix:
        """L2-normalised tf-idf rows; tokens outside the vocabulary are dropped."""
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        vocab = self.vocabulary
        for doc in docs:
            counts: dict[int, int] = {}
            for tok in doc:
                j = vocab.get(tok.lower())
                if j is not None:
                    counts[j] = counts.get(j, 0) + 1
            cols = sorted(counts)
            vals = np.array([counts[c] for c in cols], dtype=np.float64) * self.idf[cols]
            norm = np.sqrt(vals @ vals) if len(vals) else 0.0
            if norm > 0:
                vals /= norm
            indices.extend(cols)
            data.extend(vals.tolist())
            indptr.append(len(indices))
        return sparse.csr_matrix(
            (np.array(data, dtype=np.float64), np.array(indices, dtype=np.int32), np.array(indptr, dtype=np.int32)),
            shape=(len(docs), self.n_features),
        )


def fit_tfidf(docs: Sequence[Sequence[str]]) -> TfidfModel:
    """Smoothed idf: ``ln((1 + D) / (1 + df)) + 1``; columns in sorted token order."""
    df: dict[str, int] = {}
    for doc in docs:
        for tok in {t.lower() for t in doc}:
            df[tok] = df.get(tok, 0) + 1
    if not df:
        raise ValueError("cannot fit tf-idf: every document is empty")
    vocab = {tok: j for j, tok in enumerate(sorted(df))}
    D = len(docs)
    dfs = np.array([df[t] for t in sorted(df)], dtype=np.float64)
    idf = np.log((1.0 + D) / (1.0 + dfs)) + 1.0
    return TfidfModel(vocab, idf, D)


def class_weights(y) -> tuple[float, float]:
    """(relevant, non-relevant) weights: 1 and the minority/majority ratio."""
    y = np.asarray(y, dtype=bool)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        return 1.0, 1.0
    return 1.0, min(1.0, n_pos / n_neg)


@dataclass(frozen=True)
class RelevanceModel:
    weights: np.ndarray = field(repr=False)
    bias: float
    class_weights: tuple
    degenerate: bool = False
    constant: Optional[bool] = None
    n_iter: int = 0

    def decision_function(self, X) -> np.ndarray:
        if self.degenerate:
            return np.full(X.shape[0], 1.0 if self.constant else -1.0)
        return X @ self.weights + self.bias

    def predict_proba(self, X) -> np.ndarray:
        z = self.decision_function(X)
        if self.degenerate:
            return np.where(z > 0, 1.0, 0.0)
        return 0.5 * (1.0 + np.tanh(0.5 * z))

    def predict(self, X) -> np.ndarray:
        return self.decision_function(X) > 0


def weighted_logistic_loss(X, y, sample_weight, params, C=1.0):
    """``C * sum(w_i * logloss_i) + ||coef||^2 / 2`` and its gradient."""
    X = sparse.csr_matrix(X)
    return kernels.logistic_loss_grad(
        np.ascontiguousarray(X.data, dtype=np.float64),
        np.ascontiguousarray(X.indices, dtype=np.int32),
        np.ascontiguousarray(X.indptr, dtype=np.int32),
        X.shape[1],
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(sample_weight, dtype=np.float64),
        np.ascontiguousarray(params, dtype=np.float64),
        float(C),
    )


def fit_relevance(X, y, C: float = 1.0) -> RelevanceModel:
    """Fit the weighted logistic regression on examined documents.

    With a single class present the returned model is ``degenerate`` and
    always predicts that class.
    """
    y = np.asarray(y, dtype=bool)
    w_pos, w_neg = class_weights(y)
    if y.all() or not y.any():
        return RelevanceModel(np.zeros(X.shape[1]), 0.0, (w_pos, w_neg), degenerate=True, constant=bool(y.all()) if len(y) else False)
    X = sparse.csr_matrix(X)
    data = np.ascontiguousarray(X.data, dtype=np.float64)
    indices = np.ascontiguousarray(X.indices, dtype=np.int32)
    indptr = np.ascontiguousarray(X.indptr, dtype=np.int32)
    yf = y.astype(np.float64)
    sw = np.where(y, w_pos, w_neg)
    n_features = X.shape[1]

    def fun(params):
        return kernels.logistic_loss_grad(data, indices, indptr, n_features, yf, sw, params, C)

    res = optimize.minimize(
        fun,
        np.zeros(n_features + 1),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": MAX_ITER, "gtol": GTOL, "ftol": 1e-10},
    )
    return RelevanceModel(res.x[:-1].copy(), float(res.x[-1]), (w_pos, w_neg), n_iter=int(res.nit))


def estimate_batches(model: RelevanceModel, X, br: BatchedRanking, from_batch: int) -> np.ndarray:
    """Predicted-relevant fraction for batches ``from_batch..B`` (1-based)."""
    B = br.n_batches
    if not 1 <= from_batch <= B + 1:
        raise ValueError(f"from_batch {from_batch} outside [1, {B + 1}]")
    if from_batch == B + 1:
        return np.zeros(0)
    start = br.bounds[from_batch - 1][0] - 1
    pred = model.predict(X[start:]).astype(np.float64)
    sizes = br.batch_sizes()[from_batch - 1 :]
    edges = np.concatenate([[0], np.cumsum(sizes)])
    sums = np.add.reduceat(pred, edges[:-1]) if len(pred) else np.zeros(len(sizes))
    return sums / sizes


class BatchEstimator:
    """Per-topic classifier hook: estimates for unexamined batches given ``E``.

    TF-IDF is fit once on the topic's full text (no labels involved); the
    logistic layer is refit on batches ``1..E`` for each ``E`` requested.
    Results depend only on the examined labels and are memoised per ``E``.
    """

    def __init__(self, br: BatchedRanking, C: float = 1.0):
        topic = br.topic
        if not topic.has_text:
            raise ValueError(f"topic {topic.topic_id!r} has no document text for the classifier")
        docs = [tokens(d.text) for d in topic.docs]
        self.br = br
        self.C = C
        self.tfidf = fit_tfidf(docs)
        self.X = self.tfidf.transform(docs)
        self._cache: dict[int, np.ndarray] = {}

    def estimates(self, E: int) -> np.ndarray:
        """Fractions for batches ``E+1..B`` (length ``B - E``)."""
        out = self._cache.get(E)
        if out is None:
            n_seen = self.br.end_rank(E)
            y = self.br.topic.labels[:n_seen]
            model = fit_relevance(self.X[:n_seen], y, self.C)
            out = estimate_batches(model, self.X, self.br, E + 1)
            out.flags.writeable = False
            self._cache[E] = out
        return out
