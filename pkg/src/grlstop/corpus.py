"""Rankings, relevance judgments, batching and ranking-quality measures."""

from __future__ import annotations

import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np


class ParseError(ValueError):
    """Malformed TREC run/qrels/doc-text input."""

    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


@dataclass(frozen=True)
class Doc:
    doc_id: str
    relevant: bool
    text: Optional[str] = None


@dataclass(frozen=True)
class RankedTopic:
    """One topic's ranking; ``docs[0]`` is rank 1."""

    topic_id: str
    docs: tuple[Doc, ...]

    def __post_init__(self):
        object.__setattr__(self, "docs", tuple(self.docs))
        seen = set()
        for d in self.docs:
            if d.doc_id in seen:
                raise ValueError(f"duplicate doc_id {d.doc_id!r} in topic {self.topic_id!r}")
            seen.add(d.doc_id)

    @classmethod
    def from_labels(cls, topic_id, labels, doc_ids=None, texts=None):
        labels = [bool(x) for x in labels]
        if doc_ids is None:
            doc_ids = [f"d{i}" for i in range(len(labels))]
        if texts is None:
            texts = [None] * len(labels)
        return cls(topic_id, tuple(Doc(i, r, t) for i, r, t in zip(doc_ids, labels, texts)))

    @property
    def n_docs(self) -> int:
        return len(self.docs)

    @cached_property
    def labels(self) -> np.ndarray:
        arr = np.fromiter((d.relevant for d in self.docs), dtype=bool, count=len(self.docs))
        arr.flags.writeable = False
        return arr

    @cached_property
    def num_relevant(self) -> int:
        return int(self.labels.sum())

    @property
    def has_text(self) -> bool:
        return all(d.text is not None for d in self.docs)


@dataclass(frozen=True)
class TargetSpec:
    target_recall: float

    def __post_init__(self):
        if not 0.0 < self.target_recall <= 1.0:
            raise ValueError(f"target recall must lie in (0, 1], got {self.target_recall}")

    @property
    def fraction(self) -> Fraction:
        # decimal-exact, so 0.7 is 7/10 rather than its binary approximation
        return Fraction(repr(float(self.target_recall)))


def as_target(spec) -> TargetSpec:
    return spec if isinstance(spec, TargetSpec) else TargetSpec(float(spec))


def min_relevant_for_target(num_relevant: int, spec) -> int:
    """Smallest k with k / num_relevant >= target (exact arithmetic)."""
    frac = as_target(spec).fraction
    return math.ceil(frac * num_relevant)


def meets_target(found: int, num_relevant: int, spec) -> bool:
    return Fraction(found, num_relevant) >= as_target(spec).fraction


@dataclass(frozen=True)
class BatchedRanking:
    """A topic cut into consecutive fixed-size batches.

    ``bounds[j]`` is the inclusive 1-based ``(start_rank, end_rank)`` of batch
    ``j + 1``.  ``n_batches`` is the effective batch count, which may be
    smaller than ``requested_batches`` when the ranking does not divide evenly.
    """

    topic: RankedTopic
    requested_batches: int
    bounds: tuple[tuple[int, int], ...]
    batch_rel_counts: np.ndarray = field(repr=False)
    cum_rel: np.ndarray = field(repr=False)

    @property
    def n_batches(self) -> int:
        return len(self.bounds)

    @property
    def batch_size(self) -> int:
        return self.bounds[0][1] - self.bounds[0][0] + 1

    def batch_sizes(self) -> np.ndarray:
        return np.array([e - s + 1 for s, e in self.bounds])

    def batch_slice(self, j: int) -> slice:
        """0-based slice into ``topic.docs`` for 1-based batch ``j``."""
        s, e = self.bounds[j - 1]
        return slice(s - 1, e)

    def end_rank(self, j: int) -> int:
        return self.bounds[j - 1][1]

    @cached_property
    def batch_proportions(self) -> np.ndarray:
        return self.batch_rel_counts / self.batch_sizes()


def make_batches(topic: RankedTopic, n_batches: int) -> BatchedRanking:
    """Split a ranking into batches of ``ceil(N / n_batches)`` documents.

    The final batch takes the remainder, so fewer than ``n_batches`` batches
    may result; when ``N < n_batches`` every batch holds one document.
    """
    n = topic.n_docs
    if n == 0:
        raise ValueError(f"topic {topic.topic_id!r} has no documents")
    if n_batches < 1:
        raise ValueError("need at least one batch")
    size = math.ceil(n / n_batches)
    starts = range(0, n, size)
    bounds = tuple((s + 1, min(s + size, n)) for s in starts)
    labels = topic.labels.astype(np.int64)
    counts = np.array([labels[s - 1 : e].sum() for s, e in bounds], dtype=np.int64)
    return BatchedRanking(topic, n_batches, bounds, counts, np.cumsum(counts))


def target_batch(br: BatchedRanking, spec) -> int:
    """Earliest 1-based batch after which the target recall is met."""
    R = br.topic.num_relevant
    if R == 0:
        raise ValueError(f"topic {br.topic.topic_id!r} has no relevant documents; target batch undefined")
    k = min_relevant_for_target(R, spec)
    return int(np.searchsorted(br.cum_rel, k, side="left")) + 1


def recall_curve(topic: RankedTopic) -> np.ndarray:
    """Recall after each rank; element ``r - 1`` is recall at rank ``r``."""
    R = topic.num_relevant
    if R == 0:
        raise ValueError(f"topic {topic.topic_id!r} has no relevant documents")
    return np.cumsum(topic.labels) / R


def aurc(topic: RankedTopic) -> float:
    """Area under the recall curve, normalised by collection size."""
    return float(recall_curve(topic).mean())


# ---------------------------------------------------------------------------
# TREC files

def _iter_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                yield lineno, line.split()


def read_qrels(path) -> dict[str, dict[str, int]]:
    qrels: dict[str, dict[str, int]] = {}
    for lineno, parts in _iter_lines(path):
        if len(parts) != 4:
            raise ParseError(path, lineno, f"expected 4 columns, got {len(parts)}")
        topic, _, docid, rel = parts
        try:
            qrels.setdefault(topic, {})[docid] = int(rel)
        except ValueError:
            raise ParseError(path, lineno, f"relevance {rel!r} is not an integer") from None
    return qrels


def read_run(path) -> "OrderedDict[str, list[tuple[int, str]]]":
    run: OrderedDict[str, list[tuple[int, str]]] = OrderedDict()
    seen = set()
    for lineno, parts in _iter_lines(path):
        if len(parts) != 6:
            raise ParseError(path, lineno, f"expected 6 columns, got {len(parts)}")
        topic, _, docid, rank, score, _tag = parts
        try:
            rank_i = int(rank)
            float(score)
        except ValueError:
            raise ParseError(path, lineno, "rank must be an integer and score a number") from None
        if (topic, docid) in seen:
            raise ParseError(path, lineno, f"duplicate document {docid!r} for topic {topic!r}")
        seen.add((topic, docid))
        run.setdefault(topic, []).append((rank_i, docid))
    return run


def read_doc_texts(path) -> dict[str, str]:
    """Sidecar of ``doc_id<TAB>space-joined tokens`` lines."""
    texts = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            docid, sep, text = line.partition("\t")
            if not sep:
                raise ParseError(path, lineno, "expected doc_id<TAB>text")
            texts[docid] = text
    return texts


def load_run_and_qrels(run_path, qrels_path, texts_path=None) -> list[RankedTopic]:
    """Build one :class:`RankedTopic` per run topic, docs ordered by rank."""
    run = read_run(run_path)
    qrels = read_qrels(qrels_path)
    texts = read_doc_texts(texts_path) if texts_path is not None else None
    topics = []
    for topic_id, entries in run.items():
        judged = qrels.get(topic_id, {})
        entries.sort(key=lambda e: e[0])
        docs = tuple(
            Doc(docid, judged.get(docid, 0) > 0, texts.get(docid) if texts is not None else None)
            for _, docid in entries
        )
        topic = RankedTopic(topic_id, docs)
        if topic.num_relevant == 0:
            warnings.warn(f"topic {topic_id!r} has no relevant documents", stacklevel=2)
        topics.append(topic)
    return topics


def write_run_and_qrels(topics: Iterable[RankedTopic], run_path, qrels_path, texts_path=None, tag="grlstop"):
    topics = list(topics)
    with open(run_path, "w", encoding="utf-8") as run_fh, open(qrels_path, "w", encoding="utf-8") as q_fh:
        for t in topics:
            n = t.n_docs
            for rank, d in enumerate(t.docs, 1):
                run_fh.write(f"{t.topic_id} Q0 {d.doc_id} {rank} {n - rank + 1} {tag}\n")
                q_fh.write(f"{t.topic_id} 0 {d.doc_id} {int(d.relevant)}\n")
    if texts_path is not None:
        with open(texts_path, "w", encoding="utf-8") as fh:
            for t in topics:
                for d in t.docs:
                    if d.text is not None:
                        fh.write(f"{d.doc_id}\t{d.text}\n")


# ---------------------------------------------------------------------------
# Synthetic rankings

# decay rates whose mean AURC (prevalence 0.02, N=2000) lands near 0.87, 0.92, 0.96
QUALITY_PRESETS = {"low": 8.1, "mid": 14.0, "high": 32.0}


def resolve_quality(quality) -> float:
    if isinstance(quality, str):
        if quality in QUALITY_PRESETS:
            return QUALITY_PRESETS[quality]
        quality = float(quality)
    q = float(quality)
    if q < 0 or math.isnan(q):
        raise ValueError(f"quality must be >= 0, got {quality}")
    return q


def _relevant_keys(rng, size, decay):
    """Truncated-exponential positions on [0, 1); decay 0 is uniform, inf is 0."""
    u = rng.random(size)
    if decay == 0:
        return u
    if math.isinf(decay):
        return np.zeros(size)
    return -np.log1p(-u * -np.expm1(-decay)) / decay


def generate_synthetic(
    n_topics: int,
    n_docs: int,
    prevalence: float,
    quality,
    seed: int,
    *,
    doc_length: int = 40,
    signal_fraction: float = 0.25,
    noise_fraction: float = 0.0,
    signal_vocab: int = 30,
    background_vocab: int = 3000,
    with_text: bool = True,
    prefix: str = "syn",
) -> list[RankedTopic]:
    """Random rankings whose relevant documents concentrate near the top.

    Every relevant document gets a sort key from a truncated exponential
    with rate ``quality``; non-relevant keys are uniform.  Larger ``quality``
    gives better rankings (higher AURC).  Relevant documents carry
    ``signal_fraction`` of their tokens from a small signal vocabulary, so a
    linear text classifier can separate them; ``noise_fraction`` puts signal
    tokens into non-relevant documents as well.
    """
    if not 0.0 < prevalence < 1.0:
        raise ValueError(f"prevalence must lie in (0, 1), got {prevalence}")
    n_rel = round(prevalence * n_docs)
    if prevalence * n_docs < 1 or n_rel < 1:
        raise ValueError(f"prevalence * N = {prevalence * n_docs:g} < 1: no relevant documents")
    decay = resolve_quality(quality)
    rng_root = np.random.SeedSequence(seed)
    n_sig = round(doc_length * signal_fraction)
    n_noise = round(doc_length * noise_fraction)
    topics = []
    for t, child in enumerate(rng_root.spawn(n_topics)):
        rng = np.random.default_rng(child)
        labels = np.zeros(n_docs, dtype=bool)
        labels[:n_rel] = True
        keys = np.empty(n_docs)
        keys[:n_rel] = _relevant_keys(rng, n_rel, decay)
        keys[n_rel:] = rng.random(n_docs - n_rel)
        order = np.lexsort((~labels, keys))  # relevant first on (measure-zero) ties
        labels = labels[order]
        tid = f"{prefix}-{t:03d}"
        ids = [f"{tid}-d{i:05d}" for i in range(n_docs)]
        texts = None
        if with_text:
            texts = []
            for rel in labels:
                k = n_sig if rel else n_noise
                toks = [f"sig{j}" for j in rng.integers(0, signal_vocab, k)]
                toks += [f"w{j}" for j in rng.integers(0, background_vocab, doc_length - k)]
                rng.shuffle(toks)
                texts.append(" ".join(toks))
        topics.append(RankedTopic.from_labels(tid, labels, ids, texts))
    return topics


def tokens(text: Optional[str]) -> list[str]:
    return text.split() if text else []


__all__ = [
    "BatchedRanking",
    "Doc",
    "ParseError",
    "QUALITY_PRESETS",
    "RankedTopic",
    "TargetSpec",
    "aurc",
    "generate_synthetic",
    "load_run_and_qrels",
    "make_batches",
    "meets_target",
    "min_relevant_for_target",
    "recall_curve",
    "target_batch",
    "write_run_and_qrels",
]
