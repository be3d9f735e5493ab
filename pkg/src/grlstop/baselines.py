"""Reference stopping rules: oracle, knee and the adapted target method."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .corpus import RankedTopic, min_relevant_for_target

DEFAULT_KNEE_RHO = 6.0
DEFAULT_KNEE_MIN_PREFIX = 150
DEFAULT_TM_K = 10


@dataclass(frozen=True)
class StopDecision:
    """Where a method stopped.

    ``examined_count`` is the number of distinct documents the method had
    reviewed, which exceeds ``stop_rank`` for sampling methods.
    """

    method: str
    stop_rank: int
    examined_count: int
    stop_batch: Optional[int] = None
    exhausted: bool = False
    sampled_count: Optional[int] = None

    def __post_init__(self):
        if self.stop_rank < 1:
            raise ValueError("stop_rank must be >= 1")
        if self.examined_count < self.stop_rank:
            raise ValueError("examined_count cannot be below stop_rank")


def _require_relevant(topic):
    if topic.num_relevant == 0:
        raise ValueError(f"topic {topic.topic_id!r} has no relevant documents")


def oracle_stop(topic: RankedTopic, spec) -> StopDecision:
    """Stop at the first rank whose recall meets the target."""
    _require_relevant(topic)
    k = min_relevant_for_target(topic.num_relevant, spec)
    rel_ranks = np.flatnonzero(topic.labels) + 1
    rank = int(rel_ranks[k - 1])
    return StopDecision("oracle", rank, rank)


def knee_stop(
    topic: RankedTopic,
    min_prefix: int = DEFAULT_KNEE_MIN_PREFIX,
    rho: float = DEFAULT_KNEE_RHO,
) -> StopDecision:
    """Knee detection on the gain curve.

    For every prefix ending at ``s >= min_prefix`` the knee is the rank
    furthest above the chord from the origin to ``(s, gain(s))``; the method
    stops at the first ``s`` where
    ``(gain(knee) / knee) / ((gain(s) - gain(knee) + 1) / (s - knee)) >= rho``.
    Without such a prefix the whole ranking is examined and the decision is
    flagged ``exhausted``.
    """
    gains = np.cumsum(topic.labels).astype(np.float64)
    n = topic.n_docs
    s, _ = kernels.knee_scan(gains, min(max(int(min_prefix), 1), n), float(rho))
    if s < 0:
        return StopDecision("knee", n, n, exhausted=True)
    return StopDecision("knee", int(s), int(s))


def target_method_stop(topic: RankedTopic, k: int = DEFAULT_TM_K, seed=0) -> StopDecision:
    """Sample the collection at random until ``k`` relevant documents turn up,
    then review the ranking down to the lowest-ranked of them.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = topic.n_docs
    if topic.num_relevant < k:
        return StopDecision("tm", n, n, exhausted=True, sampled_count=n)
    perm = np.random.default_rng(seed).permutation(n)
    hits = np.flatnonzero(topic.labels[perm])
    sampled = int(hits[k - 1]) + 1
    stop_rank = int(perm[hits[:k]].max()) + 1
    beyond = int(np.count_nonzero(perm[:sampled] >= stop_rank))
    return StopDecision("tm", stop_rank, stop_rank + beyond, sampled_count=sampled)
