"""Recall, reliability, cost and cost difference for stopping decisions."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .baselines import StopDecision, oracle_stop
from .corpus import RankedTopic, as_target, meets_target, recall_curve

RESULT_FIELDS = ["topic_id", "method", "target", "stop_rank", "recall", "reliability", "cost", "cost_diff"]
SUMMARY_FIELDS = ["method", "target", "topics", "recall", "reliability", "cost", "cost_diff"]


@dataclass(frozen=True)
class TopicResult:
    topic_id: str
    method: str
    target_recall: float
    stop_rank: int
    recall_at_stop: float
    reliability: int
    cost: float
    cost_diff: float

    def row(self) -> list:
        return [
            self.topic_id, self.method, f"{self.target_recall:g}", self.stop_rank,
            f"{self.recall_at_stop:.6f}", self.reliability, f"{self.cost:.6f}", f"{self.cost_diff:.6f}",
        ]  # fmt: skip


@dataclass(frozen=True)
class SummaryRow:
    method: str
    target_recall: float
    topics: int
    recall: float
    reliability: float
    cost: float
    cost_diff: float

    def row(self) -> list:
        return [
            self.method, f"{self.target_recall:g}", self.topics, f"{self.recall:.6f}",
            f"{self.reliability:.6f}", f"{self.cost:.6f}", f"{self.cost_diff:.6f}",
        ]  # fmt: skip


def score_topic(topic: RankedTopic, spec, decision: StopDecision, method: str | None = None) -> TopicResult:
    spec = as_target(spec)
    n = topic.n_docs
    R = topic.num_relevant
    if R == 0:
        raise ValueError(f"topic {topic.topic_id!r} has no relevant documents; recall undefined")
    if not 1 <= decision.stop_rank <= n:
        raise ValueError(f"stop rank {decision.stop_rank} outside [1, {n}]")
    found = int(topic.labels[: decision.stop_rank].sum())
    cost = min(decision.examined_count, n) / n
    oracle_cost = oracle_stop(topic, spec).stop_rank / n
    return TopicResult(
        topic.topic_id,
        method or decision.method,
        spec.target_recall,
        decision.stop_rank,
        found / R,
        int(meets_target(found, R, spec)),
        cost,
        cost - oracle_cost,
    )


def aggregate(results: Iterable[TopicResult]) -> list[SummaryRow]:
    """Unweighted per-(method, target) means, sorted by method then target."""
    groups: dict = {}
    for r in results:
        vals = (r.recall_at_stop, r.reliability, r.cost, r.cost_diff)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"non-finite metric in result for topic {r.topic_id!r}")
        groups.setdefault((r.method, r.target_recall), []).append(vals)
    if not groups:
        raise ValueError("no results to aggregate")
    rows = []
    for (method, target), vals in sorted(groups.items()):
        arr = np.asarray(vals, dtype=np.float64)
        m = arr.mean(axis=0)
        rows.append(SummaryRow(method, target, len(arr), *(float(x) for x in m)))
    return rows


def sort_results(results: Iterable[TopicResult]) -> list[TopicResult]:
    return sorted(results, key=lambda r: (r.method, r.target_recall, r.topic_id))


def write_results_csv(path, results: Sequence[TopicResult]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_FIELDS)
        for r in sort_results(results):
            w.writerow(r.row())


def write_summary_csv(path, rows: Sequence[SummaryRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for r in rows:
            w.writerow(r.row())


def write_recall_curve_csv(path, topic: RankedTopic) -> None:
    """Two columns, ``rank,recall``, for external plotting."""
    curve = recall_curve(topic)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "recall"])
        for rank, rec in enumerate(curve, 1):
            w.writerow([rank, f"{rec:.6f}"])
