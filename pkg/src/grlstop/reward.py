"""Stopping reward with adjustable undershoot/overshoot exponents.

``m`` shapes the reward before the target batch ``T`` and ``n`` after it.
Per-step rewards telescope, so an episode stopping at batch ``i`` collects
exactly ``cumulative_reward(i)``, which peaks at 1 when ``i == T``.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class RewardParams:
    m: float
    n: float
    B: int
    T: int

    def __post_init__(self):
        if not (self.m > 0 and self.n > 0):
            raise ValueError(f"m and n must be positive, got m={self.m}, n={self.n}")
        if not 1 <= self.T <= self.B:
            raise ValueError(f"target batch T={self.T} outside [1, {self.B}]")

    def _check(self, i):
        if not 1 <= i <= self.B:
            raise ValueError(f"batch index {i} outside [1, {self.B}]")


def step_reward(p: RewardParams, i: int) -> float:
    p._check(i)
    if i <= p.T:
        return (i**p.m - (i - 1) ** p.m) / p.T**p.m
    return ((p.B - i) ** p.n - (p.B - i + 1) ** p.n) / (p.B - p.T) ** p.n


def cumulative_reward(p: RewardParams, i: int) -> float:
    p._check(i)
    if i <= p.T:
        return (i / p.T) ** p.m
    return ((p.B - i) / (p.B - p.T)) ** p.n
