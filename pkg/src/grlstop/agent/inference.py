"""Running a trained policy over a ranking."""

from __future__ import annotations

from typing import Optional

from ..baselines import StopDecision
from ..classifier import BatchEstimator
from ..corpus import BatchedRanking
from ..environment import EnvConfig, StoppingEnv
from .policy import PolicyNetwork


def policy_stop(
    policy: PolicyNetwork,
    cfg: EnvConfig,
    br: BatchedRanking,
    target: float,
    *,
    estimator: Optional[BatchEstimator] = None,
    method: str = "grlstop",
) -> StopDecision:
    """Greedy episode; labels are only revealed batch by batch."""
    env = StoppingEnv(cfg, br, estimator=estimator, training=False)
    state = env.reset(target)
    while not state.terminal:
        state = env.step(policy.act(state.observation, "greedy")).next_state
    rank = env.stopping_rank()
    return StopDecision(method, rank, rank, stop_batch=state.stop_batch)
