"""Batch-by-batch review as an episodic decision process.

Observation layout for ``B`` batches (length ``B + 2``):

* ``[0, E)``   relevant proportion of each examined batch
* ``[E, B)``   classifier estimate for each unexamined batch, or ``-1``
  when the classifier is disabled
* ``[B]``      ``E / B``
* ``[B + 1]``  target recall

The action taken at state ``S_E`` earns ``step_reward(E)``; moving into the
final state ``S_B`` also earns ``step_reward(B)`` since that state is
terminal. An episode that stops at batch ``i`` therefore returns exactly
``cumulative_reward(i)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .classifier import BatchEstimator
from .corpus import BatchedRanking, target_batch
from .reward import RewardParams, step_reward

STOP = 0
CONTINUE = 1
DUMMY = -1.0

DEFAULT_TARGETS = (0.7, 0.8, 0.9, 1.0)


@dataclass(frozen=True)
class EnvConfig:
    B: int = 100
    m: float = 1.0
    n: float = 1.0
    use_classifier: bool = True
    targets: tuple = DEFAULT_TARGETS

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(float(t) for t in self.targets))
        if self.B < 2:
            raise ValueError("B must be at least 2")
        if not self.targets:
            raise ValueError("at least one target recall is required")
        for t in self.targets:
            if not 0.0 < t <= 1.0:
                raise ValueError(f"target recall {t} outside (0, 1]")
        if not (self.m > 0 and self.n > 0):
            raise ValueError("m and n must be positive")

    @property
    def obs_dim(self) -> int:
        return self.B + 2

    def to_dict(self) -> dict:
        return {"B": self.B, "m": self.m, "n": self.n, "use_classifier": self.use_classifier, "targets": list(self.targets)}

    @classmethod
    def from_dict(cls, d) -> "EnvConfig":
        return cls(**d)


@dataclass
class EnvState:
    observation: np.ndarray
    E: int
    target_recall: float
    terminal: bool = False
    stop_batch: Optional[int] = None


@dataclass
class StepOutcome:
    reward: float
    next_state: EnvState
    done: bool


class StoppingEnv:
    """One topic's review episode.

    ``training=True`` requires at least one relevant document so the target
    batch (and hence the reward) is defined.  In inference mode rewards are
    reported as 0 when the target batch is unknown.
    """

    def __init__(
        self,
        cfg: EnvConfig,
        br: BatchedRanking,
        *,
        estimator: Optional[BatchEstimator] = None,
        seed=None,
        training: bool = True,
    ):
        if br.n_batches != cfg.B:
            raise ValueError(
                f"topic {br.topic.topic_id!r} splits into {br.n_batches} batches, environment expects B={cfg.B}"
            )
        if training and br.topic.num_relevant == 0:
            raise ValueError(f"topic {br.topic.topic_id!r} has no relevant documents; cannot train on it")
        if cfg.use_classifier and estimator is None:
            estimator = BatchEstimator(br)
        self.cfg = cfg
        self.br = br
        self.estimator = estimator if cfg.use_classifier else None
        self.training = training
        self.rng = np.random.default_rng(seed)
        self.state: Optional[EnvState] = None
        self.reward_params: Optional[RewardParams] = None

    @property
    def T(self) -> Optional[int]:
        return self.reward_params.T if self.reward_params is not None else None

    def _observe(self, E: int, target: float) -> np.ndarray:
        B = self.cfg.B
        obs = np.empty(B + 2)
        obs[:E] = self.br.batch_proportions[:E]
        if self.estimator is not None:
            obs[E:B] = self.estimator.estimates(E)
        else:
            obs[E:B] = DUMMY
        obs[B] = E / B
        obs[B + 1] = target
        return obs

    def reset(self, target: Optional[float] = None) -> EnvState:
        if target is None:
            targets = self.cfg.targets
            target = targets[0] if len(targets) == 1 else targets[int(self.rng.integers(len(targets)))]
        target = float(target)
        if self.br.topic.num_relevant > 0:
            T = target_batch(self.br, target)
            self.reward_params = RewardParams(self.cfg.m, self.cfg.n, self.cfg.B, T)
        else:
            self.reward_params = None
        self.state = EnvState(self._observe(1, target), 1, target)
        return self.state

    def reward(self, i: int) -> float:
        if self.reward_params is None:
            return 0.0
        return step_reward(self.reward_params, i)

    def step(self, action: int) -> StepOutcome:
        state = self.state
        if state is None:
            raise RuntimeError("call reset() before step()")
        if state.terminal:
            raise RuntimeError("episode already finished; call reset()")
        E = state.E
        reward = self.reward(E)
        if action == STOP:
            new = EnvState(state.observation, E, state.target_recall, True, E)
        elif action == CONTINUE:
            E += 1
            done = E == self.cfg.B
            if done:
                reward += self.reward(E)
            new = EnvState(self._observe(E, state.target_recall), E, state.target_recall, done, E if done else None)
        else:
            raise ValueError(f"unknown action {action!r}")
        self.state = new
        return StepOutcome(reward, new, new.terminal)

    def stopping_rank(self, state: Optional[EnvState] = None) -> int:
        return stopping_rank(state if state is not None else self.state, self.br)


def stopping_rank(state: EnvState, br: BatchedRanking) -> int:
    """Last rank of the final examined batch."""
    if state is None or not state.terminal:
        raise ValueError("stopping rank is only defined for a terminal state")
    return br.end_rank(state.stop_batch)


def make_envs(
    cfg: EnvConfig,
    rankings: Sequence[BatchedRanking],
    seed: int,
    training: bool = True,
) -> list[StoppingEnv]:
    """One environment per ranking, each with its own seeded generator."""
    seeds = np.random.SeedSequence(seed).spawn(len(rankings))
    return [StoppingEnv(cfg, br, seed=s, training=training) for br, s in zip(rankings, seeds)]
