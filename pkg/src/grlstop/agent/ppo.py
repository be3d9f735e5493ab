"""PPO over a set of topic environments collected in lock-step."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional, Sequence

import numpy as np

from .. import kernels
from ..environment import StoppingEnv
from .policy import Adam, PolicyNetwork, clip_grad_norm

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainerConfig:
    n_epochs: int = 10
    gamma: float = 0.99
    gae_lambda: float = 0.95
    learning_rate: float = 3e-4
    hidden: int = 64
    n_steps: int = 10
    ent_coef: float = 0.1
    clip_range: float = 0.1
    vf_coef: float = 0.5
    max_grad_norm: float = 0.5
    batch_size: int = 64
    patience: int = 10
    min_steps: int = 50_000
    improvement_tol: float = 1e-4
    return_window: int = 100
    max_steps: int = 200_000
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("min_steps", "seed", "gae_lambda"):
                continue
            if not v > 0:
                raise ValueError(f"{f.name} must be positive, got {v}")
        if self.min_steps < 0:
            raise ValueError("min_steps must be >= 0")

    @classmethod
    def defaults_for(cls, use_classifier: bool, **overrides) -> "TrainerConfig":
        """Rollout length and entropy bonus depend on whether estimates are observed."""
        base = {} if use_classifier else {"n_steps": 100, "ent_coef": 0.001}
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "TrainerConfig":
        return cls(**d)


@dataclass
class TrainResult:
    policy: PolicyNetwork
    log: list = field(default_factory=list)
    steps: int = 0
    rollouts: int = 0
    stopped_early: bool = False
    best_mean_return: float = float("-inf")


def _normalise(adv):
    if len(adv) < 2:
        return adv
    return (adv - adv.mean()) / (adv.std() + 1e-8)


def train(
    envs: Sequence[StoppingEnv],
    cfg: TrainerConfig,
    policy: Optional[PolicyNetwork] = None,
    *,
    start_rollout: int = 0,
    start_steps: int = 0,
    on_rollout: Optional[Callable[[dict], None]] = None,
) -> TrainResult:
    """Train a policy on all ``envs`` until early stopping or the step budget.

    Returns the parameters with the best rolling mean episode return seen at
    the end of any rollout.  ``start_rollout``/``start_steps`` continue the
    numbering of a resumed run.
    """
    if not envs:
        raise ValueError("need at least one environment")
    B = envs[0].cfg.B
    obs_dim = envs[0].cfg.obs_dim
    if any(e.cfg.B != B or e.cfg.targets != envs[0].cfg.targets for e in envs):
        raise ValueError("all environments must share B and target set")
    n_envs = len(envs)
    seeds = np.random.SeedSequence(cfg.seed)
    init_seed, shuffle_seed, action_seed = seeds.spawn(3)
    if policy is None:
        policy = PolicyNetwork(obs_dim, cfg.hidden, seed=init_seed)
    elif policy.obs_dim != obs_dim:
        raise ValueError(f"policy expects observations of length {policy.obs_dim}, environments give {obs_dim}")
    policy = policy.copy()
    opt = Adam(policy.params, lr=cfg.learning_rate)
    shuffle_rng = np.random.default_rng(shuffle_seed)
    action_rngs = [np.random.default_rng(s) for s in action_seed.spawn(n_envs)]

    obs = np.stack([env.reset().observation for env in envs])
    episode_starts = np.ones(n_envs)
    ep_returns = np.zeros(n_envs)
    recent: deque = deque(maxlen=cfg.return_window)

    result = TrainResult(policy.copy())
    best_params = policy.copy()
    best = float("-inf")
    no_improve = 0
    steps = start_steps
    rollout = start_rollout
    steps_this_run = 0

    S = cfg.n_steps
    if S * n_envs > cfg.max_steps:
        raise ValueError(f"one rollout ({S} steps x {n_envs} envs) exceeds max_steps={cfg.max_steps}")
    # the budget is a hard cap: a rollout that would overshoot it is not started
    while steps_this_run + S * n_envs <= cfg.max_steps:
        buf_obs = np.zeros((S, n_envs, obs_dim))
        buf_act = np.zeros((S, n_envs), dtype=np.int64)
        buf_logp = np.zeros((S, n_envs))
        buf_val = np.zeros((S, n_envs))
        buf_rew = np.zeros((S, n_envs))
        buf_start = np.zeros((S, n_envs))
        finished = []
        for t in range(S):
            probs = policy.action_probs(obs)
            values = policy.value(obs)
            buf_obs[t] = obs
            buf_val[t] = values
            buf_start[t] = episode_starts
            for k, env in enumerate(envs):
                a = 0 if action_rngs[k].random() < probs[k, 0] else 1
                out = env.step(a)
                buf_act[t, k] = a
                buf_logp[t, k] = np.log(probs[k, a])
                buf_rew[t, k] = out.reward
                ep_returns[k] += out.reward
                if out.done:
                    finished.append(ep_returns[k])
                    recent.append(ep_returns[k])
                    ep_returns[k] = 0.0
                    obs[k] = env.reset().observation
                    episode_starts[k] = 1.0
                else:
                    obs[k] = out.next_state.observation
                    episode_starts[k] = 0.0
        steps += S * n_envs
        steps_this_run += S * n_envs
        rollout += 1

        last_values = policy.value(obs)
        adv, ret = kernels.gae(
            buf_rew, buf_val, buf_start, np.ascontiguousarray(last_values), episode_starts.copy(),
            cfg.gamma, cfg.gae_lambda,
        )
        f_obs = buf_obs.reshape(-1, obs_dim)
        f_act = buf_act.ravel()
        f_logp = buf_logp.ravel()
        f_adv = adv.ravel()
        f_ret = ret.ravel()
        n = len(f_act)
        stats_acc: dict = {}
        n_updates = 0
        for _ in range(cfg.n_epochs):
            perm = shuffle_rng.permutation(n)
            for start in range(0, n, cfg.batch_size):
                mb = perm[start : start + cfg.batch_size]
                loss, grads, stats = policy.ppo_loss(
                    f_obs[mb], f_act[mb], f_logp[mb], _normalise(f_adv[mb]), f_ret[mb],
                    cfg.clip_range, cfg.ent_coef, cfg.vf_coef,
                )
                if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                    raise TrainingDiverged(f"non-finite loss at rollout {rollout} (loss={loss}, stats={stats})")
                clip_grad_norm(grads, cfg.max_grad_norm)
                opt.step(policy.params, grads)
                for key, val in stats.items():
                    stats_acc[key] = stats_acc.get(key, 0.0) + val
                n_updates += 1

        mean_return = float(np.mean(recent)) if recent else float("nan")
        improved = False
        if recent and mean_return > best + cfg.improvement_tol:
            best = mean_return
            best_params = policy.copy()
            no_improve = 0
            improved = True
        elif recent:
            no_improve += 1
        entry = {
            "rollout": rollout,
            "steps": steps,
            "episodes": len(finished),
            "rollout_mean_return": float(np.mean(finished)) if finished else None,
            "rolling_mean_return": mean_return if recent else None,
            "best_mean_return": best if recent else None,
            "improved": improved,
            **{k: v / max(n_updates, 1) for k, v in stats_acc.items()},
        }
        result.log.append(entry)
        if on_rollout is not None:
            on_rollout(entry)
        log.debug("rollout %d: %s", rollout, entry)
        if no_improve >= cfg.patience and steps_this_run >= cfg.min_steps:
            result.stopped_early = True
            break

    result.policy = best_params
    result.steps = steps
    result.rollouts = rollout
    result.best_mean_return = best
    return result
