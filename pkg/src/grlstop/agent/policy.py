"""Actor-critic feed-forward networks with hand-written backprop."""

from __future__ import annotations

import numpy as np

from ..environment import CONTINUE, STOP

# declaration order, shared by checkpoints and the flat-parameter helpers
PARAM_NAMES = (
    "actor.W1", "actor.b1", "actor.W2", "actor.b2", "actor.W3", "actor.b3",
    "critic.W1", "critic.b1", "critic.W2", "critic.b2", "critic.W3", "critic.b3",
)  # fmt: skip


def _orthogonal(rng, n_in, n_out, gain):
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if n_in < n_out:
        q = q.T
    return gain * q[:n_in, :n_out]


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


class PolicyNetwork:
    """Two tanh MLPs: actor ``d -> h -> h -> 2`` and critic ``d -> h -> h -> 1``.

    Action index 0 is STOP, 1 is CONTINUE.
    """

    def __init__(self, obs_dim: int, hidden: int = 64, seed=0, params: dict | None = None):
        self.obs_dim = obs_dim
        self.hidden = hidden
        if params is None:
            rng = np.random.default_rng(seed)
            params = {}
            g = np.sqrt(2.0)
            for head, n_out, out_gain in (("actor", 2, 0.01), ("critic", 1, 1.0)):
                params[f"{head}.W1"] = _orthogonal(rng, obs_dim, hidden, g)
                params[f"{head}.b1"] = np.zeros(hidden)
                params[f"{head}.W2"] = _orthogonal(rng, hidden, hidden, g)
                params[f"{head}.b2"] = np.zeros(hidden)
                params[f"{head}.W3"] = _orthogonal(rng, hidden, n_out, out_gain)
                params[f"{head}.b3"] = np.zeros(n_out)
        self.params = {k: np.asarray(params[k], dtype=np.float64) for k in PARAM_NAMES}

    # -- parameter plumbing -------------------------------------------------
    def shapes(self) -> dict:
        return {k: self.params[k].shape for k in PARAM_NAMES}

    def get_flat(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in PARAM_NAMES])

    def set_flat(self, flat) -> None:
        i = 0
        for k in PARAM_NAMES:
            size = self.params[k].size
            self.params[k] = np.asarray(flat[i : i + size], dtype=np.float64).reshape(self.params[k].shape).copy()
            i += size

    def copy(self) -> "PolicyNetwork":
        return PolicyNetwork(self.obs_dim, self.hidden, params={k: v.copy() for k, v in self.params.items()})

    # -- forward / backward -------------------------------------------------
    def _mlp(self, head, x):
        p = self.params
        h1 = np.tanh(x @ p[f"{head}.W1"] + p[f"{head}.b1"])
        h2 = np.tanh(h1 @ p[f"{head}.W2"] + p[f"{head}.b2"])
        return h2 @ p[f"{head}.W3"] + p[f"{head}.b3"], (x, h1, h2)

    def _mlp_backward(self, head, cache, dout, grads):
        p = self.params
        x, h1, h2 = cache
        grads[f"{head}.W3"] = h2.T @ dout
        grads[f"{head}.b3"] = dout.sum(axis=0)
        dz2 = (dout @ p[f"{head}.W3"].T) * (1.0 - h2**2)
        grads[f"{head}.W2"] = h1.T @ dz2
        grads[f"{head}.b2"] = dz2.sum(axis=0)
        dz1 = (dz2 @ p[f"{head}.W2"].T) * (1.0 - h1**2)
        grads[f"{head}.W1"] = x.T @ dz1
        grads[f"{head}.b1"] = dz1.sum(axis=0)

    def _check_obs(self, obs):
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape[-1] != self.obs_dim:
            raise ValueError(f"observation length {obs.shape[-1]} != expected {self.obs_dim}")
        return obs

    def logits(self, obs) -> np.ndarray:
        obs = self._check_obs(obs)
        out, _ = self._mlp("actor", np.atleast_2d(obs))
        return out if obs.ndim > 1 else out[0]

    def action_probs(self, obs) -> np.ndarray:
        z = self.logits(obs)
        return np.exp(_log_softmax(np.atleast_2d(z))).reshape(z.shape)

    def value(self, obs) -> np.ndarray:
        obs = self._check_obs(obs)
        out, _ = self._mlp("critic", np.atleast_2d(obs))
        return out[:, 0] if obs.ndim > 1 else out[0, 0]

    def act(self, obs, mode: str = "greedy", rng=None) -> int:
        p = self.action_probs(obs)
        if p.ndim != 1:
            raise ValueError("act() takes a single observation")
        if mode == "greedy":
            return STOP if p[STOP] >= p[CONTINUE] else CONTINUE
        if mode == "sample":
            if rng is None:
                raise ValueError("sample mode needs a seeded generator")
            return STOP if rng.random() < p[STOP] else CONTINUE
        raise ValueError(f"unknown mode {mode!r}")

    def ppo_loss(self, obs, actions, old_log_probs, advantages, returns, clip_range, ent_coef, vf_coef):
        """Clipped-surrogate PPO loss and its gradient w.r.t. every parameter.

        ``advantages`` are used as given (normalise before calling).
        Returns ``(loss, grads, stats)``.
        """
        obs = np.atleast_2d(self._check_obs(obs))
        n = obs.shape[0]
        actions = np.asarray(actions, dtype=np.int64)
        z, a_cache = self._mlp("actor", obs)
        v, c_cache = self._mlp("critic", obs)
        v = v[:, 0]

        logp_all = _log_softmax(z)
        probs = np.exp(logp_all)
        idx = np.arange(n)
        logp = logp_all[idx, actions]
        ratio = np.exp(logp - old_log_probs)
        clipped = np.clip(ratio, 1.0 - clip_range, 1.0 + clip_range)
        surr1 = ratio * advantages
        surr2 = clipped * advantages
        policy_loss = -np.mean(np.minimum(surr1, surr2))
        entropy = -(probs * logp_all).sum(axis=1)
        value_loss = np.mean((v - returns) ** 2)
        loss = policy_loss - ent_coef * entropy.mean() + vf_coef * value_loss

        # d(-min(surr1, surr2))/d logp: the clipped branch has zero slope outside the range
        use_unclipped = surr1 <= surr2
        in_range = (ratio >= 1.0 - clip_range) & (ratio <= 1.0 + clip_range)
        active = use_unclipped | in_range
        d_logp = -(advantages * ratio * active) / n
        onehot = np.zeros_like(probs)
        onehot[idx, actions] = 1.0
        dz = d_logp[:, None] * (onehot - probs)
        dz += (ent_coef / n) * probs * (logp_all + entropy[:, None])
        dv = (vf_coef * 2.0 / n) * (v - returns)

        grads: dict = {}
        self._mlp_backward("actor", a_cache, dz, grads)
        self._mlp_backward("critic", c_cache, dv[:, None], grads)
        stats = {
            "policy_loss": float(policy_loss),
            "value_loss": float(value_loss),
            "entropy": float(entropy.mean()),
            "approx_kl": float(np.mean((ratio - 1.0) - (logp - old_log_probs))),
            "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > clip_range)),
        }
        return float(loss), grads, stats


class Adam:
    def __init__(self, params: dict, lr=3e-4, betas=(0.9, 0.999), eps=1e-5):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k in PARAM_NAMES:
            g = grads[k]
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g * g
            params[k] = params[k] - self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def clip_grad_norm(grads: dict, max_norm: float) -> float:
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if max_norm is not None and total > max_norm:
        scale = max_norm / (total + 1e-6)
        for k in grads:
            grads[k] = grads[k] * scale
    return total
