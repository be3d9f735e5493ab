"""Pure numpy implementations of the hot kernels.

Same signatures as the compiled ``_kernels`` module; used when the
extension is not built or when ``GRLSTOP_PURE_PYTHON`` is set.
"""

import numpy as np
from scipy import sparse


def logistic_loss_grad(data, indices, indptr, n_features, y, sample_weight, params, C):
    """Weighted, L2-penalised logistic loss and its gradient.

    ``params`` holds the coefficients followed by the (unpenalised) intercept.
    Returns ``(loss, grad)`` with ``grad`` shaped like ``params``.
    """
    n_rows = len(indptr) - 1
    X = sparse.csr_matrix((data, indices, indptr), shape=(n_rows, n_features))
    w = params[:-1]
    z = X @ w + params[-1]
    loss = C * np.sum(sample_weight * (np.logaddexp(0.0, z) - y * z)) + 0.5 * np.dot(w, w)
    # sigmoid without overflow
    p = np.empty_like(z)
    pos = z >= 0
    p[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    p[~pos] = ez / (1.0 + ez)
    r = C * sample_weight * (p - y)
    grad = np.empty_like(params)
    grad[:-1] = X.T @ r + w
    grad[-1] = r.sum()
    return float(loss), grad


def knee_scan(gains, start, rho):
    """First prefix end ``s >= start`` whose gain-curve knee has slope ratio >= rho.

    ``gains[r-1]`` is the number of relevant documents in ranks ``1..r``.
    The knee of prefix ``s`` is the rank maximising the vertical distance
    above the chord from the origin to ``(s, gains[s-1])``.  Returns
    ``(stop_rank, knee_rank)`` or ``(-1, -1)`` when no prefix qualifies.
    """
    gains = np.asarray(gains, dtype=np.float64)
    n = len(gains)
    ranks = np.arange(1, n + 1, dtype=np.float64)
    for s in range(max(start, 1), n + 1):
        gs = gains[s - 1]
        if gs <= 0:
            continue
        # scaled by s so integer gains stay exact
        dist = s * gains[:s] - ranks[:s] * gs
        i = int(np.argmax(dist)) + 1
        gi = gains[i - 1]
        if i == s or gi <= 0:
            continue
        # slope ratio >= rho, cross-multiplied
        if gi * (s - i) >= rho * i * (gs - gi + 1.0):
            return s, i
    return -1, -1


def gae(rewards, values, dones, last_values, last_dones, gamma, lam):
    """Generalised advantage estimates over a ``(steps, envs)`` rollout.

    ``dones[t]`` marks that the observation at step ``t`` starts a fresh
    episode (the previous step was terminal), following the usual
    vectorised-rollout bookkeeping.
    """
    n_steps = rewards.shape[0]
    adv = np.zeros_like(rewards)
    last = np.zeros(rewards.shape[1])
    for t in range(n_steps - 1, -1, -1):
        if t == n_steps - 1:
            nonterminal = 1.0 - last_dones
            next_values = last_values
        else:
            nonterminal = 1.0 - dones[t + 1]
            next_values = values[t + 1]
        delta = rewards[t] + gamma * next_values * nonterminal - values[t]
        last = delta + gamma * lam * nonterminal * last
        adv[t] = last
    return adv, adv + values
