# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Mirrors ``grlstop._fallback`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log1p, fabs

cnp.import_array()


cdef inline double _softplus(double z) nogil:
    if z > 0:
        return z + log1p(exp(-z))
    return log1p(exp(z))


cdef inline double _sigmoid(double z) nogil:
    cdef double e
    if z >= 0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


def logistic_loss_grad(const double[::1] data, const int[::1] indices,
                       const int[::1] indptr, Py_ssize_t n_features,
                       const double[::1] y, const double[::1] sample_weight,
                       const double[::1] params, double C):
    cdef Py_ssize_t n_rows = indptr.shape[0] - 1
    cdef Py_ssize_t i, k, j
    cdef double z, r, loss = 0.0, reg = 0.0
    cdef double intercept = params[n_features]
    grad_arr = np.zeros(n_features + 1, dtype=np.float64)
    cdef double[::1] grad = grad_arr
    with nogil:
        for i in range(n_rows):
            z = intercept
            for k in range(indptr[i], indptr[i + 1]):
                z += data[k] * params[indices[k]]
            loss += sample_weight[i] * (_softplus(z) - y[i] * z)
            r = C * sample_weight[i] * (_sigmoid(z) - y[i])
            for k in range(indptr[i], indptr[i + 1]):
                grad[indices[k]] += data[k] * r
            grad[n_features] += r
        for j in range(n_features):
            reg += params[j] * params[j]
            grad[j] += params[j]
    return C * loss + 0.5 * reg, grad_arr


def knee_scan(gains_in, Py_ssize_t start, double rho):
    cdef double[::1] gains = np.ascontiguousarray(gains_in, dtype=np.float64)
    cdef Py_ssize_t n = gains.shape[0]
    cdef Py_ssize_t s, r, best_i
    cdef double gs, d, best, gi
    cdef Py_ssize_t found_s = -1, found_i = -1
    if start < 1:
        start = 1
    with nogil:
        for s in range(start, n + 1):
            gs = gains[s - 1]
            if gs <= 0:
                continue
            # distance above the chord, scaled by s so integer gains stay exact
            best_i = 1
            best = s * gains[0] - gs
            for r in range(2, s + 1):
                d = s * gains[r - 1] - r * gs
                if d > best:
                    best = d
                    best_i = r
            gi = gains[best_i - 1]
            if best_i == s or gi <= 0:
                continue
            # slope ratio >= rho, cross-multiplied
            if gi * (s - best_i) >= rho * best_i * (gs - gi + 1.0):
                found_s = s
                found_i = best_i
                break
    return found_s, found_i


def gae(const double[:, ::1] rewards, const double[:, ::1] values,
        const double[:, ::1] dones, const double[::1] last_values,
        const double[::1] last_dones, double gamma, double lam):
    cdef Py_ssize_t n_steps = rewards.shape[0]
    cdef Py_ssize_t n_envs = rewards.shape[1]
    cdef Py_ssize_t t, e
    cdef double nonterminal, next_value, delta, last
    adv_arr = np.zeros((n_steps, n_envs), dtype=np.float64)
    cdef double[:, ::1] adv = adv_arr
    with nogil:
        for e in range(n_envs):
            last = 0.0
            for t in range(n_steps - 1, -1, -1):
                if t == n_steps - 1:
                    nonterminal = 1.0 - last_dones[e]
                    next_value = last_values[e]
                else:
                    nonterminal = 1.0 - dones[t + 1, e]
                    next_value = values[t + 1, e]
                delta = rewards[t, e] + gamma * next_value * nonterminal - values[t, e]
                last = delta + gamma * lam * nonterminal * last
                adv[t, e] = last
    return adv_arr, adv_arr + np.asarray(values)
