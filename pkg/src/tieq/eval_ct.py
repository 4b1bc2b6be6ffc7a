"""Continuous-time policy evaluation by uniformization.

``value_ct`` returns ``int_0^inf e^{s Q} r(t0 + s) ds`` with
``r(t, j) = sum_k w_k rho[j, k] f(t, j, u_k) + lam delta(t) H(rho_j)``.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.stats import poisson

from .entropy_gibbs import entropies
from .errors import InvalidGenerator, ModeMismatch
from .model import SeparableReward, truncation_horizon

MAX_PANELS = 2 ** 20
SPLIT_RATE = 16.0


def policy_generator(policy, model):
    """``Q[i, j] = sum_k w_k rho[i, k] q[k, i, j]`` with tiny negative rates clamped."""
    if model.mode != "ct":
        raise ModeMismatch("policy_generator needs a continuous-time model")
    Q = np.einsum("ik,kij->ij", policy.masses(), model.kernel)
    d = Q.shape[0]
    off = ~np.eye(d, dtype=bool)
    Q[off & (Q > -1e-12) & (Q < 0)] = 0.0
    Q[np.arange(d), np.arange(d)] = 0.0
    Q[np.arange(d), np.arange(d)] = -Q.sum(axis=1)
    return Q


def check_generator(Q, tol=1e-9):
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or not np.all(np.isfinite(Q)):
        raise InvalidGenerator("generator must be a finite square matrix")
    off = Q - np.diag(np.diag(Q))
    if np.any(off < -tol):
        raise InvalidGenerator("generator has negative off-diagonal rates")
    scale = max(1.0, float(np.max(np.abs(Q))))
    if np.any(np.abs(Q.sum(axis=1)) > tol * scale):
        raise InvalidGenerator("generator rows must sum to zero")
    return Q


def transition_matrix(Q, s, tol=1e-12):
    """``exp(s Q)`` by uniformization.

    With ``gamma = max_i |Q_ii|`` and ``P = I + Q / gamma``,
    ``exp(s Q) = sum_n Poisson(n; gamma s) P^n``.  Long horizons are split
    into ``m`` equal pieces of Poisson mean at most 16, each truncated at
    tail ``tol / m``, and the piece is raised to the ``m``-th power.
    """
    Q = check_generator(Q)
    if s < 0:
        raise ValueError("time must be nonnegative")
    d = Q.shape[0]
    gamma = float(np.max(-np.diag(Q))) if d else 0.0
    if gamma == 0 or s == 0:
        return np.eye(d)
    mean = gamma * s
    m = max(1, math.ceil(mean / SPLIT_RATE))
    mu = mean / m
    N = int(poisson.isf(tol / m, mu)) + 1
    P = np.eye(d) + Q / gamma
    pmf = poisson.pmf(np.arange(N + 1), mu)
    term = np.eye(d)
    out = pmf[0] * term
    for n in range(1, N + 1):
        term = term @ P
        out += pmf[n] * term
    out = np.linalg.matrix_power(out, m)
    return out / out.sum(axis=1, keepdims=True)


def _rates(policy, model, t):
    return np.einsum("ik,ik->i", policy.masses(), np.asarray(model.reward.at(t)))


def value_ct(policy, lam, t0, model, tol=1e-10, method="auto"):
    """Entropy-regularised value at time offset ``t0``.

    Parameters
    ----------
    policy : RelaxedPolicy
    lam : float
        Entropy weight, ``>= 0``.
    t0 : float
        Time offset of reward and discount, ``>= 0``.
    model : ModelSpec
        Continuous-time model.
    tol : float
        Target absolute error per entry.
    method : {"auto", "quadrature", "resolvent"}
        ``resolvent`` uses ``sum_m c_m e^{-r_m t0} (r_m I - Q)^{-1} x`` and
        needs a separable reward with an exponential-mixture discount;
        ``quadrature`` truncates the integral and applies composite Simpson.
    """
    if model.mode != "ct":
        raise ModeMismatch("value_ct needs a continuous-time model")
    if lam < 0 or t0 < 0:
        raise ValueError("lambda and t0 must be nonnegative")
    Q = policy_generator(policy, model)
    H = entropies(policy.densities, model.grid) if lam > 0 else np.zeros(model.states)
    reward, disc = model.reward, model.discount
    mixture = disc.exponential_mixture()
    separable = isinstance(reward, SeparableReward)
    if method == "resolvent" or (method == "auto" and separable and mixture is not None):
        if not separable or mixture is None:
            raise ValueError("resolvent evaluation needs a separable reward and exponential-mixture discount")
        x = np.einsum("ik,ik->i", policy.masses(), reward.g) + lam * H
        eye = np.eye(model.states)
        out = np.zeros(model.states)
        for c, r in zip(*mixture):
            out += c * math.exp(-r * t0) * np.linalg.solve(r * eye - Q, x)
        return out
    return _value_quadrature(policy, Q, H, lam, t0, model, tol)


def _value_quadrature(policy, Q, H, lam, t0, model, tol):
    reward, disc = model.reward, model.discount
    bound = float(np.max(np.abs(H))) if lam > 0 else 0.0
    # tails are nonincreasing, so the horizon measured from 0 covers any t0
    T = float(truncation_horizon(reward, lam, tol / 2, "ct", entropy_bound=bound))
    if T == 0:
        return np.zeros(model.states)
    if isinstance(reward, SeparableReward):
        base = np.einsum("ik,ik->i", policy.masses(), reward.g) + lam * H

        def rates(ts):
            return disc(t0 + ts)[:, None] * base[None, :]
    else:

        def rates(ts):
            rows = np.stack([_rates(policy, model, t0 + t) for t in ts])
            return rows + lam * disc(t0 + ts)[:, None] * H

    def simpson(n):
        ts = np.linspace(0.0, T, n + 1)
        coef = np.ones(n + 1)
        coef[1:-1:2] = 4.0
        coef[2:-1:2] = 2.0
        rows = rates(ts) * coef[:, None]
        step = transition_matrix(Q, T / n)
        v = rows[-1].copy()
        for r in rows[-2::-1]:
            v = r + step @ v
        return v * (T / n) / 3.0

    n = 64
    prev = simpson(n)
    while True:
        n *= 2
        cur = simpson(n)
        if np.max(np.abs(cur - prev)) <= tol / 2:
            return cur
        if n >= MAX_PANELS:
            warnings.warn(f"Simpson refinement stopped at {n} panels without reaching tol", RuntimeWarning)
            return cur
        prev = cur
