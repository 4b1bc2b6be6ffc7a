"""Discrete-time policy evaluation.

``value_dt`` returns ``sum_{k>=0} P^k r_k`` with
``r_k(i) = sum_m w_m rho[i, m] f(offset + k, i, u_m) + lam delta(offset + k) H(rho_i)``.
Offset 1 gives the auxiliary value ``V`` used by the Gibbs map, offset 0
the value ``J`` itself.
"""

from __future__ import annotations

import numpy as np

from .entropy_gibbs import entropies
from .errors import ModeMismatch, NoFiniteHorizon
from .model import SeparableReward, truncation_horizon

MAX_HORIZON = 10_000_000


def policy_kernel(policy, model):
    """``P[i, j] = sum_k w_k rho[i, k] p[k, i, j]``."""
    if model.mode != "dt":
        raise ModeMismatch("policy_kernel needs a discrete-time model")
    return np.einsum("ik,kij->ij", policy.masses(), model.kernel)


def mean_rewards(policy, model, t):
    """``sum_k w_k rho[i, k] f(t, i, u_k)`` for every state."""
    return np.einsum("ik,ik->i", policy.masses(), np.asarray(model.reward.at(t)))


def _series(P, rows):
    """``sum_k P^k rows[k]`` by backward Horner recursion."""
    v = rows[-1].copy()
    for r in rows[-2::-1]:
        v = r + P @ v
    return v


def value_dt(policy, lam, offset, model, tol=1e-10, horizon=None, method="auto"):
    """Entropy-regularised value of a relaxed policy.

    Parameters
    ----------
    policy : RelaxedPolicy
    lam : float
        Entropy weight, ``>= 0``.
    offset : {0, 1}
        Time shift of reward and discount.
    model : ModelSpec
        Discrete-time model.
    tol : float
        Per-entry truncation error bound of the series.
    horizon : int, optional
        Sum exactly ``k = 0..horizon`` instead of choosing it from ``tol``.
    method : {"auto", "series", "resolvent"}
        ``resolvent`` sums the infinite series in closed form and needs a
        separable reward with an exponential-mixture discount; ``auto``
        uses it when available and no explicit horizon is given.

    Returns
    -------
    numpy.ndarray
        Value vector of length ``d``.
    """
    if model.mode != "dt":
        raise ModeMismatch("value_dt needs a discrete-time model")
    if offset not in (0, 1):
        raise ValueError("offset must be 0 or 1")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    P = policy_kernel(policy, model)
    H = entropies(policy.densities, model.grid) if lam > 0 else np.zeros(model.states)
    reward, disc = model.reward, model.discount
    mixture = disc.exponential_mixture()
    separable = isinstance(reward, SeparableReward)

    if method == "resolvent" or (method == "auto" and horizon is None and separable and mixture is not None):
        if not separable or mixture is None:
            raise ValueError("resolvent evaluation needs a separable reward and exponential-mixture discount")
        x = np.einsum("ik,ik->i", policy.masses(), reward.g) + lam * H
        eye = np.eye(model.states)
        out = np.zeros(model.states)
        for c, r in zip(*mixture):
            out += c * np.exp(-r * offset) * np.linalg.solve(eye - np.exp(-r) * P, x)
        return out

    if horizon is None:
        bound = float(np.max(np.abs(H))) if lam > 0 else 0.0
        T = truncation_horizon(reward, lam, tol, "dt", entropy_bound=bound)
        horizon = max(int(T) - offset, 0)
        if horizon > MAX_HORIZON:
            raise NoFiniteHorizon(f"truncation needs {horizon} steps, above the cap {MAX_HORIZON}")
    ts = offset + np.arange(int(horizon) + 1)
    deltas = disc(ts.astype(float))
    if separable:
        base = np.einsum("ik,ik->i", policy.masses(), reward.g)
        rows = deltas[:, None] * (base + lam * H)[None, :]
    else:
        rows = np.stack([mean_rewards(policy, model, float(t)) for t in ts]) + lam * deltas[:, None] * H
    return _series(P, rows)
