"""Discrete-time approximation of a continuous-time model with step ``h``.

The ``h``-model has transitions ``h q + I``, rewards ``h f(k h)`` and
discount ``delta(k h)``; its entropy weight is ``h lam``.  With that
scaling the Gibbs density of the ``h``-model equals the continuous one.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .anneal import SolverConfig
from .entropy_gibbs import gibbs_policy
from .errors import ModeMismatch, StepTooLarge
from .fixedpoint import solve_fixed_point, thread_count
from .model import ModelSpec, SeparableReward, TabulatedReward


def max_step(model):
    """Largest ``h`` keeping ``h q + I`` stochastic: ``1 / max |q_ii|``."""
    rate = float(np.max(-np.diagonal(model.kernel, axis1=1, axis2=2)))
    return np.inf if rate <= 0 else 1.0 / rate


def discretize(model, h, index=None):
    """The discrete-time ``h``-model of a continuous-time model.

    Raises
    ------
    StepTooLarge
        If ``h max |q_ii| > 1``; ``index`` is echoed for list callers.
    """
    if model.mode != "ct":
        raise ModeMismatch("discretize needs a continuous-time model")
    limit = max_step(model)
    if not (h > 0) or h > limit * (1 + 1e-12):
        raise StepTooLarge(h, index, limit)
    d = model.states
    p = h * model.kernel + np.eye(d)[None, :, :]
    p[(p < 0) & (p > -1e-14)] = 0.0
    p /= p.sum(axis=2, keepdims=True)
    reward = model.reward
    disc = reward.discount.sampled(h)
    if isinstance(reward, SeparableReward):
        new = SeparableReward(disc, h * reward.g)
    else:
        steps = np.arange(int(np.floor(reward.times[-1] / h + 1e-12)) + 1)
        values = np.stack([h * np.asarray(reward.at(k * h)) for k in steps])
        new = TabulatedReward(disc, steps.astype(float), values, reward.tail_bound)
    return ModelSpec(model.grid, new, p, "transition", cone=model.cone, name=f"{model.name}@h={h:g}")


@dataclass
class BridgeRow:
    h: float
    discrepancy: float
    policy_distance: float
    converged: bool
    residual: float
    iterations: int
    y: np.ndarray

    def to_dict(self):
        return {
            "h": self.h,
            "discrepancy": self.discrepancy,
            "policyDistance": self.policy_distance,
            "converged": self.converged,
            "residual": self.residual,
            "iterations": self.iterations,
            "y": self.y.tolist(),
        }


@dataclass
class BridgeStudy:
    lam: float
    y_ct: np.ndarray
    ct_report: object
    rows: list

    @property
    def ratios(self):
        d = [r.discrepancy for r in self.rows]
        return [a / b if b > 0 else float("inf") for a, b in zip(d, d[1:])]

    def to_dict(self):
        return {
            "lambda": self.lam,
            "yContinuous": self.y_ct.tolist(),
            "continuousReport": self.ct_report.to_dict(),
            "rows": [r.to_dict() for r in self.rows],
            "ratios": self.ratios,
        }


def policy_distance(p1, p2):
    """``max_i sum_k w_k |rho1[i, k] - rho2[i, k]|``."""
    return float(np.max(np.abs(p1.densities - p2.densities) @ p1.grid.weights))


def convergence_study(model, lam, h_list, solver=None, workers=None):
    """Compare the continuous fixed point with the ``h``-model fixed points.

    Each ``h``-solve uses entropy weight ``h lam`` and warm-starts from the
    continuous solution.  Rows follow the order of ``h_list``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    cfg = solver if solver is not None else SolverConfig()
    models = [discretize(model, h, index=n) for n, h in enumerate(h_list)]
    kwargs = dict(damping=cfg.damping, tol=cfg.tol, max_iter=cfg.max_iter, anderson=cfg.anderson)
    ct = solve_fixed_point(np.zeros(model.states), lam, model, "ct", **kwargs)
    pi_ct = gibbs_policy(ct.y, lam, model)

    def one(args):
        h, dt_model = args
        rep = solve_fixed_point(ct.y, h * lam, dt_model, "dt", start="continuous", **kwargs)
        pi_h = gibbs_policy(rep.y, h * lam, dt_model)
        return BridgeRow(float(h), float(np.max(np.abs(rep.y - ct.y))), policy_distance(pi_h, pi_ct),
                         rep.converged, rep.residual, rep.iterations, rep.y)

    jobs = list(zip(h_list, models))
    workers = thread_count() if workers is None else workers
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, jobs))
    else:
        rows = [one(j) for j in jobs]
    return BridgeStudy(lam, ct.y, ct, rows)
