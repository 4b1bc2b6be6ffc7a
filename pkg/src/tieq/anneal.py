"""Annealing the entropy weight to zero and certifying the limit policy.

At ``lam = 0`` a policy is an equilibrium iff every state's policy mass sits
in the argmax set ``E(y, i)`` of the one-step objective with ``y`` the
policy's own auxiliary value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .entropy_gibbs import gibbs_policy, model_constants, objectives
from .errors import AllStagesDiverged
from .eval_ct import value_ct
from .eval_dt import value_dt
from .fixedpoint import solve_fixed_point, solve_multistart


@dataclass(frozen=True)
class Schedule:
    """``lam_n = lam0 * factor**n`` while above ``lam_min``, then ``lam_min`` itself."""

    lam0: float = 1.0
    factor: float = 0.5
    lam_min: float = 1e-3

    def __post_init__(self):
        if not (0 < self.lam0 <= 1 and 0 < self.factor < 1 and 0 < self.lam_min <= self.lam0):
            raise ValueError("schedule needs 0 < lam_min <= lam0 <= 1 and factor in (0, 1)")

    def lambdas(self):
        out, lam = [], self.lam0
        while lam > self.lam_min * (1 + 1e-12):
            out.append(lam)
            lam *= self.factor
        out.append(self.lam_min)
        return out


@dataclass(frozen=True)
class SolverConfig:
    damping: float = 0.5
    tol: float = 1e-10
    max_iter: int = 2000
    anderson: bool = False
    multistart: int = 0
    seed: int = 0


@dataclass(frozen=True)
class Thresholds:
    deviation_gap: float = 1e-3
    off_support_mass: float = 1e-2
    self_consistency: float = 1e-4


@dataclass
class Certificate:
    """Evidence that a policy is an (approximate) equilibrium at ``lam = 0``.

    ``soundness_bound`` bounds the one-step gain of any deviation supported
    on the grid: ``deviation_gap + Theta (1 + |y|) diam(U) off_support_mass``.
    """

    deviation_gap: float
    off_support_mass: float
    self_consistency: float
    passed: bool
    gap_tol: float
    gaps_by_state: np.ndarray
    mass_by_state: np.ndarray
    soundness_bound: float
    thresholds: Thresholds = field(default_factory=Thresholds)

    def to_dict(self):
        return {
            "deviationGap": self.deviation_gap,
            "offSupportMass": self.off_support_mass,
            "selfConsistency": self.self_consistency,
            "passed": self.passed,
            "gapTol": self.gap_tol,
            "gapsByState": self.gaps_by_state.tolist(),
            "offSupportMassByState": self.mass_by_state.tolist(),
            "soundnessBound": self.soundness_bound,
            "thresholds": {
                "deviationGap": self.thresholds.deviation_gap,
                "offSupportMass": self.thresholds.off_support_mass,
                "selfConsistency": self.thresholds.self_consistency,
            },
        }


def default_gap_tol(y, model):
    """``1e-6 (1 + |y|_inf Theta)``."""
    return 1e-6 * (1.0 + float(np.max(np.abs(y))) * model.theta())


def extract_support(y, i, model, mode=None, gap_tol=None):
    """Nodes whose one-step objective is within ``gap_tol`` of the best."""
    a = objectives(y, model, mode)[i]
    tol = default_gap_tol(y, model) if gap_tol is None else gap_tol
    if tol <= 0:
        raise ValueError("gap_tol must be positive")
    return np.flatnonzero(a >= a.max() - tol)


def auxiliary_value(policy, lam, model, tol=1e-12):
    """Offset-1 value (discrete) or ``t0 = 0`` value (continuous)."""
    if model.mode == "dt":
        return value_dt(policy, lam, 1, model, tol=tol)
    return value_ct(policy, lam, 0.0, model, tol=tol)


def value(policy, lam, model, tol=1e-12):
    """Offset-0 value ``J`` (the continuous-time value is already at ``t0 = 0``)."""
    if model.mode == "dt":
        return value_dt(policy, lam, 0, model, tol=tol)
    return value_ct(policy, lam, 0.0, model, tol=tol)


def certify(policy, y, model, mode=None, thresholds=None, gap_tol=None, eval_tol=1e-12):
    """Build the three certificate quantities for ``policy`` at value vector ``y``.

    Parameters
    ----------
    policy : RelaxedPolicy
    y : array_like
        Continuation value at which the one-step objective is formed.
    thresholds : Thresholds, optional
    gap_tol : float, optional
        Width of the argmax set; default :func:`default_gap_tol`.
    """
    model.require(mode)
    thr = thresholds if thresholds is not None else Thresholds()
    y = np.asarray(y, dtype=float)
    a = objectives(y, model)
    masses = policy.masses()
    best = a.max(axis=1)
    gaps = np.maximum(best - np.einsum("ik,ik->i", masses, a), 0.0)
    tol = default_gap_tol(y, model) if gap_tol is None else gap_tol
    off = np.where(a < best[:, None] - tol, masses, 0.0).sum(axis=1)
    selfc = float(np.max(np.abs(auxiliary_value(policy, 0.0, model, eval_tol) - y)))
    eps, eta = float(gaps.max()), float(off.max())
    diam = float(np.linalg.norm(model.grid.edges))
    bound = eps + model.theta() * (1 + float(np.max(np.abs(y)))) * diam * eta
    passed = eps <= thr.deviation_gap and eta <= thr.off_support_mass and selfc <= thr.self_consistency
    return Certificate(eps, eta, selfc, bool(passed), float(tol), gaps, off, float(bound), thr)


@dataclass
class Stage:
    lam: float
    report: object
    densities: np.ndarray
    off_support_mass: float


@dataclass
class AnnealReport:
    stages: list
    final_policy: object
    final_value: np.ndarray
    certificate: Certificate
    final_lambda: float
    alpha_star: float
    cert_y: np.ndarray

    @property
    def lambdas(self):
        return [s.lam for s in self.stages]

    def to_dict(self):
        return {
            "stages": [
                {
                    "lambda": s.lam,
                    "converged": s.report.converged,
                    "residual": s.report.residual,
                    "iterations": s.report.iterations,
                    "y": s.report.y.tolist(),
                    "offSupportMass": s.off_support_mass,
                    "trace": [[int(k), float(r)] for k, r in s.report.trace],
                }
                for s in self.stages
            ],
            "finalLambda": self.final_lambda,
            "finalPolicy": self.final_policy.densities.tolist(),
            "finalValue": self.final_value.tolist(),
            "certificateY": self.cert_y.tolist(),
            "alphaStar": self.alpha_star,
            "certificate": self.certificate.to_dict(),
        }


def support_tolerance(lam, model, y, thresholds):
    """Argmax width that Gibbs mass at ``lam`` can resolve.

    Nodes more than ``lam ln(Leb / (w_min eta))`` below the best carry
    total Gibbs mass at most ``eta``.
    """
    grid = model.grid
    resolved = lam * math.log(grid.volume / (float(grid.weights.min()) * thresholds.off_support_mass))
    return max(default_gap_tol(y, model), resolved)


def solve_annealed(model, mode=None, schedule=None, solver=None, thresholds=None, y0=None):
    """Solve the regularised fixed point along a decreasing ``lam`` schedule.

    Each stage warm-starts from the previous fixed point.  The final policy
    is the Gibbs policy of the last converged stage and is certified at
    ``lam = 0`` against ``y* - lam E``, where ``E`` is the entropy part of
    its auxiliary value; ``final_value`` is its unregularised value ``J``.
    """
    mode = model.require(mode)
    schedule = schedule if schedule is not None else Schedule()
    cfg = solver if solver is not None else SolverConfig()
    thr = thresholds if thresholds is not None else Thresholds()
    kwargs = dict(damping=cfg.damping, tol=cfg.tol, max_iter=cfg.max_iter, anderson=cfg.anderson)
    y = np.zeros(model.states) if y0 is None else np.asarray(y0, dtype=float)
    stages = []
    last = None
    for n, lam in enumerate(schedule.lambdas()):
        if n == 0 and cfg.multistart > 0:
            rep, _ = solve_multistart(lam, model, mode, y0=y, n_random=cfg.multistart, seed=cfg.seed, **kwargs)
        else:
            rep = solve_fixed_point(y, lam, model, mode, start="warm" if n else "initial", **kwargs)
            if not rep.converged and cfg.multistart > 0:
                rep, _ = solve_multistart(lam, model, mode, y0=y, n_random=cfg.multistart,
                                          seed=cfg.seed + n, **kwargs)
        pol = gibbs_policy(rep.y, lam, model)
        tol_n = support_tolerance(lam, model, rep.y, thr)
        a = objectives(rep.y, model)
        off = float(np.max(np.where(a < a.max(axis=1, keepdims=True) - tol_n, pol.masses(), 0.0).sum(axis=1)))
        stages.append(Stage(lam, rep, pol.densities, off))
        if rep.converged:
            last = (lam, rep, pol)
            y = rep.y
    if last is None:
        raise AllStagesDiverged("no annealing stage reached the fixed-point tolerance")
    lam, rep, pol = last
    entropy_part = auxiliary_value(pol, lam, model) - auxiliary_value(pol, 0.0, model)
    y_cert = rep.y - entropy_part
    cert = certify(pol, y_cert, model, thresholds=thr, gap_tol=support_tolerance(lam, model, y_cert, thr))
    final_value = value(pol, 0.0, model)
    alpha = model_constants(model).alpha_star(model.bound_mass())
    return AnnealReport(stages, pol, final_value, cert, lam, alpha, y_cert)
