"""The maps Psi (discrete) and Psi-tilde (continuous) and a damped solver for ``Psi(y) = y``."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .entropy_gibbs import gibbs_policy, model_constants
from .eval_ct import value_ct
from .eval_dt import value_dt


def psi(y, lam, model, mode=None, tol=1e-12):
    """Value of the Gibbs policy at ``y``: offset 1 in discrete time, ``t0 = 0`` in continuous time."""
    mode = model.require(mode)
    policy = gibbs_policy(y, lam, model)
    if mode == "dt":
        return value_dt(policy, lam, 1, model, tol=tol)
    return value_ct(policy, lam, 0.0, model, tol=tol)


@dataclass
class FixedPointReport:
    """Outcome of one solve.

    ``residual`` is ``|Psi(y) - y|_inf`` at the returned ``y``; ``trace``
    lists ``(iteration, residual)`` for every evaluation of Psi.
    """

    y: np.ndarray
    residual: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)
    lam: float = float("nan")
    tol: float = float("nan")
    start: str = ""
    confinement_violations: list = field(default_factory=list)

    def to_dict(self):
        return {
            "y": self.y.tolist(),
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "lambda": self.lam,
            "tol": self.tol,
            "start": self.start,
            "trace": [[int(k), float(r)] for k, r in self.trace],
            "confinementViolations": list(self.confinement_violations),
        }


def confinement_bound(y, lam, model, constants=None):
    """``(1 + lam phi(|y|)) M``, the a priori bound on ``|Psi(y)|_inf``."""
    c = constants if constants is not None else model_constants(model)
    z = float(np.max(np.abs(y))) if len(y) else 0.0
    return (1.0 + lam * c.phi(z, lam)) * model.bound_mass()


def _anderson_step(ys, gs, y, g, damping):
    """Type-II Anderson mixing over the stored history."""
    dY = np.diff(np.array(ys), axis=0).T
    dG = np.diff(np.array(gs), axis=0).T
    coef, *_ = np.linalg.lstsq(dG, g, rcond=None)
    return y + damping * g - (dY + damping * dG) @ coef


def solve_fixed_point(y0, lam, model, mode=None, damping=0.5, tol=1e-10, max_iter=500,
                      anderson=False, window=3, check_confinement=False, eval_tol=None, start=""):
    """Damped Picard iteration ``y <- (1 - damping) y + damping Psi(y)``.

    Parameters
    ----------
    y0 : array_like
        Initial value vector.
    lam : float
        Entropy weight, ``> 0``.
    model : ModelSpec
    mode : {"dt", "ct"}, optional
        Must match the model when given.
    damping : float
        Step ``theta`` in ``(0, 1]``.
    tol : float
        Stop once ``|Psi(y) - y|_inf <= tol``.
    max_iter : int
        Maximum number of Psi evaluations, ``>= 1``.
    anderson : bool
        Use Anderson mixing with a residual safeguard.
    check_confinement : bool
        Record every iterate whose Psi image leaves the a priori ball.
    eval_tol : float, optional
        Accuracy of each value evaluation; defaults to ``tol / 100``.

    Returns
    -------
    FixedPointReport
        Non-convergence is reported through ``converged = False``.
    """
    mode = model.require(mode)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    eval_tol = tol / 100 if eval_tol is None else eval_tol
    constants = model_constants(model) if check_confinement else None
    y = np.array(y0, dtype=float).reshape(model.states)
    trace, violations = [], []
    ys, gs = [], []
    best = (np.inf, y.copy())
    residual = np.inf
    for it in range(1, max_iter + 1):
        image = psi(y, lam, model, mode, tol=eval_tol)
        g = image - y
        residual = float(np.max(np.abs(g)))
        trace.append((it, residual))
        if check_confinement:
            bound = confinement_bound(y, lam, model, constants)
            size = float(np.max(np.abs(image)))
            if size > bound * (1 + 1e-9):
                violations.append(f"iteration {it}: |Psi(y)| = {size:.6g} > {bound:.6g}")
        if residual < best[0]:
            best = (residual, y.copy())
        if residual <= tol:
            return FixedPointReport(y, residual, it, True, trace, lam, tol, start, violations)
        if it == max_iter:
            break
        if anderson:
            if len(trace) > 1 and residual > 2 * trace[-2][1]:
                ys, gs = [], []
            ys.append(y.copy())
            gs.append(g.copy())
            ys, gs = ys[-(window + 1):], gs[-(window + 1):]
            if len(ys) > 1:
                cand = _anderson_step(ys, gs, y, g, damping)
                y = cand if np.all(np.isfinite(cand)) else y + damping * g
                continue
        y = y + damping * g
    res, ybest = best
    return FixedPointReport(ybest, res, len(trace), False, trace, lam, tol, start, violations)


def thread_count():
    """Worker cap from ``TIEQ_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("TIEQ_THREADS", "1")))
    except ValueError:
        return 1


def starting_points(model, lam, y0=None, n_random=1, seed=0):
    """``[(label, y)]``: ``y0`` (or 0), ``M 1``, ``-M 1`` and random points in the ball of radius alpha*."""
    d = model.states
    M = model.bound_mass()
    pts = [("initial", np.zeros(d) if y0 is None else np.asarray(y0, dtype=float)),
           ("+M", np.full(d, M)), ("-M", np.full(d, -M))]
    if n_random > 0:
        radius = model_constants(model).alpha_star(M)
        rng = np.random.default_rng(seed)
        for r in range(n_random):
            pts.append((f"random{r}", rng.uniform(-radius, radius, size=d)))
    return pts


def solve_multistart(lam, model, mode=None, y0=None, n_random=1, seed=0, workers=None, **kwargs):
    """Solve from every starting point; returns ``(best, reports)``.

    ``best`` is the first converged report in start order, else the one
    with the smallest residual.
    """
    pts = starting_points(model, lam, y0, n_random, seed)
    run = lambda p: solve_fixed_point(p[1], lam, model, mode, start=p[0], **kwargs)  # noqa: E731
    workers = thread_count() if workers is None else workers
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run, pts))
    else:
        reports = [run(p) for p in pts]
    done = [r for r in reports if r.converged]
    best = done[0] if done else min(reports, key=lambda r: r.residual)
    return best, reports
