"""Differential entropy on the action grid and the Gibbs best-response operator.

The one-step objective in state ``i`` is ``a_k = f(0, i, u_k) + K[k, i, :] @ y``
where ``K`` is the transition tensor (discrete time) or the rate tensor
(continuous time).  The Gibbs density is ``rho_k ∝ exp(a_k / lam)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import brentq
from scipy.special import gammainc, gammaln, logsumexp, xlogy

from .errors import NegativeDensity, NonpositiveLambda, NotNormalized
from .model import RelaxedPolicy

NORM_TOL = 1e-10


def entropy(row, grid, tol=NORM_TOL):
    """``-sum_k w_k rho_k ln rho_k`` with ``0 ln 0 = 0``.

    >>> from tieq.model import build_action_grid
    >>> round(entropy(np.full(4, 0.5), build_action_grid([[0, 2]], 4)), 12)
    0.693147180560
    """
    row = np.asarray(row, dtype=float)
    if np.any(row < 0):
        raise NegativeDensity("density has negative values")
    mass = float(grid.weights @ row)
    if abs(mass - 1.0) > tol:
        raise NotNormalized(f"density integrates to {mass!r}, not 1")
    return float(-(grid.weights @ xlogy(row, row)))


def entropies(densities, grid, tol=NORM_TOL):
    """Row-wise :func:`entropy` for a ``(d, K)`` array."""
    rho = np.asarray(densities, dtype=float)
    if np.any(rho < 0):
        raise NegativeDensity("density has negative values")
    err = np.abs(rho @ grid.weights - 1.0)
    if np.any(err > tol):
        raise NotNormalized(f"density rows integrate to 1 only within {err.max():.3g}")
    return -(xlogy(rho, rho) @ grid.weights)


def objectives(y, model, mode=None):
    """One-step objectives ``a[i, k] = f(0, i, u_k) + K[k, i, :] @ y``, shape ``(d, K)``."""
    model.require(mode)
    y = np.asarray(y, dtype=float)
    return model.f0() + np.einsum("kij,j->ik", model.kernel, y)


def objective(y, i, model, mode=None):
    model.require(mode)
    y = np.asarray(y, dtype=float)
    return model.f0()[i] + model.kernel[:, i, :] @ y


def _check_lam(lam):
    if not lam > 0:
        raise NonpositiveLambda(f"lambda must be positive, got {lam!r}")


def gibbs_from_objective(a, lam, grid):
    """Density ``exp(a / lam)`` normalised on the grid; rows along the last axis.

    Computed in the log domain, so ``lam`` may be tiny; weights far below
    the maximum underflow to exact zeros.
    """
    _check_lam(lam)
    a = np.asarray(a, dtype=float)
    with np.errstate(over="ignore"):  # gaps overflowing to -inf carry zero weight
        z = (a - a.max(axis=-1, keepdims=True)) / lam
    rho = np.exp(z - logsumexp(z, axis=-1, b=grid.weights, keepdims=True))
    return rho / (rho @ grid.weights)[..., None]


def softmax_value(a, lam, grid):
    """``lam * ln sum_k w_k exp(a_k / lam)``, the Gibbs variational optimum.

    At ``lam = 0`` returns ``max_k a_k``.
    """
    a = np.asarray(a, dtype=float)
    if lam == 0:
        return a.max(axis=-1)
    _check_lam(lam)
    m = a.max(axis=-1)
    with np.errstate(over="ignore"):  # gaps overflowing to -inf carry zero weight
        z = (a - m[..., None]) / lam
    return m + lam * logsumexp(z, axis=-1, b=grid.weights)


def gibbs(y, i, lam, model, mode=None):
    """Gibbs density row of state ``i`` at continuation value ``y``."""
    return gibbs_from_objective(objective(y, i, model, mode), lam, model.grid)


def gibbs_policy(y, lam, model, mode=None):
    """All Gibbs rows as a :class:`RelaxedPolicy`."""
    return RelaxedPolicy(gibbs_from_objective(objectives(y, model, mode), lam, model.grid), model.grid)


# ------------------------------------------------------------------- bounds


@dataclass(frozen=True)
class BoundConstants:
    """Conservative constants of the Gibbs density/entropy bounds.

    ``K0``, ``K1``, ``K2`` bound the mass of an exponential bump inside the
    cone; ``theta`` is the Lipschitz constant, ``ln_leb = ln Leb(U)``.
    """

    dims: int
    ln_leb: float
    theta: float
    K0: float
    K1: float
    K2: float

    def ln_C(self, lam):
        """``ln max{1/K0, (theta/lam)^dims / (K1 K2)}``."""
        first = -math.log(self.K0)
        if self.theta == 0:
            return first
        second = self.dims * (math.log(self.theta) - math.log(lam)) - math.log(self.K1 * self.K2)
        return max(first, second)

    def kappa(self, lam):
        return abs(self.ln_leb) + abs(self.ln_C(lam))

    def phi(self, z, lam):
        """Entropy bound ``kappa + dims ln(1 + z)`` at fixed ``lam``."""
        return self.kappa(lam) + self.dims * math.log1p(z)

    @property
    def kappa1(self):
        second = 0.0
        if self.theta > 0:
            second = abs(self.dims * math.log(self.theta) - math.log(self.K1 * self.K2))
        return abs(self.ln_leb) + max(abs(math.log(self.K0)), second)

    @property
    def kappa2(self):
        return float(self.dims) if self.theta > 0 else 0.0

    def phi_uniform(self, z, lam):
        """``kappa1 + kappa2 |ln lam| + dims ln(1 + z)``, valid for every ``lam > 0``."""
        return self.kappa1 + self.kappa2 * abs(math.log(lam)) + self.dims * math.log1p(z)

    @property
    def K(self):
        """``K`` with ``lam * phi_uniform(z, lam) <= K (1 + ln(1 + z))`` for ``lam <= 1``."""
        return max(self.kappa1 + self.kappa2 / math.e, float(self.dims))

    def eta(self, z):
        return self.K * (1.0 + math.log1p(z))

    def alpha_star(self, M):
        """``sup{a >= 0 : a <= (1 + eta(a)) M}``."""
        g = lambda a: (1.0 + self.eta(a)) * M - a  # noqa: E731
        hi = max(1.0, 2 * M)
        while g(hi) > 0:
            hi *= 2
        return float(brentq(g, 0.0, hi, xtol=1e-12 * hi)) if g(0.0) > 0 else 0.0


def cone_constants(grid, cone, theta):
    """``K0, K1, K2`` for the cone with half-angle ``iota`` and slant ``theta``."""
    ell, iota, h = grid.dims, cone.iota, cone.theta
    if ell == 1:
        return BoundConstants(1, math.log(grid.volume), theta, h / math.e, 1.0, 1.0 - 1.0 / math.e)
    # solid angle of a circular cone: |S^{ell-2}| * int_0^iota sin^{ell-2}
    sphere = 2 * math.pi ** ((ell - 1) / 2) / math.exp(gammaln((ell - 1) / 2))
    phis = np.linspace(0.0, iota, 2049)
    cap = float(trapezoid(np.sin(phis) ** (ell - 2), phis)) if ell > 2 else iota
    K1 = sphere * cap
    K0 = K1 * h ** ell / ell / math.e
    K2 = float(gammainc(ell, 1.0)) * math.exp(gammaln(ell))
    return BoundConstants(ell, math.log(grid.volume), theta, K0, K1, K2)


def model_constants(model):
    return cone_constants(model.grid, model.cone_params, model.theta())


@dataclass
class GibbsDiagnostics:
    max_density: float
    entropy_by_state: np.ndarray
    ln_leb: float
    phi: float
    lambda_uniform_bound: float
    density_bound: float
    violations: list

    @property
    def ok(self):
        return not self.violations

    def to_dict(self):
        return {
            "maxDensity": self.max_density,
            "entropyByState": self.entropy_by_state.tolist(),
            "upperBoundLnLeb": self.ln_leb,
            "lowerBoundPhi": self.phi,
            "lambdaUniformBound": self.lambda_uniform_bound,
            "densityBound": self.density_bound,
            "violations": list(self.violations),
        }


def gibbs_diagnostics(y, lam, model, mode=None, constants=None):
    """Entropy and density of the Gibbs rows against their analytic bounds.

    Bound slack is reported, never raised.
    """
    _check_lam(lam)
    c = constants if constants is not None else model_constants(model)
    y = np.asarray(y, dtype=float)
    rho = gibbs_policy(y, lam, model, mode).densities
    H = entropies(rho, model.grid)
    z = float(np.max(np.abs(y))) if y.size else 0.0
    phi = c.phi(z, lam)
    uniform = c.phi_uniform(z, lam)
    density_bound = math.exp(c.ln_C(lam) + c.dims * math.log1p(z))
    violations = []
    slack = 1e-9 * max(1.0, abs(c.ln_leb))
    for i, h in enumerate(H):
        if h > c.ln_leb + slack:
            violations.append(f"state {i}: entropy {h:.6g} exceeds ln Leb(U) {c.ln_leb:.6g}")
        if abs(h) > phi + slack:
            violations.append(f"state {i}: |entropy| {abs(h):.6g} exceeds phi {phi:.6g}")
    if rho.max() > density_bound * (1 + 1e-9):
        violations.append(f"max density {rho.max():.6g} exceeds bound {density_bound:.6g}")
    return GibbsDiagnostics(float(rho.max()), H, c.ln_leb, phi, uniform, density_bound, violations)
