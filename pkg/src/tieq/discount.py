"""Discount functions and their analytic tails.

A discount is a nonincreasing map ``delta: [0, inf) -> [0, 1]`` with
``delta(0) = 1`` and finite total mass.  Each family exposes

* ``__call__(t)`` -- vectorised evaluation,
* ``tail_dt(T)``  -- an upper bound on ``sum_{t > T} delta(t)`` (exact for
  the closed-form families),
* ``tail_ct(T)``  -- an upper bound on ``int_T^inf delta(s) ds``,
* ``sampled(h)``  -- the discrete-time discount ``k -> delta(k h)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import zeta

from .errors import ModelError


class Discount:
    family = "abstract"
    discrete_only = False

    def __call__(self, t):
        raise NotImplementedError

    def tail_dt(self, T):
        raise NotImplementedError

    def tail_ct(self, T):
        raise NotImplementedError

    def tail(self, T, mode):
        return self.tail_dt(T) if mode == "dt" else self.tail_ct(T)

    def mass(self, mode):
        """Total mass: sum over t >= 0 (dt) or integral over [0, inf) (ct)."""
        if mode == "dt":
            return float(self(0.0)) + self.tail_dt(0)
        return self.tail_ct(0.0)

    def exponential_mixture(self):
        """``(weights, rates)`` if delta(t) = sum_m c_m exp(-r_m t), else None."""
        return None

    def sampled(self, h):
        return SampledDiscount(self, h)

    def to_dict(self):
        raise NotImplementedError

    def check(self):
        """Spot-check normalisation and monotonicity on a probe grid."""
        if abs(float(self(0.0)) - 1.0) > 1e-12:
            raise ModelError(f"{self.family}: delta(0) must be 1")
        probe = self(np.linspace(0.0, 200.0, 4001))
        if np.any(probe < -1e-15) or np.any(probe > 1 + 1e-15):
            raise ModelError(f"{self.family}: delta must take values in [0, 1]")
        if np.any(np.diff(probe) > 1e-15):
            raise ModelError(f"{self.family}: delta must be nonincreasing")


@dataclass(frozen=True)
class Exponential(Discount):
    """``delta(t) = exp(-rate t)``; in discrete time ``beta**t`` with ``beta = exp(-rate)``."""

    rate: float
    given_as: str = "rate"
    family = "exponential"

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ModelError("exponential discount needs a positive finite rate")

    @classmethod
    def from_beta(cls, beta):
        if not 0 < beta < 1:
            raise ModelError("exponential discount needs beta in (0, 1)")
        return cls(-math.log(beta), given_as="beta")

    @property
    def beta(self):
        return math.exp(-self.rate)

    def __call__(self, t):
        return np.exp(-self.rate * np.asarray(t, dtype=float))

    def tail_dt(self, T):
        return math.exp(-self.rate * (T + 1)) / -math.expm1(-self.rate)

    def tail_ct(self, T):
        return math.exp(-self.rate * T) / self.rate

    def exponential_mixture(self):
        return np.array([1.0]), np.array([self.rate])

    def sampled(self, h):
        return Exponential(self.rate * h)

    def to_dict(self):
        if self.given_as == "beta":
            return {"family": "exponential", "beta": self.beta}
        return {"family": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class QuasiHyperbolic(Discount):
    """``delta(0) = 1`` and ``delta(t) = beta * gamma**t`` for integer ``t >= 1``."""

    beta: float
    gamma: float
    family = "quasiHyperbolic"
    discrete_only = True

    def __post_init__(self):
        if not (0 < self.beta <= 1 and 0 < self.gamma < 1):
            raise ModelError("quasi-hyperbolic discount needs beta in (0,1], gamma in (0,1)")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= 0, 1.0, self.beta * self.gamma ** t)

    def tail_dt(self, T):
        T = max(int(T), 0)
        return self.beta * self.gamma ** (T + 1) / (1 - self.gamma)

    def tail_ct(self, T):
        raise ModelError("quasi-hyperbolic discounting is defined in discrete time only")

    def sampled(self, h):
        raise ModelError("quasi-hyperbolic discounting cannot be sampled from continuous time")

    def check(self):
        if self.beta * self.gamma > 1:
            raise ModelError("quasi-hyperbolic discount must be nonincreasing")

    def to_dict(self):
        return {"family": "quasiHyperbolic", "beta": self.beta, "gamma": self.gamma}


@dataclass(frozen=True)
class ExponentialMixture(Discount):
    """``delta(t) = sum_m c_m exp(-r_m t)`` with ``c_m > 0``, ``sum c_m = 1``."""

    weights: tuple
    rates: tuple
    family = "exponentialMixture"

    def __post_init__(self):
        c = np.asarray(self.weights, dtype=float)
        r = np.asarray(self.rates, dtype=float)
        if c.ndim != 1 or c.shape != r.shape or c.size == 0:
            raise ModelError("exponential mixture needs matching nonempty weights and rates")
        if np.any(c <= 0) or abs(c.sum() - 1) > 1e-12:
            raise ModelError("mixture weights must be positive and sum to 1")
        if np.any(r <= 0):
            raise ModelError("mixture rates must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        c, r = self.exponential_mixture()
        return np.tensordot(np.exp(-np.multiply.outer(t, r)), c, axes=([-1], [0]))

    def tail_dt(self, T):
        c, r = self.exponential_mixture()
        return float(np.sum(c * np.exp(-r * (T + 1)) / -np.expm1(-r)))

    def tail_ct(self, T):
        c, r = self.exponential_mixture()
        return float(np.sum(c * np.exp(-r * T) / r))

    def exponential_mixture(self):
        return np.asarray(self.weights, dtype=float), np.asarray(self.rates, dtype=float)

    def sampled(self, h):
        return ExponentialMixture(tuple(self.weights), tuple(float(r) * h for r in self.rates))

    def to_dict(self):
        return {
            "family": "exponentialMixture",
            "weights": [float(c) for c in self.weights],
            "rates": [float(r) for r in self.rates],
        }


@dataclass(frozen=True)
class GeneralizedHyperbolic(Discount):
    """``delta(t) = (1 + k t) ** (-gamma / k)``; summable iff ``gamma > k``."""

    k: float
    gamma: float
    family = "generalizedHyperbolic"

    def __post_init__(self):
        if not (self.k > 0 and self.gamma > self.k):
            raise ModelError("generalized hyperbolic discount needs gamma > k > 0 (finite mass)")

    @property
    def _power(self):
        return self.gamma / self.k

    def __call__(self, t):
        return (1.0 + self.k * np.asarray(t, dtype=float)) ** (-self._power)

    def tail_dt(self, T):
        # sum_{t >= T+1} (1 + k t)^-s = k^-s * HurwitzZeta(s, T + 1 + 1/k)
        s = self._power
        return float(self.k ** (-s) * zeta(s, T + 1 + 1 / self.k))

    def tail_ct(self, T):
        return (1 + self.k * T) ** (1 - self._power) / (self.gamma - self.k)

    def sampled(self, h):
        return GeneralizedHyperbolic(self.k * h, self.gamma * h)

    def to_dict(self):
        return {"family": "generalizedHyperbolic", "k": self.k, "gamma": self.gamma}


@dataclass(frozen=True)
class Tabulated(Discount):
    """Values on ``t = 0, step, 2 step, ...``, linear in between, zero past the table.

    ``tail_bound`` is the mass the table does not represent; it is added to
    every tail so truncation accounts for it.
    """

    values: tuple
    step: float = 1.0
    tail_bound: float = 0.0
    family = "tabulated"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1 or self.step <= 0 or self.tail_bound < 0:
            raise ModelError("tabulated discount needs a nonempty table, step > 0, tail_bound >= 0")

    @property
    def _table(self):
        return np.asarray(self.values, dtype=float)

    @property
    def _times(self):
        return self.step * np.arange(len(self.values))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.interp(t, self._times, self._table, right=0.0)

    def tail_dt(self, T):
        if self.step != 1.0:
            raise ModelError("discrete-time tabulated discount requires step 1")
        return float(self._table[int(T) + 1:].sum()) + self.tail_bound

    def tail_ct(self, T):
        times = self._times
        if T >= times[-1]:
            return self.tail_bound
        grid = np.concatenate([[T], times[times > T]])
        return float(trapezoid(self(grid), grid)) + self.tail_bound

    def check(self):
        v = self._table
        if abs(v[0] - 1) > 1e-12 or np.any(v < 0) or np.any(v > 1) or np.any(np.diff(v) > 0):
            raise ModelError("tabulated discount must start at 1, stay in [0,1] and not increase")

    def to_dict(self):
        return {
            "family": "tabulated",
            "values": [float(x) for x in self.values],
            "step": self.step,
            "tail_bound": self.tail_bound,
        }


@dataclass(frozen=True)
class SampledDiscount(Discount):
    """Discrete-time discount ``k -> base(k h)`` for bases without a closed-form sample."""

    base: Discount
    h: float
    family = "sampled"
    discrete_only = True

    def __call__(self, t):
        return self.base(np.asarray(t, dtype=float) * self.h)

    def tail_dt(self, T):
        # monotone base: delta(kh) <= (1/h) int_{(k-1)h}^{kh} delta
        return self.base.tail_ct(T * self.h) / self.h

    def tail_ct(self, T):
        raise ModelError("a sampled discount lives in discrete time")

    def to_dict(self):
        return {"family": "sampled", "h": self.h, "base": self.base.to_dict()}


def discount_from_dict(spec):
    fam = spec.get("family")
    if fam == "exponential":
        if "beta" in spec:
            return Exponential.from_beta(spec["beta"])
        return Exponential(float(spec["rate"]))
    if fam == "quasiHyperbolic":
        return QuasiHyperbolic(float(spec["beta"]), float(spec["gamma"]))
    if fam == "exponentialMixture":
        return ExponentialMixture(tuple(spec["weights"]), tuple(spec["rates"]))
    if fam == "generalizedHyperbolic":
        return GeneralizedHyperbolic(float(spec["k"]), float(spec["gamma"]))
    if fam == "tabulated":
        return Tabulated(tuple(spec["values"]), float(spec.get("step", 1.0)),
                         float(spec.get("tail_bound", 0.0)))
    if fam == "sampled":
        return SampledDiscount(discount_from_dict(spec["base"]), float(spec["h"]))
    raise ModelError(f"unknown discount family {fam!r}")
