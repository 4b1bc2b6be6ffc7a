"""Problem data: action quadrature, rewards, kernels, policies.

Kernels are stored as one ``(K, d, d)`` array indexed ``[node][from][to]``:
a transition tensor ``p`` for discrete-time models and a rate tensor ``q``
for continuous-time ones.  Everything is immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .discount import Discount, Exponential
from .errors import DegenerateBox, GridTooLarge, ModeMismatch, ModelError, NoFiniteHorizon

MAX_GRID_NODES = 1_000_000
MODES = ("dt", "ct")


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------- grid


@dataclass(frozen=True, eq=False)
class ActionGrid:
    """Tensor quadrature on an axis-aligned box ``U``.

    ``nodes`` is ``(K, dims)``; node ``k`` enumerates the per-axis
    coordinates with the first axis varying slowest.
    """

    bounds: np.ndarray
    per_dim: int
    include_vertices: bool
    axes: tuple
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def dims(self):
        return self.bounds.shape[0]

    @property
    def size(self):
        return self.weights.shape[0]

    @property
    def volume(self):
        return float(np.prod(self.bounds[:, 1] - self.bounds[:, 0]))

    @property
    def edges(self):
        return self.bounds[:, 1] - self.bounds[:, 0]

    def one_hot(self, k):
        """Density of the Dirac mass at node ``k``: ``1 / w_k`` there, 0 elsewhere."""
        row = np.zeros(self.size)
        row[k] = 1.0 / self.weights[k]
        return row

    def uniform(self):
        return np.full(self.size, 1.0 / self.volume)

    def nearest(self, point):
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return int(np.argmin(np.linalg.norm(self.nodes - point, axis=1)))

    def neighbour_pairs(self):
        """Index pairs of nodes adjacent along one axis."""
        shape = (self.per_dim,) * self.dims
        idx = np.arange(self.size).reshape(shape)
        pairs = []
        for ax in range(self.dims):
            lo = np.take(idx, np.arange(self.per_dim - 1), axis=ax).ravel()
            hi = np.take(idx, np.arange(1, self.per_dim), axis=ax).ravel()
            pairs.append(np.stack([lo, hi], axis=1))
        return np.concatenate(pairs)

    def to_dict(self):
        out = {"bounds": self.bounds.tolist(), "per_dim": self.per_dim}
        if self.include_vertices:
            out["include_vertices"] = True
        return out


def build_action_grid(bounds, per_dim, include_vertices=False, max_nodes=MAX_GRID_NODES):
    """Midpoint tensor grid on the box ``bounds`` (list of ``[a, b]``).

    With ``include_vertices`` the nodes are equispaced *including* the box
    faces and the weights follow the composite trapezoid rule, so corner
    actions are representable exactly.

    >>> g = build_action_grid([[0, 1]], 3)
    >>> g.nodes.ravel().tolist(), g.weights.tolist()
    ([0.16666666666666666, 0.5, 0.8333333333333333], [0.3333333333333333, 0.3333333333333333, 0.3333333333333333])
    """
    b = np.array(bounds, dtype=float)
    if b.ndim == 1:
        b = b[None, :]
    if b.ndim != 2 or b.shape[1] != 2 or b.shape[0] < 1:
        raise ModelError("bounds must be a list of [a, b] intervals")
    if np.any(~np.isfinite(b)) or np.any(b[:, 0] >= b[:, 1]):
        raise DegenerateBox(f"every interval needs a < b, got {b.tolist()}")
    n = int(per_dim)
    if n < 2:
        raise ModelError("per_dim must be at least 2")
    dims = b.shape[0]
    if n ** dims > max_nodes:
        raise GridTooLarge(f"{n}^{dims} nodes exceeds cap {max_nodes}")

    axes, axis_w = [], []
    for a, c in b:
        if include_vertices:
            h = (c - a) / (n - 1)
            x = a + h * np.arange(n)
            x[-1] = c
            w = np.full(n, h)
            w[[0, -1]] = h / 2
        else:
            h = (c - a) / n
            x = a + h * (np.arange(n) + 0.5)
            w = np.full(n, h)
        axes.append(x)
        axis_w.append(w)

    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    wmesh = np.meshgrid(*axis_w, indexing="ij")
    weights = np.prod(np.stack([m.ravel() for m in wmesh], axis=1), axis=1)
    return ActionGrid(
        bounds=_frozen(b),
        per_dim=n,
        include_vertices=bool(include_vertices),
        axes=tuple(_frozen(x) for x in axes),
        nodes=_frozen(nodes),
        weights=_frozen(weights),
    )


# ------------------------------------------------------------------------ rewards


@dataclass(frozen=True, eq=False)
class SeparableReward:
    """``f(t, i, u_k) = delta(t) * g[i, k]``."""

    discount: Discount
    g: np.ndarray

    form = "separable"

    def __post_init__(self):
        object.__setattr__(self, "g", _frozen(self.g))
        if self.g.ndim != 2:
            raise ModelError("separable reward table g must be states x nodes")

    def at(self, t):
        return float(self.discount(t)) * self.g

    def sup(self):
        return float(np.max(np.abs(self.g))) if self.g.size else 0.0

    def envelope(self, t):
        return self.discount(t) * self.sup()

    def tail(self, T, mode):
        return self.sup() * self.discount.tail(T, mode)

    def mass(self, mode):
        return self.sup() * self.discount.mass(mode)

    def to_dict(self):
        return {"form": "separable", "g": self.g.tolist()}


@dataclass(frozen=True, eq=False)
class TabulatedReward:
    """General reward tabulated on ``times``; linear between samples, zero beyond.

    ``discount`` weights the entropy term.  ``tail_bound`` is the caller's
    bound on the envelope mass past the last sample.
    """

    discount: Discount
    times: np.ndarray
    values: np.ndarray
    tail_bound: float = 0.0

    form = "general"

    def __post_init__(self):
        object.__setattr__(self, "times", _frozen(self.times))
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.ndim != 3 or self.values.shape[0] != self.times.shape[0]:
            raise ModelError("tabulated reward needs values[time][state][node]")
        if np.any(np.diff(self.times) <= 0) or self.times[0] != 0:
            raise ModelError("tabulated reward times must start at 0 and increase")
        if self.tail_bound < 0:
            raise ModelError("tail_bound must be nonnegative")

    @property
    def g(self):
        return self.values[0]

    def at(self, t):
        times = self.times
        if t >= times[-1]:
            return self.values[-1] if t == times[-1] else np.zeros_like(self.values[0])
        j = int(np.searchsorted(times, t, side="right")) - 1
        s = (t - times[j]) / (times[j + 1] - times[j])
        return (1 - s) * self.values[j] + s * self.values[j + 1]

    def _env_nodes(self):
        return np.max(np.abs(self.values.reshape(len(self.times), -1)), axis=1)

    def sup(self):
        return float(self._env_nodes().max())

    def envelope(self, t):
        return np.interp(np.asarray(t, dtype=float), self.times, self._env_nodes(), right=0.0)

    def tail(self, T, mode):
        env = self._env_nodes()
        if mode == "dt":
            keep = self.times > T
            return float(env[keep].sum()) + self.tail_bound
        if T >= self.times[-1]:
            return self.tail_bound
        grid = np.concatenate([[T], self.times[self.times > T]])
        return float(trapezoid(self.envelope(grid), grid)) + self.tail_bound

    def mass(self, mode):
        env = self._env_nodes()
        if mode == "dt":
            return float(env.sum()) + self.tail_bound
        return float(trapezoid(env, self.times)) + self.tail_bound

    def to_dict(self):
        return {
            "form": "general",
            "times": self.times.tolist(),
            "f": self.values.tolist(),
            "tail_bound": self.tail_bound,
        }


# -------------------------------------------------------------------------- model


@dataclass(frozen=True)
class ConeParams:
    iota: float
    theta: float

    def __post_init__(self):
        if not (0 < self.iota <= math.pi / 2) or self.theta <= 0:
            raise ModelError("cone needs iota in (0, pi/2] and slant height theta > 0")


def default_cone(grid):
    """Cone admitted at every point of a box: half-angle ``arctan(1/sqrt(dims-1))``."""
    iota = math.pi / 2 if grid.dims == 1 else math.atan(1 / math.sqrt(grid.dims - 1))
    return ConeParams(iota, float(np.min(grid.edges)) / 2)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A finite-state controlled chain with tabulated actions.

    ``kernel_type`` is ``"transition"`` (discrete time, mode ``dt``) or
    ``"generator"`` (continuous time, mode ``ct``).
    """

    grid: ActionGrid
    reward: SeparableReward | TabulatedReward
    kernel: np.ndarray
    kernel_type: str
    cone: ConeParams | None = None
    lipschitz: float | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kernel", _frozen(self.kernel))
        if self.kernel_type not in ("transition", "generator"):
            raise ModelError("kernel_type must be 'transition' or 'generator'")
        K, d = self.grid.size, self.reward.g.shape[0]
        if self.kernel.shape != (K, d, d):
            raise ModelError(f"kernel must have shape (nodes, states, states) = {(K, d, d)}, "
                             f"got {self.kernel.shape}")
        if self.reward.g.shape != (d, K):
            raise ModelError(f"reward table must have shape (states, nodes) = {(d, K)}")
        if self.lipschitz is not None and not self.lipschitz >= 0:
            raise ModelError("lipschitz estimate must be nonnegative")

    @property
    def states(self):
        return self.kernel.shape[1]

    @property
    def mode(self):
        return "dt" if self.kernel_type == "transition" else "ct"

    @property
    def discount(self):
        return self.reward.discount

    @property
    def cone_params(self):
        return self.cone if self.cone is not None else default_cone(self.grid)

    def require(self, mode):
        if mode is not None and mode != self.mode:
            raise ModeMismatch(f"model is {self.mode}, requested {mode}")
        return self.mode

    def f0(self):
        """Reward at time difference 0, ``(d, K)``."""
        return np.asarray(self.reward.at(0.0))

    def theta(self):
        """Supplied Lipschitz constant, or the finite-difference estimate."""
        return self.lipschitz if self.lipschitz is not None else estimate_lipschitz(self)

    def bound_mass(self):
        """``M = sum_t (sup|f(t)| + delta(t))`` (dt) or its integral (ct)."""
        return self.reward.mass(self.mode) + self.discount.mass(self.mode)

    def to_dict(self):
        from .io import model_to_dict

        return model_to_dict(self)

    def __eq__(self, other):
        if not isinstance(other, ModelSpec):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None


def estimate_lipschitz(model):
    """Max finite-difference slope of ``u -> f(t,i,u)`` plus ``u -> kernel row`` (l1).

    Taken over axis-adjacent node pairs, all states, and (for tabulated
    rewards) all time samples.
    """
    grid = model.grid
    pairs = grid.neighbour_pairs()
    if pairs.size == 0:
        return 0.0
    dist = np.linalg.norm(grid.nodes[pairs[:, 1]] - grid.nodes[pairs[:, 0]], axis=1)
    if isinstance(model.reward, TabulatedReward):
        tables = model.reward.values
    else:
        tables = model.reward.g[None] * float(np.max(model.discount(np.array([0.0]))))
    f_slope = np.max(np.abs(tables[:, :, pairs[:, 1]] - tables[:, :, pairs[:, 0]]), axis=0)
    f_slope = f_slope / dist  # (d, pairs)
    k_diff = np.abs(model.kernel[pairs[:, 1]] - model.kernel[pairs[:, 0]]).sum(axis=2)  # (pairs, d)
    k_slope = k_diff.T / dist
    return float(np.max(f_slope + k_slope))


# ------------------------------------------------------------------------ policies


@dataclass(frozen=True, eq=False)
class RelaxedPolicy:
    """Per-state density values ``rho[i, k]`` on the action grid."""

    densities: np.ndarray
    grid: ActionGrid

    def __post_init__(self):
        object.__setattr__(self, "densities", _frozen(self.densities))
        if self.densities.ndim != 2 or self.densities.shape[1] != self.grid.size:
            raise ModelError("policy densities must be (states, nodes)")

    @property
    def states(self):
        return self.densities.shape[0]

    def masses(self):
        """Quadrature masses ``w_k rho[i, k]``; each row sums to one."""
        return self.densities * self.grid.weights

    def normalization_error(self):
        return float(np.max(np.abs(self.masses().sum(axis=1) - 1.0)))

    def check(self, tol=1e-10):
        from .errors import NegativeDensity, NotNormalized

        if np.any(self.densities < 0):
            raise NegativeDensity("policy has negative density values")
        err = self.normalization_error()
        if err > tol:
            raise NotNormalized(f"policy rows integrate to 1 only within {err:.3g}")
        return self

    @classmethod
    def standard(cls, grid, nodes):
        """Dirac policy choosing node ``nodes[i]`` in state ``i``."""
        return cls(np.stack([grid.one_hot(k) for k in nodes]), grid)

    @classmethod
    def uniform(cls, grid, states):
        return cls(np.tile(grid.uniform(), (states, 1)), grid)

    @classmethod
    def from_masses(cls, grid, masses):
        return cls(np.asarray(masses, dtype=float) / grid.weights, grid)


# ---------------------------------------------------------------------- validation


@dataclass
class Violation:
    code: str
    index: tuple
    detail: str


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    lipschitz: float | None = None

    @property
    def passed(self):
        return not self.violations

    def codes(self):
        return [v.code for v in self.violations]


def validate_model(model, tol=1e-10):
    """Check kernel structure, reward finiteness and discount properties.

    Never raises on bad data; the returned report lists every violation
    with its ``(node, state)`` index.
    """
    report = ValidationReport()
    K = model.kernel
    add = report.violations.append
    if not np.all(np.isfinite(K)):
        for idx in zip(*np.nonzero(~np.isfinite(K))):
            add(Violation("NonFiniteKernel", tuple(int(x) for x in idx), "non-finite kernel entry"))
    sums = K.sum(axis=2)
    if model.kernel_type == "transition":
        for k, i in zip(*np.nonzero(np.abs(sums - 1) > tol)):
            add(Violation("RowNotStochastic", (int(k), int(i)), f"row sums to {sums[k, i]!r}"))
        for k, i, j in zip(*np.nonzero(K < -tol)):
            add(Violation("NegativeProbability", (int(k), int(i), int(j)), f"{K[k, i, j]!r}"))
    else:
        for k, i in zip(*np.nonzero(np.abs(sums) > tol)):
            add(Violation("RowSumNonzero", (int(k), int(i)), f"row sums to {sums[k, i]!r}"))
        d = K.shape[1]
        off = K.copy()
        off[:, np.arange(d), np.arange(d)] = 0.0
        for k, i, j in zip(*np.nonzero(off < -tol)):
            add(Violation("NegativeRate", (int(k), int(i), int(j)), f"{K[k, i, j]!r}"))
    tables = model.reward.values if isinstance(model.reward, TabulatedReward) else model.reward.g
    if not np.all(np.isfinite(tables)):
        add(Violation("NonFiniteReward", (), "reward table has non-finite entries"))
    try:
        model.discount.check()
        if model.mode == "ct" and model.discount.discrete_only:
            add(Violation("DiscountMode", (), f"{model.discount.family} is discrete-time only"))
        else:
            mass = model.bound_mass()
            if not math.isfinite(mass):
                add(Violation("NotSummable", (), "reward envelope or discount has infinite mass"))
    except ModelError as exc:
        add(Violation("BadDiscount", (), str(exc)))
    w = model.grid.weights
    if abs(w.sum() - model.grid.volume) > 1e-12 * model.grid.volume:
        add(Violation("GridWeights", (), "quadrature weights do not sum to Leb(U)"))
    if np.all(np.isfinite(K)):
        report.lipschitz = model.lipschitz if model.lipschitz is not None else estimate_lipschitz(model)
    return report


# ---------------------------------------------------------------------- truncation


def entropy_cap(grid):
    """Largest |H| of any density on the grid: entropies lie in ``[ln w_min, ln Leb(U)]``."""
    return max(abs(math.log(grid.volume)), abs(math.log(float(np.min(grid.weights)))))


def truncation_horizon(reward, lam, tol, mode, entropy_bound=0.0):
    """Smallest horizon ``T`` whose discarded mass is at most ``tol``.

    The discarded mass is ``tail(T)`` of ``envelope + lam * entropy_bound * delta``.
    Discrete time returns an integer; continuous time a float resolved by
    bisection to ~1e-9 relative.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if mode not in MODES:
        raise ModeMismatch(f"unknown mode {mode!r}")
    weight = lam * entropy_bound

    def tail(T):
        return reward.tail(T, mode) + weight * reward.discount.tail(T, mode)

    floor = getattr(reward, "tail_bound", 0.0) + weight * getattr(reward.discount, "tail_bound", 0.0)
    if floor > tol:
        raise NoFiniteHorizon(f"supplied tail bound {floor:.3g} exceeds tol {tol:.3g}")
    if tail(0) <= tol:
        return 0 if mode == "dt" else 0.0

    hi = 1
    while tail(hi) > tol:
        hi *= 2
        if hi > 2 ** 62:
            raise NoFiniteHorizon("tail never falls below tol")
    lo = hi // 2  # tail(lo) > tol, or lo == 0
    if mode == "dt":
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if tail(mid) <= tol:
                hi = mid
            else:
                lo = mid
        return int(hi)
    lo, hi = float(lo), float(hi)
    while hi - lo > 1e-9 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if tail(mid) <= tol:
            hi = mid
        else:
            lo = mid
    return hi


def is_exponential(model):
    return isinstance(model.discount, Exponential) and isinstance(model.reward, SeparableReward)
