"""Equilibrium tests and independent oracles."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .anneal import auxiliary_value, value
from .discount import Exponential
from .entropy_gibbs import entropies, objectives, softmax_value
from .errors import NotExponential, ScanTooLarge, StructureMismatch
from .model import RelaxedPolicy, SeparableReward

SCAN_CAP = 1_000_000


@dataclass
class DeviationResult:
    gaps: np.ndarray
    max_gap: float
    worst: list

    def to_dict(self):
        return {"gaps": self.gaps.tolist(), "maxGap": self.max_gap, "worstDeviation": list(self.worst)}


def deviation_test(policy, y, lam, model, mode=None):
    """Best one-step gain over ``policy`` at continuation value ``y``.

    In continuous time the one-step objective is the first-order
    expansion ``f(0, i, u) + q^u_i . y``.  For ``lam > 0`` the supremum
    over densities is the soft-max value; at ``lam = 0`` it is the best node.
    ``worst`` holds the best node index (``lam = 0``) or the soft-max value.
    """
    a = objectives(y, model, mode)
    own = np.einsum("ik,ik->i", policy.masses(), a)
    if lam > 0:
        own = own + lam * entropies(policy.densities, model.grid)
        sup = softmax_value(a, lam, model.grid)
        worst = [float(s) for s in sup]
    else:
        sup = a.max(axis=1)
        worst = [int(k) for k in a.argmax(axis=1)]
    gaps = sup - own
    return DeviationResult(gaps, float(gaps.max()), worst)


# ------------------------------------------------------------- standard scans


def best_response(nodes, model, gap_tol=1e-9, eval_tol=1e-12):
    """Value and best-response node sets of the standard policy ``nodes``.

    Returns ``(y, argmax_sets)`` where ``y`` is the auxiliary value and
    ``argmax_sets[i]`` the nodes within ``gap_tol`` of the best objective.
    """
    policy = RelaxedPolicy.standard(model.grid, nodes)
    y = auxiliary_value(policy, 0.0, model, eval_tol)
    a = objectives(y, model)
    sets = [np.flatnonzero(row >= row.max() - gap_tol) for row in a]
    return y, sets


def standard_equilibrium_scan(model, mode=None, gap_tol=1e-9, cap=SCAN_CAP, eval_tol=1e-12):
    """Every grid-node standard policy whose action lies in its own argmax set.

    Returns a list of node-index tuples, one entry per state.
    """
    model.require(mode)
    K, d = model.grid.size, model.states
    if K ** d > cap:
        raise ScanTooLarge(f"{K}^{d} standard policies exceed cap {cap}")
    found = []
    for nodes in itertools.product(range(K), repeat=d):
        _, sets = best_response(nodes, model, gap_tol, eval_tol)
        if all(n in s for n, s in zip(nodes, sets)):
            found.append(tuple(int(n) for n in nodes))
    return found


def mean_action_policy(policy, grid):
    """``sum_k w_k rho[i, k] u_k`` for every state, shape ``(d, dims)``."""
    return policy.masses() @ grid.nodes


# ------------------------------------------------------------ brute force


@dataclass
class OracleResult:
    standard: list
    mixed: list
    candidates_per_state: int
    checked: int
    gap_tol: float
    mixed_gap_tol: float
    levels: int = 11
    mixed_masses: list = field(default_factory=list)

    def to_dict(self):
        return {
            "standard": [list(s) for s in self.standard],
            "mixed": [[list(c) for c in m] for m in self.mixed],
            "candidatesPerState": self.candidates_per_state,
            "checked": self.checked,
            "gapTol": self.gap_tol,
            "mixedGapTol": self.mixed_gap_tol,
            "levels": self.levels,
        }


def _candidates(K, levels):
    """Per-state masses: every Dirac, then two-node mixtures at interior levels.

    Labels are ``((k, weight), ...)`` tuples with weights summing to one.
    """
    masses, labels = [], []
    for k in range(K):
        m = np.zeros(K)
        m[k] = 1.0
        masses.append(m)
        labels.append(((k, 1.0),))
    ts = np.linspace(0.0, 1.0, levels)[1:-1]
    for j, k in itertools.combinations(range(K), 2):
        for t in ts:
            m = np.zeros(K)
            m[j], m[k] = t, 1.0 - t
            masses.append(m)
            labels.append(((j, float(t)), (k, float(1.0 - t))))
    return np.array(masses), labels


def _batched_aux_values(P, x, model, eval_tol):
    """Auxiliary values for a stack of kernels ``P (n, d, d)`` and rates ``x (n, d)``."""
    disc = model.discount
    mix = disc.exponential_mixture()
    d = model.states
    eye = np.eye(d)
    out = np.zeros_like(x)
    if model.mode == "ct":
        for c, r in zip(*mix):
            out += c * np.linalg.solve(r * eye - P, x[..., None])[..., 0]
        return out
    if mix is not None:
        for c, r in zip(*mix):
            out += c * np.exp(-r) * np.linalg.solve(eye - np.exp(-r) * P, x[..., None])[..., 0]
        return out
    from .model import truncation_horizon

    T = truncation_horizon(model.reward, 0.0, eval_tol, "dt")
    deltas = disc(1.0 + np.arange(T + 1))
    v = deltas[-1] * x
    for dk in deltas[-2::-1]:
        v = dk * x + np.einsum("nij,nj->ni", P, v)
    return v


def brute_force_oracle(model, levels=11, max_nodes=5, max_states=3, gap_tol=1e-9,
                       mixed_gap_tol=None, chunk=20000, eval_tol=1e-12):
    """Exhaustive equilibrium search over Diracs and two-node mixtures.

    A candidate passes when each state's policy mass lies on nodes within
    ``gap_tol`` (Diracs) or ``mixed_gap_tol`` (policies with a mixed state)
    of the best one-step objective at the candidate's own value.  Values
    are computed in batches, independently of :func:`value_dt`.
    """
    K, d = model.grid.size, model.states
    if K > max_nodes or d > max_states or levels > 11:
        raise ScanTooLarge(f"oracle limited to {max_nodes} nodes, {max_states} states, 11 levels")
    if not isinstance(model.reward, SeparableReward):
        raise StructureMismatch("brute-force oracle needs a separable reward")
    if model.mode == "ct" and model.discount.exponential_mixture() is None:
        raise StructureMismatch("continuous-time oracle needs an exponential-mixture discount")
    mixed_tol = gap_tol if mixed_gap_tol is None else mixed_gap_tol
    masses, labels = _candidates(K, levels)
    C = len(labels)
    g, kern = model.reward.g, model.kernel
    # per state, per candidate: mean reward and kernel row
    xr = np.einsum("ck,ik->ic", masses, g)  # (d, C)
    rows = np.einsum("ck,kij->icj", masses, kern)  # (d, C, d)
    standard, mixed, mixed_masses = [], [], []
    combos = itertools.product(range(C), repeat=d)
    checked = 0
    while True:
        block = list(itertools.islice(combos, chunk))
        if not block:
            break
        idx = np.array(block)  # (n, d)
        n = len(block)
        P = rows[np.arange(d)[None, :], idx]  # (n, d, d)
        x = xr[np.arange(d)[None, :], idx]  # (n, d)
        y = _batched_aux_values(P, x, model, eval_tol)
        a = g[None] + np.einsum("kij,nj->nik", kern, y)  # (n, d, K)
        best = a.max(axis=2, keepdims=True)
        m = masses[idx]  # (n, d, K)
        is_mixed = np.array([any(len(labels[c]) > 1 for c in row) for row in block])
        tol = np.where(is_mixed, mixed_tol, gap_tol)[:, None, None]
        ok = np.all(np.where(m > 0, a >= best - tol, True), axis=(1, 2))
        for j in np.flatnonzero(ok):
            row = block[j]
            if is_mixed[j]:
                mixed.append(tuple(labels[c] for c in row))
                mixed_masses.append(m[j])
            else:
                standard.append(tuple(labels[c][0][0] for c in row))
        checked += n
    return OracleResult(standard, mixed, C, checked, gap_tol, mixed_tol, levels, mixed_masses)


# ------------------------------------------------------------ mean action


def direct_choice_dims(model, tol=1e-12):
    """Check ``p^u_i = (u_1, ..., u_{d-1}, 1 - sum u)`` for every node and state."""
    d, grid = model.states, model.grid
    if model.mode != "dt" or grid.dims != d - 1:
        raise StructureMismatch("direct-choice models are discrete with d - 1 action dimensions")
    u = grid.nodes
    target = np.concatenate([u, 1.0 - u.sum(axis=1, keepdims=True)], axis=1)
    if np.max(np.abs(model.kernel - target[:, None, :])) > tol:
        raise StructureMismatch("transition rows do not equal the action vector")
    return grid.dims


def blended_policy(mean, grid):
    """Tensor product of per-axis two-node blends matching ``mean`` exactly."""
    d = mean.shape[0]
    masses = np.zeros((d, grid.size))
    shape = (grid.per_dim,) * grid.dims
    for i in range(d):
        per_axis = []
        for ax, x in enumerate(grid.axes):
            w1 = np.zeros(grid.per_dim)
            target = float(np.clip(mean[i, ax], x[0], x[-1]))
            j = int(np.clip(np.searchsorted(x, target) - 1, 0, grid.per_dim - 2))
            t = (target - x[j]) / (x[j + 1] - x[j])
            w1[j], w1[j + 1] = 1.0 - t, t
            per_axis.append(w1)
        masses[i] = np.einsum(",".join("abcdefgh"[: grid.dims]) + "->" + "abcdefgh"[: grid.dims],
                              *per_axis).reshape(shape).ravel()
    return RelaxedPolicy.from_masses(grid, masses)


def mean_action_value_check(policy, model, tol=1e-4):
    """Compare ``J^pi`` with the value of its mean-action policy.

    The mean action of each state is represented by a blend of adjacent
    nodes whose mean equals it exactly.  Returns a dict with ``J_pi``,
    ``J_mean``, ``mean_action``, ``match`` and ``concave``.
    """
    direct_choice_dims(model)
    if not isinstance(model.reward, SeparableReward):
        raise StructureMismatch("mean-action check needs a separable reward")
    mean = mean_action_policy(policy, model.grid)
    blend = blended_policy(mean, model.grid)
    J_pi = value(policy, 0.0, model)
    J_bar = value(blend, 0.0, model)
    err = float(np.max(np.abs(J_pi - J_bar)))
    scale = 1.0 + float(np.max(np.abs(J_pi)))
    concave = True
    if model.grid.dims == 1:
        concave = bool(np.all(np.diff(model.reward.g, 2, axis=1) <= 1e-12))
    return {"J_pi": J_pi, "J_mean": J_bar, "mean_action": mean, "error": err,
            "match": err <= tol * scale, "concave": concave}


# ------------------------------------------------------------ Bellman


@dataclass
class BellmanReport:
    J_star: np.ndarray
    J_anneal: np.ndarray
    difference: float
    match: bool
    iterations: int

    def to_dict(self):
        return {"JStar": self.J_star.tolist(), "JAnneal": self.J_anneal.tolist(),
                "difference": self.difference, "match": self.match, "iterations": self.iterations}


def optimal_value(model, tol=1e-13, max_iter=1_000_000):
    """Optimal standard value under exponential discounting, by value iteration.

    Continuous time is uniformized with ``gamma = max |q_ii|``:
    ``J = max_k [g_k + gamma (I + q_k / gamma) J] / (beta + gamma)``.
    """
    disc = model.discount
    if not isinstance(disc, Exponential) or not isinstance(model.reward, SeparableReward):
        raise NotExponential("Bellman consistency needs exponential discounting and a separable reward")
    g, kern = model.reward.g, model.kernel
    J = np.zeros(model.states)
    if model.mode == "dt":
        beta, scale, P = disc.beta, 1.0, kern
    else:
        gamma = float(np.max(-np.diagonal(kern, axis1=1, axis2=2)))
        r = disc.rate
        beta = gamma / (r + gamma)
        scale = 1.0 / (r + gamma)
        P = kern / gamma + np.eye(model.states) if gamma > 0 else np.broadcast_to(np.eye(model.states), kern.shape)
    for it in range(1, max_iter + 1):
        new = (scale * g + beta * np.einsum("kij,j->ik", P, J)).max(axis=1)
        if np.max(np.abs(new - J)) <= tol * (1 - beta):
            return new, it
        J = new
    return J, max_iter


def bellman_consistency(model, anneal_out, tol=1e-6):
    """``|J_anneal - J*|_inf <= tol (1 + |J*|_inf)``."""
    J_star, it = optimal_value(model)
    J = np.asarray(anneal_out.final_value if hasattr(anneal_out, "final_value") else anneal_out)
    diff = float(np.max(np.abs(J - J_star)))
    return BellmanReport(J_star, J, diff, diff <= tol * (1 + float(np.max(np.abs(J_star)))), it)
