"""Ready-made models used by the tests, the acceptance suite and the CLI."""

from __future__ import annotations

import numpy as np

from .discount import Exponential, ExponentialMixture
from .model import ModelSpec, SeparableReward, build_action_grid


def example_ct(per_dim=33, include_vertices=True):
    """Two-state continuous-time model without a standard equilibrium.

    ``U = [0, 1]``, rates ``q_1 = (-u, u)``, ``q_2 = (u, -u)``, discount
    ``(e^{-t} + e^{-2t}) / 2`` and rewards ``g_1(u) = -7/8 sqrt(u)``,
    ``g_2(u) = 19/9 - sqrt(1 - u)``.
    """
    grid = build_action_grid([[0.0, 1.0]], per_dim, include_vertices=include_vertices)
    u = grid.nodes[:, 0]
    g = np.stack([-7.0 / 8.0 * np.sqrt(u), 19.0 / 9.0 - np.sqrt(np.clip(1.0 - u, 0.0, None))])
    q = np.zeros((grid.size, 2, 2))
    q[:, 0, 0], q[:, 0, 1] = -u, u
    q[:, 1, 0], q[:, 1, 1] = u, -u
    disc = ExponentialMixture((0.5, 0.5), (1.0, 2.0))
    return ModelSpec(grid, SeparableReward(disc, g), q, "generator", name="example_ct")


def entropy_only(length=2.0, beta=0.5, per_dim=4):
    """Single-state discrete model with zero reward on ``U = [0, length]``."""
    grid = build_action_grid([[0.0, length]], per_dim)
    reward = SeparableReward(Exponential.from_beta(beta), np.zeros((1, grid.size)))
    return ModelSpec(grid, reward, np.ones((grid.size, 1, 1)), "transition", name="entropy_only")


def random_exponential_dt(seed, states=3, per_dim=5, beta=0.7, dims=1):
    """Random discrete model with exponential discount ``beta``.

    Rewards are uniform on ``[-1, 1]``; each transition row is Dirichlet(1).
    """
    rng = np.random.default_rng(seed)
    grid = build_action_grid([[0.0, 1.0]] * dims, per_dim)
    g = rng.uniform(-1.0, 1.0, size=(states, grid.size))
    p = rng.dirichlet(np.ones(states), size=(grid.size, states))
    reward = SeparableReward(Exponential.from_beta(beta), g)
    return ModelSpec(grid, reward, p, "transition", name=f"random_exponential_dt[{seed}]")


def random_ct(seed, states=3, per_dim=5, discount=None, max_rate=2.0):
    """Random continuous model; rates uniform on ``[0, max_rate]``."""
    rng = np.random.default_rng(seed)
    grid = build_action_grid([[0.0, 1.0]], per_dim)
    g = rng.uniform(-1.0, 1.0, size=(states, grid.size))
    q = rng.uniform(0.0, max_rate, size=(grid.size, states, states))
    idx = np.arange(states)
    q[:, idx, idx] = 0.0
    q[:, idx, idx] = -q.sum(axis=2)
    disc = discount if discount is not None else ExponentialMixture((0.5, 0.5), (1.0, 2.0))
    return ModelSpec(grid, SeparableReward(disc, g), q, "generator", name=f"random_ct[{seed}]")


def direct_choice_dt(g, discount, per_dim=9):
    """Two-state direct-choice model: action ``u`` is the probability of moving to state 0.

    ``g`` maps ``(state, u_array)`` to rewards; ``p^u_i = (u, 1 - u)``.
    """
    grid = build_action_grid([[0.0, 1.0]], per_dim, include_vertices=True)
    u = grid.nodes[:, 0]
    table = np.stack([np.asarray(g(i, u), dtype=float) for i in range(2)])
    p = np.zeros((grid.size, 2, 2))
    p[:, :, 0] = u[:, None]
    p[:, :, 1] = 1.0 - u[:, None]
    return ModelSpec(grid, SeparableReward(discount, table), p, "transition", name="direct_choice_dt")


def constant_model(mode, states=2, per_dim=4, value=1.0, discount=None):
    """Reward and kernel independent of the action."""
    grid = build_action_grid([[0.0, 1.0]], per_dim)
    g = np.tile(np.linspace(-value, value, states)[:, None], (1, grid.size))
    disc = discount if discount is not None else Exponential(0.5)
    if mode == "dt":
        base = np.full((states, states), 1.0 / states)
        kind = "transition"
    else:
        base = np.ones((states, states)) - states * np.eye(states)
        kind = "generator"
    kernel = np.broadcast_to(base, (grid.size, states, states)).copy()
    return ModelSpec(grid, SeparableReward(disc, g), kernel, kind, name=f"constant_{mode}")


BUILTIN = {"example": example_ct, "entropy_only": entropy_only}
