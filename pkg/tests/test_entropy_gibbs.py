import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import xlogy

from tieq.catalog import example_ct
from tieq.discount import Exponential
from tieq.entropy_gibbs import (cone_constants, entropy, gibbs, gibbs_diagnostics, gibbs_from_objective,
                                gibbs_policy, model_constants, objectives, softmax_value)
from tieq.errors import NegativeDensity, NonpositiveLambda, NotNormalized
from tieq.model import ConeParams, ModelSpec, SeparableReward, build_action_grid

finite = dict(allow_nan=False, allow_infinity=False)


def grids():
    return st.builds(
        lambda dims, n, w: build_action_grid([[0.0, w]] * dims, n),
        st.integers(1, 2), st.integers(2, 12), st.floats(0.2, 5.0))


def _model_with_objective(a, length=1.0):
    """Single-state model whose objective at y = 0 equals ``a``."""
    grid = build_action_grid([[0.0, length]], len(a))
    return ModelSpec(grid, SeparableReward(Exponential(1.0), np.asarray(a)[None, :]),
                     np.ones((grid.size, 1, 1)), "transition")


# ------------------------------------------------------------ entropy


def test_entropy_uniform_unit_interval():
    g = build_action_grid([[0, 1]], 5)
    assert entropy(np.ones(5), g) == 0.0


def test_entropy_uniform_on_length_two():
    g = build_action_grid([[0, 2]], 4)
    assert entropy(np.full(4, 0.5), g) == pytest.approx(math.log(2), abs=1e-15)


def test_entropy_zero_log_zero_convention():
    g = build_action_grid([[0, 1]], 2)
    assert entropy(np.array([2.0, 0.0]), g) == pytest.approx(-math.log(2), abs=1e-15)


def test_entropy_errors():
    g = build_action_grid([[0, 1]], 2)
    with pytest.raises(NotNormalized):
        entropy(np.array([1.0, 0.5]), g)
    with pytest.raises(NegativeDensity):
        entropy(np.array([2.5, -0.5]), g)


# ------------------------------------------------------------ gibbs


def test_gibbs_zero_objective_is_uniform():
    m = example_ct(9, include_vertices=False)
    zero = ModelSpec(m.grid, SeparableReward(m.discount, np.zeros_like(m.reward.g)), np.zeros_like(m.kernel),
                     "generator")
    rho = gibbs(np.zeros(2), 0, 0.3, zero)
    np.testing.assert_allclose(rho, 1.0 / m.grid.volume, rtol=1e-15)


def test_gibbs_linear_objective_matches_exponential_density():
    n = 101
    grid = build_action_grid([[0, 1]], n)
    u = grid.nodes[:, 0]
    m = _model_with_objective(u)
    rho = gibbs(np.zeros(1), 0, 1.0, m)
    exact = np.exp(u) / (math.e - 1)
    # midpoint normalisation error is O(mesh^2)
    np.testing.assert_allclose(rho, exact, rtol=1e-4)
    assert rho[n // 2] == pytest.approx(math.exp(0.5) / (math.e - 1), abs=1e-4)
    assert rho[n // 2] == pytest.approx(0.959517, abs=1e-4)


def test_gibbs_constant_objective_is_uniform():
    m = _model_with_objective(np.full(6, 3.7), length=2.0)
    np.testing.assert_allclose(gibbs(np.zeros(1), 0, 0.01, m), 0.5, rtol=1e-15)


def test_gibbs_rejects_nonpositive_lambda():
    m = example_ct(5)
    with pytest.raises(NonpositiveLambda):
        gibbs(np.zeros(2), 0, 0.0, m)
    with pytest.raises(NonpositiveLambda):
        gibbs_policy(np.zeros(2), -1.0, m)


def test_gibbs_tiny_lambda_does_not_overflow():
    grid = build_action_grid([[0, 1]], 50)
    a = np.linspace(-1e3, 1e3, 50)
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        rho = gibbs_from_objective(a, 1e-4, grid)
    assert np.all(np.isfinite(rho))
    assert grid.weights @ rho == pytest.approx(1.0, abs=1e-15)
    assert rho[-1] == pytest.approx(1 / grid.weights[-1])


def test_objectives_use_kernel_rows():
    m = example_ct(5)
    y = np.array([0.3, -0.2])
    a = objectives(y, m)
    u = m.grid.nodes[:, 0]
    np.testing.assert_allclose(a[0], m.reward.g[0] - u * 0.5, rtol=1e-15)
    np.testing.assert_allclose(a[1], m.reward.g[1] + u * 0.5, rtol=1e-15)


# ------------------------------------------------------------ diagnostics


def test_diagnostics_uniform_attains_upper_bound():
    m = _model_with_objective(np.zeros(8), length=3.0)
    dg = gibbs_diagnostics(np.zeros(1), 0.7, m)
    assert dg.max_density == pytest.approx(1 / 3)
    assert dg.entropy_by_state[0] == pytest.approx(math.log(3))
    assert dg.ln_leb == pytest.approx(math.log(3))
    assert dg.ok


def test_diagnostics_example_at_zero():
    m = example_ct()
    dg = gibbs_diagnostics(np.zeros(2), 1.0, m)
    assert np.all(dg.entropy_by_state <= 0.0 + 1e-15)
    assert np.all(dg.entropy_by_state >= -dg.phi)
    assert dg.ok


@given(st.floats(1e-4, 1.0))
def test_lambda_uniform_bound_grows_by_kappa2_ln2(lam):
    m = example_ct(9)
    c = model_constants(m)
    y = np.array([0.4, -1.0])
    b1 = gibbs_diagnostics(y, lam, m, constants=c).lambda_uniform_bound
    b2 = gibbs_diagnostics(y, lam / 2, m, constants=c).lambda_uniform_bound
    assert b2 - b1 == pytest.approx(c.kappa2 * math.log(2), rel=1e-12)


def test_cone_constants_two_dims():
    grid = build_action_grid([[0, 1], [0, 1]], 4)
    c = cone_constants(grid, ConeParams(math.pi / 4, 0.5), 2.0)
    assert c.K1 == pytest.approx(math.pi / 2)  # planar sector of opening 2 iota
    assert c.K2 == pytest.approx(1 - 2 / math.e)
    assert c.K0 == pytest.approx(math.pi / 2 * 0.25 / 2 / math.e)


def test_cone_constants_three_dims_solid_angle():
    grid = build_action_grid([[0, 1]] * 3, 3)
    iota = 0.6
    c = cone_constants(grid, ConeParams(iota, 0.5), 1.0)
    assert c.K1 == pytest.approx(2 * math.pi * (1 - math.cos(iota)), rel=1e-6)


def test_alpha_star_solves_its_equation():
    c = model_constants(example_ct())
    M = 2.0
    a = c.alpha_star(M)
    assert a == pytest.approx((1 + c.eta(a)) * M, rel=1e-10)
    assert a + 1 > (1 + c.eta(a + 1)) * M


# ------------------------------------------------------------ properties


@given(grids(), st.data(), st.floats(0.5, 10.0), st.floats(-1.0, 1.0))
def test_shift_invariance(grid, data, lam, c):
    a = np.array(data.draw(st.lists(st.floats(-1, 1, **finite), min_size=grid.size, max_size=grid.size)))
    r1 = gibbs_from_objective(a, lam, grid)
    r2 = gibbs_from_objective(a + c, lam, grid)
    assert np.max(np.abs(r1 - r2) / r1) <= 1e-14


@given(grids(), st.data(), st.floats(0.01, 10.0))
def test_softmax_identity(grid, data, lam):
    a = np.array(data.draw(st.lists(st.floats(-5, 5, **finite), min_size=grid.size, max_size=grid.size)))
    rho = gibbs_from_objective(a, lam, grid)
    lhs = float(grid.weights @ (a * rho - lam * xlogy(rho, rho)))
    assert lhs == pytest.approx(float(softmax_value(a, lam, grid)), abs=1e-9)


@given(grids(), st.data())
def test_entropy_at_most_ln_leb(grid, data):
    raw = np.array(data.draw(st.lists(st.floats(0, 1, **finite), min_size=grid.size, max_size=grid.size)))
    raw[data.draw(st.integers(0, grid.size - 1))] += 1e-3
    rho = raw / (grid.weights @ raw)
    assert entropy(rho, grid) <= math.log(grid.volume) + 1e-12


@given(st.lists(st.floats(-1e3, 1e3, **finite), min_size=2, max_size=2), st.floats(1e-3, 1.0),
       st.sampled_from([9, 17, 33]))
def test_entropy_bound_on_example(y, lam, n):
    m = example_ct(n)
    dg = gibbs_diagnostics(np.array(y), lam, m)
    assert np.all(np.abs(dg.entropy_by_state) <= dg.phi + 1e-9)
    assert np.all(np.abs(dg.entropy_by_state) <= dg.lambda_uniform_bound + 1e-9)
    assert dg.max_density <= dg.density_bound * (1 + 1e-9)


@given(grids(), st.data())
def test_flattening_as_lambda_grows(grid, data):
    a = np.array(data.draw(st.lists(st.floats(-3, 3, **finite), min_size=grid.size, max_size=grid.size)))
    uniform = 1.0 / grid.volume
    dist = [np.max(np.abs(gibbs_from_objective(a, lam, grid) - uniform)) for lam in (1, 10, 100, 1000)]
    slack = 1e-13 * uniform
    assert all(d2 <= d1 + slack for d1, d2 in zip(dist, dist[1:]))
    assert dist[-1] <= 10 * np.ptp(a) / 1000 * uniform + slack
