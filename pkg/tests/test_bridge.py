import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tieq.bridge import convergence_study, discretize, max_step, policy_distance
from tieq.catalog import constant_model, example_ct, random_ct, random_exponential_dt
from tieq.discount import ExponentialMixture
from tieq.entropy_gibbs import gibbs
from tieq.errors import ModeMismatch, StepTooLarge
from tieq.model import ModelSpec, RelaxedPolicy, SeparableReward, build_action_grid, validate_model


def two_state_ct(row):
    grid = build_action_grid([[0, 1]], 2)
    q = np.array([[row, [0.0, 0.0]]] * 2, dtype=float)
    return ModelSpec(grid, SeparableReward(ExponentialMixture((1.0,), (1.0,)), np.zeros((2, 2))), q, "generator")


@pytest.fixture(scope="module")
def example_study():
    return convergence_study(example_ct(), 0.1, [0.2, 0.1, 0.05, 0.025])


# ------------------------------------------------------------ discretize


def test_discretize_row_formula():
    p = discretize(two_state_ct([-1.0, 1.0]), 0.1).kernel
    np.testing.assert_allclose(p[0, 0], [0.9, 0.1], rtol=1e-15)
    np.testing.assert_allclose(p[0, 1], [0.0, 1.0], rtol=1e-15)


@pytest.mark.parametrize("h", [0.01, 1.0, 1e6])
def test_zero_generator_gives_identity(h):
    p = discretize(two_state_ct([0.0, 0.0]), h).kernel
    np.testing.assert_array_equal(p, np.broadcast_to(np.eye(2), p.shape))


def test_example_corner_node():
    m = example_ct()
    p = discretize(m, 0.5).kernel
    k = m.grid.nearest([1.0])
    np.testing.assert_allclose(p[k, 0], [0.5, 0.5], rtol=1e-15)


def test_reward_and_discount_are_sampled():
    m = example_ct(9)
    dm = discretize(m, 0.25)
    np.testing.assert_allclose(dm.reward.g, 0.25 * m.reward.g, rtol=1e-15)
    ks = np.arange(10, dtype=float)
    np.testing.assert_allclose(dm.discount(ks), m.discount(0.25 * ks), rtol=1e-14)
    assert dm.mode == "dt"


def test_step_too_large_names_entry():
    m = example_ct(9)
    assert max_step(m) == pytest.approx(1.0)
    with pytest.raises(StepTooLarge) as err:
        convergence_study(m, 0.1, [0.5, 0.25, 2.0])
    assert err.value.index == 2 and err.value.h == 2.0


def test_discretize_rejects_discrete_model():
    with pytest.raises(ModeMismatch):
        discretize(random_exponential_dt(0), 0.1)


@given(st.integers(0, 10 ** 6), st.floats(0.01, 1.0))
def test_discretized_model_validates(seed, frac):
    m = random_ct(seed)
    dm = discretize(m, frac * max_step(m))
    assert validate_model(dm).passed


@given(st.integers(0, 10 ** 6), st.floats(0.1, 1.0), st.floats(0.1, 2.0),
       st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_gibbs_scaling_identity(seed, frac, lam, y):
    m = random_ct(seed)
    h = frac * max_step(m)
    dm = discretize(m, h)
    y = np.array(y)
    for i in range(m.states):
        np.testing.assert_allclose(gibbs(y, i, h * lam, dm), gibbs(y, i, lam, m), rtol=1e-12, atol=0)


@given(st.integers(0, 10 ** 6), st.floats(1e-3, 1.0), st.floats(1e-3, 2.0),
       st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_gibbs_scaling_identity_small_steps(seed, frac, lam, y):
    m = random_ct(seed)
    h = frac * max_step(m)
    dm = discretize(m, h)
    y = np.array(y)
    # adding y_i to an O(h) objective rounds at eps |y|, amplified by 1 / (h lam)
    rel = 64 * np.finfo(float).eps * (1 + np.max(np.abs(y))) / (h * lam)
    for i in range(m.states):
        np.testing.assert_allclose(gibbs(y, i, h * lam, dm), gibbs(y, i, lam, m), rtol=max(rel, 1e-12), atol=0)


# ------------------------------------------------------------ convergence_study


def test_example_discrepancy_decreases_at_first_order(example_study):
    d = [r.discrepancy for r in example_study.rows]
    assert all(b < a for a, b in zip(d, d[1:]))
    assert all(1.3 <= r <= 3.0 for r in example_study.ratios)
    assert all(r.converged for r in example_study.rows)


def test_example_policy_distance_shrinks(example_study):
    dist = [r.policy_distance for r in example_study.rows]
    assert all(b < a for a, b in zip(dist, dist[1:]))


@pytest.mark.parametrize("h", [0.4, 0.1, 0.025])
def test_constant_model_discrepancy_is_riemann_bias(h):
    base = constant_model("ct", states=2, value=1.5)
    m = ModelSpec(base.grid, base.reward, np.zeros_like(base.kernel), "generator")
    study = convergence_study(m, 0.2, [h])
    # action-free rewards: the h-model value is the right Riemann sum of the time integral
    x = np.max(np.abs(m.reward.g))
    assert study.rows[0].discrepancy <= h * x + 1e-9
    assert study.rows[0].policy_distance <= 1e-12


def test_policy_distance_of_identical_policies_is_zero():
    grid = build_action_grid([[0, 1]], 4)
    pol = RelaxedPolicy.uniform(grid, 2)
    assert policy_distance(pol, pol) == 0.0


def test_study_requires_positive_lambda():
    with pytest.raises(ValueError):
        convergence_study(example_ct(9), 0.0, [0.1])


def test_threaded_study_matches_sequential():
    m = example_ct(9)
    a = convergence_study(m, 0.2, [0.2, 0.1], workers=1)
    b = convergence_study(m, 0.2, [0.2, 0.1], workers=2)
    assert a.to_dict() == b.to_dict()
