import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adastrat.errors import ConfigurationError, DegenerateProblemError, InfeasibleBudgetError
from adastrat.metrics import (
    QuadratureSpec,
    holder_quality_bound,
    integral_of,
    lower_bound_shape,
    mcucb_regret_bound,
    optimal_allocation,
    oracle_risk,
    partition_truth,
    pseudo_regret,
    pseudo_risk,
    quality,
    sigma_of_partition,
    true_stratum_stats,
)
from adastrat.model import builtin_env
from adastrat.partition import make_hypercubic

# closed forms: sigma on [0, 1] for sine is sqrt(1/(8 pi^2) + 1/4), for step sqrt(5/16)
SINE_SIGMA = 0.51250868085847309
STEP_SIGMA = 0.55901699437494742


def test_linear_stratum_sigma_closed_form():
    env = builtin_env("linear")
    q = QuadratureSpec(points_per_axis=4096)
    _, sig = partition_truth(env, make_hypercubic(1, 4), q)
    assert np.allclose(sig, 0.25 / math.sqrt(12), rtol=1e-7)


def test_ramp_stratum_sigma_closed_form():
    env = builtin_env("heteroscedastic-ramp")
    q = QuadratureSpec(points_per_axis=4096)
    p = make_hypercubic(1, 8)
    _, sig = partition_truth(env, p, q)
    a, h = p.lowers[:, 0], 1 / 8
    assert np.allclose(sig, np.sqrt(a * a + a * h + 5 * h * h / 12), rtol=1e-7)


@pytest.mark.parametrize("name,sigma", [("sine", SINE_SIGMA), ("step", STEP_SIGMA)])
def test_whole_cube_sigma(name, sigma):
    s = make_hypercubic(1, 1).strata[0]
    t = true_stratum_stats(builtin_env(name), s, QuadratureSpec(points_per_axis=4096))
    assert t.sigma == pytest.approx(sigma, rel=1e-6)


def test_integral_of():
    mu, ints = integral_of(builtin_env("heteroscedastic-ramp", 2))
    assert mu == pytest.approx(0.5) and ints == pytest.approx(0.5)


def test_midpoint_refused_above_three_dims():
    with pytest.raises(ConfigurationError):
        QuadratureSpec().unit_nodes(4)
    nodes = QuadratureSpec(rule="mc", mc_samples=1000).unit_nodes(4)
    assert nodes.shape == (1000, 4)


def test_optimal_allocation_example():
    assert np.allclose(optimal_allocation([0.5, 0.5], [3, 1], 100), [75, 25])


def test_optimal_allocation_degenerate():
    with pytest.warns(UserWarning):
        a = optimal_allocation([0.5, 0.5], [0, 0], 10)
    assert np.allclose(a, [5, 5])
    with pytest.raises(DegenerateProblemError):
        optimal_allocation([0.5, 0.5], [0, 0], 10, strict=True)


def test_pseudo_risk_edge_cases():
    assert pseudo_risk([0.5, 0.5], [1, 0], [4, 0]) == pytest.approx(0.0625)
    assert pseudo_risk([0.5, 0.5], [1, 1], [4, 0]) == math.inf
    batch = pseudo_risk([0.5, 0.5], [1, 1], [[2, 2], [1, 3]])
    assert batch.shape == (2,)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(0.01, 10.0), min_size=1, max_size=6),
    st.lists(st.floats(0.0, 5.0), min_size=6, max_size=6),
    st.integers(1, 1000),
)
def test_oracle_allocation_attains_minimum(ws, sig, n):
    w = np.array(ws) / sum(ws)
    s = np.array(sig[: len(w)])
    if np.dot(w, s) == 0:
        return
    T = optimal_allocation(w, s, n)
    assert math.isclose(T.sum(), n, rel_tol=1e-12)
    assert math.isclose(pseudo_risk(w, s, T), oracle_risk(w, s, n), rel_tol=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.01, 3.0), min_size=2, max_size=5), st.data())
def test_regret_nonnegative_for_any_allocation(sig, data):
    K = len(sig)
    w = np.full(K, 1 / K)
    T = np.array(data.draw(st.lists(st.floats(0.1, 100.0), min_size=K, max_size=K)))
    assert pseudo_regret(w, sig, T) >= -1e-12 * pseudo_risk(w, sig, T)


def test_quality_zero_when_noise_constant():
    env = builtin_env("constant-noise(2)")
    assert quality(env, make_hypercubic(1, 3), 100) == pytest.approx(0, abs=1e-15)


def test_sigma_decreases_with_refinement():
    env = builtin_env("heteroscedastic-ramp")
    vals = [sigma_of_partition(env, make_hypercubic(1, K)) for K in (1, 2, 4, 8)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 0.5


def test_holder_bound():
    hb = holder_quality_bound(1.0, 1.0, 2, 16, 0.5, 100)
    assert hb.sigma_gap == pytest.approx(2 * 0.25)
    assert hb.quality == pytest.approx(2 * 0.5 * 0.5 / 100)
    with pytest.raises(ConfigurationError):
        holder_quality_bound(1.0, 1.0, 2, 8, 0.5, 100)


def test_regret_bound_guards_and_shape():
    with pytest.raises(InfeasibleBudgetError):
        mcucb_regret_bound(1.0, 1.0, 1.0, 10, 39)
    a = mcucb_regret_bound(1.0, 1.0, 1.0, 4, 1000)
    b = mcucb_regret_bound(1.0, 1.0, 1.0, 4, 2000)
    assert b < a
    assert lower_bound_shape(8, 1000) == pytest.approx(2 * 1000 ** (-4 / 3))
