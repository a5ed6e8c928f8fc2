import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adastrat.errors import CapacityError, ConfigurationError, DimensionMismatchError
from adastrat.partition import (
    MAX_STRATA,
    Partition,
    Stratum,
    diameter,
    make_hypercubic,
    partition_for_k,
    refine,
    sample_uniform,
    stratum_of,
)
from adastrat.rng import stream


def test_hypercubic_layout():
    p = make_hypercubic(2, 3)
    assert p.K == 9 and p.kind == "hypercubic" and p.side_count == 3
    assert np.allclose(p.weights, 1 / 9)
    # row-major: first axis slowest
    assert p.strata[1].lower == pytest.approx((0.0, 1 / 3))
    assert p.strata[3].lower == pytest.approx((1 / 3, 0.0))
    assert p.strata[-1].upper == (1.0, 1.0)


def test_partition_for_k():
    assert partition_for_k(3, 27).side_count == 3
    assert partition_for_k(1, 7).K == 7
    with pytest.raises(ConfigurationError):
        partition_for_k(2, 8)


def test_capacity_limit():
    with pytest.raises(CapacityError):
        make_hypercubic(3, int(round(MAX_STRATA ** (1 / 3))) + 1)


def test_weights_must_sum_to_one():
    a = Stratum.box([0.0], [0.5])
    with pytest.raises(ConfigurationError):
        Partition(1, (a,))


def test_stratum_weight_equals_volume():
    with pytest.raises(ConfigurationError):
        Stratum((0.0,), (0.5,), 0.4)
    with pytest.raises(ConfigurationError):
        Stratum.box([0.5], [0.5])


def test_diameter():
    assert diameter(make_hypercubic(2, 2).strata[0]) == pytest.approx(math.sqrt(0.5))


def test_refine_order_and_weights():
    p = refine(make_hypercubic(1, 2), 0, 0)
    assert [s.lower[0] for s in p.strata] == [0.0, 0.25, 0.5]
    assert p.weights.sum() == pytest.approx(1)
    assert p.kind == "general"
    with pytest.raises(ConfigurationError):
        refine(p, 5, 0)
    with pytest.raises(ConfigurationError):
        refine(p, 0, 1)


def test_stratum_of_boundaries():
    p = make_hypercubic(1, 4)
    assert stratum_of(p, [0.25]) == 1
    assert stratum_of(p, [1.0]) == 3
    assert stratum_of(p, [0.0]) == 0
    with pytest.raises(DimensionMismatchError):
        stratum_of(p, [1.2])
    with pytest.raises(DimensionMismatchError):
        stratum_of(p, [0.1, 0.2])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_samples_land_in_their_stratum(dim, side, seed):
    p = make_hypercubic(dim, side)
    g = stream(seed, 0)
    for k in range(p.K):
        x = sample_uniform(p.strata[k], g, size=5)
        for row in x:
            assert stratum_of(p, row) == k


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10**6), st.integers(0, 1)), min_size=1, max_size=25))
def test_refinement_keeps_a_partition(steps):
    p = make_hypercubic(2, 1)
    for idx, axis in steps:
        p = refine(p, idx % p.K, axis)
    assert math.isclose(p.weights.sum(), 1.0, rel_tol=1e-12)
    # every sampled point is owned by exactly one stratum
    x = stream(1, 1).random((50, 2))
    lo, hi = p.lowers, p.uppers
    for row in x:
        inside = np.all((lo <= row) & (row < hi), axis=1)
        assert inside.sum() == 1


def test_sample_single_point():
    s = make_hypercubic(2, 2).strata[3]
    x = sample_uniform(s, stream(0, 0))
    assert x.shape == (2,) and np.all(x >= 0.5)
