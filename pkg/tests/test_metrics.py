import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from fedlab.errors import ConfigError, DimensionError, UndefinedMetric
from fedlab.metrics import MetricConfig, genotype_of, sparsity, stability, weight_health, weight_moments


def hoyer_reference(w):
    # written out longhand, independent of the l1/l2 helpers
    n = len(w)
    l1 = sum(abs(x) for x in w)
    l2 = math.sqrt(sum(x * x for x in w))
    return (math.sqrt(n) - l1 / l2) / (math.sqrt(n) - 1)


def test_sparsity_one_hot():
    assert sparsity([0, 0, 5, 0]) == 1.0


@pytest.mark.parametrize("c", [1.0, -2.5, 1e-3, 7e4])
@pytest.mark.parametrize("n", [2, 3, 10, 101])
def test_sparsity_all_equal(c, n):
    assert sparsity([c] * n) == pytest.approx(0.0, abs=1e-12)


def test_sparsity_3_4():
    expected = (math.sqrt(2) - 7 / 5) / (math.sqrt(2) - 1)
    assert expected == pytest.approx(0.034315, abs=1e-6)
    assert sparsity([3, 4]) == pytest.approx(expected, abs=1e-15)


def test_sparsity_errors():
    with pytest.raises(UndefinedMetric):
        sparsity([0.0, 0.0, 0.0])
    with pytest.raises(DimensionError):
        sparsity([4.0])
    with pytest.raises(DimensionError):
        sparsity([])


def test_weight_moments():
    assert weight_moments([0.1, -0.1]) == pytest.approx((0.0, 0.1))
    assert weight_moments([2.5]) == (2.5, 0.0)
    mu, sd = weight_moments([1, 2, 3, 4])
    assert mu == 2.5
    assert sd == pytest.approx(math.sqrt(((1.5**2) * 2 + (0.5**2) * 2) / 4), abs=1e-15)
    assert sd == pytest.approx(1.118034, abs=1e-6)
    with pytest.raises(DimensionError):
        weight_moments([])


@pytest.mark.parametrize(
    "w, expected",
    [([0.1, -0.1], 0.0), ([0.2, 0.2], -3.0), ([0, 0, 0, 0], -1.0)],
)
def test_weight_health(w, expected):
    assert weight_health(w, MetricConfig(sigma_target=0.1)) == pytest.approx(expected, abs=1e-12)


def test_stability_examples():
    assert stability([2, 3], [2, 3]) == 1.0
    assert stability([0, 1], [1, 0]) == pytest.approx(1 - math.sqrt(2), abs=1e-15)
    assert stability([0, 1], [1, 0]) == pytest.approx(-0.414214, abs=1e-6)
    assert stability([1, 0], [2, 0]) == 0.5


def test_stability_errors():
    with pytest.raises(UndefinedMetric):
        stability([1, 2], [0, 0])
    with pytest.raises(DimensionError):
        stability([1, 2, 3], [1, 2])


def test_genotype_of_examples():
    cfg = MetricConfig(sigma_target=0.1)
    g = genotype_of([0.1, -0.1], [0.1, -0.1], cfg)
    assert g.triple == pytest.approx((0.0, 1.0, 0.0), abs=1e-12)

    g = genotype_of([0, 0, 5, 0], [0, 0, 5, 0], cfg)
    assert (g.sparsity, g.stability) == (1.0, 1.0)

    g = genotype_of([3, 4], [2, 0], MetricConfig(sigma_target=1.0))
    assert g.sparsity == pytest.approx(0.034315, abs=1e-6)
    assert g.stability == pytest.approx(1 - math.sqrt(17) / 2, abs=1e-12)
    assert g.stability == pytest.approx(-1.061553, abs=1e-6)
    assert g.health == pytest.approx(-4.0, abs=1e-12)
    assert not g.stability_assumed


def test_genotype_without_history_is_flagged():
    g = genotype_of([0.3, -0.1, 0.2], None, MetricConfig(), {"epochs_trained": 5, "loss": 0.4})
    assert g.stability == 1.0 and g.stability_assumed
    assert g.epochs_trained == 5 and g.loss == 0.4


def test_metric_config_validation():
    with pytest.raises(ConfigError):
        MetricConfig(sigma_target=0.0)
    with pytest.raises(ConfigError):
        MetricConfig(zero_tolerance=-1.0)


vectors = arrays(np.float64, st.integers(2, 40), elements=st.floats(-100, 100, allow_nan=False))


@given(vectors, st.sampled_from([-3.0, 0.5, 10.0, -0.01, 123.0]))
def test_sparsity_scale_invariant(w, c):
    assume(np.linalg.norm(w) > 1e-6)
    assert abs(sparsity(c * w) - sparsity(w)) < 1e-9


@given(vectors)
def test_sparsity_matches_longhand_and_bounds(w):
    assume(np.linalg.norm(w) > 1e-6)
    s = sparsity(w)
    assert 0.0 <= s <= 1.0
    assert s == pytest.approx(min(1.0, max(0.0, hoyer_reference(list(w)))), abs=1e-9)


@given(st.integers(2, 50), st.integers(0, 49), st.floats(0.1, 100))
def test_sparsity_extremes(n, k, value):
    e = np.zeros(n)
    e[k % n] = value
    assert sparsity(e) == 1.0
    assert sparsity(np.full(n, value)) == pytest.approx(0.0, abs=1e-12)


@given(vectors, st.floats(1e-3, 10))
def test_health_nonpositive(w, target):
    h = weight_health(w, MetricConfig(sigma_target=target))
    assert h <= 0.0 and math.isfinite(h)


def test_health_zero_iff_target_moments():
    w = np.array([0.1, -0.1, 0.1, -0.1])
    assert weight_health(w, MetricConfig(0.1)) == pytest.approx(0.0, abs=1e-15)
    assert weight_health(w + 0.01, MetricConfig(0.1)) < 0
    assert weight_health(w * 1.1, MetricConfig(0.1)) < 0


@given(vectors)
def test_stability_identities(w):
    assume(np.linalg.norm(w) > 1e-6)
    assert stability(w, w) == 1.0
    assert stability(2 * w, w) == pytest.approx(0.0, abs=1e-12)
