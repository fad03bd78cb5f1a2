import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scenario_coverage import (
    ContractViolation,
    DomainError,
    FitError,
    InsufficientDataError,
    InsufficientSignalError,
    ParameterSpace,
    SampleCloud,
    UnreachableTargetError,
    WeibullCoverageModel,
    bootstrap_fit,
    coverage_coefficient,
    fit_weibull,
    kernels_for,
    required_count,
    required_count_for_volume,
    residual_sum_of_squares,
    union_volume,
)

from oracles import smallest_count_reaching, weibull

COUNTS = np.arange(1, 5001)


def truth_curve(a=10.0, b=0.01, c=1.2, v_pre=0.0):
    return v_pre + a * (1 - np.exp(-b * COUNTS.astype(float) ** c))


def test_model_value_at_zero_is_v_pre():
    m = WeibullCoverageModel(8.0, 0.1, 0.7, 2.0)
    assert m(0) == 2.0
    assert m.asymptote == 10.0
    assert m(1e9) == pytest.approx(10.0)


@pytest.mark.parametrize("field", ["a", "b", "c"])
def test_model_rejects_non_positive_parameters(field):
    params = {"a": 1.0, "b": 1.0, "c": 1.0}
    params[field] = 0.0
    with pytest.raises(ContractViolation):
        WeibullCoverageModel(**params)


def test_line_limit_caps_early_growth():
    m = WeibullCoverageModel(10.0, 0.5, 1.0, 1.0)
    capped = m.line_limited(np.array([0.0, 1.0, 100.0]), 0.2)
    assert capped.tolist() == pytest.approx([1.0, 1.2, m(100.0)])


def test_noiseless_recovery():
    m = fit_weibull(COUNTS, truth_curve())
    assert (m.a, m.b, m.c) == pytest.approx((10.0, 0.01, 1.2), rel=0.01)
    assert residual_sum_of_squares(m, COUNTS, truth_curve()) < 1e-12


def test_offset_invariance():
    base = fit_weibull(COUNTS, truth_curve())
    shifted = fit_weibull(COUNTS, truth_curve(v_pre=2.0), v_pre=2.0)
    assert shifted.v_pre == 2.0
    assert (shifted.a, shifted.b, shifted.c) == pytest.approx((base.a, base.b, base.c), rel=1e-6)


def test_noisy_curve_needs_non_strict_mode():
    rng = np.random.Generator(np.random.Philox(4))
    noisy = truth_curve() * (1 + 0.01 * rng.standard_normal(COUNTS.size))
    with pytest.raises(ContractViolation):
        fit_weibull(COUNTS, noisy)
    m = fit_weibull(COUNTS, noisy, strict=False)
    assert (m.a, m.b, m.c) == pytest.approx((10.0, 0.01, 1.2), rel=0.05)


def test_fit_preconditions():
    with pytest.raises(InsufficientDataError):
        fit_weibull(np.arange(1, 8), np.linspace(1, 2, 7))
    with pytest.raises(ContractViolation):
        fit_weibull([1, 2, 2, 3, 4, 5, 6, 7], np.linspace(1, 2, 8))
    with pytest.raises(ContractViolation):
        fit_weibull(np.arange(1, 9), [1, 2, 3, 2.5, 4, 5, 6, 7])
    with pytest.raises(ContractViolation):
        fit_weibull(np.arange(1, 9), np.linspace(1, 2, 8), v_pre=1.5)


def test_constant_curve_has_no_signal():
    with pytest.raises(InsufficientSignalError):
        fit_weibull(np.arange(1, 20), np.full(19, 3.0), v_pre=3.0)


@given(a=st.floats(0.5, 1e3), b=st.floats(1e-4, 0.1), c=st.floats(0.5, 2.0),
       v_pre=st.floats(0, 50), target=st.floats(0.05, 0.99))
def test_required_count_round_trip(a, b, c, v_pre, target):
    m = WeibullCoverageModel(a, b, c, v_pre)
    goal = target * m.asymptote
    n = required_count(m, target)
    if goal <= v_pre:
        assert n == 0
        return
    assert m(n) >= goal
    assert n == 0 or m(n - 1) < goal
    assert n == smallest_count_reaching(weibull(a, b, c, v_pre), goal)


def test_required_count_closed_form_example():
    m = WeibullCoverageModel(10.0, 0.001, 1.0)
    assert required_count(m, 0.8) == math.ceil(-math.log(0.2) / 0.001) == 1610


def test_required_count_edges():
    m = WeibullCoverageModel(8.0, 0.01, 1.0, 2.0)
    assert required_count(m, 0.2) == 0
    assert required_count(m, 0.1) == 0
    with pytest.raises(UnreachableTargetError):
        required_count(m, 1.0)
    # the line bound can only raise the count
    plain = required_count_for_volume(m, 6.0)
    assert required_count_for_volume(m, 6.0, kernel_volume=1e-3) == max(plain, 4000)


def test_coverage_coefficient():
    m = WeibullCoverageModel(8.0, 0.1, 1.0, 2.0)
    assert coverage_coefficient(m, 10.0) == 1.0
    assert coverage_coefficient(m, 2.0) == pytest.approx(0.2)
    assert coverage_coefficient(WeibullCoverageModel(10.0, 1.0, 1.0), 8.152) == pytest.approx(0.8152)
    assert coverage_coefficient(m, 10.0 + 1e-12) == 1.0
    with pytest.raises(DomainError):
        coverage_coefficient(m, 1.0)
    with pytest.raises(DomainError):
        coverage_coefficient(m, 10.1)


@given(v=st.floats(2.0, 10.0))
def test_coverage_coefficient_is_linear(v):
    m = WeibullCoverageModel(8.0, 0.1, 1.0, 2.0)
    assert coverage_coefficient(m, v) == pytest.approx(v / 10.0)


@pytest.fixture(scope="module")
def cloud():
    return SampleCloud(ParameterSpace([0.0, 0.0], [10.0, 10.0]), 1 << 16, seed=2)


@pytest.fixture(scope="module")
def uniform_points():
    return np.random.Generator(np.random.Philox(77)).random((600, 2)) * 10


def test_bootstrap_is_deterministic_and_worker_independent(cloud, uniform_points):
    d1 = bootstrap_fit(uniform_points, 0.5, cloud, 6, seed=3)
    d2 = bootstrap_fit(uniform_points, 0.5, cloud, 6, seed=3, workers=3)
    assert d1 == d2
    assert np.array_equal(d1.replicate_params, d2.replicate_params)
    assert np.array_equal(d1.mean_volumes, d2.mean_volumes)
    d3 = bootstrap_fit(uniform_points, 0.5, cloud, 6, seed=4)
    assert d3.param_mean != d1.param_mean


def test_bootstrap_diagnostics_shape(cloud, uniform_points):
    d = bootstrap_fit(uniform_points, 0.5, cloud, 4, seed=1, cv_threshold=0.5)
    assert d.replicates == 4 and d.failures == 0
    assert all(v >= 0 for v in d.param_cv)
    assert d.converged == (d.param_cv[0] <= 0.5)
    assert d.counts[-1] == 600
    # every ordering ends at the same union
    assert d.mean_volumes[-1] == union_volume(kernels_for(uniform_points, 0.5), cloud).volume
    assert d.model.v_pre == 0.0
    assert set(d.to_dict()) >= {"param_cv", "converged", "rss", "failures"}


def test_bootstrap_uses_precovered_volume(cloud, uniform_points):
    pre = cloud.copy()
    pre.cover([[5.0, 5.0]], 2.0)
    d = bootstrap_fit(uniform_points[:200], 0.5, pre, 3, seed=0)
    assert d.model.v_pre == pre.covered_volume


def test_identical_points_fail_the_bootstrap(cloud):
    with pytest.raises(FitError):
        bootstrap_fit(np.tile([[5.0, 5.0]], (50, 1)), 0.5, cloud, 4)


def test_bootstrap_preconditions(cloud, uniform_points):
    with pytest.raises(ContractViolation):
        bootstrap_fit(uniform_points, 0.5, cloud, 1)
    with pytest.raises(ContractViolation):
        bootstrap_fit(np.empty((0, 2)), 0.5, cloud, 4)
