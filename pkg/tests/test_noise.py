"""Noise models: moments, sampling, intensity estimation, scaled-sum law."""

import numpy as np
import pytest

from arbbands import (
    ConfigError,
    NoisePath,
    OrnsteinUhlenbeck,
    ParameterError,
    Telegraph,
    ZeroNoise,
    analytic_intensity,
    clt_variance_check,
    empirical_intensity,
    sample_path,
)

from conftest import NOISE_SCALE


def test_ou_moment_formulas(ou_model):
    # D = k^2 / (2 alpha^2), stationary variance k^2 / (2 alpha).
    assert ou_model.intensity == pytest.approx(0.1, rel=1e-14)
    assert ou_model.stationary_var == pytest.approx(0.1, rel=1e-14)
    assert ou_model.correlation_time == pytest.approx(1.0, rel=1e-14)
    assert analytic_intensity(ou_model) == ou_model.intensity


def test_telegraph_moment_formulas(telegraph_model):
    # D = a^2 / (2 lambda), stationary variance a^2.
    assert telegraph_model.intensity == pytest.approx(0.1, rel=1e-14)
    assert telegraph_model.stationary_var == pytest.approx(0.2, rel=1e-14)
    assert telegraph_model.correlation_time == pytest.approx(0.5, rel=1e-14)


def test_zero_noise_degenerate():
    zn = ZeroNoise()
    assert zn.intensity == 0.0
    path = sample_path(zn, 0.01, 500, seed=3)
    assert not path.values.any()


def test_autocovariance_shapes(ou_model, telegraph_model):
    lags = np.array([0.0, 0.3, 1.0, 4.0])
    ou_c = ou_model.autocovariance(lags)
    assert ou_c[0] == pytest.approx(ou_model.stationary_var, rel=1e-14)
    assert ou_c == pytest.approx(0.1 * np.exp(-lags), rel=1e-12)
    tel_c = telegraph_model.autocovariance(lags)
    assert tel_c == pytest.approx(0.2 * np.exp(-2.0 * lags), rel=1e-12)


def test_sample_path_shape_and_determinism(ou_model):
    a = sample_path(ou_model, 0.02, 400, seed=9)
    b = sample_path(ou_model, 0.02, 400, seed=9)
    c = sample_path(ou_model, 0.02, 400, seed=10)
    assert a.values.shape == (400,)
    assert a.dt == 0.02
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_ou_sample_statistics(ou_model):
    # 1e6 steps of 0.01 give span 1e4; the mean of the path estimates 0 with
    # standard error sqrt(2 D / span), the sample variance carries roughly
    # sqrt(2 / (span / (2 t_corr))) ~ 2% relative noise.
    path = sample_path(ou_model, 0.01, 1_000_000, seed=7)
    span = 0.01 * 1_000_000
    se_mean = np.sqrt(2.0 * 0.1 / span)
    assert abs(path.values.mean()) < 4.0 * se_mean
    assert path.values.var(ddof=1) == pytest.approx(0.1, rel=0.02)


def test_telegraph_sample_statistics(telegraph_model):
    path = sample_path(telegraph_model, 0.01, 1_000_000, seed=7)
    assert np.all(np.isin(path.values, [-NOISE_SCALE, NOISE_SCALE]))
    assert (path.values > 0).mean() == pytest.approx(0.5, abs=0.01)


@pytest.fixture(scope="module")
def ou_long_path(ou_model):
    return sample_path(ou_model, 0.01, 10_000_000, seed=777)


def test_ou_empirical_autocovariance(ou_model, ou_long_path):
    x = ou_long_path.values - ou_long_path.values.mean()
    n = x.size
    c0 = ou_model.stationary_var
    for lag_t in (0.0, 0.5, 1.0, 2.0, 5.0):
        k = round(lag_t / 0.01)
        emp = float(x[:n - k or None] @ x[k:]) / n
        ref = float(ou_model.autocovariance(np.array([lag_t]))[0])
        assert abs(emp - ref) < 0.03 * c0


def test_ou_empirical_intensity(ou_model, ou_long_path):
    est = empirical_intensity(ou_long_path, max_lag=10.0)
    assert est.value == pytest.approx(0.1, rel=0.05)
    assert est.stderr > 0.0
    assert abs(est.value - 0.1) < 4.0 * est.stderr
    assert est.max_lag == 10.0


def test_telegraph_empirical_intensity():
    # Faster switching (lambda=5) packs more effective samples into the span.
    tel = Telegraph(amplitude=1.0, switch_rate=5.0)
    path = sample_path(tel, 0.01, 10_000_000, seed=777)
    est = empirical_intensity(path, max_lag=10.0)
    assert est.value == pytest.approx(0.1, rel=0.05)


def test_empirical_intensity_constant_path():
    # Mean subtraction leaves only rounding residue on a constant path.
    path = NoisePath(dt=0.01, values=np.full(100_000, 0.3), seed=0)
    assert abs(empirical_intensity(path, max_lag=10.0).value) < 1e-20


def test_empirical_intensity_span_guard(ou_model):
    short = sample_path(ou_model, 0.01, 1000, seed=5)
    with pytest.raises(ConfigError):
        empirical_intensity(short, max_lag=10.0)


def test_noise_path_validation():
    with pytest.raises(ParameterError):
        NoisePath(dt=0.0, values=np.zeros(5), seed=1)
    with pytest.raises(ParameterError):
        NoisePath(dt=0.1, values=np.zeros((2, 3)), seed=1)


def test_scaled_sum_variance_smoke(ou_model):
    res = clt_variance_check(ou_model, 0.01, 1.0, 1000, seed=11)
    assert res.target_variance == pytest.approx(2.0 * 0.1 * 1.0, rel=1e-12)
    assert res.ratio == pytest.approx(1.0, abs=0.15)
    assert res.ratio_ci_low < res.ratio < res.ratio_ci_high
    assert abs(res.mean) < 4.0 * res.mean_stderr
    assert res.n_paths == 1000
    assert res.epsilon == 0.01


def test_scaled_sum_determinism(ou_model):
    a = clt_variance_check(ou_model, 0.01, 1.0, 1000, seed=11)
    b = clt_variance_check(ou_model, 0.01, 1.0, 1000, seed=11)
    assert a == b


@pytest.mark.parametrize("kwargs,exc", [
    (dict(epsilon=0.0), ParameterError),
    (dict(epsilon=1.0), ParameterError),
    (dict(tau=0.0), ParameterError),
    (dict(tau=1.5), ParameterError),
    (dict(n_paths=999), ParameterError),
    (dict(steps_per_corr=19), ConfigError),
])
def test_scaled_sum_validation(ou_model, kwargs, exc):
    base = dict(epsilon=0.01, tau=1.0, n_paths=1000, seed=1)
    base.update(kwargs)
    with pytest.raises(exc):
        clt_variance_check(ou_model, **base)


def test_scaled_sum_rejects_zero_intensity():
    with pytest.raises(ParameterError):
        clt_variance_check(ZeroNoise(), 0.01, 1.0, 1000, seed=1)


@pytest.mark.parametrize("bad", [
    dict(mean_reversion=0.0), dict(mean_reversion=-1.0),
    dict(diffusion_scale=0.0),
])
def test_ou_params_validation(bad):
    kwargs = dict(mean_reversion=1.0, diffusion_scale=0.4)
    kwargs.update(bad)
    with pytest.raises(ParameterError):
        OrnsteinUhlenbeck(**kwargs)


@pytest.mark.parametrize("bad", [
    dict(amplitude=0.0), dict(switch_rate=0.0), dict(switch_rate=-2.0),
])
def test_telegraph_params_validation(bad):
    kwargs = dict(amplitude=0.4, switch_rate=1.0)
    kwargs.update(bad)
    with pytest.raises(ParameterError):
        Telegraph(**kwargs)
