"""Path pricing and seeded ensembles."""

import numpy as np
import pytest

from arbbands import (
    ConfigError,
    GridSpec,
    MarketParams,
    NoisePath,
    ParameterError,
    PathStats,
    ZeroNoise,
    bs_call,
    ensemble_stats,
    ensure_path_reduction_gate,
    path_price_exact,
    path_price_fd,
)
from arbbands import mc as mc_module

from conftest import oracle_call

EPS = 0.01


def _flat_path(level, tau=1.0, epsilon=EPS, steps_per_unit=20):
    # Span must equal tau / epsilon for the rate shift to be well defined.
    h = 1.0 / steps_per_unit
    n = round(tau / (epsilon * h))
    return NoisePath(dt=h, values=np.full(n + 1, level), seed=0)


def test_zero_path_recovers_reference_price(ref_market):
    price = path_price_exact(ref_market, _flat_path(0.0), EPS)
    assert price == bs_call(ref_market).price


def test_constant_path_shifts_rate_by_level(ref_market):
    # A flat excursion c over the whole span acts as a rate bump r -> r + c.
    price = path_price_exact(ref_market, _flat_path(0.05), EPS)
    assert price == pytest.approx(oracle_call(20.0, 20.0, 0.15, 0.4, 1.0),
                                  rel=1e-12)


def test_path_coverage_guards(ref_market):
    too_few = NoisePath(dt=1.0, values=np.zeros(10), seed=0)
    with pytest.raises(ConfigError):
        path_price_exact(ref_market, too_few, EPS)
    wrong_span = NoisePath(dt=0.05, values=np.zeros(500), seed=0)
    with pytest.raises(ConfigError):
        path_price_exact(ref_market, wrong_span, EPS)
    with pytest.raises(ParameterError):
        path_price_exact(ref_market, _flat_path(0.0), 0.0)


def test_fd_path_solver_matches_exact(ref_market, ou_model):
    rng = np.random.default_rng(4321)
    h, n_steps = mc_module._ensemble_grid(ou_model, 1.0, EPS)
    path = NoisePath(dt=h, values=ou_model._draw(rng, h, n_steps + 1),
                     seed=4321)
    exact = path_price_exact(ref_market, path, EPS)
    gs = GridSpec.for_market(ref_market, 401, 1)
    fd = path_price_fd(ref_market, path, EPS, gs)
    assert fd == pytest.approx(exact, rel=5e-4)


def test_reduction_gate_caches(ref_market, ou_model):
    ensure_path_reduction_gate(ref_market, ou_model, epsilon=EPS)
    assert (ref_market, ou_model) in mc_module._REDUCTION_GATE
    # Second call is a cache hit and must not re-run the 20-path comparison.
    ensure_path_reduction_gate(ref_market, ou_model, epsilon=EPS)


def test_ensemble_reproducibility(ref_market, ou_model):
    a = ensemble_stats(ref_market, ou_model, EPS, 1000, seed=2718)
    b = ensemble_stats(ref_market, ou_model, EPS, 1000, seed=2718)
    c = ensemble_stats(ref_market, ou_model, EPS, 1000, seed=2719)
    assert a == b
    assert a != c


def test_ensemble_zero_noise_collapses(ref_market):
    stats = ensemble_stats(ref_market, ZeroNoise(), EPS, 1000, seed=5)
    assert stats.mean_price == pytest.approx(bs_call(ref_market).price,
                                             rel=1e-14)
    assert stats.var_scaled_residual == 0.0
    assert stats.std_error == 0.0


def test_ensemble_magnitudes(ref_market, ou_model):
    # 1000 paths: the scaled residual variance estimates U(1, 20) ~ 17.7 with
    # roughly sqrt(2/999) ~ 4.5% sampling noise; the band below is ~8 sigma.
    stats = ensemble_stats(ref_market, ou_model, EPS, 1000, seed=2718)
    assert stats.n_paths == 1000
    assert stats.epsilon == EPS
    assert stats.var_scaled_residual == pytest.approx(17.7066, rel=0.35)
    assert stats.std_error > 0.0
    assert abs(stats.mean_price - bs_call(ref_market).price) \
        < 5.0 * stats.mean_stderr


def test_path_stats_validation():
    with pytest.raises(ParameterError):
        PathStats(n_paths=1, mean_price=1.0, var_scaled_residual=1.0,
                  std_error=0.1, epsilon=0.01, mean_stderr=0.1)
    with pytest.raises(ParameterError):
        PathStats(n_paths=100, mean_price=1.0, var_scaled_residual=-1.0,
                  std_error=0.1, epsilon=0.01, mean_stderr=0.1)


def test_ensemble_validation(ref_market, ou_model):
    with pytest.raises(ParameterError):
        ensemble_stats(ref_market, ou_model, EPS, 999, seed=1)
    with pytest.raises(ParameterError):
        ensemble_stats(ref_market, ou_model, 1.0, 1000, seed=1)
