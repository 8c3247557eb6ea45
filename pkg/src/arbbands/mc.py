"""Monte Carlo validation of the asymptotic band construction.

For a frozen noise trajectory the perturbed pricing equation is the constant
volatility call problem with the time-dependent rate r + xi(s/epsilon), so
each path's price is the closed form evaluated at the path-averaged rate

    r_path = r + (epsilon / tau) * integral_0^{tau/epsilon} xi(v) dv.

That reduction is derived, not assumed: path_price_fd re-solves the 1-D PDE
step by step with the frozen per-step rate, and ensure_path_reduction_gate
refuses to let ensemble_stats use the fast reduction until the two agree to
0.05% on a sample of paths (cached per parameter set).

ensemble_stats then measures what the asymptotics predict: the mean price
approaches the deterministic price, and the variance of the scaled residual
(price - bs_price) / sqrt(epsilon) approaches the fluctuation variance
U(tau, spot) as epsilon shrinks.

Reproducibility contract: path i draws from the i-th spawned child of the
seed, so results are bit-identical for identical inputs and path i does not
depend on n_paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bscore import MarketParams, _call_price_raw, bs_call
from .errors import AccuracyError, ConfigError, ParameterError
from .noise import NoiseModel, NoisePath
from .pde import GridSpec, _operator_bands, _theta_step

__all__ = [
    "PathStats",
    "path_price_exact",
    "path_price_fd",
    "ensure_path_reduction_gate",
    "ensemble_stats",
]


@dataclass(frozen=True)
class PathStats:
    """Ensemble summary of per-path prices.

    var_scaled_residual is the sample variance of
    (price - bs_price) / sqrt(epsilon); std_error its bootstrap standard
    error (same units, currency^2); mean_stderr the plain standard error of
    mean_price.
    """

    n_paths: int
    mean_price: float
    var_scaled_residual: float
    std_error: float
    epsilon: float
    mean_stderr: float

    def __post_init__(self) -> None:
        if self.n_paths < 2:
            raise ParameterError(f"n_paths must be >= 2, got {self.n_paths}")
        if self.var_scaled_residual < 0.0:
            raise ParameterError("variance cannot be negative")


def _check_path_coverage(mp: MarketParams, path: NoisePath, epsilon: float) -> None:
    if not (0.0 < epsilon < 1.0):
        raise ParameterError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not (mp.tau > 0.0):
        raise ParameterError("path pricing needs mp.tau > 0")
    n_steps = path.values.size - 1
    if n_steps < 20:
        raise ConfigError(
            f"path has {n_steps} steps; at least 20 are needed to resolve "
            "the noise over the option life"
        )
    span = n_steps * path.dt * epsilon
    if abs(span - mp.tau) > 1e-9 * mp.tau:
        raise ConfigError(
            f"path covers tau = {span:.6g} but the option needs {mp.tau:.6g}; "
            "sample the path to end exactly at the horizon"
        )


def _path_rate_shift(mp: MarketParams, path: NoisePath, epsilon: float) -> float:
    # (1/tau) integral_0^tau xi(s/eps) ds  ==  (eps/tau) * integral in noise time
    return (epsilon / mp.tau) * float(np.trapezoid(path.values, dx=path.dt))


def path_price_exact(mp: MarketParams, path: NoisePath, epsilon: float) -> float:
    """Per-path price via the path-averaged-rate reduction.

    Deterministic given the path.  ConfigError when the path is too coarse
    (< 20 steps) or does not span the option life exactly.
    """
    _check_path_coverage(mp, path, epsilon)
    rate = mp.rate + _path_rate_shift(mp, path, epsilon)
    return _call_price_raw(mp.spot, mp.strike, rate, mp.volatility, mp.tau)


def path_price_fd(mp: MarketParams, path: NoisePath, epsilon: float,
                  gs: GridSpec) -> float:
    """Per-path price by finite differences, one PDE step per path step.

    Within step j the rate is frozen at r + (xi_j + xi_{j+1})/2 and enters
    both the drift and the discounting; the first two steps run fully
    implicit (split into half-steps) to damp the payoff kink, the rest
    Crank-Nicolson.  gs supplies the spatial grid only; the time grid comes
    from the path.  Returns the solution interpolated at mp.spot.
    """
    _check_path_coverage(mp, path, epsilon)
    gs._check_solvable(mp, 0.0, dims=1)
    x = gs.axis()
    lx = math.log(mp.spot)
    if not (x[0] <= lx <= x[-1]):
        raise ConfigError(f"spot {mp.spot} outside the grid domain")
    dx = x[1] - x[0]
    dt_tau = path.dt * epsilon
    v = np.maximum(np.exp(x) - mp.strike, 0.0)
    xi = path.values
    for j in range(xi.size - 1):
        rate_j = mp.rate + 0.5 * (xi[j] + xi[j + 1])
        bands = _operator_bands(gs.n_space, dx, rate_j, mp.volatility)
        if j < 2:
            for _ in range(2):
                v = _theta_step(v, bands, 0.5 * dt_tau, 1.0)
        else:
            v = _theta_step(v, bands, dt_tau, 0.5)
    if not np.all(np.isfinite(v)):
        raise ConfigError("finite-difference path solve produced non-finite values")
    return float(np.interp(lx, x, v))


def _ensemble_grid(nm: NoiseModel, tau: float, epsilon: float) -> tuple[float, int]:
    """Noise-time step and step count: >= 20 steps per correlation time and
    per option life, ending exactly at the horizon."""
    h = min(1.0, nm.correlation_time) / 20.0
    n_steps = max(20, round(tau / (epsilon * h)))
    return tau / (epsilon * n_steps), n_steps


_REDUCTION_GATE: set[tuple] = set()

_GATE_SEED = 91507
_GATE_N_PATHS = 20
_GATE_N_SPACE = 801
_GATE_REL_TOL = 5e-4


def ensure_path_reduction_gate(mp: MarketParams, nm: NoiseModel,
                               epsilon: float = 0.01) -> None:
    """Validate the rate-shift reduction against the FD path solver.

    Prices _GATE_N_PATHS fresh paths both ways and caches the pass per
    (market params, noise model); AccuracyError when any path disagrees
    beyond 0.05% relative.
    """
    key = (mp, nm)
    if key in _REDUCTION_GATE:
        return
    h, n_steps = _ensemble_grid(nm, mp.tau, epsilon)
    gs = GridSpec.for_market(mp, n_space=_GATE_N_SPACE, n_time=1)
    children = np.random.SeedSequence(_GATE_SEED).spawn(_GATE_N_PATHS)
    worst = 0.0
    for child in children:
        rng = np.random.default_rng(child)
        path = NoisePath(dt=h, values=nm._draw(rng, h, n_steps + 1),
                         seed=_GATE_SEED)
        exact = path_price_exact(mp, path, epsilon)
        fd = path_price_fd(mp, path, epsilon, gs)
        worst = max(worst, abs(fd - exact) / abs(exact))
    if worst > _GATE_REL_TOL:
        raise AccuracyError(
            f"path-averaged-rate reduction failed its finite-difference "
            f"gate: max relative discrepancy {worst:.3e} > {_GATE_REL_TOL:g}"
        )
    _REDUCTION_GATE.add(key)


def ensemble_stats(mp: MarketParams, nm: NoiseModel, epsilon: float,
                   n_paths: int, seed: int, n_bootstrap: int = 200) -> PathStats:
    """Price an ensemble of noise paths and summarize the fluctuation law.

    Runs ensure_path_reduction_gate first, then prices each path with the
    exact reduction.  The scaled residual compares against the analytic
    deterministic price, not a numerical one.
    """
    if n_paths < 1000:
        raise ParameterError(f"n_paths must be >= 1000, got {n_paths}")
    if not (0.0 < epsilon < 1.0):
        raise ParameterError(f"epsilon must lie in (0, 1), got {epsilon}")
    ensure_path_reduction_gate(mp, nm)
    h, n_steps = _ensemble_grid(nm, mp.tau, epsilon)
    base_rate_price = bs_call(mp).price
    root_eps = math.sqrt(epsilon)
    children = np.random.SeedSequence(seed).spawn(n_paths + 1)
    prices = np.empty(n_paths)
    inv_tau = epsilon / mp.tau
    for i in range(n_paths):
        rng = np.random.default_rng(children[i])
        xi = nm._draw(rng, h, n_steps + 1)
        rate = mp.rate + inv_tau * float(np.trapezoid(xi, dx=h))
        prices[i] = _call_price_raw(mp.spot, mp.strike, rate, mp.volatility, mp.tau)
    scaled = (prices - base_rate_price) / root_eps
    var_scaled = float(scaled.var(ddof=1))
    boot_rng = np.random.default_rng(children[n_paths])
    idx = boot_rng.integers(0, n_paths, size=(n_bootstrap, n_paths))
    boot_vars = scaled[idx].var(axis=1, ddof=1)
    return PathStats(
        n_paths=n_paths,
        mean_price=float(prices.mean()),
        var_scaled_residual=var_scaled,
        std_error=float(boot_vars.std(ddof=1)),
        epsilon=epsilon,
        mean_stderr=float(prices.std(ddof=1) / math.sqrt(n_paths)),
    )
