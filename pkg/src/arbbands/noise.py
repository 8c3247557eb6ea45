"""Stationary zero-mean noise models for the perturbed short rate.

Two concrete models are provided, both ergodic with exponentially decaying
autocovariance, so the intensity

    intensity = integral_0^inf  cov(xi(t+s), xi(t)) ds

is finite and available in closed form:

* Ornstein-Uhlenbeck: d xi = -mean_reversion * xi dt + diffusion_scale * dW,
  autocovariance (k^2 / 2a) e^{-a s}, intensity k^2 / (2 a^2);
* symmetric telegraph: xi jumps between +amplitude and -amplitude with
  exponential holding times of rate switch_rate, autocovariance
  a^2 e^{-2 lambda s}, intensity a^2 / (2 lambda).

Paths are sampled exactly (no Euler bias): the OU chain uses its Gaussian
transition kernel, the telegraph chain its exponential event times.  Both
start from a stationary draw so ergodic averages are unbiased from step 0.

clt_variance_check verifies the diffusive rescaling this package rests on:
x_eps(t) = eps^{-1/2} * integral_0^t xi(s/eps) ds has variance approaching
2 * intensity * t as eps -> 0.  The check simulates the integral per path and
compares the ensemble variance against that target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft
from scipy.signal import lfilter

from .errors import ConfigError, ParameterError

__all__ = [
    "OrnsteinUhlenbeck",
    "Telegraph",
    "ZeroNoise",
    "NoisePath",
    "IntensityEstimate",
    "CltCheckResult",
    "analytic_intensity",
    "sample_path",
    "empirical_intensity",
    "clt_variance_check",
]


@dataclass(frozen=True)
class OrnsteinUhlenbeck:
    """Mean-reverting Gaussian noise.

    Attributes:
        mean_reversion: pull-back rate toward zero, > 0.
        diffusion_scale: Brownian forcing scale, > 0.
    """

    mean_reversion: float
    diffusion_scale: float

    def __post_init__(self) -> None:
        if not (self.mean_reversion > 0.0 and math.isfinite(self.mean_reversion)):
            raise ParameterError(
                f"mean_reversion must be > 0, got {self.mean_reversion}"
            )
        if not (self.diffusion_scale > 0.0 and math.isfinite(self.diffusion_scale)):
            raise ParameterError(
                f"diffusion_scale must be > 0, got {self.diffusion_scale}"
            )

    @property
    def stationary_var(self) -> float:
        return self.diffusion_scale**2 / (2.0 * self.mean_reversion)

    @property
    def intensity(self) -> float:
        """Autocovariance integral (k^2/2a) * (1/a)."""
        return self.diffusion_scale**2 / (2.0 * self.mean_reversion**2)

    @property
    def correlation_time(self) -> float:
        return 1.0 / self.mean_reversion

    def autocovariance(self, lag):
        """cov(xi(t+lag), xi(t)) for lag >= 0, vectorized."""
        return self.stationary_var * np.exp(-self.mean_reversion * np.asarray(lag))

    def _draw(self, rng: np.random.Generator, dt: float, n: int) -> np.ndarray:
        # exact AR(1) transition; lfilter runs the recursion in C
        rho = math.exp(-self.mean_reversion * dt)
        sd = math.sqrt(self.stationary_var)
        x0 = sd * rng.standard_normal()
        if n == 1:
            return np.array([x0])
        innov = sd * math.sqrt(1.0 - rho * rho) * rng.standard_normal(n - 1)
        tail, _ = lfilter([1.0], [1.0, -rho], innov, zi=np.array([rho * x0]))
        return np.concatenate(([x0], tail))


@dataclass(frozen=True)
class Telegraph:
    """Symmetric two-state noise taking values +-amplitude.

    Attributes:
        amplitude: magnitude of the two states, > 0.
        switch_rate: exponential flip rate, > 0.
    """

    amplitude: float
    switch_rate: float

    def __post_init__(self) -> None:
        if not (self.amplitude > 0.0 and math.isfinite(self.amplitude)):
            raise ParameterError(f"amplitude must be > 0, got {self.amplitude}")
        if not (self.switch_rate > 0.0 and math.isfinite(self.switch_rate)):
            raise ParameterError(f"switch_rate must be > 0, got {self.switch_rate}")

    @property
    def stationary_var(self) -> float:
        return self.amplitude**2

    @property
    def intensity(self) -> float:
        """Autocovariance integral a^2 * 1/(2 lambda)."""
        return self.amplitude**2 / (2.0 * self.switch_rate)

    @property
    def correlation_time(self) -> float:
        return 1.0 / (2.0 * self.switch_rate)

    def autocovariance(self, lag):
        return self.stationary_var * np.exp(
            -2.0 * self.switch_rate * np.asarray(lag)
        )

    def _draw(self, rng: np.random.Generator, dt: float, n: int) -> np.ndarray:
        sign0 = 1.0 if rng.random() < 0.5 else -1.0
        horizon = n * dt
        # expected count + wide margin; extend in the rare shortfall
        m = int(self.switch_rate * horizon + 10.0 * math.sqrt(self.switch_rate * horizon) + 20)
        times = np.cumsum(rng.exponential(1.0 / self.switch_rate, size=m))
        while times[-1] < horizon:
            extra = rng.exponential(1.0 / self.switch_rate, size=m)
            times = np.concatenate((times, times[-1] + np.cumsum(extra)))
        grid = dt * np.arange(n)
        flips = np.searchsorted(times, grid, side="right")
        return sign0 * self.amplitude * (1.0 - 2.0 * (flips & 1))


@dataclass(frozen=True)
class ZeroNoise:
    """Identically-zero noise.

    Degenerate member of the model family for pipeline validation: with it
    the perturbed problem collapses exactly to the deterministic one, so any
    ensemble statistic that is not exactly zero/baseline flags a bug in the
    plumbing rather than in the numerics.
    """

    @property
    def stationary_var(self) -> float:
        return 0.0

    @property
    def intensity(self) -> float:
        return 0.0

    @property
    def correlation_time(self) -> float:
        # arbitrary positive value; only sets sampling grids
        return 1.0

    def autocovariance(self, lag):
        return np.zeros_like(np.asarray(lag, dtype=float))

    def _draw(self, rng: np.random.Generator, dt: float, n: int) -> np.ndarray:
        del rng, dt
        return np.zeros(n)


NoiseModel = OrnsteinUhlenbeck | Telegraph | ZeroNoise


@dataclass(frozen=True)
class NoisePath:
    """A sampled noise trajectory on a uniform grid (noise time units)."""

    dt: float
    values: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        if not (self.dt > 0.0):
            raise ParameterError(f"dt must be > 0, got {self.dt}")
        if self.values.ndim != 1 or self.values.size < 1:
            raise ParameterError("values must be a non-empty 1-d array")


def analytic_intensity(nm: NoiseModel) -> float:
    """Closed-form autocovariance integral of the model."""
    return nm.intensity


def sample_path(nm: NoiseModel, dt: float, n: int, seed: int) -> NoisePath:
    """Sample n values of xi at spacing dt, starting from the stationary law.

    Identical (nm, dt, n, seed) gives a bit-identical path.
    """
    if not (dt > 0.0):
        raise ParameterError(f"dt must be > 0, got {dt}")
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return NoisePath(dt=dt, values=nm._draw(rng, dt, n), seed=seed)


@dataclass(frozen=True)
class IntensityEstimate:
    """Empirical autocovariance integral with a batch-means error proxy."""

    value: float
    stderr: float
    max_lag: float


def empirical_intensity(path: NoisePath, max_lag: float) -> IntensityEstimate:
    """Estimate the intensity from one long path.

    Trapezoidal integral of the empirical autocovariance over [0, max_lag].
    The standard error comes from batch means: the path is cut into
    contiguous batches, the integral recomputed per batch, and the spread
    of batch values scaled by 1/sqrt(n_batches).

    Raises ConfigError when the path is shorter than 20 * max_lag, which is
    too little data for the tail of the autocovariance to average out.
    """
    if not (max_lag > 0.0):
        raise ParameterError(f"max_lag must be > 0, got {max_lag}")
    n = path.values.size
    span = n * path.dt
    if span < 20.0 * max_lag:
        raise ConfigError(
            f"path span {span:g} is below 20*max_lag = {20.0 * max_lag:g}; "
            "use a longer path or a smaller max_lag"
        )
    n_lags = int(max_lag / path.dt)
    if n_lags < 2:
        raise ConfigError("max_lag must cover at least 2 path steps")

    def integral(x: np.ndarray) -> float:
        x = x - x.mean()
        m = x.size
        nfft = next_fast_len(2 * m)
        spec = rfft(x, nfft)
        acov = irfft(spec * np.conj(spec), nfft)[: n_lags + 1] / m
        return float(np.trapezoid(acov, dx=path.dt))

    value = integral(path.values)
    n_batches = int(min(20, span / (5.0 * max_lag)))
    n_batches = max(n_batches, 4)
    blen = n // n_batches
    batch_vals = [
        integral(path.values[i * blen : (i + 1) * blen]) for i in range(n_batches)
    ]
    stderr = float(np.std(batch_vals, ddof=1) / math.sqrt(n_batches))
    return IntensityEstimate(value=value, stderr=stderr, max_lag=max_lag)


@dataclass(frozen=True)
class CltCheckResult:
    """Ensemble statistics of the rescaled noise integral x_eps(tau).

    ratio is the sample variance divided by the diffusive target
    2 * intensity * tau; ratio_ci_low/high bracket it with a bootstrap
    95% interval.
    """

    epsilon: float
    tau: float
    n_paths: int
    mean: float
    mean_stderr: float
    variance: float
    target_variance: float
    ratio: float
    ratio_ci_low: float
    ratio_ci_high: float


def _integral_grid(nm: NoiseModel, epsilon: float, tau: float,
                   steps_per_corr: int) -> tuple[float, int]:
    """Noise-time step and count so the tau-step is <= epsilon/steps_per_corr."""
    h = min(1.0, nm.correlation_time) / steps_per_corr
    n_steps = max(1, round(tau / (epsilon * h)))
    h = tau / (epsilon * n_steps)
    return h, n_steps


def clt_variance_check(nm: NoiseModel, epsilon: float, tau: float,
                       n_paths: int, seed: int,
                       steps_per_corr: int = 20,
                       n_bootstrap: int = 200) -> CltCheckResult:
    """Check the diffusive variance law of the rescaled noise integral.

    Simulates x_eps(tau) = sqrt(eps) * sum_i xi(t_i) * h (left-endpoint sum
    over the noise-time grid) for n_paths independent paths and compares the
    sample variance against 2 * intensity * tau.

    Path i draws from the i-th spawned child stream of the seed, so the
    realization of path i does not depend on n_paths.

    Raises ConfigError when steps_per_corr < 20 (the grid would under-resolve
    the autocovariance whose integral sets the target).
    """
    if not (0.0 < epsilon < 1.0):
        raise ParameterError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not (0.0 < tau <= 1.0):
        raise ParameterError(f"tau must lie in (0, 1], got {tau}")
    if nm.intensity == 0.0:
        raise ParameterError("variance ratio is undefined for zero-intensity noise")
    if n_paths < 1000:
        raise ParameterError(f"n_paths must be >= 1000, got {n_paths}")
    if steps_per_corr < 20:
        raise ConfigError(
            f"steps_per_corr must be >= 20 to resolve the correlation time, "
            f"got {steps_per_corr}"
        )
    h, n_steps = _integral_grid(nm, epsilon, tau, steps_per_corr)
    root_eps = math.sqrt(epsilon)
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(n_paths + 1)
    x = np.empty(n_paths)
    for i in range(n_paths):
        rng = np.random.default_rng(children[i])
        x[i] = root_eps * h * nm._draw(rng, h, n_steps).sum()
    mean = float(x.mean())
    variance = float(x.var(ddof=1))
    target = 2.0 * nm.intensity * tau
    boot_rng = np.random.default_rng(children[n_paths])
    idx = boot_rng.integers(0, n_paths, size=(n_bootstrap, n_paths))
    boot = x[idx].var(axis=1, ddof=1) / target
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return CltCheckResult(
        epsilon=epsilon,
        tau=tau,
        n_paths=n_paths,
        mean=mean,
        mean_stderr=float(math.sqrt(variance / n_paths)),
        variance=variance,
        target_variance=target,
        ratio=variance / target,
        ratio_ci_low=float(lo),
        ratio_ci_high=float(hi),
    )
