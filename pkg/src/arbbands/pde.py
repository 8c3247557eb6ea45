"""Finite-difference solvers in log-price coordinates.

Two solvers share one spatial operator.  In x = ln S the pricing generator
is constant-coefficient,

    A = (sigma^2/2) d_xx + (r - sigma^2/2) d_x - r,

which removes any need for non-uniform meshes.  The 1-D solver marches the
call value forward in remaining life tau (validation of the grid machinery
against the closed form).  The 2-D solver marches the price-fluctuation
covariance R(tau, x, y), driven by the separable source
2 * intensity * f(x) f(y) with f the cash-delta residual, under the operator
A_x + A_y where each axis carries half of the -2r sink.  The equation has no
mixed derivative, so Peaceman-Rachford ADI applies without a correction
term; an explicit Euler scheme is kept as a slow reference implementation.

Boundary rows impose zero gamma in S (far-field linearity): with
d_SS V = 0 the x-operator degenerates to r d_x - r, discretized one-sided.
This is exact for the call at both ends of a wide domain, and the
covariance source saturates to constants there for the same reason.

The 1-D march opens with two fully implicit steps, each split into two
half-steps, before switching to Crank-Nicolson: the payoff kink otherwise
leaves a slowly decaying odd-even oscillation in gamma.  The 2-D march
starts from smooth zero data and needs no such damping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .bscore import MarketParams, call_price_curve, source_curve
from .errors import ConfigError, ParameterError, SolverError
from .variance import ArbitrageParams

__all__ = [
    "GridSpec",
    "SurfaceGrid",
    "default_domain",
    "solve_bs_pde",
    "solve_covariance_pde",
    "extract_diagonal",
    "variance_u_pde",
]

# explicit-scheme step bound dt <= _EXPLICIT_CFL * dx^2 / sigma^2; the 2-D
# pure-diffusion limit requires the constant <= 0.5, advection and the sink
# eat a little margin
_EXPLICIT_CFL = 0.4

_SCHEMES = ("adi", "explicit")


def default_domain(mp: MarketParams, tau_max: float | None = None) -> tuple[float, float]:
    """Log-price bounds ln K +- (5 sigma sqrt(tau_max) + |r - sigma^2/2| tau_max).

    Five standard deviations of the terminal transition plus the drift
    excursion; wide enough that the far-field boundary rows are exact to
    well below the schemes' truncation error.
    """
    t = mp.tau if tau_max is None else tau_max
    if not (t > 0.0):
        raise ParameterError(f"tau_max must be > 0, got {t}")
    half = 5.0 * mp.volatility * math.sqrt(t) + abs(mp.rate - 0.5 * mp.volatility**2) * t
    center = math.log(mp.strike)
    return center - half, center + half


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid for the finite-difference solvers.

    Attributes:
        x_min, x_max: log-price bounds (must bracket ln K at solve time).
        n_space: nodes per spatial axis, >= 3.
        n_time: time steps over the full horizon, >= 1.
        scheme: "adi" (implicit family; Rannacher + Crank-Nicolson in 1-D,
            Peaceman-Rachford in 2-D) or "explicit" (reference Euler,
            subject to the CFL bound).
    """

    x_min: float
    x_max: float
    n_space: int
    n_time: int
    scheme: str = "adi"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)
                and self.x_min < self.x_max):
            raise ParameterError(
                f"need x_min < x_max, got [{self.x_min}, {self.x_max}]"
            )
        if self.n_space < 3:
            raise ParameterError(f"n_space must be >= 3, got {self.n_space}")
        if self.n_time < 1:
            raise ParameterError(f"n_time must be >= 1, got {self.n_time}")
        if self.scheme not in _SCHEMES:
            raise ParameterError(
                f"scheme must be one of {_SCHEMES}, got {self.scheme!r}"
            )

    @classmethod
    def for_market(cls, mp: MarketParams, n_space: int, n_time: int,
                   scheme: str = "adi", tau_max: float | None = None) -> "GridSpec":
        lo, hi = default_domain(mp, tau_max)
        return cls(x_min=lo, x_max=hi, n_space=n_space, n_time=n_time, scheme=scheme)

    def axis(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_space)

    def _check_solvable(self, mp: MarketParams, horizon: float, dims: int) -> None:
        lnk = math.log(mp.strike)
        if not (self.x_min < lnk < self.x_max):
            raise ConfigError(
                f"grid [{self.x_min:.4f}, {self.x_max:.4f}] does not bracket "
                f"ln(strike) = {lnk:.4f}"
            )
        if self.scheme == "explicit" and horizon > 0.0:
            dx = (self.x_max - self.x_min) / (self.n_space - 1)
            dt = horizon / self.n_time
            bound = _EXPLICIT_CFL * dx * dx / mp.volatility**2
            if dt > bound:
                raise ConfigError(
                    f"explicit scheme unstable: dt = {dt:.3e} exceeds "
                    f"{_EXPLICIT_CFL} * dx^2 / sigma^2 = {bound:.3e}; "
                    f"increase n_time to >= {math.ceil(horizon / bound)}"
                )
        del dims


@dataclass(frozen=True)
class SurfaceGrid:
    """Node values on a tensor grid at one time level.

    axes holds one log-price array per dimension; values has the matching
    shape.  Construction rejects non-finite values: a NaN or Inf here
    always means an upstream solver defect.
    """

    axes: tuple[np.ndarray, ...]
    values: np.ndarray
    tau: float

    def __post_init__(self) -> None:
        if len(self.axes) != self.values.ndim:
            raise ParameterError(
                f"{len(self.axes)} axes for values of rank {self.values.ndim}"
            )
        for ax, size in zip(self.axes, self.values.shape):
            if ax.ndim != 1 or ax.size != size:
                raise ParameterError("axis lengths must match values shape")
        if not np.all(np.isfinite(self.values)):
            raise SolverError(
                f"surface at tau={self.tau} contains non-finite values"
            )

    @property
    def spot_axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.exp(ax) for ax in self.axes)


def _operator_bands(n: int, dx: float, rate: float,
                    vol: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tridiagonal bands (sub, diag, super) of A with zero-gamma boundary rows."""
    lo = np.zeros(n)
    di = np.zeros(n)
    up = np.zeros(n)
    a = 0.5 * vol * vol / (dx * dx)
    b = (rate - 0.5 * vol * vol) / (2.0 * dx)
    lo[1:-1] = a - b
    di[1:-1] = -2.0 * a - rate
    up[1:-1] = a + b
    di[0] = -rate / dx - rate
    up[0] = rate / dx
    lo[-1] = -rate / dx
    di[-1] = rate / dx - rate
    return lo, di, up


def _apply_bands(lo: np.ndarray, di: np.ndarray, up: np.ndarray,
                 v: np.ndarray) -> np.ndarray:
    """A v for a vector, or A applied down axis 0 of a matrix."""
    if v.ndim == 1:
        out = di * v
        out[1:] += lo[1:] * v[:-1]
        out[:-1] += up[:-1] * v[1:]
    else:
        out = di[:, None] * v
        out[1:, :] += lo[1:, None] * v[:-1, :]
        out[:-1, :] += up[:-1, None] * v[1:, :]
    return out


def _solve_shifted(lo: np.ndarray, di: np.ndarray, up: np.ndarray,
                   coef: float, rhs: np.ndarray) -> np.ndarray:
    """Solve (I - coef * A) x = rhs; rhs may be a matrix (columns solved)."""
    n = di.size
    ab = np.zeros((3, n))
    ab[0, 1:] = -coef * up[:-1]
    ab[1, :] = 1.0 - coef * di
    ab[2, :-1] = -coef * lo[1:]
    return solve_banded((1, 1), ab, rhs)


def _theta_step(v: np.ndarray, bands, dt: float, theta: float) -> np.ndarray:
    lo, di, up = bands
    rhs = v if theta == 1.0 else v + (1.0 - theta) * dt * _apply_bands(lo, di, up, v)
    return _solve_shifted(lo, di, up, theta * dt, rhs)


def solve_bs_pde(mp: MarketParams, gs: GridSpec) -> SurfaceGrid:
    """March the call payoff to remaining life mp.tau on the grid.

    Returns the value slice V(mp.tau, x).  The implicit family uses the
    Rannacher start (two steps as four implicit half-steps) and then
    Crank-Nicolson; the explicit scheme is first-order Euler under its CFL
    bound.  ConfigError on stability or domain violations.
    """
    gs._check_solvable(mp, mp.tau, dims=1)
    x = gs.axis()
    v = np.maximum(np.exp(x) - mp.strike, 0.0)
    if mp.tau == 0.0:
        return SurfaceGrid(axes=(x,), values=v, tau=0.0)
    dx = x[1] - x[0]
    dt = mp.tau / gs.n_time
    bands = _operator_bands(gs.n_space, dx, mp.rate, mp.volatility)
    if gs.scheme == "explicit":
        lo, di, up = bands
        for _ in range(gs.n_time):
            v = v + dt * _apply_bands(lo, di, up, v)
    else:
        n_damped = min(2, gs.n_time)
        for _ in range(2 * n_damped):
            v = _theta_step(v, bands, 0.5 * dt, 1.0)
        for _ in range(gs.n_time - n_damped):
            v = _theta_step(v, bands, dt, 0.5)
    return SurfaceGrid(axes=(x,), values=v, tau=mp.tau)


def _checkpoint_steps(checkpoints, horizon: float, n_time: int) -> dict[int, float]:
    dt = horizon / n_time
    out: dict[int, float] = {}
    for cp in checkpoints:
        if not (0.0 < cp <= horizon):
            raise ConfigError(
                f"checkpoint {cp} outside (0, {horizon}]"
            )
        k = round(cp / dt)
        if k < 1 or abs(k * dt - cp) > 1e-9 * max(cp, dt):
            raise ConfigError(
                f"checkpoint {cp} is not a multiple of the time step "
                f"{dt:.6g}; choose n_time so checkpoints land on steps"
            )
        out[k] = cp
    return out


def solve_covariance_pde(mp: MarketParams, ap: ArbitrageParams, gs: GridSpec,
                         checkpoints=None) -> list[SurfaceGrid]:
    """March the fluctuation covariance R(tau, x, y) from zero initial data.

    The source 2 * intensity * f(x) f(y) is evaluated from the closed-form
    cash-delta residual at the midpoint of each time step (second-order
    consistency).  Returns one square SurfaceGrid per requested checkpoint
    (default: the full horizon mp.tau), each checked for finiteness and
    (x, y) exchange symmetry to 1e-8 relative.

    Checkpoints must land exactly on time-step multiples; ConfigError
    otherwise, and on explicit-scheme stability violations.
    """
    horizon = mp.tau
    if not (horizon > 0.0):
        raise ParameterError("solve_covariance_pde needs mp.tau > 0")
    gs._check_solvable(mp, horizon, dims=2)
    if checkpoints is None:
        checkpoints = (horizon,)
    steps_at = _checkpoint_steps(checkpoints, horizon, gs.n_time)
    x = gs.axis()
    dx = x[1] - x[0]
    dt = horizon / gs.n_time
    # each axis operator carries half of the -2r sink
    bands = _operator_bands(gs.n_space, dx, mp.rate, mp.volatility)
    lo, di, up = bands
    spot_axis = np.exp(x)
    twod = 2.0 * ap.intensity
    r_surf = np.zeros((gs.n_space, gs.n_space))
    out: list[SurfaceGrid] = []
    half = 0.5 * dt
    for j in range(gs.n_time):
        f = source_curve(spot_axis, (j + 0.5) * dt, mp)
        g = twod * np.outer(f, f)
        if gs.scheme == "explicit":
            r_surf = r_surf + dt * (_apply_bands(lo, di, up, r_surf)
                                    + _apply_bands(lo, di, up, r_surf.T).T
                                    + g)
        else:
            # Peaceman-Rachford: implicit in x then in y, source split evenly
            rhs = r_surf + half * _apply_bands(lo, di, up, r_surf.T).T + half * g
            r_half = _solve_shifted(lo, di, up, half, rhs)
            rhs2 = r_half + half * _apply_bands(lo, di, up, r_half) + half * g
            r_surf = _solve_shifted(lo, di, up, half, rhs2.T).T
        if (j + 1) in steps_at:
            cp = steps_at[j + 1]
            if not np.all(np.isfinite(r_surf)):
                raise SolverError(
                    f"covariance solve produced non-finite values at step "
                    f"{j + 1} (tau = {cp:g})"
                )
            scale = float(np.abs(r_surf).max())
            if scale > 0.0:
                asym = float(np.abs(r_surf - r_surf.T).max())
                if asym > 1e-8 * scale:
                    raise SolverError(
                        f"covariance surface lost (x, y) symmetry at tau = "
                        f"{cp:g}: max asymmetry {asym:.3e} vs scale {scale:.3e}"
                    )
            out.append(SurfaceGrid(axes=(x, x), values=r_surf.copy(), tau=cp))
    return out


def extract_diagonal(surface: SurfaceGrid) -> SurfaceGrid:
    """Variance profile U(tau, x) = R(tau, x, x) of a square surface.

    Both axes must be the identical node set (no interpolation is done);
    ParameterError otherwise.
    """
    if len(surface.axes) != 2:
        raise ParameterError("extract_diagonal needs a 2-d surface")
    ax0, ax1 = surface.axes
    if ax0.size != ax1.size or not np.array_equal(ax0, ax1):
        raise ParameterError("extract_diagonal needs identical axes")
    return SurfaceGrid(axes=(ax0,), values=np.diagonal(surface.values).copy(),
                       tau=surface.tau)


def variance_u_pde(spot: float, tau: float, mp: MarketParams, ap: ArbitrageParams,
                   gs: GridSpec | None = None) -> float:
    """Fluctuation variance at one point via the covariance solve.

    Builds a reference-resolution grid when gs is omitted; linear
    interpolation of the diagonal in log-spot.  Far slower than the
    quadrature or closed form; intended for cross-validation.
    """
    if not (spot > 0.0):
        raise ParameterError(f"spot must be > 0, got {spot}")
    if gs is None:
        base = MarketParams(spot=spot, strike=mp.strike, rate=mp.rate,
                            volatility=mp.volatility, tau=tau)
        gs = GridSpec.for_market(base, n_space=401, n_time=800, tau_max=tau)
    probe = MarketParams(spot=spot, strike=mp.strike, rate=mp.rate,
                         volatility=mp.volatility, tau=tau)
    surf = solve_covariance_pde(probe, ap, gs, checkpoints=(tau,))[-1]
    diag = extract_diagonal(surf)
    lx = math.log(spot)
    ax = diag.axes[0]
    if not (ax[0] <= lx <= ax[-1]):
        raise ParameterError(
            f"spot {spot} falls outside the grid domain "
            f"[{math.exp(ax[0]):.4g}, {math.exp(ax[-1]):.4g}]"
        )
    return float(np.interp(lx, ax, diag.values))
