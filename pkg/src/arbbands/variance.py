"""Fluctuation variance of the call price and the resulting pricing bands.

The variance field U(tau, S) measures the mean-square deviation of the
price from its deterministic limit when the short rate carries a rapidly
mixing zero-mean perturbation of intensity `intensity` (the autocovariance
integral, see noise.py) at scale separation `epsilon`.  It is computed here
by propagating the squared cash-delta residual through the pricing kernel:

    U(tau, S) = 2 * intensity * integral_0^tau  J(tau1; tau, S)^2  dtau1,
    J(tau1; tau, S) = integral  G(S, S1, tau, tau1) * (S1 dV/dS1 - V)(tau1, S1) dS1.

For a call the inner integral J is independent of tau1 (the kernel is the
discounted transition law of the spot and the residual equals
K e^{-r tau1} Phi(d2(tau1)), so J is the discounted exercise probability
seen from (tau, S)), which collapses U to the closed form

    U(tau, S) = 2 * intensity * tau * (K e^{-r tau} Phi(d2(tau, S)))^2.

The closed form is a derived identity, not an independent input, so it is
gated: variance_u_closed_call is only trusted after an equivalence check
against the quadrature on a small parameter sample (cached per parameter
set; see ensure_closed_form_gate).

The pricing band around the deterministic price is
lower/upper = V_BS -/+ band_multiplier * sqrt(epsilon * U), and the
effective (ask) price is the upper edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import log_ndtr, roots_legendre

from .bscore import MarketParams, bs_call, source_term
from .errors import AccuracyError, ParameterError

__all__ = [
    "ArbitrageParams",
    "BandResult",
    "inner_integral",
    "variance_u_quadrature",
    "variance_u_closed_call",
    "ensure_closed_form_gate",
    "pricing_band",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ArbitrageParams:
    """Noise intensity, scale separation and band width multiplier.

    Attributes:
        intensity: autocovariance integral of the rate noise, >= 0.
        epsilon: correlation-time / option-lifetime ratio, in [0, 1).
            Zero is allowed and collapses every band to the point price.
        band_multiplier: half-width of the band in units of the fluctuation
            standard deviation sqrt(epsilon * U), > 0, default 2.
    """

    intensity: float
    epsilon: float
    band_multiplier: float = 2.0

    def __post_init__(self) -> None:
        if not (self.intensity >= 0.0 and math.isfinite(self.intensity)):
            raise ParameterError(f"intensity must be >= 0, got {self.intensity}")
        if not (0.0 <= self.epsilon < 1.0):
            raise ParameterError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if not (self.band_multiplier > 0.0 and math.isfinite(self.band_multiplier)):
            raise ParameterError(
                f"band_multiplier must be > 0, got {self.band_multiplier}"
            )


@dataclass(frozen=True)
class BandResult:
    """Point output of the band construction.

    effective equals upper: the seller quotes the top of the band.
    """

    bs_price: float
    fluct_var: float
    lower: float
    upper: float
    effective: float


@lru_cache(maxsize=8)
def _gl_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    return roots_legendre(n)


def _inner_log_quad(spot: float, tau: float, tau1: float, strike: float,
                    rate: float, vol: float, n_nodes: int) -> float:
    """Gauss-Legendre evaluation of the inner integral in u = ln S1.

    The integrand is exp(lg(u)) with
    lg = log kernel density + log residual; the kernel is Gaussian in u with
    mean m and std s, the residual contributes log Phi((u - b0)/c).  Panels
    cover the union of the kernel's +-8 s window and the +-10 sigma~ window
    of the Gaussian-times-Phi saddle at
    u~ = (m c^2 + b0 s^2)/(s^2 + c^2), sigma~ = s c / sqrt(s^2 + c^2);
    without the second window the quadrature loses all its mass at deep
    out-of-the-money corners where the product peaks far from m.
    Evaluation is done in log space with max-log rescaling so the deep tail
    keeps relative accuracy.
    """
    dt = tau - tau1
    m = math.log(spot) + (rate - 0.5 * vol * vol) * dt
    s = vol * math.sqrt(dt)
    lnk = math.log(strike)
    if tau1 > 0.0:
        c = vol * math.sqrt(tau1)
        b0 = lnk - (rate - 0.5 * vol * vol) * tau1
        ut = (m * c * c + b0 * s * s) / (s * s + c * c)
        st = s * c / math.sqrt(s * s + c * c)
        lo = min(m - 8.0 * s, ut - 10.0 * st)
        hi = max(m + 8.0 * s, ut + 10.0 * st)
        interior = [p for p in (m - 8.0 * s, m + 8.0 * s, ut - 10.0 * st, ut + 10.0 * st)
                    if lo < p < hi]
    else:
        # step residual K * 1{u > ln K}: window must still cover the kernel
        # tail beyond the step, and a panel edge sits exactly on the step
        c = 0.0
        b0 = lnk
        lo = m - 8.0 * s
        hi = max(m + 8.0 * s, b0 + 8.0 * s)
        interior = [p for p in (b0, m + 8.0 * s) if lo < p < hi]
    if hi <= lo:
        return 0.0
    edges = sorted(set([lo, hi] + interior))
    x, w = _gl_nodes(n_nodes)
    panel_w = []
    panel_lg = []
    for a, b in zip(edges[:-1], edges[1:]):
        u = 0.5 * (b - a) * x + 0.5 * (a + b)
        lg = -0.5 * ((u - m) / s) ** 2 - math.log(s) - _LOG_SQRT_2PI
        if tau1 > 0.0:
            lg = lg + log_ndtr((u - b0) / c) + math.log(strike) - rate * tau1
        else:
            lg = np.where(u >= b0, lg + math.log(strike), -np.inf)
        panel_w.append(0.5 * (b - a) * w)
        panel_lg.append(lg)
    gmax = max(float(np.max(lg)) for lg in panel_lg)
    if not math.isfinite(gmax):
        return 0.0
    total = sum(float(np.sum(wq * np.exp(lg - gmax)))
                for wq, lg in zip(panel_w, panel_lg))
    return math.exp(-rate * dt) * total * math.exp(gmax)


def inner_integral(spot: float, tau: float, tau1: float, mp: MarketParams,
                   n_nodes: int = 128) -> float:
    """Kernel-propagated cash-delta residual J(tau1; tau, spot).

    strike, rate and volatility are read from mp; the spot and tau arguments
    override mp's own so a single parameter set can be swept.

    Uses node-doubled Gauss-Legendre quadrature and raises AccuracyError
    when doubling the node count still moves the result by more than 1e-9
    relative (1e-12 absolute floor in units of the strike).

    Raises ParameterError unless 0 <= tau1 < tau.
    """
    if not (spot > 0.0):
        raise ParameterError(f"spot must be > 0, got {spot}")
    if not (0.0 <= tau1 < tau):
        raise ParameterError(
            f"inner_integral needs 0 <= tau1 < tau, got tau1={tau1}, tau={tau}"
        )
    args = (spot, tau, tau1, mp.strike, mp.rate, mp.volatility)
    v1 = _inner_log_quad(*args, n_nodes)
    v2 = _inner_log_quad(*args, 2 * n_nodes)
    tol = 1e-12 * mp.strike + 1e-9 * abs(v2)
    if abs(v2 - v1) > tol:
        raise AccuracyError(
            f"inner integral not converged at {n_nodes}->{2 * n_nodes} nodes: "
            f"change {abs(v2 - v1):.3e} exceeds {tol:.3e} at "
            f"spot={spot}, tau={tau}, tau1={tau1}"
        )
    return v2


def _adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 24) -> float:
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        if depth >= max_depth:
            raise AccuracyError("adaptive Simpson hit maximum recursion depth")
        if abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
                + recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1))

    return recurse(a, b, fa, fm, fb, whole, tol, 0)


def variance_u_quadrature(spot: float, tau: float, mp: MarketParams,
                          ap: ArbitrageParams) -> float:
    """Fluctuation variance via the kernel quadrature.

    2 * intensity * adaptive-Simpson integral of J(tau1)^2 over [0, tau],
    with absolute tolerance 1e-8 * (K e^{-r tau})^2 * tau on the time
    integral.  U(0, S) = 0 exactly, as is U for zero intensity.
    """
    if not (0.0 <= tau <= 1.0):
        raise ParameterError(f"tau must lie in [0, 1], got {tau}")
    if tau == 0.0 or ap.intensity == 0.0:
        return 0.0
    scale = (mp.strike * math.exp(-mp.rate * tau)) ** 2
    tol = 1e-8 * scale * tau

    def f(t1: float) -> float:
        # the integrand is continuous at t1 = tau; land just inside
        t1 = min(t1, tau * (1.0 - 1e-12))
        return inner_integral(spot, tau, t1, mp) ** 2

    integral = _adaptive_simpson(f, 0.0, tau, tol)
    return 2.0 * ap.intensity * integral


def variance_u_closed_call(spot: float, tau: float, mp: MarketParams,
                           ap: ArbitrageParams) -> float:
    """Closed-form fluctuation variance for a call.

    2 * intensity * tau * (K e^{-r tau} Phi(d2))^2, i.e. the square of the
    cash-delta residual times the diffusive variance growth.  Only valid
    for the call payoff; verify against variance_u_quadrature via
    ensure_closed_form_gate before trusting it on a new parameter set.
    """
    if not (0.0 <= tau <= 1.0):
        raise ParameterError(f"tau must lie in [0, 1], got {tau}")
    if tau == 0.0:
        return 0.0
    probe = MarketParams(spot=spot, strike=mp.strike, rate=mp.rate,
                         volatility=mp.volatility, tau=tau)
    return 2.0 * ap.intensity * tau * source_term(probe) ** 2


_GATE_CACHE: set[tuple[float, float, float]] = set()

# small but adversarial sample: deep out/in corners and short maturities
_GATE_SPOT_FRACS = (0.25, 0.6, 1.0, 1.6, 2.0)
_GATE_TAUS = (0.05, 0.3, 1.0)


def ensure_closed_form_gate(mp: MarketParams, ap: ArbitrageParams,
                            rel_tol: float = 1e-4) -> None:
    """Validate the closed form against the quadrature for this parameter set.

    Runs once per (strike, rate, volatility) triple and caches the pass;
    raises AccuracyError when any sampled point disagrees beyond rel_tol.
    """
    key = (mp.strike, mp.rate, mp.volatility)
    if key in _GATE_CACHE:
        return
    probe_ap = ArbitrageParams(intensity=max(ap.intensity, 0.1),
                               epsilon=ap.epsilon,
                               band_multiplier=ap.band_multiplier)
    worst = 0.0
    worst_at = None
    for frac in _GATE_SPOT_FRACS:
        spot = frac * mp.strike
        for tau in _GATE_TAUS:
            uq = variance_u_quadrature(spot, tau, mp, probe_ap)
            uc = variance_u_closed_call(spot, tau, mp, probe_ap)
            rel = abs(uq - uc) / max(abs(uc), 1e-300)
            if rel > worst:
                worst, worst_at = rel, (spot, tau)
    if worst > rel_tol:
        raise AccuracyError(
            f"closed-form variance failed the quadrature equivalence gate: "
            f"relative error {worst:.3e} > {rel_tol:g} at spot={worst_at[0]}, "
            f"tau={worst_at[1]}"
        )
    _GATE_CACHE.add(key)


_U_SOURCES = ("quadrature", "closed_form", "pde")


def variance_u(spot: float, tau: float, mp: MarketParams, ap: ArbitrageParams,
               u_source: str = "closed_form") -> float:
    """Fluctuation variance via the selected route."""
    if u_source == "closed_form":
        ensure_closed_form_gate(mp, ap)
        return variance_u_closed_call(spot, tau, mp, ap)
    if u_source == "quadrature":
        return variance_u_quadrature(spot, tau, mp, ap)
    if u_source == "pde":
        from .pde import variance_u_pde
        return variance_u_pde(spot, tau, mp, ap)
    raise ParameterError(f"u_source must be one of {_U_SOURCES}, got {u_source!r}")


def pricing_band(mp: MarketParams, ap: ArbitrageParams,
                 u_source: str = "closed_form") -> BandResult:
    """Band around the deterministic price at (mp.spot, mp.tau).

    lower/upper = bs_price -/+ band_multiplier * sqrt(epsilon * U); the
    effective price is the upper edge.  Collapses to the point price when
    epsilon or the intensity vanishes.
    """
    price = bs_call(mp).price
    u_val = variance_u(mp.spot, mp.tau, mp, ap, u_source)
    half = ap.band_multiplier * math.sqrt(ap.epsilon * u_val)
    return BandResult(
        bs_price=price,
        fluct_var=u_val,
        lower=price - half,
        upper=price + half,
        effective=price + half,
    )
