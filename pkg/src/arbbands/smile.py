"""Implied-volatility smile induced by the pricing band.

Quoting the band's upper edge instead of the deterministic price and
inverting the standard formula strike by strike yields an effective
volatility sigma_eff(K) >= sigma.  The inversion is a vega-based Newton
iteration safeguarded by a bisection bracket: deep wings have vanishing
vega, where a raw Newton step overshoots by orders of magnitude.

Strikes whose effective price falls outside the attainable range
(intrinsic, spot) are reported as non-converged points rather than clamped;
clamping would fabricate a volatility where none reproduces the price.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .bscore import MarketParams, _call_price_raw, bs_call, norm_pdf
from .errors import AccuracyError, NoRootError, ParameterError
from .variance import ArbitrageParams, variance_u

__all__ = ["SmilePoint", "implied_vol", "smile_curve"]

_VOL_LO = 1e-4
_VOL_HI = 10.0
_VEGA_FLOOR = 1e-12


@dataclass(frozen=True)
class SmilePoint:
    """One strike of the smile; implied_vol is NaN when not converged."""

    strike: float
    implied_vol: float
    effective_price: float
    converged: bool


def implied_vol(target_price: float, mp: MarketParams,
                max_iter: int = 200) -> float:
    """Volatility at which the call formula reproduces target_price.

    Newton steps on the price with analytic vega, constrained to the
    bracket [1e-4, 10]; a step that leaves the bracket, or a vega below
    1e-12, falls back to bisection.  Terminates when the price residual is
    within 1e-10 * spot.

    Raises NoRootError when target_price lies outside the attainable range
    (max(S - K e^{-r tau}, 0), S) or implies a volatility above the
    bracket; ParameterError at tau = 0 where price has no volatility
    sensitivity.
    """
    S, K, r, tau = mp.spot, mp.strike, mp.rate, mp.tau
    if tau == 0.0:
        raise ParameterError("implied volatility is undefined at expiry")
    if not math.isfinite(target_price):
        raise ParameterError(f"target_price must be finite, got {target_price}")
    intrinsic = max(S - K * math.exp(-r * tau), 0.0)
    if not (intrinsic < target_price < S):
        raise NoRootError(
            f"target price {target_price:.6g} outside the attainable range "
            f"({intrinsic:.6g}, {S:.6g}) for this call"
        )
    tol = 1e-10 * S
    srt = math.sqrt(tau)

    def f(vol: float) -> float:
        return _call_price_raw(S, K, r, vol, tau) - target_price

    f_lo = f(_VOL_LO)
    if f_lo >= 0.0:
        # already above target at the smallest vol: the root sits below the
        # bracket with a price gap under the vol-resolution floor
        return _VOL_LO
    if f(_VOL_HI) <= 0.0:
        raise NoRootError(
            f"target price {target_price:.6g} implies a volatility above "
            f"{_VOL_HI}"
        )
    lo, hi = _VOL_LO, _VOL_HI
    vol = 0.5
    for _ in range(max_iter):
        fv = f(vol)
        if abs(fv) <= tol:
            return vol
        if fv > 0.0:
            hi = vol
        else:
            lo = vol
        d1 = (math.log(S / K) + (r + 0.5 * vol * vol) * tau) / (vol * srt)
        vega = S * srt * float(norm_pdf(d1))
        if vega > _VEGA_FLOOR:
            nxt = vol - fv / vega
        else:
            nxt = lo  # force the bisection branch
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if hi - lo < 1e-15 * hi:
            return 0.5 * (lo + hi)
        vol = nxt
    raise AccuracyError(
        f"implied volatility did not converge in {max_iter} iterations"
    )


def _solve_point(spot: float, tau: float, strike: float, rate: float,
                 volatility: float, ap: ArbitrageParams,
                 u_source: str) -> SmilePoint:
    mp = MarketParams(spot=spot, strike=strike, rate=rate,
                      volatility=volatility, tau=tau)
    u_val = variance_u(spot, tau, mp, ap, u_source)
    effective = bs_call(mp).price + ap.band_multiplier * math.sqrt(
        ap.epsilon * u_val)
    if ap.epsilon * u_val == 0.0:
        # degenerate band: the inversion is the identity
        return SmilePoint(strike=strike, implied_vol=volatility,
                          effective_price=effective, converged=True)
    try:
        vol = implied_vol(effective, mp)
    except NoRootError:
        return SmilePoint(strike=strike, implied_vol=float("nan"),
                          effective_price=effective, converged=False)
    return SmilePoint(strike=strike, implied_vol=vol,
                      effective_price=effective, converged=True)


def smile_curve(spot: float, tau: float, strikes: Sequence[float], rate: float,
                volatility: float, ap: ArbitrageParams,
                u_source: str = "closed_form", threads: int = 1) -> list[SmilePoint]:
    """Effective volatility across strikes at fixed spot and tau.

    Per strike: fluctuation variance via u_source, effective price =
    bs_price + band_multiplier * sqrt(epsilon * U), then inversion.
    Non-converged strikes are flagged in place, never dropped.

    Strikes must be positive and strictly increasing.
    """
    if len(strikes) == 0:
        raise ParameterError("strikes must be non-empty")
    arr = [float(k) for k in strikes]
    if any(not (k > 0.0 and math.isfinite(k)) for k in arr):
        raise ParameterError("strikes must be positive and finite")
    if any(b <= a for a, b in zip(arr[:-1], arr[1:])):
        raise ParameterError("strikes must be strictly increasing")
    if threads < 1:
        raise ParameterError(f"threads must be >= 1, got {threads}")

    def work(k: float) -> SmilePoint:
        return _solve_point(spot, tau, k, rate, volatility, ap, u_source)

    if threads == 1 or len(arr) == 1:
        return [work(k) for k in arr]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, arr))
