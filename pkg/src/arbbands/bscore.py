"""Closed-form pricing core for a European call in rescaled time.

Time is measured by the remaining-life fraction tau in [0, 1] (calendar time
already divided by the option lifetime), so every rate and variance in this
package is understood per unit of rescaled time.  With spot S, strike K,
rate r and volatility sigma, the call price is the usual lognormal formula

    V(tau, S) = S Phi(d1) - K e^{-r tau} Phi(d2),
    d1 = [ln(S/K) + (r + sigma^2/2) tau] / (sigma sqrt(tau)),   d2 = d1 - sigma sqrt(tau).

Two derived quantities feed the rest of the package:

* the cash-delta residual ("source term")  S dV/dS - V = K e^{-r tau} Phi(d2),
  which is the coupling through which rate perturbations enter the price;
* the pricing kernel (Green function) of the valuation PDE in rescaled time,
  a lognormal transition density with discounting, used by the quadrature
  route for the fluctuation variance.

Phi is evaluated through the complementary error function (scipy.special.ndtr,
erf based, absolute error below 1e-15), so tail values keep full relative
accuracy down to the underflow threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ParameterError

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class MarketParams:
    """Market and contract state for one valuation.

    Attributes:
        spot: current underlying price S, must be > 0.
        strike: strike K, must be > 0.
        rate: rate r per unit rescaled time, must be >= 0.
        volatility: lognormal volatility sigma per sqrt of rescaled time, > 0.
        tau: remaining-life fraction, in [0, 1].
    """

    spot: float
    strike: float
    rate: float
    volatility: float
    tau: float

    def __post_init__(self) -> None:
        if not (self.spot > 0.0) or not math.isfinite(self.spot):
            raise ParameterError(f"spot must be positive and finite, got {self.spot}")
        if not (self.strike > 0.0) or not math.isfinite(self.strike):
            raise ParameterError(f"strike must be positive and finite, got {self.strike}")
        if not (self.rate >= 0.0) or not math.isfinite(self.rate):
            raise ParameterError(f"rate must be non-negative and finite, got {self.rate}")
        if not (self.volatility > 0.0) or not math.isfinite(self.volatility):
            raise ParameterError(
                f"volatility must be positive and finite, got {self.volatility}"
            )
        if not (0.0 <= self.tau <= 1.0):
            raise ParameterError(f"tau must lie in [0, 1], got {self.tau}")


@dataclass(frozen=True)
class GreeksRecord:
    """Price plus the sensitivities needed downstream.

    rho is the rate sensitivity dV/dr; it doubles as the linear response of
    the price to a rate perturbation, which is what the Monte Carlo
    cross-check of the fluctuation variance leans on.
    """

    price: float
    delta: float
    gamma: float
    rho: float


def norm_cdf(x):
    """Standard normal CDF, scalar or ndarray.

    erf-based; absolute error <= 1e-15, relative accuracy preserved in the
    lower tail (norm_cdf(-8) ~ 6.2e-16 is exact to machine precision).
    """
    return ndtr(x)


def norm_pdf(x):
    """Standard normal density, scalar or ndarray."""
    return np.exp(-0.5 * np.square(x)) / _SQRT_2PI


def _d12(spot, strike, rate, vol, tau):
    # callers guarantee tau > 0
    srt = vol * np.sqrt(tau)
    d1 = (np.log(spot / strike) + (rate + 0.5 * vol * vol) * tau) / srt
    return d1, d1 - srt


def bs_call(mp: MarketParams) -> GreeksRecord:
    """Price, delta, gamma and rho of a European call.

    At tau = 0 the record degenerates to the payoff: price = max(S - K, 0),
    delta = 1 / 0.5 / 0 for S above / at / below the strike (the symmetric
    subgradient convention at the kink), gamma = rho = 0.
    """
    S, K, r, sig, tau = mp.spot, mp.strike, mp.rate, mp.volatility, mp.tau
    if tau == 0.0:
        if S > K:
            delta = 1.0
        elif S < K:
            delta = 0.0
        else:
            delta = 0.5
        return GreeksRecord(price=max(S - K, 0.0), delta=delta, gamma=0.0, rho=0.0)
    d1, d2 = _d12(S, K, r, sig, tau)
    disc = math.exp(-r * tau)
    nd1 = float(ndtr(d1))
    nd2 = float(ndtr(d2))
    price = S * nd1 - K * disc * nd2
    gamma = float(norm_pdf(d1)) / (S * sig * math.sqrt(tau))
    rho = K * tau * disc * nd2
    return GreeksRecord(price=max(price, 0.0), delta=nd1, gamma=gamma, rho=rho)


def source_term(mp: MarketParams) -> float:
    """Cash-delta residual S dV/dS - V.

    For a call this collapses to K e^{-r tau} Phi(d2) (verified against the
    direct S*delta - price evaluation in the tests).  It is the factor that
    multiplies a rate perturbation in the valuation PDE, hence the source of
    every fluctuation statistic in this package.
    """
    g = bs_call(mp)
    return mp.spot * g.delta - g.price


def green_function(spot: float, spot1: float, tau: float, tau1: float,
                   mp: MarketParams) -> float:
    """Pricing kernel G(S, S1; tau, tau1) of the valuation PDE.

    Propagates a value slice at remaining-life fraction tau1 to tau > tau1:
    V(tau, S) = integral G(S, S1, tau, tau1) V(tau1, S1) dS1.  Lognormal
    density in S1 centred at ln S + (r - sigma^2/2)(tau - tau1), variance
    sigma^2 (tau - tau1), discounted by e^{-r (tau - tau1)}.

    Raises ParameterError when tau1 >= tau (kernel is singular at
    coincident times) or when either price argument is non-positive.
    """
    if not (spot > 0.0 and spot1 > 0.0):
        raise ParameterError("green_function needs positive prices")
    if not (0.0 <= tau1 < tau):
        raise ParameterError(
            f"green_function needs 0 <= tau1 < tau, got tau1={tau1}, tau={tau}"
        )
    r, sig = mp.rate, mp.volatility
    dt = tau - tau1
    s = sig * math.sqrt(dt)
    z = (math.log(spot / spot1) + (r - 0.5 * sig * sig) * dt) / s
    return math.exp(-r * dt) * math.exp(-0.5 * z * z) / (spot1 * s * _SQRT_2PI)


def _call_price_raw(spot: float, strike: float, rate: float, vol: float,
                    tau: float) -> float:
    """Call price without parameter validation.

    Exists for the per-path Monte Carlo reduction, where the path-averaged
    rate may be negative, and for root-finder inner loops.  The formula is
    well defined for any real rate.
    """
    if tau == 0.0:
        return max(spot - strike, 0.0)
    d1, d2 = _d12(spot, strike, rate, vol, tau)
    return spot * float(ndtr(d1)) - strike * math.exp(-rate * tau) * float(ndtr(d2))


# Vectorized helpers shared by the PDE and quadrature modules.  They take the
# curve arguments explicitly so a single MarketParams can be swept in S and tau.

def call_price_curve(spot: np.ndarray, tau: float, mp: MarketParams) -> np.ndarray:
    """Call price on an array of spots at one time level."""
    spot = np.asarray(spot, dtype=float)
    if tau == 0.0:
        return np.maximum(spot - mp.strike, 0.0)
    d1, d2 = _d12(spot, mp.strike, mp.rate, mp.volatility, tau)
    return spot * ndtr(d1) - mp.strike * math.exp(-mp.rate * tau) * ndtr(d2)


def source_curve(spot: np.ndarray, tau: float, mp: MarketParams) -> np.ndarray:
    """Cash-delta residual on an array of spots at one time level."""
    spot = np.asarray(spot, dtype=float)
    K = mp.strike
    if tau == 0.0:
        out = np.where(spot > K, K, 0.0)
        return np.where(spot == K, 0.5 * K, out)
    _, d2 = _d12(spot, K, mp.rate, mp.volatility, tau)
    return K * math.exp(-mp.rate * tau) * ndtr(d2)
