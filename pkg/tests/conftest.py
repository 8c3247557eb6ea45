"""Shared fixtures and an independent pricing oracle.

The oracle below deliberately avoids scipy so that agreement between the
package and the oracle is evidence, not tautology.
"""

from math import erfc, exp, log, sqrt

import pytest
from hypothesis import HealthCheck, settings

from arbbands import ArbitrageParams, MarketParams, OrnsteinUhlenbeck, Telegraph

settings.register_profile(
    "suite",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

# Desk reference configuration used throughout the suite: at-the-money call,
# strike 20, rate 0.1, volatility 0.4, one year to expiry, noise intensity 0.1,
# scale ratio 0.1. The two noise models are intensity-matched at D = 0.1:
# OU with alpha=1, k=sqrt(0.2) (correlation time 1); telegraph with
# a=sqrt(0.2), lambda=1 (correlation time 0.5).
REF_SPOT = 20.0
REF_STRIKE = 20.0
REF_RATE = 0.1
REF_VOL = 0.4
REF_TAU = 1.0
REF_INTENSITY = 0.1
REF_EPSILON = 0.1

# sqrt(0.2): OU diffusion scale k with alpha=1 giving D = k^2/(2 alpha^2) = 0.1,
# telegraph amplitude a with lambda=1 giving D = a^2/(2 lambda) = 0.1.
NOISE_SCALE = 0.4472135954999579


def oracle_call(spot, strike, rate, vol, tau):
    """Plain-math call price; erfc-based normal CDF, no scipy."""
    if tau == 0.0:
        return max(spot - strike, 0.0)
    sq = vol * sqrt(tau)
    d1 = (log(spot / strike) + (rate + 0.5 * vol * vol) * tau) / sq
    d2 = d1 - sq
    ncdf = lambda x: 0.5 * erfc(-x / sqrt(2.0))
    return spot * ncdf(d1) - strike * exp(-rate * tau) * ncdf(d2)


def oracle_source(spot, strike, rate, vol, tau):
    """Cash-delta residual S*dV/dS - V for the call, independent route."""
    sq = vol * sqrt(tau)
    d2 = (log(spot / strike) + (rate - 0.5 * vol * vol) * tau) / sq
    return strike * exp(-rate * tau) * 0.5 * erfc(-d2 / sqrt(2.0))


@pytest.fixture(scope="session")
def ref_market():
    return MarketParams(spot=REF_SPOT, strike=REF_STRIKE, rate=REF_RATE,
                        volatility=REF_VOL, tau=REF_TAU)


@pytest.fixture(scope="session")
def ref_arbitrage():
    return ArbitrageParams(intensity=REF_INTENSITY, epsilon=REF_EPSILON)


@pytest.fixture(scope="session")
def ou_model():
    return OrnsteinUhlenbeck(mean_reversion=1.0, diffusion_scale=NOISE_SCALE)


@pytest.fixture(scope="session")
def telegraph_model():
    return Telegraph(amplitude=NOISE_SCALE, switch_rate=1.0)
