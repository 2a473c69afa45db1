"""Black-Scholes valuation of European calls."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate
from scipy.special import ndtr

from .errors import ParameterError

INTRINSIC_LIMIT = 1e-12
TRADING_DAYS = 252


@dataclass(frozen=True)
class PricingInputs:
    """Spot, strike, continuously compounded rate per year, volatility per sqrt(year), years to expiry."""

    spot: float
    strike: float
    rate: float
    vol: float
    tau: float

    def __post_init__(self):
        for name in ("spot", "strike", "rate", "vol", "tau"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if self.spot <= 0 or self.strike <= 0:
            raise ParameterError("spot and strike must be positive")
        if self.vol <= 0:
            raise ParameterError("vol must be positive")
        if self.tau < 0:
            raise ParameterError("tau must be nonnegative")


def bs_call(q: PricingInputs) -> float:
    """S Phi(d1) - K exp(-r tau) Phi(d2).

    When vol * sqrt(tau) is below 1e-12 the price is the discounted forward
    intrinsic value max(S - K exp(-r tau), 0), which is the limit of the
    formula and equals max(S - K, 0) at expiry.
    """
    discounted = q.strike * math.exp(-q.rate * q.tau)
    width = q.vol * math.sqrt(q.tau)
    if width < INTRINSIC_LIMIT:
        return max(q.spot - discounted, 0.0)
    d1 = (math.log(q.spot / q.strike) + (q.rate + 0.5 * q.vol * q.vol) * q.tau) / width
    d2 = d1 - width
    price = q.spot * float(ndtr(d1)) - discounted * float(ndtr(d2))
    return min(max(price, q.spot - discounted, 0.0), q.spot)


def _lognormal_expectation(q: PricingInputs, payoff) -> float:
    """exp(-r tau) E[payoff(S_T)] by quadrature over the standard normal driver."""
    width = q.vol * math.sqrt(q.tau)
    drift = math.log(q.spot) + (q.rate - 0.5 * q.vol * q.vol) * q.tau
    z_star = (math.log(q.strike) - drift) / width

    def integrand(z):
        return payoff(math.exp(drift + width * z)) * math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)

    lo, hi = min(-12.0, z_star - 1.0), max(12.0, z_star + 1.0)
    left, _ = integrate.quad(integrand, lo, z_star, epsabs=1e-11, epsrel=1e-12, limit=200)
    right, _ = integrate.quad(integrand, z_star, hi, epsabs=1e-11, epsrel=1e-12, limit=200)
    return math.exp(-q.rate * q.tau) * (left + right)


def call_by_quadrature(q: PricingInputs) -> float:
    """Discounted expected call payoff under the lognormal terminal law."""
    return _lognormal_expectation(q, lambda s: max(s - q.strike, 0.0))


def put_by_quadrature(q: PricingInputs) -> float:
    """Discounted expected put payoff under the lognormal terminal law."""
    return _lognormal_expectation(q, lambda s: max(q.strike - s, 0.0))


def year_fraction(trading_days: int, days_per_year: int = TRADING_DAYS) -> float:
    """Years to expiry counted in trading days."""
    if trading_days < 0:
        raise ParameterError("trading_days must be nonnegative")
    return trading_days / days_per_year


def continuous_rate(quoted: float, mode: str = "quoted") -> float:
    """Rate used in the formula: the quoted yield as is, or log(1 + y) in ``"log"`` mode."""
    if mode == "quoted":
        return quoted
    if mode == "log":
        if quoted <= -1:
            raise ParameterError("yield must exceed -1")
        return math.log1p(quoted)
    raise ParameterError(f"unknown rate mode {mode!r}")
