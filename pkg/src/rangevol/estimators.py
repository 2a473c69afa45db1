"""Volatility estimators built on daily open/high/low/close bars.

The main estimator matches two sample moments of each trading day, the
mean log range k1 and the mean open-to-close log return k2, to the
expected range of a drifted Brownian motion over the trading session:

    k1 = h(k2 / x, x^2 / k2),

where x is the session volatility.  x^2 plus the sample variance of the
overnight returns is the variance of one full day.  Close-to-open,
Rogers-Satchell and Yang-Zhang variances are computed for comparison.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import erf

from .errors import InfeasibleMoments, InsufficientData, NoConvergence, ValidationError

TRADING_DAYS = 252
DEFAULT_WINDOW = 63
SOLVER_TOL = 1e-12
SOLVER_MAX_ITER = 200
DRIFTLESS_RATIO = 1e-8

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class OhlcBar:
    """One trading day: open, high, low and close prices."""

    date: dt.date
    open: float
    high: float
    low: float
    close: float

    def __post_init__(self):
        problem = bar_problem(self)
        if problem:
            raise ValidationError(f"{self.date}: {problem}")


def bar_problem(bar) -> str | None:
    """Describe why a bar is invalid, or return None."""
    prices = (bar.open, bar.high, bar.low, bar.close)
    if not all(math.isfinite(v) for v in prices):
        return "prices must be finite"
    if bar.low <= 0:
        return "prices must be positive"
    if bar.low > min(bar.open, bar.close):
        return "low exceeds open or close"
    if bar.high < max(bar.open, bar.close):
        return "high is below open or close"
    return None


@dataclass(frozen=True)
class MomentInputs:
    k1: float
    k2: float
    n: int


@dataclass(frozen=True)
class VolEstimate:
    """Variances are per one-day period; sigma fields are annualized."""

    v_intraday: float
    v_overnight: float
    v_overnight_noncentered: float
    v_close_open: float
    v_rs: float
    v_yz: float
    v_z: float
    sigma_annual: float
    sigma_annual_intraday: float
    sigma_annual_yz: float
    k1: float
    k2: float
    n: int


def _check(bars: Sequence[OhlcBar], minimum: int) -> None:
    if len(bars) < minimum:
        raise InsufficientData(f"need at least {minimum} bars, got {len(bars)}")
    for i, bar in enumerate(bars):
        problem = bar_problem(bar)
        if problem:
            raise ValidationError(f"bar {i} ({bar.date}): {problem}")


def _columns(bars: Sequence[OhlcBar]):
    arr = np.array([(b.open, b.high, b.low, b.close) for b in bars], dtype=float)
    return arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]


def compute_moments(bars: Sequence[OhlcBar]) -> MomentInputs:
    """Sample means of log(H/L) and log(C/O)."""
    _check(bars, 2)
    o, h, l, c = _columns(bars)
    return MomentInputs(float(np.mean(np.log(h / l))), float(np.mean(np.log(c / o))), len(bars))


def _session_range(drift: float, x: float) -> float:
    """Expected range over one session with drift ``drift`` > 0 and volatility ``x``."""
    z = drift / x
    return (drift + x * x / drift) * float(erf(z / math.sqrt(2.0))) + 2.0 * x * math.exp(-0.5 * z * z) / _SQRT_2PI


def solve_intraday_vol(m: MomentInputs, tol: float = SOLVER_TOL, max_iter: int = SOLVER_MAX_ITER) -> float:
    """Solve the moment equation for the session volatility x.

    The expected range is even in the drift, so only |k2| enters and the
    answer is identical for k2 and -k2.  The root is bracketed in
    [1e-12 k1, k1] and found by secant steps, with a bisection whenever a
    step fails to halve the bracket.
    """
    k1 = float(m.k1)
    drift = abs(float(m.k2))
    if not (math.isfinite(k1) and math.isfinite(drift)):
        raise InfeasibleMoments("moments must be finite")
    if k1 <= drift:
        raise InfeasibleMoments(f"k1={k1!r} must exceed |k2|={drift!r}")
    if drift < DRIFTLESS_RATIO * k1:
        return k1 * _SQRT_2PI / 4.0

    def g(x):
        return _session_range(drift, x) - k1

    lo, hi = 1e-12 * k1, k1
    g_lo, g_hi = g(lo), g(hi)
    target = tol * k1
    width = hi - lo
    for _ in range(max_iter):
        x = hi - g_hi * (hi - lo) / (g_hi - g_lo)
        if not lo < x < hi:
            x = 0.5 * (lo + hi)
        gx = g(x)
        if abs(gx) <= target:
            return x
        if gx < 0:
            lo, g_lo = x, gx
        else:
            hi, g_hi = x, gx
        if hi - lo > 0.5 * width:
            x = 0.5 * (lo + hi)
            gx = g(x)
            if abs(gx) <= target:
                return x
            if gx < 0:
                lo, g_lo = x, gx
            else:
                hi, g_hi = x, gx
        width = hi - lo
    raise NoConvergence(f"no root within {max_iter} iterations (k1={k1!r}, k2={m.k2!r})")


def overnight_returns(bars: Sequence[OhlcBar]) -> np.ndarray:
    """log(O_{i+1} / C_i) for consecutive bars."""
    o, _, _, c = _columns(bars)
    return np.log(o[1:] / c[:-1])


def overnight_variance(bars: Sequence[OhlcBar], centered: bool = True) -> float:
    """Sample variance of overnight returns (divisor n-2 over n-1 returns), or their mean square."""
    _check(bars, 3)
    ret = overnight_returns(bars)
    if centered:
        return float(np.var(ret, ddof=1))
    return float(np.mean(ret * ret))


def close_open_variance(bars: Sequence[OhlcBar]) -> float:
    """Sample variance of log(C/O) with divisor n-1."""
    _check(bars, 2)
    o, _, _, c = _columns(bars)
    return float(np.var(np.log(c / o), ddof=1))


def rogers_satchell(bars: Sequence[OhlcBar]) -> float:
    """Mean of u(u - c) + d(d - c) with u, d, c the high, low and close log-ratios to the open."""
    _check(bars, 1)
    o, h, l, c = _columns(bars)
    u = np.log(h / o)
    d = np.log(l / o)
    cc = np.log(c / o)
    return float(np.mean(u * (u - cc) + d * (d - cc)))


def yang_zhang_weight(n: int) -> float:
    """Minimum-variance weight 0.34 / (1.34 + (n+1)/(n-1))."""
    return 0.34 / (1.34 + (n + 1) / (n - 1))


def yang_zhang(bars: Sequence[OhlcBar], k: float | None = None) -> float:
    """V0 + k V_C + (1 - k) V_RS."""
    _check(bars, 3)
    if k is None:
        k = yang_zhang_weight(len(bars))
    return overnight_variance(bars) + k * close_open_variance(bars) + (1.0 - k) * rogers_satchell(bars)


def estimate(bars: Sequence[OhlcBar], annualization: int = TRADING_DAYS,
             yz_k: float | None = None) -> VolEstimate:
    """All estimators over one sample of bars."""
    _check(bars, 3)
    m = compute_moments(bars)
    x = solve_intraday_vol(m)
    v_i = x * x
    v0 = overnight_variance(bars)
    v_z = v0 + v_i
    v_yz = yang_zhang(bars, yz_k)
    return VolEstimate(
        v_intraday=v_i,
        v_overnight=v0,
        v_overnight_noncentered=overnight_variance(bars, centered=False),
        v_close_open=close_open_variance(bars),
        v_rs=rogers_satchell(bars),
        v_yz=v_yz,
        v_z=v_z,
        sigma_annual=math.sqrt(annualization * v_z),
        sigma_annual_intraday=x * math.sqrt(annualization),
        sigma_annual_yz=math.sqrt(annualization * max(v_yz, 0.0)),
        k1=m.k1,
        k2=m.k2,
        n=m.n,
    )


def rolling_estimate(bars: Sequence[OhlcBar], window: int = DEFAULT_WINDOW,
                     annualization: int = TRADING_DAYS,
                     yz_k: float | None = None) -> list[tuple[dt.date, VolEstimate]]:
    """Estimates over every trailing window of ``window`` bars, keyed by the window's last date."""
    if window < 3:
        raise InsufficientData("window must be at least 3 bars")
    if len(bars) < window:
        raise InsufficientData(f"window of {window} bars exceeds the {len(bars)} available")
    return [(bars[end - 1].date, estimate(bars[end - window:end], annualization, yz_k))
            for end in range(window, len(bars) + 1)]
