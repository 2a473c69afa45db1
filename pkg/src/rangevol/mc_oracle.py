"""Seeded Monte Carlo simulation of Brownian paths and synthetic OHLC bars.

Paths live on the grid j * dt, dt = t / n_steps, and their extremes are
taken over grid points, so simulated maxima sit below the continuous ones
by about 0.5826 sigma sqrt(dt).  ``extreme_correction`` shifts each
extreme outward by that amount.

Each path draws from its own xoshiro256** streams keyed by (seed, path), so
any path can be regenerated alone and results do not depend on how paths
are split into batches.  A path is generated as a coarse walk plus
Brownian bridges between coarse points.  Bridges that cannot reach the
running extreme except with probability below ``eps`` are skipped, which
changes nothing except run time.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels as K
from .abm_range import AbmParams
from .errors import BudgetError, InsufficientData, ParameterError
from .estimators import OhlcBar

# -zeta(1/2) / sqrt(2 pi): mean gap between the continuous and grid maximum in units of sigma sqrt(dt)
EXTREME_BETA = 0.5825971579390106
DEFAULT_STEPS = 10_000
DEFAULT_BUDGET = 1e11


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``steps_per_unit`` grid steps per unit of time; ``f`` is the after-hours
    fraction of a one-day period used by :func:`simulate_ohlc`; ``block`` is
    the coarse-walk spacing (None picks one from the step count);
    ``max_work`` caps paths times steps.
    """

    n_paths: int = 1
    seed: int = 0
    steps_per_unit: int = DEFAULT_STEPS
    f: float = 0.0
    antithetic: bool = False
    extreme_correction: bool = False
    block: int | None = None
    eps: float = 1e-12
    max_work: float = DEFAULT_BUDGET

    def __post_init__(self):
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ParameterError("n_paths must be a positive integer")
        if int(self.steps_per_unit) != self.steps_per_unit or self.steps_per_unit < 1:
            raise ParameterError("steps_per_unit must be a positive integer")
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        if not 0.0 <= self.f < 1.0:
            raise ParameterError("f must lie in [0, 1)")
        if self.block is not None and self.block < 1:
            raise ParameterError("block must be positive")
        if not 0.0 < self.eps < 1e-3:
            raise ParameterError("eps must lie in (0, 1e-3)")
        if self.antithetic and self.n_paths % 2:
            raise ParameterError("antithetic sampling needs an even number of paths")


@dataclass(frozen=True)
class PathExtremes:
    """Terminal value, maximum and minimum of each simulated path."""

    terminal: np.ndarray
    maximum: np.ndarray
    minimum: np.ndarray

    @property
    def range(self) -> np.ndarray:
        return self.maximum - self.minimum

    def __len__(self) -> int:
        return len(self.terminal)


def n_grid_steps(steps_per_unit: int, horizon: float) -> int:
    return max(1, int(round(steps_per_unit * horizon)))


def extreme_shift(sigma: float, horizon: float, n_steps: int) -> float:
    """Mean amount by which a grid extreme falls short of the continuous one."""
    return EXTREME_BETA * sigma * math.sqrt(horizon / n_steps)


def _auto_block(n_steps: int) -> int:
    return max(1, int(round(0.1 * math.sqrt(n_steps))))


def _grid_extremes(mu, sigma, horizon, n_steps, cfg: SimConfig, first_path: int, n_paths: int):
    work = float(n_paths) * n_steps
    if work > cfg.max_work:
        raise BudgetError(f"{n_paths} paths x {n_steps} steps exceeds the budget of {cfg.max_work:g}")
    block = cfg.block if cfg.block is not None else _auto_block(n_steps)
    block = min(block, n_steps)
    x = np.empty(n_paths)
    hi = np.empty(n_paths)
    lo = np.empty(n_paths)
    K.path_extremes(np.uint64(cfg.seed), first_path, n_paths, float(mu), float(sigma), float(horizon),
                    n_steps, block, cfg.eps, True, cfg.antithetic, x, hi, lo, K.ZIG_X, K.ZIG_RATIO)
    if cfg.extreme_correction:
        shift = extreme_shift(sigma, horizon, n_steps)
        hi += shift
        lo -= shift
    return x, hi, lo


def simulate_extremes(p: AbmParams, cfg: SimConfig, first_path: int = 0) -> PathExtremes:
    """Simulate paths ``first_path`` .. ``first_path + n_paths - 1`` of X_t = mu t + sigma W_t."""
    n_steps = n_grid_steps(cfg.steps_per_unit, p.t)
    x, hi, lo = _grid_extremes(p.mu, p.sigma, p.t, n_steps, cfg, first_path, cfg.n_paths)
    return PathExtremes(x, hi, lo)


def business_days(start: dt.date, n: int) -> list[dt.date]:
    """``n`` consecutive weekdays starting at ``start`` (rolled forward)."""
    days = np.busday_offset(np.datetime64(start, "D"), np.arange(n), roll="forward")
    return [d.item() for d in days]


def simulate_ohlc(mu_s: float, sigma: float, cfg: SimConfig, n_days: int,
                  s0: float = 100.0, start: dt.date = dt.date(2000, 1, 3)) -> list[OhlcBar]:
    """Synthetic daily bars from geometric Brownian motion.

    Time is measured in one-day periods: ``mu_s`` and ``sigma`` are per day.
    The log price has drift mu_s - sigma^2/2.  Each period opens with a
    trading session of length 1 - f, whose grid maximum and minimum give the
    high and low, followed by an unobserved after-hours move of length f
    that ends at the next open.  ``cfg.n_paths`` is ignored; day i uses path
    index i.
    """
    if not (math.isfinite(mu_s) and math.isfinite(sigma)) or sigma <= 0:
        raise ParameterError("sigma must be positive and parameters finite")
    if n_days < 1:
        raise ParameterError("n_days must be positive")
    if s0 <= 0:
        raise ParameterError("s0 must be positive")
    mu = mu_s - 0.5 * sigma * sigma
    session = 1.0 - cfg.f
    n_steps = n_grid_steps(cfg.steps_per_unit, session)
    x, hi, lo = _grid_extremes(mu, sigma, session, n_steps, cfg, 0, n_days)
    gap = np.zeros(n_days)
    if cfg.f > 0:
        K.gap_increments(np.uint64(cfg.seed), 0, n_days, mu * cfg.f, sigma * math.sqrt(cfg.f),
                         gap, K.ZIG_X, K.ZIG_RATIO)
    # cumsum adds sequentially, so with a zero gap the next open's log is
    # bit-identical to this close's log
    opens = np.cumsum(np.concatenate(([math.log(s0)], x + gap)))[:-1]
    o = np.exp(opens)
    c = np.exp(opens + x)
    h = np.maximum(np.exp(opens + hi), np.maximum(o, c))
    l = np.minimum(np.exp(opens + lo), np.minimum(o, c))
    dates = business_days(start, n_days)
    return [OhlcBar(d, float(o[i]), float(h[i]), float(l[i]), float(c[i])) for i, d in enumerate(dates)]


@dataclass(frozen=True)
class EmpiricalStats:
    mean: float
    se: float
    cdf: Callable


def empirical_stats(samples: Sequence[float]) -> EmpiricalStats:
    """Sample mean, standard error sd/sqrt(n) with sd's divisor n-1, and the right-continuous ECDF."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise InsufficientData("need at least one sample")
    ordered = np.sort(x)
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0

    def cdf(v):
        out = np.searchsorted(ordered, np.asarray(v, dtype=float), side="right") / ordered.size
        return float(out) if np.ndim(out) == 0 else out

    return EmpiricalStats(float(np.mean(x)), sd / math.sqrt(x.size), cdf)


def ks_distance(samples: Sequence[float], grid: np.ndarray, model_cdf: np.ndarray) -> float:
    """Largest gap between the empirical CDF and a model CDF tabulated on ``grid``.

    Both the ECDF value and its left limit are compared at every grid
    point, so the result approaches the Kolmogorov-Smirnov statistic as the
    grid is refined.
    """
    ordered = np.sort(np.asarray(samples, dtype=float))
    grid = np.asarray(grid, dtype=float)
    n = ordered.size
    right = np.searchsorted(ordered, grid, side="right") / n
    left = np.searchsorted(ordered, grid, side="left") / n
    model = np.asarray(model_cdf, dtype=float)
    return float(max(np.max(np.abs(right - model)), np.max(np.abs(left - model))))
