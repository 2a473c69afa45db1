"""Extremes and range of an arithmetic Brownian motion.

For X_t = mu*t + sigma*W_t started at 0, with running maximum M_t, running
minimum m_t and range R_t = M_t - m_t, this module evaluates

* the joint density of (X_t, M_t) and the density and mean of M_t - X_t,
* the expected range and its two-argument reduction ``h_moment``,
* the density of X_t killed on leaving an interval (image series),
* the joint density of (m_t, M_t) and the range density (image series),
* quadrature oracles used to cross-check the series.

Series over k = -inf..inf are summed outward from k = 0 in +/- pairs and
truncated by :class:`SeriesControl`.  Products of an exponential weight and
a normal density or a difference of normal CDFs are evaluated in log space;
the weights alone overflow for strongly drifted parameters.

Every density accepts scalars or numpy arrays and broadcasts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import erf, log_ndtr, ndtr

from .errors import DomainError, ParameterError

DRIFT_LIMIT = 1e-8
QUAD_ABS_TOL = 1e-9
WINDOW_SDS = 8.0

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)
# Interval widths below MIN_WIDTH * sigma * sqrt(t) are treated as empty.
# Staying inside such an interval has probability of order
# exp(-pi^2 sigma^2 t / (2 w^2)) < 1e-300, while the image sum there is pure
# cancellation noise.  At this width about 65 image pairs reach the
# stopping rule, well inside the default max_terms.
MIN_WIDTH = math.pi / math.sqrt(2.0 * 700.0)


@dataclass(frozen=True)
class AbmParams:
    """Drift ``mu`` per unit time, volatility ``sigma`` per sqrt(unit time), horizon ``t``."""

    mu: float
    sigma: float
    t: float

    def __post_init__(self):
        for name in ("mu", "sigma", "t"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if self.sigma <= 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        if self.t <= 0:
            raise ParameterError(f"t must be positive, got {self.t}")

    @property
    def scale(self) -> float:
        """Standard deviation of X_t."""
        return self.sigma * math.sqrt(self.t)

    @property
    def c(self) -> float:
        """Standardized drift mu*sqrt(t)/sigma."""
        return self.mu * math.sqrt(self.t) / self.sigma

    def mirrored(self) -> "AbmParams":
        """Parameters of -X, whose maximum is the minimum of X."""
        return AbmParams(-self.mu, self.sigma, self.t)


@dataclass(frozen=True)
class SeriesControl:
    """Truncation rule for the image series."""

    max_terms: int = 100
    term_tolerance: float = 1e-14
    consecutive_small: int = 3

    def __post_init__(self):
        if int(self.max_terms) != self.max_terms or self.max_terms < 1:
            raise ParameterError("max_terms must be a positive integer")
        if not self.term_tolerance > 0:
            raise ParameterError("term_tolerance must be positive")
        if int(self.consecutive_small) != self.consecutive_small or self.consecutive_small < 1:
            raise ParameterError("consecutive_small must be a positive integer")


DEFAULT_CONTROL = SeriesControl()


def _out(value):
    """Return a Python float for 0-d results, the array otherwise."""
    value = np.asarray(value, dtype=float)
    return float(value) if value.ndim == 0 else value


# ---------------------------------------------------------------------------
# stable building blocks


def _exp_phi(log_w, z):
    """exp(log_w) * phi(z)."""
    return np.exp(log_w - 0.5 * z * z - _LOG_SQRT_2PI)


def _exp_phi_diff(log_w, hi, lo):
    """exp(log_w) * (Phi(hi) - Phi(lo)) for hi >= lo, without overflow in the weight."""
    log_w, hi, lo = np.broadcast_arrays(np.asarray(log_w, float), np.asarray(hi, float),
                                        np.asarray(lo, float))
    out = np.empty(hi.shape)
    upper = lo > 0
    lower = hi < 0
    mid = ~(upper | lower)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if upper.any():
            la = log_ndtr(-lo[upper])
            lb = log_ndtr(-hi[upper])
            out[upper] = np.exp(log_w[upper] + la) * -np.expm1(lb - la)
        if lower.any():
            la = log_ndtr(hi[lower])
            lb = log_ndtr(lo[lower])
            out[lower] = np.exp(log_w[lower] + la) * -np.expm1(lb - la)
        if mid.any():
            diff = 1.0 - ndtr(-hi[mid]) - ndtr(lo[mid])
            out[mid] = np.exp(log_w[mid]) * diff
    return out


def _symmetric_series(term, ctl: SeriesControl, shape, chunk: int = 4):
    """Sum term(0) + sum_{k>=1} [term(k) + term(-k)] with the adaptive stopping rule.

    ``term`` maps an integer array of shape (m, 1, ..., 1) to values of shape
    (m, *shape).  Each point of the broadcast shape stops independently after
    ``consecutive_small`` pairs whose magnitude is at most
    ``term_tolerance`` times its running sum; no point goes past
    ``max_terms`` pairs.
    """
    pad = (1,) * len(shape)
    total = np.array(term(np.zeros((1,) + pad))[0], dtype=float)
    total = np.broadcast_to(total, shape).copy()
    run = np.zeros(shape, dtype=int)
    active = np.ones(shape, dtype=bool)
    start = 1
    while start <= ctl.max_terms and active.any():
        stop = min(start + chunk, ctl.max_terms + 1)
        ks = np.arange(start, stop, dtype=float).reshape((-1,) + pad)
        pairs = np.broadcast_to(term(ks) + term(-ks), (stop - start,) + shape)
        for row in pairs:
            total = np.where(active, total + row, total)
            small = np.abs(row) <= ctl.term_tolerance * np.abs(total)
            run = np.where(small, run + 1, 0)
            active &= run < ctl.consecutive_small
        start = stop
    return total


def _resolve_series(width, p: AbmParams, ctl: SeriesControl, term, shape):
    """Evaluate an image series, returning 0 where the interval is too narrow to matter."""
    resolvable = width / p.scale >= MIN_WIDTH
    if not resolvable.any():
        return np.zeros(shape)
    value = _symmetric_series(term, ctl, shape)
    return np.where(resolvable, value, 0.0)


# ---------------------------------------------------------------------------
# closed forms


def joint_density_max(p: AbmParams, a, b):
    """Density of (X_t, M_t) at terminal value ``a`` and maximum ``b``.

    Zero off the support {b >= 0, b >= a} by convention.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mu, s, t = p.mu, p.sigma, p.t
    u = 2.0 * b - a
    expo = -u * u / (2.0 * t * s * s) + mu * a / (s * s) - mu * mu * t / (2.0 * s * s)
    value = 2.0 * u / (s ** 3 * math.sqrt(2.0 * math.pi * t ** 3)) * np.exp(expo)
    return _out(np.where((b >= 0) & (b >= a), value, 0.0))


def _log_first_term(p: AbmParams, c):
    """Log of |2(mu/sigma^2) Phi((mu t - c)/(sigma sqrt t)) exp(-2 mu c/sigma^2)|."""
    mu, s, t = p.mu, p.sigma, p.t
    return (math.log(2.0 * abs(mu) / (s * s)) + log_ndtr((mu * t - c) / p.scale)
            - 2.0 * mu * c / (s * s))


def half_range_density(p: AbmParams, c, form: str = "plus"):
    """Density of the half-range M_t - X_t at ``c`` (zero for c < 0).

    ``form="plus"`` uses the Gaussian factor exp{-(mu t + c)^2/(2 t sigma^2)};
    ``form="minus"`` writes the same quantity as
    exp{-(mu t - c)^2/(2 t sigma^2)} exp(-2 mu c / sigma^2).
    """
    c = np.asarray(c, dtype=float)
    mu, s, t = p.mu, p.sigma, p.t
    cc = np.maximum(c, 0.0)
    if mu == 0.0:
        first = np.zeros_like(cc)
    else:
        first = math.copysign(1.0, mu) * np.exp(_log_first_term(p, cc))
    norm = 2.0 / (s * math.sqrt(2.0 * t * math.pi))
    if form == "plus":
        second = norm * np.exp(-(mu * t + cc) ** 2 / (2.0 * t * s * s))
    elif form == "minus":
        second = norm * np.exp(-(mu * t - cc) ** 2 / (2.0 * t * s * s)) * np.exp(-2.0 * mu * cc / (s * s))
    else:
        raise ParameterError(f"unknown form {form!r}")
    return _out(np.where(c >= 0, first + second, 0.0))


def half_range_mean(p: AbmParams) -> float:
    """E[M_t - X_t].

    Written with c = mu sqrt(t)/sigma as
    sigma^2/(2 mu) erf(c/sqrt 2) - mu t Phi(-c) + sigma sqrt(t) phi(c),
    which stays accurate for small drift; below the drift-limit threshold
    the mu -> 0 limit sigma sqrt(2t/pi) is returned.
    """
    c = p.c
    if abs(c) < DRIFT_LIMIT:
        return p.sigma * math.sqrt(2.0 * p.t / math.pi)
    mu, s, t = p.mu, p.sigma, p.t
    phi_c = math.exp(-0.5 * c * c) / _SQRT_2PI
    return float(s * s / (2.0 * mu) * erf(c / math.sqrt(2.0)) - mu * t * ndtr(-c)
                 + s * math.sqrt(t) * phi_c)


def h_moment(x, y):
    """h(x, y) = y [(x^2 + 1)(2 Phi(x) - 1) + 2x phi(x)]."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return _out(y * ((x * x + 1.0) * erf(x / math.sqrt(2.0))
                     + 2.0 * x * np.exp(-0.5 * x * x) / _SQRT_2PI))


def expected_range(p: AbmParams) -> float:
    """E[R_t] = h(mu sqrt(t)/sigma, sigma^2/mu), or sigma sqrt(8t/pi) in the driftless limit."""
    c = p.c
    if abs(c) < DRIFT_LIMIT:
        return p.sigma * math.sqrt(8.0 * p.t / math.pi)
    mu, s, t = p.mu, p.sigma, p.t
    phi_c = math.exp(-0.5 * c * c) / _SQRT_2PI
    return float((mu * t + s * s / mu) * erf(c / math.sqrt(2.0)) + 2.0 * s * math.sqrt(t) * phi_c)


# ---------------------------------------------------------------------------
# image series


def confined_density(p: AbmParams, x, a: float, b: float, ctl: SeriesControl = DEFAULT_CONTROL,
                     form: str = "feller"):
    """Density of X_t at ``x`` on the event that the path stays inside (a, b).

    The driftless image series is multiplied by the change-of-measure factor
    exp(mu x / sigma^2 - mu^2 t / (2 sigma^2)), so with mu = 0 this is the
    classical series exactly.  ``form`` selects the Feller or the Billingsley
    indexing; the two are the same sum.
    """
    if not a < 0 < b:
        raise DomainError(f"interval ({a}, {b}) must contain the starting point 0")
    x = np.asarray(x, dtype=float)
    if np.any((x < a) | (x > b)):
        raise DomainError("x must lie in [a, b]")
    mu, s, t = p.mu, p.sigma, p.t
    st = p.scale
    w = b - a
    shape = x.shape

    if form == "feller":
        def term(k):
            return (np.exp(-0.5 * ((2 * k * w - x) / st) ** 2)
                    - np.exp(-0.5 * ((2 * k * w - 2 * b + x) / st) ** 2))
    elif form == "billingsley":
        def term(k):
            return (np.exp(-0.5 * ((x + 2 * k * w) / st) ** 2)
                    - np.exp(-0.5 * ((2 * b - x + 2 * k * w) / st) ** 2))
    else:
        raise ParameterError(f"unknown form {form!r}")

    series = _resolve_series(np.full(shape, w), p, ctl, term, shape)
    girsanov = np.exp(mu * x / (s * s) - mu * mu * t / (2.0 * s * s))
    return _out(series / (st * _SQRT_2PI) * girsanov)


def _bracket_group(log_w, zhi, zlo, c):
    """e^{log_w} [G(zhi) - G(zlo)] with G(z) = -c^2 Phi(z) + (z + 2c) phi(z)."""
    return (-c * c * _exp_phi_diff(log_w, zhi, zlo)
            + (zhi + 2 * c) * _exp_phi(log_w, zhi) - (zlo + 2 * c) * _exp_phi(log_w, zlo))


def joint_density_max_min(p: AbmParams, a, b, ctl: SeriesControl = DEFAULT_CONTROL):
    """Joint density F(a, b) of (m_t, M_t) at minimum ``a`` < 0 < maximum ``b``.

    Each k contributes 4k(k-1) and 4k^2 groups of two Gaussian densities
    and a difference of two error functions; the error-function pair is
    evaluated as one difference of normal CDFs, which is where the constant
    halves of erf cancel.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a >= 0) or np.any(b <= 0):
        raise DomainError("need minimum a < 0 < maximum b")
    a, b = np.broadcast_arrays(a, b)
    mu, s, t = p.mu, p.sigma, p.t
    st = p.scale
    c = p.c
    mut = mu * t
    lam = mu / (s * s)

    def term(k):
        z1hi = ((2 * k - 1) * b - 2 * k * a - mut) / st
        z1lo = (2 * (k - 1) * b - (2 * k - 1) * a - mut) / st
        e1 = -lam * (2 * (k - 1) * b - 2 * k * a)
        z2hi = ((2 * k + 1) * b - 2 * k * a - mut) / st
        z2lo = (2 * k * b - (2 * k - 1) * a - mut) / st
        e2 = -lam * 2 * k * (b - a)
        g1 = _bracket_group(e1, z1hi, z1lo, c)
        g2 = _bracket_group(e2, z2hi, z2lo, c)
        return (4 * k * (k - 1) * g1 - 4 * k * k * g2) / (st * st)

    return _out(_resolve_series(b - a, p, ctl, term, a.shape))


def range_density(p: AbmParams, r, ctl: SeriesControl = DEFAULT_CONTROL, printed: bool = False):
    """Density of the range R_t at ``r`` (zero for r <= 0), as a series in I(k) and J(k).

    With K_j = (2k + j) r / (sigma sqrt t) and c = mu sqrt(t)/sigma the last
    two lines of J(k) carry a factor c/2:

        (c/2) [e^{c K_0}(Phi(K_1+c) - Phi(K_0+c)) - e^{c K_2}(Phi(K_2+c) - Phi(K_1+c))]

    This is what integrating the joint max/min density along the diagonal
    gives, and it agrees with :func:`range_density_quadrature`.  ``printed``
    replaces c/2 by 1, the coefficient in the commonly circulated statement
    of the series; that variant is only correct at mu = 0.
    """
    r = np.asarray(r, dtype=float)
    shape = r.shape
    pos = r > 0
    rr = np.where(pos, r, 1.0)
    st = p.scale
    c = p.c
    fac = 1.0 if printed else 0.5 * c
    alpha = c * c
    beta = -2.0 * c - c ** 3
    w = rr / st

    def term(k):
        k2 = (2 * k + 2) * w
        k1 = (2 * k + 1) * w
        k0 = 2 * k * w
        km = (2 * k - 1) * w
        e_m0 = -c * k0
        i_k = ((1 + c * c) * (_exp_phi(e_m0, k1 - c) - 2 * _exp_phi(e_m0, k0 - c)
                              + _exp_phi(e_m0, km - c))
               + (alpha * k1 + beta) * _exp_phi_diff(e_m0, k1 - c, k0 - c)
               - (alpha * km + beta) * _exp_phi_diff(e_m0, k0 - c, km - c))
        e_p0 = c * k0
        e_p2 = c * k2
        e_m2 = -c * k2
        j_k = (_exp_phi(e_p0, k1 + c) - _exp_phi(e_p0, k0 + c)
               - _exp_phi(e_p2, k2 + c) + _exp_phi(e_p2, k1 + c)
               - 0.5 * c * _exp_phi_diff(e_m0, k1 - c, k0 - c)
               + 0.5 * c * _exp_phi_diff(e_m2, k2 - c, k1 - c)
               + fac * (_exp_phi_diff(e_p0, k1 + c, k0 + c) - _exp_phi_diff(e_p2, k2 + c, k1 + c)))
        return (4 * k * k * i_k + 4 * k * (k + 1) * j_k) / st

    value = _resolve_series(rr, p, ctl, term, shape)
    return _out(np.where(pos, value, 0.0))


# ---------------------------------------------------------------------------
# quadrature oracles


def max_window(p: AbmParams) -> tuple[float, float]:
    """Integration window for the maximum; the drift shifts the mass by mu t."""
    return 0.0, max(0.0, p.mu * p.t) + WINDOW_SDS * p.scale


def min_window(p: AbmParams) -> tuple[float, float]:
    """Integration window for the minimum."""
    return min(0.0, p.mu * p.t) - WINDOW_SDS * p.scale, 0.0


def range_window(p: AbmParams) -> tuple[float, float]:
    """Integration window for the range."""
    return 0.0, abs(p.mu) * p.t + 2.0 * WINDOW_SDS * p.scale


def range_density_quadrature(p: AbmParams, r: float, ctl: SeriesControl = DEFAULT_CONTROL,
                             epsabs: float = 1e-12) -> float:
    """f_R(r) = integral over u in (0, r) of F(u - r, u), by adaptive quadrature."""
    r = float(r)
    if r <= 0:
        return 0.0

    def integrand(u):
        if u <= 0.0 or u >= r:
            return 0.0
        return joint_density_max_min(p, u - r, u, ctl)

    value, _ = integrate.quad(integrand, 0.0, r, epsabs=epsabs, epsrel=1e-10, limit=200)
    return float(value)


def integrate_1d(fn, lo: float, hi: float, epsabs: float = QUAD_ABS_TOL, points=None) -> float:
    """Adaptive Gauss-Kronrod integral of a scalar function on [lo, hi]."""
    value, _ = integrate.quad(fn, lo, hi, epsabs=epsabs, epsrel=1e-10, limit=500, points=points)
    return float(value)


def max_min_mass(p: AbmParams, ctl: SeriesControl = DEFAULT_CONTROL,
                 atol: float = QUAD_ABS_TOL) -> float:
    """Total mass of F(a, b) over the drift-shifted window, by 2-D adaptive cubature."""
    a_lo, _ = min_window(p)
    _, b_hi = max_window(p)

    def f(pts):
        a = pts[:, 0]
        b = pts[:, 1]
        out = np.zeros(len(pts))
        ok = (a < 0) & (b > 0)
        if ok.any():
            out[ok] = joint_density_max_min(p, a[ok], b[ok], ctl)
        return out

    res = integrate.cubature(f, [a_lo, 0.0], [0.0, b_hi], atol=atol, rtol=1e-10,
                             max_subdivisions=100000)
    return float(res.estimate)


def cumulative_integral(density, grid, nodes: int = 12) -> np.ndarray:
    """Integral of a vectorized density from grid[0] to each grid point.

    Uses fixed Gauss-Legendre rules on every grid cell, so a smooth density
    on a fine grid is integrated to near machine precision with a single
    vectorized call.
    """
    grid = np.asarray(grid, dtype=float)
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    lo = grid[:-1, None]
    half = 0.5 * np.diff(grid)[:, None]
    pts = lo + half * (xg + 1.0)
    vals = np.asarray(density(pts.ravel()), dtype=float).reshape(pts.shape)
    cells = np.sum(vals * wg, axis=1) * half[:, 0]
    return np.concatenate(([0.0], np.cumsum(cells)))
