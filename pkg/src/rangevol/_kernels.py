"""Compiled path kernels for the Monte Carlo oracle.

Random numbers come from xoshiro256** streams keyed by (seed, path, stream),
so every path is reproducible on its own and independent of evaluation order.
Normals are drawn with a 128-layer ziggurat.
"""

import math

import numpy as np
from numba import njit, uint64

# ziggurat tables
_ZIG_C = 128
_ZIG_R = 3.442619855899
_ZIG_V = 9.91256303526217e-3


def _build_ziggurat():
    x = np.zeros(_ZIG_C + 1)
    f = math.exp(-0.5 * _ZIG_R * _ZIG_R)
    x[0] = _ZIG_V / f
    x[1] = _ZIG_R
    for i in range(2, _ZIG_C):
        prev = x[i - 1]
        x[i] = math.sqrt(-2.0 * math.log(_ZIG_V / prev + math.exp(-0.5 * prev * prev)))
    x[_ZIG_C] = 0.0
    ratio = x[1:] / x[:-1]
    return x, ratio


ZIG_X, ZIG_RATIO = _build_ziggurat()

# P(Z > R); the base strip's tail is sampled by inversion, which keeps the
# hot loop free of nested loops (numba compiles those far slower here)
_TAIL_MASS = 0.5 * math.erfc(_ZIG_R / math.sqrt(2.0))
# rational approximation to the lower-tail normal quantile (Acklam)
_QC = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
       -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_QD = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
       3.754408661907416e+00)

_GOLDEN = uint64(0x9E3779B97F4A7C15)
_MIX1 = uint64(0xBF58476D1CE4E5B9)
_MIX2 = uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0

COARSE_STREAM = 0xFFFFFFFF
GAP_STREAM = 0xFFFFFFFE


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << uint64(k)) | (x >> uint64(64 - k))


@njit(cache=True, inline="always")
def _splitmix(x):
    z = x + _GOLDEN
    z = (z ^ (z >> uint64(30))) * _MIX1
    z = (z ^ (z >> uint64(27))) * _MIX2
    return z ^ (z >> uint64(31))


@njit(cache=True)
def seed_stream(seed, path, stream, state):
    """Fill ``state`` (4 x uint64) with the xoshiro state for one stream."""
    key = _splitmix(_splitmix(uint64(seed)) ^ uint64(path))
    key = _splitmix(key ^ (uint64(stream) * _GOLDEN))
    for i in range(4):
        key = _splitmix(key + uint64(i))
        state[i] = key
    if state[0] == 0 and state[1] == 0 and state[2] == 0 and state[3] == 0:
        state[0] = _GOLDEN


@njit(cache=True, inline="always")
def _next(state):
    s0 = state[0]
    s1 = state[1]
    s2 = state[2]
    s3 = state[3]
    result = _rotl(s1 * uint64(5), 7) * uint64(9)
    t = s1 << uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3
    return result


@njit(cache=True, inline="always")
def next_uniform(state):
    """Uniform on [0, 1) with 53 random bits."""
    return float(_next(state) >> uint64(11)) * _INV53


@njit(cache=True, inline="always")
def _lower_quantile(p):
    """Normal quantile for 0 < p < 0.0243, polished by one Halley step."""
    q = math.sqrt(-2.0 * math.log(p))
    x = ((((((_QC[0] * q + _QC[1]) * q + _QC[2]) * q + _QC[3]) * q + _QC[4]) * q + _QC[5])
         / ((((_QD[0] * q + _QD[1]) * q + _QD[2]) * q + _QD[3]) * q + 1.0))
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    step = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - step / (1.0 + 0.5 * x * step)


@njit(cache=True, inline="always")
def next_normal(state, zx, zr):
    while True:
        bits = _next(state)
        u = 2.0 * (float(bits >> uint64(11)) * _INV53) - 1.0
        i = int(bits & uint64(0x7F))
        if abs(u) < zr[i]:
            return u * zx[i]
        if i == 0:
            z = _lower_quantile((1.0 - next_uniform(state)) * _TAIL_MASS)
            return z if u < 0.0 else -z
        x = u * zx[i]
        f0 = math.exp(-0.5 * (zx[i] * zx[i] - x * x))
        f1 = math.exp(-0.5 * (zx[i + 1] * zx[i + 1] - x * x))
        if f1 + next_uniform(state) * (f0 - f1) < 1.0:
            return x


@njit(cache=True)
def fill_normals(seed, path, stream, out, zx, zr):
    state = np.empty(4, dtype=np.uint64)
    seed_stream(seed, path, stream, state)
    for i in range(out.shape[0]):
        out[i] = next_normal(state, zx, zr)


@njit(cache=True)
def _bridge_block(seed, path, k, u, v, length, sd, sign, bridge_scale, state, zx, zr):
    """Interior extremes of a discrete Brownian bridge from u to v over ``length`` steps."""
    seed_stream(seed, path, k, state)
    x = u
    hi = -np.inf
    lo = np.inf
    for i in range(1, length):
        rem = length - i + 1
        x = x + (v - x) / rem + sd * bridge_scale[rem] * sign * next_normal(state, zx, zr)
        if x > hi:
            hi = x
        if x < lo:
            lo = x
    return hi, lo


@njit(cache=True)
def path_extremes(seed, first_path, n_paths, mu, sigma, t, n_steps, block,
                  eps, prune, antithetic, out_x, out_max, out_min, zx, zr):
    """Terminal value, maximum and minimum of grid-sampled drifted Brownian paths.

    A path is built in two passes: the walk sampled every ``block`` steps, then
    the interior of each block as a discrete Brownian bridge between its
    endpoints.  Each block draws from its own stream, so the grid values do
    not depend on which blocks get filled in.

    With ``prune`` a block is left unfilled when a union Gaussian bound puts
    the chance that any interior point beats the running extreme below
    ``eps``; interior points have mean below max(u, v) and standard deviation
    below half the block's endpoint-to-endpoint deviation.
    """
    dt = t / n_steps
    sd = sigma * math.sqrt(dt)
    drift = mu * dt
    nb = (n_steps + block - 1) // block
    coarse = np.empty(nb + 1)
    bmax = np.empty(nb)
    bmin = np.empty(nb)
    done = np.zeros(nb, dtype=np.bool_)
    bridge_scale = np.empty(block + 2)
    bridge_scale[0] = 0.0
    for rem in range(1, block + 2):
        bridge_scale[rem] = math.sqrt((rem - 1.0) / rem)
    zcut = 0.0
    if block > 1:
        zcut = -_lower_quantile(eps / (block - 1.0))
    margin = zcut * 0.5 * sd * math.sqrt(block)
    state = np.empty(4, dtype=np.uint64)

    for j in range(n_paths):
        path = first_path + j
        stream_path = path
        sign = 1.0
        if antithetic:
            stream_path = path - (path % 2)
            if path % 2 == 1:
                sign = -1.0
        seed_stream(seed, stream_path, COARSE_STREAM, state)
        coarse[0] = 0.0
        hi = 0.0
        lo = 0.0
        for k in range(nb):
            length = min(block, n_steps - k * block)
            z = next_normal(state, zx, zr)
            coarse[k + 1] = coarse[k] + drift * length + sd * math.sqrt(length) * sign * z
            if coarse[k + 1] > hi:
                hi = coarse[k + 1]
            if coarse[k + 1] < lo:
                lo = coarse[k + 1]
            done[k] = False

        if block > 1:
            for k in range(nb):
                u = coarse[k]
                v = coarse[k + 1]
                if prune and hi - max(u, v) > margin:
                    continue
                length = min(block, n_steps - k * block)
                bmax[k], bmin[k] = _bridge_block(seed, stream_path, k, u, v, length, sd,
                                                 sign, bridge_scale, state, zx, zr)
                done[k] = True
                if bmax[k] > hi:
                    hi = bmax[k]
                if bmin[k] < lo:
                    lo = bmin[k]
            for k in range(nb):
                u = coarse[k]
                v = coarse[k + 1]
                if prune and min(u, v) - lo > margin:
                    continue
                if not done[k]:
                    length = min(block, n_steps - k * block)
                    bmax[k], bmin[k] = _bridge_block(seed, stream_path, k, u, v, length, sd,
                                                     sign, bridge_scale, state, zx, zr)
                    done[k] = True
                    if bmin[k] < lo:
                        lo = bmin[k]

        out_x[j] = coarse[nb]
        out_max[j] = hi
        out_min[j] = lo


@njit(cache=True)
def gap_increments(seed, first_path, n_paths, mean, sd, out, zx, zr):
    """One normal increment per path from a dedicated stream (after-hours moves)."""
    state = np.empty(4, dtype=np.uint64)
    for j in range(n_paths):
        seed_stream(seed, first_path + j, GAP_STREAM, state)
        out[j] = mean + sd * next_normal(state, zx, zr)
