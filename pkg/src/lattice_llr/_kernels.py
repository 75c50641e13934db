"""Hot loops: the lattice sweep and the local design sums.

Each kernel has a numba implementation and a pure-numpy twin. The public
dispatchers at the bottom pick one according to ``_accel.get_backend()``.
Both paths visit data in the same logical order; they agree to rounding.
"""

import math
from functools import lru_cache

import numpy as np

from . import _accel
from ._accel import njit

GAUSSIAN, EPANECHNIKOV, UNIFORM = 0, 1, 2
KERNEL_CODES = {"gaussian": GAUSSIAN, "epanechnikov": EPANECHNIKOV, "uniform": UNIFORM}

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


# --------------------------------------------------------------------------
# univariate kernels
# --------------------------------------------------------------------------

def univariate_kernel(u, code):
    u = np.asarray(u, dtype=np.float64)
    if code == GAUSSIAN:
        return _INV_SQRT_2PI * np.exp(-0.5 * u * u)
    inside = np.abs(u) <= 1.0
    if code == EPANECHNIKOV:
        return np.where(inside, 0.75 * (1.0 - u * u), 0.0)
    if code == UNIFORM:
        return np.where(inside, 0.5, 0.0)
    raise ValueError(f"unknown kernel code {code}")


@njit(cache=True, nogil=True)
def _k1_nb(u, code):
    if code == 0:
        return 0.3989422804014327 * math.exp(-0.5 * u * u)
    if abs(u) > 1.0:
        return 0.0
    if code == 1:
        return 0.75 * (1.0 - u * u)
    return 0.5


# --------------------------------------------------------------------------
# lattice sweeps
# --------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _sweep_raster_nb(F, noise):
    H, W = F.shape
    for i in range(H):
        for j in range(W):
            s = 0.0
            if i > 0:
                s += F[i - 1, j]
            if j > 0:
                s += F[i, j - 1]
            if i + 1 < H:
                s += F[i + 1, j]
            if j + 1 < W:
                s += F[i, j + 1]
            F[i, j] = math.sin(s) + noise[i, j]


@lru_cache(maxsize=16)
def _antidiagonals(H, W):
    out = []
    for k in range(H + W - 1):
        ii = np.arange(max(0, k - W + 1), min(H - 1, k) + 1)
        out.append((ii, k - ii))
    return tuple(out)


def _sweep_raster_np(F, noise):
    # Raster order only reads updated values from (i-1, j) and (i, j-1), which
    # both lie on the previous anti-diagonal, so a wavefront sweep is equivalent.
    H, W = F.shape
    P = np.zeros((H + 2, W + 2))
    P[1:-1, 1:-1] = F
    for ii, jj in _antidiagonals(H, W):
        s = P[ii, jj + 1] + P[ii + 1, jj]
        s += P[ii + 2, jj + 1]
        s += P[ii + 1, jj + 2]
        P[ii + 1, jj + 1] = np.sin(s) + noise[ii, jj]
    F[...] = P[1:-1, 1:-1]


def _sweep_checkerboard(F, noise):
    H, W = F.shape
    P = np.zeros((H + 2, W + 2))
    P[1:-1, 1:-1] = F
    parity = np.add.outer(np.arange(H), np.arange(W)) % 2
    for color in (0, 1):
        mask = parity == color
        s = P[:-2, 1:-1] + P[1:-1, :-2]
        s += P[2:, 1:-1]
        s += P[1:-1, 2:]
        inner = P[1:-1, 1:-1]
        inner[mask] = np.sin(s[mask]) + noise[mask]
    F[...] = P[1:-1, 1:-1]


# --------------------------------------------------------------------------
# local design sums
# --------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _design_sums_nb(X, Y, P, b, code, norm):
    n, d = X.shape
    m = P.shape[0]
    U = np.zeros((m, d + 1, d + 1))
    V = np.zeros((m, d + 1))
    count = np.zeros(m, dtype=np.int64)
    z = np.empty(d + 1)
    z[0] = 1.0
    for p in range(m):
        for j in range(n):
            w = 1.0
            for k in range(d):
                u = (X[j, k] - P[p, k]) / b
                z[k + 1] = u
                w *= _k1_nb(u, code)
                if w == 0.0:
                    break
            if w > 0.0:
                count[p] += 1
                for i in range(d + 1):
                    V[p, i] += Y[j] * z[i] * w
                    for l in range(i, d + 1):
                        U[p, i, l] += z[i] * z[l] * w
        for i in range(d + 1):
            V[p, i] *= norm
            for l in range(i, d + 1):
                U[p, i, l] *= norm
                U[p, l, i] = U[p, i, l]
    return U, V, count


def _design_sums_np(X, Y, P, b, code, norm, chunk=256):
    n, d = X.shape
    m = P.shape[0]
    U = np.zeros((m, d + 1, d + 1))
    V = np.zeros((m, d + 1))
    count = np.zeros(m, dtype=np.int64)
    for lo in range(0, m, chunk):
        hi = min(lo + chunk, m)
        scaled = (X[None, :, :] - P[lo:hi, None, :]) / b
        w = np.prod(univariate_kernel(scaled, code), axis=2)
        count[lo:hi] = np.count_nonzero(w > 0.0, axis=1)
        z = [np.ones_like(w)] + [scaled[:, :, k] for k in range(d)]
        for i in range(d + 1):
            V[lo:hi, i] = (Y[None, :] * z[i] * w).sum(axis=1) * norm
            for l in range(i, d + 1):
                U[lo:hi, i, l] = (z[i] * z[l] * w).sum(axis=1) * norm
                U[lo:hi, l, i] = U[lo:hi, i, l]
    return U, V, count


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

def sweep_once(F, noise, order="raster"):
    """Apply one in-place update pass to ``F``."""
    if order == "checkerboard":
        _sweep_checkerboard(F, noise)
    elif order != "raster":
        raise ValueError(f"unknown sweep order {order!r}")
    elif _accel.get_backend() == "numba":
        _sweep_raster_nb(F, noise)
    else:
        _sweep_raster_np(F, noise)


def design_sums(X, Y, P, b, code, norm):
    """Normalized weighted sums for local-linear fits at every row of ``P``.

    Returns ``(U, V, count)`` with shapes ``(m, d+1, d+1)``, ``(m, d+1)``
    and ``(m,)``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    P = np.ascontiguousarray(P, dtype=np.float64)
    if _accel.get_backend() == "numba":
        return _design_sums_nb(X, Y, P, float(b), int(code), float(norm))
    return _design_sums_np(X, Y, P, float(b), int(code), float(norm))
