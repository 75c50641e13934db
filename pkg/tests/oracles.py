"""Independent reference implementations used only by the tests."""

import math
from fractions import Fraction


def full_pivot_solve(A, b):
    """Gaussian elimination with full pivoting on lists of numbers."""
    n = len(A)
    M = [list(row) + [b[i]] for i, row in enumerate(A)]
    cols = list(range(n))
    for k in range(n):
        best, pr, pc = -1, k, k
        for i in range(k, n):
            for j in range(k, n):
                if abs(M[i][j]) > best:
                    best, pr, pc = abs(M[i][j]), i, j
        if best == 0:
            raise ZeroDivisionError("singular system")
        M[k], M[pr] = M[pr], M[k]
        for row in M:
            row[k], row[pc] = row[pc], row[k]
        cols[k], cols[pc] = cols[pc], cols[k]
        for i in range(k + 1, n):
            f = M[i][k] / M[k][k]
            for j in range(k, n + 1):
                M[i][j] -= f * M[k][j]
    z = [0] * n
    for i in range(n - 1, -1, -1):
        s = M[i][n] - sum(M[i][j] * z[j] for j in range(i + 1, n))
        z[i] = s / M[i][i]
    out = [0] * n
    for k in range(n):
        out[cols[k]] = z[k]
    return out


def univariate_weight(family, u):
    if family == "gaussian":
        return math.exp(-u * u / 2) / math.sqrt(2 * math.pi)
    if abs(u) > 1:
        return 0.0
    if family == "epanechnikov":
        return 0.75 * (1 - u * u)
    return 0.5


def wls_oracle(X, Y, x, b, family, exact=False):
    """Minimize sum_j w_j (Y_j - a0 - a1.(X_j - x))^2 via the normal equations.

    Works in unscaled coordinates. Returns (a0, a1 list). With ``exact`` the
    normal equations are assembled and solved in rational arithmetic
    (compact kernels only).
    """
    d = len(x)
    conv = Fraction if exact else float
    A = [[conv(0)] * (d + 1) for _ in range(d + 1)]
    r = [conv(0)] * (d + 1)
    for Xj, Yj in zip(X, Y):
        if exact:
            w = Fraction(1)
            for k in range(d):
                u = (Fraction(Xj[k]) - Fraction(x[k])) / Fraction(b)
                if abs(u) > 1:
                    w = Fraction(0)
                elif family == "epanechnikov":
                    w *= Fraction(3, 4) * (1 - u * u)
                else:
                    w *= Fraction(1, 2)
        else:
            w = 1.0
            for k in range(d):
                w *= univariate_weight(family, (Xj[k] - x[k]) / b)
        if w == 0:
            continue
        z = [conv(1)] + [conv(Xj[k]) - conv(x[k]) for k in range(d)]
        for i in range(d + 1):
            r[i] += w * z[i] * conv(Yj)
            for l in range(d + 1):
                A[i][l] += w * z[i] * z[l]
    sol = full_pivot_solve(A, r)
    return sol[0], sol[1:]


def raster_sweep_reference(F, noise):
    """One raster-order pass over nested lists, out-of-grid neighbours = 0."""
    H, W = len(F), len(F[0])

    def at(i, j):
        return F[i][j] if 0 <= i < H and 0 <= j < W else 0.0

    for i in range(H):
        for j in range(W):
            F[i][j] = math.sin(at(i - 1, j) + at(i, j - 1) + at(i + 1, j) + at(i, j + 1)) + noise[i][j]
    return F


def two_pass_variance(v):
    n = len(v)
    mean = sum(v) / n
    return sum((t - mean) ** 2 for t in v) / (n - 1)


def riemann_moment(family, alpha, power, points=10**6):
    """Midpoint-rule ``int u^alpha K^power`` for d <= 2 product kernels."""
    import numpy as np

    lo, hi = (-8.0, 8.0) if family == "gaussian" else (-1.0, 1.0)
    d = len(alpha)
    per_axis = points if d == 1 else int(round(points ** 0.5))
    h = (hi - lo) / per_axis
    t = lo + h * (np.arange(per_axis) + 0.5)
    if family == "gaussian":
        k = np.exp(-t * t / 2) / math.sqrt(2 * math.pi)
    elif family == "epanechnikov":
        k = 0.75 * (1 - t * t)
    else:
        k = np.full_like(t, 0.5)
    total = 1.0
    for a in alpha:
        total *= float(np.sum(t**a * k**power) * h)
    return total
