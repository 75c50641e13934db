"""Limiting quantities for the local-linear estimator.

Given analytic model inputs at a point (covariate density, regression
function and its derivatives, conditional variance) these functions return
the limit design matrix, the limit covariance of the normalized score, the
leading bias terms and the asymptotic variances of ``g_hat`` and its
gradient. A boundary variant covers ``d = 1`` at ``x = c * b`` near a
support edge at 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, ZeroDensity
from .kernels import (
    KernelSpec,
    first_moment_vector,
    kernel_moment,
    second_moment_matrix,
    third_moment_tensor,
    truncated_moment,
)
from .lattice import LatticeShape

EIG_FLOOR = 1e-12


def _fd_step(x: np.ndarray) -> np.ndarray:
    return 1e-4 * (1.0 + np.abs(x))


def fd_gradient(g: Callable, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    h = _fd_step(x)
    out = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h[i]
        out[i] = (g(x + e) - g(x - e)) / (2 * h[i])
    return out


def fd_hessian(g: Callable, x) -> np.ndarray:
    """Central-difference Hessian with step ``1e-4 * (1 + |x_i|)``."""
    x = np.asarray(x, dtype=np.float64)
    d = x.size
    h = _fd_step(x)
    H = np.empty((d, d))
    g0 = g(x)
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h[i]
        H[i, i] = (g(x + ei) - 2 * g0 + g(x - ei)) / h[i] ** 2
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                g(x + ei + ej) - g(x + ei - ej) - g(x - ei + ej) + g(x - ei - ej)
            ) / (4 * h[i] * h[j])
    return H


@dataclass(frozen=True)
class TrueModel:
    """Analytic description of the data-generating law at evaluation points.

    All callables take a point of length ``d`` (a 1-d array). ``g_grad`` and
    ``g_hess`` may be omitted; central differences of ``g`` are used then.
    """

    f: Callable
    g: Callable
    cond_var: Callable
    g_grad: Optional[Callable] = None
    g_hess: Optional[Callable] = None

    def gradient(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if self.g_grad is not None:
            return np.atleast_1d(np.asarray(self.g_grad(x), dtype=np.float64))
        return fd_gradient(self.g, x)

    def hessian(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if self.g_hess is not None:
            H = np.asarray(self.g_hess(x), dtype=np.float64)
        else:
            H = fd_hessian(self.g, x)
        H = H.reshape(x.size, x.size)
        return 0.5 * (H + H.T)


@dataclass(frozen=True, eq=False)
class AsymptoticQuantities:
    u_limit: np.ndarray
    sigma_limit: np.ndarray
    b0: float
    b1: np.ndarray
    bg: float
    var0: Optional[float]
    var1: Optional[np.ndarray]

    def sandwich(self) -> np.ndarray:
        """``U^{-1} Sigma U^{-T}``, the joint limit covariance of the scaled errors."""
        Uinv = np.linalg.inv(self.u_limit)
        return Uinv @ self.sigma_limit @ Uinv.T

    def bias_vector(self) -> np.ndarray:
        """``U^{-1} (B_0, B_1)``, the joint leading bias divided by ``b^2``."""
        return np.linalg.solve(self.u_limit, np.concatenate([[self.b0], self.b1]))


def _block(scalar, vec, mat):
    d = vec.size
    out = np.empty((d + 1, d + 1))
    out[0, 0] = scalar
    out[0, 1:] = vec
    out[1:, 0] = vec
    out[1:, 1:] = mat
    return out


def limit_quantities(model: TrueModel, x, kernel: KernelSpec, variances: bool = True) -> AsymptoticQuantities:
    """Evaluate all limit quantities at ``x``.

    With ``variances=False`` a zero density is accepted and ``var0``/``var1``
    are left as ``None``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    d = kernel.dimension
    if x.shape != (d,):
        raise DimensionMismatch(f"point has length {x.size}, kernel dimension is {d}")
    fx = float(model.f(x))
    cv = float(model.cond_var(x))
    H = model.hessian(x)

    m0 = kernel_moment(kernel, [0] * d, 1)
    m1 = first_moment_vector(kernel, 1)
    M2 = second_moment_matrix(kernel, 1)
    r0 = kernel_moment(kernel, [0] * d, 2)
    r1 = first_moment_vector(kernel, 2)
    R2 = second_moment_matrix(kernel, 2)
    T3 = third_moment_tensor(kernel)

    U = fx * _block(m0, m1, M2)
    Sigma = cv * fx * _block(r0, r1, R2)
    b0 = 0.5 * fx * float(np.sum(H * M2))
    b1 = 0.5 * fx * np.einsum("ij,ijk->k", H, T3)
    bg = 0.5 * float(np.sum(np.diag(H) * np.diag(M2)))

    var0 = var1 = None
    if variances:
        if not fx > 0:
            raise ZeroDensity(f"covariate density at {x} is {fx}; variances are undefined")
        var0 = cv * r0 / fx
        M2inv = np.linalg.inv(M2)
        var1 = cv / fx * (M2inv @ R2 @ M2inv)
    return AsymptoticQuantities(U, Sigma, b0, b1, bg, var0, var1)


def boundary_quantities(model: TrueModel, c: float, kernel: KernelSpec, at: float = 0.0):
    """Bias and variances at the boundary point ``x = c * b`` for ``d = 1``.

    ``model`` is evaluated at ``at`` (the right limit at the support edge).
    Returns ``(bg_boundary, var0_boundary, var1_boundary)``.
    """
    if kernel.dimension != 1:
        raise DimensionMismatch("boundary quantities are defined for d = 1 only")
    if not c > 0:
        raise ValueError("c must be positive")
    x = np.array([float(at)])
    fx = float(model.f(x))
    if not fx > 0:
        raise ZeroDensity(f"density at the boundary is {fx}")
    cv = float(model.cond_var(x))
    g2 = float(model.hessian(x)[0, 0])
    lower = -float(c)
    mu2 = truncated_moment(kernel, 2, 1, lower)
    r0 = truncated_moment(kernel, 0, 2, lower)
    r2 = truncated_moment(kernel, 2, 2, lower)
    bg = 0.5 * g2 * mu2
    var0 = cv * r0 / fx
    var1 = cv / fx * r2 / mu2**2
    return bg, var0, var1


def inverse_sqrt_psd(A: np.ndarray, floor: float = EIG_FLOOR) -> np.ndarray:
    """Symmetric inverse square root with eigenvalues floored at ``floor``."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    lam, Q = np.linalg.eigh(0.5 * (A + A.T))
    lam = np.maximum(lam, floor)
    return (Q / np.sqrt(lam)) @ Q.T


def standardize_error(fit, model: TrueModel, x, bw, shape: LatticeShape, kernel: KernelSpec, quantities=None):
    """Scaled, bias-corrected estimation errors ``(z0, z1)``.

    Under the limit law both are approximately standard normal (``z1`` is
    whitened) and mutually independent.
    """
    b = bw.b if hasattr(bw, "b") else float(bw)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    d = kernel.dimension
    q = quantities if quantities is not None else limit_quantities(model, x, kernel)
    if not q.var0 > 0:
        raise ZeroDensity("asymptotic variance of g_hat is zero; cannot standardize")
    n = shape.size
    z0 = math.sqrt(n * b**d) * (fit.g_hat - float(model.g(x)) - q.bg * b**2) / math.sqrt(q.var0)
    if np.linalg.matrix_rank(q.var1) < d:
        raise np.linalg.LinAlgError("asymptotic gradient covariance is singular")
    err1 = math.sqrt(n * b ** (d + 2)) * (np.asarray(fit.grad_hat) - model.gradient(x))
    z1 = inverse_sqrt_psd(q.var1) @ err1
    return z0, z1
