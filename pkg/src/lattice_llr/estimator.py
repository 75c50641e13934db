"""Local-linear kernel regression on lattice fields.

The fit at ``x`` works in the scaled coordinates ``(X_j - x) / b``: it
assembles the normalized design matrix ``U_n`` and response vector ``V_n``
and solves ``U_n s = V_n`` for ``s = (g_hat, b * grad_hat)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import _kernels
from .errors import DimensionMismatch
from .kernels import KernelSpec
from .lattice import LatticeField

RCOND_MIN = 1e-12


@dataclass(frozen=True)
class BandwidthSpec:
    b: float

    def __post_init__(self):
        b = float(self.b)
        if not (math.isfinite(b) and b > 0):
            raise ValueError(f"bandwidth must be positive and finite, got {self.b}")
        object.__setattr__(self, "b", b)


@dataclass(frozen=True, eq=False)
class LocalFit:
    x: np.ndarray
    g_hat: float
    grad_hat: np.ndarray
    u_matrix: np.ndarray
    v_vector: np.ndarray
    rcond: float
    support_count: int

    ok = True

    @property
    def status(self) -> str:
        return "ok"


@dataclass(frozen=True)
class FitFailure:
    reason: str  # "SingularSystem" | "EmptyWindow"
    rcond: float
    support_count: int

    ok = False

    @property
    def status(self) -> str:
        return "empty" if self.reason == "EmptyWindow" else "singular"


FitResult = Union[LocalFit, FitFailure]


def _bandwidth(bw) -> float:
    return bw.b if isinstance(bw, BandwidthSpec) else BandwidthSpec(bw).b


def _points(xs, d: int) -> np.ndarray:
    P = np.asarray(xs, dtype=np.float64)
    if P.size == 0:
        return P.reshape(0, d)
    if d == 1 and P.ndim == 1:
        P = P.reshape(-1, 1)
    if P.ndim != 2 or P.shape[1] != d:
        raise DimensionMismatch(f"evaluation points must have length {d}")
    return P


def _kernel_for(kernel: KernelSpec | str, d: int) -> KernelSpec:
    if isinstance(kernel, str):
        kernel = KernelSpec(kernel, d)
    if kernel.dimension != d:
        raise DimensionMismatch(f"kernel dimension {kernel.dimension} != covariate dimension {d}")
    return kernel


def rcond_spd(U: np.ndarray) -> np.ndarray:
    """Reciprocal 2-norm condition numbers of a stack of symmetric PSD matrices."""
    lam = np.linalg.eigvalsh(U)
    lo, hi = lam[..., 0], lam[..., -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(hi > 0, np.maximum(lo, 0.0) / hi, 0.0)
    return r


def _solve_spd(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    L = np.linalg.cholesky(U)
    y = np.linalg.solve(L, V[..., None])
    return np.linalg.solve(np.swapaxes(L, -1, -2), y)[..., 0]


def fit_arrays(X, Y, points, b: float, kernel: KernelSpec, n_total: int | None = None) -> list[FitResult]:
    """Local-linear fits at each row of ``points`` from raw site arrays.

    ``n_total`` sets the ``(n b^d)^{-1}`` normalization; it defaults to the
    number of rows of ``X``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    d = X.shape[1]
    P = _points(points, d)
    n_total = X.shape[0] if n_total is None else n_total
    norm = 1.0 / (n_total * b**d)
    U, V, count = _kernels.design_sums(X, Y, P, b, kernel.code, norm)
    return _finish(P, U, V, count, b)


def _finish(P, U, V, count, b) -> list[FitResult]:
    m = P.shape[0]
    out: list[FitResult] = [None] * m
    if m == 0:
        return []
    rc = rcond_spd(U)
    good = np.flatnonzero((count > 0) & (rc >= RCOND_MIN))
    sol = np.empty_like(V)
    if good.size:
        try:
            sol[good] = _solve_spd(U[good], V[good])
        except np.linalg.LinAlgError:
            # a member passed the rcond screen but is not numerically PD
            for k in good:
                try:
                    sol[k] = _solve_spd(U[k], V[k])
                except np.linalg.LinAlgError:
                    rc[k] = 0.0
            good = good[rc[good] >= RCOND_MIN]
    good_set = set(good.tolist())
    for k in range(m):
        if count[k] == 0:
            out[k] = FitFailure("EmptyWindow", float(rc[k]), 0)
        elif k not in good_set:
            out[k] = FitFailure("SingularSystem", float(rc[k]), int(count[k]))
        else:
            out[k] = LocalFit(
                x=P[k].copy(),
                g_hat=float(sol[k, 0]),
                grad_hat=sol[k, 1:] / b,
                u_matrix=U[k],
                v_vector=V[k],
                rcond=float(rc[k]),
                support_count=int(count[k]),
            )
    return out


def local_linear_fit(field: LatticeField, x, bw, kernel: KernelSpec | str = "epanechnikov") -> FitResult:
    """Local-linear estimate of ``g(x)`` and its gradient.

    Returns a :class:`LocalFit`, or a :class:`FitFailure` when no site falls
    in the kernel window or the design matrix is numerically singular.
    """
    d = field.covariate_dim
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (d,):
        raise DimensionMismatch(f"evaluation point has length {x.size}, expected {d}")
    return fit_curve(field, [x], bw, kernel)[0][1]


def fit_curve(field: LatticeField, xs: Sequence, bw, kernel: KernelSpec | str = "epanechnikov"):
    """Evaluate :func:`local_linear_fit` at every point of ``xs``, in order."""
    d = field.covariate_dim
    kernel = _kernel_for(kernel, d)
    P = _points(xs, d)
    fits = fit_arrays(field.x, field.y, P, _bandwidth(bw), kernel)
    return [(P[k].copy(), fits[k]) for k in range(P.shape[0])]


def fitted_at_sites(field: LatticeField, bw, kernel: KernelSpec | str = "epanechnikov") -> np.ndarray:
    """In-sample fitted values ``g_hat(X_j)``; NaN where the fit failed."""
    kernel = _kernel_for(kernel, field.covariate_dim)
    fits = fit_arrays(field.x, field.y, field.x, _bandwidth(bw), kernel)
    return np.array([f.g_hat if f.ok else np.nan for f in fits])


def nadaraya_watson(field: LatticeField, x, bw, kernel: KernelSpec | str = "epanechnikov"):
    """Kernel-weighted mean of ``Y``; a :class:`FitFailure` on an empty window."""
    d = field.covariate_dim
    kernel = _kernel_for(kernel, d)
    b = _bandwidth(bw)
    P = _points(np.atleast_1d(np.asarray(x, dtype=np.float64)).reshape(1, -1), d)
    scaled = (field.x - P[0]) / b
    w = np.prod(_kernels.univariate_kernel(scaled, kernel.code), axis=1)
    den = w.sum()
    if not den > 0:
        return FitFailure("EmptyWindow", 0.0, 0)
    return float((w * field.y).sum() / den)


def kde(field: LatticeField, x, bw, kernel: KernelSpec | str = "epanechnikov") -> float:
    """Kernel density estimate of the covariate density at ``x``."""
    d = field.covariate_dim
    kernel = _kernel_for(kernel, d)
    b = _bandwidth(bw)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (d,):
        raise DimensionMismatch(f"evaluation point has length {x.size}, expected {d}")
    w = np.prod(_kernels.univariate_kernel((field.x - x) / b, kernel.code), axis=1)
    return float(w.sum() / (field.size * b**d))


def rule_of_thumb_bandwidth(field: LatticeField) -> float:
    """Normal-reference bandwidth ``1.06 * sd * n^(-1/(d+4))`` averaged over covariates."""
    d = field.covariate_dim
    sd = float(np.mean(np.std(field.x, axis=0, ddof=1))) if field.size > 1 else 1.0
    return 1.06 * sd * field.size ** (-1.0 / (d + 4))
