"""Product kernels on R^d, tilted kernels, and kernel moment integrals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from ._kernels import KERNEL_CODES, univariate_kernel
from .errors import DimensionMismatch, UnsupportedMoment

FAMILIES = tuple(KERNEL_CODES)

# gaussian integrals are truncated here; the tail mass beyond is < 1e-15
GAUSSIAN_CUTOFF = 8.0
QUAD_TOL = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """Product of ``dimension`` copies of one symmetric univariate density."""

    family: str = "epanechnikov"
    dimension: int = 1

    def __post_init__(self):
        if self.family not in KERNEL_CODES:
            raise ValueError(f"unknown kernel family {self.family!r}; choose from {FAMILIES}")
        if int(self.dimension) < 1:
            raise ValueError("kernel dimension must be >= 1")
        object.__setattr__(self, "dimension", int(self.dimension))

    @property
    def code(self) -> int:
        return KERNEL_CODES[self.family]

    @property
    def support(self) -> tuple[float, float]:
        """Integration range of the univariate factor."""
        if self.family == "gaussian":
            return (-GAUSSIAN_CUTOFF, GAUSSIAN_CUTOFF)
        return (-1.0, 1.0)

    def with_dimension(self, d: int) -> "KernelSpec":
        return KernelSpec(self.family, d)


@dataclass(frozen=True)
class TiltCoefficients:
    c0: float
    c1: tuple = field(default=())

    def __post_init__(self):
        c1 = tuple(float(v) for v in np.atleast_1d(self.c1))
        if not (math.isfinite(self.c0) and all(math.isfinite(v) for v in c1)):
            raise ValueError("tilt coefficients must be finite")
        object.__setattr__(self, "c0", float(self.c0))
        object.__setattr__(self, "c1", c1)


def _as_points(spec: KernelSpec, u) -> tuple[np.ndarray, bool]:
    u = np.asarray(u, dtype=np.float64)
    single = u.ndim <= 1
    u2 = u.reshape(1, -1) if single else u
    if u2.shape[-1] != spec.dimension:
        raise DimensionMismatch(f"kernel has dimension {spec.dimension}, got point(s) of length {u2.shape[-1]}")
    return u2, single


def eval_kernel(spec: KernelSpec, u):
    """K(u) for one point of length d, or for each row of an ``(m, d)`` array."""
    u2, single = _as_points(spec, u)
    vals = np.prod(univariate_kernel(u2, spec.code), axis=-1)
    return float(vals[0]) if single else vals


def eval_tilted(spec: KernelSpec, c: TiltCoefficients, u):
    """(c0 + c1 . u) K(u); may be negative."""
    u2, single = _as_points(spec, u)
    if len(c.c1) != spec.dimension:
        raise DimensionMismatch(f"tilt has {len(c.c1)} slope terms, kernel dimension is {spec.dimension}")
    k = np.prod(univariate_kernel(u2, spec.code), axis=-1)
    vals = c.c0 * k
    for j, cj in enumerate(c.c1):
        vals = vals + cj * u2[:, j] * k
    return float(vals[0]) if single else vals


# --------------------------------------------------------------------------
# moments
# --------------------------------------------------------------------------

def _double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def univariate_moment_closed(family: str, a: int, power: int) -> float:
    """Exact value of ``int u^a k(u)^power du`` for the univariate factor."""
    if a % 2:
        return 0.0
    if family == "gaussian":
        # k^2 = N(0, 1/2) density / (2 sqrt(pi))
        if power == 1:
            return float(_double_factorial(a - 1))
        return _double_factorial(a - 1) * 0.5 ** (a // 2) / (2.0 * math.sqrt(math.pi))
    if family == "epanechnikov":
        if power == 1:
            return 0.75 * (2.0 / (a + 1) - 2.0 / (a + 3))
        return 0.5625 * (2.0 / (a + 1) - 4.0 / (a + 3) + 2.0 / (a + 5))
    if family == "uniform":
        return 0.5**power * 2.0 / (a + 1)
    raise ValueError(family)


def univariate_moment_quad(family: str, a: int, power: int, lower: float = -math.inf) -> float:
    """``int_{lower}^inf u^a k(u)^power du`` by adaptive quadrature."""
    code = KERNEL_CODES[family]
    lo, hi = KernelSpec(family).support
    lo = max(lo, lower)
    if lo >= hi:
        return 0.0

    def integrand(t):
        return t**a * float(univariate_kernel(t, code)) ** power

    val, _ = integrate.quad(integrand, lo, hi, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
    return val


def _check_moment_args(spec: KernelSpec, alpha, power) -> tuple[int, ...]:
    alpha = tuple(int(a) for a in np.atleast_1d(alpha))
    if len(alpha) != spec.dimension:
        raise DimensionMismatch(f"multi-index {alpha} does not match kernel dimension {spec.dimension}")
    if any(a < 0 for a in alpha):
        raise UnsupportedMoment(f"negative multi-index {alpha}")
    if sum(alpha) > 4:
        raise UnsupportedMoment(f"moment order {sum(alpha)} exceeds 4")
    if power not in (1, 2):
        raise UnsupportedMoment(f"power must be 1 or 2, got {power}")
    return alpha


@lru_cache(maxsize=None)
def _moment_cached(family: str, alpha: tuple[int, ...], power: int, method: str) -> float:
    one = univariate_moment_closed if method == "closed" else univariate_moment_quad
    return math.prod(one(family, a, power) for a in alpha)


def kernel_moment(spec: KernelSpec, alpha, power: int = 1, method: str = "closed") -> float:
    """``int u^alpha K(u)^power du`` over R^d.

    The product structure factors the integral into univariate pieces.
    ``method="closed"`` uses exact formulas, ``method="quad"`` tensorized
    adaptive quadrature; both are cached.
    """
    alpha = _check_moment_args(spec, alpha, power)
    if method not in ("closed", "quad"):
        raise ValueError(f"unknown method {method!r}")
    return _moment_cached(spec.family, alpha, power, method)


def truncated_moment(spec: KernelSpec, a: int, power: int, lower: float) -> float:
    """``int_{lower}^inf u^a K(u)^power du`` for a univariate kernel.

    When ``lower`` sits at or below the left end of the integration support
    the truncation is inactive and the untruncated closed form is returned.
    """
    if spec.dimension != 1:
        raise DimensionMismatch("truncated moments are defined for d = 1 only")
    _check_moment_args(spec, (a,), power)
    if lower <= spec.support[0]:
        return kernel_moment(spec, (a,), power)
    return _truncated_cached(spec.family, int(a), int(power), float(lower))


@lru_cache(maxsize=4096)
def _truncated_cached(family, a, power, lower):
    return univariate_moment_quad(family, a, power, lower)


def second_moment_matrix(spec: KernelSpec, power: int = 1) -> np.ndarray:
    """Matrix ``int u u^T K^power``."""
    d = spec.dimension
    M = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            alpha = [0] * d
            alpha[i] += 1
            alpha[j] += 1
            M[i, j] = kernel_moment(spec, alpha, power)
    return M


def first_moment_vector(spec: KernelSpec, power: int = 1) -> np.ndarray:
    d = spec.dimension
    return np.array([kernel_moment(spec, [int(k == i) for k in range(d)], power) for i in range(d)])


def third_moment_tensor(spec: KernelSpec) -> np.ndarray:
    """``T[i, j, k] = int u_i u_j u_k K``."""
    d = spec.dimension
    T = np.empty((d, d, d))
    for i in range(d):
        for j in range(d):
            for k in range(d):
                alpha = [0] * d
                for idx in (i, j, k):
                    alpha[idx] += 1
                T[i, j, k] = kernel_moment(spec, alpha, 1)
    return T
