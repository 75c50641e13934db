"""Synthetic lattice fields.

``model1``
    ``Y = g(X) + u`` with ``g(x) = e^x / 3 + 2 e^{-x} / 3`` and ``X`` a
    sine-link spatial autoregression driven by noise ``e``.
``model2``
    ``Y`` is the sine-link autoregression itself; ``X`` is a sum of spatial
    lags of ``Y`` chosen by a :class:`LagSet`.
``iid``
    Benchmark design with independent ``X ~ U[-1, 1]^d`` and
    ``Y = |X|^2 + noise``; used to check the limit law.

Lattice fields are generated on a grid extended by ``margin`` cells on every
side, swept ``sweeps`` times starting from zero, and cropped to the central
``m x n`` window.

Random numbers come from numpy's Philox counter-based generator seeded via
``SeedSequence(seed)``; replication streams are split with
:func:`derive_seed`. Draw order: the ``e`` grid(s), then ``u`` (model 1), or
``X`` then the noise (iid).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _kernels
from .errors import LagOutOfMargin
from .lattice import LatticeField, LatticeShape

MODEL_KINDS = ("model1", "model2", "iid")
SWEEP_ORDERS = ("raster", "checkerboard")

PRESETS = {
    "X0": ((-1, 0), (0, -1), (1, 0), (0, 1)),
    "Xc": ((-2, 0), (0, -2), (-1, 0), (0, -1), (1, 0), (0, 1), (2, 0), (0, 2)),
    "Xd": ((-1, 0), (0, -1)),
    "Xe": ((1, 0), (0, 1)),
    "Xf": ((-2, 0), (0, -2), (-1, 0), (0, -1)),
}


def model1_g(x):
    x = np.asarray(x, dtype=np.float64)
    return np.exp(x) / 3.0 + 2.0 * np.exp(-x) / 3.0


def model1_g_grad(x):
    x = np.asarray(x, dtype=np.float64)
    return np.exp(x) / 3.0 - 2.0 * np.exp(-x) / 3.0


@dataclass(frozen=True)
class SimProtocol:
    margin: int = 75
    sweeps: int = 20
    noise_sd: float = 1.0
    seed: int = 0
    order: str = "raster"
    redraw_noise: bool = False

    def __post_init__(self):
        if int(self.margin) < 0:
            raise ValueError("margin must be >= 0")
        if int(self.sweeps) < 1:
            raise ValueError("sweeps must be >= 1")
        if not (math.isfinite(self.noise_sd) and self.noise_sd > 0):
            raise ValueError("noise_sd must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.order not in SWEEP_ORDERS:
            raise ValueError(f"order must be one of {SWEEP_ORDERS}")
        for name in ("margin", "sweeps", "seed"):
            object.__setattr__(self, name, int(getattr(self, name)))
        object.__setattr__(self, "noise_sd", float(self.noise_sd))


@dataclass(frozen=True)
class LagSet:
    offsets: tuple

    def __post_init__(self):
        offs = tuple((int(a), int(b)) for a, b in self.offsets)
        if not offs:
            raise ValueError("lag set must be nonempty")
        if len(set(offs)) != len(offs):
            raise ValueError(f"duplicate offsets in {offs}")
        if (0, 0) in offs:
            raise ValueError("offset (0, 0) is not a lag")
        object.__setattr__(self, "offsets", offs)

    @classmethod
    def preset(cls, name: str) -> "LagSet":
        try:
            return cls(PRESETS[name])
        except KeyError:
            raise ValueError(f"unknown covariate preset {name!r}; choose from {sorted(PRESETS)}") from None

    @property
    def reach(self) -> int:
        return max(max(abs(a), abs(b)) for a, b in self.offsets)


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    m: int
    n: int
    protocol: SimProtocol = field(default_factory=SimProtocol)
    covariate_lags: Optional[LagSet] = None
    d: int = 1  # iid only

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"kind must be one of {MODEL_KINDS}")
        if int(self.m) < 1 or int(self.n) < 1:
            raise ValueError("m and n must be >= 1")
        if self.kind == "model2" and self.covariate_lags is None:
            object.__setattr__(self, "covariate_lags", LagSet.preset("X0"))
        if isinstance(self.covariate_lags, str):
            object.__setattr__(self, "covariate_lags", LagSet.preset(self.covariate_lags))

    def with_seed(self, seed: int) -> "ModelSpec":
        return replace(self, protocol=replace(self.protocol, seed=int(seed)))


def derive_seed(base_seed: int, replication: int) -> int:
    """Independent 64-bit seed for replication ``replication`` of a run."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(replication),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def sweep_field(noise: np.ndarray, sweeps: int, order: str = "raster") -> np.ndarray:
    """Iterate ``F <- sin(sum of 4 neighbours) + noise`` from ``F = 0``.

    ``noise`` is either one grid reused on every pass, or a stack of shape
    ``(sweeps, H, W)`` supplying a fresh grid per pass. Neighbours outside the
    grid read as zero.
    """
    noise = np.asarray(noise, dtype=np.float64)
    per_sweep = noise.ndim == 3
    if per_sweep and noise.shape[0] != sweeps:
        raise ValueError(f"noise stack has {noise.shape[0]} layers for {sweeps} sweeps")
    F = np.zeros(noise.shape[-2:])
    for s in range(sweeps):
        _kernels.sweep_once(F, noise[s] if per_sweep else noise, order)
    return F


def _noise(rng, proto: SimProtocol, shape):
    if proto.redraw_noise:
        shape = (proto.sweeps,) + tuple(shape)
    return proto.noise_sd * rng.standard_normal(shape)


def _extended_shape(spec: ModelSpec):
    k = spec.protocol.margin
    return (spec.m + 2 * k, spec.n + 2 * k)


def _window(spec: ModelSpec):
    k = spec.protocol.margin
    return (slice(k, k + spec.m), slice(k, k + spec.n))


def simulate_model1(spec: ModelSpec, *, return_grids: bool = False):
    """Model 1 field; with ``return_grids`` also the extended ``(X, Y)`` grids."""
    proto = spec.protocol
    rng = make_rng(proto.seed)
    shape = _extended_shape(spec)
    e = _noise(rng, proto, shape)
    u = proto.noise_sd * rng.standard_normal(shape)
    X = sweep_field(e, proto.sweeps, proto.order)
    Y = model1_g(X) + u
    w = _window(spec)
    fld = LatticeField.from_grids(Y[w], X[w])
    return (fld, X, Y) if return_grids else fld


def lagged_sum(Y: np.ndarray, lags: LagSet) -> np.ndarray:
    """``sum over (a, b) in lags of Y[i + a, j + b]``; out-of-grid terms read as 0."""
    H, W = Y.shape
    r = lags.reach
    P = np.zeros((H + 2 * r, W + 2 * r))
    P[r : r + H, r : r + W] = Y
    X = np.zeros_like(Y)
    for a, b in lags.offsets:
        X += P[r + a : r + a + H, r + b : r + b + W]
    return X


def simulate_model2(spec: ModelSpec, *, return_grids: bool = False):
    """Model 2 field; covariates are formed on the extended grid before cropping."""
    proto = spec.protocol
    lags = spec.covariate_lags
    if lags.reach > proto.margin:
        raise LagOutOfMargin(f"lag reach {lags.reach} exceeds margin {proto.margin}")
    rng = make_rng(proto.seed)
    e = _noise(rng, proto, _extended_shape(spec))
    Y = sweep_field(e, proto.sweeps, proto.order)
    X = lagged_sum(Y, lags)
    w = _window(spec)
    fld = LatticeField.from_grids(Y[w], X[w])
    return (fld, X, Y) if return_grids else fld


def simulate_iid(spec: ModelSpec) -> LatticeField:
    """Independent benchmark design on an ``m x n`` lattice."""
    rng = make_rng(spec.protocol.seed)
    X = rng.uniform(-1.0, 1.0, size=(spec.m, spec.n, spec.d))
    eps = spec.protocol.noise_sd * rng.standard_normal((spec.m, spec.n))
    Y = np.sum(X**2, axis=-1) + eps
    return LatticeField.from_grids(Y, X)


def simulate(spec: ModelSpec) -> LatticeField:
    if spec.kind == "model1":
        return simulate_model1(spec)
    if spec.kind == "model2":
        return simulate_model2(spec)
    return simulate_iid(spec)


def iid_density(d: int = 1):
    return lambda x: 0.5**d if np.all(np.abs(np.asarray(x)) <= 1.0) else 0.0
