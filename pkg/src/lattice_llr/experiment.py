"""Replicated simulate-then-estimate runs and limit-law diagnostics."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .asymptotics import TrueModel, limit_quantities, standardize_error
from .errors import DegenerateSignal, InsufficientReplications
from .estimator import BandwidthSpec, fit_curve, fitted_at_sites, kde, local_linear_fit
from .kernels import KernelSpec
from .lattice import LatticeField
from .simulator import (
    ModelSpec,
    PRESETS,
    derive_seed,
    iid_density,
    model1_g,
    model1_g_grad,
    simulate,
)

THREADS_ENV = "LATTICE_LLR_THREADS"
MIN_DIAGNOSTIC_REPS = 30


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "0") or 0)
    if threads < 0:
        raise ValueError(f"thread count must be >= 0, got {threads}")
    return threads if threads > 0 else (os.cpu_count() or 1)


def _map(fn, items, threads):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    replications: int = 10
    bandwidth: float = 0.5
    kernel: KernelSpec = field(default_factory=lambda: KernelSpec("gaussian", 1))
    x_grid: Optional[tuple] = None  # None: 101 points over the central 98% of X
    base_seed: int = 0

    def __post_init__(self):
        if int(self.replications) < 1:
            raise ValueError("replications must be >= 1")
        BandwidthSpec(self.bandwidth)
        if not 0 <= int(self.base_seed) < 2**64:
            raise ValueError("base_seed must be a 64-bit unsigned integer")
        if self.x_grid is not None:
            g = tuple(float(v) for v in self.x_grid)
            if not g:
                raise ValueError("x_grid must be nonempty")
            if any(b <= a for a, b in zip(g, g[1:])):
                raise ValueError("x_grid must be strictly increasing")
            object.__setattr__(self, "x_grid", g)

    def replication_spec(self, r: int) -> ModelSpec:
        return self.model.with_seed(derive_seed(self.base_seed, r))


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    x_grid: np.ndarray
    curves: np.ndarray  # (R, G) g_hat, NaN on failure
    status: np.ndarray  # (R, G) "ok" | "singular" | "empty"
    nsr: np.ndarray
    nsr_mean: float
    nsr_truth: Optional[np.ndarray]
    failures: int
    summary_mean: np.ndarray
    summary_sd: np.ndarray
    summary_count: np.ndarray
    scatter: LatticeField  # replication 1


def noise_to_signal(field: LatticeField, fitted) -> float:
    """Sample variance of ``Y - fitted`` over sample variance of ``fitted``.

    Sites whose fitted value is NaN (failed fits) are skipped.
    """
    fitted = np.asarray(fitted, dtype=np.float64).reshape(-1)
    ok = np.isfinite(fitted)
    if ok.sum() < 2:
        raise DegenerateSignal("need at least two fitted values")
    fv = fitted[ok]
    if np.ptp(fv) == 0.0:
        raise DegenerateSignal("fitted values are constant")
    return float(np.var(field.y[ok] - fv, ddof=1) / np.var(fv, ddof=1))


def truth_function(spec: ModelSpec):
    """Known regression/autoregression function for ``spec``, or ``None``."""
    if spec.kind == "model1":
        return lambda X: model1_g(X[:, 0])
    if spec.kind == "iid":
        return lambda X: np.sum(X**2, axis=1)
    if spec.kind == "model2" and set(spec.covariate_lags.offsets) == set(PRESETS["X0"]):
        return lambda X: np.sin(X[:, 0])
    return None


def default_grid(field: LatticeField, count: int = 101) -> np.ndarray:
    x = field.x[:, 0]
    lo, hi = np.quantile(x, [0.01, 0.99])
    return np.linspace(lo, hi, count)


def run_experiment(
    cfg: ExperimentConfig,
    threads: Optional[int] = None,
    execution_order: Optional[Sequence[int]] = None,
) -> ExperimentResult:
    """Simulate and fit ``cfg.replications`` independent fields.

    Replication ``r`` (1-based) uses seed ``derive_seed(base_seed, r)``.
    Aggregates are reduced in replication order, so neither the thread count
    nor ``execution_order`` affects the result.
    """
    threads = resolve_threads(threads)
    R = cfg.replications
    order = list(range(1, R + 1)) if execution_order is None else [int(r) for r in execution_order]
    if sorted(order) != list(range(1, R + 1)):
        raise ValueError("execution_order must be a permutation of 1..replications")
    if cfg.kernel.dimension != (cfg.model.d if cfg.model.kind == "iid" else 1):
        raise ValueError("kernel dimension does not match the model's covariate dimension")

    fields = dict(zip(order, _map(lambda r: simulate(cfg.replication_spec(r)), order, threads)))
    grid = np.asarray(cfg.x_grid) if cfg.x_grid is not None else default_grid(fields[1])
    truth = truth_function(cfg.model)
    bw = BandwidthSpec(cfg.bandwidth)

    def analyse(r):
        fld = fields[r]
        pts = grid.reshape(-1, 1) if fld.covariate_dim == 1 else grid
        fits = [f for _, f in fit_curve(fld, pts, bw, cfg.kernel)]
        curve = np.array([f.g_hat if f.ok else np.nan for f in fits])
        status = [f.status for f in fits]
        fitted = fitted_at_sites(fld, bw, cfg.kernel)
        ratio = noise_to_signal(fld, fitted)
        ratio_true = None
        if truth is not None:
            ratio_true = noise_to_signal(fld, truth(fld.x))
        return curve, status, ratio, ratio_true

    done = dict(zip(order, _map(analyse, order, threads)))
    rows = [done[r] for r in range(1, R + 1)]
    curves = np.vstack([row[0] for row in rows])
    status = np.array([row[1] for row in rows], dtype=object)
    nsr = np.array([row[2] for row in rows])
    nsr_truth = np.array([row[3] for row in rows]) if truth is not None else None
    ok = np.isfinite(curves)
    count = ok.sum(axis=0)
    sums = np.where(ok, curves, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(count > 0, sums / np.maximum(count, 1), np.nan)
        dev = np.where(ok, curves - mean, 0.0)
        sd = np.where(count > 1, np.sqrt((dev**2).sum(axis=0) / np.maximum(count - 1, 1)), np.nan)
    return ExperimentResult(
        x_grid=grid,
        curves=curves,
        status=status,
        nsr=nsr,
        nsr_mean=float(np.mean(nsr)),
        nsr_truth=nsr_truth,
        failures=int((~ok).sum()),
        summary_mean=mean,
        summary_sd=sd,
        summary_count=count,
        scatter=fields[1],
    )


# --------------------------------------------------------------------------
# normality diagnostics
# --------------------------------------------------------------------------

def std_normal_cdf(z):
    z = np.asarray(z, dtype=np.float64)
    return 0.5 * (1.0 + np.vectorize(math.erf)(z / math.sqrt(2.0)))


def ks_statistic(sample) -> float:
    """Exact one-sample Kolmogorov-Smirnov distance to N(0, 1)."""
    z = np.sort(np.asarray(sample, dtype=np.float64))
    n = z.size
    if n == 0:
        raise ValueError("empty sample")
    cdf = std_normal_cdf(z)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


def ks_pvalue(stat: float, n: int) -> float:
    """Asymptotic Kolmogorov tail probability with Stephens' small-sample correction."""
    lam = (math.sqrt(n) + 0.12 + 0.11 / math.sqrt(n)) * stat
    if lam < 1e-3:
        return 1.0
    total = 0.0
    for k in range(1, 101):
        term = 2.0 * (-1) ** (k - 1) * math.exp(-2.0 * k * k * lam * lam)
        total += term
        if abs(term) < 1e-16:
            break
    return min(1.0, max(0.0, total))


@dataclass(frozen=True, eq=False)
class NormalityDiagnostics:
    mean_z0: float
    var_z0: float
    ks_stat: float
    ks_pvalue: float
    corr_g_grad: float
    z0: np.ndarray
    z1: np.ndarray
    g_hat: np.ndarray
    grad_hat: np.ndarray
    failures: int


def iid_truth(d: int = 1, noise_sd: float = 1.0) -> TrueModel:
    """Analytic truth for the ``iid`` benchmark design."""
    return TrueModel(
        f=iid_density(d),
        g=lambda x: float(np.sum(np.asarray(x) ** 2)),
        cond_var=lambda x: noise_sd**2,
        g_grad=lambda x: 2.0 * np.asarray(x, dtype=np.float64),
        g_hess=lambda x: 2.0 * np.eye(np.asarray(x).size),
    )


def model1_truth(f_hat, noise_sd: float = 1.0) -> TrueModel:
    """Model 1 truth with a plug-in covariate density ``f_hat``."""
    return TrueModel(
        f=f_hat,
        g=lambda x: float(model1_g(np.asarray(x)[0])),
        cond_var=lambda x: noise_sd**2,
        g_grad=lambda x: np.atleast_1d(model1_g_grad(np.asarray(x)[0])),
        g_hess=lambda x: np.atleast_2d(model1_g(np.asarray(x)[0])),
    )


def plugin_density(cfg: ExperimentConfig, pilot_reps: int = 10):
    """KDE of the covariate density pooled over pilot replications.

    Pilot fields use seeds ``derive_seed(base_seed + 1, r)`` so they never
    coincide with the diagnostic replications.
    """
    pilot_seed = (cfg.base_seed + 1) % 2**64
    fields = [simulate(cfg.model.with_seed(derive_seed(pilot_seed, r))) for r in range(1, pilot_reps + 1)]
    X = np.vstack([f.x for f in fields])
    pooled = LatticeField.from_grids(np.zeros(X.shape[0]), X)
    b = 1.06 * float(np.std(X)) * X.shape[0] ** (-0.2)
    kern = KernelSpec("gaussian", X.shape[1])
    return lambda x: kde(pooled, x, b, kern)


def normality_diagnostics(
    cfg: ExperimentConfig,
    model_truth: TrueModel,
    x0,
    threads: Optional[int] = None,
) -> NormalityDiagnostics:
    """Replicate fits at ``x0`` and test the standardized errors against N(0, 1)."""
    threads = resolve_threads(threads)
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    q = limit_quantities(model_truth, x0, cfg.kernel)
    bw = BandwidthSpec(cfg.bandwidth)

    def one(r):
        fld = simulate(cfg.replication_spec(r))
        fit = local_linear_fit(fld, x0, bw, cfg.kernel)
        if not fit.ok:
            return None
        z0, z1 = standardize_error(fit, model_truth, x0, bw, fld.shape, cfg.kernel, quantities=q)
        return z0, z1, fit.g_hat, fit.grad_hat

    results = _map(one, range(1, cfg.replications + 1), threads)
    good = [res for res in results if res is not None]
    if len(good) < MIN_DIAGNOSTIC_REPS:
        raise InsufficientReplications(
            f"{len(good)} successful replications; at least {MIN_DIAGNOSTIC_REPS} are required"
        )
    z0 = np.array([res[0] for res in good])
    z1 = np.vstack([res[1] for res in good])
    g = np.array([res[2] for res in good])
    grad = np.vstack([res[3] for res in good])
    ks = ks_statistic(z0)
    return NormalityDiagnostics(
        mean_z0=float(np.mean(z0)),
        var_z0=float(np.var(z0, ddof=1)),
        ks_stat=ks,
        ks_pvalue=ks_pvalue(ks, z0.size),
        corr_g_grad=float(np.corrcoef(g, grad[:, 0])[0, 1]),
        z0=z0,
        z1=z1,
        g_hat=g,
        grad_hat=grad,
        failures=len(results) - len(good),
    )
