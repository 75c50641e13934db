"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion.

Run alone with ``pytest tests/test_acceptance.py -v``; the per-criterion
report is printed in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from lattice_llr.asymptotics import boundary_quantities, limit_quantities
from lattice_llr.cli import main
from lattice_llr.estimator import BandwidthSpec, fit_arrays, local_linear_fit
from lattice_llr.experiment import ExperimentConfig, iid_truth, normality_diagnostics, run_experiment
from lattice_llr.kernels import FAMILIES, KernelSpec, kernel_moment
from lattice_llr.simulator import ModelSpec, SimProtocol, model1_g, simulate

from oracles import wls_oracle

REPORT = []
SEED = 2024


def record(criterion, ok, detail, elapsed=None, budget=None):
    timing = "" if elapsed is None else f" [{elapsed:.1f}s / {budget:.0f}s]"
    REPORT.append(f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}{timing}")


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


@pytest.fixture(scope="module")
def iid_cfg():
    def make(b, reps=500, base_seed=SEED):
        return ExperimentConfig(
            ModelSpec("iid", 60, 60, SimProtocol(noise_sd=1.0)),
            replications=reps,
            bandwidth=b,
            kernel=KernelSpec("gaussian", 1),
            base_seed=base_seed,
        )

    return make


@pytest.fixture(scope="module")
def diag_b04(iid_cfg):
    with Timer() as t:
        diag = normality_diagnostics(iid_cfg(0.4), iid_truth(), [0.0])
    return diag, t.elapsed


@pytest.fixture(scope="module")
def model1_result():
    cfg = ExperimentConfig(
        ModelSpec("model1", 10, 20),
        replications=10,
        bandwidth=0.5,
        kernel=KernelSpec("gaussian"),
        x_grid=tuple(np.linspace(-2, 2, 101)),
        base_seed=SEED,
    )
    with Timer() as t:
        res = run_experiment(cfg)
    return res, t.elapsed


def test_c01_linear_reproduction():
    rng = np.random.default_rng(SEED)
    worst, fitted = 0.0, 0
    with Timer() as t:
        for k in range(100):
            d = 1 + k % 2
            dims = tuple(rng.integers(5, 13, size=2))
            n = int(np.prod(dims))
            X = rng.uniform(-1, 1, size=(n, d))
            a, slope = rng.uniform(-5, 5), rng.uniform(-5, 5, size=d)
            Y = a + X @ slope
            kern = KernelSpec(FAMILIES[k % 3], d)
            b = rng.uniform(0.6, 1.5)
            pts = rng.uniform(-0.8, 0.8, size=(20, d))
            for x0, fit in zip(pts, fit_arrays(X, Y, pts, b, kern)):
                if not fit.ok:
                    continue
                fitted += 1
                target = a + x0 @ slope
                worst = max(worst, abs(fit.g_hat - target) / max(abs(target), 1.0))
                worst = max(worst, float(np.max(np.abs(fit.grad_hat - slope) / np.maximum(np.abs(slope), 1.0))))
    ok = worst <= 1e-9 and fitted >= 1900 and t.elapsed < 10
    record("C1 linear reproduction", ok, f"max rel err {worst:.2e} over {fitted} fits (tol 1e-9)", t.elapsed, 10)
    assert ok


def test_c02_oracle_equivalence():
    rng = np.random.default_rng(SEED + 1)
    worst, checked = 0.0, 0
    with Timer() as t:
        for k in range(50):
            d = 1 + k % 2
            n = int(rng.integers(6, 26))
            X = rng.uniform(-1, 1, size=(n, d))
            Y = rng.normal(size=n) + np.sin(2 * X[:, 0])
            family = ("gaussian", "epanechnikov")[k % 2]
            b = rng.uniform(1.0, 2.0)
            x0 = rng.uniform(-0.5, 0.5, size=d)
            fit = fit_arrays(X, Y, [x0], b, KernelSpec(family, d))[0]
            a0, a1 = wls_oracle(X.tolist(), Y.tolist(), x0.tolist(), b, family)
            assert fit.ok
            checked += 1
            worst = max(worst, abs(fit.g_hat - a0), float(np.max(np.abs(fit.grad_hat - np.array(a1)))))
    ok = worst <= 1e-10 and t.elapsed < 5
    record("C2 oracle equivalence", ok, f"max abs diff {worst:.2e} over {checked} fixtures (tol 1e-10)", t.elapsed, 5)
    assert ok


def test_c03_kernel_moments():
    with Timer() as t:
        errs = [
            abs(kernel_moment(KernelSpec("epanechnikov"), (2,), 1, method="quad") - 0.2),
            abs(kernel_moment(KernelSpec("gaussian"), (0,), 2, method="quad") - 1 / (2 * math.sqrt(math.pi))),
        ]
        for family in FAMILIES:
            for power in (1, 2):
                for alpha in [(1,), (3,), (1, 0), (0, 1), (1, 2), (3, 0), (1, 1)]:
                    errs.append(abs(kernel_moment(KernelSpec(family, len(alpha)), alpha, power, method="quad")))
    worst = max(errs)
    ok = worst <= 1e-6 and t.elapsed < 5
    record("C3 kernel moments", ok, f"max deviation from closed forms {worst:.2e} (tol 1e-6)", t.elapsed, 5)
    assert ok


def test_c04_design_matrix_limit(iid_cfg):
    n_hat = 3600
    b = n_hat ** (-1 / 6)
    kern = KernelSpec("gaussian")
    with Timer() as t:
        cfg = iid_cfg(b, reps=50)
        Us = []
        for r in range(1, 51):
            fld = simulate(cfg.replication_spec(r))
            Us.append(local_linear_fit(fld, [0.0], b, kern).u_matrix)
        Un = np.mean(Us, axis=0)
        U = limit_quantities(iid_truth(), [0.0], kern).u_limit
    worst = float(np.max(np.abs(Un - U)))
    ok = worst <= 0.1 and t.elapsed < 60
    record("C4 U_n -> U", ok, f"max entry diff {worst:.4f} (tol 0.1), b={b:.4f}", t.elapsed, 60)
    assert ok


def test_c05a_limit_law_variance(diag_b04):
    diag, elapsed = diag_b04
    ok = 0.75 <= diag.var_z0 <= 1.25 and elapsed < 300
    record("C5a var(z0)", ok, f"{diag.var_z0:.4f} in [0.75, 1.25]", elapsed, 300)
    assert ok


def test_c05b_limit_law_ks(diag_b04):
    diag, elapsed = diag_b04
    ok = diag.ks_stat < 0.08
    record("C5b KS(z0, N(0,1))", ok, f"{diag.ks_stat:.4f} < 0.08 (mean z0 {diag.mean_z0:+.3f})")
    assert ok


def test_c05c_asymptotic_independence(diag_b04):
    diag, _ = diag_b04
    ok = abs(diag.corr_g_grad) < 0.15
    record("C5c corr(g_hat, grad_hat)", ok, f"{diag.corr_g_grad:+.4f}, |.| < 0.15")
    assert ok


def test_c06_bias_scaling(iid_cfg):
    kern = KernelSpec("gaussian")
    with Timer() as t:
        mean_err = {}
        for b in (0.2, 0.4):
            cfg = iid_cfg(b)
            errs = []
            for r in range(1, cfg.replications + 1):
                fit = local_linear_fit(simulate(cfg.replication_spec(r)), [0.0], b, kern)
                errs.append(fit.g_hat - 0.0)
            mean_err[b] = float(np.mean(errs))
    ratio = mean_err[0.4] / mean_err[0.2]
    ok = 2.5 <= ratio <= 6 and t.elapsed < 300
    record("C6 bias scaling", ok, f"ratio {ratio:.3f} in [2.5, 6] (errors {mean_err[0.2]:.4f}, {mean_err[0.4]:.4f})",
           t.elapsed, 300)
    assert ok


def test_c07_boundary_limit():
    model = iid_truth()
    with Timer() as t:
        g = KernelSpec("gaussian")
        q = limit_quantities(model, [0.0], g)
        gb = boundary_quantities(model, 10.0, g)
        dg = max(abs(gb[0] - q.bg), abs(gb[1] - q.var0), abs(gb[2] - q.var1[0, 0]))
        exact = True
        for c in (1.0, 1.5, 4.0):
            e = KernelSpec("epanechnikov")
            qe = limit_quantities(model, [0.0], e)
            exact &= boundary_quantities(model, c, e) == (qe.bg, qe.var0, qe.var1[0, 0])
    ok = dg <= 1e-6 and exact and t.elapsed < 1
    record("C7 boundary limit", ok, f"gaussian c=10 diff {dg:.1e} (tol 1e-6); epanechnikov c>=1 exact: {exact}",
           t.elapsed, 1)
    assert ok


def test_c08_model1(model1_result):
    res, elapsed = model1_result
    grid = res.x_grid
    mad = float(np.mean(np.abs(res.summary_mean - model1_g(grid))))
    ok = 0.10 <= res.nsr_mean <= 0.35 and mad < 0.25 and res.failures == 0 and elapsed < 60
    record("C8 Model 1", ok, f"NSR {res.nsr_mean:.3f} in [0.10, 0.35] (reported 0.214); curve MAD {mad:.3f} < 0.25",
           elapsed, 60)
    assert ok


def test_c09_model2_ordering(model1_result):
    nsr = {}
    with Timer() as t:
        for preset in ("X0", "Xc", "Xd", "Xe", "Xf"):
            cfg = ExperimentConfig(
                ModelSpec("model2", 30, 40, covariate_lags=preset),
                replications=10,
                bandwidth=0.5,
                kernel=KernelSpec("gaussian"),
                base_seed=SEED,
            )
            res = run_experiment(cfg)
            assert res.failures == 0
            nsr[preset] = res.nsr_mean
    m1 = model1_result[0].nsr_mean
    ok = min(nsr.values()) > 3 and nsr["Xe"] > nsr["X0"] and min(nsr.values()) >= 10 * m1 and t.elapsed < 120
    detail = ", ".join(f"{k} {v:.2f}" for k, v in nsr.items()) + f"; min/Model1 = {min(nsr.values()) / m1:.1f}x"
    record("C9 Model 2 NSR ordering", ok, detail, t.elapsed, 120)
    assert ok


def test_c10_cli_determinism(tmp_path, monkeypatch):
    import json

    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({
        "model": {"kind": "model2", "covariate_preset": "Xe", "m": 30, "n": 40},
        "replications": 4, "bandwidth": 0.5, "kernel": "gaussian", "grid": None, "base_seed": 5,
    }))
    dcfg = tmp_path / "diag.json"
    dcfg.write_text(json.dumps({
        "model": {"kind": "iid", "m": 40, "n": 40}, "replications": 60,
        "bandwidth": 0.3, "kernel": "gaussian", "base_seed": 5,
    }))

    def pipeline(root, threads):
        monkeypatch.setenv("LATTICE_LLR_THREADS", threads)
        root.mkdir()
        codes = [
            main(["simulate", "--model", "model1", "--m", "10", "--n", "20", "--seed", "42",
                  "--out", str(root / "field.csv")]),
            main(["estimate", "--in", str(root / "field.csv"), "--bandwidth", "0.5", "--kernel", "epanechnikov",
                  "--grid", "-2:2:101", "--out", str(root / "curve.csv")]),
            main(["asymptotics", "--kernel", "gaussian", "--density", "0.5", "--cond-var", "1", "--hessian", "2",
                  "--boundary-c", "0.5", "--out", str(root / "asym.json")]),
            main(["experiment", "--config", str(cfg), "--out-dir", str(root / "exp")]),
            main(["diagnose", "--config", str(dcfg), "--out", str(root / "diag.json")]),
        ]
        assert codes == [0] * 5
        return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}

    with Timer() as t:
        runs = [pipeline(tmp_path / f"run{k}", th) for k, th in enumerate(["1", "1", "4", "0"])]
    same = all(r == runs[0] for r in runs[1:])
    ok = same and t.elapsed < 120
    record("C10 CLI determinism", ok, f"{len(runs[0])} files byte-identical across 4 runs (threads 1,1,4,auto): {same}",
           t.elapsed, 120)
    assert ok
