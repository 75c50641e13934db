"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import itertools
import json
import os
import sys

import numpy as np

from . import __version__
from .asymptotics import TrueModel, boundary_quantities, limit_quantities
from .errors import ConfigError, DataError, InsufficientReplications, LatticeLLRError
from .estimator import BandwidthSpec, fit_curve, nadaraya_watson
from .experiment import (
    ExperimentConfig,
    iid_truth,
    model1_truth,
    normality_diagnostics,
    plugin_density,
    run_experiment,
)
from .kernels import FAMILIES, KernelSpec
from .lattice import format_float, read_csv, write_csv, write_text_atomic
from .simulator import MODEL_KINDS, PRESETS, SWEEP_ORDERS, LagSet, ModelSpec, SimProtocol, simulate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    return "" if not np.isfinite(v) else format_float(v)


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:count`` -> ``count`` equispaced points."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid must look like lo:hi:count, got {text!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"cannot parse grid {text!r}") from None
    if count < 1 or (count > 1 and not hi > lo):
        raise UsageError(f"grid {text!r} needs count >= 1 and hi > lo")
    return np.linspace(lo, hi, count)


# --------------------------------------------------------------------------
# experiment config JSON
# --------------------------------------------------------------------------

_TOP_KEYS = {"model", "replications", "bandwidth", "kernel", "grid", "base_seed"}
_MODEL_KEYS = {"kind", "covariate_preset", "m", "n", "margin", "sweeps", "noise_sd", "order", "redraw_noise", "d"}


def config_from_dict(obj: dict) -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(obj) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    if "model" not in obj:
        raise ConfigError("config needs a 'model' section")
    mod = obj["model"]
    if not isinstance(mod, dict):
        raise ConfigError("'model' must be an object")
    unknown = set(mod) - _MODEL_KEYS
    if unknown:
        raise ConfigError(f"unknown model key(s): {sorted(unknown)}")
    try:
        kind = mod["kind"]
        d = int(mod.get("d", 1))
        proto = SimProtocol(
            margin=mod.get("margin", 75),
            sweeps=mod.get("sweeps", 20),
            noise_sd=float(mod.get("noise_sd", 1.0)),
            order=mod.get("order", "raster"),
            redraw_noise=bool(mod.get("redraw_noise", False)),
        )
        lags = None
        preset = mod.get("covariate_preset")
        if preset is not None:
            if kind != "model2":
                raise ConfigError("covariate_preset applies to model2 only")
            lags = LagSet.preset(preset) if isinstance(preset, str) else LagSet(tuple(map(tuple, preset)))
        spec = ModelSpec(kind, int(mod["m"]), int(mod["n"]), proto, lags, d=d)
        grid = obj.get("grid")
        if isinstance(grid, str):
            grid = tuple(parse_grid(grid))
        elif grid is not None:
            grid = tuple(float(v) for v in grid)
        return ExperimentConfig(
            model=spec,
            replications=int(obj.get("replications", 10)),
            bandwidth=float(obj.get("bandwidth", 0.5)),
            kernel=KernelSpec(obj.get("kernel", "gaussian"), d if kind == "iid" else 1),
            x_grid=grid,
            base_seed=int(obj.get("base_seed", 0)),
        )
    except KeyError as exc:
        raise ConfigError(f"missing model key {exc}") from None
    except (TypeError, ValueError, UsageError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(obj)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    spec = cfg.model
    p = spec.protocol
    model = {
        "kind": spec.kind,
        "m": spec.m,
        "n": spec.n,
        "margin": p.margin,
        "sweeps": p.sweeps,
        "noise_sd": p.noise_sd,
        "order": p.order,
        "redraw_noise": p.redraw_noise,
    }
    if spec.kind == "model2":
        model["covariate_preset"] = [list(o) for o in spec.covariate_lags.offsets]
    if spec.kind == "iid":
        model["d"] = spec.d
    return {
        "model": model,
        "replications": cfg.replications,
        "bandwidth": cfg.bandwidth,
        "kernel": cfg.kernel.family,
        "grid": None if cfg.x_grid is None else list(cfg.x_grid),
        "base_seed": cfg.base_seed,
    }


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    lags = None
    if args.model == "model2":
        lags = LagSet.preset(args.preset)
    proto = SimProtocol(
        margin=args.margin,
        sweeps=args.sweeps,
        noise_sd=args.noise_sd,
        seed=args.seed,
        order=args.order,
        redraw_noise=args.redraw_noise,
    )
    fld = simulate(ModelSpec(args.model, args.m, args.n, proto, lags, d=args.d))
    write_csv(fld, args.out)
    return EXIT_OK


def _curve_text(rows, d) -> str:
    xcols = ["x"] if d == 1 else [f"x{k}" for k in range(1, d + 1)]
    header = xcols + ["g_hat"] + [f"grad_{k}" for k in range(1, d + 1)] + ["rcond", "support_count", "status"]
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def cmd_estimate(args) -> int:
    fld = read_csv(args.input)
    d = fld.covariate_dim
    grids = [parse_grid(g) for g in args.grid]
    if len(grids) == 1:
        grids = grids * d
    if len(grids) != d:
        raise UsageError(f"give one --grid or one per covariate dimension ({d})")
    points = np.array(list(itertools.product(*grids)), dtype=np.float64)
    kernel = KernelSpec(args.kernel, d)
    bw = BandwidthSpec(args.bandwidth)
    rows = []
    n_ok = 0
    if args.method == "local-linear":
        for x, fit in fit_curve(fld, points, bw, kernel):
            xs = [_fmt(v) for v in x]
            if fit.ok:
                n_ok += 1
                rows.append(
                    xs + [_fmt(fit.g_hat)] + [_fmt(v) for v in fit.grad_hat]
                    + [_fmt(fit.rcond), str(fit.support_count), "ok"]
                )
            else:
                rows.append(xs + [""] * (d + 1) + [_fmt(fit.rcond), str(fit.support_count), fit.status])
    else:
        for x in points:
            val = nadaraya_watson(fld, x, bw, kernel)
            xs = [_fmt(v) for v in x]
            if isinstance(val, float):
                n_ok += 1
                rows.append(xs + [_fmt(val)] + [""] * d + ["", "", "ok"])
            else:
                rows.append(xs + [""] * (d + 1) + ["", "0", "empty"])
    write_text_atomic(args.out, _curve_text(rows, d))
    if points.shape[0] and n_ok == 0:
        print("estimate: every fit failed", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _floats(text, name):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"--{name} must be a comma-separated list of numbers") from None


def cmd_asymptotics(args) -> int:
    d = args.d
    kernel = KernelSpec(args.kernel, d)
    x = _floats(args.x, "x") if args.x is not None else [0.0] * d
    if len(x) != d:
        raise UsageError(f"--x needs {d} value(s)")
    hess = _floats(args.hessian, "hessian") if args.hessian is not None else [0.0] * (d * d)
    if len(hess) == d and d > 1:
        H = np.diag(hess)
    elif len(hess) == d * d:
        H = np.array(hess).reshape(d, d)
    else:
        raise UsageError(f"--hessian needs {d * d} values (row-major) or {d} diagonal values")
    model = TrueModel(
        f=lambda _: args.density,
        g=lambda _: 0.0,
        cond_var=lambda _: args.cond_var,
        g_grad=lambda _: np.zeros(d),
        g_hess=lambda _: H,
    )
    want_var = args.density > 0
    q = limit_quantities(model, x, kernel, variances=want_var)
    out = {
        "kernel": kernel.family,
        "d": d,
        "x": x,
        "U": q.u_limit.tolist(),
        "Sigma": q.sigma_limit.tolist(),
        "B0": q.b0,
        "B1": q.b1.tolist(),
        "Bg": q.bg,
        "sigma0_sq": q.var0,
        "sigma1_sq": None if q.var1 is None else q.var1.tolist(),
    }
    if args.boundary_c is not None:
        bg, v0, v1 = boundary_quantities(model, args.boundary_c, kernel)
        out["boundary"] = {"c": args.boundary_c, "Bg": bg, "sigma0_sq": v0, "sigma1_sq": v1}
    text = _dump_json(out)
    if args.out:
        write_text_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def experiment_outputs(cfg: ExperimentConfig, res) -> dict[str, str]:
    """File name -> text for every artifact of an experiment run."""
    curves = io.StringIO()
    curves.write("replication,x,g_hat,status\n")
    for r in range(res.curves.shape[0]):
        for k, x in enumerate(res.x_grid):
            curves.write(f"{r + 1},{_fmt(x)},{_fmt(res.curves[r, k])},{res.status[r, k]}\n")
    summary = io.StringIO()
    summary.write("x,mean,sd,count\n")
    for k, x in enumerate(res.x_grid):
        summary.write(f"{_fmt(x)},{_fmt(res.summary_mean[k])},{_fmt(res.summary_sd[k])},{res.summary_count[k]}\n")
    nsr = io.StringIO()
    nsr.write("replication,nsr,nsr_truth\n")
    for r, v in enumerate(res.nsr):
        vt = None if res.nsr_truth is None else res.nsr_truth[r]
        nsr.write(f"{r + 1},{_fmt(v)},{_fmt(vt)}\n")
    scatter = io.StringIO()
    d = res.scatter.covariate_dim
    scatter.write(",".join([f"x{k}" for k in range(1, d + 1)] + ["y"]) + "\n")
    for xv, yv in zip(res.scatter.x, res.scatter.y):
        scatter.write(",".join([_fmt(v) for v in xv] + [_fmt(yv)]) + "\n")
    info = {
        "config": config_to_dict(cfg),
        "replications": int(res.curves.shape[0]),
        "grid_points": int(res.x_grid.size),
        "nsr_mean": res.nsr_mean,
        "nsr_truth_mean": None if res.nsr_truth is None else float(np.mean(res.nsr_truth)),
        "failures": res.failures,
    }
    return {
        "curves.csv": curves.getvalue(),
        "summary.csv": summary.getvalue(),
        "nsr.csv": nsr.getvalue(),
        "scatter.csv": scatter.getvalue(),
        "summary.json": _dump_json(info),
    }


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    res = run_experiment(cfg, threads=args.threads)
    os.makedirs(args.out_dir, exist_ok=True)
    for name, text in experiment_outputs(cfg, res).items():
        write_text_atomic(os.path.join(args.out_dir, name), text)
    if res.failures == res.curves.size:
        print("experiment: every fit failed", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_diagnose(args) -> int:
    cfg = load_config(args.config)
    spec = cfg.model
    x0 = _floats(args.x0, "x0")
    if spec.kind == "iid":
        truth = iid_truth(spec.d, spec.protocol.noise_sd)
    elif spec.kind == "model1":
        truth = model1_truth(plugin_density(cfg), spec.protocol.noise_sd)
    else:
        raise UsageError("diagnose needs a model with a known regression function (iid or model1)")
    diag = normality_diagnostics(cfg, truth, x0, threads=args.threads)
    out = {
        "config": config_to_dict(cfg),
        "x0": x0,
        "successful_replications": int(diag.z0.size),
        "failures": diag.failures,
        "mean_z0": diag.mean_z0,
        "var_z0": diag.var_z0,
        "ks_stat": diag.ks_stat,
        "ks_pvalue": diag.ks_pvalue,
        "corr_g_grad": diag.corr_g_grad,
    }
    text = _dump_json(out)
    if args.out:
        write_text_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lattice-llr", description="Local-linear regression for lattice random fields.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="generate a synthetic lattice field")
    s.add_argument("--model", choices=MODEL_KINDS, required=True)
    s.add_argument("--preset", choices=sorted(PRESETS), default="X0", help="model2 covariate lags")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--d", type=int, default=1, help="covariate dimension (iid only)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--margin", type=int, default=75)
    s.add_argument("--sweeps", type=int, default=20)
    s.add_argument("--noise-sd", type=float, default=1.0)
    s.add_argument("--order", choices=SWEEP_ORDERS, default="raster")
    s.add_argument("--redraw-noise", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="fit a curve to a lattice CSV")
    e.add_argument("--in", dest="input", required=True)
    e.add_argument("--bandwidth", type=float, required=True)
    e.add_argument("--kernel", choices=FAMILIES, default="epanechnikov")
    e.add_argument("--grid", action="append", required=True, help="lo:hi:count; repeat per dimension")
    e.add_argument("--method", choices=("local-linear", "nadaraya-watson"), default="local-linear")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_estimate)

    a = sub.add_parser("asymptotics", help="limit quantities from point values of f, g'' and Var(Y|X)")
    a.add_argument("--kernel", choices=FAMILIES, default="epanechnikov")
    a.add_argument("--d", type=int, default=1)
    a.add_argument("--x", help="evaluation point, comma-separated (reported only)")
    a.add_argument("--density", type=float, required=True, help="f(x)")
    a.add_argument("--cond-var", type=float, required=True, help="Var(Y | X = x)")
    a.add_argument("--hessian", help="g''(x), row-major or diagonal, comma-separated")
    a.add_argument("--boundary-c", type=float, help="also report boundary quantities at x = c*b (d = 1)")
    a.add_argument("--out")
    a.set_defaults(func=cmd_asymptotics)

    x = sub.add_parser("experiment", help="run a replicated Monte Carlo experiment")
    x.add_argument("--config", required=True)
    x.add_argument("--out-dir", required=True)
    x.add_argument("--threads", type=int, default=None, help="overrides LATTICE_LLR_THREADS")
    x.set_defaults(func=cmd_experiment)

    g = sub.add_parser("diagnose", help="check the limit law of standardized errors at a point")
    g.add_argument("--config", required=True)
    g.add_argument("--x0", default="0")
    g.add_argument("--threads", type=int, default=None)
    g.add_argument("--out")
    g.set_defaults(func=cmd_diagnose)
    return p


_VALUE_FLAGS = ("--grid", "--x0", "--x", "--hessian")


def _join_values(argv):
    # values such as "-2:2:101" would otherwise be read as option names
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_join_values(argv))
        return args.func(args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InsufficientReplications, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (LatticeLLRError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
