"""Compare the numba and pure-numpy backends on the two hot kernels.

Usage: ``python3 benchmarks/bench_backends.py [--repeat 5]``
"""

import argparse
import time

import numpy as np

from lattice_llr import _accel
from lattice_llr._kernels import design_sums
from lattice_llr.simulator import sweep_field


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    noise = rng.standard_normal((180, 190))
    X = rng.uniform(-1, 1, size=(30 * 40, 1))
    Y = rng.standard_normal(30 * 40)
    P = np.linspace(-1, 1, 101)[:, None]

    cases = {
        "sweep_field 180x190, 20 sweeps": lambda: sweep_field(noise, 20),
        "design_sums n=1200, 101 points": lambda: design_sums(X, Y, P, 0.3, 0, float(X.shape[0]) * 0.3),
    }
    backends = ["numpy"] + (["numba"] if _accel.HAS_NUMBA else [])
    print(f"{'case':<34}" + "".join(f"{b:>12}" for b in backends))
    for name, fn in cases.items():
        row = []
        for backend in backends:
            with _accel.use_backend(backend):
                fn()  # warm up / compile
                row.append(best_of(fn, args.repeat))
        print(f"{name:<34}" + "".join(f"{t * 1e3:>10.2f}ms" for t in row))


if __name__ == "__main__":
    main()
