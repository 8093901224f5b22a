"""
Compare the Numba and NumPy backends of the pairwise kernels.

Usage::

    python benchmarks/bench_kernels.py [--n 500 1000 2000] [--repeat 5]

For each problem size the script times ``radial_matrix``, ``pair_sum``,
``green_sum`` and ``dressed_pair_sum`` on random point clouds under both
backends, checks that the results agree, and prints one table row per
(kernel, n).  The first Numba call is excluded (JIT compilation).
"""

import argparse
import time

import numpy as np

from pncollapse import _accel


def _cases(n, rng):
    pos = rng.normal(size=(n, 3))
    w = rng.normal(size=n)
    tmat = rng.normal(size=(n, 3, 3))
    tgt = rng.normal(size=(max(1, n // 10), 3)) + 10.0
    return {
        "radial_matrix": lambda: _accel.radial_matrix(pos, pos, 0.1, _accel.GAUSSIAN),
        "pair_sum": lambda: _accel.pair_sum(pos, w, pos, w, 0.1, _accel.COULOMB),
        "green_sum": lambda: _accel.green_sum(pos, w, tgt),
        "dressed_pair_sum": lambda: _accel.dressed_pair_sum(pos, tmat, 0.1, _accel.GAUSSIAN),
    }


def _best(fn, repeat):
    out, best = None, np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best


def run(sizes, repeat=5, seed=0):
    rows = []
    for n in sizes:
        cases = _cases(n, np.random.default_rng(seed))
        for name, fn in cases.items():
            timings, results = {}, {}
            for backend in ("numba", "numpy"):
                _accel.set_backend(backend)
                fn()  # warm-up (JIT compile on first numba call)
                results[backend], timings[backend] = _best(fn, repeat)
            a, b = np.asarray(results["numba"]), np.asarray(results["numpy"])
            rel = float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))
            rows.append((name, n, timings["numba"], timings["numpy"], rel))
    _accel.set_backend("numba")
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    ap.add_argument("--n", type=int, nargs="+", default=[500, 1000, 2000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':<18}{'n':>7}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>9}{'max rel diff':>14}")
    for name, n, t_nb, t_np, rel in run(args.n, args.repeat):
        print(f"{name:<18}{n:>7}{t_nb:>12.4e}{t_np:>12.4e}{t_np / t_nb:>9.1f}{rel:>14.2e}")


if __name__ == "__main__":
    main()
