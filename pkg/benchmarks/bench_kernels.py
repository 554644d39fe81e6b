"""Compiled vs pure-Python kernel timings.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--csv out.csv]

Also checks that both backends agree on every input.
"""
import argparse
import csv
import sys
import timeit

import numpy as np

from specvae import _kernels_py

try:
    from specvae import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    for b, n, m in ((8, 256, 256), (32, 1024, 256)):
        a = rng.standard_normal((b, n, 3))
        c = rng.standard_normal((b, m, 3))
        yield f"nearest_sqdist {b}x{n}x{m}", "nearest_sqdist", (a, c)
    for n in (200, 600):
        x = rng.standard_normal((n, n))
        yield f"tridiagonalize n={n}", "tridiagonalize", (x + x.T,)
    for n in (200, 600):
        x = rng.standard_normal((n, n))
        d, e = _kernels_py.tridiagonalize(x + x.T)
        yield f"tql_eigenvalues n={n}", "tql_eigenvalues", (d, e)


def _tri_eigs(d, e):
    t = np.diag(d) + np.diag(e[1:], 1) + np.diag(e[1:], -1)
    return np.linalg.eigvalsh(t)


def _same(a, b, name=""):
    if name == "tridiagonalize":
        # backends may reduce in different orders; the tridiagonal forms are similar matrices
        return _same(_tri_eigs(*a), _tri_eigs(*b))
    if name == "tql_eigenvalues":
        return _same(np.sort(a), np.sort(b))
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-9, atol=1e-9)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--csv", default=None)
    args = p.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    rows = []
    print(f"{'kernel':32s} {'python ms':>10s} {'compiled ms':>12s} {'speedup':>8s}")
    for label, name, inputs in cases(rng):
        py, cy = getattr(_kernels_py, name), getattr(_kernels, name)
        if not _same(py(*[np.copy(x) for x in inputs]), cy(*[np.copy(x) for x in inputs]), name):
            print(f"{label}: backends disagree", file=sys.stderr)
            return 1
        t_py = min(timeit.repeat(lambda: py(*[np.copy(x) for x in inputs]), number=1, repeat=args.repeat)) * 1e3
        t_cy = min(timeit.repeat(lambda: cy(*[np.copy(x) for x in inputs]), number=1, repeat=args.repeat)) * 1e3
        rows.append((label, t_py, t_cy, t_py / t_cy))
        print(f"{label:32s} {t_py:10.2f} {t_cy:12.2f} {t_py / t_cy:7.1f}x")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kernel", "python_ms", "compiled_ms", "speedup"])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
