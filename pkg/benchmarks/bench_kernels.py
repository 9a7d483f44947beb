"""Time the compiled kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--sizes 200 2000 20000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from lifegraph._kernels import backends


def _efron_inputs(rng, n, p=8):
    X = rng.normal(size=(n, p))
    T = np.sort(rng.integers(0, 21, size=n)).astype(float)
    E = (rng.random(n) < 0.6).astype(float)
    return X, T, E, rng.normal(scale=0.2, size=p)


def _concordance_inputs(rng, n):
    return rng.normal(size=n), rng.integers(0, 21, size=n).astype(float), rng.integers(0, 2, size=n).astype(float)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[200, 2000, 20000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    mods = backends()
    if "cython" not in mods:
        print("compiled kernels not built; only the python backend is timed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<12} {'n':>7} " + " ".join(f"{name + ' [ms]':>14}" for name in mods) + f" {'speedup':>9}")
    for n in args.sizes:
        ef = _efron_inputs(rng, n)
        co = _concordance_inputs(rng, n)
        for kernel, inputs in (("efron", ef), ("concordance", co)):
            best = {}
            for name, mod in mods.items():
                fn = getattr(mod, "efron_terms" if kernel == "efron" else "concordance_counts")
                times = timeit.repeat(lambda: fn(*inputs), number=1, repeat=args.repeat)
                best[name] = 1e3 * min(times)
            speed = best["python"] / best["cython"] if "cython" in best else float("nan")
            print(f"{kernel:<12} {n:>7} " + " ".join(f"{best[name]:>14.3f}" for name in mods) + f" {speed:>8.1f}x")


if __name__ == "__main__":
    main()
