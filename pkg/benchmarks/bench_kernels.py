"""Compare the numba and numpy backends of the pairwise update kernels.

    python benchmarks/bench_kernels.py [--sizes 100,400,900] [--repeat 5]

Reports the best-of-``repeat`` wall time per call and the numpy/numba ratio.
A full blurring run is also timed since it is what the studies spend time on.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from meanshift_lab import _kernels
from meanshift_lab.core_math.weights import WeightFunction
from meanshift_lab.process import ConvergenceConfig, ProcessState


def _best(fn, repeat: int) -> float:
    number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-6)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def _run_blurring(update, x, w, cfg):
    state = ProcessState.initial(x)
    pts = state.points
    for _ in range(cfg.max_iter):
        new = update(pts, w.code, w.scale)
        if np.max(np.abs(new - pts)) <= cfg.tol:
            break
        pts = new
    return pts


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="100,400,900")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--weight", default="normal:1")
    args = ap.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]
    w = WeightFunction.parse(args.weight)
    backends = _kernels.available_backends()
    kernels = {b: _kernels.kernels_for(b) for b in backends}
    rng = np.random.default_rng(0)
    cfg = ConvergenceConfig()

    # warm the JIT before timing
    for b in backends:
        kernels[b][0](rng.standard_normal(8), w.code, w.scale)
        kernels[b][1](rng.standard_normal(8), rng.standard_normal(8), w.code, w.scale)

    print(f"weight {w.spec()}  backends {', '.join(backends)}")
    print(f"{'kernel':<22}{'n':>6}" + "".join(f"{b + ' (ms)':>14}" for b in backends) + f"{'ratio':>9}")
    for n in sizes:
        x = rng.standard_normal(n)
        cases = {
            "blurring_update": lambda k: (lambda: k[0](x, w.code, w.scale)),
            "nonblurring_update": lambda k: (lambda: k[1](x * 0.5, x, w.code, w.scale)),
            "blurring run": lambda k: (lambda: _run_blurring(k[0], x, w, cfg)),
        }
        for name, make in cases.items():
            times = {b: _best(make(kernels[b]), args.repeat) for b in backends}
            ratio = times["numpy"] / times["numba"] if "numba" in times else float("nan")
            print(f"{name:<22}{n:>6}" + "".join(f"{1e3 * times[b]:>14.3f}" for b in backends) + f"{ratio:>9.1f}")


if __name__ == "__main__":
    main()
