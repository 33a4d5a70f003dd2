"""Throughput of the compiled hitting-time kernel against the pure-Python twin.

Usage::

    python3 benchmarks/bench_kernel.py [--K 2] [--L 2] [--beta 2.0] [--steps 2000000]

Both backends consume the same uniforms from the same start, so besides the
timing the script checks that they end in the same state.
"""
import argparse
import time

import numpy as np

from hardhex import _kernel_py, build_grid, stable_configs
from hardhex.dynamics import Walker, substream

try:
    from hardhex._kernel import advance as compiled_advance
except ImportError:  # extension not built
    compiled_advance = None


def run(advance, grid, beta, steps, seed):
    a, b, c = stable_configs(grid)
    w = Walker(a, beta, substream(seed, 0, 0), advance=advance)
    t0 = time.perf_counter()
    w.run([b, c], steps)  # hitting b or c stops early; the step count is what is timed
    dt = time.perf_counter() - t0
    return w.steps, dt, w.state_bits()


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, default=2)
    ap.add_argument("--L", type=int, default=2)
    ap.add_argument("--beta", type=float, default=4.0)
    ap.add_argument("--steps", type=int, default=2_000_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)
    grid = build_grid((args.K, args.L))

    n_py, t_py, end_py = run(_kernel_py.advance, grid, args.beta, args.steps, args.seed)
    rows = [("python", n_py, t_py)]
    if compiled_advance is not None:
        n_c, t_c, end_c = run(compiled_advance, grid, args.beta, args.steps, args.seed)
        rows.append(("cython", n_c, t_c))
        assert (n_c, end_c) == (n_py, end_py), "backends disagree"
    print(f"grid {2 * args.K}x{3 * args.L}, beta={args.beta}")
    print(f"{'backend':<8} {'steps':>12} {'seconds':>9} {'steps/s':>14}")
    for name, n, t in rows:
        print(f"{name:<8} {n:>12d} {t:>9.3f} {n / t:>14.4g}")
    if len(rows) == 2:
        print(f"speedup: {(rows[1][1] / rows[1][2]) / (rows[0][1] / rows[0][2]):.1f}x")
    else:
        print("compiled kernel not built; only the fallback was timed")
    return np.array([r[1] / r[2] for r in rows])


if __name__ == "__main__":
    main()
