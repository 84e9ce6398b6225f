"""Compare the compiled and numpy Jost march kernels.

Usage: python benchmarks/bench_march.py [--repeat N]

Both backends march the same first left Jost solution for the bump pair on
grids of 1024 to 8192 nodes; the table lists the best wall time per backend
and the largest difference between their outputs.
"""

import argparse
import timeit

import numpy as np

from laxscatter import _kernels
from laxscatter.field import make_grid, standard_potential
from laxscatter.jost import _midpoint_u0, support_window
from laxscatter.lax import build_qdnls_spec


def march_inputs(n: int, k: float = 4.0):
    grid = make_grid(20.0, n)
    spec = build_qdnls_spec(standard_potential("bump", 0.3, 2.0, 0.0, grid),
                            standard_potential("bump", 0.3j, 2.0, 0.2, grid), k)
    a, b = support_window(spec)
    d = spec.k * (spec.J.array - spec.J.array[0])
    p0 = np.eye(spec.n, dtype=complex)[0]
    return spec.u0_values[a:b + 1], _midpoint_u0(spec)[a:b], d, grid.dx, p0


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = list(_kernels.KERNELS)
    print(f"{'nodes':>6} " + " ".join(f"{b + ' [ms]':>14}" for b in backends) + f" {'speedup':>8} {'max diff':>10}")
    for n in (1024, 2048, 4096, 8192):
        args_ = march_inputs(n)
        times, outs = {}, {}
        for b in backends:
            outs[b] = _kernels.march(*args_, backend=b)
            times[b] = min(timeit.repeat(lambda: _kernels.march(*args_, backend=b), number=1, repeat=args.repeat))
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        diff = max(float(np.max(np.abs(outs[b] - outs["python"]))) for b in backends)
        print(f"{n:>6} " + " ".join(f"{1e3 * times[b]:>14.3f}" for b in backends) + f" {speed:>8.1f} {diff:>10.1e}")


if __name__ == "__main__":
    main()
