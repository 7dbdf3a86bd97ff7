"""Compare the compiled and numpy kernel backends on one solver step.

    python benchmarks/bench_kernels.py --n 512 --repeat 20
"""
import argparse
import json
import time

import numpy as np

from defectlab import kernels


def _field(shape, comps, seed=0):
    rng = np.random.default_rng(seed)
    u = np.ascontiguousarray(np.tanh(rng.standard_normal((comps,) + shape)))
    return u, np.zeros_like(u), np.zeros_like(u)


def _time(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench(shape, comps, repeat, threads):
    h = [1.0 / n for n in shape]
    periodic = [True] * len(shape)
    rows = {}
    for name in ("python", "cython"):
        try:
            mod = kernels.backend_module(name)
        except ImportError:
            continue
        u, ut, acc = _field(shape, comps)

        def one_step():
            kernels.drift(u, ut, acc, 1e-4, 2e-4, threads, module=mod)
            kernels.acceleration(u, acc, h, 100.0, periodic, 2, threads, module=mod,
                                 kick=ut, kick_dt=1e-4)

        step = _time(one_step, repeat)
        en = _time(lambda: kernels.energy(u, ut, h, 25.0, periodic, threads, module=mod), repeat)
        rows[name] = {"step_s": step, "energy_s": en,
                      "mnodes_per_s": np.prod(shape) / step / 1e6}
    if len(rows) == 2:
        rows["speedup"] = rows["python"]["step_s"] / rows["cython"]["step_s"]
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--n3", type=int, default=96, help="edge of the 3-D vector benchmark")
    ap.add_argument("--repeat", type=int, default=10)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    out = {"scalar_2d": bench((args.n, args.n), 1, args.repeat, args.threads),
           "vector_3d": bench((args.n3,) * 3, 2, args.repeat, args.threads)}
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
