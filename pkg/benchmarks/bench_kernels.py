"""Compare the compiled and pure-Python kernels.

Times annealing and one full MQC tournament level on an FCL instance with
each available backend, checks that both backends produce identical output,
and prints the speedup.

    python benchmarks/bench_kernels.py --c 4 --samples 256
"""

import argparse
import time

import numpy as np

from fclmqc.fcl import FclConfig, generate_instance
from fclmqc.kernels import available_backends
from fclmqc.sampler import DEFAULT_ANNEAL


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--c", type=int, default=4, help="Chimera side length")
    ap.add_argument("--alpha", type=float, default=0.1)
    ap.add_argument("--samples", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    p = generate_instance(FclConfig(c=args.c, alpha=args.alpha, seed=1)).problem
    g = p.graph
    betas = DEFAULT_ANNEAL.betas()
    backends = available_backends()
    print(f"instance: c={args.c}, {p.num_qubits} qubits, samples={args.samples}, "
          f"sweeps={DEFAULT_ANNEAL.sweeps}; backends: {', '.join(backends)}")

    results = {}
    for name, mod in backends.items():
        t_anneal, (spins, _) = best_of(
            lambda: mod.anneal(g.indptr, g.nbrs, p.nbr_weights, p.a, betas, 0, 0, args.samples, False),
            args.repeat)
        t_mqc, reduced = best_of(
            lambda: mod.combine_level(g.indptr, g.nbrs, p.nbr_weights, p.a, p.gauge, p.num_gauge, spins),
            args.repeat)
        results[name] = (t_anneal, t_mqc, spins, reduced)
        print(f"{name:>7}: anneal {t_anneal * 1e3:9.2f} ms   mqc level {t_mqc * 1e3:9.2f} ms")

    if "cython" in results:
        py, cy = results["python"], results["cython"]
        same = np.array_equal(py[2], cy[2]) and np.array_equal(py[3], cy[3])
        print(f"speedup: anneal x{py[0] / cy[0]:.1f}, mqc x{py[1] / cy[1]:.1f}; identical output: {same}")
    else:
        print("compiled backend not built; only the Python fallback was timed")


if __name__ == "__main__":
    main()
