"""Benchmark the compiled sampling/scoring kernels against the NumPy
fallback.

Times one optimizer iteration's worth of work (sample a batch of feasible
assignments, then score it) for a few problem sizes, verifies that both
backends return identical assignments, and prints the speedup.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import math
import time

import numpy as np

from ceassoc import _kernels_py
from ceassoc.assoc import LoadCaps, UtilitySpec, utility_kernel_inputs
from ceassoc.netmodel import ScenarioConfig, compute_link_gains, \
    generate_deployment

try:
    from ceassoc import _kernels as _compiled
except ImportError:
    _compiled = None

CASES = [
    # (n_users, n_sbs, n_samples) - the middle row is the benchmark default
    (6, 2, 500),
    (30, 3, 500),
    (60, 3, 1000),
]


def bench_case(backend, gains, value, n_samples, repeats):
    n_users, n_bs = gains.n_users, gains.n_bs
    u = np.full((n_users, n_bs), 0.5)
    cap = LoadCaps.inactive(n_users, n_bs).cap
    best = math.inf
    assignments = None
    for r in range(repeats):
        start = time.perf_counter()
        assignments = backend.sample_assignments(u, cap, 1, 0, 0, n_samples,
                                                 20, 100)
        backend.score_assignments(assignments, value, 0, 1.0)
        best = min(best, time.perf_counter() - start)
    return best, assignments


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7,
                        help="timing repeats per case (best is reported)")
    args = parser.parse_args()

    if _compiled is None:
        print("compiled backend not built; timing the NumPy fallback only")

    print(f"{'case':<24}{'python':>12}{'compiled':>12}{'speedup':>10}")
    for n_users, n_sbs, n_samples in CASES:
        scenario = ScenarioConfig(n_users=n_users, n_sbs=n_sbs)
        gains = compute_link_gains(generate_deployment(scenario, 1))
        value, _, _ = utility_kernel_inputs(gains, UtilitySpec("logarithmic"))
        t_py, a_py = bench_case(_kernels_py, gains, value, n_samples,
                                args.repeats)
        label = f"I={n_users} J={n_sbs + 1} S={n_samples}"
        if _compiled is None:
            print(f"{label:<24}{t_py * 1e3:>10.2f}ms{'-':>12}{'-':>10}")
            continue
        t_c, a_c = bench_case(_compiled, gains, value, n_samples, args.repeats)
        if not np.array_equal(a_py, a_c):
            print(f"{label:<24}BACKEND MISMATCH")
            return 1
        print(f"{label:<24}{t_py * 1e3:>10.2f}ms{t_c * 1e3:>10.2f}ms"
              f"{t_py / t_c:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
