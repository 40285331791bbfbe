#!/usr/bin/env python3
"""Time the compiled and pure-numpy loop backends on identical inputs.

Both backends consume the same pre-drawn uniforms, so every discrete
output (assignments, purchases, phase labels) must agree exactly; the
table below reports best-of-N wall times and the resulting speedup, plus
that equality check. The first compiled call pays the JIT cost, so a
small warmup run precedes the timed sizes.

Usage:
    python3 benchmarks/bench_backends.py [--sizes 20000,100000]
                                         [--repeats 3] [--seed 7]
"""

import argparse
import time

import numpy as np

from allocsim._kernels import available_backends
from allocsim.arrivals import sample_stream
from allocsim.harness import expected_type_weights, greedy_baseline
from allocsim.integrated import run_integrated
from allocsim.model import scenario_stationary


def best_of(fn, repeats):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_size(T, seed, repeats, backends):
    config = scenario_stationary(T, seed)
    stream = sample_stream(config.arrivals, T, seed, config.params.grid_dt)
    weights = expected_type_weights(config)
    timings = {}
    traces = {}
    for backend in backends:
        t_online, trace = best_of(
            lambda b=backend: run_integrated(config, stream, weights, backend=b),
            repeats,
        )
        t_greedy, gtrace = best_of(
            lambda b=backend: greedy_baseline(
                config.instance, stream, seed, backend=b
            ),
            repeats,
        )
        timings[backend] = (t_online, t_greedy)
        traces[backend] = (trace, gtrace)
    return timings, traces


def outputs_match(traces):
    if len(traces) < 2:
        return "n/a"
    (ta, ga), (tb, gb) = (traces[b] for b in ("numba", "numpy"))
    same = (
        np.array_equal(ta.assigned, tb.assigned)
        and np.array_equal(ta.purchased, tb.purchased)
        and np.array_equal(ga.assigned, gb.assigned)
        and np.allclose(ta.f_vals, tb.f_vals, rtol=1e-10, atol=1e-12)
    )
    return "yes" if same else "NO"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="20000,100000")
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",") if s]

    backends = available_backends()
    if "numba" in backends:
        bench_size(500, args.seed, 1, ("numba",))  # JIT warmup
    else:
        print("numba is not importable; timing the numpy backend alone\n")

    header = f"{'T':>8}  {'loop':<8}" + "".join(
        f"  {b + ' (s)':>11}" for b in backends
    )
    if len(backends) == 2:
        header += f"  {'speedup':>8}  {'match':>5}"
    print(header)
    print("-" * len(header))
    for T in sizes:
        timings, traces = bench_size(T, args.seed, args.repeats, backends)
        match = outputs_match(traces)
        for row, label in ((0, "online"), (1, "greedy")):
            cells = f"{T:>8}  {label:<8}" + "".join(
                f"  {timings[b][row]:>11.4f}" for b in backends
            )
            if len(backends) == 2:
                ratio = timings["numpy"][row] / timings["numba"][row]
                cells += f"  {ratio:>7.1f}x  {match if row == 0 else '':>5}"
            print(cells)


if __name__ == "__main__":
    main()
