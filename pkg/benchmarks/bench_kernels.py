#!/usr/bin/env python3
"""Numba versus fallback timings for the hot kernels and one pipeline run.

Kernel timings compare the compiled functions against the fallbacks in the
same process. The pipeline timing runs a child interpreter per backend, with
HYPOPROP_DISABLE_NUMBA toggled, so the switch is exercised as users see it.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from hypoprop import kernels
from hypoprop.mwis import random_graph


def best_of(fn, repeat, number=1):
    fn()  # warm-up (includes compilation)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(number):
            fn()
        times.append((time.perf_counter() - t0) / number)
    return min(times)


def kernel_rows(repeat):
    rng = np.random.default_rng(0)
    mask = rng.random((480, 854)) < 0.3
    flow = rng.normal(0, 3, (480, 854, 2)).astype(np.float32)
    other = rng.random((480, 854)) < 0.3
    g = random_graph(40, 0.3, rng)
    adj = g.adjacency()
    small = random_graph(20, 0.3, rng)
    bits = small.adjacency_bits()

    rows = []
    pairs = [
        ("warp_forward 854x480", lambda: kernels.warp_forward_numba(mask, flow), lambda: kernels.warp_forward_numpy(mask, flow), 5),
        ("overlap_counts 854x480", lambda: kernels.overlap_counts_numba(mask, other), lambda: kernels.overlap_counts_numpy(mask, other), 5),
        ("pls_search 40 nodes", lambda: kernels.pls_search_numba(g.weights, adj, 1, 10_000, 100), lambda: kernels.pls_search_python(g.weights, adj, 1, 10_000, 100), 1),
        ("mwis_enumerate 20 nodes", lambda: kernels.mwis_enumerate_numba(small.weights, bits), lambda: kernels.mwis_enumerate_python(small.weights, bits), 1),
    ]
    for name, fast, slow, number in pairs:
        t_slow = best_of(slow, repeat, number)
        t_fast = best_of(fast, repeat, number) if kernels.HAS_NUMBA else float("nan")
        rows.append((name, t_fast, t_slow))
    return rows


CHILD = """
import json, time
from hypoprop import Params, run_pipeline
from hypoprop.synth import SynthConfig, ObjectSpec, DetectorConfig, synth_scenario
objs = [ObjectSpec("rect", (28, 28), (16, 56), (2, 0), depth=1),
        ObjectSpec("ellipse", (24, 24), (112, 66), (-2, 0), occlusion=(22, 27))]
s = synth_scenario(SynthConfig(128, 128, 40, objs, DetectorConfig(miss_prob=0.1, jitter=2.0)))
run_pipeline(s, Params(max_coast=8), "flowprop")
t = time.perf_counter()
r = run_pipeline(s, Params(max_coast=8), "flowprop")
print(json.dumps({"seconds": time.perf_counter() - t}))
"""


def pipeline_seconds(disable):
    env = dict(os.environ)
    env["HYPOPROP_DISABLE_NUMBA"] = "1" if disable else "0"
    out = subprocess.run([sys.executable, "-c", CHILD], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])["seconds"]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-pipeline", action="store_true")
    args = ap.parse_args()

    print(f"numba available: {kernels.HAS_NUMBA}")
    print(f"{'kernel':<26}{'numba [ms]':>12}{'fallback [ms]':>15}{'speed-up':>10}")
    for name, fast, slow in kernel_rows(args.repeat):
        print(f"{name:<26}{fast * 1e3:>12.3f}{slow * 1e3:>15.3f}{slow / fast:>9.1f}x")
    if not args.skip_pipeline:
        fast = pipeline_seconds(False)
        slow = pipeline_seconds(True)
        print(f"{'pipeline 40x128x128':<26}{fast * 1e3:>12.1f}{slow * 1e3:>15.1f}{slow / fast:>9.1f}x")


if __name__ == "__main__":
    main()
