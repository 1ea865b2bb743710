#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Kernel micro-benchmarks run both backends in-process; the end-to-end solver
comparison re-launches the interpreter with MMVNMF_BACKEND pinned, since the
backend is chosen at import time.

Usage: python benchmarks/bench_backends.py [--quick]
"""

import argparse
import os
import random
import subprocess
import sys
import time
from array import array

from mmvnmf import _kernels_py

try:
    from mmvnmf import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

END_TO_END = r"""
import random, time
import mmvnmf as m
from mmvnmf.data import ModalitySpec, ViewSpec, synth_multimodal

specs = [ModalitySpec("a", (ViewSpec("v0", 12, 0.3), ViewSpec("v1", 10, 0.3))),
         ModalitySpec("b", (ViewSpec("v0", 8, 0.3),))]
mats, _ = synth_multimodal(120, 3, specs, seed=7)
tree = m.ModalityTree.from_matrices(mats, 3)
cfg = m.NmfConfig(k=3, max_iter=%d, rel_tol=1e-9, seed=1, restarts=2)
start = time.perf_counter()
run_collab = m.run_collaborative_nmf(tree, cfg)
print(f"{m.BACKEND} {time.perf_counter() - start:.3f}")
"""


def bench(fn, *args, repeats=5, min_time=0.05):
    # best-of-repeats, each repeat looped until it takes min_time
    loops = 1
    while True:
        t0 = time.perf_counter()
        for _ in range(loops):
            fn(*args)
        if time.perf_counter() - t0 >= min_time:
            break
        loops *= 2
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(loops):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / loops)
    return best


def kernel_cases(rng):
    def buf(n, lo=0.0, hi=1.0):
        return array("d", [rng.uniform(lo, hi) for _ in range(n)])

    m, k, n = 40, 4, 200
    a, b = buf(m * k), buf(k * n)
    a_wide, b_tall = buf(k * m), buf(m * n)
    big = buf(m * n)
    big2 = buf(m * n, 0.1, 1.0)
    return [
        ("matmul 40x4 @ 4x200", lambda ker: ker.matmul(a, m, k, b, n)),
        ("matmul 4x40 @ 40x200", lambda ker: ker.matmul(a_wide, k, m, b_tall, n)),
        ("hadamard 40x200", lambda ker: ker.hadamard(big, big2)),
        ("divide_guarded 40x200", lambda ker: ker.divide_guarded(big, big2, 1e-12)),
        ("frobenius_sq 40x200", lambda ker: ker.frobenius_sq(big)),
        ("transpose 40x200", lambda ker: ker.transpose(big, m, n)),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="fewer repeats")
    args = parser.parse_args()
    repeats = 2 if args.quick else 5

    if _kernels_c is None:
        print("compiled extension not built; kernel comparison skipped")
    else:
        rng = random.Random(0)
        print(f"{'kernel':28s} {'python':>10s} {'compiled':>10s} {'speedup':>8s}")
        for name, call in kernel_cases(rng):
            t_py = bench(call, _kernels_py, repeats=repeats)
            t_c = bench(call, _kernels_c, repeats=repeats)
            print(f"{name:28s} {t_py * 1e6:9.1f}us {t_c * 1e6:9.1f}us {t_py / t_c:7.1f}x")

    iters = 40 if args.quick else 120
    print()
    print("end-to-end collaborative run (3 views, 120 objects):")
    for backend in ("py", "c"):
        if backend == "c" and _kernels_c is None:
            continue
        env = dict(os.environ, MMVNMF_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, "-c", END_TO_END % iters],
            capture_output=True, text=True, env=env,
        )
        if out.returncode != 0:
            print(f"  backend {backend}: failed\n{out.stderr}")
        else:
            name, seconds = out.stdout.split()
            print(f"  backend {name}: {float(seconds):8.3f} s")


if __name__ == "__main__":
    main()
