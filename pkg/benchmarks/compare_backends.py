"""Fit-time comparison of the compiled scan kernel against the Python fallback.

Usage: python benchmarks/compare_backends.py [--sizes 10000,20000,40000] [--repeats 3]

The backend is chosen at import time, so each measurement runs in a fresh
subprocess with PARTITION_TREE_BACKEND set.
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from partition_tree import kernels
from partition_tree.synthetic import StepUniform
from partition_tree.tree import FitConfig, fit

sizes = json.loads(sys.argv[1])
repeats = int(sys.argv[2])
gen = StepUniform(n_noise=1)
out = {"backend": kernels.active_backend(), "times": {}}
for n in sizes:
    ds = gen.sample(n, seed=0)
    runs = []
    for r in range(repeats):
        t0 = time.perf_counter()
        fit(ds, FitConfig(seed=r))
        runs.append(time.perf_counter() - t0)
    out["times"][str(n)] = min(runs)
print(json.dumps(out))
"""


def measure(backend: str, sizes, repeats):
    env = dict(os.environ, PARTITION_TREE_BACKEND=backend)
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, json.dumps(sizes), str(repeats)],
        env=env,
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise SystemExit(f"{backend} run failed:\n{proc.stderr}")
    return json.loads(proc.stdout)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="10000,20000,40000")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    results = {}
    for backend in ("python", "compiled"):
        try:
            results[backend] = measure(backend, sizes, args.repeats)
        except SystemExit as exc:
            print(f"skipping {backend}: {exc}", file=sys.stderr)

    print("size,python_s,compiled_s,speedup")
    for n in sizes:
        py = results.get("python", {}).get("times", {}).get(str(n))
        cy = results.get("compiled", {}).get("times", {}).get(str(n))
        if py and cy:
            print(f"{n},{py:.4f},{cy:.4f},{py / cy:.2f}x")
        elif py:
            print(f"{n},{py:.4f},n/a,n/a")


if __name__ == "__main__":
    main()
