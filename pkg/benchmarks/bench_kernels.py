"""Timing comparison of the compiled kernels against the NumPy fallback.

Runs each hot kernel (3x3 convolution forward/backward, dart-throwing
placement) under both backends in subprocesses (the backend is fixed at
import time) and prints a table of per-call times and speedups.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json
import sys
import time

import numpy as np

from maskopt import BACKEND_NAME
from maskopt._kernels import conv2d_backward, conv2d_forward
from maskopt.sampling import _run_placement

repeat = int(sys.argv[1])


def clock(fn, *args):
    fn(*args)  # warm-up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


rng = np.random.default_rng(0)
results = {"backend": BACKEND_NAME}

# training-shaped convolution: 16 -> 16 channels on a 64x64 map
x = rng.standard_normal((16, 64, 64))
w = rng.standard_normal((16, 16, 3, 3)) * 0.1
b = rng.standard_normal(16)
results["conv2d_forward_16x64"] = clock(conv2d_forward, x, w, b)

out_grad = rng.standard_normal((16, 64, 64))
results["conv2d_backward_16x64"] = clock(conv2d_backward, x, w, out_grad)

# first-layer shape: 1 -> 16 channels
x1 = rng.standard_normal((1, 64, 64))
w1 = rng.standard_normal((16, 1, 3, 3)) * 0.1
results["conv2d_forward_1x64"] = clock(conv2d_forward, x1, w1, b)


def place():
    r = np.random.default_rng(1)
    _run_placement(r, 256, 256, 6554, 1.7)  # 10% of a 256x256 grid


results["placement_256"] = clock(place)
print(json.dumps(results))
"""


def run_backend(backend, repeat):
    env = dict(os.environ, MASKOPT_BACKEND=backend)
    proc = subprocess.run([sys.executable, "-c", _WORKER, str(repeat)],
                          capture_output=True, text=True, env=env)
    if proc.returncode != 0:
        raise RuntimeError(f"{backend} worker failed:\n{proc.stderr}")
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5,
                        help="timed repetitions per kernel (default 5)")
    args = parser.parse_args()

    numpy_res = run_backend("numpy", args.repeat)
    try:
        ext_res = run_backend("ext", args.repeat)
    except RuntimeError as exc:
        print(exc)
        print("compiled extension unavailable; only the fallback was timed")
        ext_res = None

    keys = [k for k in numpy_res if k != "backend"]
    width = max(len(k) for k in keys)
    header = f"{'kernel':>{width}}  {'numpy':>10}"
    if ext_res:
        header += f"  {'ext':>10}  {'speedup':>8}"
    print(header)
    for k in keys:
        line = f"{k:>{width}}  {numpy_res[k] * 1e3:9.2f}ms"
        if ext_res:
            ratio = numpy_res[k] / ext_res[k]
            line += f"  {ext_res[k] * 1e3:9.2f}ms  {ratio:7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
