"""Time the compiled and pure-python pairwise MI kernels on one layer.

    python3 benchmarks/bench_mi_kernel.py --width 64 --samples 5000 --bins 32
"""

import argparse
import time

import numpy as np

from mipr import _kernels
from mipr.mi import HistogramConfig, layer_mi
from mipr.network import init_network
from mipr.probe import ProbeConfig, record_trace


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--bins", type=int, default=32)
    p.add_argument("--repeats", type=int, default=3)
    a = p.parse_args()

    net = init_network([a.width, a.width, 10], seed=0)
    trace = record_trace(net, ProbeConfig(num_samples=a.samples, seed=0))
    cfg = HistogramConfig(a.bins)
    print(f"layer {a.width}x{a.width}, S={a.samples}, B={a.bins}, best of {a.repeats}")

    results = {}
    for backend in _kernels.available_backends():
        t, mat = best_of(lambda: layer_mi(trace, 1, cfg, backend=backend), a.repeats)
        results[backend] = (t, mat.values)
        print(f"  {backend:<8} {t * 1e3:9.1f} ms")
    if len(results) == 2:
        tc, vc = results["cython"]
        tp, vp = results["python"]
        print(f"  speedup  {tp / tc:9.2f}x   max |diff| {np.abs(vc - vp).max():.1e}")
    else:
        print("  compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
