"""Benchmark: compiled kernel vs pure-Python fallback on the hot paths.

Run with  python benchmarks/benchmark_kernels.py  (after building the
extension; the fallback is always available).
"""

import time

import numpy as np

from weakflow import _kernels_py
from weakflow.beam import BeamModel
from weakflow.weakfield import node_threshold

try:
    from weakflow import _kernels_cy
    BACKENDS = [("cython", _kernels_cy), ("python", _kernels_py)]
except ImportError:
    print("compiled kernel not built; benchmarking the fallback only")
    BACKENDS = [("python", _kernels_py)]


def bench_kw_points(impl, params, eps, n=20000):
    rng = np.random.default_rng(0)
    xs = rng.uniform(-6.0, 6.0, n)
    zs = rng.uniform(0.0, 130.0, n)
    t0 = time.perf_counter()
    for x, z in zip(xs, zs):
        impl.kw_point(params, x, z, eps)
    return time.perf_counter() - t0, n


def bench_bundle(impl, params, eps, z1, n_lines=500):
    x0s = np.linspace(-4.0, 4.0, n_lines)
    z_out = np.array([z1])
    t0 = time.perf_counter()
    for x0 in x0s:
        impl.integrate_line(params, x0, 0.0, z1, 1e-9, 1e-12, eps,
                            -14.0, 14.0, z_out, 200000)
    return time.perf_counter() - t0, n_lines


def main():
    model = BeamModel.default()
    params = model.kernel_params
    zr = model.rayleigh_range
    eps = node_threshold(model, 0.0, 2 * zr)

    print(f"{'benchmark':<28}{'backend':<10}{'total':>10}{'per item':>14}")
    baselines = {}
    for name, impl in BACKENDS:
        dt, n = bench_kw_points(impl, params, eps)
        key = "weak wavenumber (20k pts)"
        baselines.setdefault(key, dt)
        ratio = dt / baselines[key]
        print(f"{key:<28}{name:<10}{dt:>9.3f}s{dt / n * 1e6:>11.2f} us"
              + (f"   ({ratio:.1f}x slower)" if ratio > 1.0 else ""))
    for name, impl in BACKENDS:
        dt, n = bench_bundle(impl, params, eps, 2 * zr)
        key = "flow-line bundle (500)"
        baselines.setdefault(key, dt)
        ratio = dt / baselines[key]
        print(f"{key:<28}{name:<10}{dt:>9.3f}s{dt / n * 1e3:>11.2f} ms"
              + (f"   ({ratio:.1f}x slower)" if ratio > 1.0 else ""))


if __name__ == "__main__":
    main()
