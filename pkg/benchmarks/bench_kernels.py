#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-NumPy fallback.

Times the hot per-layer operations (the inner loop of attack optimization
and inference) on desk-scale shapes, checks that both backends agree, and
reports the per-call cost plus an end-to-end attack-iteration rate.

Run:  python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from splitshield.attacks import WraConfig
from splitshield.attacks import _wra_objective_grad
from splitshield.engine import backend as backend_mod
from splitshield.engine import forward_prefix
from splitshield.harness.tinynet import SPLIT_LAYER, build_tinynet, sample_tinynet_inputs


def time_call(fn, repeat):
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - start) / repeat


def kernel_cases(rng):
    xp1 = np.ascontiguousarray(np.pad(rng.uniform(size=(3, 8, 8)), ((0, 0), (1, 1), (1, 1))))
    w1 = rng.normal(size=(6, 3, 3, 3))
    b1 = rng.normal(size=6)
    gy1 = rng.normal(size=(6, 8, 8))
    xp2 = np.ascontiguousarray(np.pad(rng.uniform(size=(6, 4, 4)), ((0, 0), (1, 1), (1, 1))))
    w2 = rng.normal(size=(16, 6, 3, 3))
    gy2 = rng.normal(size=(16, 4, 4))
    x_pool = rng.uniform(size=(6, 8, 8))
    x_fc = rng.uniform(size=256)
    w_fc = rng.normal(size=(10, 256))
    b_fc = rng.normal(size=10)
    gy_fc = rng.normal(size=10)

    def cases(k):
        return {
            "conv2d_forward 3->6 8x8": lambda: k.conv2d_forward(xp1, w1, b1, 1, 8, 8),
            "conv2d_backward_input": lambda: k.conv2d_backward_input(gy1, w1, 1, 10, 10),
            "conv2d_backward_params": lambda: k.conv2d_backward_params(gy2, xp2, 6, 3, 1),
            "maxpool_forward 6x8x8": lambda: k.maxpool_forward(x_pool, 2),
            "fc_forward 256->10": lambda: k.fc_forward(x_fc, w_fc, b_fc),
            "fc_backward_input": lambda: k.fc_backward_input(gy_fc, w_fc),
        }

    return cases


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=2000)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    cases = kernel_cases(rng)
    backends = backend_mod.available_backends()
    print(f"available backends: {backends}")
    if len(backends) < 2:
        print("compiled extension not built; timing the fallback only")

    timings = {name: {} for name in cases(backend_mod.kernels())}
    results = {}
    for name in backends:
        backend_mod.set_backend(name)
        k = backend_mod.kernels()
        for label, fn in cases(k).items():
            timings[label][name] = time_call(fn, args.repeat)
            results.setdefault(label, {})[name] = fn()

    width = max(len(label) for label in timings)
    header = f"{'kernel':<{width}}" + "".join(f"  {b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"  {'speedup':>8}"
    print("\n" + header)
    for label, per_backend in timings.items():
        line = f"{label:<{width}}"
        for b in backends:
            line += f"  {per_backend[b] * 1e6:>10.1f}us"
        if len(backends) == 2:
            line += f"  {per_backend['python'] / per_backend['cython']:>7.1f}x"
        print(line)

    if len(backends) == 2:
        print("\nagreement (python vs cython):")
        for label, outs in results.items():
            a, b = outs["python"], outs["cython"]
            if isinstance(a, tuple):
                same = all(np.array_equal(x, y) for x, y in zip(a, b))
                gap = max(float(np.max(np.abs(np.asarray(x, dtype=float)
                                              - np.asarray(y, dtype=float))))
                          for x, y in zip(a, b))
            else:
                same = np.array_equal(a, b)
                gap = float(np.max(np.abs(a - b)))
            tag = "bit-identical" if same else f"max abs diff {gap:.2e}"
            print(f"  {label:<{width}}  {tag}")

    # end-to-end: one attack iteration = prefix forward + backward + objective
    model = build_tinynet(7)
    x = sample_tinynet_inputs(1, (0, 1))[0]
    observed = forward_prefix(model, x, SPLIT_LAYER)
    cfg = WraConfig(tv_weight=1e-3)
    print("\nattack iteration (prefix forward + gradient):")
    for name in backends:
        backend_mod.set_backend(name)
        dt = time_call(lambda: _wra_objective_grad(model, SPLIT_LAYER, x, observed, cfg),
                       max(200, args.repeat // 10))
        print(f"  {name:>7}: {dt * 1e6:8.1f}us/iter  ({1.0 / dt:,.0f} iters/s)")


if __name__ == "__main__":
    main()
