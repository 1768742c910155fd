"""Benchmark the compiled kernels against the numpy fallback.

Times conv2d and maxpool forward/backward on the real layer shapes of the
network (batch 16, 256x256 input halving through five blocks), plus one full
training step per backend (run in a subprocess with AZARNET_KERNELS set, so
each measurement uses the normal import-time dispatch).  Run from the repo
root:

    python3 benchmarks/bench_kernels.py [--batch 16] [--repeats 5]

Single-thread the BLAS first (OPENBLAS_NUM_THREADS=1) for stable numbers.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from azarnet import kernels
from azarnet.rng import Rng

# (H, W, Cin, Cout) per conv block at the default architecture.
CONV_SHAPES = [
    (256, 256, 1, 16),
    (128, 128, 16, 32),
    (64, 64, 32, 32),
    (32, 32, 32, 32),
    (16, 16, 32, 64),
]

_STEP_SNIPPET = """
import time
import numpy as np
from azarnet.model import ModelConfig, build_azarnet
from azarnet.rng import Rng
from azarnet.training import AdamState, TrainConfig, cross_entropy_loss, one_hot, regularization_penalty
from azarnet.layers import TRAIN

batch, repeats = {batch}, {repeats}
rng = Rng(2)
x = rng.uniform((batch, 256, 256, 1), 0, 80).astype(np.float32)
y = np.arange(batch) % 7
targets = one_hot(y, 7)
model = build_azarnet(ModelConfig(seed=0))
params = model.parameters()
state = AdamState.for_params(params)
cfg = TrainConfig(batch_size=batch, seed=0)
dropout_rng = Rng(3)
from azarnet.training import adam_step
times = []
for _ in range(repeats):
    t0 = time.perf_counter()
    probs = model.forward(x, TRAIN, dropout_rng)
    loss = cross_entropy_loss(probs, targets) + regularization_penalty(model, model.activity_outputs())
    model.backward((probs - targets) / batch)
    adam_step(params, model.gradients(), state, cfg)
    times.append(time.perf_counter() - t0)
print(sorted(times)[len(times) // 2])
"""


def median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return sorted(times)[len(times) // 2]


def bench_conv(batch, repeats):
    rng = Rng(0)
    rows = []
    for h, w, ci, co in CONV_SHAPES:
        x = rng.uniform((batch, h, w, ci), -1, 1).astype(np.float32)
        kern = rng.uniform((3, 3, ci, co), -0.1, 0.1).astype(np.float32)
        bias = np.zeros(co, dtype=np.float32)
        xp = kernels.pad_same(x, 3, 3)
        gy = rng.uniform((batch, h, w, co), -1, 1).astype(np.float32)
        row = {"shape": f"{h}x{w}x{ci}->{co}"}
        for name, mod in kernels.available_backends().items():
            fwd = median_time(lambda: kernels.conv2d_forward(xp, kern, bias, impl=mod), repeats)
            bwd = median_time(lambda: kernels.conv2d_backward(xp, kern, gy, impl=mod), repeats)
            row[name] = (fwd, bwd)
        rows.append(row)
    return rows


def bench_pool(batch, repeats):
    rng = Rng(1)
    rows = []
    for h, w, _, co in CONV_SHAPES:
        x = rng.uniform((batch, h, w, co), -1, 1).astype(np.float32)
        row = {"shape": f"{h}x{w}x{co}"}
        for name, mod in kernels.available_backends().items():
            fwd = median_time(lambda: kernels.maxpool2x2_forward(x, impl=mod), repeats)
            _, arg = kernels.maxpool2x2_forward(x, impl=mod)
            gy = rng.uniform(arg.shape, -1, 1).astype(np.float32)
            bwd = median_time(lambda: kernels.maxpool2x2_backward(gy, arg, impl=mod), repeats)
            row[name] = (fwd, bwd)
        rows.append(row)
    return rows


def bench_model_step(batch, repeats):
    """One full training step (forward + loss + backward + Adam) per backend."""
    results = {}
    for name in kernels.available_backends():
        env = dict(os.environ, AZARNET_KERNELS=name)
        out = subprocess.run(
            [sys.executable, "-c", _STEP_SNIPPET.format(batch=batch, repeats=repeats)],
            capture_output=True,
            text=True,
            env=env,
            check=True,
        )
        results[name] = float(out.stdout.strip())
    return results


def fmt_ms(seconds):
    return f"{seconds * 1e3:8.1f} ms"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--batch", type=int, default=16)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    backends = list(kernels.available_backends())
    print(f"backends: {', '.join(backends)} (active: {kernels.BACKEND})")
    print(f"batch {args.batch}, median of {args.repeats}\n")

    print(f"{'conv2d (fwd / bwd)':<24}" + "".join(f"{b:>24}" for b in backends))
    for row in bench_conv(args.batch, args.repeats):
        cells = "".join(f"{fmt_ms(row[b][0])} /{fmt_ms(row[b][1])}" for b in backends)
        print(f"{row['shape']:<24}{cells}")

    print()
    print(f"{'maxpool2x2 (fwd / bwd)':<24}" + "".join(f"{b:>24}" for b in backends))
    for row in bench_pool(args.batch, args.repeats):
        cells = "".join(f"{fmt_ms(row[b][0])} /{fmt_ms(row[b][1])}" for b in backends)
        print(f"{row['shape']:<24}{cells}")

    print()
    print("full train step (fwd + bwd + Adam):")
    for name, t in bench_model_step(args.batch, args.repeats).items():
        print(f"  {name:<8}{fmt_ms(t)}")


if __name__ == "__main__":
    main()
