"""Compare the compiled dense kernels with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--batch B]

Times a forward and a backward pass of one dense layer at the default network
widths, checks that both backends agree, and times a full SAC update with each
backend (the backend is picked at import, so that part runs in subprocesses).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from grirl.nn import _kernels_py

try:
    from grirl.nn import _kernels
except ImportError:
    _kernels = None

RELU = 1

SHAPES = [(3, 64), (64, 64), (64, 108), (64, 2)]

UPDATE_SNIPPET = """
import time
import numpy as np
from grirl.backbones import SacConfig, SacLearner
from grirl.nn.kernels import BACKEND
from grirl.replay import Batch
rng = np.random.default_rng(0)
learner = SacLearner(3, 1, SacConfig(), rng)
b = Batch(rng.standard_normal((256, 3)), rng.uniform(-1, 1, (256, 1)), rng.standard_normal(256),
          rng.standard_normal((256, 3)), np.zeros(256, dtype=bool))
learner.update(b)
t = time.perf_counter()
for _ in range({n}):
    learner.update(b)
print(BACKEND, (time.perf_counter() - t) / {n})
"""


def layer_inputs(batch, n_in, n_out, rng):
    x = rng.standard_normal((batch, n_in))
    w = rng.standard_normal((n_out, n_in)) / np.sqrt(n_in)
    b = rng.standard_normal(n_out)
    return x, w, b


def time_layer(impl, x, w, b, repeat):
    fwd = timeit.Timer(lambda: impl.dense_forward(x, w, b, RELU)).timeit(repeat) / repeat
    pre, out = impl.dense_forward(x, w, b, RELU)
    dout = np.ones_like(out)
    bwd = timeit.Timer(lambda: impl.dense_backward(dout, x, w, pre, out, RELU, True)).timeit(repeat) / repeat
    return fwd, bwd


def check_agreement(x, w, b):
    pre_c, out_c = _kernels.dense_forward(x, w, b, RELU)
    pre_p, out_p = _kernels_py.dense_forward(x, w, b, RELU)
    assert np.allclose(out_c, out_p, rtol=1e-12, atol=1e-12)
    dout = np.cos(out_p)
    got = _kernels.dense_backward(dout, x, w, pre_c, out_c, RELU, True)
    want = _kernels_py.dense_backward(dout, x, w, pre_p, out_p, RELU, True)
    for g, h in zip(got, want):
        assert np.allclose(g, h, rtol=1e-12, atol=1e-12)


def update_time(pure: bool, n: int) -> str:
    env = dict(os.environ, GRIRL_PURE_PYTHON="1" if pure else "0")
    proc = subprocess.run([sys.executable, "-c", UPDATE_SNIPPET.format(n=n)], env=env, capture_output=True,
                          text=True, check=True)
    return proc.stdout.strip()


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=2000)
    parser.add_argument("--batch", type=int, default=256)
    parser.add_argument("--updates", type=int, default=200)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(0)
    if _kernels is None:
        print("compiled kernels not built; only the numpy fallback is available")
    print(f"{'layer':>10} {'backend':>9} {'forward us':>11} {'backward us':>12}")
    for n_in, n_out in SHAPES:
        x, w, b = layer_inputs(args.batch, n_in, n_out, rng)
        impls = [("numpy", _kernels_py)]
        if _kernels is not None:
            check_agreement(x, w, b)
            impls.insert(0, ("compiled", _kernels))
        for name, impl in impls:
            fwd, bwd = time_layer(impl, x, w, b, args.repeat)
            print(f"{n_in:>4}x{n_out:<5} {name:>9} {fwd * 1e6:>11.1f} {bwd * 1e6:>12.1f}")

    print(f"\nSAC update, batch 256, 64x64 nets, mean of {args.updates}:")
    for pure in ((False, True) if _kernels is not None else (True,)):
        backend, seconds = update_time(pure, args.updates).split()
        print(f"  {backend:>9}: {float(seconds) * 1e3:.2f} ms")


if __name__ == "__main__":
    main()
