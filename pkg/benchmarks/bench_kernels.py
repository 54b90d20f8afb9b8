"""Throughput of the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--frames N] [--repeat R]
"""
import argparse
import time

import numpy as np

from shiftcode import _kernels
from shiftcode.codes import CodeId, get_code
from shiftcode.fer import SimConfig, simulate_block


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--codes", default="manchester,vl_10_011,stuff13,fsm12,fsm13")
    a = ap.parse_args()

    try:
        _kernels.backend_module("cython")
        backends = ["python", "cython"]
    except ImportError:
        backends = ["python"]
        print("compiled kernels not built; timing the fallback only")

    print(f"{'code':<14}{'stage':<10}" + "".join(f"{b + ' frames/s':>20}" for b in backends) + f"{'speedup':>10}")
    rng = np.random.default_rng(0)
    for name in a.codes.split(","):
        spec = get_code(name)
        info = rng.integers(0, 2, size=(a.frames, 40), dtype=np.uint8)
        bits, nbits = _kernels.encode_batch(spec, info)
        cfg = SimConfig(CodeId(name), 0.12, block_size=a.frames)
        stages = {
            "encode": lambda b: _kernels.encode_batch(spec, info, backend=b),
            "decode": lambda b: _kernels.decode_batch(spec, bits, nbits, 40, backend=b),
            "block": lambda b: simulate_block(cfg, 0, backend=b, shortcut=False),
        }
        for stage, fn in stages.items():
            rates = [a.frames / best_of(lambda: fn(b), a.repeat) for b in backends]
            speed = f"{rates[-1] / rates[0]:>9.1f}x" if len(rates) > 1 else ""
            print(f"{name:<14}{stage:<10}" + "".join(f"{r:>20,.0f}" for r in rates) + speed)


if __name__ == "__main__":
    main()
