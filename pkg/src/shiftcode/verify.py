"""Self-check suite behind ``shiftcode verify``.

Each check returns ``(name, passed, detail)``; none of them depend on the
test suite being installed.
"""
from __future__ import annotations

import time
from typing import Callable

import numpy as np

from . import _kernels
from .capacity import SolverOptions, build_truncated_channel, capacity_scheme, maximize_capacity, mi_gradient, normalized_mi
from .codes import all_codes, verify_roundtrip
from .fer import SimConfig, run_fer
from .gauss_channel import ChannelParams, Rounding, Thresholded, q_function, transition_distribution
from .metrics import power_report, rll_capacity, rll_capacity_spectral

__all__ = ["run_checks", "CHECKS"]

_CONSTRAINTS = [
    ((1, 2), (1, 2)), ((1,), (1, 2)), ((1, 3), (1, 3)), ((1,), (1, 3)),
    ((1, 2, 4), (1, 2, 4)), ((1, 2), (1, 2, 4)), ((1,), (1, 2, 4)),
]


def _p(length, eps):
    return q_function(1.0 / (2.0 * length * eps))


def check_channel_rows():
    worst = 0.0
    for eps in (0.05, 0.1, 0.2, 0.3):
        prm = ChannelParams(eps)
        for x in range(1, 13):
            r = transition_distribution(x, Rounding(1), prm)
            expect = {x: 1 - (2 if x > 1 else 1) * _p(x, eps), x + 1: _p(x, eps)}
            if x > 1:
                expect[x - 1] = _p(x, eps)
            worst = max(worst, max(abs(r.get(y, 0) - v) for y, v in expect.items()), abs(sum(r.values()) - 1))
            t = Thresholded.optimal(range(1, 13))
            # single-shift form: all mass below / above x against p(alpha), p(beta)
            r = transition_distribution(x, t, prm)
            up = _p((2 * x + 1) / 2, eps) if x < 12 else 0.0
            down = _p((2 * x - 1) / 2, eps) if x > 1 else 0.0
            below = sum(v for y, v in r.items() if y < x)
            above = sum(v for y, v in r.items() if y > x)
            worst = max(worst, abs(below - down), abs(above - up), abs(r[x] - (1 - up - down)),
                        abs(sum(r.values()) - 1))
    return worst < 1e-12, f"max deviation from closed forms {worst:.2e}"


def check_rll_capacity():
    gap = max(abs(rll_capacity(z, o) - rll_capacity_spectral(z, o)) for z, o in _CONSTRAINTS)
    return gap < 1e-9, f"transfer-equation vs spectral radius gap {gap:.2e}"


def check_power_order():
    bad = [s.id.value for s in all_codes()
           if not (lambda r: 0 <= r.local_min <= r.min_sustainable <= r.average <= 1)(power_report(s))]
    return not bad, "local <= sustainable <= average for all codes" if not bad else f"violated by {bad}"


def check_roundtrip():
    failed = [(s.id.value, r.reason) for s in all_codes() for r in [verify_roundtrip(s, 16)] if not r.passed]
    return not failed, "all codes roundtrip exhaustively to k=16" if not failed else f"failures: {failed}"


def check_kernel_parity():
    if _kernels.BACKEND != "cython":
        return True, "compiled kernels not active; nothing to compare"
    rng = np.random.default_rng(12345)
    for spec in all_codes():
        info = rng.integers(0, 2, size=(64, 40), dtype=np.uint8)
        a = _kernels.encode_batch(spec, info, backend="cython")
        b = _kernels.encode_batch(spec, info, backend="python")
        if not all(np.array_equal(x, y) for x, y in zip(a, b)):
            return False, f"encoder mismatch for {spec.id.value}"
        da = _kernels.decode_batch(spec, *a, 40, backend="cython")
        db = _kernels.decode_batch(spec, *a, 40, backend="python")
        if not np.array_equal(da, db):
            return False, f"decoder mismatch for {spec.id.value}"
    return True, "compiled and pure-Python kernels agree"


def check_capacity_solver():
    ch = build_truncated_channel(3, 1e-8, Rounding(), 0.15)
    f = np.array([0.5, 0.3, 0.2])
    g = mi_gradient(ch, f)
    h = 1e-6
    fd = []
    for i in range(2):
        e = np.zeros(3)
        e[i], e[2] = h, -h
        fd.append((normalized_mi(ch, f + e) - normalized_mi(ch, f - e)) / (2 * h))
    rel = np.max(np.abs(g - fd) / np.abs(fd))
    limits = []
    for L in (2, 3):
        res = maximize_capacity(build_truncated_channel(L, 1e-8, capacity_scheme("rounding", L), 0.01), SolverOptions())
        limits.append(abs(res.capacity - rll_capacity(range(1, L + 1), range(1, L + 1))))
    ok = rel < 1e-5 and max(limits) < 5e-3
    return ok, f"gradient rel. error {rel:.1e}; noiseless-limit gaps {max(limits):.1e}"


def check_noiseless_fer():
    bad = [s.id.value for s in all_codes()
           if run_fer(SimConfig(s.id, 0.0, max_frames=10_000, block_size=2048)).frame_errors]
    return not bad, "no frame errors without noise" if not bad else f"errors for {bad}"


CHECKS: list[tuple[str, Callable]] = [
    ("channel transition laws", check_channel_rows),
    ("constraint capacities", check_rll_capacity),
    ("power metric ordering", check_power_order),
    ("exhaustive roundtrip", check_roundtrip),
    ("kernel parity", check_kernel_parity),
    ("capacity solver", check_capacity_solver),
    ("noiseless simulation", check_noiseless_fer),
]


def run_checks() -> list[tuple[str, bool, str, float]]:
    out = []
    for name, fn in CHECKS:
        t = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail, time.perf_counter() - t))
    return out
