"""Seeded Monte Carlo frame-error-rate simulation.

Frames are simulated in blocks of ``block_size``.  Block ``i`` draws all of
its randomness (info bits, timing factors, optional bit noise, in that
order) from ``SeedSequence(master_seed, spawn_key=(i,))``, and blocks are
reduced strictly in order, so the result depends only on the configuration
and never on how many worker processes were used.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels
from .codes import CodeId, get_code, preprocess_lookup
from .gauss_channel import QuantizationScheme, Rounding, Thresholded, channel_outputs, q_function

__all__ = [
    "AwgnParams",
    "SimConfig",
    "SimResult",
    "default_scheme",
    "parse_scheme",
    "awgn_sigma",
    "awgn_overlay",
    "wilson_interval",
    "predict_fer_asymptotic",
    "simulate_block",
    "run_fer",
    "fer_sweep",
]

_Z95 = 1.959963984540054


@dataclass(frozen=True)
class AwgnParams:
    snr_db: float
    a0: float = 0.0
    a1: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if not self.a1 > self.a0:
            raise ValueError("need a1 > a0")


@dataclass(frozen=True)
class SimConfig:
    code: CodeId
    epsilon: float
    scheme: QuantizationScheme | None = None
    k: int = 40
    max_frames: int = 1_000_000
    target_errors: int = 200
    master_seed: int = 0
    awgn: AwgnParams | None = None
    block_size: int = 2048

    def __post_init__(self):
        object.__setattr__(self, "code", CodeId(self.code))
        if self.scheme is None:
            object.__setattr__(self, "scheme", default_scheme(self.code))
        if self.k < 1 or self.max_frames < 1 or self.target_errors < 1 or self.block_size < 1:
            raise ValueError("k, max_frames, target_errors and block_size must be >= 1")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")
        if self.k % get_code(self.code).encoder.block:
            raise ValueError(f"k={self.k} is not a multiple of the {self.code} input block")
        if isinstance(self.scheme, Thresholded):
            spec = get_code(self.code)
            missing = (spec.zeros | spec.ones) - set(self.scheme.values)
            if missing:
                raise ValueError(f"{self.scheme.label} cannot represent runs {sorted(missing)} of {self.code}")

    def echo(self) -> dict:
        d = asdict(self)
        d["code"] = self.code.value
        d["scheme"] = self.scheme.label
        return d


@dataclass
class SimResult:
    config: SimConfig
    frames_sent: int
    frame_errors: int
    fer: float
    ci_low: float
    ci_high: float
    stopped_by: str
    elapsed: float = 0.0
    prediction: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.config.master_seed

    @property
    def zero_errors(self) -> bool:
        """No error observed: only ``ci_high`` is informative."""
        return self.frame_errors == 0


def default_scheme(code) -> Thresholded:
    """Quantizer used for each code unless another is requested."""
    cid = CodeId(code)
    if cid is CodeId.VL_10_011:
        return Thresholded.optimal((1, 2, 3))
    if cid in (CodeId.FSM13, CodeId.STUFF13, CodeId.VL_01_0111):
        return Thresholded.optimal((1, 3))
    return Thresholded.optimal((1, 2))


def parse_scheme(text: str) -> QuantizationScheme:
    """``rounding``, ``rounding:G``, ``q:1,3`` (value set) or ``q:[1-3]`` (range)."""
    text = text.strip()
    if text == "rounding":
        return Rounding()
    if text.startswith("rounding:"):
        return Rounding(int(text.split(":", 1)[1]))
    if text.startswith("q:"):
        body = text[2:].strip("{} ")
        if body.startswith("[") and body.endswith("]"):
            lo, hi = (int(v) for v in body[1:-1].split("-"))
            return Thresholded.optimal(range(lo, hi + 1))
        return Thresholded.optimal(int(v) for v in body.split(","))
    raise ValueError(f"cannot parse scheme {text!r}; use rounding, rounding:G, q:1,3 or q:[1-3]")


def awgn_sigma(snr_db: float, rate: float, a0: float = 0.0, a1: float = 1.0) -> float:
    """Noise deviation with ``(a1 - a0)^2 / (2 rate sigma^2) = 10^(snr_db/10)``."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return (a1 - a0) / math.sqrt(2.0 * rate * 10.0 ** (snr_db / 10.0))


def awgn_overlay(bits, snr_db: float, rate: float, a0: float = 0.0, a1: float = 1.0, rng=None) -> np.ndarray:
    """On-off amplitudes plus Gaussian noise, then a hard decision at the midpoint."""
    if not a1 > a0:
        raise ValueError("need a1 > a0")
    b = np.asarray(bits, dtype=np.uint8)
    sigma = awgn_sigma(snr_db, rate, a0, a1)
    if sigma == 0.0:
        return b.copy()
    if rng is None:
        raise ValueError("a random generator is required for finite snr_db")
    level = a0 + (a1 - a0) * b + sigma * rng.standard_normal(b.shape)
    return (level >= 0.5 * (a0 + a1)).astype(np.uint8)


def wilson_interval(errors: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    p = errors / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    centre = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def predict_fer_asymptotic(code, scheme: QuantizationScheme, k: int, epsilon: float) -> float:
    """Small-epsilon FER for the two codes with known leading error terms."""
    cid = CodeId(code)
    if epsilon <= 0:
        return 0.0
    if cid is CodeId.VL_01_0111:
        if isinstance(scheme, Rounding) or (
            isinstance(scheme, Thresholded) and scheme.values == (1, 3) and scheme.is_pairwise_optimal()
        ):
            return k * q_function(1.0 / (2.0 * epsilon))
    elif cid is CodeId.MANCHESTER:
        if isinstance(scheme, Rounding):
            return k / 4.0 * q_function(1.0 / (4.0 * epsilon))
        if isinstance(scheme, Thresholded) and scheme.values == (1, 2) and scheme.is_pairwise_optimal():
            return (1.5 * k + 0.5) * q_function(1.0 / (3.0 * epsilon))
    raise ValueError(f"no closed-form FER for {cid} with {getattr(scheme, 'label', scheme)}")


def _block_rng(cfg: SimConfig, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.master_seed, spawn_key=(index,)))


def simulate_block(cfg: SimConfig, index: int, *, backend: str | None = None, shortcut: bool = True) -> np.ndarray:
    """Frame-error flags for block ``index`` (always ``cfg.block_size`` frames).

    With ``shortcut`` on, frames whose preprocessed runs equal the
    transmitted runs are declared correct without decoding; the noiseless
    roundtrip makes that exact.
    """
    spec = get_code(cfg.code)
    rng = _block_rng(cfg, index)
    n, k = cfg.block_size, cfg.k
    info = rng.integers(0, 2, size=(n, k), dtype=np.uint8)
    bits, nbits = _kernels.encode_batch(spec, info, backend=backend)
    runs, nruns, first = _kernels.runs_batch(bits, nbits, backend=backend)
    valid = np.arange(runs.shape[1])[None, :] < nruns[:, None]
    z = rng.standard_normal(runs.shape)
    rx = np.where(valid, channel_outputs(runs, z, cfg.scheme, cfg.epsilon), 0)
    rx_n, rx_first = nruns, first
    if cfg.awgn is not None:
        a = cfg.awgn
        line, line_n = _kernels.expand_batch(rx, nruns, first, backend=backend)
        noisy = awgn_overlay(line, a.snr_db, float(spec.rate), a.a0, a.a1, rng)
        rx, rx_n, rx_first = _kernels.runs_batch(noisy, line_n, backend=backend)
    width = rx.shape[1]
    rvalid = np.arange(width)[None, :] < rx_n[:, None]
    table = preprocess_lookup(spec, int(rx.max()))
    pol = (rx_first[:, None].astype(np.int64) + np.arange(width)) % 2
    pre = np.where(rvalid, table[pol, rx], 0)

    if shortcut:
        common = min(width, runs.shape[1])
        same = (rx_n == nruns) & (rx_first == first)
        same &= np.all(pre[:, :common] == runs[:, :common], axis=1)
        todo = np.flatnonzero(~same)
    else:
        todo = np.arange(n)
    errors = np.zeros(n, dtype=bool)
    if todo.size:
        line, line_n = _kernels.expand_batch(pre[todo], rx_n[todo], rx_first[todo], backend=backend)
        dec = _kernels.decode_batch(spec, line, line_n, k, backend=backend)
        errors[todo] = np.any(dec != info[todo], axis=1)
    return errors


def _block_task(args):
    cfg, index = args
    return simulate_block(cfg, index)


def run_fer(config: SimConfig, workers: int = 1) -> SimResult:
    """Simulate until ``target_errors`` errors or ``max_frames`` frames."""
    start = time.perf_counter()
    cfg = config
    sent = errors = 0
    index = 0
    stopped_by = "max_frames"
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while sent < cfg.max_frames:
            wave = [index + j for j in range(max(1, workers))]
            if pool is None:
                flags_list = [simulate_block(cfg, wave[0])]
            else:
                flags_list = list(pool.map(_block_task, [(cfg, i) for i in wave]))
            index += len(wave)
            done = False
            for flags in flags_list:
                flags = flags[: cfg.max_frames - sent]
                hits = np.flatnonzero(flags)
                need = cfg.target_errors - errors
                if hits.size >= need:
                    sent += int(hits[need - 1]) + 1
                    errors += need
                    stopped_by = "target_errors"
                    done = True
                    break
                sent += flags.size
                errors += hits.size
                if sent >= cfg.max_frames:
                    done = True
                    break
            if done:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    lo, hi = wilson_interval(errors, sent)
    pred = None
    if cfg.awgn is None:
        try:
            pred = predict_fer_asymptotic(cfg.code, cfg.scheme, cfg.k, cfg.epsilon)
        except ValueError:
            pass
    return SimResult(cfg, sent, errors, errors / sent, lo, hi, stopped_by, time.perf_counter() - start, pred)


def fer_sweep(
    codes: Sequence,
    epsilon_grid: Sequence[float],
    schemes: Sequence[QuantizationScheme | None] | None = None,
    base_config: SimConfig | None = None,
    snr_grid: Sequence[float | None] | None = None,
    workers: int = 1,
) -> list[SimResult]:
    """One result per ``(code, scheme, snr, epsilon)`` cell.

    ``schemes=None`` uses each code's default quantizer.  Every cell reuses
    the base master seed, so a cell's result does not depend on which other
    cells are in the sweep.
    """
    if not codes or not epsilon_grid:
        raise ValueError("codes and epsilon_grid must be nonempty")
    base = base_config or SimConfig(CodeId.MANCHESTER, 0.1)
    awgn_base = base.awgn or AwgnParams(0.0)
    out = []
    for code in codes:
        for scheme in schemes or [None]:
            for snr in snr_grid or [None]:
                awgn = None if snr is None else replace(awgn_base, snr_db=float(snr))
                for eps in epsilon_grid:
                    cfg = replace(base, code=CodeId(code), epsilon=float(eps),
                                  scheme=scheme or default_scheme(code), awgn=awgn)
                    out.append(run_fer(cfg, workers=workers))
    return out
