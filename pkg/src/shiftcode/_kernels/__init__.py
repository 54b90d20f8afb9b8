"""Batch kernels for encoding, run parsing and window decoding.

The compiled extension ``_core`` is used when it is importable; otherwise
the pure-Python ``_pure`` module takes over.  Set ``SHIFTCODE_KERNEL=python``
to force the fallback.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _pure

_impl = _pure
BACKEND = "python"
if os.environ.get("SHIFTCODE_KERNEL", "").lower() != "python":
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        pass

__all__ = ["BACKEND", "backend_module", "encode_batch", "runs_batch", "expand_batch", "decode_batch", "tables_for"]


def backend_module(name: str | None = None):
    """The kernel module for ``name`` ('cython' or 'python'); default: active one."""
    if name is None:
        return _impl
    if name == "python":
        return _pure
    if name == "cython":
        from . import _core

        return _core
    raise ValueError(f"unknown kernel backend {name!r}")


@dataclass(frozen=True)
class KernelTables:
    block: int
    enc_word: np.ndarray
    enc_len: np.ndarray
    enc_next: np.ndarray
    initial: int
    preamble: np.ndarray
    tail: int
    max_word: int
    dec_word: np.ndarray
    dec_len: np.ndarray
    dec_adv: np.ndarray
    dec_next: np.ndarray
    width: int
    dec_initial: int
    skip: int


def _pack(word: str) -> int:
    return int(word, 2) if word else 0


@lru_cache(maxsize=None)
def tables_for(spec) -> KernelTables:
    enc = spec.encoder
    dec = spec.decoder
    as_i64 = lambda rows: np.ascontiguousarray(rows, dtype=np.int64)
    return KernelTables(
        block=enc.block,
        enc_word=as_i64([[_pack(w) for w, _ in row] for row in enc.table]),
        enc_len=as_i64([[len(w) for w, _ in row] for row in enc.table]),
        enc_next=as_i64([[nx for _, nx in row] for row in enc.table]),
        initial=enc.initial,
        preamble=np.frombuffer(spec.preamble.encode(), dtype=np.uint8) - ord("0"),
        tail=int(spec.tail),
        max_word=max(len(w) for row in enc.table for w, _ in row),
        dec_word=as_i64([[_pack(o) for o, _, _ in row] for row in dec.table]),
        dec_len=as_i64([[len(o) for o, _, _ in row] for row in dec.table]),
        dec_adv=as_i64([[a for _, a, _ in row] for row in dec.table]),
        dec_next=as_i64([[s for _, _, s in row] for row in dec.table]),
        width=dec.width,
        dec_initial=dec.initial,
        skip=len(spec.preamble),
    )


def encode_batch(spec, info: np.ndarray, initial: int | None = None, backend=None):
    """Encode each row of ``info``; returns ``(bits, nbits)`` padded with zeros."""
    t = tables_for(spec)
    info = np.ascontiguousarray(info, dtype=np.uint8)
    n_frames, k = info.shape
    if k % t.block:
        raise ValueError(f"k={k} is not a multiple of the block size {t.block}")
    width = len(t.preamble) + (k // t.block + t.tail) * t.max_word
    out = np.zeros((n_frames, width), dtype=np.uint8)
    nbits = np.zeros(n_frames, dtype=np.int64)
    backend_module(backend).encode(
        info, t.block, t.enc_word, t.enc_len, t.enc_next, t.initial if initial is None else initial,
        t.preamble, t.tail, out, nbits,
    )
    return out, nbits


def runs_batch(bits: np.ndarray, nbits: np.ndarray, backend=None):
    """Parse every frame into runs; returns ``(runs, nruns, first_bits)``."""
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    nbits = np.ascontiguousarray(nbits, dtype=np.int64)
    out = np.zeros(bits.shape, dtype=np.int64)
    nruns = np.zeros(bits.shape[0], dtype=np.int64)
    backend_module(backend).runs(bits, nbits, out, nruns)
    width = int(nruns.max()) if len(nruns) else 0
    return out[:, :width], nruns, bits[:, 0].copy()


def expand_batch(runs: np.ndarray, nruns: np.ndarray, first: np.ndarray, backend=None):
    """Inverse of :func:`runs_batch`; returns ``(bits, nbits)``."""
    runs = np.ascontiguousarray(runs, dtype=np.int64)
    nruns = np.ascontiguousarray(nruns, dtype=np.int64)
    first = np.ascontiguousarray(first, dtype=np.uint8)
    mask = np.arange(runs.shape[1])[None, :] < nruns[:, None]
    width = int(np.where(mask, runs, 0).sum(axis=1).max()) if len(runs) else 0
    out = np.zeros((runs.shape[0], width), dtype=np.uint8)
    nbits = np.zeros(runs.shape[0], dtype=np.int64)
    backend_module(backend).expand(runs, nruns, first, out, nbits)
    return out, nbits


def decode_batch(spec, bits: np.ndarray, nbits: np.ndarray, k: int, backend=None) -> np.ndarray:
    """Window-decode every frame to exactly ``k`` bits (truncate or zero-pad)."""
    t = tables_for(spec)
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    nbits = np.ascontiguousarray(nbits, dtype=np.int64)
    out = np.zeros((bits.shape[0], k), dtype=np.uint8)
    backend_module(backend).decode(
        bits, nbits, t.dec_word, t.dec_len, t.dec_adv, t.dec_next, t.width, t.dec_initial, t.skip, k, out,
    )
    return out
