"""Runlength-constrained codes with table-driven sliding-window decoders.

Every code is described by two small tables:

* an encoder :class:`Transducer` -- ``(state, input block) -> (output word,
  next state)``, with an optional fixed preamble and an optional tail
  block that gives the decoder its look-ahead on the last real block;
* a :class:`WindowDecoder` -- ``(state, next W received bits) ->
  (output bits, advance, next state)``.

Both tables are plain data, so the batch kernels in :mod:`shiftcode._kernels`
can run them without knowing which code they belong to.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .gauss_channel import RunSequence

__all__ = [
    "CodeId",
    "Transducer",
    "WindowDecoder",
    "CodeSpec",
    "RoundtripReport",
    "get_code",
    "all_codes",
    "encode",
    "decode",
    "decode_bits",
    "preprocess_runs",
    "runs_to_bits",
    "bits_to_runs",
    "reconstruct_encoder",
    "verify_roundtrip",
    "nearest_legal",
]


class CodeId(str, enum.Enum):
    MANCHESTER = "manchester"
    VL_10_011 = "vl_10_011"
    VL_101_01101 = "vl_101_01101"
    VL_01_0111 = "vl_01_0111"
    STUFF12 = "stuff12"
    STUFF13 = "stuff13"
    FSM12 = "fsm12"
    FSM13 = "fsm13"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Transducer:
    """Deterministic encoder graph over fixed-size input blocks.

    ``table[state][u] = (word, next_state)`` where ``u`` is the integer value
    of the input block read most-significant bit first.
    """

    block: int
    table: tuple[tuple[tuple[str, int], ...], ...]
    initial: int = 0

    @property
    def n_states(self) -> int:
        return len(self.table)

    def step(self, state: int, u: int) -> tuple[str, int]:
        return self.table[state][u]

    def run(self, info: Sequence[int], state: int | None = None) -> tuple[str, int]:
        """Encode whole blocks of ``info``; return the output string and final state."""
        b = self.block
        if len(info) % b:
            raise ValueError(f"input length {len(info)} is not a multiple of the block size {b}")
        s = self.initial if state is None else state
        out = []
        for i in range(0, len(info), b):
            u = 0
            for bit in info[i:i + b]:
                u = (u << 1) | int(bit)
            word, s = self.table[s][u]
            out.append(word)
        return "".join(out), s


@dataclass(frozen=True)
class WindowDecoder:
    """Sliding-window look-up decoder.

    ``table[state][w] = (output bits, advance, next state)`` where ``w`` is
    the integer value of the next ``width`` received bits.  Window positions
    past the end of the frame read the complement of the last received bit.
    """

    width: int
    table: tuple[tuple[tuple[str, int, int], ...], ...]
    initial: int = 0

    @classmethod
    def from_rule(cls, width: int, n_states: int, rule: Callable[[int, str], tuple[str, int, int]], initial: int = 0):
        table = tuple(
            tuple(rule(s, format(w, f"0{width}b")) for w in range(1 << width)) for s in range(n_states)
        )
        return cls(width, table, initial)


@dataclass(frozen=True)
class CodeSpec:
    id: CodeId
    label: str
    zeros: frozenset[int]
    ones: frozenset[int]
    rate: Fraction
    encoder: Transducer
    decoder: WindowDecoder
    preamble: str = ""
    tail: bool = False
    variable_length: bool = False

    @property
    def max_run(self) -> int:
        return max(max(self.zeros), max(self.ones))

    def allowed(self, polarity: int) -> frozenset[int]:
        return self.ones if polarity else self.zeros


# ---------------------------------------------------------------------------
# bits and runs


def runs_to_bits(runs: RunSequence) -> np.ndarray:
    reps = np.asarray(runs.runs, dtype=np.int64)
    levels = (np.arange(len(reps)) + runs.start_polarity) % 2
    return np.repeat(levels, reps).astype(np.uint8)


def bits_to_runs(bits, start_polarity: int | None = None) -> RunSequence:
    b = np.asarray(bits, dtype=np.uint8).ravel()
    if b.size == 0:
        raise ValueError("cannot parse an empty bit string into runs")
    if start_polarity is not None and int(b[0]) != start_polarity:
        raise ValueError("first bit does not match the declared start polarity")
    edges = np.flatnonzero(np.diff(b)) + 1
    bounds = np.concatenate(([0], edges, [b.size]))
    return RunSequence(int(b[0]), tuple(np.diff(bounds).tolist()))


def nearest_legal(r: int, allowed: Iterable[int]) -> int:
    """Closest admissible runlength; ties go to the longer run."""
    return min(sorted(allowed), key=lambda a: (abs(a - r), -a))


def preprocess_runs(code, runs: RunSequence) -> RunSequence:
    """Snap every received run onto the code's admissible lengths."""
    spec = get_code(code)
    out = []
    for i, r in enumerate(runs.runs):
        pol = (runs.start_polarity + i) % 2
        allowed = spec.allowed(pol)
        out.append(r if r in allowed else nearest_legal(r, allowed))
    return RunSequence(runs.start_polarity, tuple(out))


def preprocess_lookup(spec: CodeSpec, longest: int) -> np.ndarray:
    """Table ``m[polarity, r]`` of preprocessed lengths for ``r <= longest``."""
    m = np.zeros((2, longest + 1), dtype=np.int64)
    for pol in (0, 1):
        allowed = spec.allowed(pol)
        for r in range(1, longest + 1):
            m[pol, r] = r if r in allowed else nearest_legal(r, allowed)
    return m


# ---------------------------------------------------------------------------
# encode / decode on single frames


def encode(code, info) -> np.ndarray:
    spec = get_code(code)
    info = [int(b) for b in np.asarray(info, dtype=np.int64).ravel()]
    if not info:
        raise ValueError("info must be nonempty")
    if any(b not in (0, 1) for b in info):
        raise ValueError("info must contain only 0/1")
    body, state = spec.encoder.run(info)
    tail = spec.encoder.step(state, 0)[0] if spec.tail else ""
    return np.frombuffer((spec.preamble + body + tail).encode(), dtype=np.uint8) - ord("0")


def decode_bits(spec: CodeSpec, bits: Sequence[int], k: int | None = None) -> list[int]:
    """Run the window decoder over ``bits`` (no preprocessing).

    With ``k`` given, decoding stops after ``k`` output bits and the result
    is truncated or zero-padded to exactly ``k`` bits.
    """
    dec = spec.decoder
    n = len(bits)
    width = dec.width
    pad = 1 - int(bits[-1])
    pos = len(spec.preamble)
    state = dec.initial
    out: list[int] = []
    limit = float("inf") if k is None else k
    while pos < n and len(out) < limit:
        w = 0
        for j in range(pos, pos + width):
            w = (w << 1) | (int(bits[j]) if j < n else pad)
        word, adv, state = dec.table[state][w]
        out.extend(map(int, word))
        pos += adv
    if k is None:
        if spec.tail:
            del out[len(out) - spec.encoder.block:]
        return out
    return (out + [0] * k)[:k]


def decode(code, received, k: int | None = None) -> np.ndarray:
    """Preprocess the received runs, then decode."""
    spec = get_code(code)
    runs = preprocess_runs(spec.id, bits_to_runs(received))
    return np.asarray(decode_bits(spec, runs_to_bits(runs).tolist(), k), dtype=np.uint8)


# ---------------------------------------------------------------------------
# code definitions


def _single_state(words: Sequence[str]) -> Transducer:
    return Transducer(1, (tuple((w, 0) for w in words),))


def _manchester_decoder() -> WindowDecoder:
    # state = previously decoded bit; two received bits per window
    def rule(prev: int, w: str):
        if w == "10":
            return "1", 2, 1
        if w == "01":
            return "0", 2, 0
        if prev == 1:
            return ("0", 1, 0) if w == "11" else ("0", 3, 0)
        return ("1", 1, 1) if w == "00" else ("0", 3, 0)

    # a frame decodes as if it were preceded by the codeword for 1
    return WindowDecoder.from_rule(2, 2, rule, initial=1)


def _stuff_encoder(extra: int) -> Transducer:
    # state 0: odd position t, state 1: even position t
    table = []
    for parity in (1, 0):
        row = []
        for u in (0, 1):
            word = str(u) + (str(u) * (extra - 1) + str(1 - u) if u == parity else "")
            row.append((word, 1 - len(table)))
        table.append(tuple(row))
    return Transducer(1, tuple(table))


def _stuff_decoder(extra: int) -> WindowDecoder:
    def rule(state: int, w: str):
        parity = 1 - state
        b = int(w)
        return w, (1 + extra if b == parity else 1), 1 - state

    return WindowDecoder.from_rule(1, 2, rule)


# Look-up decoder for the {1,2} FSM code: the current 3-bit word plus
# the leading bits of what follows.  Each entry lists the follow-up prefixes
# that select the output; the first entry of a word is its fallback.
_FSM12_RULES = {
    "000": [((), "00")],
    "001": [(("010", "001"), "00"), (("1", "011"), "01")],
    "010": [(("0", "100"), "11"), (("110", "101"), "10")],
    "011": [(("0", "1"), "00")],
    "100": [(("1", "0"), "01")],
    "101": [(("010", "001"), "11"), (("1", "011"), "10")],
    "110": [(("0", "100"), "00"), (("110", "101"), "01")],
    "111": [((), "00")],
}


def _fsm12_decoder() -> WindowDecoder:
    def rule(_state: int, w: str):
        word, ahead = w[:3], w[3:]
        entries = _FSM12_RULES[word]
        for prefixes, out in entries:
            if any(ahead.startswith(p) for p in prefixes):
                return out, 3, 0
        return entries[0][1], 3, 0

    return WindowDecoder.from_rule(6, 1, rule)


def _fsm13_word_rule(word: str, ahead: str) -> str:
    if word == "11":
        return "1"
    if word == "10":
        return "1" if ahead == "10" else "0"
    return "0"  # 00, and the impossible 01


def _fsm13_decoder() -> WindowDecoder:
    return WindowDecoder.from_rule(4, 1, lambda _s, w: (_fsm13_word_rule(w[:2], w[2:]), 2, 0))


def _fsm12_encoder() -> Transducer:
    # Two-state rate-2/3 encoder whose words never hold two adjacent ones.
    # keys: (u1, v) -> (word, next); states A=0, B=1
    isolated = (
        {(0, 1): ("010", 0), (0, 0): ("010", 1), (1, 1): ("000", 0), (1, 0): ("000", 1)},
        {(0, 0): ("101", 0), (0, 1): ("001", 0), (1, 0): ("100", 0), (1, 1): ("100", 1)},
    )
    # Product with the differential map (hold the level on 1, flip on 0).
    # The look-up decoder reads the second info bit relative to the line
    # level, hence v = u2 xor level.  Product state = 2*z_state + (1 - level).
    table = []
    for zstate, level in ((0, 1), (0, 0), (1, 1), (1, 0)):
        row = []
        for u in range(4):
            u1, u2 = u >> 1, u & 1
            word_z, znext = isolated[zstate][(u1, u2 ^ level)]
            c, lvl = [], level
            for z in word_z:
                lvl ^= 1 - int(z)
                c.append(str(lvl))
            row.append(("".join(c), 2 * znext + (1 - lvl)))
        table.append(tuple(row))
    return Transducer(2, tuple(table), initial=0)


def _runs_of(s: str) -> list[int]:
    return [len(list(g)) for _, g in itertools.groupby(s)]


@dataclass(frozen=True)
class SearchTranscript:
    candidates: int
    decodable: int
    constrained: int
    minimal: int
    machines: int
    average_powers: tuple[Fraction, ...]


def _is_minimal(table) -> bool:
    n = len(table)
    cls = [0] * n
    while True:
        sig = [tuple((w, cls[nx]) for w, nx in row) for row in table]
        keys = sorted(set(sig))
        new = [keys.index(s) for s in sig]
        if len(set(new)) == len(set(cls)):
            return len(set(new)) == n
        cls = new


def _strongly_connected(table) -> bool:
    n = len(table)
    for s in range(n):
        seen, stack = {s}, [s]
        while stack:
            for _, nx in table[stack.pop()]:
                if nx not in seen:
                    seen.add(nx)
                    stack.append(nx)
        if len(seen) != n:
            return False
    return True


def _paths(table, start: int, depth: int):
    frontier = [(start, "")]
    for _ in range(depth):
        frontier = [(nx, out + w) for s, out in frontier for w, nx in table[s]]
    return [out for _, out in frontier]


def _canonical(table, initial: int):
    order, queue = [initial], [initial]
    while queue:
        for _, nx in table[queue.pop(0)]:
            if nx not in order:
                order.append(nx)
                queue.append(nx)
    relabel = {old: new for new, old in enumerate(order)}
    return tuple(tuple((w, relabel[nx]) for w, nx in table[old]) for old in order)


@lru_cache(maxsize=None)
def _search_fsm13() -> tuple[Transducer, SearchTranscript]:
    """Find the 3-state rate-1/2 {1,3} encoders decodable by the pair rule."""
    n_states = 3
    legal = {1, 3}
    # the pair rule decodes 00 as 0 and 11 as 1, and 01 never occurs
    words = {0: ("00", "10"), 1: ("11", "10")}
    edge_opts = [[(w, nx) for w in words[u] for nx in range(n_states)] for u in (0, 1)]
    candidates = decodable = constrained = 0
    survivors = []
    for choice in itertools.product(*(edge_opts[u] for _ in range(n_states) for u in (0, 1))):
        candidates += 1
        table = tuple((choice[2 * s], choice[2 * s + 1]) for s in range(n_states))
        ok = all(
            _fsm13_word_rule(w, table[nx][u2][0]) == str(u)
            for row in table
            for u, (w, nx) in enumerate(row)
            for u2 in (0, 1)
        )
        if not ok:
            continue
        decodable += 1
        ok = True
        for s in range(n_states):
            for out in _paths(table, s, 6):
                r = _runs_of(out)
                if r[0] > 3 or r[-1] > 3 or any(x not in legal for x in r[1:-1]):
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        constrained += 1
        if _strongly_connected(table) and _is_minimal(table):
            survivors.append(table)
    if not survivors:
        raise RuntimeError(
            f"no {{1,3}} encoder found: {candidates} candidates, {decodable} decodable, {constrained} constrained"
        )
    # pick the canonical form over all valid start states: a start state is
    # valid when every frame's first run is already admissible
    forms = []
    for table in survivors:
        for s in range(n_states):
            if all(_runs_of(out)[0] in legal for out in _paths(table, s, 4)):
                forms.append(_canonical(table, s))
    forms = sorted(set(forms))
    best = forms[0]
    from .metrics import table_average_power  # metrics imports this module

    averages = tuple(sorted({table_average_power(t) for t in survivors}))
    transcript = SearchTranscript(candidates, decodable, constrained, len(survivors), len(forms), averages)
    return Transducer(1, best, initial=0), transcript


def reconstruct_encoder(code) -> tuple[Transducer, object]:
    """Rebuild an FSM encoder from its design constraints; returns ``(encoder, transcript)``."""
    cid = CodeId(code)
    if cid is CodeId.FSM12:
        return _fsm12_encoder(), "product of a two-state isolated-ones encoder with the differential map"
    if cid is CodeId.FSM13:
        return _search_fsm13()
    raise ValueError(f"{cid} is not a reconstructed FSM code")


@lru_cache(maxsize=None)
def _registry() -> dict[CodeId, CodeSpec]:
    f = Fraction
    one_two = frozenset({1, 2})
    one_three = frozenset({1, 3})
    specs = [
        CodeSpec(CodeId.MANCHESTER, "Manchester", one_two, one_two, f(1, 2),
                 _single_state(("01", "10")), _manchester_decoder()),
        CodeSpec(CodeId.VL_10_011, "{10,011}", one_two, frozenset({1, 2, 3}), f(2, 5),
                 _single_state(("10", "011")),
                 WindowDecoder.from_rule(1, 1, lambda _s, w: ("0", 2, 0) if w == "1" else ("1", 3, 0)),
                 variable_length=True),
        CodeSpec(CodeId.VL_101_01101, "{101,01101}", frozenset({1}), one_two, f(1, 4),
                 _single_state(("101", "01101")),
                 WindowDecoder.from_rule(1, 1, lambda _s, w: ("0", 3, 0) if w == "1" else ("1", 5, 0)),
                 variable_length=True),
        CodeSpec(CodeId.VL_01_0111, "{01,0111}", frozenset({1}), one_three, f(1, 3),
                 _single_state(("01", "0111")),
                 WindowDecoder.from_rule(3, 1, lambda _s, w: ("0", 2, 0) if w[2] == "0" else ("1", 4, 0)),
                 variable_length=True),
        CodeSpec(CodeId.STUFF12, "bit-stuffing {1,2}", one_two, one_two, f(2, 3),
                 _stuff_encoder(1), _stuff_decoder(1), preamble="1", variable_length=True),
        CodeSpec(CodeId.STUFF13, "bit-stuffing {1,3}", one_three, one_three, f(1, 2),
                 _stuff_encoder(2), _stuff_decoder(2), preamble="1", variable_length=True),
        CodeSpec(CodeId.FSM12, "FSM {1,2}", one_two, one_two, f(2, 3),
                 _fsm12_encoder(), _fsm12_decoder(), tail=True),
        CodeSpec(CodeId.FSM13, "FSM {1,3}", one_three, one_three, f(1, 2),
                 _search_fsm13()[0], _fsm13_decoder(), tail=True),
    ]
    return {s.id: s for s in specs}


def get_code(code) -> CodeSpec:
    if isinstance(code, CodeSpec):
        return code
    try:
        return _registry()[CodeId(code)]
    except ValueError:
        known = ", ".join(c.value for c in CodeId)
        raise ValueError(f"unknown code {code!r}; expected one of: {known}") from None


def all_codes() -> list[CodeSpec]:
    return list(_registry().values())


# ---------------------------------------------------------------------------
# exhaustive checks


@dataclass
class RoundtripReport:
    code: CodeId
    k_max: int
    words_checked: int = 0
    passed: bool = True
    counterexample: tuple[int, ...] | None = None
    reason: str = ""


def _runs_legal(spec: CodeSpec, bits: np.ndarray, skip_first: bool = False) -> bool:
    rs = bits_to_runs(bits)
    for i, r in enumerate(rs.runs):
        if skip_first and i == 0:
            continue
        if r not in spec.allowed((rs.start_polarity + i) % 2):
            return False
    return True


def verify_roundtrip(code, k_max: int = 16, *, batch: bool = True) -> RoundtripReport:
    """Exhaustively check decode(encode(u)) == u and the run constraints.

    Every info word of every length ``1..k_max`` (multiples of the block
    size) is tried.  For FSM codes the roundtrip is also checked from every
    encoder state; run constraints are enforced for frames starting in the
    designated initial state.
    """
    if not 1 <= k_max <= 20:
        raise ValueError("k_max must be in 1..20")
    spec = get_code(code)
    report = RoundtripReport(spec.id, k_max)
    b = spec.encoder.block
    if batch:
        from . import _kernels

        for k in range(b, k_max + 1, b):
            info = ((np.arange(1 << k)[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8)
            starts = range(spec.encoder.n_states) if spec.tail else [spec.encoder.initial]
            for s0 in starts:
                bits, nbits = _kernels.encode_batch(spec, info, initial=s0)
                if s0 == spec.encoder.initial:
                    runs, nruns, _ = _kernels.runs_batch(bits, nbits)
                    bad = _first_illegal(spec, runs, nruns, bits[:, 0])
                    if bad is not None:
                        report.passed = False
                        report.counterexample = tuple(info[bad].tolist())
                        report.reason = f"run constraint violated (start state {s0})"
                        return report
                dec = _kernels.decode_batch(spec, bits, nbits, k)
                wrong = np.flatnonzero(np.any(dec != info, axis=1))
                report.words_checked += len(info)
                if wrong.size:
                    report.passed = False
                    report.counterexample = tuple(info[wrong[0]].tolist())
                    report.reason = f"decoded word differs (start state {s0})"
                    return report
        return report

    for k in range(b, k_max + 1, b):
        for word in itertools.product((0, 1), repeat=k):
            bits = encode(spec.id, word)
            report.words_checked += 1
            if not _runs_legal(spec, bits) or decode_bits(spec, bits.tolist(), k) != list(word):
                report.passed = False
                report.counterexample = word
                report.reason = "roundtrip or run constraint failed"
                return report
    return report


def _first_illegal(spec: CodeSpec, runs: np.ndarray, nruns: np.ndarray, first: np.ndarray):
    longest = int(runs.max())
    ok = np.zeros((2, longest + 1), dtype=bool)
    for pol in (0, 1):
        for r in spec.allowed(pol):
            if r <= longest:
                ok[pol, r] = True
    idx = np.arange(runs.shape[1])
    pol = (first[:, None].astype(np.int64) + idx) % 2
    valid = idx < nruns[:, None]
    legal = ok[pol, runs] | ~valid
    bad = np.flatnonzero(~legal.all(axis=1))
    return int(bad[0]) if bad.size else None
