"""Power figures of merit for the codes and capacities of runlength constraints."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import eigs

from .codes import CodeSpec, get_code

__all__ = [
    "RllConstraint",
    "PowerReport",
    "power_report",
    "average_power",
    "table_average_power",
    "min_sustainable_power",
    "local_min_power",
    "default_window_bound",
    "stationary_distribution",
    "bit_graph",
    "min_mean_cycle",
    "rll_capacity",
    "rll_capacity_spectral",
    "rll_capacity_limit_powers_of_3",
    "constraint_graph",
]


@dataclass(frozen=True)
class RllConstraint:
    zeros: frozenset[int]
    ones: frozenset[int]

    def __init__(self, zeros: Iterable[int], ones: Iterable[int]):
        z, o = frozenset(int(v) for v in zeros), frozenset(int(v) for v in ones)
        if not z or not o:
            raise ValueError("both runlength sets must be nonempty")
        if min(z) < 1 or min(o) < 1:
            raise ValueError("runlengths must be positive")
        object.__setattr__(self, "zeros", z)
        object.__setattr__(self, "ones", o)


@dataclass(frozen=True)
class PowerReport:
    average: Fraction
    min_sustainable: Fraction
    local_min: Fraction
    window_bound: int


# ---------------------------------------------------------------------------
# exact linear algebra and graph helpers


def stationary_distribution(table) -> list[Fraction]:
    """Stationary law of an encoder table driven by uniform inputs (exact).

    ``table[s]`` lists ``(word, next_state)`` edges, all equally likely.
    Assumes a single recurrent class.
    """
    n = len(table)
    # rows: (P^T - I) pi = 0 for n-1 states, plus sum(pi) = 1
    a = [[Fraction(0)] * n for _ in range(n)]
    for s, row in enumerate(table):
        for _, nx in row:
            a[nx][s] += Fraction(1, len(row))
    for s in range(n):
        a[s][s] -= 1
    a[-1] = [Fraction(1)] * n
    b = [Fraction(0)] * (n - 1) + [Fraction(1)]
    # Gauss-Jordan with exact pivots
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        b[col], b[piv] = b[piv], b[col]
        inv = 1 / a[col][col]
        a[col] = [v * inv for v in a[col]]
        b[col] *= inv
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
                b[r] -= f * b[col]
    return b


def bit_graph(table) -> tuple[list[int], list[list[int]]]:
    """Expand an encoder table into a graph with one node per output bit.

    Returns ``(bit_of_node, successors)``.  Nodes of a word are chained;
    the last bit of an edge into state ``t`` links to the first bit of every
    edge leaving ``t``.
    """
    first: dict[int, list[int]] = {}
    bits: list[int] = []
    chains = []
    for s, row in enumerate(table):
        for word, nx in row:
            ids = list(range(len(bits), len(bits) + len(word)))
            bits.extend(int(c) for c in word)
            first.setdefault(s, []).append(ids[0])
            chains.append((ids, nx))
    succ: list[list[int]] = [[] for _ in bits]
    for ids, nx in chains:
        for a, b in zip(ids, ids[1:]):
            succ[a].append(b)
        succ[ids[-1]].extend(first.get(nx, []))
    return bits, succ


def min_mean_cycle(weights: Sequence[int], succ: Sequence[Sequence[int]]) -> Fraction:
    """Minimum mean node weight over all cycles (Karp), exact."""
    n = len(weights)
    inf = None
    d = [[inf] * n for _ in range(n + 1)]
    d[0] = [0] * n
    for k in range(1, n + 1):
        prev, cur = d[k - 1], d[k]
        for u in range(n):
            if prev[u] is None:
                continue
            val = prev[u] + weights[u]
            for v in succ[u]:
                if cur[v] is None or val < cur[v]:
                    cur[v] = val
    best = None
    for v in range(n):
        if d[n][v] is None:
            continue
        worst = max(
            Fraction(d[n][v] - d[k][v], n - k) for k in range(n) if d[k][v] is not None
        )
        if best is None or worst < best:
            best = worst
    if best is None:
        raise ValueError("graph has no cycle")
    return best


def _recurrent_nodes(succ: Sequence[Sequence[int]]) -> list[int]:
    """Nodes that lie on some cycle."""
    n = len(succ)
    out = []
    for s in range(n):
        seen, stack = set(), list(succ[s])
        while stack:
            v = stack.pop()
            if v == s:
                out.append(s)
                break
            if v not in seen:
                seen.add(v)
                stack.extend(succ[v])
    return out


# ---------------------------------------------------------------------------
# power metrics


def _table(spec: CodeSpec):
    return spec.encoder.table


def table_average_power(table) -> Fraction:
    """Ones density of an encoder table's output under uniform inputs."""
    pi = stationary_distribution(table)
    weight = sum(pi[s] * Fraction(sum(w.count("1") for w, _ in row), len(row)) for s, row in enumerate(table))
    length = sum(pi[s] * Fraction(sum(len(w) for w, _ in row), len(row)) for s, row in enumerate(table))
    return weight / length


def average_power(code) -> Fraction:
    """Long-run ones density under iid uniform information bits."""
    return table_average_power(_table(get_code(code)))


def min_sustainable_power(code) -> Fraction:
    """Lowest ones density over all cycles of the encoder output."""
    bits, succ = bit_graph(_table(get_code(code)))
    return min_mean_cycle(bits, succ)


def default_window_bound(code) -> int:
    return 3 * get_code(code).max_run + 2


def local_min_power(code, window_bound: int | None = None) -> Fraction:
    """Smallest positive ones density over windows of length <= ``window_bound``.

    Windows are substrings of bi-infinite code sequences, i.e. walks in the
    recurrent part of the bit graph.
    """
    spec = get_code(code)
    if window_bound is None:
        window_bound = default_window_bound(spec)
    if window_bound < 1:
        raise ValueError("window_bound must be >= 1")
    bits, succ = bit_graph(_table(spec))
    keep = _recurrent_nodes(succ)
    keep_set = set(keep)
    # reach[v]: bitmask of achievable weights over walks of the current length ending at v
    reach = {v: 1 << bits[v] for v in keep}
    best = None
    for length in range(1, window_bound + 1):
        if length > 1:
            nxt = {v: 0 for v in keep}
            for u in keep:
                if reach[u]:
                    for v in succ[u]:
                        if v in keep_set:
                            nxt[v] |= reach[u] << bits[v]
            reach = nxt
        union = 0
        for m in reach.values():
            union |= m
        union &= ~1  # positive weights only
        if union:
            w = (union & -union).bit_length() - 1
            cand = Fraction(w, length)
            if best is None or cand < best:
                best = cand
    if best is None:
        raise ValueError("no window with a one found")
    return best


def power_report(code, window_bound: int | None = None) -> PowerReport:
    spec = get_code(code)
    wb = default_window_bound(spec) if window_bound is None else window_bound
    return PowerReport(average_power(spec), min_sustainable_power(spec), local_min_power(spec, wb), wb)


# ---------------------------------------------------------------------------
# constraint capacities


def _as_constraint(constraint, ones=None) -> RllConstraint:
    if isinstance(constraint, RllConstraint):
        return constraint
    return RllConstraint(constraint, ones)


def rll_capacity(constraint, ones=None) -> float:
    """Capacity (bits per bit) of RLL(zeros, ones) from its run generating function.

    The largest real root ``lam`` of ``sum(lam**-i) * sum(lam**-j) = 1``
    gives the capacity ``log2(lam)``.
    """
    c = _as_constraint(constraint, ones)
    z, o = sorted(c.zeros), sorted(c.ones)
    if len(z) * len(o) == 1:
        return 0.0

    def f(lam):
        return sum(lam ** -i for i in z) * sum(lam ** -j for j in o) - 1.0

    return math.log2(brentq(f, 1.0, 2.0, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def constraint_graph(constraint, ones=None) -> sp.csr_matrix:
    """Adjacency matrix of the bit-level graph: states ``(bit, run so far)``."""
    c = _as_constraint(constraint, ones)
    sets = (c.zeros, c.ones)
    index = {}
    for b in (0, 1):
        for r in range(1, max(sets[b]) + 1):
            index[(b, r)] = len(index)
    rows, cols = [], []
    for (b, r), i in index.items():
        if r + 1 <= max(sets[b]):
            rows.append(i)
            cols.append(index[(b, r + 1)])
        if r in sets[b]:
            rows.append(i)
            cols.append(index[(1 - b, 1)])
    n = len(index)
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))


def rll_capacity_spectral(constraint, ones=None) -> float:
    """Capacity as ``log2`` of the spectral radius of :func:`constraint_graph`."""
    a = constraint_graph(constraint, ones)
    n = a.shape[0]
    if n <= 400:
        rho = max(abs(np.linalg.eigvals(a.toarray())))
    else:
        rho = max(abs(eigs(a, k=1, which="LM", return_eigenvectors=False, tol=1e-13, maxiter=100000)))
    return max(0.0, math.log2(rho))


def rll_capacity_limit_powers_of_3(L_max: int) -> list[float]:
    """Capacities of RLL({3^i}, {3^i}) for i = 0..L, for L = 0..L_max."""
    if not 0 <= L_max <= 8:
        raise ValueError("L_max must be in 0..8")
    out = []
    for L in range(L_max + 1):
        s = [3 ** i for i in range(L + 1)]
        out.append(rll_capacity(s, s))
    return out
