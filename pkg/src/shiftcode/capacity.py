"""Capacity of the discretized shift channel per binary symbol.

Inputs are runlengths ``1..L``; the objective is mutual information divided
by the mean input length, which is quasiconcave on the simplex.  The
maximizer is a projected ascent with Newton steps restricted to the free
face of the simplex and a backtracking line search; plain steepest ascent
is available as ``method="gradient"``.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gauss_channel import ChannelParams, QuantizationScheme, Rounding, Thresholded, transition_distribution

__all__ = [
    "DiscreteChannel",
    "CapacityResult",
    "SolverOptions",
    "capacity_scheme",
    "build_truncated_channel",
    "normalized_mi",
    "mi_gradient",
    "objective_parts",
    "project_to_simplex",
    "maximize_capacity",
    "capacity_sweep",
]

_LN2 = math.log(2.0)
_FLOOR = 1e-12


@dataclass(frozen=True)
class DiscreteChannel:
    matrix: np.ndarray  # L x L' row-stochastic
    epsilon: float
    scheme: QuantizationScheme
    threshold_probability: float

    @property
    def input_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def output_size(self) -> int:
        return self.matrix.shape[1]


@dataclass
class SolverOptions:
    tolerance: float = 1e-9
    max_iters: int = 100_000
    max_restarts: int = 10
    seed: int | np.random.SeedSequence = 0
    method: str = "newton"
    probe_radius: float = 1e-4
    probe_random: int = 20


@dataclass
class CapacityResult:
    optimizer: np.ndarray
    capacity: float
    iterations: int
    gradient_norm: float
    restarts: int
    strict_max_verified: bool
    converged: bool
    L: int = 0
    epsilon: float = float("nan")
    scheme: str = ""
    threshold_probability: float = float("nan")
    output_size: int = 0
    message: str = ""


def capacity_scheme(name: str, L: int) -> QuantizationScheme:
    """Resolve a scheme name for inputs ``1..L``.

    ``rounding`` (untruncated), ``rounding:G`` (truncation G) or
    ``optimal-thresholds`` (values 1..L with pairwise-optimal thresholds).
    """
    if name == "rounding":
        return Rounding()
    if name.startswith("rounding:"):
        return Rounding(int(name.split(":", 1)[1]))
    if name in ("optimal-thresholds", "thresholded"):
        return Thresholded.optimal(range(1, L + 1))
    raise ValueError(f"unknown capacity scheme {name!r}; use rounding, rounding:G or optimal-thresholds")


def build_truncated_channel(L: int, T: float, scheme: QuantizationScheme, epsilon: float) -> DiscreteChannel:
    """Channel on inputs ``1..L`` whose outputs stop at the first rare value.

    The last output ``L'`` is the smallest value whose probability is below
    ``T`` for every input; everything beyond it is lumped into ``L'``.
    """
    if L < 2:
        raise ValueError("L must be >= 2")
    if not 0 < T < 1:
        raise ValueError("T must lie in (0, 1)")
    params = ChannelParams(epsilon)
    cap = 10 * L
    rows = [transition_distribution(x, scheme, params) for x in range(1, L + 1)]
    width = max(max(r) for r in rows)
    full = np.zeros((L, max(width, cap) + 1))
    for i, r in enumerate(rows):
        for y, p in r.items():
            full[i, y - 1] = p
    col_max = full.max(axis=0)
    below = np.flatnonzero(col_max[:cap] < T)
    if below.size == 0:
        raise ValueError(f"no output below T={T} within the cap {cap} (L={L}, epsilon={epsilon})")
    last = int(below[0])  # zero-based column of L'
    matrix = full[:, : last + 1].copy()
    matrix[:, last] = full[:, last:].sum(axis=1)
    return DiscreteChannel(matrix, float(epsilon), scheme, float(T))


def _check_dist(channel: DiscreteChannel, dist) -> np.ndarray:
    f = np.asarray(dist, dtype=float)
    if f.shape != (channel.input_size,):
        raise ValueError(f"distribution must have length {channel.input_size}")
    if np.any(f < 0) or abs(f.sum() - 1.0) > 1e-12:
        raise ValueError("distribution must be nonnegative and sum to 1")
    return f


def _divergences(P: np.ndarray, f: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Per-input divergence ``D(P(.|x) || q)`` in bits, mutual information, mean length."""
    q = f @ P
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log2(P / q), 0.0)
    div = terms.sum(axis=1)
    x = np.arange(1, len(f) + 1)
    support = f > 0  # inputs off the support can have infinite divergence
    return div, float(f[support] @ div[support]), float(f @ x)


def normalized_mi(channel: DiscreteChannel, dist) -> float:
    """Mutual information per mean input length, in bits per binary symbol."""
    f = _check_dist(channel, dist)
    _, info, mean = _divergences(channel.matrix, f)
    return max(info, 0.0) / mean


def mi_gradient(channel: DiscreteChannel, dist) -> np.ndarray:
    """Partial derivatives w.r.t. ``f(1..L-1)`` with ``f(L) = 1 - sum``."""
    f = _check_dist(channel, dist)
    if np.any(f <= 0):
        raise ValueError("gradient needs a strictly positive distribution")
    div, info, mean = _divergences(channel.matrix, f)
    L = len(f)
    x = np.arange(1, L)
    return ((div[:-1] - div[-1]) * mean - info * (x - L)) / mean ** 2


def objective_parts(P: np.ndarray, f: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Objective, gradient and Hessian in the unconstrained coordinates ``f(1..L)``."""
    q = f @ P
    div, info, mean = _divergences(P, f)
    d = div - 1.0 / _LN2  # dI/df(x)
    x = np.arange(1, len(f) + 1, dtype=float)
    grad = (d * mean - info * x) / mean ** 2
    inv_q = np.divide(1.0, q, out=np.zeros_like(q), where=q > 0)
    h_info = -(P * inv_q) @ P.T / _LN2
    hess = (
        h_info / mean
        - (np.outer(d, x) + np.outer(x, d)) / mean ** 2
        + 2.0 * info * np.outer(x, x) / mean ** 3
    )
    return info / mean, grad, hess


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, len(v) + 1)
    rho = np.nonzero(u * k > css - 1.0)[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1)
    return np.maximum(v - theta, 0.0)


def _feasible(v: np.ndarray) -> np.ndarray:
    w = np.maximum(project_to_simplex(v), _FLOOR)
    return w / w.sum()


def _stationarity(f: np.ndarray, grad: np.ndarray) -> float:
    """Norm of the projected-gradient map; zero exactly at KKT points."""
    return float(np.linalg.norm(project_to_simplex(f + grad) - f))


def _ascent_direction(f: np.ndarray, grad: np.ndarray, hess: np.ndarray, method: str) -> np.ndarray:
    interior = f > 1e-10
    ref = grad[interior].mean() if interior.any() else grad.mean()
    free = interior | (grad > ref)
    idx = np.flatnonzero(free)
    d = np.zeros_like(f)
    g = grad[idx]
    if method == "newton" and len(idx) > 1:
        n = len(idx)
        kkt = np.zeros((n + 1, n + 1))
        kkt[:n, :n] = hess[np.ix_(idx, idx)]
        kkt[:n, n] = 1.0
        kkt[n, :n] = 1.0
        try:
            step = np.linalg.solve(kkt, np.append(-g, 0.0))[:n]
            if step @ g > 0:
                d[idx] = step
                return d
        except np.linalg.LinAlgError:
            pass
    d[idx] = g - g.mean()
    return d


def _ascend(P: np.ndarray, f: np.ndarray, opts: SolverOptions) -> tuple[np.ndarray, float, int, float, bool]:
    val, grad, hess = objective_parts(P, f)
    gn = _stationarity(f, grad)
    for it in range(opts.max_iters):
        if gn <= opts.tolerance:
            return f, val, it, gn, True
        d = _ascent_direction(f, grad, hess, opts.method)
        step = 1.0
        while True:
            nf = _feasible(f + step * d)
            nv, ng, nh = objective_parts(P, nf)
            if nv >= val + 1e-4 * (grad @ (nf - f)):
                break
            # at float resolution the value stalls; accept progress in stationarity
            if abs(nv - val) <= 1e-15 * abs(val):
                ngn = _stationarity(nf, ng)
                if ngn < gn:
                    break
            step *= 0.5
            if step < 1e-30:
                return f, val, it, gn, False
        f, val, grad, hess = nf, nv, ng, nh
        gn = _stationarity(f, grad)
    return f, val, opts.max_iters, gn, gn <= opts.tolerance


def _verify_strict_max(P: np.ndarray, f: np.ndarray, val: float, rng, opts: SolverOptions) -> bool:
    L = len(f)
    r = opts.probe_radius
    dirs = []
    for i in range(L - 1):
        e = np.zeros(L)
        e[i], e[-1] = 1.0, -1.0
        e /= np.linalg.norm(e)
        dirs.extend([e, -e])
    for _ in range(opts.probe_random):
        v = rng.standard_normal(L)
        v -= v.mean()
        dirs.append(v / np.linalg.norm(v))
    checked = 0
    for v in dirs:
        g = _feasible(f + r * v)
        if np.allclose(g, f, rtol=0, atol=1e-15):
            continue  # direction leaves the simplex at a boundary optimum
        checked += 1
        if not objective_parts(P, g)[0] < val:
            return False
    return checked > 0


def maximize_capacity(channel: DiscreteChannel, options: SolverOptions | None = None) -> CapacityResult:
    """Maximize normalized mutual information over input distributions."""
    opts = options or SolverOptions()
    if opts.method not in ("newton", "gradient"):
        raise ValueError("method must be 'newton' or 'gradient'")
    rng = np.random.default_rng(opts.seed)
    P = channel.matrix
    L = channel.input_size
    best = None
    total_iters = 0
    for attempt in range(opts.max_restarts + 1):
        f0 = rng.dirichlet(np.ones(L))
        f0 = _feasible(f0)
        f, val, iters, gn, converged = _ascend(P, f0, opts)
        total_iters += iters
        strict = converged and _verify_strict_max(P, f, val, rng, opts)
        cand = CapacityResult(f, float(val), total_iters, gn, attempt, strict, converged)
        if best is None or (cand.strict_max_verified, cand.capacity) > (best.strict_max_verified, best.capacity):
            best = cand
        if strict:
            break
    best.iterations = total_iters
    best.L = L
    best.epsilon = channel.epsilon
    best.scheme = channel.scheme.label
    best.threshold_probability = channel.threshold_probability
    best.output_size = channel.output_size
    if not best.strict_max_verified:
        best.message = "no verified strict maximum within the restart budget"
    return best


def _solve_cell(args) -> CapacityResult:
    L, eps, scheme_name, T, opts = args
    ch = build_truncated_channel(L, T, capacity_scheme(scheme_name, L), eps)
    res = maximize_capacity(ch, opts)
    res.scheme = scheme_name
    return res


def capacity_sweep(
    L_list: Sequence[int],
    epsilon_grid: Sequence[float],
    scheme_list: Sequence[str],
    T: float = 1e-8,
    options: SolverOptions | None = None,
    workers: int = 1,
) -> list[CapacityResult]:
    """One result per ``(scheme, L, epsilon)`` cell, in that nesting order.

    Each cell gets its own seed derived from ``(options.seed, cell index)``,
    so results do not depend on ``workers``.
    """
    if not (L_list and epsilon_grid and scheme_list):
        raise ValueError("all grids must be nonempty")
    base = options or SolverOptions()
    root = base.seed if isinstance(base.seed, int) else 0
    cells = []
    for scheme in scheme_list:
        for L in L_list:
            for eps in epsilon_grid:
                seed = np.random.SeedSequence(root, spawn_key=(len(cells),))
                cell_opts = SolverOptions(**{**base.__dict__, "seed": seed})
                cells.append((int(L), float(eps), scheme, T, cell_opts))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_safe_cell, cells))
    else:
        results = [_safe_cell(c) for c in cells]
    return results


def _safe_cell(cell) -> CapacityResult:
    try:
        return _solve_cell(cell)
    except (ValueError, np.linalg.LinAlgError) as exc:
        L, eps, scheme, T, _ = cell
        return CapacityResult(np.full(L, np.nan), float("nan"), 0, float("nan"), 0, False, False,
                              L, eps, scheme, T, 0, str(exc))
