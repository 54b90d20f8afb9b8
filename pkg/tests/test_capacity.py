import math

import numpy as np
import pytest

from shiftcode.capacity import (
    DiscreteChannel,
    SolverOptions,
    build_truncated_channel,
    capacity_scheme,
    capacity_sweep,
    maximize_capacity,
    mi_gradient,
    normalized_mi,
    project_to_simplex,
)
from shiftcode.gauss_channel import Rounding, Thresholded
from shiftcode.metrics import rll_capacity

T = 1e-8
EPS_GRID = [round(0.05 * i, 2) for i in range(1, 9)]


def naive_objective(P, f):
    """Direct double sum of I(X;Y) / E[X]."""
    L, M = P.shape
    P = P.tolist()
    q = [sum(f[x] * P[x][y] for x in range(L)) for y in range(M)]
    info = 0.0
    for x in range(L):
        for y in range(M):
            if f[x] > 0 and P[x][y] > 0:
                info += f[x] * P[x][y] * math.log2(P[x][y] / q[y])
    return info / sum((x + 1) * f[x] for x in range(L))


def dinkelbach_capacity(P, iters=200, inner=3000):
    """Independent maximizer: Dinkelbach outer loop, cost-penalised Blahut-Arimoto inside."""
    L = P.shape[0]
    cost = np.arange(1, L + 1, dtype=float)
    lam = 0.0
    f = np.full(L, 1.0 / L)
    for _ in range(iters):
        for _ in range(inner):
            q = f @ P
            with np.errstate(divide="ignore", invalid="ignore"):
                d = np.where(P > 0, P * np.log(P / q), 0.0).sum(axis=1)
            g = f * np.exp(d - lam * cost)
            g /= g.sum()
            if np.max(np.abs(g - f)) < 1e-15:
                f = g
                break
            f = g
        q = f @ P
        with np.errstate(divide="ignore", invalid="ignore"):
            info = float(f @ np.where(P > 0, P * np.log(P / q), 0.0).sum(axis=1))
        new = info / float(f @ cost)
        if abs(new - lam) < 1e-14:
            break
        lam = new
    return lam / math.log(2), f


def channel(L, eps, scheme="rounding"):
    return build_truncated_channel(L, T, capacity_scheme(scheme, L), eps)


class TestChannelConstruction:
    def test_noiseless_identity(self):
        ch = build_truncated_channel(2, T, Rounding(), 0.01)
        off = ch.matrix.copy()
        np.fill_diagonal(off, 0)
        assert off.sum() < 1e-12
        assert ch.output_size >= 2

    @pytest.mark.parametrize("L", [2, 3, 5, 8, 12])
    @pytest.mark.parametrize("eps", [0.05, 0.2, 0.4])
    @pytest.mark.parametrize("scheme", ["rounding", "optimal-thresholds"])
    def test_rows_stochastic_and_threshold(self, L, eps, scheme):
        ch = channel(L, eps, scheme)
        P = ch.matrix
        assert np.all(P >= 0)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
        assert ch.output_size >= L
        # last column is the first one that is rare for every input (before lumping)
        assert np.all(P[:, :-1].max(axis=0)[L - 1:] >= T) or ch.output_size == L + 1

    def test_fig_channel_shape(self):
        ch = channel(3, 0.15)
        assert ch.input_size == 3 and ch.matrix[0, 0] > 0.99

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            build_truncated_channel(1, T, Rounding(), 0.1)
        with pytest.raises(ValueError):
            build_truncated_channel(3, 1.5, Rounding(), 0.1)
        with pytest.raises(ValueError):
            build_truncated_channel(3, T, Rounding(), 0.0)
        with pytest.raises(ValueError):
            capacity_scheme("nearest", 3)


class TestObjective:
    def test_identity_uniform(self):
        ch = DiscreteChannel(np.eye(2), 0.0, Rounding(), T)
        assert normalized_mi(ch, [0.5, 0.5]) == pytest.approx(2 / 3, abs=1e-15)

    def test_point_mass(self):
        ch = channel(3, 0.15)
        assert normalized_mi(ch, [0, 1, 0]) == 0.0

    def test_matches_naive_sum(self):
        ch = channel(3, 0.15)
        f = [0.5, 0.3, 0.2]
        assert normalized_mi(ch, f) == pytest.approx(naive_objective(ch.matrix, f), abs=1e-12)

    @pytest.mark.parametrize("L", [2, 4, 7])
    def test_random_points_match_naive_sum(self, L):
        rng = np.random.default_rng(L)
        ch = channel(L, 0.2)
        for f in rng.dirichlet(np.ones(L), size=20):
            assert normalized_mi(ch, f) == pytest.approx(naive_objective(ch.matrix, f), abs=1e-12)

    def test_bounded_by_mutual_information(self):
        rng = np.random.default_rng(3)
        ch = channel(4, 0.25)
        for f in rng.dirichlet(np.ones(4), size=50):
            v = normalized_mi(ch, f)
            assert 0 <= v <= v * float(f @ np.arange(1, 5)) + 1e-15

    def test_rejects_bad_distribution(self):
        ch = channel(3, 0.1)
        with pytest.raises(ValueError):
            normalized_mi(ch, [0.5, 0.5])
        with pytest.raises(ValueError):
            normalized_mi(ch, [0.5, 0.6, -0.1])


def finite_difference(ch, f, h=1e-6):
    L = len(f)
    out = []
    for i in range(L - 1):
        e = np.zeros(L)
        e[i], e[-1] = h, -h
        out.append((normalized_mi(ch, f + e) - normalized_mi(ch, f - e)) / (2 * h))
    return np.array(out)


class TestGradient:
    def test_reference_point(self):
        ch = channel(3, 0.15)
        f = np.array([0.5, 0.3, 0.2])
        np.testing.assert_allclose(mi_gradient(ch, f), finite_difference(ch, f), rtol=1e-5)

    @pytest.mark.parametrize("L", [2, 3, 4])
    def test_random_interior_points(self, L):
        rng = np.random.default_rng(100 + L)
        for _ in range(100):
            eps = rng.uniform(0.05, 0.4)
            ch = channel(L, eps)
            f = rng.dirichlet(np.ones(L))
            f = 0.9 * f + 0.1 / L  # keep away from the boundary so the FD stencil stays inside
            g, fd = mi_gradient(ch, f), finite_difference(ch, f)
            assert np.all(np.abs(g - fd) <= 1e-5 * np.maximum(np.abs(fd), 1e-3)), (eps, f, g, fd)

    def test_rejects_zero_coordinate(self):
        with pytest.raises(ValueError):
            mi_gradient(channel(3, 0.1), [0.5, 0.5, 0.0])

    def test_symmetric_channel_antisymmetry(self):
        # a channel symmetric under swapping inputs and outputs, but inputs cost 1 and 2
        P = np.array([[0.9, 0.1], [0.1, 0.9]])
        ch = DiscreteChannel(P, 0.1, Rounding(), T)
        g_plus = mi_gradient(ch, [0.5 + 0.1, 0.4])
        g_minus = mi_gradient(ch, [0.5 - 0.1, 0.6])
        info_grad = lambda f: (np.log2(P[0] / (np.array(f) @ P)) @ P[0]
                                - np.log2(P[1] / (np.array(f) @ P)) @ P[1])
        assert np.sign(info_grad([0.6, 0.4])) == -np.sign(info_grad([0.4, 0.6]))
        assert g_plus.shape == g_minus.shape == (1,)


def test_quasiconcavity_probe():
    rng = np.random.default_rng(2)
    worst = math.inf
    for i in range(200):
        L = int(rng.integers(2, 7))
        ch = channel(L, float(rng.uniform(0.02, 0.45)))
        f1, f2 = rng.dirichlet(np.ones(L), size=2)
        lo = min(normalized_mi(ch, f1), normalized_mi(ch, f2))
        for lam in np.arange(1, 10) / 10:
            worst = min(worst, normalized_mi(ch, lam * f1 + (1 - lam) * f2) - lo)
    assert worst >= -1e-10


def test_projection():
    rng = np.random.default_rng(0)
    for _ in range(100):
        v = rng.normal(size=5) * 3
        p = project_to_simplex(v)
        assert p.min() >= 0 and p.sum() == pytest.approx(1)
        # optimality: no simplex vertex is closer than the projection along its segment
        for j in range(5):
            e = np.eye(5)[j]
            assert np.linalg.norm(v - p) <= np.linalg.norm(v - (0.99 * p + 0.01 * e)) + 1e-12


class TestMaximize:
    @pytest.mark.parametrize("L", [2, 3, 4])
    def test_noiseless_limit(self, L):
        res = maximize_capacity(channel(L, 0.01))
        assert res.converged and res.strict_max_verified
        assert res.capacity == pytest.approx(rll_capacity(range(1, L + 1), range(1, L + 1)), abs=5e-3)

    def test_noiseless_limits_by_closed_form(self):
        golden = math.log2((1 + math.sqrt(5)) / 2)
        tribonacci = max(r.real for r in np.roots([1, -1, -1, -1]) if abs(r.imag) < 1e-12)
        assert maximize_capacity(channel(2, 0.01)).capacity == pytest.approx(golden, abs=5e-3)
        assert maximize_capacity(channel(3, 0.01)).capacity == pytest.approx(math.log2(tribonacci), abs=5e-3)
        assert maximize_capacity(channel(2, 0.01)).capacity == pytest.approx(0.694, abs=5e-3)

    @pytest.mark.parametrize("L,eps,scheme", [(2, 0.1, "rounding"), (3, 0.15, "rounding"), (4, 0.3, "rounding"),
                                              (4, 0.05, "optimal-thresholds"), (6, 0.25, "optimal-thresholds"),
                                              (5, 0.2, "rounding:1"), (8, 0.3, "rounding")])
    def test_agrees_with_independent_solver(self, L, eps, scheme):
        ch = channel(L, eps, scheme)
        res = maximize_capacity(ch)
        ref, f_ref = dinkelbach_capacity(ch.matrix)
        assert res.capacity == pytest.approx(ref, abs=1e-8)
        assert res.capacity >= ref - 1e-12
        np.testing.assert_allclose(res.optimizer, f_ref, atol=1e-4)

    def test_stationary_and_fields(self):
        res = maximize_capacity(channel(3, 0.15))
        assert res.converged and res.gradient_norm <= 1e-9
        assert res.optimizer.sum() == pytest.approx(1, abs=1e-12)
        assert res.L == 3 and res.output_size >= 3 and res.capacity >= 0
        assert np.linalg.norm(mi_gradient(channel(3, 0.15), res.optimizer)) < 1e-8

    def test_restart_independence(self):
        ch = channel(5, 0.2)
        a = maximize_capacity(ch, SolverOptions(seed=1))
        b = maximize_capacity(ch, SolverOptions(seed=987654))
        assert abs(a.capacity - b.capacity) < 1e-6

    def test_gradient_method_reaches_same_point(self):
        ch = channel(3, 0.2)
        a = maximize_capacity(ch, SolverOptions(method="gradient", tolerance=1e-7))
        b = maximize_capacity(ch)
        assert a.capacity == pytest.approx(b.capacity, abs=1e-8)

    def test_shortest_runs_most_likely(self):
        for L in (4, 8):
            f = maximize_capacity(channel(L, 0.1)).optimizer
            assert np.argmax(f) == 0 and f[0] > f[1] > f[2]

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            maximize_capacity(channel(3, 0.1), SolverOptions(method="simplex"))


class TestSweep:
    @pytest.fixture(scope="class")
    @staticmethod
    def sweep():
        return capacity_sweep([2, 4, 8, 12], EPS_GRID, ["rounding", "optimal-thresholds"], T)

    @staticmethod
    def curve(sweep, L, scheme):
        return [r.capacity for r in sweep if r.L == L and r.scheme == scheme]

    def test_one_cell_each(self, sweep):
        assert len(sweep) == 4 * len(EPS_GRID) * 2
        assert all(r.converged and r.strict_max_verified for r in sweep)

    @pytest.mark.parametrize("L", [2, 4, 8, 12])
    @pytest.mark.parametrize("scheme", ["rounding", "optimal-thresholds"])
    def test_nonincreasing_in_epsilon(self, sweep, L, scheme):
        c = self.curve(sweep, L, scheme)
        assert all(b <= a + 1e-12 for a, b in zip(c, c[1:]))

    def test_alphabet_size_converges(self, sweep):
        c8, c12 = self.curve(sweep, 8, "rounding"), self.curve(sweep, 12, "rounding")
        assert max(abs(a - b) for a, b in zip(c8, c12)) < 5e-3

    def test_scheme_crossover(self):
        r = lambda eps, s: maximize_capacity(channel(4, eps, s)).capacity
        assert r(0.3, "rounding") >= r(0.3, "optimal-thresholds")
        assert r(0.05, "optimal-thresholds") >= r(0.05, "rounding")

    def test_worker_count_irrelevant(self):
        a = capacity_sweep([3, 5], [0.1, 0.3], ["rounding"], T, SolverOptions(seed=5), workers=1)
        b = capacity_sweep([3, 5], [0.1, 0.3], ["rounding"], T, SolverOptions(seed=5), workers=2)
        for x, y in zip(a, b):
            assert x.capacity == y.capacity and np.array_equal(x.optimizer, y.optimizer)

    def test_failed_cell_recorded(self):
        out = capacity_sweep([3], [0.1], ["bogus"], T)
        assert len(out) == 1 and not out[0].converged and out[0].message
