import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aicdae.collocation import (
    PiecewisePolySolution,
    WindowGrid,
    assemble,
    build_grid,
    eval,
    eval_Dx_prime,
    hd1_error,
    lagrange_matrix,
    lobatto_nodes,
    residual_weight,
    solve_assembled,
    solve_window,
)
from aicdae.errors import ConfigurationError, DomainError, SingularWindowError, UnderdeterminedError
from aicdae.matfun import DaePair, MatrixFunction
from aicdae.problems import campbell_moore, chua_riaza, kcf_index2
from aicdae.specdiff import NodeFamily

CM = campbell_moore()


def zero_q(m):
    return MatrixFunction(m, 1, lambda t: np.zeros((m, 1)))


class TestGrid:
    def test_gauss_two_points(self):
        g = build_grid(0.0, 1.0, 1, 1, 2)
        np.testing.assert_allclose(g.collocation_times, [(3 - math.sqrt(3)) / 6, (3 + math.sqrt(3)) / 6], atol=1e-15)

    def test_breakpoints(self):
        np.testing.assert_array_equal(build_grid(0.0, 1.0, 2, 2, 3).breakpoints, [0, 0.5, 1])

    def test_radau_left_endpoint(self):
        g = build_grid(0.0, 1.0, 1, 2, 3, family="radau")
        assert g.theta[0] == 0.0 and np.all(np.diff(g.theta) > 0) and g.theta[-1] < 1

    @pytest.mark.parametrize(
        "args",
        [(0.0, 1.0, 1, 3, 3), (0.0, 0.0, 1, 3, 4), (0.0, 1.0, 0, 3, 4), (0.0, 1.0, 1, 0, 4)],
    )
    def test_invalid(self, args):
        with pytest.raises(ConfigurationError):
            build_grid(*args)

    def test_family_restricted(self):
        with pytest.raises(ConfigurationError):
            build_grid(0.0, 1.0, 1, 2, 3, family="chebyshev2")

    def test_lobatto(self):
        np.testing.assert_allclose(lobatto_nodes(2), [0, 0.5, 1], atol=1e-15)
        np.testing.assert_allclose(lobatto_nodes(3), [0, (1 - 1 / math.sqrt(5)) / 2, (1 + 1 / math.sqrt(5)) / 2, 1], atol=1e-15)


class TestHelpers:
    def test_lagrange_cardinals(self):
        nodes = lobatto_nodes(4)
        np.testing.assert_allclose(lagrange_matrix(nodes, nodes), np.eye(5), atol=1e-13)
        x = np.linspace(0, 1, 7)
        np.testing.assert_allclose(lagrange_matrix(nodes, x, True) @ nodes**3, 3 * x**2, atol=1e-12)

    def test_residual_weight_is_l2_norm(self):
        theta = build_grid(0, 1, 1, 3, 5).theta
        R = residual_weight(theta)
        r = np.cos(3 * theta)  # interpolant p of degree 4
        coef = np.polynomial.polynomial.polyfit(theta, r, 4)
        sq = np.polynomial.polynomial.polyint(np.polynomial.polynomial.polymul(coef, coef))
        l2 = np.polynomial.polynomial.polyval(1.0, sq) - np.polynomial.polynomial.polyval(0.0, sq)
        assert np.linalg.norm(R @ r) ** 2 == pytest.approx(l2, rel=1e-12)


class TestAssemble:
    def test_row_count(self):
        grid = build_grid(0.0, 0.5, 10, 5, 6)
        lsq = assemble(grid, CM.pair, CM.q, CM.G_a, CM.g_a)
        assert lsq.matrix.shape[0] == 7 * 10 * 6 + 4 == 424
        assert (lsq.n_residual_rows, lsq.n_ic_rows) == (420, 4)
        assert lsq.matrix.shape[1] == 6 * (10 * 5 + 1) + 1 * 10 * 5

    def test_zero_data(self):
        grid = build_grid(0.0, 0.5, 4, 4, 5)
        lsq = assemble(grid, CM.pair, zero_q(7), CM.G_a, np.zeros(4))
        assert np.all(lsq.rhs == 0.0)
        sol = solve_window(grid, CM.pair, zero_q(7), CM.G_a, np.zeros(4))
        assert np.all(sol.values(np.linspace(0, 0.5, 9)) == 0.0)
        assert sol.residual_norm == 0.0

    def test_g_size_mismatch(self):
        with pytest.raises(ConfigurationError):
            assemble(build_grid(0, 1, 1, 2, 3), CM.pair, CM.q, CM.G_a, np.zeros(3))

    def test_underdetermined(self):
        grid = WindowGrid(0.0, 1.0, 1, 3, 2, np.array([0.25, 0.75]), NodeFamily.GAUSS_LEGENDRE)
        pair = DaePair(MatrixFunction.constant(np.eye(2)), MatrixFunction.constant(np.zeros((2, 2))), 2)
        with pytest.raises(UnderdeterminedError):
            assemble(grid, pair, zero_q(2), np.zeros((0, 2)), np.zeros(0))

    def test_lstsq_matches_dense_oracle(self):
        grid = build_grid(0.0, 0.5, 5, 4, 5)
        lsq = assemble(grid, CM.pair, CM.q, CM.G_a, CM.g_a)
        c = solve_assembled(lsq)
        c_ref = np.linalg.lstsq(lsq.matrix, lsq.rhs, rcond=None)[0]
        np.testing.assert_allclose(c, c_ref, rtol=0, atol=1e-9 * np.abs(c_ref).max())

    def test_functional_value(self):
        grid = build_grid(0.0, 0.5, 5, 4, 5)
        lsq = assemble(grid, CM.pair, CM.q, CM.G_a, CM.g_a)
        sol = solve_window(grid, CM.pair, CM.q, CM.G_a, CM.g_a)
        c = solve_assembled(lsq)
        phi = np.linalg.norm(lsq.matrix @ c - lsq.rhs) ** 2
        assert sol.residual_norm**2 == pytest.approx(phi, rel=1e-12, abs=1e-28)
        np.testing.assert_allclose(sol.ic_residual, (lsq.matrix @ c - lsq.rhs)[lsq.n_residual_rows:], atol=1e-15)

    def test_singular_design(self):
        # x2 enters no equation, so its coefficients are free
        pair = DaePair(
            MatrixFunction.constant(np.diag([1.0, 0.0])),
            MatrixFunction.constant(np.zeros((2, 2))),
            1,
        )
        grid = build_grid(0.0, 1.0, 2, 2, 3)
        with pytest.raises(SingularWindowError) as exc:
            solve_window(grid, pair, zero_q(2), [[1.0, 0.0]], [0.0])
        assert exc.value.sigma_min is not None and exc.value.sigma_min < 1e-12


class TestSolve:
    def test_kcf_polynomial(self):
        b = kcf_index2(lambda t: t**4 - t, lambda t: 4 * t**3 - 1, lambda t: 12 * t**2)
        grid = build_grid(0.0, 1.0, 3, 4, 5)
        sol = solve_window(grid, b.pair, b.q, b.G_a, b.g_a)
        ts = np.linspace(0, 1, 13)
        want = np.array([b.exact(t) for t in ts])
        np.testing.assert_allclose(sol.values(ts), want, atol=1e-10)

    def test_kcf_sine(self):
        b = kcf_index2()
        grid = build_grid(0.0, 1.0, 10, 4, 5)
        sol = solve_window(grid, b.pair, b.q, b.G_a, b.g_a)
        ts = np.linspace(0.05, 0.95, 19)
        assert np.max(np.abs(sol.values(ts)[:, 0] - np.sin(ts))) <= 1e-8
        assert np.max(np.abs(sol.values(ts)[:, 1] - np.cos(ts))) <= 1e-5

    def test_polynomial_reproduction_time_varying(self):
        # x1 = t^3 + 1, x2 = t^2 - t, with t-dependent coupling
        pair = DaePair(
            MatrixFunction(2, 2, lambda t: [[1.0 + t, 0.0], [0.0, 0.0]]),
            MatrixFunction(2, 2, lambda t: [[0.0, 1.0], [-t, 1.0]]),
            1,
        )

        def x(t):
            return np.array([t**3 + 1, t**2 - t])

        def dx(t):
            return np.array([3 * t**2, 2 * t - 1])

        q = MatrixFunction(2, 1, lambda t: pair.residual(t, x(t), dx(t)).reshape(2, 1))
        grid = build_grid(0.5, 1.0, 2, 3, 4)
        sol = solve_window(grid, pair, q, [[1.0, 0.0]], [x(0.5)[0]])
        ts = np.linspace(0.5, 1.5, 11)
        np.testing.assert_allclose(sol.values(ts), np.array([x(t) for t in ts]), atol=1e-10)
        assert hd1_error(sol, x, dx) <= 1e-10

    def test_campbell_moore_window_order(self):
        errs = []
        ns = [10, 20, 40]
        for n in ns:
            grid = build_grid(0.0, 0.5, n, 4, 5)
            sol = solve_window(grid, CM.pair, CM.q, CM.G_a, CM.g_a)
            errs.append(hd1_error(sol, CM.exact, CM.dexact))
        slope = np.polyfit(np.log(0.5 / np.array(ns)), np.log(errs), 1)[0]
        assert slope >= 4 - 3 + 1 - 0.5

    def test_chua_riaza_index1_order(self):
        b = chua_riaza(1)
        errs = []
        ns = [4, 8, 16]
        for n in ns:
            grid = build_grid(0.0, 1.0, n, 3, 4)
            sol = solve_window(grid, b.pair, b.q, b.G_a, b.g_a)
            errs.append(hd1_error(sol, b.exact, b.dexact))
        slope = np.polyfit(np.log(1.0 / np.array(ns)), np.log(errs), 1)[0]
        assert slope >= 3 - 0.5

    def test_refinement_reduces_residual(self):
        res = []
        for n in (5, 10, 20):
            res.append(solve_window(build_grid(0.0, 0.5, n, 4, 5), CM.pair, CM.q, CM.G_a, CM.g_a).residual_norm)
        assert res[0] >= res[1] >= res[2]


class TestEval:
    def test_square(self):
        grid = build_grid(0.0, 1.0, 1, 2, 3)
        nodes = lobatto_nodes(2)
        sol = PiecewisePolySolution(grid, 1, 1, (nodes**2).reshape(1, 1, 3), np.zeros((0, 1, 2)))
        assert eval_Dx_prime(sol, 0.5) == pytest.approx(1.0, abs=1e-14)
        assert eval(sol, 0.5) == pytest.approx(0.25, abs=1e-15)

    def test_zero(self):
        grid = build_grid(0.0, 1.0, 2, 2, 3)
        sol = PiecewisePolySolution(grid, 3, 1, np.zeros((1, 2, 3)), np.zeros((2, 2, 2)))
        assert np.all(eval(sol, 0.3) == 0.0)

    def test_right_limit_at_breakpoint(self):
        grid = build_grid(0.0, 1.0, 2, 1, 2)
        sol = PiecewisePolySolution(grid, 1, 0, np.zeros((0, 2, 2)), np.array([[[1.0], [2.0]]]))
        assert eval(sol, 0.5)[0] == pytest.approx(2.0)
        assert eval(sol, 0.4999)[0] == pytest.approx(1.0)
        assert eval(sol, 1.0)[0] == pytest.approx(2.0)

    def test_outside(self):
        grid = build_grid(0.0, 1.0, 1, 1, 2)
        sol = PiecewisePolySolution(grid, 1, 1, np.zeros((1, 1, 2)), np.zeros((0, 1, 1)))
        with pytest.raises(DomainError):
            eval(sol, 1.1)
        with pytest.raises(DomainError):
            eval_Dx_prime(sol, -0.1)


class TestHd1:
    def _zero(self):
        grid = build_grid(0.0, 1.0, 3, 2, 3)
        return PiecewisePolySolution(grid, 2, 1, np.zeros((1, 3, 3)), np.zeros((1, 3, 2)))

    def test_closed_form(self):
        err = hd1_error(self._zero(), lambda t: np.array([t, 0.0]), lambda t: np.array([1.0, 0.0]))
        assert err == pytest.approx(math.sqrt(4.0 / 3.0), rel=1e-14)

    def test_value_variant(self):
        err = hd1_error(self._zero(), lambda t: np.array([t, 0.0]), variant="value")
        assert err == pytest.approx(math.sqrt(2.0 / 3.0), rel=1e-14)

    def test_exact_gives_zero(self):
        assert hd1_error(self._zero(), lambda t: np.zeros(2), lambda t: np.zeros(2)) == 0.0

    def test_needs_derivative(self):
        with pytest.raises(ConfigurationError):
            hd1_error(self._zero(), lambda t: np.zeros(2))


@settings(max_examples=25, deadline=None)
@given(
    deg=st.integers(1, 5),
    n=st.integers(1, 4),
    extra=st.integers(1, 3),
    seed=st.integers(0, 2**31),
)
def test_reproduces_polynomial_solutions(deg, n, extra, seed):
    # index-2 chain: x1 = p, x2 = p' lies in the ansatz space when deg <= Nc
    rng = np.random.default_rng(seed)
    p = np.polynomial.Polynomial(rng.standard_normal(deg + 1))
    dp, d2p = p.deriv(), p.deriv(2)
    b = kcf_index2(lambda t: float(p(t)), lambda t: float(dp(t)), lambda t: float(d2p(t)))
    Nc = deg
    grid = build_grid(0.0, 1.0, n, Nc, Nc + extra)
    sol = solve_window(grid, b.pair, b.q, b.G_a, b.g_a)
    ts = np.linspace(0, 1, 9)
    scale = max(1.0, np.abs(p.coef).sum() * deg)
    np.testing.assert_allclose(sol.values(ts), np.array([b.exact(t) for t in ts]), atol=1e-10 * scale)
