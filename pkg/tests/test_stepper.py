import numpy as np
import pytest

from aicdae.collocation import PiecewisePolySolution, build_grid, solve_window
from aicdae.errors import ConfigurationError, InconsistencyError, SingularWindowError
from aicdae.matfun import DaePair, MatrixFunction
from aicdae.problems import campbell_moore, chua_riaza
from aicdae.reduction import ReductionConfig
from aicdae.stepper import IvpConfig, IvpSolution, global_error, solve_ivp

CM = campbell_moore()


def table5_cfg(L, n, N, **kw):
    red = ReductionConfig(Nd=N, Md=N + 1)
    return IvpConfig(L=L, n=n, Nc=N, Mc=N + 1, reduction=red, tau_rule="power(mu/3)", **kw)


def zero_q(m):
    return MatrixFunction(m, 1, lambda t: np.zeros((m, 1)))


class TestConfig:
    def test_tau_rules(self):
        assert IvpConfig().tau_for(0.01, 3) == pytest.approx(0.01**1.5)
        assert IvpConfig(tau_rule="power(mu/3)").tau_for(0.5, 3) == pytest.approx(0.5)
        assert IvpConfig(tau_rule="fixed", tau=0.2).tau_for(0.5, 3) == 0.2
        assert IvpConfig().tau_for(0.3, 0) == 0.3

    @pytest.mark.parametrize(
        "kw", [dict(L=0), dict(n=0), dict(tau_rule="fixed"), dict(tau_rule="power(h)"), dict(tau_rule="fixed", tau=-1.0)]
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigurationError):
            IvpConfig(**kw)


class TestSolve:
    def test_single_window_is_solve_window(self):
        cfg = table5_cfg(1, 10, 4)
        sol = solve_ivp(CM.pair, CM.q, CM.G_a, CM.g_a, (0, 5), cfg)
        ref = solve_window(build_grid(0.0, 5.0, 10, 4, 5), CM.pair, CM.q, CM.G_a, CM.g_a)
        assert len(sol.windows) == 1 and sol.transfer_log == []
        assert sol.windows[0].diff_values.tobytes() == ref.diff_values.tobytes()
        assert sol.windows[0].alg_values.tobytes() == ref.alg_values.tobytes()

    def test_zero_data(self):
        cfg = table5_cfg(4, 2, 4)
        sol = solve_ivp(CM.pair, zero_q(7), CM.G_a, np.zeros(4), (0, 5), cfg)
        for w in sol.windows:
            assert np.all(w.diff_values == 0.0) and np.all(w.alg_values == 0.0)
        assert np.all(sol.values(np.linspace(0, 5, 41)) == 0.0)

    def test_windows_tile_interval(self):
        sol = solve_ivp(CM.pair, CM.q, CM.G_a, CM.g_a, (0, 5), table5_cfg(5, 2, 4))
        assert len(sol.transfer_log) == 4
        starts = [w.grid.t_start for w in sol.windows]
        ends = [w.grid.t_end for w in sol.windows]
        assert starts[0] == 0.0 and ends[-1] == 5.0
        assert all(e == s for e, s in zip(ends[:-1], starts[1:]))

    def test_transfer_bookkeeping(self):
        sol = solve_ivp(CM.pair, CM.q, CM.G_a, CM.g_a, (0, 5), table5_cfg(5, 2, 4))
        for lam, rec in enumerate(sol.transfer_log, start=1):
            prev, cur = sol.windows[lam - 1], sol.windows[lam]
            assert rec.t == cur.grid.t_start
            assert (rec.mu, rec.l) == (3, 4)
            np.testing.assert_array_equal(rec.g, rec.G @ prev.values(rec.t)[0])
            defect = rec.G @ cur.values(rec.t)[0] - rec.g
            np.testing.assert_allclose(defect, cur.ic_residual, atol=1e-12)

    def test_reference_gap_logged(self):
        sol = solve_ivp(CM.pair, CM.q, CM.G_a, CM.g_a, (0, 5), table5_cfg(2, 5, 4), G_reference=CM.G_exact)
        assert sol.transfer_log[0].gap is not None

    def test_compat_diagnostic(self):
        sol = solve_ivp(CM.pair, CM.q, CM.G_a, CM.g_a, (0, 5), table5_cfg(1, 10, 4))
        assert sol.compat["compatible"] and sol.compat["sigma_min"] > 0.1

    def test_transfer_modes(self):
        sol = solve_ivp(CM.pair, CM.q, CM.G_a, CM.g_a, (0, 5), table5_cfg(10, 1, 4))
        assert {r.mode for r in sol.transfer_log} == {"central"}
        sol = solve_ivp(CM.pair, CM.q, CM.G_a, CM.g_a, (0, 5), table5_cfg(10, 1, 5))
        assert {r.mode for r in sol.transfer_log} == {"right"}

    def test_index_change_detected(self):
        # E = diag(1, s(t)) loses its singular part after t = 2.5
        pair = DaePair(
            MatrixFunction(2, 2, lambda t: np.diag([1.0, float(t > 2.5)])),
            MatrixFunction.constant(np.eye(2)),
            2,
        )
        cfg = IvpConfig(L=5, n=10, reduction=ReductionConfig(Nd=2, Md=3))
        with pytest.raises(InconsistencyError):
            solve_ivp(pair, zero_q(2), [[1.0, 0.0]], [0.0], (0, 5), cfg)

    def test_singular_window_reports_index(self):
        pair = DaePair(
            MatrixFunction.constant(np.diag([1.0, 0.0])),
            MatrixFunction.constant(np.diag([0.0, 1.0])),
            1,
        )
        with pytest.raises(SingularWindowError) as exc:
            solve_ivp(pair, zero_q(2), [[0.0, 0.0]], [0.0], (0, 1), IvpConfig(n=2))
        assert exc.value.window == 0
        assert "window 1 of 1" in str(exc.value)

    def test_empty_interval(self):
        with pytest.raises(ConfigurationError):
            solve_ivp(CM.pair, CM.q, CM.G_a, CM.g_a, (1, 1))

    def test_workers_match_serial(self):
        a = solve_ivp(CM.pair, CM.q, CM.G_a, CM.g_a, (0, 5), table5_cfg(5, 2, 4))
        b = solve_ivp(CM.pair, CM.q, CM.G_a, CM.g_a, (0, 5), table5_cfg(5, 2, 4, workers=3))
        for x, y in zip(a.windows, b.windows):
            assert x.diff_values.tobytes() == y.diff_values.tobytes()

    def test_chua_riaza_index2_order(self):
        b = chua_riaza(2)
        ns = [4, 8, 16]
        errs = []
        for n in ns:
            cfg = IvpConfig(L=5, n=n, Nc=4, Mc=5, reduction=ReductionConfig(Nd=4, Md=5))
            errs.append(global_error(solve_ivp(b.pair, b.q, b.G_a, b.g_a, b.interval, cfg), b.exact, b.dexact))
        slope = np.polyfit(np.log(1.0 / np.array(ns)), np.log(errs), 1)[0]
        assert slope >= 4 - 2 + 1 - 0.5


class TestGlobalError:
    def test_pythagorean(self):
        wins = []
        for t0 in (0.0, 1.0):
            grid = build_grid(t0, 1.0, 1, 1, 2)
            wins.append(PiecewisePolySolution(grid, 1, 0, np.zeros((0, 1, 2)), np.zeros((1, 1, 1))))
        sol = IvpSolution(wins, [], (0.0, 2.0))

        def exact(t):
            return np.array([3e-3 if t < 1.0 else 4e-3])

        assert global_error(sol, exact, variant="value") == pytest.approx(5e-3, rel=1e-14)

    def test_exact_windows(self):
        sol = solve_ivp(CM.pair, zero_q(7), CM.G_a, np.zeros(4), (0, 5), table5_cfg(2, 2, 4))
        assert global_error(sol, lambda t: np.zeros(7), lambda t: np.zeros(7)) == 0.0


def test_determinism():
    a = solve_ivp(CM.pair, CM.q, CM.G_a, CM.g_a, (0, 5), table5_cfg(5, 2, 4))
    b = solve_ivp(CM.pair, CM.q, CM.G_a, CM.g_a, (0, 5), table5_cfg(5, 2, 4))
    for x, y in zip(a.windows, b.windows):
        assert x.diff_values.tobytes() == y.diff_values.tobytes()
        assert x.alg_values.tobytes() == y.alg_values.tobytes()


def test_moderate_influence_of_L():
    # fixed total grid L * n = 10, N = 4
    errs = []
    for L in (1, 2, 5, 10):
        sol = solve_ivp(CM.pair, CM.q, CM.G_a, CM.g_a, (0, 5), table5_cfg(L, 10 // L, 4))
        errs.append(global_error(sol, CM.exact, CM.dexact))
    assert max(errs) / min(errs) <= 10.0
    assert errs[0] == pytest.approx(6.24e-3, rel=0.05)
    assert errs[-1] == pytest.approx(1.18e-2, rel=0.05)
