import math

import numpy as np
import pytest

from aicdae.errors import ConfigurationError
from aicdae.problems import REGISTRY, campbell_moore, campbell_moore_G, chua_riaza, get_problem, kcf_index2
from aicdae.reduction import ReductionConfig, accurate_ic_matrix, gap_to_reference
from aicdae.problems import _cm_dOmega, _cm_Omega


class TestCampbellMoore:
    def test_shapes_and_expectations(self):
        b = campbell_moore()
        assert (b.m, b.k, b.expected_mu, b.expected_l) == (7, 6, 3, 4)
        assert b.G_a.shape == (4, 7)

    def test_residual_at_zero(self):
        assert np.max(np.abs(campbell_moore().residual(0.0))) <= 1e-12

    def test_initial_condition(self):
        b = campbell_moore()
        x0 = b.exact(0.0)
        np.testing.assert_allclose(x0, [0, 1, 2, 1, 0, 0, 0], atol=1e-15)
        np.testing.assert_allclose(b.G_a @ x0, [-1, 3, 0, 0], atol=1e-14)
        np.testing.assert_allclose(b.g_a, [-1, 3, 0, 0], atol=1e-14)

    def test_exact_solution_formula(self):
        b = campbell_moore(rho=5)
        t = 0.7
        s, c = math.sin(t), math.cos(t)
        want = [s, c, 2 * c * c, c, -s, -2 * math.sin(2 * t), -s / 5]
        np.testing.assert_allclose(b.exact(t), want, atol=1e-15)

    def test_rho_zero(self):
        with pytest.raises(ConfigurationError):
            campbell_moore(0.0)

    @pytest.mark.parametrize("rho", [1.0, -2.0, 5.0])
    def test_residual_any_rho(self, rho):
        b = campbell_moore(rho)
        for t in np.linspace(0, 5, 17):
            assert np.max(np.abs(b.residual(t))) <= 1e-12

    def test_dOmega_is_derivative(self):
        h = 1e-6
        for t in (0.3, 1.1, 2.9):
            fd = (_cm_Omega(math.sin(t + h), math.cos(t + h)) - _cm_Omega(math.sin(t - h), math.cos(t - h))) / (2 * h)
            np.testing.assert_allclose(_cm_dOmega(math.sin(t), math.cos(t)), fd, atol=1e-8)

    def test_G_kernel_contains_ker_D(self):
        assert np.all(campbell_moore_G(1.3)[:, 6] == 0.0)


class TestChuaRiaza:
    @pytest.mark.parametrize("case,mu,l", [(1, 1, 3), (2, 2, 2), (3, 3, 1)])
    def test_expectations(self, case, mu, l):
        b = chua_riaza(case)
        assert (b.m, b.k, b.expected_mu, b.expected_l) == (5, 3, mu, l)
        assert b.G_exact(0.3).shape == (l, 5)

    def test_index1_G_is_D(self):
        np.testing.assert_array_equal(chua_riaza(1).G_exact(2.0), np.eye(3, 5))

    def test_index2_G_at_zero(self):
        np.testing.assert_allclose(chua_riaza(2).G_exact(0.0)[0], [2 / 3, 1, 0, 0, 0], atol=1e-15)

    def test_index3_G(self):
        t = 1.0
        L, R2, C1 = t * t + 1, math.sin(t) + math.cos(t) + 2, math.sin(t) + 2
        np.testing.assert_allclose(chua_riaza("index3").G_exact(t), [[-1, 1, -L / (R2 * C1), 0, 0]], atol=1e-15)

    def test_unknown_case(self):
        with pytest.raises(ConfigurationError):
            chua_riaza(4)


class TestKcf:
    def test_zero(self):
        b = kcf_index2(lambda t: 0.0, lambda t: 0.0, lambda t: 0.0)
        assert np.all(b.exact(1.3) == 0.0)

    def test_linear(self):
        b = kcf_index2(lambda t: t, lambda t: 1.0, lambda t: 0.0)
        np.testing.assert_array_equal(b.exact(2.0), [2.0, 1.0])

    def test_expectations(self):
        b = kcf_index2()
        assert (b.m, b.k, b.expected_mu, b.expected_l) == (2, 1, 2, 0)
        assert b.G_a.shape == (0, 2) and b.g_a.shape == (0,)

    def test_reduction_gap_zero(self):
        b = kcf_index2()
        out = accurate_ic_matrix(b.pair, 1.0, ReductionConfig())
        assert out.dof == 0 and gap_to_reference(out, b.G_exact(1.0)) == 0.0


def test_registry():
    assert set(REGISTRY) == {"campbell-moore", "chua-riaza-1", "chua-riaza-2", "chua-riaza-3", "kcf2"}
    with pytest.raises(ConfigurationError):
        get_problem("van-der-pol")


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_exact_residual(name):
    b = get_problem(name)
    for t in np.linspace(*b.interval, 100):
        assert np.max(np.abs(b.residual(t))) <= 1e-12


@pytest.mark.parametrize("name", sorted(REGISTRY))
@pytest.mark.parametrize("Md", [3, 5, 7])
@pytest.mark.parametrize("tau", [0.1, 0.05])
def test_index_detection(name, Md, tau):
    b = get_problem(name)
    out = accurate_ic_matrix(b.pair, 1.0, ReductionConfig(Nd=Md - 1, Md=Md, tau=tau))
    assert (out.mu, out.dof) == (b.expected_mu, b.expected_l)


def test_gap_decreases_under_halving():
    b = campbell_moore()
    gaps = [
        gap_to_reference(accurate_ic_matrix(b.pair, 0.0, ReductionConfig(tau=tau)), b.G_exact(0.0))
        for tau in (0.1, 0.05, 0.025, 0.0125)
    ]
    assert all(g1 < g0 for g0, g1 in zip(gaps, gaps[1:]))
