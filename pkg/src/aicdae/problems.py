"""Benchmark DAEs with exact solutions and exact accurate-IC matrices."""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import ConfigurationError
from .matfun import DaePair, MatrixFunction, manufacture_rhs, standard_form


@dataclasses.dataclass(frozen=True)
class ProblemBundle:
    """A DAE together with everything needed to verify a solver on it.

    ``G_exact`` is a matrix function whose nullspace is ``N_can(t)``; ``G_a``
    and ``g_a`` state an accurate initial condition at ``interval[0]``.
    """

    name: str
    pair: DaePair
    A: MatrixFunction
    D: np.ndarray
    B: MatrixFunction
    q: MatrixFunction
    exact: Callable[[float], np.ndarray]
    dexact: Callable[[float], np.ndarray]
    G_exact: MatrixFunction
    G_a: np.ndarray
    g_a: np.ndarray
    expected_mu: int
    expected_l: int
    interval: Tuple[float, float] = (0.0, 5.0)

    @property
    def m(self) -> int:
        return self.pair.m

    @property
    def k(self) -> int:
        return self.pair.k

    def residual(self, t) -> np.ndarray:
        """DAE residual of the exact solution at ``t``."""
        return self.pair.residual(t, self.exact(t), self.dexact(t)) - self.q(t).ravel()


def _bundle(name, A, k, B, x, dx, G_exact, expected_mu, expected_l, interval, t0=None):
    m = B.rows
    D = np.eye(k, m)
    pair = standard_form(A, D, B)
    q = manufacture_rhs(pair, x, dx)
    t0 = interval[0] if t0 is None else t0
    G_a = G_exact(t0) if expected_l else np.zeros((0, m))
    g_a = G_a @ x(t0)
    return ProblemBundle(name, pair, A, D, B, q, x, dx, G_exact, G_a, g_a, expected_mu, expected_l, interval)


# ---------------------------------------------------------------------------
# linearized Campbell-Moore problem


def _cm_H(s, c):
    return np.array([[s, -c, 0.0], [0.0, 1.0, c]])


def _cm_frakA(s, c):
    return np.array([[0.0, 1.0, -c], [-1.0, 0.0, -s], [0.0, 0.0, 0.0]])


def _cm_Omega(s, c):
    return np.array(
        [
            [c**4, s * c**3, -s * c**2],
            [s * c**3, s**2 * c**2, -(s**3) * c],
            [-s * c**2, -(s**3) * c, s**2],
        ]
    )


def _cm_dOmega(s, c):
    a = -4 * c**3 * s
    b = c**4 - 3 * s**2 * c**2
    e = -(c**3) + 2 * s**2 * c
    f = 2 * s * c**3 - 2 * s**3 * c
    g = -3 * s**2 * c**2 + s**4
    h = 2 * s * c
    return np.array([[a, b, e], [b, f, g], [e, g, h]])


def campbell_moore_G(t: float) -> np.ndarray:
    """Closed-form accurate-IC matrix of the linearized Campbell-Moore DAE.

    Notes
    -----
    ``ker G(0)`` is ``N_can(0)`` to rounding level.  Away from ``t = 0`` the
    closed form drifts from ``N_can(t)`` (opening about 0.06 at ``t = 0.5``),
    so it serves as a reference at the origin only.
    """
    s, c = math.sin(t), math.cos(t)
    H = _cm_H(s, c)
    G = np.zeros((4, 7))
    G[:2, :3] = H
    G[2:, :3] = H @ (_cm_frakA(s, c) + _cm_dOmega(s, c)) @ _cm_Omega(s, c)
    G[2:, 3:6] = H
    return G


def campbell_moore(rho: float = 5.0) -> ProblemBundle:
    """Linearized Campbell-Moore test problem (index 3, four dynamic dof)."""
    rho = float(rho)
    if rho == 0.0:
        raise ConfigurationError("rho must be nonzero")

    def A(t):
        return np.eye(7, 6)

    def B(t):
        s, c = math.sin(t), math.cos(t)
        out = np.zeros((7, 7))
        out[0, 3] = out[1, 4] = out[2, 5] = -1.0
        out[3] = [0, 0, s, 0, 1, -c, -2 * rho * c * c]
        out[4] = [0, 0, -c, -1, 0, -s, -2 * rho * s * c]
        out[5] = [0, 0, 1, 0, 0, 0, 2 * rho * s]
        out[6] = [2 * rho * c * c, 2 * rho * s * c, -2 * rho * s, 0, 0, 0, 0]
        return out

    def x(t):
        s, c = math.sin(t), math.cos(t)
        return np.array([s, c, 2 * c * c, c, -s, -2 * math.sin(2 * t), -s / rho])

    def dx(t):
        s, c = math.sin(t), math.cos(t)
        return np.array([c, -s, -4 * s * c, -s, -c, -4 * math.cos(2 * t), -c / rho])

    G_a = np.array(
        [
            [0, -1, 0, 0, 0, 0, 0],
            [0, 1, 1, 0, 0, 0, 0],
            [0, 0, 0, 0, -1, 0, 0],
            [-1, 0, 0, 0, 1, 1, 0],
        ],
        dtype=float,
    )
    bundle = _bundle(
        "campbell-moore",
        MatrixFunction(7, 6, A, None),
        6,
        MatrixFunction(7, 7, B, None),
        x,
        dx,
        MatrixFunction(4, 7, campbell_moore_G),
        3,
        4,
        (0.0, 5.0),
    )
    return dataclasses.replace(bundle, G_a=G_a, g_a=np.array([-1.0, 3.0, 0.0, 0.0]))


# ---------------------------------------------------------------------------
# Chua-Riaza circuit


def chua_riaza(case: int | str = 1) -> ProblemBundle:
    """Circuit DAE with index 1, 2 or 3 depending on its element laws.

    The right-hand side is manufactured from a smooth trigonometric solution.
    """
    case = int(str(case).replace("index", ""))
    if case not in (1, 2, 3):
        raise ConfigurationError(f"unknown Chua-Riaza case {case}")

    def C1(t):
        return math.sin(t) + 2.0

    def dC1(t):
        return math.cos(t)

    if case == 3:
        def C2(t):
            return -C1(t)

        def dC2(t):
            return -dC1(t)
    else:
        def C2(t):
            return math.cos(t) + 2.0

        def dC2(t):
            return -math.sin(t)

    def L(t):
        return t * t + 1.0

    def dL(t):
        return 2.0 * t

    if case == 1:
        def R1(t):
            return 0.5 * math.sin(2 * t) + 1.0
    else:
        def R1(t):
            return 0.0

    def R2(t):
        return math.sin(t) + math.cos(t) + 2.0

    def A(t):
        out = np.zeros((5, 3))
        out[0, 0], out[1, 1], out[2, 2] = C1(t), C2(t), L(t)
        return out

    def B(t):
        return np.array(
            [
                [dC1(t), 0, 0, -1, 1],
                [0, dC2(t), 1, 1, 0],
                [0, -1, dL(t), 0, 0],
                [-1, 1, 0, -R1(t), 0],
                [1, 0, 0, 0, -R2(t)],
            ],
            dtype=float,
        )

    def x(t):
        return np.array(
            [math.sin(t), math.cos(2 * t), math.sin(t) + math.cos(t), math.cos(t), math.sin(3 * t)]
        )

    def dx(t):
        return np.array(
            [math.cos(t), -2 * math.sin(2 * t), math.cos(t) - math.sin(t), -math.sin(t), 3 * math.cos(3 * t)]
        )

    if case == 1:
        def G(t):
            return np.eye(3, 5)
        l = 3
    elif case == 2:
        def G(t):
            return np.array([[C1(t) / C2(t), 1, 0, 0, 0], [0, 0, 1, 0, 0]], dtype=float)
        l = 2
    else:
        def G(t):
            return np.array([[-1, 1, -L(t) / (R2(t) * C1(t)), 0, 0]], dtype=float)
        l = 1

    return _bundle(
        f"chua-riaza-{case}",
        MatrixFunction(5, 3, A),
        3,
        MatrixFunction(5, 5, B),
        x,
        dx,
        MatrixFunction(l, 5, G),
        case,
        l,
        (0.0, 5.0),
    )


# ---------------------------------------------------------------------------
# index-2 differentiation problem


def kcf_index2(f=math.sin, df=math.cos, d2f: Optional[Callable] = None) -> ProblemBundle:
    """``x1 = f``, ``-x1' + x2 = 0``; the solution is ``(f, f')``.

    ``d2f`` is needed only for the derivative of the exact solution; it
    defaults to ``-f`` which is correct for ``sin`` and ``cos``.
    """
    if d2f is None:
        def d2f(t):
            return -f(t)

    def A(t):
        return np.array([[0.0], [-1.0]])

    def B(t):
        return np.eye(2)

    def x(t):
        return np.array([f(t), df(t)])

    def dx(t):
        return np.array([df(t), d2f(t)])

    bundle = _bundle(
        "kcf2",
        MatrixFunction(2, 1, A),
        1,
        MatrixFunction(2, 2, B),
        x,
        dx,
        MatrixFunction(0, 2, lambda t: np.zeros((0, 2))),
        2,
        0,
        (0.0, 5.0),
    )
    return bundle


REGISTRY = {
    "campbell-moore": campbell_moore,
    "chua-riaza-1": lambda: chua_riaza(1),
    "chua-riaza-2": lambda: chua_riaza(2),
    "chua-riaza-3": lambda: chua_riaza(3),
    "kcf2": kcf_index2,
}


def get_problem(name: str) -> ProblemBundle:
    try:
        return REGISTRY[name]()
    except KeyError:
        raise ConfigurationError(f"unknown problem {name!r}; choose from {sorted(REGISTRY)}") from None
