"""Overdetermined least-squares collocation on one window ``[t0, t0 + H]``.

The ansatz uses piecewise polynomials on ``n`` equal subintervals: degree
``Nc`` for the ``k`` differentiated components (continuous across
breakpoints) and degree ``Nc - 1`` for the algebraic components.  The
residual ``E x' + F x - q`` is collocated at ``Mc > Nc`` points per
subinterval and its piecewise interpolant is minimized in ``L^2`` together
with the initial-condition defect ``|G x(t0) - g|``.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Optional

import numpy as np
import scipy.linalg
from numpy.polynomial import legendre as leg

from .errors import ConfigurationError, DomainError, SingularWindowError, UnderdeterminedError
from .matfun import DaePair
from .specdiff import NodeFamily, gauss_jacobi, reference_nodes


@dataclasses.dataclass(frozen=True)
class WindowGrid:
    t_start: float
    H: float
    n: int
    Nc: int
    Mc: int
    theta: np.ndarray
    family: NodeFamily

    @property
    def h(self) -> float:
        return self.H / self.n

    @property
    def t_end(self) -> float:
        return self.t_start + self.H

    @property
    def breakpoints(self) -> np.ndarray:
        return self.t_start + self.h * np.arange(self.n + 1)

    @property
    def collocation_times(self) -> np.ndarray:
        return (self.breakpoints[:-1, None] + self.h * self.theta[None, :]).ravel()


def build_grid(t_start, H, n, Nc, Mc, family=NodeFamily.GAUSS_LEGENDRE) -> WindowGrid:
    """Uniform grid with ``Mc`` collocation nodes per subinterval."""
    family = NodeFamily(family)
    if not H > 0:
        raise ConfigurationError(f"window length must be positive, got {H}")
    if n < 1 or Nc < 1:
        raise ConfigurationError(f"need n >= 1 and Nc >= 1 (n={n}, Nc={Nc})")
    if Mc <= Nc:
        raise ConfigurationError(f"need Mc >= Nc + 1 collocation points (Mc={Mc}, Nc={Nc})")
    if family not in (NodeFamily.GAUSS_LEGENDRE, NodeFamily.RADAU):
        raise ConfigurationError("collocation nodes must be gauss_legendre or radau")
    theta = 0.5 * (reference_nodes(family, Mc) + 1.0)
    if family is NodeFamily.RADAU:
        theta[0] = 0.0
    return WindowGrid(float(t_start), float(H), int(n), int(Nc), int(Mc), theta, family)


def lobatto_nodes(N: int) -> np.ndarray:
    """``N + 1`` Gauss-Lobatto nodes on ``[0, 1]``."""
    if N == 1:
        return np.array([0.0, 1.0])
    x, _ = gauss_jacobi(N - 1, 1.0, 1.0)
    x = 0.5 * (x - x[::-1])
    return 0.5 * (np.concatenate([[-1.0], x, [1.0]]) + 1.0)


def gauss_nodes(N: int) -> np.ndarray:
    """``N`` Gauss-Legendre nodes on ``[0, 1]``."""
    return 0.5 * (reference_nodes(NodeFamily.GAUSS_LEGENDRE, N) + 1.0)


def lagrange_matrix(nodes, x, derivative: bool = False) -> np.ndarray:
    """Values (or derivatives) at ``x`` of the Lagrange cardinals on ``nodes``.

    Both point sets live in ``[0, 1]``; a Legendre basis keeps the change of
    basis well conditioned.
    """
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    deg = nodes.size - 1
    V = leg.legvander(2 * nodes - 1, deg)
    W = leg.legvander(2 * x - 1, deg)
    if derivative:
        dW = np.zeros_like(W)
        for j in range(1, deg + 1):
            e = np.zeros(j + 1)
            e[j] = 1.0
            dW[:, j] = 2.0 * leg.legval(2 * x - 1, leg.legder(e))
        W = dW
    return np.linalg.solve(V.T, W.T).T


def residual_weight(theta) -> np.ndarray:
    """Upper Cholesky factor of the Gram matrix of the cardinals on ``theta``.

    ``|R r|^2`` with ``R`` the returned factor equals the ``L^2(0, 1)`` norm
    squared of the interpolant through residual values ``r``.
    """
    theta = np.asarray(theta, dtype=float)
    Mc = theta.size
    xq, wq = leg.leggauss(Mc + 1)
    xq = 0.5 * (xq + 1.0)
    wq = 0.5 * wq
    L = lagrange_matrix(theta, xq)
    gram = L.T @ (wq[:, None] * L)
    return scipy.linalg.cholesky(gram, lower=False)


@dataclasses.dataclass(frozen=True)
class AssembledLsq:
    """Dense least-squares system ``min |matrix c - rhs|``.

    The first ``n Mc m`` rows are weighted residual rows, the last ``l``
    rows state the initial condition with weight one.
    """

    matrix: np.ndarray
    rhs: np.ndarray
    n_residual_rows: int
    n_ic_rows: int
    row_weights: str = "sqrt(h) * chol(Gram) per subinterval; IC rows weight 1"


class _Layout:
    """Index bookkeeping of the unknown vector."""

    def __init__(self, grid: WindowGrid, m: int, k: int):
        self.grid, self.m, self.k = grid, m, k
        n, Nc = grid.n, grid.Nc
        self.n_diff = n * Nc + 1
        self.n_alg = n * Nc
        self.size = k * self.n_diff + (m - k) * self.n_alg

    def local(self, j: int) -> np.ndarray:
        """Global indices of the unknowns touching subinterval ``j``.

        Order: differentiated components with ``Nc + 1`` values each, then
        algebraic components with ``Nc`` values each.
        """
        Nc = self.grid.Nc
        idx = []
        for kap in range(self.k):
            start = kap * self.n_diff + j * Nc
            idx.append(np.arange(start, start + Nc + 1))
        off = self.k * self.n_diff
        for kap in range(self.m - self.k):
            start = off + kap * self.n_alg + j * Nc
            idx.append(np.arange(start, start + Nc))
        return np.concatenate(idx) if idx else np.zeros(0, dtype=int)


def _basis_rows(grid, m, k, theta, derivative=False):
    """Map local unknowns to component values at ``theta`` (shape P x m x nloc)."""
    Nc = grid.Nc
    Ld = lagrange_matrix(lobatto_nodes(Nc), theta, derivative)
    La = lagrange_matrix(gauss_nodes(Nc), theta) if not derivative else None
    P = np.atleast_1d(theta).size
    nloc = k * (Nc + 1) + (m - k) * Nc
    out = np.zeros((P, m, nloc))
    for kap in range(k):
        out[:, kap, kap * (Nc + 1):(kap + 1) * (Nc + 1)] = Ld
    if not derivative:
        off = k * (Nc + 1)
        for kap in range(m - k):
            out[:, k + kap, off + kap * Nc:off + (kap + 1) * Nc] = La
    return out


def assemble(grid: WindowGrid, pair: DaePair, q, G, g) -> AssembledLsq:
    """Assemble the discrete least-squares functional on ``grid``.

    Only the first ``k`` columns of ``E`` enter, so ``E x' = A (D x)'``.
    """
    m, k = pair.m, pair.k
    G = np.asarray(G, dtype=float).reshape(-1, m)
    g = np.asarray(g, dtype=float).reshape(-1)
    l = G.shape[0]
    if g.size != l:
        raise ConfigurationError(f"g has {g.size} entries, G has {l} rows")
    lay = _Layout(grid, m, k)
    n, Mc, h = grid.n, grid.Mc, grid.h
    n_res = n * Mc * m
    if n_res + l < lay.size:
        raise UnderdeterminedError(
            f"{n_res + l} equations for {lay.size} unknowns; increase Mc or add conditions"
        )
    X = _basis_rows(grid, m, k, grid.theta)
    dX = _basis_rows(grid, m, k, grid.theta, derivative=True) / h
    Rw = math.sqrt(h) * residual_weight(grid.theta)
    W = np.kron(Rw, np.eye(m))

    mat = np.zeros((n_res + l, lay.size))
    rhs = np.zeros(n_res + l)
    for j in range(n):
        t_j = grid.breakpoints[j]
        block = np.zeros((Mc, m, X.shape[2]))
        qb = np.zeros((Mc, m))
        for i, th in enumerate(grid.theta):
            t = t_j + th * h
            Ek = pair.E(t)[:, :k]
            Ft = pair.F(t)
            block[i] = Ek @ dX[i, :k] + Ft @ X[i]
            qb[i] = np.asarray(q(t), dtype=float).ravel()
        rows = slice(j * Mc * m, (j + 1) * Mc * m)
        mat[rows, lay.local(j)] = W @ block.reshape(Mc * m, -1)
        rhs[rows] = W @ qb.ravel()
    if l:
        X0 = _basis_rows(grid, m, k, np.array([0.0]))[0]
        mat[n_res:, lay.local(0)] = G @ X0
        rhs[n_res:] = g
    return AssembledLsq(mat, rhs, n_res, l)


@dataclasses.dataclass(frozen=True)
class PiecewisePolySolution:
    """Piecewise polynomial stored by nodal values.

    ``diff_values`` has shape ``(k, n, Nc + 1)`` (Gauss-Lobatto values),
    ``alg_values`` has shape ``(m - k, n, Nc)`` (Gauss values).
    """

    grid: WindowGrid
    m: int
    k: int
    diff_values: np.ndarray
    alg_values: np.ndarray
    residual_norm: float = 0.0
    ic_residual: Optional[np.ndarray] = None

    @classmethod
    def from_vector(cls, grid, m, k, c, **kw):
        lay = _Layout(grid, m, k)
        n, Nc = grid.n, grid.Nc
        dv = np.zeros((k, n, Nc + 1))
        av = np.zeros((m - k, n, Nc))
        for kap in range(k):
            vals = c[kap * lay.n_diff:(kap + 1) * lay.n_diff]
            for j in range(n):
                dv[kap, j] = vals[j * Nc:j * Nc + Nc + 1]
        off = k * lay.n_diff
        for kap in range(m - k):
            av[kap] = c[off + kap * lay.n_alg:off + (kap + 1) * lay.n_alg].reshape(n, Nc)
        return cls(grid, m, k, dv, av, **kw)

    def _locate(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        g = self.grid
        tol = 1e-12 * max(1.0, abs(g.t_start), abs(g.t_end))
        if np.any(t < g.t_start - tol) or np.any(t > g.t_end + tol):
            raise DomainError(f"evaluation outside [{g.t_start}, {g.t_end}]")
        s = (t - g.t_start) / g.h
        j = np.clip(np.floor(s).astype(int), 0, g.n - 1)
        theta = np.clip(s - j, 0.0, 1.0)
        return t, j, theta

    def values(self, t) -> np.ndarray:
        """Solution values at times ``t``; shape ``(len(t), m)``."""
        t, j, theta = self._locate(t)
        Nc = self.grid.Nc
        out = np.zeros((t.size, self.m))
        for jj in np.unique(j):
            sel = j == jj
            if self.k:
                Ld = lagrange_matrix(lobatto_nodes(Nc), theta[sel])
                out[np.ix_(sel, np.arange(self.k))] = Ld @ self.diff_values[:, jj].T
            if self.m > self.k:
                La = lagrange_matrix(gauss_nodes(Nc), theta[sel])
                out[np.ix_(sel, np.arange(self.k, self.m))] = La @ self.alg_values[:, jj].T
        return out

    def dx_prime(self, t) -> np.ndarray:
        """Derivative of the differentiated components; shape ``(len(t), k)``."""
        t, j, theta = self._locate(t)
        Nc = self.grid.Nc
        out = np.zeros((t.size, self.k))
        for jj in np.unique(j):
            sel = j == jj
            dL = lagrange_matrix(lobatto_nodes(Nc), theta[sel], derivative=True) / self.grid.h
            out[sel] = dL @ self.diff_values[:, jj].T
        return out

    def __call__(self, t):
        return eval(self, t)


def eval(sol: PiecewisePolySolution, t) -> np.ndarray:  # noqa: A001
    """Solution value at a scalar ``t`` (right limit for algebraic parts)."""
    return sol.values(t)[0] if np.ndim(t) == 0 else sol.values(t)


def eval_Dx_prime(sol: PiecewisePolySolution, t) -> np.ndarray:
    return sol.dx_prime(t)[0] if np.ndim(t) == 0 else sol.dx_prime(t)


def solve_assembled(lsq: AssembledLsq, rank_rtol: Optional[float] = None):
    """Least-squares solution with a column-pivoted QR and a rank check."""
    A, b = lsq.matrix, lsq.rhs
    cond = rank_rtol if rank_rtol is not None else 1e3 * np.finfo(float).eps * max(A.shape)
    c, _, rank, _ = scipy.linalg.lstsq(A, b, cond=cond, lapack_driver="gelsy")
    if rank < A.shape[1]:
        s = np.linalg.svd(A, compute_uv=False)
        raise SingularWindowError(
            f"design matrix has numerical rank {rank} < {A.shape[1]}",
            sigma_min=float(s[-1]),
        )
    return c


def solve_window(grid: WindowGrid, pair: DaePair, q, G, g) -> PiecewisePolySolution:
    """Minimize the discrete functional over the ansatz space."""
    lsq = assemble(grid, pair, q, G, g)
    c = solve_assembled(lsq)
    r = lsq.matrix @ c - lsq.rhs
    ic = r[lsq.n_residual_rows:]
    return PiecewisePolySolution.from_vector(
        grid, pair.m, pair.k, c, residual_norm=float(np.linalg.norm(r)), ic_residual=ic
    )


def hd1_error(
    sol: PiecewisePolySolution,
    exact: Callable[[float], np.ndarray],
    dexact: Optional[Callable[[float], np.ndarray]] = None,
    variant: str = "derivative",
) -> float:
    """``H^1_D`` distance between ``sol`` and ``exact`` on the window.

    ``variant="derivative"`` uses ``|x|^2 + |(Dx)'|^2`` (needs ``dexact``);
    ``variant="value"`` uses ``|x|^2 + |Dx|^2``.  Integrals use Gauss
    quadrature with ``Nc + 3`` points per subinterval.
    """
    if variant not in ("derivative", "value"):
        raise ConfigurationError(f"unknown norm variant {variant!r}")
    if variant == "derivative" and dexact is None:
        raise ConfigurationError("the derivative variant needs dexact")
    grid = sol.grid
    xq, wq = leg.leggauss(grid.Nc + 3)
    xq = 0.5 * (xq + 1.0)
    wq = 0.5 * wq * grid.h
    ts = (grid.breakpoints[:-1, None] + grid.h * xq[None, :]).ravel()
    ws = np.tile(wq, grid.n)
    ex = np.array([np.asarray(exact(t), dtype=float).ravel() for t in ts])
    err = sol.values(ts) - ex
    total = np.sum(ws[:, None] * err**2)
    if variant == "derivative":
        dex = np.array([np.asarray(dexact(t), dtype=float).ravel()[: sol.k] for t in ts])
        derr = sol.dx_prime(ts) - dex
    else:
        derr = err[:, : sol.k]
    total += np.sum(ws[:, None] * derr**2)
    return float(math.sqrt(total))
