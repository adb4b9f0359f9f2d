"""Rank decisions, orthonormal bases, subspace openings and smooth bases.

Two strategies continue a basis differentiably across the nodes of a
differentiation window:

``svd_ode``
    Pick an orthonormal basis of ``im P`` at an anchor node and integrate
    ``C' = P' C`` by polynomial collocation on the window.
``qr_fixed_pivot``
    Householder QR with column pivoting at the anchor; at every other node the
    same pivot order and reflection signs are reused for exactly ``r`` steps.
"""

from __future__ import annotations

import dataclasses
import enum
from typing import Optional

import numpy as np

from .errors import ContractViolation, RankDropError
from .matfun import SampledMatrixStack
from .specdiff import DiffKind, DiffOperator, apply_array, diff_matrix_interp

EPS = np.finfo(float).eps
# orthonormality defect above which a node basis is replaced by its polar factor
_ORTHO_TOL = 1e-10


class BasisStrategy(str, enum.Enum):
    SVD_ODE = "svd_ode"
    QR_FIXED_PIVOT = "qr_fixed_pivot"


@dataclasses.dataclass(frozen=True)
class RankPolicy:
    """Thresholds for numerical rank decisions.

    Parameters
    ----------
    rel_tol : float, optional
        Singular values ``s_i <= rel_tol * s_1`` count as zero.  Defaults to
        ``64 * eps * max(rows, cols)`` of the matrix at hand.
    abs_zero_tol : float, optional
        A matrix with ``s_1 < abs_zero_tol`` is numerically zero.  Defaults
        to ``1e-12 * scale`` where ``scale`` is set by :meth:`with_scale`.
    amplification : float
        Factor applied to the relative threshold; the reduction raises it on
        levels whose data went through discrete differentiation.
    """

    rel_tol: Optional[float] = None
    abs_zero_tol: Optional[float] = None
    scale: float = 1.0
    amplification: float = 1.0

    def __post_init__(self):
        for name in ("rel_tol", "abs_zero_tol"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")

    def relative(self, shape) -> float:
        base = self.rel_tol if self.rel_tol is not None else 64.0 * EPS * max(max(shape), 1)
        return base * self.amplification

    def absolute(self) -> float:
        if self.abs_zero_tol is not None:
            return self.abs_zero_tol
        return 1e-12 * self.scale

    def with_scale(self, scale: float) -> "RankPolicy":
        """Copy with the reference magnitude for ``abs_zero_tol``."""
        return dataclasses.replace(self, scale=float(scale) if scale > 0 else 1.0)


DEFAULT_POLICY = RankPolicy()


@dataclasses.dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal columns spanning a subspace of ``R^ambient_dim``."""

    columns: np.ndarray

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=float)
        if cols.ndim != 2:
            raise ContractViolation("basis columns must form a matrix")
        object.__setattr__(self, "columns", cols)

    @property
    def ambient_dim(self) -> int:
        return self.columns.shape[0]

    @property
    def dim(self) -> int:
        return self.columns.shape[1]

    def orthonormality_defect(self) -> float:
        if self.dim == 0:
            return 0.0
        return float(np.linalg.norm(self.columns.T @ self.columns - np.eye(self.dim), 2))

    def projector(self) -> np.ndarray:
        return self.columns @ self.columns.T


def _svd(A):
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return (np.eye(A.shape[0]), np.zeros(0), np.eye(A.shape[1]))
    return np.linalg.svd(A, full_matrices=True)


def _rank_from_sv(s, shape, policy):
    if s.size == 0 or s[0] < policy.absolute():
        return 0
    return int(np.sum(s > policy.relative(shape) * s[0]))


def rank_of(A, policy: RankPolicy = DEFAULT_POLICY) -> int:
    """Numerical rank from the singular values."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    return _rank_from_sv(s, A.shape, policy)


def range_basis(A, policy: RankPolicy = DEFAULT_POLICY) -> SubspaceBasis:
    A = np.asarray(A, dtype=float)
    U, s, _ = _svd(A)
    r = _rank_from_sv(s, A.shape, policy)
    return SubspaceBasis(U[:, :r])


def corange_basis(A, policy: RankPolicy = DEFAULT_POLICY) -> SubspaceBasis:
    """Orthonormal basis of ``(im A)^perp``."""
    A = np.asarray(A, dtype=float)
    U, s, _ = _svd(A)
    r = _rank_from_sv(s, A.shape, policy)
    return SubspaceBasis(U[:, r:])


def nullspace_basis(A, policy: RankPolicy = DEFAULT_POLICY) -> SubspaceBasis:
    A = np.asarray(A, dtype=float)
    _, s, Vt = _svd(A)
    r = _rank_from_sv(s, A.shape, policy)
    return SubspaceBasis(Vt[r:].T)


def orthogonal_complement(B: SubspaceBasis) -> SubspaceBasis:
    m, r = B.columns.shape
    if r == 0:
        return SubspaceBasis(np.eye(m))
    Q, _ = np.linalg.qr(B.columns, mode="complete")
    return SubspaceBasis(Q[:, r:])


def opening(U: SubspaceBasis, V: SubspaceBasis) -> float:
    """Opening (gap) between two subspaces.

    Equals the largest singular value of ``V_perp^T U`` for subspaces of equal
    dimension and 1 otherwise.
    """
    if U.ambient_dim != V.ambient_dim:
        raise ContractViolation(
            f"ambient dimensions differ: {U.ambient_dim} vs {V.ambient_dim}"
        )
    if U.dim != V.dim:
        return 1.0
    if U.dim == 0 or U.dim == U.ambient_dim:
        return 0.0
    Vp = orthogonal_complement(V).columns
    s = np.linalg.svd(Vp.T @ U.columns, compute_uv=False)
    return float(min(s[0], 1.0))


# ---------------------------------------------------------------------------
# smooth tracks


@dataclasses.dataclass(frozen=True)
class SmoothBasisTrack:
    """Node-wise orthonormal bases that vary smoothly across a window.

    ``columns`` has shape ``(M, m, r)``.  ``derivative`` holds ``C'`` at the
    nodes when the strategy provides it.  ``lipschitz`` is the largest
    difference quotient ``|C_{i+1} - C_i| / (t_{i+1} - t_i)``.
    """

    nodes: np.ndarray
    columns: np.ndarray
    strategy: BasisStrategy
    derivative: Optional[SampledMatrixStack] = None
    reorthonormalized: int = 0
    lipschitz: float = dataclasses.field(init=False, default=0.0)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        cols = np.asarray(self.columns, dtype=float)
        if cols.ndim != 3 or cols.shape[0] != nodes.size:
            raise ContractViolation(f"columns shape {cols.shape} does not match nodes")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "columns", cols)
        lip = 0.0
        if nodes.size > 1 and cols.shape[2] > 0:
            jumps = np.linalg.norm(np.diff(cols, axis=0), ord=2, axis=(1, 2))
            lip = float(np.max(jumps / np.diff(nodes)))
        object.__setattr__(self, "lipschitz", lip)

    @property
    def ambient_dim(self) -> int:
        return self.columns.shape[1]

    @property
    def dim(self) -> int:
        return self.columns.shape[2]

    @property
    def bases(self):
        return [SubspaceBasis(c) for c in self.columns]

    def stack(self) -> SampledMatrixStack:
        return SampledMatrixStack(self.nodes, self.columns)

    @classmethod
    def constant(cls, nodes, matrix, strategy=BasisStrategy.SVD_ODE):
        nodes = np.asarray(nodes, dtype=float)
        matrix = np.asarray(matrix, dtype=float)
        cols = np.broadcast_to(matrix, (nodes.size,) + matrix.shape).copy()
        deriv = SampledMatrixStack(nodes, np.zeros_like(cols))
        return cls(nodes, cols, BasisStrategy(strategy), deriv)

    def compose(self, other: "SmoothBasisTrack") -> "SmoothBasisTrack":
        """Node-wise product ``C_self(t) C_other(t)``."""
        if not np.array_equal(self.nodes, other.nodes):
            raise ContractViolation("tracks live on different nodes")
        cols = np.matmul(self.columns, other.columns)
        return SmoothBasisTrack(
            self.nodes,
            cols,
            self.strategy,
            None,
            self.reorthonormalized + other.reorthonormalized,
        )


def _check_projectors(P, tol=1e-10):
    for i, Pi in enumerate(P):
        scale = max(1.0, np.linalg.norm(Pi, 2))
        if np.linalg.norm(Pi - Pi.T, 2) > tol * scale or np.linalg.norm(Pi @ Pi - Pi, 2) > tol * scale:
            raise ContractViolation(f"sample {i} is not an orthoprojector")


def smooth_basis_svd_ode(
    proj_samples: SampledMatrixStack,
    d: DiffOperator,
    anchor_index: int,
    policy: RankPolicy = DEFAULT_POLICY,
    check: bool = True,
) -> SmoothBasisTrack:
    """Basis of ``im P(t)`` by collocation of ``C' = P' C`` on the window.

    The anchor value is the leading left singular vectors of ``P(t_hat)``;
    the polynomial of degree ``M - 1`` satisfying the ODE at all other nodes
    is computed with a dense solve.  Each node value is then multiplied by
    ``P(sigma_i)`` and replaced by its polar factor when its orthonormality
    defect exceeds ``1e-10``; the count of replacements is reported in
    ``reorthonormalized``.
    """
    P = np.asarray(proj_samples.values, dtype=float)
    if not np.array_equal(np.asarray(proj_samples.nodes), d.nodes):
        raise ContractViolation("projector stack is not sampled at the operator nodes")
    M, m, _ = P.shape
    if check:
        _check_projectors(P)
    ranks = [int(round(np.trace(Pi))) for Pi in P]
    if len(set(ranks)) != 1:
        raise RankDropError(f"projector rank varies across the window: {ranks}")
    r = ranks[0]
    nodes = d.nodes
    if r == 0:
        empty = np.zeros((M, m, 0))
        return SmoothBasisTrack(nodes, empty, BasisStrategy.SVD_ODE, SampledMatrixStack(nodes, empty))
    U, _, _ = np.linalg.svd(P[anchor_index])
    C_hat = U[:, :r]
    dP = apply_array(d, P)
    if np.max(np.abs(dP)) == 0.0:
        return SmoothBasisTrack.constant(nodes, C_hat, BasisStrategy.SVD_ODE)

    # block system: (Dmat kron I - blockdiag(P'_i)) C = 0, anchor rows replaced;
    # collocation lives in degree M - 1 even when P' came from a fit
    d_ode = d
    if d.kind is not DiffKind.INTERPOLATORY:
        d_ode = dataclasses.replace(diff_matrix_interp(d.ref_nodes, d.window, d.family), nodes=d.nodes)
    K = np.kron(d_ode.Dmat, np.eye(m))
    for i in range(M):
        K[i * m:(i + 1) * m, i * m:(i + 1) * m] -= dP[i]
    rhs = np.zeros((M * m, r))
    a = anchor_index
    K[a * m:(a + 1) * m, :] = 0.0
    K[a * m:(a + 1) * m, a * m:(a + 1) * m] = np.eye(m)
    rhs[a * m:(a + 1) * m] = C_hat
    C = np.linalg.solve(K, rhs).reshape(M, m, r)
    C[a] = C_hat
    # the collocated C carries the error of P'; projecting keeps its
    # orientation and puts the span exactly on im P at every node
    C = np.matmul(P, C)

    fixed = 0
    for i in range(M):
        defect = np.linalg.norm(C[i].T @ C[i] - np.eye(r), 2)
        if defect > _ORTHO_TOL:
            u, _, vt = np.linalg.svd(C[i], full_matrices=False)
            C[i] = u @ vt
            fixed += 1
    deriv = SampledMatrixStack(nodes, np.matmul(dP, C))
    return SmoothBasisTrack(nodes, C, BasisStrategy.SVD_ODE, deriv, fixed)


def projector_stack(basis_fn, stack: SampledMatrixStack, policy: RankPolicy = DEFAULT_POLICY):
    """Stack of orthoprojectors onto ``basis_fn(A_i)`` for every node."""
    vals = []
    for A in stack.values:
        B = basis_fn(A, policy).columns
        vals.append(B @ B.T)
    return SampledMatrixStack(stack.nodes, np.stack(vals))


# ---------------------------------------------------------------------------
# Householder QR with a frozen pivot order


@dataclasses.dataclass(frozen=True)
class _PivotRecord:
    perm: np.ndarray
    signs: np.ndarray
    rank: int


def _householder(x, sign):
    """Reflector ``v`` with ``(I - 2 v v^T) x = -sign |x| e_1``."""
    v = x.copy()
    alpha = np.linalg.norm(x)
    v[0] += sign * alpha
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return np.zeros_like(v)
    return v / nv


def _qr_steps(A, perm, signs, steps):
    """Apply ``steps`` Householder reflections to ``A[:, perm]``; return ``Q``."""
    R = A[:, perm].copy()
    rows = R.shape[0]
    Q = np.eye(rows)
    for j in range(steps):
        v = _householder(R[j:, j], signs[j])
        R[j:, j:] -= 2.0 * np.outer(v, v @ R[j:, j:])
        Q[:, j:] -= 2.0 * np.outer(Q[:, j:] @ v, v)
    return Q, R


def _pivoted_qr(A, policy):
    """Householder QR with column pivoting, recording pivots and signs."""
    R = np.array(A, dtype=float)
    rows, cols = R.shape
    perm = np.arange(cols)
    signs = []
    s = np.linalg.svd(A, compute_uv=False) if A.size else np.zeros(0)
    r = _rank_from_sv(s, A.shape, policy)
    for j in range(r):
        norms = np.linalg.norm(R[j:, j:], axis=0)
        p = j + int(np.argmax(norms))
        if p != j:
            R[:, [j, p]] = R[:, [p, j]]
            perm[[j, p]] = perm[[p, j]]
        x = R[j:, j]
        sign = 1.0 if x[0] >= 0 else -1.0
        signs.append(sign)
        v = _householder(x, sign)
        R[j:, j:] -= 2.0 * np.outer(v, v @ R[j:, j:])
    return _PivotRecord(perm, np.array(signs), r)


def qr_fixed_pivot(
    mat_samples: SampledMatrixStack,
    anchor_index: int,
    policy: RankPolicy = DEFAULT_POLICY,
    target: str = "nullspace",
) -> SmoothBasisTrack:
    """Smooth bases from QR with the pivoting frozen at the anchor node.

    Parameters
    ----------
    target : {"nullspace", "range", "corange"}
        ``nullspace`` factors ``A^T`` and returns the trailing columns of
        ``Q``; ``range``/``corange`` factor ``A`` and return the leading or
        trailing columns.
    """
    A = np.asarray(mat_samples.values, dtype=float)
    if target == "nullspace":
        A = np.transpose(A, (0, 2, 1))
    elif target not in ("range", "corange"):
        raise ValueError(f"unknown target {target!r}")
    rec = _pivoted_qr(A[anchor_index], policy)
    r = rec.rank
    out = []
    for i, Ai in enumerate(A):
        ri = rank_of(Ai, policy)
        if ri != r:
            raise RankDropError(
                f"rank {ri} at node {i} differs from anchor rank {r}; "
                "fixed-pivot continuation is not applicable"
            )
        Q, R = _qr_steps(Ai, rec.perm, rec.signs, r)
        if r and abs(R[r - 1, r - 1]) <= policy.relative(Ai.shape) * abs(R[0, 0]):
            raise RankDropError(f"retained pivot collapses at node {i}")
        out.append(Q[:, :r] if target == "range" else Q[:, r:])
    return SmoothBasisTrack(mat_samples.nodes, np.stack(out), BasisStrategy.QR_FIXED_PIVOT)
