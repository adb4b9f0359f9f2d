"""Discrete reduction procedure and accurate initial-condition matrices.

The canonical subspace ``N_can(t_bar)`` of a regular linear DAE equals
``ker C(t_bar)^T E(t_bar)`` where ``C`` is a basis of the flow subspace of the
adjoint DAE.  The flow subspace basis is computed by recursively restricting
the adjoint pair to its constraint manifold; coefficient derivatives are
replaced by a discrete differentiation operator on a short window.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigurationError, ContractViolation, NonRegularError, RankDropError
from .matfun import DaePair, SampledMatrixStack, adjoint_pair
from .specdiff import DiffKind, DiffOperator, NodeFamily, apply_array, build_operator, place_window
from .subspace import (
    BasisStrategy,
    RankPolicy,
    SmoothBasisTrack,
    SubspaceBasis,
    corange_basis,
    nullspace_basis,
    opening,
    qr_fixed_pivot,
    range_basis,
    rank_of,
    smooth_basis_svd_ode,
)


@dataclasses.dataclass(frozen=True)
class ReductionConfig:
    """Parameters of the discrete reduction.

    ``derivative`` selects how ``C'`` enters ``F_new``: ``"operator"`` applies
    the differentiation matrix to the basis samples, ``"track"`` uses the
    derivative delivered by the basis strategy (``P' C`` for ``svd_ode``) and
    falls back to the operator when none is available.
    """

    Nd: int = 4
    Md: int = 5
    diff_kind: DiffKind = DiffKind.INTERPOLATORY
    node_family: NodeFamily = NodeFamily.CHEBYSHEV2
    window_mode: str = "central"
    tau: float = 0.1
    basis_strategy: BasisStrategy = BasisStrategy.SVD_ODE
    rank_policy: RankPolicy = RankPolicy()
    max_levels: Optional[int] = None
    derivative: str = "track"

    def __post_init__(self):
        object.__setattr__(self, "diff_kind", DiffKind(self.diff_kind))
        object.__setattr__(self, "node_family", NodeFamily(self.node_family))
        object.__setattr__(self, "basis_strategy", BasisStrategy(self.basis_strategy))
        if self.Nd < 1:
            raise ConfigurationError(f"Nd must be >= 1, got {self.Nd}")
        if self.Md < self.Nd + 1:
            raise ConfigurationError(f"Md={self.Md} must be >= Nd+1={self.Nd + 1}")
        if self.diff_kind is DiffKind.INTERPOLATORY and self.Md != self.Nd + 1:
            raise ConfigurationError("interpolatory differentiation needs Md = Nd + 1")
        if self.diff_kind is DiffKind.LEAST_SQUARES and self.Md <= self.Nd + 1:
            raise ConfigurationError("least-squares differentiation needs Md > Nd + 1")
        if not self.tau > 0:
            raise ConfigurationError(f"tau must be positive, got {self.tau}")
        if self.window_mode not in ("central", "left", "right"):
            raise ConfigurationError(f"unknown window mode {self.window_mode!r}")
        if self.derivative not in ("operator", "track"):
            raise ConfigurationError(f"unknown derivative source {self.derivative!r}")

    def replace(self, **changes) -> "ReductionConfig":
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass(frozen=True)
class ReductionOutcome:
    mu: int
    ranks: Tuple[int, ...]
    dof: int
    G: np.ndarray
    t_bar: float
    tau: float
    Nd: int
    C_track: SmoothBasisTrack
    window: Tuple[float, float] = (math.nan, math.nan)


def _stack_ranks(values, policy):
    return [rank_of(v, policy) for v in values]


def _smooth(values, nodes, d, anchor, cfg, policy, kind):
    """Smooth basis of ``im A`` (``kind="range"``) or ``ker A`` across nodes."""
    if cfg.basis_strategy is BasisStrategy.QR_FIXED_PIVOT:
        return qr_fixed_pivot(SampledMatrixStack(nodes, values), anchor, policy, target=kind)
    fn = range_basis if kind == "range" else nullspace_basis
    dim = None
    P = []
    for A in values:
        B = fn(A, policy).columns
        if dim is not None and B.shape[1] != dim:
            raise RankDropError(f"{kind} dimension varies across the window")
        dim = B.shape[1]
        P.append(B @ B.T)
    return smooth_basis_svd_ode(SampledMatrixStack(nodes, np.stack(P)), d, anchor, policy, check=False)


def cbasis(
    E_stack: SampledMatrixStack,
    F_stack: SampledMatrixStack,
    d: DiffOperator,
    cfg: ReductionConfig = ReductionConfig(),
    anchor_index: Optional[int] = None,
    policy: Optional[RankPolicy] = None,
):
    """Flow-subspace basis of the sampled pair ``{E, F}``.

    Returns
    -------
    track : SmoothBasisTrack
        Accumulated product basis ``C_0 C_1 ... C_{mu-1}`` at the nodes.
    ranks : tuple of int
        Rank of ``E_i`` at every counted level.
    mu : int
        Number of counted levels.
    """
    E = np.asarray(E_stack.values, dtype=float)
    F = np.asarray(F_stack.values, dtype=float)
    nodes = d.nodes
    if not (np.array_equal(E_stack.nodes, nodes) and np.array_equal(F_stack.nodes, nodes)):
        raise ContractViolation("stacks are not sampled at the operator nodes")
    if E.shape != F.shape or E.shape[1] != E.shape[2]:
        raise ContractViolation(f"E {E.shape[1:]} and F {F.shape[1:]} must be equal and square")
    if anchor_index is None:
        anchor_index = d.M // 2
    if policy is None:
        scale = max(np.max(np.linalg.norm(E, 2, axis=(1, 2))), np.max(np.linalg.norm(F, 2, axis=(1, 2))))
        policy = cfg.rank_policy.with_scale(scale)
    amp = max(1.0, float(np.max(np.sum(np.abs(d.unscaled), axis=1))))
    m0 = E.shape[1]
    max_levels = cfg.max_levels if cfg.max_levels is not None else m0 + 1

    factors = []
    ranks = []
    while True:
        m = E.shape[1]
        rk = _stack_ranks(E, policy)
        if len(set(rk)) != 1:
            raise RankDropError(f"rank of E varies across the window at level {len(ranks)}: {rk}")
        r = rk[0]
        if np.mean(np.linalg.norm(E, "fro", axis=(1, 2))) < policy.absolute():
            r = 0
        if r == m:
            break
        if len(ranks) >= max_levels:
            raise NonRegularError(f"reduction did not stop after {max_levels} levels")
        ranks.append(r)
        if r == 0:
            factors.append(np.zeros((len(nodes), m, 0)))
            break
        Y = _smooth(E, nodes, d, anchor_index, cfg, policy, "range").columns
        ZF = []
        for Ei, Fi in zip(E, F):
            Z = corange_basis(Ei, policy).columns
            if Z.shape[1] != m - r:
                raise RankDropError("corange dimension varies across the window")
            ZF.append(Z.T @ Fi)
        ZF = np.stack(ZF)
        for i, A in enumerate(ZF):
            nullity = nullspace_basis(A, policy).dim
            if nullity != r:
                raise NonRegularError(
                    f"ker Z^T F has dimension {nullity}, expected {r} (level {len(ranks)}, node {i})"
                )
        track = _smooth(ZF, nodes, d, anchor_index, cfg, policy, "nullspace")
        C = track.columns
        if cfg.derivative == "track" and track.derivative is not None:
            dC = track.derivative.values
        else:
            dC = apply_array(d, C)
        Yt = np.transpose(Y, (0, 2, 1))
        E_new = Yt @ E @ C
        F_new = Yt @ (F @ C + E @ dC)
        factors.append(C)
        E, F = E_new, F_new
        # rounding in F_new is amplified by the differentiation matrix
        policy = dataclasses.replace(policy, amplification=amp)

    M = len(nodes)
    acc = np.broadcast_to(np.eye(m0), (M, m0, m0)).copy()
    for C in factors:
        acc = acc @ C
    strategy = cfg.basis_strategy
    return SmoothBasisTrack(nodes, acc, strategy), tuple(ranks), len(ranks)


def make_operator(cfg: ReductionConfig, t_bar: float, interval=(-math.inf, math.inf)) -> DiffOperator:
    """Differentiation operator on the configured window around ``t_bar``."""
    window = place_window(t_bar, cfg.tau, cfg.window_mode, interval)
    d = build_operator(cfg.node_family, cfg.Md, cfg.Nd, window, cfg.diff_kind, anchor_time=t_bar)
    ref = np.sort(np.abs(0.5 * cfg.tau * (d.ref_nodes + 1.0) + window[0] - t_bar))[0]
    if ref > 1e-12 * max(cfg.tau, abs(t_bar)):
        raise ConfigurationError(
            f"t_bar={t_bar} is not a node of the {cfg.node_family.value} window; "
            "use an odd Md for central windows"
        )
    return d


def accurate_ic_matrix(
    pair: DaePair, t_bar: float, cfg: ReductionConfig = ReductionConfig(), interval=None
) -> ReductionOutcome:
    """Matrix ``G`` with ``ker G = N_can(t_bar)`` from the adjoint pair.

    ``interval`` restricts the differentiation window; it defaults to the
    interval of ``pair``.
    """
    t_bar = float(t_bar)
    a, b = pair.interval if interval is None else interval
    if not a <= t_bar <= b:
        raise ConfigurationError(f"t_bar={t_bar} outside [{a}, {b}]")
    d = make_operator(cfg, t_bar, (a, b))
    anchor = int(np.argmin(np.abs(d.nodes - t_bar)))
    adj = adjoint_pair(pair, d)
    track, ranks, mu = cbasis(adj.E, adj.F, d, cfg, anchor_index=anchor)
    C = track.columns[anchor]
    G = C.T @ pair.E(t_bar)
    return ReductionOutcome(mu, ranks, C.shape[1], G, t_bar, cfg.tau, cfg.Nd, track, d.window)


def flow_subspace(pair: DaePair, t_bar: float, cfg: ReductionConfig = ReductionConfig(), interval=None) -> SubspaceBasis:
    """Basis of the flow subspace ``S_can(t_bar)`` from the pair itself."""
    t_bar = float(t_bar)
    d = make_operator(cfg, t_bar, pair.interval if interval is None else interval)
    anchor = int(np.argmin(np.abs(d.nodes - t_bar)))
    sp = pair.sample(d.nodes)
    track, _, _ = cbasis(sp.E, sp.F, d, cfg, anchor_index=anchor)
    return SubspaceBasis(track.columns[anchor])


def _kernel(G, m):
    G = np.asarray(G, dtype=float).reshape(-1, m)
    l = G.shape[0]
    if l == 0:
        return SubspaceBasis(np.eye(m))
    _, _, Vt = np.linalg.svd(G)
    return SubspaceBasis(Vt[l:].T)


def gap_to_reference(outcome, G_ref) -> float:
    """Opening between ``ker G_tau`` and ``ker G_ref``."""
    G = outcome.G if isinstance(outcome, ReductionOutcome) else np.asarray(outcome, dtype=float)
    G_ref = np.atleast_2d(np.asarray(G_ref, dtype=float))
    m = G.shape[1]
    if G_ref.shape[1] != m:
        raise ContractViolation(f"ambient dimension {G_ref.shape[1]} differs from {m}")
    if G.shape[0] == 0 and G_ref.shape[0] == 0:
        return 0.0
    if G.shape == G_ref.shape and np.array_equal(G, G_ref):
        return 0.0
    return opening(_kernel(G, m), _kernel(G_ref, m))


def transfer_compat(G_tilde, S_basis: SubspaceBasis, policy: RankPolicy = RankPolicy()):
    """Check ``ker G_tilde`` against the flow subspace spanned by ``S_basis``.

    Returns a dict with ``sigma_min`` of ``G_tilde S`` and ``compatible``.
    """
    G = np.atleast_2d(np.asarray(G_tilde, dtype=float))
    S = S_basis.columns
    if G.shape[1] != S.shape[0]:
        raise ContractViolation(f"G has {G.shape[1]} columns, basis lives in R^{S.shape[0]}")
    if G.shape[0] != S.shape[1]:
        raise ContractViolation(f"G has {G.shape[0]} rows but the basis has dimension {S.shape[1]}")
    if G.shape[0] == 0:
        return {"compatible": True, "sigma_min": math.inf}
    s = np.linalg.svd(G @ S, compute_uv=False)
    tol = max(policy.relative(G.shape) * np.linalg.norm(G, 2), policy.absolute())
    return {"compatible": bool(s[-1] > tol), "sigma_min": float(s[-1])}
