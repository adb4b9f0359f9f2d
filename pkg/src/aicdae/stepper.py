"""Windowed initial value solver with accurate transfer conditions.

``[a, b]`` is split into ``L`` equal windows.  The first window is solved
with the user's accurate initial condition ``G_a x(a) = g_a``.  At every
later window start ``w`` an accurate-IC matrix ``G_tau(w)`` is computed by
the discrete reduction and ``g = G_tau(w) x_prev(w)`` transfers the previous
window's endpoint value.
"""

from __future__ import annotations

import dataclasses
import math
import re
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional

import numpy as np

from .collocation import PiecewisePolySolution, build_grid, hd1_error, solve_window
from .errors import ConfigurationError, InconsistencyError, SingularWindowError
from .matfun import DaePair
from .reduction import (
    ReductionConfig,
    accurate_ic_matrix,
    flow_subspace,
    gap_to_reference,
    transfer_compat,
)
from .specdiff import NodeFamily

_POWER = re.compile(r"^power\(\s*mu\s*/\s*([0-9.]+)\s*\)$")


@dataclasses.dataclass(frozen=True)
class IvpConfig:
    """Parameters of the windowed solver.

    ``tau_rule`` is ``"fixed"`` (use ``tau``), ``"power(mu/2)"`` or
    ``"power(mu/3)"`` (``tau = h**(mu/2)`` or ``h**(mu/3)``).  The
    reduction parameters other than ``tau`` and ``window_mode`` come from
    ``reduction``.
    """

    L: int = 1
    n: int = 10
    Nc: int = 4
    Mc: int = 5
    family: NodeFamily = NodeFamily.GAUSS_LEGENDRE
    reduction: ReductionConfig = ReductionConfig()
    tau_rule: str = "power(mu/2)"
    tau: Optional[float] = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "family", NodeFamily(self.family))
        if self.L < 1 or self.n < 1:
            raise ConfigurationError(f"need L >= 1 and n >= 1 (L={self.L}, n={self.n})")
        if self.tau_rule == "fixed":
            if self.tau is None or not self.tau > 0:
                raise ConfigurationError("tau_rule 'fixed' needs a positive tau")
        elif not _POWER.match(self.tau_rule):
            raise ConfigurationError(f"unknown tau rule {self.tau_rule!r}")

    def tau_for(self, h: float, mu: int) -> float:
        if self.tau_rule == "fixed":
            return float(self.tau)
        denom = float(_POWER.match(self.tau_rule).group(1))
        return float(h ** (mu / denom)) if mu > 0 else float(h)


@dataclasses.dataclass(frozen=True)
class TransferRecord:
    t: float
    G: np.ndarray
    g: np.ndarray
    mu: int
    l: int
    tau: float
    mode: str
    gap: Optional[float] = None


@dataclasses.dataclass(frozen=True)
class IvpSolution:
    windows: List[PiecewisePolySolution]
    transfer_log: List[TransferRecord]
    interval: tuple
    compat: Optional[dict] = None

    def values(self, t) -> np.ndarray:
        """Concatenated solution; at window boundaries the later window wins."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        a, b = self.interval
        H = (b - a) / len(self.windows)
        idx = np.clip(np.floor((t - a) / H).astype(int), 0, len(self.windows) - 1)
        out = np.zeros((t.size, self.windows[0].m))
        for w in np.unique(idx):
            sel = idx == w
            out[sel] = self.windows[w].values(t[sel])
        return out


def _mode_for(w, tau, interval, Md):
    a, b = interval
    if Md % 2 == 1 and w - 0.5 * tau >= a and w + 0.5 * tau <= b:
        return "central"
    if w - tau >= a:
        return "right"
    if w + tau <= b:
        return "left"
    raise ConfigurationError(f"differentiation window of width {tau} does not fit at t={w}")


def solve_ivp(
    pair: DaePair,
    q,
    G_a,
    g_a,
    interval,
    cfg: IvpConfig = IvpConfig(),
    G_reference: Optional[Callable[[float], np.ndarray]] = None,
) -> IvpSolution:
    """Solve the IVP on ``interval`` window by window.

    Parameters
    ----------
    G_reference : callable, optional
        Exact accurate-IC matrix; when given, every transfer records the
        opening between ``ker G_tau`` and ``ker G_reference``.
    """
    a, b = map(float, interval)
    if not a < b:
        raise ConfigurationError(f"empty interval {interval}")
    G_a = np.asarray(G_a, dtype=float).reshape(-1, pair.m)
    g_a = np.asarray(g_a, dtype=float).reshape(-1)
    L = cfg.L
    H = (b - a) / L
    h = H / cfg.n
    starts = [a + lam * H for lam in range(L)]

    compat = None
    mu0 = l0 = None
    pre_cfg = cfg.reduction.replace(tau=min(h, b - a), window_mode="left")
    try:
        pre = accurate_ic_matrix(pair, a, pre_cfg, interval=(a, b))
        mu0, l0 = pre.mu, pre.dof
        S = flow_subspace(pair, a, pre_cfg, interval=(a, b))
        if S.dim == G_a.shape[0]:
            compat = transfer_compat(G_a, S)
        else:
            compat = {"compatible": False, "sigma_min": 0.0}
    except Exception as exc:  # diagnostic only for L = 1
        if L > 1:
            raise
        compat = {"compatible": None, "error": str(exc)}


    def boundary(w):
        tau = cfg.tau_for(h, mu0)
        mode = _mode_for(w, tau, (a, b), cfg.reduction.Md)
        out = accurate_ic_matrix(pair, w, cfg.reduction.replace(tau=tau, window_mode=mode), interval=(a, b))
        return out, tau, mode

    outcomes = []
    if L > 1:
        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                outcomes = list(pool.map(boundary, starts[1:]))
        else:
            outcomes = [boundary(w) for w in starts[1:]]

    windows = []
    log = []
    G, g = G_a, g_a
    for lam, t0 in enumerate(starts):
        if lam > 0:
            out, tau, mode = outcomes[lam - 1]
            if (out.mu, out.dof) != (mu0, l0):
                raise InconsistencyError(
                    f"index/dof changed at t={t0}: ({out.mu}, {out.dof}) vs ({mu0}, {l0})"
                )
            G = out.G
            g = G @ windows[-1].values(t0)[0]
            gap = gap_to_reference(out, G_reference(t0)) if G_reference is not None else None
            log.append(TransferRecord(t0, G, g, out.mu, out.dof, tau, mode, gap))
        grid = build_grid(t0, H, cfg.n, cfg.Nc, cfg.Mc, cfg.family)
        try:
            windows.append(solve_window(grid, pair, q, G, g))
        except SingularWindowError as exc:
            raise SingularWindowError(
                f"window {lam + 1} of {L}: {exc}", sigma_min=exc.sigma_min, window=lam
            ) from exc
    return IvpSolution(windows, log, (a, b), compat)


def global_error(
    sol: IvpSolution,
    exact: Callable[[float], np.ndarray],
    dexact: Optional[Callable[[float], np.ndarray]] = None,
    variant: str = "derivative",
) -> float:
    """Root of the summed squared window ``H^1_D`` errors."""
    return float(math.sqrt(sum(hd1_error(w, exact, dexact, variant) ** 2 for w in sol.windows)))
