"""Node families and discrete differentiation on a short window.

The differentiation operator maps samples ``f(sigma_1), ..., f(sigma_M)`` on
``[c, c + tau]`` to approximations of ``f'`` at the same nodes.  Two kinds are
provided:

* ``interpolatory`` -- derivative of the degree ``M - 1`` interpolant,
  built from barycentric weights;
* ``least_squares`` -- derivative of the degree ``N < M - 1`` least-squares
  polynomial fit, built from Chebyshev Vandermonde matrices.

Both are stored as a reference matrix on ``[-1, 1]`` with zero diagonal and
applied through differences ``f(sigma_j) - f(sigma_i)`` so that constants are
mapped to exactly zero.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from typing import Tuple

import numpy as np
from numpy.polynomial import chebyshev as cheb

from .errors import ConfigurationError, ContractViolation, DegenerateInputError


class NodeFamily(str, enum.Enum):
    CHEBYSHEV2 = "chebyshev2"
    RADAU = "radau"
    GAUSS_LEGENDRE = "gauss_legendre"
    EQUIDISTANT = "equidistant"


class DiffKind(str, enum.Enum):
    INTERPOLATORY = "interpolatory"
    LEAST_SQUARES = "least_squares"


# ---------------------------------------------------------------------------
# reference nodes on [-1, 1]


def _golub_welsch(diag, offdiag):
    """Eigenvalues/first eigenvector components of a symmetric Jacobi matrix."""
    J = np.diag(diag) + np.diag(offdiag, 1) + np.diag(offdiag, -1)
    evals, evecs = np.linalg.eigh(J)
    return evals, evecs[0, :] ** 2


def gauss_jacobi(n: int, alpha: float = 0.0, beta: float = 0.0):
    """Gauss-Jacobi nodes and weights for ``(1 - x)^alpha (1 + x)^beta``.

    Nodes are eigenvalues of the Jacobi matrix of the three-term recurrence
    and are polished by Newton steps on the Jacobi polynomial.
    """
    if n < 1:
        raise ConfigurationError("need at least one Gauss node")
    k = np.arange(n, dtype=float)
    ab = alpha + beta
    s = 2 * k + ab
    with np.errstate(divide="ignore", invalid="ignore"):
        diag = np.where(s * (s + 2) == 0, 0.0, (beta**2 - alpha**2) / (s * (s + 2)))
    if n == 1 or ab == 0:
        diag[0] = (beta - alpha) / (ab + 2)
    kk = np.arange(1, n, dtype=float)
    s = 2 * kk + ab
    offdiag = np.sqrt(
        4 * kk * (kk + alpha) * (kk + beta) * (kk + ab) / (s**2 * (s + 1) * (s - 1))
    )
    x, w = _golub_welsch(diag, offdiag)
    mu0 = 2 ** (ab + 1) * math.gamma(alpha + 1) * math.gamma(beta + 1) / math.gamma(ab + 2)
    for _ in range(2):
        p, dp = _jacobi_and_derivative(n, alpha, beta, x)
        x = x - p / dp
    return x, w * mu0


def _jacobi_and_derivative(n, alpha, beta, x):
    from scipy.special import eval_jacobi

    p = eval_jacobi(n, alpha, beta, x)
    dp = 0.5 * (n + alpha + beta + 1) * eval_jacobi(n - 1, alpha + 1, beta + 1, x)
    return p, dp


def reference_nodes(family: NodeFamily | str, M: int) -> np.ndarray:
    """``M`` increasing nodes of ``family`` on ``[-1, 1]``."""
    family = NodeFamily(family)
    if M < 2 and family in (NodeFamily.CHEBYSHEV2, NodeFamily.EQUIDISTANT):
        raise ConfigurationError(f"{family.value} needs M >= 2, got {M}")
    if M < 1:
        raise ConfigurationError(f"need M >= 1 nodes, got {M}")
    if family is NodeFamily.CHEBYSHEV2:
        # sin form is exactly antisymmetric and hits 0 for odd M
        j = np.arange(M)
        return np.sin(np.pi * (2 * j - (M - 1)) / (2 * (M - 1)))
    if family is NodeFamily.EQUIDISTANT:
        x = np.linspace(-1.0, 1.0, M)
        return 0.5 * (x - x[::-1])
    if family is NodeFamily.GAUSS_LEGENDRE:
        x, _ = gauss_jacobi(M)
        return 0.5 * (x - x[::-1])
    # Radau with the left endpoint: -1 plus Gauss-Jacobi(0, 1) nodes
    if M == 1:
        return np.array([-1.0])
    x, _ = gauss_jacobi(M - 1, 0.0, 1.0)
    return np.concatenate([[-1.0], x])


def make_nodes(family: NodeFamily | str, M: int, window: Tuple[float, float]) -> np.ndarray:
    """Nodes of ``family`` mapped affinely onto ``window = (c, c + tau)``."""
    if M < 2:
        raise ConfigurationError(f"need M >= 2 nodes, got {M}")
    c, end = map(float, window)
    tau = end - c
    if not tau > 0:
        raise ConfigurationError(f"window {window} has non-positive width")
    x = reference_nodes(family, M)
    return 0.5 * tau * (x + 1.0) + c


def barycentric_weights(ref_nodes, family: NodeFamily | str | None = None) -> np.ndarray:
    """Barycentric interpolation weights, normalized to max modulus 1.

    For Chebyshev points of the second kind the closed form
    ``(-1)^(M-i) delta_i`` is used; otherwise the product formula.
    """
    x = np.asarray(ref_nodes, dtype=float)
    M = x.size
    if M >= 2 and np.any(np.diff(np.sort(x)) == 0):
        raise DegenerateInputError("barycentric weights need distinct nodes")
    if family is not None and NodeFamily(family) is NodeFamily.CHEBYSHEV2:
        w = (-1.0) ** (M - 1 - np.arange(M))
        w[0] *= 0.5
        w[-1] *= 0.5
        return w
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    # scale by the capacity 4/(b-a) to keep the products in range
    scale = 4.0 / (x.max() - x.min()) if M > 1 else 1.0
    w = 1.0 / np.prod(diff * scale, axis=1)
    return w / np.max(np.abs(w))


# ---------------------------------------------------------------------------
# operators


@dataclasses.dataclass(frozen=True)
class DiffOperator:
    """Discrete differentiation on ``window`` at ``nodes``.

    ``coeffs`` is the reference (``[-1, 1]``) matrix with zero diagonal;
    ``Dmat`` is the scaled matrix including the nullsum diagonal.
    """

    kind: DiffKind
    N: int
    ref_nodes: np.ndarray
    window: Tuple[float, float]
    nodes: np.ndarray
    coeffs: np.ndarray
    family: NodeFamily | None = None

    @property
    def M(self) -> int:
        return self.ref_nodes.size

    @property
    def tau(self) -> float:
        return self.window[1] - self.window[0]

    @property
    def scale(self) -> float:
        return 2.0 / self.tau

    @property
    def unscaled(self) -> np.ndarray:
        """Reference matrix on ``[-1, 1]`` with the nullsum diagonal filled in."""
        D = self.coeffs.copy()
        np.fill_diagonal(D, -D.sum(axis=1))
        return D

    @property
    def Dmat(self) -> np.ndarray:
        return self.scale * self.unscaled

    def __call__(self, samples):
        return apply_array(self, samples)


def _check_window(window):
    c, end = map(float, window)
    if not end - c > 0:
        raise ConfigurationError(f"window {window} has non-positive width")
    return c, end


def _nodes_on_window(ref, window, anchor_time=None):
    c, end = window
    tau = end - c
    nodes = 0.5 * tau * (ref + 1.0) + c
    if anchor_time is not None:
        i = int(np.argmin(np.abs(nodes - anchor_time)))
        nodes[i] = anchor_time
    return nodes


def diff_matrix_interp(ref_nodes, window, family=None, anchor_time=None) -> DiffOperator:
    """Spectral differentiation through the interpolating polynomial.

    ``anchor_time`` (optional) is a time that must coincide exactly with one
    node; the nearest mapped node is snapped onto it.
    """
    x = np.asarray(ref_nodes, dtype=float)
    window = _check_window(window)
    if x.size < 2:
        raise ConfigurationError("need at least two nodes")
    if np.any(np.diff(np.sort(x)) == 0):
        raise DegenerateInputError("differentiation nodes must be distinct")
    if np.any(np.diff(x) <= 0):
        raise ConfigurationError("reference nodes must be increasing")
    w = barycentric_weights(x, family)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    coeffs = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(coeffs, 0.0)
    return DiffOperator(
        DiffKind.INTERPOLATORY,
        x.size - 1,
        x,
        window,
        _nodes_on_window(x, window, anchor_time),
        coeffs,
        NodeFamily(family) if family is not None else None,
    )


def diff_matrix_lsq(ref_nodes, N: int, window, family=None, anchor_time=None) -> DiffOperator:
    """Differentiation of the degree-``N`` least-squares Chebyshev fit."""
    x = np.asarray(ref_nodes, dtype=float)
    window = _check_window(window)
    if N < 1 or x.size <= N:
        raise ConfigurationError(f"least-squares differentiation needs M > N >= 1 (M={x.size}, N={N})")
    if np.any(np.diff(x) <= 0):
        raise DegenerateInputError("differentiation nodes must be distinct and increasing")
    V = cheb.chebvander(x, N)
    VD = np.zeros_like(V)
    for j in range(1, N + 1):
        e = np.zeros(j + 1)
        e[j] = 1.0
        VD[:, j] = cheb.chebval(x, cheb.chebder(e))
    coeffs = VD @ np.linalg.pinv(V)
    np.fill_diagonal(coeffs, 0.0)
    return DiffOperator(
        DiffKind.LEAST_SQUARES,
        N,
        x,
        window,
        _nodes_on_window(x, window, anchor_time),
        coeffs,
        NodeFamily(family) if family is not None else None,
    )


def build_operator(family, M: int, N: int, window, kind=DiffKind.INTERPOLATORY, anchor_time=None):
    """Convenience constructor from a node family."""
    kind = DiffKind(kind)
    ref = reference_nodes(family, M)
    if kind is DiffKind.INTERPOLATORY:
        if M != N + 1:
            raise ConfigurationError(f"interpolatory operator needs M = N + 1 (M={M}, N={N})")
        return diff_matrix_interp(ref, window, family, anchor_time)
    if M <= N + 1:
        raise ConfigurationError(f"least-squares operator needs M > N + 1 (M={M}, N={N})")
    return diff_matrix_lsq(ref, N, window, family, anchor_time)


def apply_array(d: DiffOperator, samples) -> np.ndarray:
    """Differentiate an array whose leading axis runs over the nodes."""
    f = np.asarray(samples, dtype=float)
    if f.shape[0] != d.M:
        raise ContractViolation(f"expected {d.M} samples, got {f.shape[0]}")
    diffs = f[None, :] - f[:, None]
    return d.scale * np.einsum("ij,ij...->i...", d.coeffs, diffs)


def apply(d: DiffOperator, stack):
    """Entrywise derivative of a sampled matrix stack at the operator nodes."""
    if not np.array_equal(np.asarray(stack.nodes), d.nodes):
        raise ContractViolation("stack is not sampled at the operator nodes")
    return dataclasses.replace(stack, values=apply_array(d, stack.values))


def place_window(t_bar: float, tau: float, mode: str, interval=(-math.inf, math.inf)):
    """Window ``(c, c + tau)`` containing ``t_bar`` for a placement mode.

    ``central`` puts ``t_bar`` at the midpoint, ``left`` starts the window at
    ``t_bar`` and ``right`` ends it there.  A window leaving ``interval``
    raises :class:`ConfigurationError`.
    """
    if not tau > 0:
        raise ConfigurationError(f"tau must be positive, got {tau}")
    if mode == "central":
        c = t_bar - 0.5 * tau
    elif mode == "left":
        c = t_bar
    elif mode == "right":
        c = t_bar - tau
    else:
        raise ConfigurationError(f"unknown window mode {mode!r}")
    a, b = interval
    tol = 1e-14 * max(1.0, abs(t_bar))
    if c < a - tol or c + tau > b + tol:
        raise ConfigurationError(
            f"{mode} window [{c}, {c + tau}] around t={t_bar} leaves [{a}, {b}]"
        )
    return (c, c + tau)


def norm_bound_report(d: DiffOperator) -> dict:
    """Row-sum norm of the reference matrix against the node-family bound.

    Chebyshev points of the second kind satisfy ``|D| <= 16 (M - 1)^2``;
    equidistant points satisfy ``|D| >= (2^(M-1) - 1) / 2``.  ``inf_norm``
    includes the diagonal; ``offdiag_norm`` omits it.
    """
    family = d.family
    M = d.M
    inf_norm = float(np.max(np.sum(np.abs(d.unscaled), axis=1)))
    offdiag = float(np.max(np.sum(np.abs(d.coeffs), axis=1)))
    if family is NodeFamily.CHEBYSHEV2:
        bound = 16.0 * (M - 1) ** 2
        satisfied = inf_norm <= bound
        kind = "upper"
    elif family is NodeFamily.EQUIDISTANT:
        bound = 0.5 * (2.0 ** (M - 1) - 1.0)
        satisfied = inf_norm >= bound
        kind = "lower"
    else:
        raise ConfigurationError("norm bounds are known for chebyshev2 and equidistant nodes only")
    return {
        "M": M,
        "inf_norm": inf_norm,
        "offdiag_norm": offdiag,
        "bound": bound,
        "kind": kind,
        "satisfied": bool(satisfied),
    }
