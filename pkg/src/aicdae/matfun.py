"""Time-dependent coefficient matrices and DAE coefficient pairs.

A linear DAE ``A(t) (D x)'(t) + B(t) x(t) = q(t)`` with ``D = [I_k, 0]`` is
carried in standard form ``E x' + F x = q`` with ``E = A D`` and ``F = B``.
Coefficients are plain callables; derivatives are never requested from the
user and are approximated by :mod:`aicdae.specdiff` where needed.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import ConfigurationError, ContractViolation
from .specdiff import DiffOperator, apply

Interval = Tuple[float, float]
UNBOUNDED: Interval = (-math.inf, math.inf)


@dataclasses.dataclass(frozen=True)
class MatrixFunction:
    """A real ``rows x cols`` matrix depending on a scalar time.

    ``func`` must be pure; the result of ``func(t)`` is copied into a fresh
    float array so callers may mutate what they get back.
    """

    rows: int
    cols: int
    func: Callable[[float], np.ndarray]
    smoothness_hint: Optional[int] = None

    def __call__(self, t: float) -> np.ndarray:
        value = np.array(self.func(float(t)), dtype=float, copy=True)
        if value.ndim < 2:
            value = value.reshape(self.rows, self.cols)
        if value.shape != (self.rows, self.cols):
            raise ContractViolation(
                f"matrix function returned shape {value.shape}, "
                f"expected {(self.rows, self.cols)}"
            )
        return value

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.rows, self.cols)

    def sample(self, nodes) -> "SampledMatrixStack":
        nodes = np.asarray(nodes, dtype=float)
        values = np.stack([self(t) for t in nodes]) if len(nodes) else np.zeros(
            (0, self.rows, self.cols)
        )
        return SampledMatrixStack(nodes, values)

    @classmethod
    def constant(cls, matrix) -> "MatrixFunction":
        matrix = np.atleast_2d(np.array(matrix, dtype=float))
        frozen = matrix.copy()
        frozen.setflags(write=False)
        return cls(frozen.shape[0], frozen.shape[1], lambda t: frozen)

    @classmethod
    def from_callable(cls, func, smoothness_hint=None) -> "MatrixFunction":
        """Wrap ``func`` after probing its shape at ``t = 0``."""
        probe = np.atleast_2d(np.asarray(func(0.0), dtype=float))
        if np.asarray(func(0.0)).ndim == 1:
            probe = probe.T
        return cls(probe.shape[0], probe.shape[1], func, smoothness_hint)


@dataclasses.dataclass(frozen=True)
class SampledMatrixStack:
    """Matrix values at a strictly increasing set of nodes.

    ``values`` has shape ``(M, rows, cols)``.
    """

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1:
            raise ContractViolation("nodes must be one-dimensional")
        if values.ndim != 3 or values.shape[0] != nodes.shape[0]:
            raise ContractViolation(
                f"values shape {values.shape} does not match {nodes.shape[0]} nodes"
            )
        if nodes.size > 1 and np.any(np.diff(nodes) <= 0):
            raise ContractViolation("nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.nodes.shape[0]

    def __getitem__(self, i):
        return self.values[i]

    @property
    def shape(self):
        return self.values.shape[1:]

    def map(self, func) -> "SampledMatrixStack":
        """Apply ``func`` node by node."""
        return SampledMatrixStack(self.nodes, np.stack([func(v) for v in self.values]))

    def transpose(self) -> "SampledMatrixStack":
        return SampledMatrixStack(self.nodes, np.transpose(self.values, (0, 2, 1)))


@dataclasses.dataclass(frozen=True)
class DaePair:
    """Standard-form coefficient pair ``{E, F}`` on ``interval``.

    ``k`` is the number of differentiated components; it equals ``m`` when the
    pair was not built from ``(A, D, B)`` and no splitting is known.
    """

    E: MatrixFunction
    F: MatrixFunction
    k: int
    interval: Interval = UNBOUNDED

    def __post_init__(self):
        if self.E.shape != self.F.shape or self.E.rows != self.E.cols:
            raise ConfigurationError(
                f"E {self.E.shape} and F {self.F.shape} must be equal square shapes"
            )
        if not 0 <= self.k <= self.E.rows:
            raise ConfigurationError(f"k={self.k} outside [0, m]")
        a, b = self.interval
        if not a < b:
            raise ConfigurationError(f"empty interval {self.interval}")

    @property
    def m(self) -> int:
        return self.E.rows

    @property
    def D(self) -> np.ndarray:
        return np.eye(self.k, self.m)

    def sample(self, nodes) -> "SampledPair":
        return SampledPair(self.E.sample(nodes), self.F.sample(nodes))

    def residual(self, t, x, dx) -> np.ndarray:
        """``E(t) dx + F(t) x`` for vectors ``x`` and ``dx``."""
        return self.E(t) @ np.asarray(dx, float) + self.F(t) @ np.asarray(x, float)


@dataclasses.dataclass(frozen=True)
class SampledPair:
    """A coefficient pair known only at the nodes of a differentiation window."""

    E: SampledMatrixStack
    F: SampledMatrixStack

    def __post_init__(self):
        if not np.array_equal(self.E.nodes, self.F.nodes):
            raise ContractViolation("E and F are sampled at different nodes")
        if self.E.shape != self.F.shape:
            raise ContractViolation(f"E {self.E.shape} and F {self.F.shape} differ in shape")

    @property
    def nodes(self):
        return self.E.nodes

    @property
    def m(self):
        return self.E.shape[0]


def standard_form(A: MatrixFunction, D, B: MatrixFunction, interval: Interval = UNBOUNDED) -> DaePair:
    """Build ``{E, F} = {A D, B}`` for ``D = [I_k, 0]``."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    k, m = D.shape
    if not np.array_equal(D, np.eye(k, m)):
        raise ConfigurationError("D must be [I_k, 0]")
    if A.shape != (m, k):
        raise ConfigurationError(f"A has shape {A.shape}, expected {(m, k)}")
    if B.shape != (m, m):
        raise ConfigurationError(f"B has shape {B.shape}, expected {(m, m)}")

    def E(t, A=A, m=m, k=k):
        out = np.zeros((m, m))
        out[:, :k] = A(t)
        return out

    return DaePair(MatrixFunction(m, m, E, A.smoothness_hint), B, k, interval)


def adjoint_pair(pair: DaePair | SampledPair, d: DiffOperator) -> SampledPair:
    """Sampled coefficients of the adjoint DAE ``-E^T y' + (F^T - (E^T)') y = 0``.

    The derivative of ``E^T`` is replaced by the discrete operator ``d``.
    """
    sampled = pair.sample(d.nodes) if isinstance(pair, DaePair) else pair
    if not np.array_equal(sampled.nodes, d.nodes):
        raise ContractViolation("pair is not sampled at the operator nodes")
    Et = sampled.E.transpose()
    dEt = apply(d, Et)
    return SampledPair(
        SampledMatrixStack(d.nodes, -Et.values),
        SampledMatrixStack(d.nodes, sampled.F.transpose().values - dEt.values),
    )


def manufacture_rhs(pair: DaePair, x_exact, dx_exact) -> MatrixFunction:
    """Right-hand side ``q = E dx + F x`` that makes ``x_exact`` a solution."""
    m = pair.m

    def q(t):
        return pair.residual(t, x_exact(t), dx_exact(t)).reshape(m, 1)

    return MatrixFunction(m, 1, q)
