"""Orthogonal projections as first-class values.

A Projection stores an orthonormal basis of its range; the dense matrix
is derived on demand.  A Flag is a decreasing chain of projections with
declared rank drops.  Spectral powers accept integer exponents of any
size and evaluate through log space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import NotContraction, NotSymmetric, OrderingViolation, RankDeficient
from .linalg import (
    as_operator,
    check_unitary,
    op_norm,
    orthonormalize,
    sym_eig,
    symmetry_defect,
)
from .logdomain import signed_power

CONTAINMENT_TOL = 1e-9


@dataclass(frozen=True)
class Projection:
    basis: np.ndarray  # (dim, rank), orthonormal columns
    dim: int = field(init=False)
    rank: int = field(init=False)

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2:
            raise ValueError("basis must be a (dim, rank) array")
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "dim", b.shape[0])
        object.__setattr__(self, "rank", b.shape[1])

    @cached_property
    def matrix(self) -> np.ndarray:
        return self.basis @ self.basis.T

    @classmethod
    def zero(cls, dim: int) -> "Projection":
        return cls(np.zeros((dim, 0)))

    @classmethod
    def identity(cls, dim: int) -> "Projection":
        return cls(np.eye(dim))

    @classmethod
    def from_coords(cls, dim: int, coords) -> "Projection":
        """Exact projection onto a set of coordinate axes."""
        idx = list(coords)
        b = np.zeros((dim, len(idx)))
        for col, i in enumerate(idx):
            b[i, col] = 1.0
        return cls(b)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.basis @ (self.basis.T @ v)

    def complement_residual(self, other: "Projection") -> float:
        """|| (1 - self) other || == || self other - other ||."""
        if other.rank == 0:
            return 0.0
        r = other.basis - self.basis @ (self.basis.T @ other.basis)
        return op_norm(r)

    def contains(self, other: "Projection", tol: float = CONTAINMENT_TOL) -> bool:
        return self.complement_residual(other) <= tol


def projection_defects(p: Projection) -> dict[str, float]:
    """Measured deviations from the projection axioms, for tests and reports."""
    m = p.matrix
    gram = p.basis.T @ p.basis
    return {
        "symmetry": symmetry_defect(m),
        "idempotence": op_norm(m @ m - m),
        "basis_gram": float(np.max(np.abs(gram - np.eye(p.rank)))) if p.rank else 0.0,
        "trace_rank": abs(float(np.trace(m)) - p.rank),
    }


def proj_from_basis(vectors) -> Projection:
    """Projection onto the span of an independent family (orthonormalized here)."""
    basis = orthonormalize(vectors)
    if not basis:
        raise RankDeficient("no vectors supplied")
    return Projection(np.column_stack(basis))


@dataclass(frozen=True)
class Flag:
    """Decreasing chain of projections with declared rank drops."""

    chain: tuple[Projection, ...]
    drops: tuple[int, ...]

    def __post_init__(self):
        if len(self.drops) != max(len(self.chain) - 1, 0):
            raise ValueError("need one declared drop per consecutive pair")

    def __len__(self) -> int:
        return len(self.chain)

    def validate(self, tol: float = CONTAINMENT_TOL) -> None:
        for i, drop in enumerate(self.drops):
            hi, lo = self.chain[i], self.chain[i + 1]
            if hi.rank - lo.rank != drop:
                raise OrderingViolation(
                    f"declared drop {drop} at step {i}, ranks {hi.rank}->{lo.rank}"
                )
            resid = hi.complement_residual(lo)
            if resid > tol:
                raise OrderingViolation(f"containment residual {resid:.3e} at step {i}")


def flag_from_chain(chain) -> Flag:
    members = tuple(chain)
    drops = tuple(members[i].rank - members[i + 1].rank for i in range(len(members) - 1))
    return Flag(members, drops)


def compress(e: Projection, t) -> np.ndarray:
    """The operator E T E written in E's stored basis (rank x rank)."""
    m = as_operator(t)
    return e.basis.T @ m @ e.basis


def principal_angles(p: Projection, q: Projection) -> np.ndarray:
    """Canonical angles in ascending order; cosines are cross-Gram singular values."""
    if p.rank == 0 or q.rank == 0:
        raise ValueError("principal angles need two nonzero projections")
    g = p.basis.T @ q.basis
    s = np.linalg.svd(g, compute_uv=False)
    s = np.clip(s, 0.0, 1.0)
    return np.arccos(s)


def proj_distance(p: Projection, q: Projection) -> float:
    return op_norm(p.matrix - q.matrix)


def spectral_power(t, n: int, symmetry_tol: float = 1e-10) -> np.ndarray:
    """T**n for a symmetric contraction through its eigendecomposition.

    The exponent may be any positive integer; eigenvalue powers are taken
    in log space so n far beyond 2**53 is fine.
    """
    m = as_operator(t)
    if symmetry_defect(m) > symmetry_tol:
        raise NotSymmetric(f"symmetry defect {symmetry_defect(m):.3e}")
    nrm = op_norm(m)
    if nrm > 1.0 + 1e-10:
        raise NotContraction(f"operator norm {nrm:.12f}")
    w, v = sym_eig(m)
    w = np.clip(w, -1.0, 1.0)
    powered = np.array([signed_power(float(lam), n) for lam in w])
    return (v * powered) @ v.T


def conjugate(u, p: Projection) -> Projection:
    """U P U* as a projection; the basis is carried through U."""
    m = check_unitary(u)
    return Projection(m @ p.basis)
