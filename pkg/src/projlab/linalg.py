"""Dense real linear algebra kernel.

Vectors are 1-D float64 arrays, operators 2-D square arrays.  All
functions are pure; nothing here mutates its inputs.
"""

from __future__ import annotations

import numpy as np

from .errors import NotOrthonormalPair, NotSymmetric, NotUnitary, RankDeficient

INDEPENDENCE_TOL = 1e-10
SYMMETRY_TOL = 1e-10
UNITARY_TOL = 1e-10


def as_vector(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.ndim != 1:
        raise ValueError("expected a 1-D vector")
    return a


def as_operator(a) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square operator")
    return m


def symmetry_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.T))) if a.size else 0.0


def orthonormalize(vectors, tol: float = INDEPENDENCE_TOL) -> list[np.ndarray]:
    """Modified Gram-Schmidt with one reorthogonalization pass.

    Raises RankDeficient when a vector's residual after projecting out the
    earlier ones falls below ``tol``.
    """
    basis: list[np.ndarray] = []
    for v in vectors:
        r = as_vector(v).copy()
        for _ in range(2):
            for q in basis:
                r -= np.dot(q, r) * q
        nrm = float(np.linalg.norm(r))
        if nrm < tol:
            raise RankDeficient(f"residual {nrm:.3e} below {tol:.1e}")
        basis.append(r / nrm)
    return basis


def sym_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric operator.

    Returns (w, V) with columns of V the eigenvectors; a = V @ diag(w) @ V.T.
    """
    m = as_operator(a)
    defect = symmetry_defect(m)
    if defect > SYMMETRY_TOL:
        raise NotSymmetric(f"symmetry defect {defect:.3e}")
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    return w, v


def op_norm(a) -> float:
    """Largest singular value."""
    m = np.asarray(a, dtype=float)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def plane_rotation(u, w, angle: float) -> np.ndarray:
    """Rotation by ``angle`` in span(u, w), identity on the orthocomplement.

    Maps u -> cos(a) u + sin(a) w.  Requires u, w unit and orthogonal.
    """
    uu = as_vector(u)
    ww = as_vector(w)
    if abs(np.linalg.norm(uu) - 1.0) > 1e-10 or abs(np.linalg.norm(ww) - 1.0) > 1e-10:
        raise NotOrthonormalPair("rotation axes must be unit vectors")
    if abs(float(np.dot(uu, ww))) > 1e-10:
        raise NotOrthonormalPair("rotation axes must be orthogonal")
    c = np.cos(angle)
    s = np.sin(angle)
    r = np.eye(len(uu))
    r += (c - 1.0) * (np.outer(uu, uu) + np.outer(ww, ww))
    r += s * (np.outer(ww, uu) - np.outer(uu, ww))
    return r


def check_unitary(u, tol: float = UNITARY_TOL) -> np.ndarray:
    m = as_operator(u)
    defect = float(np.max(np.abs(m.T @ m - np.eye(m.shape[0]))))
    if defect > tol:
        raise NotUnitary(f"U^T U deviates from identity by {defect:.3e}")
    return m


def unitary_defect(u) -> float:
    """Operator-norm distance from the identity."""
    m = as_operator(u)
    return op_norm(m - np.eye(m.shape[0]))
