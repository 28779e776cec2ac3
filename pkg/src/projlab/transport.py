"""Transport identities: moving stage products between conjugated frames.

Two exact identities and two bounded ones.  Each checker first verifies
its premises at working tolerance (raising HypothesisViolated with the
failing premise), then measures the conclusion.
"""

from __future__ import annotations

import numpy as np

from .errors import HypothesisViolated
from .linalg import as_operator, op_norm
from .projections import Projection

PREMISE_TOL = 1e-10


def _require(name: str, measured: float, limit: float) -> None:
    if not measured <= limit:
        raise HypothesisViolated(name, measured, limit)


def check_exact_transport(u_tilde, v_tilde, stage_v, q_tilde: Projection,
                          q0: Projection, q: Projection,
                          tol: float = 1e-9) -> bool:
    """Conjugating a frame-invariant projection agrees with the stage unitary.

    Premises: the combined unitary fixes q_tilde; the global and stage
    rotations agree on range(q0) and commute with q0; q0 cuts q out of
    q_tilde.  Conclusion: the doubly conjugated projection matches the
    stage-conjugated one on range(q0) to machine precision.
    """
    ut = as_operator(u_tilde)
    vt = as_operator(v_tilde)
    vk = as_operator(stage_v)
    qt = q_tilde.matrix
    q0m = q0.matrix
    qm = q.matrix

    _require("u_tilde fixes q_tilde", op_norm(ut @ qt @ ut.T - qt), PREMISE_TOL)
    _require("v_tilde agrees with stage unitary on range(q0)",
             op_norm((vt - vk) @ q0m), PREMISE_TOL)
    _require("v_tilde commutes with q0", op_norm(vt @ q0m - q0m @ vt), PREMISE_TOL)
    _require("stage unitary commutes with q0", op_norm(vk @ q0m - q0m @ vk), PREMISE_TOL)
    _require("q0 cuts q out of q_tilde", op_norm(q0m @ qt - qm), PREMISE_TOL)

    hatted = vt @ ut @ qt @ ut.T @ vt.T
    staged = vk @ qm @ vk.T
    return op_norm((hatted - staged) @ q0m) <= tol


def check_bounded_transport(u_tilde, v_tilde, stage_u, p_tilde: Projection,
                            p0: Projection, p: Projection, eta: float):
    """Bounded version: the v-rotation may move range(p0) by eta/2.

    Returns (measured, pass) for the conjugation mismatch on range(p0).
    """
    if not eta > 0.0:
        raise HypothesisViolated("positive norm budget", 0.0, 0.0)
    ut = as_operator(u_tilde)
    vt = as_operator(v_tilde)
    uk = as_operator(stage_u)
    pt = p_tilde.matrix
    p0m = p0.matrix
    pm = p.matrix

    _require("u_tilde agrees with stage unitary on range(p0)",
             op_norm((ut - uk) @ p0m), PREMISE_TOL)
    _require("u_tilde commutes with p0", op_norm(ut @ p0m - p0m @ ut), PREMISE_TOL)
    _require("stage unitary commutes with p0", op_norm(uk @ p0m - p0m @ uk), PREMISE_TOL)
    _require("p0 cuts p out of p_tilde", op_norm(p0m @ pt - pm), PREMISE_TOL)
    _require("v_tilde moves range(p0) at most eta/2",
             op_norm(vt @ p0m - p0m), eta / 2.0 + PREMISE_TOL)

    hatted = vt @ ut @ pt @ ut.T @ vt.T
    staged = uk @ pm @ uk.T
    measured = op_norm((hatted - staged) @ p0m)
    return measured, measured < eta


def product_transport_exact(a_ops, b_ops, q0: Projection, tol_scale: float = 1e-8) -> bool:
    """Factor lists agreeing on an invariant range have equal products there.

    Premises per factor: (A - B) vanishes on range(q0), A maps range(q0)
    into itself, and A is a contraction.  The products apply the first
    list element first.  Verified within tol_scale * M.
    """
    a_ops = [as_operator(a) for a in a_ops]
    b_ops = [as_operator(b) for b in b_ops]
    if len(a_ops) != len(b_ops):
        raise ValueError("factor lists must have equal length")
    q0m = q0.matrix
    for m, (a, b) in enumerate(zip(a_ops, b_ops)):
        _require(f"factor {m}: (A - B) q0 = 0", op_norm((a - b) @ q0m), PREMISE_TOL)
        _require(f"factor {m}: A keeps range(q0)",
                 op_norm(a @ q0m - q0m @ a @ q0m), PREMISE_TOL)
        _require(f"factor {m}: A is a contraction", op_norm(a), 1.0 + PREMISE_TOL)

    prod_a = q0m.copy()
    prod_b = q0m.copy()
    for a, b in zip(a_ops, b_ops):
        prod_a = a @ prod_a
        prod_b = b @ prod_b
    return op_norm(prod_b - prod_a) <= tol_scale * max(len(a_ops), 1)


def product_transport_bound(a_ops, b_ops, p0: Projection, gamma: float, eps: float):
    """Bounded product transport: per-factor defects below gamma on range(p0).

    Error accumulates at most additively across factors, so callers size
    gamma as eps / (2 M).  Returns (measured, pass) with pass iff the
    measured product difference stays below eps.
    """
    a_ops = [as_operator(a) for a in a_ops]
    b_ops = [as_operator(b) for b in b_ops]
    if len(a_ops) != len(b_ops):
        raise ValueError("factor lists must have equal length")
    p0m = p0.matrix
    for m, (a, b) in enumerate(zip(a_ops, b_ops)):
        defect = op_norm((a - b) @ p0m)
        if not defect < gamma:
            raise HypothesisViolated(f"factor {m}: defect below gamma", defect, gamma)
        _require(f"factor {m}: A keeps range(p0)",
                 op_norm(a @ p0m - p0m @ a @ p0m), PREMISE_TOL)
        _require(f"factor {m}: A is a contraction", op_norm(a), 1.0 + PREMISE_TOL)
        _require(f"factor {m}: B is a contraction", op_norm(b), 1.0 + PREMISE_TOL)

    prod_a = p0m.copy()
    prod_b = p0m.copy()
    for a, b in zip(a_ops, b_ops):
        prod_a = a @ prod_a
        prod_b = b @ prod_b
    measured = op_norm(prod_a - prod_b)
    return measured, measured < eps
