import math

import numpy as np
import pytest

from projlab.errors import HypothesisViolated
from projlab.linalg import op_norm, plane_rotation
from projlab.projections import Projection, proj_from_basis
from projlab.transport import (
    check_bounded_transport,
    check_exact_transport,
    product_transport_exact,
    product_transport_bound,
)


def coords(dim, idx):
    return Projection.from_coords(dim, idx)


def test_exact_transport_identity_case():
    dim = 5
    q = coords(dim, [0, 1])
    q0 = coords(dim, [0, 1, 2])
    assert check_exact_transport(np.eye(dim), np.eye(dim), np.eye(dim), q, q0, q)


def test_exact_transport_detects_broken_premise():
    # a rotation inside range(q0) that the stage unitary does not share
    dim = 5
    q = coords(dim, [0, 1])
    q0 = coords(dim, [0, 1, 2])
    u = np.zeros(dim)
    w = np.zeros(dim)
    u[0] = 1.0
    w[2] = 1.0
    v_tilde = plane_rotation(u, w, 0.3)
    with pytest.raises(HypothesisViolated):
        check_exact_transport(np.eye(dim), v_tilde, np.eye(dim), q, q0, q)


def test_exact_transport_nontrivial_shared_rotation():
    # v_tilde and the stage unitary share the same action on range(q0)
    dim = 6
    q = coords(dim, [0])
    q0 = coords(dim, [0, 1])
    u = np.zeros(dim)
    w = np.zeros(dim)
    u[0] = 1.0
    w[1] = 1.0
    rot = plane_rotation(u, w, 0.2)
    assert check_exact_transport(np.eye(dim), rot, rot, q, q0, q)


def test_bounded_transport_identity_v():
    dim = 5
    p = coords(dim, [0])
    p0 = coords(dim, [0, 1])
    measured, ok = check_bounded_transport(
        np.eye(dim), np.eye(dim), np.eye(dim), p, p0, p, eta=0.1
    )
    assert ok
    assert measured <= 1e-9


def test_bounded_transport_rejects_empty_budget():
    dim = 4
    p = coords(dim, [0])
    p0 = coords(dim, [0, 1])
    with pytest.raises(HypothesisViolated):
        check_bounded_transport(np.eye(dim), np.eye(dim), np.eye(dim), p, p0, p, eta=0.0)


def test_bounded_transport_small_v_motion():
    dim = 6
    p = coords(dim, [0])
    p0 = coords(dim, [0, 1])
    u = np.zeros(dim)
    w = np.zeros(dim)
    u[1] = 1.0
    w[4] = 1.0
    eta = 0.2
    # ||V p0 - p0|| = 2 sin(a/2) along the moved axis; keep below eta/2
    angle = 2.0 * math.asin(eta / 4.1)
    v_tilde = plane_rotation(u, w, angle)
    measured, ok = check_bounded_transport(
        np.eye(dim), v_tilde, np.eye(dim), p, p0, p, eta=eta
    )
    assert ok
    assert measured < eta


def test_product_exact_single_factor():
    dim = 4
    q0 = coords(dim, [0, 1])
    a = q0.matrix
    assert product_transport_exact([a], [a], q0)


def test_product_exact_differing_off_range():
    dim = 5
    q0 = coords(dim, [0, 1])
    a1 = coords(dim, [0, 1, 2]).matrix
    b1 = coords(dim, [0, 1, 3]).matrix  # differs only off range(q0)... check
    # (a1 - b1) q0 = 0 since both contain range(q0)
    assert product_transport_exact([a1, a1], [b1, b1], q0)


def test_product_exact_rejects_on_range_difference():
    dim = 5
    q0 = coords(dim, [0, 1])
    a1 = coords(dim, [0, 1]).matrix
    b1 = coords(dim, [0]).matrix
    with pytest.raises(HypothesisViolated):
        product_transport_exact([a1], [b1], q0)


def test_product_bound_equal_lists():
    dim = 4
    p0 = coords(dim, [0, 1])
    a = coords(dim, [0, 1, 2]).matrix
    measured, ok = product_transport_bound([a, a], [a, a], p0, gamma=0.01, eps=0.05)
    assert ok
    assert measured <= 1e-9


def test_product_bound_additive_accumulation():
    # three random commuting-compatible contractions against perturbed copies
    rng = np.random.default_rng(31)
    dim = 8
    p0 = coords(dim, range(dim))  # full space keeps premises simple
    gamma = 0.01
    worst = 0.0
    for _ in range(10):
        a_ops = []
        b_ops = []
        for _m in range(3):
            m = rng.normal(size=(dim, dim))
            m = 0.5 * (m + m.T)
            m /= op_norm(m) * 1.1
            d = rng.normal(size=(dim, dim))
            d = 0.5 * (d + d.T)
            d *= (gamma * 0.9) / op_norm(d)
            b = m + d
            nb = op_norm(b)
            if nb > 1.0:
                b /= nb * (1 + 1e-12)
                d = b - m
            a_ops.append(m)
            b_ops.append(b)
        measured, ok = product_transport_bound(a_ops, b_ops, p0, gamma=gamma, eps=3 * gamma)
        assert ok
        worst = max(worst, measured)
    assert worst <= 3 * gamma + 1e-9


def test_product_bound_rejects_large_defect():
    dim = 4
    p0 = coords(dim, [0, 1])
    a = coords(dim, [0, 1, 2]).matrix
    b = coords(dim, [0, 2]).matrix
    with pytest.raises(HypothesisViolated):
        product_transport_bound([a], [b], p0, gamma=0.01, eps=0.05)
