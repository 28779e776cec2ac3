import math

import numpy as np
import pytest

from projlab.errors import NotContraction, NotSymmetric
from projlab.linalg import op_norm, plane_rotation
from projlab.projections import (
    Projection,
    compress,
    conjugate,
    flag_from_chain,
    principal_angles,
    proj_distance,
    proj_from_basis,
    projection_defects,
    spectral_power,
)


def line(theta, dim=2):
    v = np.zeros(dim)
    v[0] = math.cos(theta)
    v[1] = math.sin(theta)
    return proj_from_basis([v])


def assert_valid(p):
    d = projection_defects(p)
    assert d["symmetry"] <= 1e-10
    assert d["idempotence"] <= 1e-9
    assert d["basis_gram"] <= 1e-10
    assert d["trace_rank"] <= 1e-9


def test_proj_from_basis_axis():
    p = proj_from_basis([np.array([1.0, 0.0])])
    np.testing.assert_allclose(p.matrix, [[1.0, 0.0], [0.0, 0.0]], atol=1e-15)
    assert_valid(p)


def test_proj_from_basis_diagonal_line():
    p = proj_from_basis([np.array([1.0, 1.0])])
    np.testing.assert_allclose(p.matrix, 0.5 * np.ones((2, 2)), atol=1e-12)


def test_proj_from_basis_full_space_is_identity():
    p = proj_from_basis([np.array([1.0, 2.0]), np.array([0.0, 1.0])])
    np.testing.assert_allclose(p.matrix, np.eye(2), atol=1e-12)


def test_compress_contained_projection_is_identity():
    e = Projection.from_coords(4, [0, 1])
    q = Projection.from_coords(4, [0, 1, 2])
    np.testing.assert_allclose(compress(e, q.matrix), np.eye(2), atol=1e-12)


def test_compress_line_in_plane():
    theta = 0.3
    e = Projection.from_coords(2, [0, 1])
    q = line(theta)
    want = np.array(
        [
            [math.cos(theta) ** 2, math.cos(theta) * math.sin(theta)],
            [math.cos(theta) * math.sin(theta), math.sin(theta) ** 2],
        ]
    )
    np.testing.assert_allclose(compress(e, q.matrix), want, atol=1e-12)


def test_compress_zero_operator():
    e = Projection.from_coords(3, [0, 2])
    np.testing.assert_allclose(compress(e, np.zeros((3, 3))), np.zeros((2, 2)), atol=1e-15)


def test_compress_spectrum_inside_unit_interval():
    rng = np.random.default_rng(5)
    for _ in range(10):
        e = proj_from_basis([rng.normal(size=8) for _ in range(3)])
        q = proj_from_basis([rng.normal(size=8) for _ in range(4)])
        w = np.linalg.eigvalsh(compress(e, q.matrix))
        assert w.min() >= -1e-10
        assert w.max() <= 1.0 + 1e-10


def test_principal_angles_identical():
    p = line(0.7)
    np.testing.assert_allclose(principal_angles(p, p), [0.0], atol=1e-7)


def test_principal_angles_45_degrees():
    assert abs(principal_angles(line(0.0), line(math.pi / 4))[0] - math.pi / 4) < 1e-10


def test_principal_angles_orthogonal_lines():
    assert abs(principal_angles(line(0.0), line(math.pi / 2))[0] - math.pi / 2) < 1e-10


def test_proj_distance_self_is_zero():
    p = line(1.1)
    assert proj_distance(p, p) == 0.0


def test_proj_distance_lines_is_sine():
    theta = 0.4
    assert abs(proj_distance(line(0.0), line(theta)) - math.sin(theta)) < 1e-12


def test_proj_distance_orthogonal_lines_is_one():
    assert abs(proj_distance(line(0.0), line(math.pi / 2)) - 1.0) < 1e-12


def test_proj_distance_matches_max_principal_sine():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(3, 32))
        r = int(rng.integers(1, n // 2 + 1))
        p = proj_from_basis([rng.normal(size=n) for _ in range(r)])
        q = proj_from_basis([rng.normal(size=n) for _ in range(r)])
        want = float(np.max(np.sin(principal_angles(p, q))))
        assert abs(proj_distance(p, q) - want) < 1e-8


def test_spectral_power_projection_idempotent():
    p = line(0.9)
    np.testing.assert_allclose(spectral_power(p.matrix, 7), p.matrix, atol=1e-10)


def test_spectral_power_diagonal():
    got = spectral_power(np.diag([0.5, 1.0]), 10)
    np.testing.assert_allclose(got, np.diag([0.5**10, 1.0]), atol=1e-12)


def test_spectral_power_matches_repeated_multiplication():
    rng = np.random.default_rng(23)
    a = rng.normal(size=(8, 8))
    a = 0.5 * (a + a.T)
    a /= op_norm(a) * 1.05
    want = np.eye(8)
    for _ in range(11):
        want = want @ a
    np.testing.assert_allclose(spectral_power(a, 11), want, atol=1e-8)


def test_spectral_power_rejects_bad_inputs():
    with pytest.raises(NotSymmetric):
        spectral_power(np.array([[0.0, 1.0], [0.0, 0.0]]), 2)
    with pytest.raises(NotContraction):
        spectral_power(2.0 * np.eye(2), 2)


def test_spectral_power_huge_exponent_of_near_identity():
    # 1 - 1e-6 decays visibly only past ~1e6 applications
    t = np.diag([1.0 - 1e-6, 1.0])
    got = spectral_power(t, 10**7)
    assert abs(got[0, 0] - math.exp(10**7 * math.log1p(-1e-6))) < 1e-10
    assert abs(got[1, 1] - 1.0) < 1e-12


def test_conjugate_by_identity():
    p = line(0.2, dim=4)
    q = conjugate(np.eye(4), p)
    assert proj_distance(p, q) < 1e-12


def test_conjugate_by_quarter_rotation():
    e = np.zeros(4)
    w = np.zeros(4)
    e[0] = 1.0
    w[2] = 1.0
    r = plane_rotation(e, w, math.pi / 2)
    got = conjugate(r, proj_from_basis([e]))
    np.testing.assert_allclose(got.matrix, np.outer(w, w), atol=1e-12)


def test_conjugate_preserves_rank_and_axioms():
    rng = np.random.default_rng(2)
    p = proj_from_basis([rng.normal(size=16) for _ in range(5)])
    u = np.linalg.qr(rng.normal(size=(16, 16)))[0]
    q = conjugate(u, p)
    assert q.rank == 5
    assert_valid(q)


def test_flag_validation():
    chain = [Projection.from_coords(5, range(k, 5)) for k in range(3)]
    flag = flag_from_chain(chain)
    flag.validate()
    assert flag.drops == (1, 1)
