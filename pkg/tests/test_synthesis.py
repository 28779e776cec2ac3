import math

import numpy as np
import pytest

from projlab.errors import BudgetExceeded, Infeasible, InsufficientStages, MissingHelpers
from projlab.linalg import op_norm
from projlab.logdomain import defect_power, float_power
from projlab.projections import (
    Projection,
    compress,
    flag_from_chain,
    proj_distance,
    spectral_power,
)
from projlab.synthesis import (
    build_dimension_plan,
    build_interpolating_projection,
    build_stage_flags,
    eigenvalue_ladder,
    power_schedule,
    synthesize_ratchet,
)


# --- log-domain helpers ----------------------------------------------------


def test_defect_power_matches_direct():
    # lam = 1 - 1e-3, n = 500
    lam_n, one_minus = defect_power(math.log(1e-3), 500)
    want = (1.0 - 1e-3) ** 500
    assert abs(lam_n - want) < 1e-12
    assert abs(one_minus - (1.0 - want)) < 1e-12


def test_float_power_huge_exponent():
    # 2**-40 subtracts from 1.0 exactly, so the oracle sees the same defect
    d = 2.0**-40
    lam_n, one_minus = float_power(1.0 - d, 10**13)
    want = math.exp(10**13 * math.log1p(-d))
    assert abs(lam_n - want) < 1e-9
    assert abs(one_minus - (1.0 - want)) < 1e-9


# --- dimension plans and stage flags ---------------------------------------


def test_plan_blocks_disjoint_and_sized():
    plan = build_dimension_plan(1, [2], [2], reserve=4)
    sets = [set(plan.e_indices)]
    sets += [set(b) for b in plan.f_blocks]
    sets += [set(b) for b in plan.g_blocks]
    sets += [set(plan.helper_indices), set(plan.reserve_indices)]
    union = set()
    for s in sets:
        assert not (union & s)
        union |= s
    assert union == set(range(plan.total_dim))
    assert len(plan.e_indices) == 3
    assert len(plan.helper_indices) == 3 + 2 + 2
    assert plan.total_dim == 3 + 4 + 7 + 4


def test_plan_rejects_bad_inputs():
    with pytest.raises(ValueError):
        build_dimension_plan(0, [], [], reserve=4)
    with pytest.raises(ValueError):
        build_dimension_plan(1, [2], [2], reserve=0)
    with pytest.raises(BudgetExceeded):
        build_dimension_plan(1, [2], [2], reserve=4, dimension_cap=10)


def test_plan_deterministic():
    a = build_dimension_plan(2, [3, 4], [2, 5], reserve=3)
    b = build_dimension_plan(2, [3, 4], [2, 5], reserve=3)
    assert a == b


def test_stage_flags_shapes():
    plan = build_dimension_plan(1, [1], [3], reserve=2)
    p_flag, q_flag = build_stage_flags(plan, 1)
    assert [m.rank for m in p_flag.chain] == [3, 2]
    assert [m.rank for m in q_flag.chain] == [5, 4, 3, 2]
    p_flag.validate(tol=1e-12)
    q_flag.validate(tol=1e-12)
    # chains end on the pair axes
    blocks = plan.block_indices(1)
    d_k = Projection.from_coords(plan.total_dim, blocks["d"])
    e_k = Projection.from_coords(plan.total_dim, blocks["e"])
    assert proj_distance(p_flag.chain[-1], d_k) == 0.0
    assert proj_distance(q_flag.chain[-1], e_k) == 0.0


# --- power schedules --------------------------------------------------------


def test_schedule_first_stage_immediate():
    sched = power_schedule([0.99, 0.9999], [0.05, 0.05])
    assert sched.exponents[0] == 1
    assert abs(sched.achieved_errors[0] - 0.01) < 1e-12


def test_schedule_small_scan_is_minimal():
    sched = power_schedule([0.5, 0.999], [0.6, 0.05])
    assert sched.exponents == (1, 5)
    assert abs(sched.achieved_errors[1] - max(0.5**5, 1.0 - 0.999**5)) < 1e-12
    # independent minimality check
    for p in range(1, 5):
        assert max(0.5**p, 1.0 - 0.999**p) >= 0.05


def test_schedule_infeasible_pair():
    # brute-force oracle: no exponent can separate 0.9 from 0.91 at 0.01
    assert min(max(0.9**p, 1.0 - 0.91**p) for p in range(1, 2000)) > 0.01
    with pytest.raises(Infeasible) as err:
        power_schedule([0.9, 0.91], [0.5, 0.01])
    assert err.value.stage == 2


def test_schedule_respects_cap():
    with pytest.raises(Infeasible):
        power_schedule([1.0 - 1e-12, 1.0 - 1e-15], [0.5, 0.01], cap=10**6)


def test_schedule_errors_recomputable():
    # retaining the mu = 0.5 slab costs 0.5 at stage one, so delta_1 > 0.5
    mus = [0.5, 0.99, 0.9999]
    sched = power_schedule(mus, [0.6, 0.2, 0.1], cap=10**7)
    # identical call reproduces every stored value bitwise
    again = power_schedule(mus, [0.6, 0.2, 0.1], cap=10**7)
    assert again == sched
    # independent recomputation agrees to full relative precision
    for k0, p in enumerate(sched.exponents):
        errs = []
        for j0, mu in enumerate(mus):
            lam_p, one_minus = float_power(mu, p)
            errs.append(lam_p if j0 < k0 else one_minus)
        assert abs(max(errs) - sched.achieved_errors[k0]) <= 1e-12 * max(errs)


# --- eigenvalue ladder -------------------------------------------------------


def test_ladder_single_slab():
    ladder = eigenvalue_ladder(1, 0.2)
    gamma = (0.2 / 4.0) ** 2
    assert abs(ladder.values[0] - math.exp(-gamma)) < 1e-15


def test_ladder_strictly_increasing():
    ladder = eigenvalue_ladder(3, 0.3)
    rates = ladder.log_rates
    assert rates[0] > rates[1] > rates[2]  # decay rates fall, values rise


def test_ladder_feasible_for_four_slabs():
    # construction raises if the downstream schedule were infeasible
    ladder = eigenvalue_ladder(4, 0.05)
    assert len(ladder) == 4


# --- interpolating projection ------------------------------------------------


def _line_flag_dim6():
    top = Projection.from_coords(6, [0, 1])
    bottom = Projection.from_coords(6, [0])
    return flag_from_chain([top, bottom])


def test_interpolation_single_slab_quarter():
    # retaining a mu = 0.25 slab costs 1 - 0.25 = 0.75 per power, so the
    # stage budget must sit above that floor
    flag = flag_from_chain([Projection.from_coords(4, [0])])
    helper = np.zeros(4)
    helper[2] = 1.0
    res = build_interpolating_projection(flag, [0.8], [helper], mu_values=[0.25])
    c = compress(flag.chain[0], res.q.matrix)
    assert abs(c[0, 0] - 0.25) < 1e-12
    # the tilted line sits at 60 degrees from the axis
    assert abs(abs(res.q.basis[0, 0]) - 0.5) < 1e-12


def test_interpolation_unit_ladder_reproduces_top():
    top = Projection.from_coords(6, [0, 1])
    flag = flag_from_chain([top])
    res = build_interpolating_projection(flag, [0.5], [], mu_values=[1.0])
    prod = top.matrix @ res.q.matrix @ top.matrix
    assert op_norm(prod - top.matrix) < 1e-12
    assert res.q.contains(top)


def test_interpolation_two_slab_certificate():
    flag = _line_flag_dim6()
    helpers = [np.zeros(6), np.zeros(6)]
    helpers[0][3] = 1.0
    helpers[1][4] = 1.0
    res = build_interpolating_projection(flag, [0.1, 0.05], helpers)
    d1, d2 = res.certified_distances
    assert d1 < 0.1
    assert d2 < 0.05
    # independent dense check: power the dense compression directly
    top = flag.chain[0]
    sandwich = top.matrix @ res.q.matrix @ top.matrix
    for k0, p in enumerate(res.schedule.exponents):
        powered = spectral_power(sandwich, p)
        member = flag.chain[k0]
        assert op_norm(powered - member.matrix) < [0.1, 0.05][k0]


def test_interpolation_requires_helpers():
    flag = _line_flag_dim6()
    with pytest.raises(MissingHelpers):
        build_interpolating_projection(flag, [0.1, 0.05], [])


def test_interpolation_compression_is_diagonal_ladder():
    flag = _line_flag_dim6()
    helpers = [np.zeros(6), np.zeros(6)]
    helpers[0][3] = 1.0
    helpers[1][4] = 1.0
    res = build_interpolating_projection(flag, [0.1, 0.05], helpers)
    assert res.representation_residual < 1e-12
    spec = sorted(np.linalg.eigvalsh(compress(flag.chain[0], res.q.matrix)))
    want = sorted(res.schedule.eigenvalues)
    assert max(abs(a - b) for a, b in zip(spec, want)) < 1e-9


# --- ratchet synthesis --------------------------------------------------------


def _unit_drop_flag(dim, core_coords, line_coords):
    members = []
    for drop in range(len(line_coords) + 1):
        members.append(
            Projection.from_coords(dim, list(core_coords) + list(line_coords[drop:]))
        )
    return flag_from_chain(members)


def test_ratchet_trivial_when_eps_exceeds_diameter():
    flag = _unit_drop_flag(6, [0, 1], [2, 3])
    e = np.zeros(6)
    ep = np.zeros(6)
    e[0] = 1.0
    ep[1] = 1.0
    v, plan = synthesize_ratchet(flag, e, ep, eps=1.5, eta=0.5)
    np.testing.assert_array_equal(v, np.eye(6))
    assert plan.exponents == ()
    assert plan.residual < 1.5


def test_ratchet_toy_dim6_verified_densely():
    flag = _unit_drop_flag(6, [0, 1], [2, 3, 4, 5])
    e = np.zeros(6)
    ep = np.zeros(6)
    e[0] = 1.0
    ep[1] = 1.0
    v, plan = synthesize_ratchet(flag, e, ep, eps=0.5, eta=0.5)
    assert plan.residual < 0.5
    assert plan.unitary_defect < 0.5
    # independent dense evaluation of the synthesized factors
    e_proj = Projection.from_coords(6, [0, 1])
    x = e.copy()
    for t, member in enumerate(flag.chain[1:]):
        w = v @ member.matrix @ v.T
        factor = e_proj.matrix @ w @ e_proj.matrix
        x = spectral_power(factor, plan.exponents[t]) @ x
    measured = float(np.linalg.norm(x - ep))
    assert measured < 0.5
    assert abs(measured - plan.residual) < 1e-6


def test_ratchet_insufficient_single_stage():
    flag = _unit_drop_flag(6, [0, 1], [2])
    e = np.zeros(6)
    ep = np.zeros(6)
    e[0] = 1.0
    ep[1] = 1.0
    with pytest.raises(InsufficientStages):
        synthesize_ratchet(flag, e, ep, eps=0.1, eta=0.1)


def test_ratchet_single_stage_floor_oracle():
    # coarse grid over one plane rotation and one exponent: the best
    # achievable residual stays far above 0.1
    e = np.array([1.0, 0.0, 0.0])
    ep = np.array([0.0, 1.0, 0.0])
    e_proj = np.diag([1.0, 1.0, 0.0])
    best = math.inf
    for phi in np.linspace(0, math.pi, 25):
        d = np.array([math.cos(phi), math.sin(phi), 0.0])
        for alpha in np.linspace(0.001, 0.0999, 15):
            g = np.array([0.0, 0.0, 1.0])
            r = np.eye(3)
            r += (math.cos(alpha) - 1) * (np.outer(d, d) + np.outer(g, g))
            r += math.sin(alpha) * (np.outer(g, d) - np.outer(d, g))
            q1 = r @ np.diag([1.0, 1.0, 0.0]) @ r.T  # V Q_1 V^T with Q_1 = E
            factor = e_proj @ q1 @ e_proj
            w, vecs = np.linalg.eigh(factor)
            for n_log in range(0, 40):
                powered = (vecs * w**(2**n_log)) @ vecs.T
                best = min(best, float(np.linalg.norm(powered @ e - ep)))
    assert best > 0.1


def test_ratchet_identity_outside_flag_top():
    flag = _unit_drop_flag(10, [0, 1], [2, 3, 4])
    e = np.zeros(10)
    ep = np.zeros(10)
    e[0] = 1.0
    ep[1] = 1.0
    v, _ = synthesize_ratchet(flag, e, ep, eps=0.9, eta=0.5)
    np.testing.assert_array_equal(v[5:, :], np.eye(10)[5:, :])
    np.testing.assert_array_equal(v[:, 5:], np.eye(10)[:, 5:])


def test_ratchet_norm_budget():
    flag = _unit_drop_flag(12, [0, 1], list(range(2, 10)))
    e = np.zeros(12)
    ep = np.zeros(12)
    e[0] = 1.0
    ep[1] = 1.0
    v, plan = synthesize_ratchet(flag, e, ep, eps=0.4, eta=0.3)
    assert plan.unitary_defect < 0.3
    assert plan.unitary_defect <= plan.angle_budget + 1e-10
    assert plan.angle_budget < 0.3


def test_ratchet_residual_improves_with_stages():
    dims = 20
    e = np.zeros(dims)
    ep = np.zeros(dims)
    e[0] = 1.0
    ep[1] = 1.0
    residuals = []
    for T in (2, 4, 8):
        flag = _unit_drop_flag(dims, [0, 1], list(range(2, 2 + T)))
        try:
            _, plan = synthesize_ratchet(flag, e, ep, eps=1.2, eta=0.5)
            residuals.append(plan.residual)
        except InsufficientStages:
            residuals.append(math.inf)
    assert residuals[0] >= residuals[1] >= residuals[2]


def test_ratchet_tiny_eta_regime():
    # transport-sized eta: exponents become astronomical but the plan
    # still verifies through log space
    T = 12
    flag = _unit_drop_flag(2 + T, [0, 1], list(range(2, 2 + T)))
    e = np.zeros(2 + T)
    ep = np.zeros(2 + T)
    e[0] = 1.0
    ep[1] = 1.0
    v, plan = synthesize_ratchet(flag, e, ep, eps=0.45, eta=1e-6)
    assert plan.residual < 0.45
    assert plan.unitary_defect < 1e-6
    assert max(plan.exponents) > 10**9
