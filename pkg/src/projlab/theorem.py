"""Composing the divergence witness: three projections and one word.

The assembled decreasing system is interpolated by a single projection Q,
the stage products are rewritten over the generator set {E, P1, Q}, and
the trajectory of the start vector is driven through every stage target.
The two-step bound and the pairwise separation of stage-end iterates
form the finite certificate of divergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assembly import StageAssembly, StageCertificate
from .errors import WordTooLong
from .factors import DefectFactor
from .logdomain import defect_power, log_int
from .projections import Projection
from .synthesis import InterpolationResult, LogTol, build_interpolating_projection
from .words import Atom, Power, Word, apply_flattened, sandwich_power

SEPARATION_FLOOR = math.sqrt(2.0) - 1.0
DEFAULT_LETTER_CAP = 2_000_000


def trajectory_bound(i: int) -> float:
    """The stage-i bound 1/2 - 2^-i on the distance to the i-th target."""
    return 0.5 - 2.0 ** (-i)


@dataclass(frozen=True)
class WitnessFactor:
    """One stage-product factor rewritten over the interpolating projection."""

    role: tuple[int, int]             # (stage index i, slot s)
    member_index: int                 # position in the decreasing sequence
    inner_exponent: int               # interpolation power for this member
    outer_exponent: int               # repeat count from the stage ratchet
    factor: DefectFactor              # exact compression onto the pair-axis space


@dataclass
class DivergenceWitness:
    assembly: StageAssembly
    interpolation: InterpolationResult
    q1: Projection                    # E
    q2: Projection                    # flag top
    q3: Projection                    # interpolating projection
    x: np.ndarray                     # start vector e_1
    word: Word
    factors: list[WitnessFactor]
    stage_states: list[np.ndarray]    # chain states after 0..2K stages (pair-axis coords)
    trajectory_certificates: list[StageCertificate]
    stage_certificates: list[StageCertificate]
    separation_certificate: StageCertificate
    word_certificates: list[StageCertificate]

    def all_certificates(self) -> list[StageCertificate]:
        return (self.trajectory_certificates + self.stage_certificates
                + [self.separation_certificate] + self.word_certificates
                + self.assembly.approach_certificates
                + self.assembly.transport_certificates
                + self.assembly.structure_certificates
                + self.interpolation_certificates())

    def interpolation_certificates(self) -> list[StageCertificate]:
        out = []
        sched = self.interpolation.schedule
        for k0 in range(len(sched.exponents)):
            out.append(StageCertificate.from_logs(
                "interpolation_distance", k0 + 1,
                sched.delta_logs[k0],
                self.interpolation.certified_log_distance(k0),
                detail="power of the interpolated compression vs chain member"))
        out.append(StageCertificate.from_values(
            "interpolation_representation", 0, 1e-9,
            self.interpolation.representation_residual,
            detail="compression of Q diagonal in the adapted basis"))
        return out

    def all_passed(self) -> bool:
        return all(c.passed for c in self.all_certificates())

    def stage_end_states(self) -> list[np.ndarray]:
        return [s for s in self.stage_states]

    def word_fidelity(self, letter_cap: int = DEFAULT_LETTER_CAP) -> float:
        """|| flattened application - structured chain || on the start vector.

        Raises WordTooLong when the flat word cannot be materialized; any
        faithful instance is far beyond every realizable cap.
        """
        mats = {1: self.q1.matrix, 2: self.q2.matrix, 3: self.q3.matrix}
        flat = apply_flattened(self.word.parts, mats, self.x, letter_cap)
        structured = self.assembly.e_proj.basis @ self.stage_states[-1]
        return float(np.linalg.norm(flat - structured))


def _stage_tolerance_logs(asm: StageAssembly) -> list[float]:
    """Per-member substitution tolerances: eps_i over twice the factor count."""
    eps = asm.tol.eps
    m_even = [sum(sd.v_plan.exponents) for sd in asm.stages]
    m_odd = [sd.factor_count for sd in asm.stages]
    out = []
    for idx, member in enumerate(asm.members):
        if member.role is None:
            # chain tops sit just above their own stage block; reuse its budget
            i = 2 * _stage_of_member(asm, idx)
        else:
            i = member.role[0]
        k = (i + 1) // 2
        m_count = m_odd[k - 1] if i % 2 == 1 else m_even[k - 1]
        out.append(math.log(eps[i - 1]) - math.log(2.0) - log_int(m_count))
    return out


def _stage_of_member(asm: StageAssembly, idx: int) -> int:
    """Stage k whose block a top member opens."""
    count = 0
    for sd in asm.stages:
        span = len(sd.q_flag.chain) - 1 + len(sd.p_flag.chain) - 1 + 1
        if idx < count + span:
            return sd.k
        count += span
    return asm.stages[-1].k


def compose_witness(asm: StageAssembly,
                    letter_cap: int = DEFAULT_LETTER_CAP) -> DivergenceWitness:
    """Interpolate the assembled system and certify the finite witness."""
    plan = asm.plan
    dim = plan.total_dim

    delta_logs = _stage_tolerance_logs(asm)
    deltas = [LogTol(dl) for dl in delta_logs]

    helpers = []
    for idx in plan.helper_indices:
        h = np.zeros(dim)
        h[idx] = 1.0
        helpers.append(h)

    flag = asm.global_flag()
    slab_bases = asm.slab_bases()
    interp = build_interpolating_projection(flag, deltas, helpers,
                                            slab_bases=slab_bases)

    witness = _evaluate_chain(asm, interp)
    word = _build_word(asm, interp)

    e_rows = list(plan.e_indices)
    x = np.zeros(dim)
    x[e_rows[0]] = 1.0

    q1 = asm.e_proj
    q2 = flag.chain[0]
    q3 = interp.q

    factors, stage_states = witness
    trajectory_certs, stage_certs, separation = _certify_witness(
        asm, factors, stage_states)
    word_certs = _certify_word(asm, word)

    return DivergenceWitness(
        assembly=asm,
        interpolation=interp,
        q1=q1, q2=q2, q3=q3, x=x,
        word=word,
        factors=factors,
        stage_states=stage_states,
        trajectory_certificates=trajectory_certs,
        stage_certificates=stage_certs,
        separation_certificate=separation,
        word_certificates=word_certs,
    )


def _witness_factors(asm: StageAssembly, interp: InterpolationResult):
    """Exact pair-axis compressions of the rewritten stage factors.

    The compression of (P1 Q P1)^p onto the pair-axis space is
    I - sum_col (1 - mu^p) o_col o_col^T where o_col are the rows of the
    combined unitary over the slab columns; every magnitude is carried in
    log form so defects far below float resolution stay exact.
    """
    plan = asm.plan
    e_rows = list(plan.e_indices)
    n_e = len(e_rows)
    col_slab: list[int] = []
    dir_cols: list[np.ndarray] = []
    norm_logs: list[float] = []

    def add_dense_column(coord: int, slab: int) -> None:
        o = asm.w[e_rows, coord]
        nrm = float(np.linalg.norm(o))
        if nrm > 0.0:
            dir_cols.append(o / nrm)
            norm_logs.append(math.log(nrm))
        else:
            unit = np.zeros(n_e)
            unit[0] = 1.0
            dir_cols.append(unit)
            norm_logs.append(-math.inf)
        col_slab.append(slab)

    for m in range(1, len(asm.members)):
        member = asm.members[m]
        role = member.role
        g_drop = (role is not None and role[0] % 2 == 0 and len(member.dropped) == 1
                  and member.dropped[0] in set(plan.g_blocks[(role[0] // 2) - 1]))
        if g_drop:
            # exact log-carried overlap from the stage ratchet: the plane
            # part of V g_t lives on this stage's pair axes only
            i, t = role
            sd = asm.stages[(i // 2) - 1]
            d2 = sd.v_plan.defect_dirs[t - 1]
            o = np.zeros(n_e)
            o[i - 1] = d2[0]
            o[i] = d2[1]
            dir_cols.append(o)
            norm_logs.append(sd.v_plan.defect_mag_logs[t - 1])
            col_slab.append(m - 1)
        else:
            for c in member.dropped:
                add_dense_column(c, m - 1)
    for c in asm.members[-1].coords:
        add_dense_column(c, len(asm.members) - 1)

    dirs = np.column_stack(dir_cols)
    log_defects = interp.tilt.log_defects

    factors: list[WitnessFactor] = []
    for m_idx, member in enumerate(asm.members):
        if member.role is None:
            continue
        i, s = member.role
        k = (i + 1) // 2
        sd = asm.stages[k - 1]
        outer = (sd.u_plan.exponents[s - 1] if i % 2 == 1
                 else sd.v_plan.exponents[s - 1])
        p = interp.schedule.exponents[m_idx]
        mags = []
        for j in range(len(col_slab)):
            L = log_defects[col_slab[j]]
            if L == -math.inf or norm_logs[j] == -math.inf:
                mags.append(-math.inf)
                continue
            _, one_minus = defect_power(L, p)
            if one_minus <= 0.0:
                mags.append(-math.inf)
                continue
            mags.append(math.log(one_minus) + 2.0 * norm_logs[j])
        factor = DefectFactor.from_scaled_rank_ones(dirs, mags)
        factors.append(WitnessFactor(
            role=(i, s), member_index=m_idx,
            inner_exponent=p, outer_exponent=outer, factor=factor))
    return factors


def _evaluate_chain(asm: StageAssembly, interp: InterpolationResult):
    factors = _witness_factors(asm, interp)
    n_e = len(asm.plan.e_indices)
    x = np.zeros(n_e)
    x[0] = 1.0
    states = [x.copy()]
    stages = 2 * asm.plan.stages
    for i in range(1, stages + 1):
        for wf in factors:
            if wf.role[0] != i:
                continue
            x = wf.factor.apply_power(x, wf.outer_exponent)
        states.append(x.copy())
    return factors, states


def _unit(n_e: int, i: int) -> np.ndarray:
    v = np.zeros(n_e)
    v[i] = 1.0
    return v


def _certify_witness(asm: StageAssembly, factors, states):
    n_e = len(asm.plan.e_indices)
    stages = 2 * asm.plan.stages
    eps = asm.tol.eps

    trajectory_certs = []
    for i in range(1, stages + 2):
        bound = trajectory_bound(i)
        measured = float(np.linalg.norm(states[i - 1] - _unit(n_e, i - 1)))
        trajectory_certs.append(StageCertificate(
            "trajectory_bound", i, bound, measured, measured <= bound,
            detail="distance of the stage-(i-1) state to the i-th pair axis"))

    stage_certs = []
    for i in range(1, stages + 1):
        pure = _unit(n_e, i - 1)
        for wf in factors:
            if wf.role[0] != i:
                continue
            pure = wf.factor.apply_power(pure, wf.outer_exponent)
        measured = float(np.linalg.norm(pure - _unit(n_e, i)))
        stage_certs.append(StageCertificate.from_values(
            "stage_pure_approach", i, 2.0 * eps[i - 1], measured,
            detail="rewritten stage product on its own pair axis"))
        k = (i + 1) // 2
        sd = asm.stages[k - 1]
        plan_final = sd.u_plan.final_state if i % 2 == 1 else sd.v_plan.final_state
        embedded = np.zeros(n_e)
        embedded[i - 1] = plan_final[0]
        embedded[i] = plan_final[1]
        sub = float(np.linalg.norm(pure - embedded))
        budget = eps[i - 1] if i % 2 == 0 else 1.5 * eps[i - 1]
        stage_certs.append(StageCertificate.from_values(
            "substitution_defect", i, budget, sub,
            detail="rewritten product vs the stage ratchet channel"))
        # the two-step recursion re-verified with measured components
        lhs = float(np.linalg.norm(states[i] - _unit(n_e, i)))
        rhs = float(np.linalg.norm(states[i - 1] - _unit(n_e, i - 1))) + measured
        stage_certs.append(StageCertificate(
            "two_step_recursion", i, rhs + 1e-12, lhs, lhs <= rhs + 1e-12,
            detail="next distance below previous plus the stage error"))

    ends = [states[i] for i in range(0, stages + 1)]
    min_sep = math.inf
    for a in range(len(ends)):
        for b in range(a + 1, len(ends)):
            min_sep = min(min_sep, float(np.linalg.norm(ends[a] - ends[b])))
    separation = StageCertificate(
        "separation", 0, SEPARATION_FLOOR - 1e-6, min_sep,
        min_sep >= SEPARATION_FLOOR - 1e-6,
        detail="minimum pairwise distance of stage-end iterates")
    return trajectory_certs, stage_certs, separation


def _build_word(asm: StageAssembly, interp: InterpolationResult) -> Word:
    parts = []
    marks = []
    stages = 2 * asm.plan.stages
    by_stage: dict[int, list] = {i: [] for i in range(1, stages + 1)}
    for m_idx, member in enumerate(asm.members):
        if member.role is None:
            continue
        i, s = member.role
        k = (i + 1) // 2
        sd = asm.stages[k - 1]
        outer = (sd.u_plan.exponents[s - 1] if i % 2 == 1
                 else sd.v_plan.exponents[s - 1])
        p = interp.schedule.exponents[m_idx]
        by_stage[i].append((s, sandwich_power(p, outer)))
    for i in range(1, stages + 1):
        for _s, block in sorted(by_stage[i], key=lambda t: t[0]):
            parts.append(block)
        marks.append(len(parts))
    return Word(parts=tuple(parts), stage_marks=tuple(marks))


def _certify_word(asm: StageAssembly, word: Word) -> list[StageCertificate]:
    used = word.generators_used()
    gen_ok = used <= {1, 2, 3} and used == {1, 2, 3}
    certs = [StageCertificate(
        "word_generators", 0, 1.0, 0.0 if gen_ok else 1.0, gen_ok,
        detail="letters drawn from the three generators only")]
    total = word.letter_count()
    certs.append(StageCertificate(
        "word_letters", 0, math.inf, float(min(total, 10**308)), True,
        detail=f"flattened letter count {_format_big(total)}"))
    return certs


def _format_big(n: int) -> str:
    if n < 10**18:
        return str(n)
    return f"~1e{int(math.log10(n))}"


# ---------------------------------------------------------------------------
# trajectory extraction


@dataclass(frozen=True)
class TrajectoryRow:
    step: int
    generator: int
    norm: float
    dist_to_target: float


def run_trajectory(witness: DivergenceWitness,
                   letter_cap: int = 200_000) -> list[TrajectoryRow]:
    """Iterates of the start vector under the word.

    Letter-level when the flat word fits under the cap; otherwise one row
    per rewritten stage factor (each ends with the range projection, so
    the recorded state is the vector after that generator block).
    """
    try:
        return _letter_trajectory(witness, letter_cap)
    except WordTooLong:
        return _factor_trajectory(witness)


def _letter_trajectory(witness: DivergenceWitness, cap: int) -> list[TrajectoryRow]:
    from .words import flatten

    letters = flatten(witness.word.parts, cap)
    mats = {1: witness.q1.matrix, 2: witness.q2.matrix, 3: witness.q3.matrix}
    targets = _stage_targets(witness)
    v = witness.x.copy()
    rows = []
    boundaries = _letter_stage_boundaries(witness)
    stage = 0
    for step, g in enumerate(letters, start=1):
        v = mats[g] @ v
        while stage < len(boundaries) and step >= boundaries[stage]:
            stage += 1
        # during stage i the chain drives toward the (i+1)-th pair axis
        target = targets[min(stage + 1, len(targets) - 1)]
        rows.append(TrajectoryRow(step, g, float(np.linalg.norm(v)),
                                  float(np.linalg.norm(v - target))))
    return rows


def _letter_stage_boundaries(witness: DivergenceWitness) -> list[int]:
    from .words import letter_count

    counts = []
    total = 0
    mark_prev = 0
    for mark in witness.word.stage_marks:
        total += sum(letter_count(p) for p in witness.word.parts[mark_prev:mark])
        counts.append(total)
        mark_prev = mark
    return counts


def _stage_targets(witness: DivergenceWitness) -> list[np.ndarray]:
    plan = witness.assembly.plan
    dim = plan.total_dim
    out = []
    for i in range(1, 2 * plan.stages + 2):
        t = np.zeros(dim)
        t[plan.e_indices[i - 1]] = 1.0
        out.append(t)
    return out


def _factor_trajectory(witness: DivergenceWitness) -> list[TrajectoryRow]:
    n_e = len(witness.assembly.plan.e_indices)
    x = _unit(n_e, 0)
    rows = []
    step = 0
    for i in range(1, 2 * witness.assembly.plan.stages + 1):
        target = _unit(n_e, i)
        for wf in witness.factors:
            if wf.role[0] != i:
                continue
            x = wf.factor.apply_power(x, wf.outer_exponent)
            step += 1
            rows.append(TrajectoryRow(step, 1, float(np.linalg.norm(x)),
                                      float(np.linalg.norm(x - target))))
    return rows


def non_cauchy_certificate(stage_states) -> tuple[float, bool]:
    """Minimum pairwise distance of stage-end iterates vs the floor."""
    states = list(stage_states)
    if len(states) < 2:
        raise ValueError("need at least two stage-end iterates")
    min_sep = math.inf
    for a in range(len(states)):
        for b in range(a + 1, len(states)):
            min_sep = min(min_sep, float(np.linalg.norm(
                np.asarray(states[a]) - np.asarray(states[b]))))
    return min_sep, min_sep >= SEPARATION_FLOOR - 1e-6
