"""Randomized reductions from gapped MAX 3SAT to perfectly-complete CSPs, and
the repeated-trial solver drivers built on them.

The two-sided reduction draws, per output clause, a uniform multiset of base
clauses and thresholds their satisfied fraction. The one-sided reduction
first samples a clause list, rejects it unless its occurrence counts are
balanced over every extremal clause subset (rejection yields a fixed NO
instance), and then thresholds over the sets of an expander-sampler family on
the list positions; a NO input can then never map to a YES-looking output.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .csp import Clause, CspInstance, csp_to_3sat
from .errors import GapforgeError, InfeasibleParametersError, ResourceCapError, ShapeMismatchError
from .oracle import chernoff_tail, clause_sat_matrix, lll_condition
from .sampler import (
    SamplerFamily,
    SamplerParams,
    build_full_family,
    intersection_degree,
)
from .util import derive_seed, floor_frac, frac_str, rng_from, threshold_count

DEFAULT_TABLE_CAP = 1 << 22


@dataclass(frozen=True)
class ReductionParams:
    """Gap (s, epsilon), sample scale k, list multiplier t, and master seed.

    The analysis regime normalizes epsilon below 1/100; desk-scale runs keep
    the raw gap because the sampler parameters it implies are unattainable at
    enumerable sizes (see paper_normalized)."""

    s: Fraction
    epsilon: Fraction
    k: int
    t: int
    seed: int
    rho: Fraction | None = None

    def __post_init__(self):
        if not (0 < self.s < 1):
            raise ValueError("s must lie in (0, 1)")
        if not (0 < self.epsilon):
            raise ValueError("epsilon must be positive")
        if self.s * (1 + self.epsilon) > 1:
            raise ValueError("s(1+epsilon) must not exceed 1")
        if self.k < 1 or self.t < 1:
            raise ValueError("k and t must be positive")

    @property
    def threshold(self) -> Fraction:
        return self.s * (1 + self.epsilon / 2)

    @property
    def k_condition_value(self) -> Fraction:
        return 1 / (self.s**2 * self.epsilon**2 * self.k)

    @property
    def k_condition_ok(self) -> bool:
        return self.k_condition_value <= Fraction(1, 2)

    def paper_normalized(self) -> "ReductionParams":
        """Shrink epsilon below 1/100 (the gap only gets harder)."""
        eps = min(self.epsilon, Fraction(1, 128))
        return replace(self, epsilon=eps)

    def with_base(self, base: CspInstance) -> "ReductionParams":
        return replace(self, rho=Fraction(base.num_clauses, base.num_vars))


@dataclass(frozen=True)
class ClauseList:
    """Multiset of base-clause indices of length t * m."""

    entries: tuple
    base_clauses: int
    t: int

    def __post_init__(self):
        if len(self.entries) != self.t * self.base_clauses:
            raise GapforgeError("list length must be t * m")
        if any(not (0 <= e < self.base_clauses) for e in self.entries):
            raise GapforgeError("list entry out of clause range")

    def occurrence_counts(self) -> np.ndarray:
        return np.bincount(
            np.asarray(self.entries, dtype=np.int64), minlength=self.base_clauses
        )


def sample_list(base: CspInstance, p: ReductionParams) -> ClauseList:
    """Seeded sampling with repetition; deterministic for a fixed seed."""
    m = base.num_clauses
    rng = rng_from(derive_seed(p.seed, 0x1157))
    entries = tuple(int(x) for x in rng.integers(0, m, size=p.t * m))
    return ClauseList(entries=entries, base_clauses=m, t=p.t)


def exact_repeat_list(base: CspInstance, t: int) -> ClauseList:
    """Degenerate deterministic mode: the base clause list repeated t times."""
    m = base.num_clauses
    return ClauseList(entries=tuple(range(m)) * t, base_clauses=m, t=t)


@dataclass(frozen=True)
class BalanceReport:
    balanced: bool
    heavy_ok: bool
    light_ok: bool
    heavy_size: int
    light_size: int
    heavy_sum: int
    light_sum: int
    heavy_bound: Fraction
    light_bound: Fraction
    heavy_witness: tuple
    light_witness: tuple
    floored: bool

    def to_doc(self) -> dict:
        return {
            "balanced": self.balanced,
            "heavy_ok": self.heavy_ok,
            "light_ok": self.light_ok,
            "heavy_size": self.heavy_size,
            "light_size": self.light_size,
            "heavy_sum": self.heavy_sum,
            "light_sum": self.light_sum,
            "heavy_bound": frac_str(self.heavy_bound),
            "light_bound": frac_str(self.light_bound),
            "floored": self.floored,
        }


def check_balanced(lst: ClauseList, p: ReductionParams) -> BalanceReport:
    """Exact extremal-subset check via sorted occurrence counts.

    The heaviest size-(s*m) subset must hold at most s(1+eps/3) of the list;
    the lightest size-(s(1+eps)*m) subset must hold at least s(1+2eps/3).
    Non-integral subset sizes are floored and flagged.
    """
    m = lst.base_clauses
    L = len(lst.entries)
    counts = lst.occurrence_counts()
    order = sorted(range(m), key=lambda j: (counts[j], j))
    heavy_size_frac = p.s * m
    light_size_frac = p.s * (1 + p.epsilon) * m
    heavy_size = floor_frac(heavy_size_frac)
    light_size = floor_frac(light_size_frac)
    floored = (heavy_size != heavy_size_frac) or (light_size != light_size_frac)
    heavy_witness = tuple(sorted(order[m - heavy_size :])) if heavy_size else ()
    light_witness = tuple(sorted(order[:light_size])) if light_size else ()
    heavy_sum = int(counts[list(heavy_witness)].sum()) if heavy_size else 0
    light_sum = int(counts[list(light_witness)].sum()) if light_size else 0
    heavy_bound = p.s * (1 + p.epsilon / 3) * L
    light_bound = p.s * (1 + 2 * p.epsilon / 3) * L
    heavy_ok = Fraction(heavy_sum) <= heavy_bound
    light_ok = Fraction(light_sum) >= light_bound
    return BalanceReport(
        balanced=heavy_ok and light_ok,
        heavy_ok=heavy_ok,
        light_ok=light_ok,
        heavy_size=heavy_size,
        light_size=light_size,
        heavy_sum=heavy_sum,
        light_sum=light_sum,
        heavy_bound=heavy_bound,
        light_bound=light_bound,
        heavy_witness=heavy_witness,
        light_witness=light_witness,
        floored=floored,
    )


def list_instance(base: CspInstance, lst: ClauseList) -> CspInstance:
    """The CSP whose clause list is the sampled list (repeats kept)."""
    return CspInstance(
        base.num_vars,
        tuple(base.clauses[j] for j in lst.entries),
        base.width,
    )


def canonical_no_instance(num_clauses: int) -> CspInstance:
    """Fixed rejection output with brute-force optimum exactly <= 1/2:
    complementary unit pairs on one fresh variable, plus one unsatisfiable
    clause when the clause count is odd."""
    pos = Clause((0,), 0b10)   # satisfied iff x0 = 1
    neg = Clause((0,), 0b01)   # satisfied iff x0 = 0
    never = Clause((0,), 0b00)
    clauses = []
    for i in range(num_clauses // 2):
        clauses.extend((pos, neg))
    if num_clauses % 2:
        clauses.append(never)
    return CspInstance(1, tuple(clauses))


def _threshold_clause(
    base: CspInstance,
    sampled: Sequence[int],
    thr_count: int,
    table_cap: int,
) -> Clause:
    """Clause satisfied iff at least thr_count of the sampled base clauses
    (with multiplicity) hold; scope is the union of their variables."""
    scope = tuple(sorted({v for j in sampled for v in base.clauses[j].scope}))
    w = len(scope)
    if (1 << w) > table_cap:
        raise ResourceCapError(
            f"threshold clause scope of {w} variables exceeds table cap {table_cap}"
        )
    col = {v: i for i, v in enumerate(scope)}
    patterns = np.arange(1 << w, dtype=np.int64)
    mult = np.bincount(np.asarray(sampled, dtype=np.int64), minlength=base.num_clauses)
    sums = np.zeros(patterns.size, dtype=np.int64)
    for j in np.flatnonzero(mult):
        clause = base.clauses[j]
        idx = np.zeros(patterns.size, dtype=np.int64)
        for v in clause.scope:
            idx = (idx << 1) | ((patterns >> (w - 1 - col[v])) & 1)
        table = np.array(clause.table_bits(), dtype=np.int64)
        sums += int(mult[j]) * table[idx]
    ok = sums >= thr_count
    table_int = 0
    for row in np.flatnonzero(ok):
        table_int |= 1 << int(row)
    return Clause(scope=scope, table=table_int)


@dataclass(frozen=True)
class TwoSidedReport:
    params_seed: int
    num_clauses: int
    sample_size: int
    threshold: Fraction

    def to_doc(self) -> dict:
        return {
            "reduction": "two-sided",
            "seed": self.params_seed,
            "num_clauses": self.num_clauses,
            "sample_size": self.sample_size,
            "threshold": frac_str(self.threshold),
        }


def reduce_two_sided(
    base: CspInstance,
    p: ReductionParams,
    table_cap: int = DEFAULT_TABLE_CAP,
) -> tuple[CspInstance, TwoSidedReport]:
    """One threshold clause per variable, each over k uniform samples (with
    replacement) of the base clauses.

    Accepts any truth-table base (the threshold machinery never looks inside
    clauses), though the intended inputs are bounded-width SAT instances.
    """
    n, m = base.num_vars, base.num_clauses
    rng = rng_from(derive_seed(p.seed, 0x25ED))
    draws = rng.integers(0, m, size=(n, p.k))
    thr_count = threshold_count(p.threshold, p.k)
    clauses = [
        _threshold_clause(base, [int(x) for x in row], thr_count, table_cap)
        for row in draws
    ]
    inst = CspInstance(n, tuple(clauses))
    return inst, TwoSidedReport(
        params_seed=p.seed,
        num_clauses=n,
        sample_size=p.k,
        threshold=p.threshold,
    )


def reduction_family_params(p: ReductionParams) -> SamplerParams:
    """The sampler parameters the one-sided reduction requires: deviation
    budget 1/(s^2 eps^2 k) at deviation s*eps.

    The spectral target comes from the walk-operator variance bound: on a
    graph with second eigenvalue lambda, at most a lambda^2/(4 eps^2) fraction
    of neighbor sets can deviate by more than eps on any string, so
    lambda <= 2 eps sqrt(delta) makes the deviation property unconditional.
    The implied degree is Theta(1/(delta eps^2)) = Theta(k).
    """
    delta = p.k_condition_value
    if not delta < 1:
        raise InfeasibleParametersError(
            f"sampler failure budget 1/(s^2 eps^2 k) = {delta} is not below 1; "
            "increase k"
        )
    eps = p.s * p.epsilon
    target = min(0.97, 2.0 * float(eps) * float(delta) ** 0.5)
    return SamplerParams(
        epsilon=eps, delta=delta, gamma=Fraction(1, 2), target_lambda=target
    )


def reduction_family(
    p: ReductionParams,
    list_length: int,
    seed: int,
    degree_schedule: Sequence[int] | None = None,
) -> SamplerFamily:
    """Full expander-sampler family over the list positions."""
    return build_full_family(
        reduction_family_params(p), list_length, seed, degree_schedule
    )


def _validate_family(fam: SamplerFamily, p: ReductionParams, list_length: int):
    if fam.ground_size != list_length or len(fam.sets) != list_length:
        raise ShapeMismatchError(
            f"family must hold {list_length} sets over {list_length} positions, "
            f"got {len(fam.sets)} over {fam.ground_size}"
        )
    want = reduction_family_params(p)
    if fam.params.epsilon != want.epsilon or fam.params.delta != want.delta:
        raise ShapeMismatchError(
            "family parameters do not match the reduction: expected "
            f"(eps={want.epsilon}, delta={want.delta}), got "
            f"(eps={fam.params.epsilon}, delta={fam.params.delta})"
        )


@dataclass(frozen=True)
class OneSidedReport:
    seed: int
    balance: BalanceReport
    rejected_unbalanced: bool
    list_length: int
    set_size: int
    threshold: Fraction
    k_condition_value: Fraction
    k_condition_ok: bool
    intersection_degree: int
    per_clause_failure_estimate: float
    lll_value: float
    lll_ok: bool

    def to_doc(self) -> dict:
        return {
            "reduction": "one-sided",
            "seed": self.seed,
            "balance": self.balance.to_doc(),
            "rejected_unbalanced": self.rejected_unbalanced,
            "list_length": self.list_length,
            "set_size": self.set_size,
            "threshold": frac_str(self.threshold),
            "k_condition_value": frac_str(self.k_condition_value),
            "k_condition_ok": self.k_condition_ok,
            "intersection_degree": self.intersection_degree,
            "per_clause_failure_estimate": self.per_clause_failure_estimate,
            "lll_value": self.lll_value,
            "lll_ok": self.lll_ok,
        }


def _lll_numbers(p: ReductionParams, fam: SamplerFamily) -> tuple[int, float, float, bool]:
    d = intersection_degree(fam)
    mu = p.s * (1 + p.epsilon)
    rel = (p.epsilon / 2) / (1 + p.epsilon)
    p_est = chernoff_tail("bound-1-lower", mu, rel, fam.set_size)
    value, ok = lll_condition(p_est, d)
    return d, p_est, value, ok


def reduce_one_sided(
    base: CspInstance,
    p: ReductionParams,
    fam: SamplerFamily,
    table_cap: int = DEFAULT_TABLE_CAP,
) -> tuple[CspInstance, OneSidedReport]:
    """Balanced-list reduction. Unbalanced lists are rejected in favor of the
    canonical NO instance (flagged in the report), so NO inputs can never
    produce an instance with optimum above 1/2."""
    lst = sample_list(base, p)
    L = len(lst.entries)
    _validate_family(fam, p, L)
    balance = check_balanced(lst, p)
    d, p_est, lll_value, lll_ok = _lll_numbers(p, fam)
    report = OneSidedReport(
        seed=p.seed,
        balance=balance,
        rejected_unbalanced=not balance.balanced,
        list_length=L,
        set_size=fam.set_size,
        threshold=p.threshold,
        k_condition_value=p.k_condition_value,
        k_condition_ok=p.k_condition_ok,
        intersection_degree=d,
        per_clause_failure_estimate=p_est,
        lll_value=lll_value,
        lll_ok=lll_ok,
    )
    if not balance.balanced:
        return canonical_no_instance(L), report
    thr_count = threshold_count(p.threshold, fam.set_size)
    entries = lst.entries
    full_scope = tuple(range(base.num_vars))
    sampled_per_set = [[entries[pos] for pos in s] for s in fam.sets]
    scopes = [
        tuple(sorted({v for j in sampled for v in base.clauses[j].scope}))
        for sampled in sampled_per_set
    ]
    counts_mat = None
    if base.num_vars <= 16 and (1 << base.num_vars) <= table_cap:
        # batch path: one satisfied-count matrix serves every full-scope set
        cols = 1 << base.num_vars
        M = clause_sat_matrix(base, np.arange(cols, dtype=np.uint64)).astype(
            np.float32
        )
        A = fam.incidence().astype(np.float32)
        ind = np.zeros((L, base.num_clauses), dtype=np.float32)
        ind[np.arange(L), np.asarray(entries)] = 1.0
        counts_mat = (A @ ind) @ M
        revidx = np.zeros(cols, dtype=np.int64)
        for j in range(cols):
            revidx[j] = int(
                format(j, f"0{base.num_vars}b")[::-1], 2
            )
    clauses = []
    for i, sampled in enumerate(sampled_per_set):
        if counts_mat is not None and scopes[i] == full_scope:
            bits = counts_mat[i][revidx] >= float(thr_count)
            table_int = int.from_bytes(
                np.packbits(bits.astype(np.uint8), bitorder="little").tobytes(),
                "little",
            )
            clauses.append(Clause(scope=full_scope, table=table_int))
        else:
            clauses.append(_threshold_clause(base, sampled, thr_count, table_cap))
    return CspInstance(base.num_vars, tuple(clauses)), report


# ---------------------------------------------------------------------------
# solver drivers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DriverReport:
    answer: bool
    yes_trial: int | None
    trials_run: int
    trials_requested: int
    outcomes: tuple  # per-trial "Y" / "n" / "u" (unbalanced rejection)

    def to_doc(self) -> dict:
        return {
            "answer": "YES" if self.answer else "NO",
            "yes_trial": self.yes_trial,
            "trials_run": self.trials_run,
            "trials_requested": self.trials_requested,
            "outcomes": "".join(self.outcomes),
        }


def solve_driver(
    base: CspInstance,
    p: ReductionParams,
    trials: int,
    subroutine: Callable[[CspInstance], bool],
    reduction: str = "one-sided",
    fam: SamplerFamily | None = None,
    convert_to_3sat: bool = False,
    table_cap: int = DEFAULT_TABLE_CAP,
) -> DriverReport:
    """Repeat the chosen reduction with per-trial seeds derived from
    (p.seed, trial index) and return YES iff any output is accepted by the
    perfect-completeness subroutine.

    The subroutine receives the threshold CSP directly by default; pass
    convert_to_3sat=True when plugging a decider that expects 3SAT (the
    conversion's auxiliary variables put converted instances beyond the
    brute-force oracle, which exploits nothing and enumerates everything).
    """
    if reduction not in ("one-sided", "two-sided"):
        raise ValueError(f"unknown reduction {reduction!r}")
    if reduction == "one-sided" and fam is None:
        fam = reduction_family(
            p, p.t * base.num_clauses, derive_seed(p.seed, 0xFA11)
        )
    outcomes = []
    for trial in range(trials):
        p_t = replace(p, seed=derive_seed(p.seed, trial))
        if reduction == "one-sided":
            inst, rep = reduce_one_sided(base, p_t, fam, table_cap)
            rejected = rep.rejected_unbalanced
        else:
            inst, _ = reduce_two_sided(base, p_t, table_cap)
            rejected = False
        if convert_to_3sat:
            inst, _ = csp_to_3sat(inst, table_cap)
        try:
            verdict = subroutine(inst)
        except Exception as exc:
            raise GapforgeError(f"subroutine failed on trial {trial}: {exc}") from exc
        if verdict:
            outcomes.append("Y")
            return DriverReport(
                answer=True,
                yes_trial=trial,
                trials_run=trial + 1,
                trials_requested=trials,
                outcomes=tuple(outcomes),
            )
        outcomes.append("u" if rejected else "n")
    return DriverReport(
        answer=False,
        yes_trial=None,
        trials_run=trials,
        trials_requested=trials,
        outcomes=tuple(outcomes),
    )


# ---------------------------------------------------------------------------
# vectorized trial sweep (used by the statistical acceptance checks)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepReport:
    trials: int
    balanced_trials: int
    max_optimum: Fraction
    optima_above_half: int
    optima_at_one: int
    worst_trial: int

    def to_doc(self) -> dict:
        return {
            "trials": self.trials,
            "balanced_trials": self.balanced_trials,
            "max_optimum": frac_str(self.max_optimum),
            "optima_above_half": self.optima_above_half,
            "optima_at_one": self.optima_at_one,
            "worst_trial": self.worst_trial,
        }


def two_sided_sweep(
    base: CspInstance,
    p: ReductionParams,
    trials: int,
) -> SweepReport:
    """Exact output optima of the two-sided reduction over seeded trials.

    Trial i reproduces reduce_two_sided at seed derive_seed(p.seed, i); used
    to chart how the NO-side failure frequency falls as k grows.
    """
    if base.num_vars > 16:
        raise ResourceCapError("sweep enumerates 2^n columns; need n <= 16")
    n, m = base.num_vars, base.num_clauses
    cols = 1 << n
    M = clause_sat_matrix(base, np.arange(cols, dtype=np.uint64)).astype(np.float32)
    thr_count = threshold_count(p.threshold, p.k)
    best = Fraction(0)
    worst_trial = -1
    above_half = 0
    at_one = 0
    half = Fraction(1, 2)
    for trial in range(trials):
        seed = derive_seed(derive_seed(p.seed, trial), 0x25ED)
        draws = rng_from(seed).integers(0, m, size=(n, p.k))
        mult = np.zeros((n, m), dtype=np.float32)
        for i in range(n):
            np.add.at(mult[i], draws[i], 1.0)
        counts = mult @ M
        sat = counts >= float(thr_count)
        opt = Fraction(int(sat.sum(axis=0, dtype=np.int64).max()), n)
        if opt > best:
            best = opt
            worst_trial = trial
        if opt >= half:
            above_half += 1
        if opt == 1:
            at_one += 1
    return SweepReport(
        trials=trials,
        balanced_trials=trials,
        max_optimum=best,
        optima_above_half=above_half,
        optima_at_one=at_one,
        worst_trial=worst_trial,
    )


def one_sided_sweep(
    base: CspInstance,
    p: ReductionParams,
    fam: SamplerFamily,
    trials: int,
) -> SweepReport:
    """Exact brute-force optimum of the one-sided reduction's output for many
    seeded trials, computed with one incidence matrix and per-trial gathers.

    Trial i reproduces reduce_one_sided with seed derive_seed(p.seed, i); the
    test suite cross-validates sampled trials against the object-level path.
    """
    if base.num_vars > 16:
        raise ResourceCapError("sweep enumerates 2^n columns; need n <= 16")
    m = base.num_clauses
    L_len = p.t * m
    _validate_family(fam, p, L_len)
    cols = 1 << base.num_vars
    M = clause_sat_matrix(base, np.arange(cols, dtype=np.uint64)).astype(np.float32)
    A = fam.incidence().astype(np.float32)
    thr_count = threshold_count(p.threshold, fam.set_size)
    heavy_size = floor_frac(p.s * m)
    light_size = floor_frac(p.s * (1 + p.epsilon) * m)
    heavy_bound = p.s * (1 + p.epsilon / 3) * L_len
    light_bound = p.s * (1 + 2 * p.epsilon / 3) * L_len
    canonical_opt = Fraction(L_len // 2, L_len)
    best = Fraction(0)
    worst_trial = -1
    balanced_trials = 0
    above_half = 0
    at_one = 0
    half = Fraction(1, 2)
    for trial in range(trials):
        seed = derive_seed(derive_seed(p.seed, trial), 0x1157)
        entries = rng_from(seed).integers(0, m, size=L_len)
        counts = np.bincount(entries, minlength=m)
        counts_sorted = np.sort(counts)
        heavy_sum = int(counts_sorted[m - heavy_size :].sum()) if heavy_size else 0
        light_sum = int(counts_sorted[:light_size].sum()) if light_size else 0
        if not (Fraction(heavy_sum) <= heavy_bound and Fraction(light_sum) >= light_bound):
            opt = canonical_opt
        else:
            balanced_trials += 1
            ind = np.zeros((L_len, m), dtype=np.float32)
            ind[np.arange(L_len), entries] = 1.0
            counts_mat = (A @ ind) @ M
            sat = counts_mat >= float(thr_count)
            opt = Fraction(int(sat.sum(axis=0, dtype=np.int64).max()), L_len)
        if opt > best:
            best = opt
            worst_trial = trial
        if opt > half:
            above_half += 1
        if opt == 1:
            at_one += 1
    return SweepReport(
        trials=trials,
        balanced_trials=balanced_trials,
        max_optimum=best,
        optima_above_half=above_half,
        optima_at_one=at_one,
        worst_trial=worst_trial,
    )
