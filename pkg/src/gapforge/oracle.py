"""Independent ground truth: exhaustive optima, layer sweeps, tail bounds,
and seeded statistical estimation.

Everything here is exact (rational counts over full enumerations) or a pure
formula; nothing in this module depends on the constructions it is used to
check.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .csp import CspInstance
from .errors import ResourceCapError
from .util import (
    derive_seed,
    floor_frac,
    parallel_map,
    threshold_count,
    wilson_interval,
)

DEFAULT_ASSIGNMENT_CAP = 24
LAYER_WIDTH_CAP = 22
_CHUNK = 1 << 20


@dataclass(frozen=True)
class OracleReport:
    """Exact optimum of an instance with a witness assignment.

    wall_time is informational only and never serialized into reports.
    """

    optimum: Fraction
    argmax: tuple
    enumeration_size: int
    degenerate: bool
    wall_time: float

    def to_doc(self) -> dict:
        return {
            "optimum": f"{self.optimum.numerator}/{self.optimum.denominator}",
            "argmax": "".join(map(str, self.argmax)),
            "enumeration_size": self.enumeration_size,
            "degenerate": self.degenerate,
        }


def clause_sat_matrix(inst: CspInstance, assignments: np.ndarray) -> np.ndarray:
    """Rows: clauses, columns: assignment integers (bit v = variable v)."""
    out = np.empty((inst.num_clauses, assignments.size), dtype=np.uint8)
    for row, clause in enumerate(inst.clauses):
        idx = np.zeros(assignments.size, dtype=np.int64)
        for v in clause.scope:
            idx = (idx << 1) | ((assignments >> v) & 1).astype(np.int64)
        table = np.array(clause.table_bits(), dtype=np.uint8)
        out[row] = table[idx]
    return out


def satisfied_counts_vector(inst: CspInstance, assignments: np.ndarray) -> np.ndarray:
    """Number of satisfied clauses for each assignment integer."""
    if inst.num_clauses == 0:
        return np.zeros(assignments.size, dtype=np.int64)
    return clause_sat_matrix(inst, assignments).sum(axis=0, dtype=np.int64)


def brute_force_opt(inst: CspInstance, cap: int = DEFAULT_ASSIGNMENT_CAP) -> OracleReport:
    """Exact maximum satisfied fraction over all 2^n assignments.

    Ties break toward the lowest assignment integer (variable 0 = LSB).
    """
    start = time.perf_counter()
    if inst.num_vars > cap:
        raise ResourceCapError(
            f"{inst.num_vars} variables exceeds enumeration cap {cap}"
        )
    if inst.degenerate:
        return OracleReport(
            optimum=Fraction(1),
            argmax=tuple([0] * inst.num_vars),
            enumeration_size=0,
            degenerate=True,
            wall_time=time.perf_counter() - start,
        )
    best_count = -1
    best_assignment = 0
    total = 1 << inst.num_vars
    for lo in range(0, total, _CHUNK):
        hi = min(lo + _CHUNK, total)
        block = np.arange(lo, hi, dtype=np.uint64)
        counts = satisfied_counts_vector(inst, block)
        j = int(np.argmax(counts))
        if counts[j] > best_count:
            best_count = int(counts[j])
            best_assignment = lo + j
    bits = tuple((best_assignment >> v) & 1 for v in range(inst.num_vars))
    return OracleReport(
        optimum=Fraction(best_count, inst.num_clauses),
        argmax=bits,
        enumeration_size=total,
        degenerate=False,
        wall_time=time.perf_counter() - start,
    )


def is_satisfiable(inst: CspInstance, cap: int = DEFAULT_ASSIGNMENT_CAP) -> bool:
    """Whether some assignment satisfies every clause; early-exits the sweep."""
    if inst.num_vars > cap:
        raise ResourceCapError(
            f"{inst.num_vars} variables exceeds enumeration cap {cap}"
        )
    if inst.degenerate:
        return True
    total = 1 << inst.num_vars
    m = inst.num_clauses
    for lo in range(0, total, _CHUNK):
        hi = min(lo + _CHUNK, total)
        block = np.arange(lo, hi, dtype=np.uint64)
        if (satisfied_counts_vector(inst, block) == m).any():
            return True
    return False


@dataclass(frozen=True)
class LayerCheckReport:
    passed: bool
    width: int
    num_gates: int
    strings_checked: int
    worst_output_count: int
    worst_output_mean: Fraction
    witness: tuple | None

    def to_doc(self) -> dict:
        return {
            "passed": self.passed,
            "width": self.width,
            "num_gates": self.num_gates,
            "strings_checked": self.strings_checked,
            "worst_output_count": self.worst_output_count,
            "worst_output_mean": f"{self.worst_output_mean.numerator}/{self.worst_output_mean.denominator}",
            "witness": None if self.witness is None else "".join(map(str, self.witness)),
        }


def exhaustive_layer_check(
    gates: Sequence,
    width: int,
    mean_in: Fraction,
    mean_out: Fraction,
    cap: int = LAYER_WIDTH_CAP,
) -> LayerCheckReport:
    """Sweep every width-bit string with mean <= mean_in through one layer of
    threshold gates and confirm the output mean never exceeds mean_out.

    Gates are anything with an `inputs` index sequence (multiset entries
    repeated) and a `theta` Fraction. The sweep extracts bits straight from
    assignment integers, deliberately not sharing code with the circuit
    module's own enumerator so the two can cross-validate.
    """
    if width > cap:
        raise ResourceCapError(f"layer width {width} exceeds cap {cap}")
    in_cap = floor_frac(mean_in * width)
    out_cap = floor_frac(mean_out * len(gates))
    thresholds = [threshold_count(g.theta, len(g.inputs)) for g in gates]
    worst_count = -1
    worst_string = None
    checked = 0
    total = 1 << width
    for lo in range(0, total, _CHUNK):
        hi = min(lo + _CHUNK, total)
        block = np.arange(lo, hi, dtype=np.uint64)
        mask = np.bitwise_count(block) <= in_cap
        if not mask.any():
            continue
        sel = block[mask]
        checked += sel.size
        fired = np.zeros(sel.size, dtype=np.int16)
        for g, thr in zip(gates, thresholds):
            ones = np.zeros(sel.size, dtype=np.int16)
            for p in g.inputs:
                ones += ((sel >> np.uint64(p)) & np.uint64(1)).astype(np.int16)
            fired += ones >= thr
        j = int(np.argmax(fired))
        if int(fired[j]) > worst_count:
            worst_count = int(fired[j])
            worst_string = int(sel[j])
    if worst_string is None:
        raise ValueError("no strings below the input-mean bound")
    witness_bits = tuple((worst_string >> i) & 1 for i in range(width))
    passed = worst_count <= out_cap
    return LayerCheckReport(
        passed=passed,
        width=width,
        num_gates=len(gates),
        strings_checked=checked,
        worst_output_count=worst_count,
        worst_output_mean=Fraction(worst_count, len(gates)),
        witness=None if passed else witness_bits,
    )


def chernoff_tail(kind: str, mu: Fraction, delta: Fraction, n: int) -> float:
    """Right-hand side of the multiplicative tail bounds used in reports.

    kind "bound-1-upper": exp(-d^2 mu n / 3), for 0 < d <= 1
    kind "bound-1-lower": exp(-d^2 mu n / 2), for 0 < d <= 1
    kind "bound-2":       (e^d / (1+d)^(1+d))^(mu n), for d >= 2

    These are reporting aids only; measurements never defer to them.
    """
    mu_f, d = float(mu), float(delta)
    if not (0 <= mu_f <= 1):
        raise ValueError("mu must lie in [0, 1]")
    if kind in ("bound-1-upper", "bound-1-lower"):
        if not (0 < d <= 1):
            raise ValueError(f"{kind} requires 0 < delta <= 1, got {d}")
        divisor = 3.0 if kind == "bound-1-upper" else 2.0
        return math.exp(-d * d * mu_f * n / divisor)
    if kind == "bound-2":
        if d < 2:
            raise ValueError(f"bound-2 requires delta >= 2, got {d}")
        return math.exp(mu_f * n * (d - (1 + d) * math.log1p(d)))
    raise ValueError(f"unknown bound kind {kind!r}")


def lll_condition(p: float, d: int) -> tuple[float, bool]:
    """Value of p*e*(d+1) and whether it is at most 1."""
    if not (0 <= p <= 1):
        raise ValueError("p must lie in [0, 1]")
    value = p * math.e * (d + 1)
    return value, value <= 1


@dataclass(frozen=True)
class EstimateReport:
    successes: int
    trials: int
    frequency: Fraction
    wilson_low: float
    wilson_high: float
    master_seed: int

    def to_doc(self) -> dict:
        return {
            "successes": self.successes,
            "trials": self.trials,
            "frequency": f"{self.frequency.numerator}/{self.frequency.denominator}",
            "wilson_low": self.wilson_low,
            "wilson_high": self.wilson_high,
            "master_seed": self.master_seed,
        }


def estimate(
    event: Callable[[int], bool],
    trials: int,
    master_seed: int,
    jobs: int = 1,
) -> EstimateReport:
    """Empirical frequency of a seeded event with a 99% Wilson interval.

    Trial i runs event(derive_seed(master_seed, i)); the success count is a
    plain sum, so chunking across workers cannot change the result.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    indices = list(range(trials))
    chunk = max(1, trials // max(1, jobs * 4))
    blocks = [indices[i : i + chunk] for i in range(0, trials, chunk)]

    def run_block(block: list[int]) -> int:
        return sum(1 for i in block if event(derive_seed(master_seed, i)))

    successes = sum(parallel_map(run_block, blocks, jobs))
    low, high = wilson_interval(successes, trials)
    return EstimateReport(
        successes=successes,
        trials=trials,
        frequency=Fraction(successes, trials),
        wilson_low=low,
        wilson_high=high,
        master_seed=master_seed,
    )
