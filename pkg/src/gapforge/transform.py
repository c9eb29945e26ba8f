"""Wrapping a base CSP into a perfectly complete proof system.

The new proof is the assignment followed by one claimed bit per circuit gate
(layer 0 is the m clause evaluations). The verifier draws j uniformly from
[m] and checks, for the duplicated gate j mod w_i of every layer, that the
claimed bit matches its recomputation from the claimed previous layer, that
the clause evaluation matches the claimed layer-0 bit, and that the claimed
top bit along this path is 1. Acceptance probabilities are exact rationals
obtained by running all m checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .circuit import GoodnessCertificate, RobustCircuit, circuit_digest, evaluate_layer
from .csp import Clause, CspInstance, evaluate_clause
from .errors import (
    GapforgeError,
    MissingCertificateError,
    ResourceCapError,
    ShapeMismatchError,
)
from .oracle import clause_sat_matrix
from .util import derive_seed, rng_from

DEFAULT_ADVERSARY_CAP = 24


@dataclass(frozen=True)
class ProofString:
    """Assignment bits plus claimed layer strings l_0..l_d."""

    x: tuple
    layers: tuple

    @property
    def total_bits(self) -> int:
        return len(self.x) + sum(len(l) for l in self.layers)

    def to_bits(self) -> tuple:
        out = list(self.x)
        for l in self.layers:
            out.extend(l)
        return tuple(out)

    def to_int(self) -> int:
        return sum(b << i for i, b in enumerate(self.to_bits()))


@dataclass(frozen=True)
class Accounting:
    proof_length: int
    randomness_strings: int
    randomness_bits: int | None
    per_check_queries: tuple
    query_bound: int

    def to_doc(self) -> dict:
        return {
            "proof_length": self.proof_length,
            "randomness_strings": self.randomness_strings,
            "randomness_bits": self.randomness_bits,
            "max_queries": max(self.per_check_queries),
            "min_queries": min(self.per_check_queries),
            "query_bound": self.query_bound,
        }


@dataclass(frozen=True)
class VerifierCheck:
    index: int
    gate_refs: tuple  # (layer, gate index) for layers 1..d
    transcript: tuple  # sorted distinct proof positions read


@dataclass
class TransformedSystem:
    """Immutable bundle of base instance, circuit, and the check family."""

    base: CspInstance
    circuit: RobustCircuit
    certificate: GoodnessCertificate | None
    certificate_waived: bool
    accounting: Accounting

    @property
    def num_checks(self) -> int:
        return self.base.num_clauses

    def layer_widths(self) -> list[int]:
        return [self.circuit.m] + self.circuit.widths()

    def layer_offset(self, i: int) -> int:
        return self.base.num_vars + sum(self.layer_widths()[:i])

    @property
    def proof_length(self) -> int:
        return self.base.num_vars + sum(self.layer_widths())

    def check(self, j: int) -> VerifierCheck:
        widths = self.layer_widths()
        refs = tuple(
            (i, j % widths[i]) for i in range(1, self.circuit.depth + 1)
        )
        positions = set(self.base.clauses[j].scope)
        positions.add(self.layer_offset(0) + j % widths[0])
        for i, g in refs:
            gate = self.circuit.layers[i - 1][g]
            off_prev = self.layer_offset(i - 1)
            positions.update(off_prev + p for p in gate.inputs)
            positions.add(self.layer_offset(i) + g)
        return VerifierCheck(index=j, gate_refs=refs, transcript=tuple(sorted(positions)))


def transform(
    base: CspInstance,
    circuit: RobustCircuit,
    certificate: GoodnessCertificate | None = None,
    waive_certificate: bool = False,
) -> TransformedSystem:
    """Build the check family and its accounting.

    Requires a passing goodness certificate for this exact circuit unless the
    caller explicitly waives it. Asserts the query and length accounting on
    every check as it is built.
    """
    if circuit.m != base.num_clauses:
        raise ShapeMismatchError(
            f"circuit has m={circuit.m} but instance has {base.num_clauses} clauses"
        )
    if certificate is None:
        if not waive_certificate:
            raise MissingCertificateError(
                "no goodness certificate attached; pass waive_certificate=True to override"
            )
    else:
        if certificate.circuit_digest != circuit_digest(circuit):
            raise MissingCertificateError("certificate was issued for a different circuit")
        if not certificate.passed:
            raise MissingCertificateError("certificate verdict is fail")
    ts = TransformedSystem(
        base=base,
        circuit=circuit,
        certificate=certificate,
        certificate_waived=certificate is None,
        accounting=Accounting(0, 0, None, (), 0),
    )
    m = base.num_clauses
    d = circuit.depth
    fan_ins = [max(len(g.inputs) for g in layer) for layer in circuit.layers]
    bound_extra = sum(fan_ins) + d + 1
    queries = []
    for j in range(m):
        chk = ts.check(j)
        q = len(chk.transcript)
        if q > base.clauses[j].arity + bound_extra:
            raise GapforgeError(f"check {j} reads {q} positions, over the bound")
        queries.append(q)
    r = m.bit_length() - 1 if m & (m - 1) == 0 else None
    ts.accounting = Accounting(
        proof_length=ts.proof_length,
        randomness_strings=m,
        randomness_bits=r,
        per_check_queries=tuple(queries),
        query_bound=base.width + bound_extra,
    )
    return ts


def honest_proof(ts: TransformedSystem, assignment: Sequence[int]) -> ProofString:
    """Clause evaluations at layer 0, true gate outputs above."""
    if len(assignment) != ts.base.num_vars:
        raise ShapeMismatchError("assignment length does not match the instance")
    l0 = tuple(evaluate_clause(c, assignment) for c in ts.base.clauses)
    layers = [l0]
    current = np.asarray(l0, dtype=np.uint8)
    for layer in range(1, ts.circuit.depth + 1):
        current = evaluate_layer(ts.circuit, layer, current)
        layers.append(tuple(int(b) for b in current))
    return ProofString(x=tuple(int(b) for b in assignment), layers=tuple(layers))


def _validate_shape(ts: TransformedSystem, proof: ProofString):
    if len(proof.x) != ts.base.num_vars:
        raise ShapeMismatchError("proof assignment part has the wrong length")
    widths = ts.layer_widths()
    if len(proof.layers) != len(widths) or any(
        len(l) != w for l, w in zip(proof.layers, widths)
    ):
        raise ShapeMismatchError("proof layer strings do not match circuit widths")


@dataclass(frozen=True)
class CheckResult:
    accepted: bool
    transcript: tuple
    failed_conjunct: str | None


def run_check(ts: TransformedSystem, j: int, proof: ProofString) -> CheckResult:
    """Run verifier check j against a proof; the transcript lists every proof
    position the check reads regardless of where it fails."""
    _validate_shape(ts, proof)
    chk = ts.check(j)
    failed = None
    if evaluate_clause(ts.base.clauses[j], proof.x) != proof.layers[0][j]:
        failed = "clause-vs-layer0"
    for i, g in chk.gate_refs:
        gate = ts.circuit.layers[i - 1][g]
        ones = sum(proof.layers[i - 1][p] for p in gate.inputs)
        recomputed = 1 if ones >= gate.fire_count else 0
        if recomputed != proof.layers[i][g] and failed is None:
            failed = f"gate-layer{i}"
    top_g = j % len(proof.layers[-1])
    if proof.layers[-1][top_g] != 1 and failed is None:
        failed = "top-bit"
    return CheckResult(accepted=failed is None, transcript=chk.transcript, failed_conjunct=failed)


def _accept_vector(ts: TransformedSystem, proof: ProofString) -> np.ndarray:
    """Vector over j of check outcomes; one layer evaluation serves all j."""
    m = ts.base.num_clauses
    clause_ok = np.array(
        [
            evaluate_clause(c, proof.x) == proof.layers[0][j]
            for j, c in enumerate(ts.base.clauses)
        ],
        dtype=bool,
    )
    accept = clause_ok
    widths = ts.layer_widths()
    j_idx = np.arange(m)
    for i in range(1, ts.circuit.depth + 1):
        claimed_prev = np.asarray(proof.layers[i - 1], dtype=np.uint8)
        recomputed = evaluate_layer(ts.circuit, i, claimed_prev)
        claimed = np.asarray(proof.layers[i], dtype=np.uint8)
        g = j_idx % widths[i]
        accept = accept & (recomputed[g] == claimed[g])
    top = np.asarray(proof.layers[-1], dtype=np.uint8)
    accept = accept & (top[j_idx % widths[-1]] == 1)
    return accept


def acceptance_probability(ts: TransformedSystem, proof: ProofString) -> Fraction:
    """Exact fraction of accepting checks under uniform j."""
    _validate_shape(ts, proof)
    acc = _accept_vector(ts, proof)
    return Fraction(int(acc.sum()), ts.base.num_clauses)


@dataclass(frozen=True)
class AdversaryReport:
    value: Fraction
    witness: ProofString
    proofs_enumerated: int


def proof_from_int(ts: TransformedSystem, value: int) -> ProofString:
    n = ts.base.num_vars
    widths = ts.layer_widths()
    bits = [(value >> i) & 1 for i in range(n + sum(widths))]
    x = tuple(bits[:n])
    layers = []
    pos = n
    for w in widths:
        layers.append(tuple(bits[pos : pos + w]))
        pos += w
    return ProofString(x=x, layers=tuple(layers))


def exhaustive_adversary(
    ts: TransformedSystem, cap: int = DEFAULT_ADVERSARY_CAP
) -> AdversaryReport:
    """Exact max acceptance over all 2^bits proofs, with the lowest-valued
    maximizing proof as witness."""
    bits = ts.proof_length
    if bits > cap:
        raise ResourceCapError(f"{bits} proof bits exceeds adversary cap {cap}")
    m = ts.base.num_clauses
    widths = ts.layer_widths()
    d = ts.circuit.depth
    n = ts.base.num_vars
    offsets = [ts.layer_offset(i) for i in range(d + 1)]
    best_count, best_proof = -1, 0
    chunk = 1 << 20
    total = 1 << bits
    for lo in range(0, total, chunk):
        hi = min(lo + chunk, total)
        block = np.arange(lo, hi, dtype=np.uint64)
        x_as_int = block & np.uint64((1 << n) - 1)
        clause_sat = clause_sat_matrix(ts.base, x_as_int)  # m x chunk
        layer_bits = []
        for i in range(d + 1):
            mat = np.empty((widths[i], block.size), dtype=np.uint8)
            for g in range(widths[i]):
                mat[g] = (block >> np.uint64(offsets[i] + g)) & np.uint64(1)
            layer_bits.append(mat)
        accept_count = np.zeros(block.size, dtype=np.int32)
        recomputed = []
        for i in range(1, d + 1):
            idx, thr = ts.circuit.layer_arrays(i)
            sums = layer_bits[i - 1][idx].sum(axis=1, dtype=np.int16)
            recomputed.append((sums >= thr[:, None]).astype(np.uint8))
        for j in range(m):
            ok = clause_sat[j] == layer_bits[0][j]
            for i in range(1, d + 1):
                g = j % widths[i]
                ok = ok & (recomputed[i - 1][g] == layer_bits[i][g])
            ok = ok & (layer_bits[d][j % widths[d]] == 1)
            accept_count += ok
        k = int(np.argmax(accept_count))
        if int(accept_count[k]) > best_count:
            best_count = int(accept_count[k])
            best_proof = lo + k
    return AdversaryReport(
        value=Fraction(best_count, m),
        witness=proof_from_int(ts, best_proof),
        proofs_enumerated=total,
    )


def greedy_adversary(
    ts: TransformedSystem, restarts: int = 8, seed: int = 0
) -> tuple[Fraction, ProofString]:
    """Seeded hill climb over proof bits; a lower bound on the exhaustive max."""
    bits = ts.proof_length
    n = ts.base.num_vars
    all_layers_ones = ((1 << (bits - n)) - 1) << n
    best_val = Fraction(-1)
    best_proof = proof_from_int(ts, 0)
    for r in range(restarts):
        rng = rng_from(derive_seed(seed, r))
        if r == 0:
            value = all_layers_ones  # claimed-all-ones region, zero assignment
        elif r == 1:
            value = all_layers_ones | ((1 << n) - 1)
        else:
            value = int.from_bytes(rng.bytes((bits + 7) // 8), "little") & ((1 << bits) - 1)
        proof = proof_from_int(ts, value)
        current = acceptance_probability(ts, proof)
        for _ in range(64):  # sweeps until a local optimum
            improved = False
            for b in range(bits):
                cand = proof_from_int(ts, value ^ (1 << b))
                v = acceptance_probability(ts, cand)
                if v > current:
                    value ^= 1 << b
                    proof, current = cand, v
                    improved = True
            if not improved:
                break
        if current > best_val:
            best_val, best_proof = current, proof
    return best_val, best_proof


def export_checks_csp(
    ts: TransformedSystem, table_cap: int = 1 << 22
) -> CspInstance:
    """The check family as a native truth-table CSP over the proof bits, so a
    transformed system can round-trip through the instance tooling."""
    clauses = []
    for j in range(ts.num_checks):
        chk = ts.check(j)
        w = len(chk.transcript)
        if (1 << w) > table_cap:
            raise ResourceCapError(
                f"check {j} reads {w} positions; table would exceed cap {table_cap}"
            )
        pos_to_col = {p: i for i, p in enumerate(chk.transcript)}
        patterns = np.arange(1 << w, dtype=np.uint64)
        # pattern bit for transcript column i sits at weight w-1-i (scope order)
        def bit_of(position: int) -> np.ndarray:
            col = pos_to_col[position]
            return ((patterns >> np.uint64(w - 1 - col)) & np.uint64(1)).astype(np.int64)

        clause = ts.base.clauses[j]
        idx = np.zeros(patterns.size, dtype=np.int64)
        for v in clause.scope:
            idx = (idx << 1) | bit_of(v)
        table = np.array(clause.table_bits(), dtype=np.uint8)
        clause_val = table[idx].astype(np.int64)
        l0_pos = ts.layer_offset(0) + j
        ok = clause_val == bit_of(l0_pos)
        for i, g in chk.gate_refs:
            gate = ts.circuit.layers[i - 1][g]
            off_prev = ts.layer_offset(i - 1)
            ones = np.zeros(patterns.size, dtype=np.int64)
            for p in gate.inputs:
                ones += bit_of(off_prev + p)
            recomputed = ones >= gate.fire_count
            claimed = bit_of(ts.layer_offset(i) + g) == 1
            ok &= recomputed == claimed
        top_pos = ts.layer_offset(ts.circuit.depth) + (j % ts.layer_widths()[-1])
        ok &= bit_of(top_pos) == 1
        table_int = 0
        for row in np.flatnonzero(ok):
            table_int |= 1 << int(row)
        clauses.append(Clause(scope=chk.transcript, table=table_int))
    return CspInstance(num_vars=ts.proof_length, clauses=tuple(clauses))


def soundness_summary(
    ts: TransformedSystem,
    cap: int = DEFAULT_ADVERSARY_CAP,
    greedy_restarts: int = 8,
    seed: int = 0,
) -> dict:
    """Exhaustive max when the proof fits the cap, otherwise a clearly labeled
    greedy lower bound next to the certificate-implied analytical target."""
    scheme = ts.circuit.scheme
    analytical = None if scheme is None else f"{scheme.new_soundness.numerator}/{scheme.new_soundness.denominator}"
    if ts.proof_length <= cap:
        rep = exhaustive_adversary(ts, cap)
        return {
            "mode": "exhaustive",
            "max_acceptance": f"{rep.value.numerator}/{rep.value.denominator}",
            "analytical_bound": analytical,
        }
    val, _ = greedy_adversary(ts, restarts=greedy_restarts, seed=seed)
    return {
        "mode": "greedy-lower-bound",
        "greedy_acceptance": f"{val.numerator}/{val.denominator}",
        "analytical_bound": analytical,
    }
