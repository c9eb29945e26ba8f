"""Layered threshold circuits that boost near-satisfying inputs to all-ones
while damping far-from-satisfying ones.

Two wirings are built here. The deterministic variant halves the width per
layer down to a single gate and wires each gate to the neighbor set of a
verified expander on the previous layer. The randomized variant has
ceil(log2 log2 m) layers and wires every gate to a uniform multiset of f
positions (sampled with replacement).

Desk-scale degrees: the asymptotic constant-size neighbor sets behind the
construction exceed every width this tool can enumerate, so the default
deterministic policy picks, per layer, the smallest degree for which the
damping and growth properties hold for *every* input string (adversarial
damping: no gate can fire on a <= mean_in input; growth: no gate can die on a
>= completeness input). Those degrees are a constant fraction of the layer
width; certification remains the arbiter and records what was built.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .csp import GapSpec
from .errors import GapforgeError, InfeasibleParametersError, ParseError
from .oracle import estimate
from .sampler import SamplerParams, build_expander, second_eigenvalue
from .util import (
    derive_seed,
    floor_frac,
    frac_str,
    parse_frac,
    rng_from,
    threshold_count,
)

LayerString = tuple  # 0/1 bits, one per gate of a layer

DEGENERATE_CUTOFF = 8
EXHAUSTIVE_CAP = 18


@dataclass(frozen=True)
class ThresholdScheme:
    """Gate threshold and layer-mean bounds derived from a (c, s) gap.

    With agreement slack a = (c - s)/3: honest inputs keep mean >= c, damping
    applies below mean_in = s + a down to mean_out = s, the gate threshold
    sits midway between c and mean_in, and the transformed soundness is
    1 - a. At the default gap (9/10, 6/10) this reproduces the fixed
    constants theta = 4/5, mean_in = 7/10, mean_out = 6/10, soundness 9/10.
    """

    completeness: Fraction = Fraction(9, 10)
    soundness: Fraction = Fraction(6, 10)

    def __post_init__(self):
        if not (0 < self.soundness < self.completeness <= 1):
            raise ValueError("need 0 < s < c <= 1")

    @property
    def slack(self) -> Fraction:
        return (self.completeness - self.soundness) / 3

    @property
    def mean_in(self) -> Fraction:
        return self.soundness + self.slack

    @property
    def mean_out(self) -> Fraction:
        return self.soundness

    @property
    def theta(self) -> Fraction:
        return (self.completeness + self.mean_in) / 2

    @property
    def new_soundness(self) -> Fraction:
        return 1 - self.slack

    @staticmethod
    def from_gap(gap: GapSpec) -> "ThresholdScheme":
        return ThresholdScheme(gap.completeness, gap.soundness)


DEFAULT_SCHEME = ThresholdScheme()


@dataclass(frozen=True)
class ThresholdGate:
    """Fires iff the mean of its (multiset) inputs is at least theta."""

    inputs: tuple[int, ...]
    theta: Fraction

    def __post_init__(self):
        if not self.inputs:
            raise GapforgeError("gate with no inputs")
        if not (0 < self.theta < 1):
            raise GapforgeError("theta must lie in (0, 1)")

    @property
    def fire_count(self) -> int:
        return threshold_count(self.theta, len(self.inputs))


@dataclass(frozen=True)
class LayerWiring:
    kind: str  # "sampler" | "full" | "random" | "parsed"
    degree: int | None = None
    measured_lambda: float | None = None


@dataclass
class RobustCircuit:
    """Immutable after construction; treat all fields as read-only."""

    m: int
    depth: int
    theta: Fraction
    variant: str  # "deterministic" | "randomized"
    layers: tuple[tuple[ThresholdGate, ...], ...]
    scheme: ThresholdScheme | None = None
    fan_in: int | None = None
    seed: int | None = None
    layer_meta: tuple[LayerWiring, ...] = ()
    _eval_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __eq__(self, other):
        if not isinstance(other, RobustCircuit):
            return NotImplemented
        return (
            self.m == other.m
            and self.depth == other.depth
            and self.theta == other.theta
            and self.variant == other.variant
            and self.layers == other.layers
        )

    def widths(self) -> list[int]:
        """Gate counts of layers 1..depth (layer 0 is the m inputs)."""
        return [width_at(self.m, i) for i in range(1, self.depth + 1)]

    def width_in(self, layer: int) -> int:
        """Input width feeding layer (1-based)."""
        return width_at(self.m, layer - 1)

    def total_gates(self) -> int:
        return sum(self.widths())

    def layer_arrays(self, layer: int) -> tuple[np.ndarray, np.ndarray]:
        """(gate x fan-in index matrix, fire-count vector) for one layer."""
        if layer not in self._eval_cache:
            gates = self.layers[layer - 1]
            idx = np.array([g.inputs for g in gates], dtype=np.int64)
            thr = np.array([g.fire_count for g in gates], dtype=np.int64)
            self._eval_cache[layer] = (idx, thr)
        return self._eval_cache[layer]


def width_at(m: int, i: int) -> int:
    return max(1, -(-m // (1 << i)))


def deterministic_depth(m: int) -> int:
    d = 0
    while width_at(m, d) > 1:
        d += 1
    return d


def randomized_depth(m: int) -> int:
    return max(1, math.ceil(round(math.log2(math.log2(m)), 12)))


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def worst_case_degree(width: int, scheme: ThresholdScheme) -> int:
    """Smallest valid degree whose threshold gates can neither fire on any
    <= mean_in input nor die on any >= completeness input of this width."""
    max_ones = floor_frac(scheme.mean_in * width)
    zero_budget = floor_frac((1 - scheme.completeness) * width)
    for D in range(3, width):
        if (width * D) % 2:
            continue
        fire = threshold_count(scheme.theta, D)
        if min(D, max_ones) < fire and D - fire >= zero_budget:
            return D
    raise InfeasibleParametersError(
        f"no worst-case-safe degree exists at width {width}"
    )


def build_deterministic(
    m: int,
    params: SamplerParams | None = None,
    seed: int = 0,
    scheme: ThresholdScheme = DEFAULT_SCHEME,
    degenerate_cutoff: int = DEGENERATE_CUTOFF,
) -> RobustCircuit:
    """Sampler-wired circuit with halving widths down to one top gate.

    Layer i+1's gate j reads the neighbor set of vertex j in a verified
    expander on the w_i previous-layer positions; widths at or below the
    degenerate cutoff fall back to full fan-in, where the scheme bounds hold
    outright. The wiring records degree and measured lambda per layer.
    """
    if m < 2:
        raise InfeasibleParametersError("need at least 2 inputs")
    if params is None:
        params = SamplerParams(
            epsilon=scheme.slack,
            delta=scheme.soundness,
            gamma=scheme.theta,
        )
    depth = deterministic_depth(m)
    layers = []
    meta = []
    for i in range(1, depth + 1):
        w_in, w_out = width_at(m, i - 1), width_at(m, i)
        if w_in <= degenerate_cutoff:
            gates = tuple(
                ThresholdGate(tuple(range(w_in)), scheme.theta)
                for _ in range(w_out)
            )
            meta.append(LayerWiring(kind="full", degree=w_in))
        else:
            D = worst_case_degree(w_in, scheme)
            graph = build_expander(w_in, D, derive_seed(seed, i))
            lam = second_eigenvalue(graph, tol=1e-8)
            if lam > params.target_lambda:
                raise InfeasibleParametersError(
                    f"layer {i}: lambda {lam:.4f} above target "
                    f"{params.target_lambda} at width {w_in}"
                )
            gates = tuple(
                ThresholdGate(tuple(sorted(graph.adjacency[j])), scheme.theta)
                for j in range(w_out)
            )
            meta.append(LayerWiring(kind="sampler", degree=D, measured_lambda=lam))
        layers.append(gates)
    return RobustCircuit(
        m=m,
        depth=depth,
        theta=scheme.theta,
        variant="deterministic",
        layers=tuple(layers),
        scheme=scheme,
        seed=seed,
        layer_meta=tuple(meta),
    )


def build_randomized(
    m: int,
    f: int,
    seed: int,
    scheme: ThresholdScheme = DEFAULT_SCHEME,
) -> RobustCircuit:
    """ceil(log2 log2 m) layers; every gate reads f positions drawn uniformly
    with replacement from the previous layer. Deterministic given the seed."""
    if m < 4:
        raise InfeasibleParametersError("need at least 4 inputs")
    if f < 1:
        raise InfeasibleParametersError("fan-in must be positive")
    depth = randomized_depth(m)
    layers = []
    meta = []
    for i in range(1, depth + 1):
        w_in, w_out = width_at(m, i - 1), width_at(m, i)
        rng = rng_from(derive_seed(seed, i))
        draws = rng.integers(0, w_in, size=(w_out, f))
        gates = tuple(
            ThresholdGate(tuple(sorted(int(x) for x in row)), scheme.theta)
            for row in draws
        )
        layers.append(gates)
        meta.append(LayerWiring(kind="random"))
    return RobustCircuit(
        m=m,
        depth=depth,
        theta=scheme.theta,
        variant="randomized",
        layers=tuple(layers),
        scheme=scheme,
        fan_in=f,
        seed=seed,
        layer_meta=tuple(meta),
    )


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def evaluate_layer(c: RobustCircuit, layer: int, bits: np.ndarray) -> np.ndarray:
    idx, thr = c.layer_arrays(layer)
    return (bits[idx].sum(axis=1) >= thr).astype(np.uint8)


def evaluate(c: RobustCircuit, input_bits: Sequence[int]) -> list[LayerString]:
    """Honest evaluation: all layer strings produced from the input bits."""
    if len(input_bits) != c.m:
        raise GapforgeError(
            f"input has {len(input_bits)} bits, circuit expects {c.m}"
        )
    current = np.asarray(input_bits, dtype=np.uint8)
    out: list[LayerString] = []
    for layer in range(1, c.depth + 1):
        current = evaluate_layer(c, layer, current)
        out.append(tuple(int(b) for b in current))
    return out


def layer_means(layer_strings: Sequence[Sequence[int]]) -> list[Fraction]:
    return [Fraction(int(sum(s)), len(s)) for s in layer_strings]


# ---------------------------------------------------------------------------
# goodness certification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LayerVerdict:
    layer: int
    width_in: int
    width_out: int
    mode: str  # "exhaustive" | "statistical"
    passed: bool
    strings_checked: int
    worst_output_count: int
    worst_output_mean: Fraction
    witness: str | None

    def to_doc(self) -> dict:
        return {
            "layer": self.layer,
            "width_in": self.width_in,
            "width_out": self.width_out,
            "mode": self.mode,
            "passed": self.passed,
            "strings_checked": self.strings_checked,
            "worst_output_count": self.worst_output_count,
            "worst_output_mean": frac_str(self.worst_output_mean),
            "witness": self.witness,
        }


@dataclass(frozen=True)
class GoodnessCertificate:
    """Per-layer evidence that every <= mean_in input maps to a <= mean_out
    output: exhaustive where the input width permits, otherwise seeded
    adversarial strings plus greedy worst-case search."""

    circuit_digest: str
    mean_in: Fraction
    mean_out: Fraction
    exhaustive_cap: int
    trials: int
    seed: int
    layers: tuple[LayerVerdict, ...]
    passed: bool

    def to_doc(self) -> dict:
        return {
            "schema": "gapforge-certificate/1",
            "circuit_digest": self.circuit_digest,
            "mean_in": frac_str(self.mean_in),
            "mean_out": frac_str(self.mean_out),
            "exhaustive_cap": self.exhaustive_cap,
            "trials": self.trials,
            "seed": self.seed,
            "layers": [v.to_doc() for v in self.layers],
            "passed": self.passed,
        }

    @staticmethod
    def from_doc(doc: dict) -> "GoodnessCertificate":
        layers = tuple(
            LayerVerdict(
                layer=d["layer"],
                width_in=d["width_in"],
                width_out=d["width_out"],
                mode=d["mode"],
                passed=d["passed"],
                strings_checked=d["strings_checked"],
                worst_output_count=d["worst_output_count"],
                worst_output_mean=parse_frac(d["worst_output_mean"]),
                witness=d["witness"],
            )
            for d in doc["layers"]
        )
        return GoodnessCertificate(
            circuit_digest=doc["circuit_digest"],
            mean_in=parse_frac(doc["mean_in"]),
            mean_out=parse_frac(doc["mean_out"]),
            exhaustive_cap=doc["exhaustive_cap"],
            trials=doc["trials"],
            seed=doc["seed"],
            layers=layers,
            passed=doc["passed"],
        )


def circuit_digest(c: RobustCircuit) -> str:
    return hashlib.sha256(serialize_circuit(c).encode()).hexdigest()


def _gate_multiplicity(gates: Sequence[ThresholdGate], w_in: int) -> np.ndarray:
    mult = np.zeros((w_in, len(gates)), dtype=np.int16)
    for gi, g in enumerate(gates):
        for p in g.inputs:
            mult[p, gi] += 1
    return mult


def _worst_exhaustive(
    gates: Sequence[ThresholdGate], w_in: int, in_cap: int
) -> tuple[int, int, int]:
    """(worst fired count, witness int, strings checked) over all strings with
    popcount <= in_cap; independent formulation from the oracle's sweep."""
    mult = _gate_multiplicity(gates, w_in)
    thr = np.array([g.fire_count for g in gates], dtype=np.int16)
    worst, witness, checked = -1, 0, 0
    chunk = 1 << 18
    for lo in range(0, 1 << w_in, chunk):
        hi = min(lo + chunk, 1 << w_in)
        block = np.arange(lo, hi, dtype=np.uint64)
        bits = ((block[:, None] >> np.arange(w_in, dtype=np.uint64)) & 1).astype(
            np.int16
        )
        mask = bits.sum(axis=1) <= in_cap
        if not mask.any():
            continue
        bits = bits[mask]
        sel = block[mask]
        checked += bits.shape[0]
        fired = (bits @ mult >= thr).sum(axis=1)
        j = int(np.argmax(fired))
        if int(fired[j]) > worst:
            worst, witness = int(fired[j]), int(sel[j])
    return worst, witness, checked


def _greedy_worst(
    mult: np.ndarray,
    thr: np.ndarray,
    start: np.ndarray,
    seed: int,
    rounds: int = 400,
    candidates: int = 24,
) -> tuple[int, np.ndarray]:
    """Hill-climb one<->zero swaps at fixed popcount maximizing fired gates."""
    rng = rng_from(seed)
    vec = start.copy()
    counts = vec @ mult
    best = int((counts >= thr).sum())
    for _ in range(rounds):
        ones_pos = np.flatnonzero(vec == 1)
        zero_pos = np.flatnonzero(vec == 0)
        if not ones_pos.size or not zero_pos.size:
            break
        improved = False
        for _ in range(candidates):
            p = int(ones_pos[rng.integers(ones_pos.size)])
            q = int(zero_pos[rng.integers(zero_pos.size)])
            trial = counts - mult[p] + mult[q]
            s = int((trial >= thr).sum())
            if s > best:
                vec[p], vec[q] = 0, 1
                counts = trial
                best = s
                improved = True
                break
        if not improved:
            break
    return best, vec


def _worst_statistical(
    gates: Sequence[ThresholdGate],
    w_in: int,
    in_cap: int,
    trials: int,
    seed: int,
) -> tuple[int, int, int]:
    """(worst fired count, witness int, strings tested): seeded random strings
    at the extreme admissible popcount, clustered blocks, and greedy search."""
    mult = _gate_multiplicity(gates, w_in)
    thr = np.array([g.fire_count for g in gates], dtype=np.int16)
    rng = rng_from(seed)
    strings: list[np.ndarray] = []
    for _ in range(max(1, trials - 4)):
        vec = np.zeros(w_in, dtype=np.int16)
        vec[rng.permutation(w_in)[:in_cap]] = 1
        strings.append(vec)
    for block_start in (0, w_in - in_cap, (w_in - in_cap) // 2):
        vec = np.zeros(w_in, dtype=np.int16)
        vec[block_start : block_start + in_cap] = 1
        strings.append(vec)
    worst, witness_vec = -1, strings[0]
    for vec in strings:
        fired = int(((vec @ mult) >= thr).sum())
        if fired > worst:
            worst, witness_vec = fired, vec
    g_best, g_vec = _greedy_worst(mult, thr, witness_vec, derive_seed(seed, 0xA77))
    if g_best > worst:
        worst, witness_vec = g_best, g_vec
    witness = sum(int(b) << i for i, b in enumerate(witness_vec))
    return worst, witness, len(strings) + 1


def certify_goodness(
    c: RobustCircuit,
    exhaustive_cap: int = EXHAUSTIVE_CAP,
    trials: int = 64,
    seed: int = 0,
    mean_in: Fraction | None = None,
    mean_out: Fraction | None = None,
) -> GoodnessCertificate:
    """Layer-by-layer damping certificate. Failures are verdicts, not errors."""
    scheme = c.scheme or DEFAULT_SCHEME
    mi = mean_in if mean_in is not None else scheme.mean_in
    mo = mean_out if mean_out is not None else scheme.mean_out
    verdicts = []
    for layer in range(1, c.depth + 1):
        gates = c.layers[layer - 1]
        w_in = c.width_in(layer)
        in_cap = floor_frac(mi * w_in)
        out_cap = floor_frac(mo * len(gates))
        if w_in <= exhaustive_cap:
            worst, witness, checked = _worst_exhaustive(gates, w_in, in_cap)
            mode = "exhaustive"
        else:
            worst, witness, checked = _worst_statistical(
                gates, w_in, in_cap, trials, derive_seed(seed, layer)
            )
            mode = "statistical"
        passed = worst <= out_cap
        verdicts.append(
            LayerVerdict(
                layer=layer,
                width_in=w_in,
                width_out=len(gates),
                mode=mode,
                passed=passed,
                strings_checked=checked,
                worst_output_count=worst,
                worst_output_mean=Fraction(worst, len(gates)),
                witness=None if passed else format(witness, "x"),
            )
        )
    return GoodnessCertificate(
        circuit_digest=circuit_digest(c),
        mean_in=mi,
        mean_out=mo,
        exhaustive_cap=exhaustive_cap,
        trials=trials,
        seed=seed,
        layers=tuple(verdicts),
        passed=all(v.passed for v in verdicts),
    )


# ---------------------------------------------------------------------------
# randomized-variant tuning
# ---------------------------------------------------------------------------


def completeness_inputs(m: int, completeness: Fraction, seed: int) -> list[tuple]:
    """Worst admissible honest inputs: zeros at the full budget, placed
    randomly and clustered."""
    zeros = m - threshold_count(completeness, m)
    rng = rng_from(seed)
    random_vec = np.ones(m, dtype=np.int64)
    random_vec[rng.permutation(m)[:zeros]] = 0
    clustered = np.ones(m, dtype=np.int64)
    clustered[:zeros] = 0
    return [tuple(random_vec.tolist()), tuple(clustered.tolist())]


def seed_failure_event(
    m: int, f: int, scheme: ThresholdScheme
) -> Callable[[int], bool]:
    """Event: some full-budget honest input fails to reach an all-ones top
    layer on a freshly wired circuit."""

    def event(seed: int) -> bool:
        c = build_randomized(m, f, seed, scheme)
        for bits in completeness_inputs(m, scheme.completeness, derive_seed(seed, 1)):
            top = evaluate(c, bits)[-1]
            if not all(top):
                return True
        return False

    return event


def auto_fan_in(
    m: int,
    master_seed: int,
    f_cap: int = 64,
    scheme: ThresholdScheme = DEFAULT_SCHEME,
    probe_seeds: int = 48,
    cert_trials: int = 48,
) -> tuple[int, GoodnessCertificate]:
    """Smallest fan-in <= f_cap whose wiring certifies: the damping verdicts
    pass on a probe circuit and the empirical seed-failure rate of honest
    completeness stays within the 1/m^(1/4) budget."""
    target = 1.0 / (m ** 0.25)
    for f in range(2, f_cap + 1):
        probe = build_randomized(m, f, derive_seed(master_seed, f), scheme)
        cert = certify_goodness(
            probe, trials=cert_trials, seed=derive_seed(master_seed, f, 1)
        )
        if not cert.passed:
            continue
        rate = estimate(
            seed_failure_event(m, f, scheme),
            trials=probe_seeds,
            master_seed=derive_seed(master_seed, f, 2),
        )
        if float(rate.frequency) <= target:
            return f, cert
    raise InfeasibleParametersError(
        f"no fan-in <= {f_cap} passes certification at m={m}"
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def serialize_circuit(c: RobustCircuit) -> str:
    header = (
        f"rcirc {c.m} {c.depth} {c.variant} "
        f"{c.theta.numerator}/{c.theta.denominator}"
    )
    lines = [header]
    for layer in c.layers:
        for g in layer:
            lines.append(" ".join(map(str, g.inputs)))
    return "\n".join(lines) + "\n"


def parse_circuit(text: str) -> RobustCircuit:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("rcirc"):
        raise ParseError("missing rcirc header", 1)
    toks = lines[0].split()
    if len(toks) != 5 or toks[3] not in ("deterministic", "randomized"):
        raise ParseError("malformed rcirc header", 1)
    try:
        m, depth = int(toks[1]), int(toks[2])
        theta = parse_frac(toks[4])
    except ValueError:
        raise ParseError("malformed rcirc header", 1) from None
    widths = [width_at(m, i) for i in range(1, depth + 1)]
    if len(lines) - 1 != sum(widths):
        raise ParseError(
            f"expected {sum(widths)} gate lines, found {len(lines) - 1}", 1
        )
    layers = []
    cursor = 1
    for layer_idx, w in enumerate(widths, start=1):
        w_in = width_at(m, layer_idx - 1)
        gates = []
        for _ in range(w):
            try:
                inputs = tuple(int(t) for t in lines[cursor].split())
            except ValueError:
                raise ParseError("bad gate line", cursor + 1) from None
            if any(not (0 <= p < w_in) for p in inputs):
                raise ParseError(
                    f"gate input outside previous layer of width {w_in}", cursor + 1
                )
            gates.append(ThresholdGate(inputs, theta))
            cursor += 1
        layers.append(tuple(gates))
    variant = toks[3]
    fan_in = None
    if variant == "randomized" and layers:
        sizes = {len(g.inputs) for layer in layers for g in layer}
        if len(sizes) == 1:
            fan_in = sizes.pop()
    scheme = DEFAULT_SCHEME if theta == DEFAULT_SCHEME.theta else None
    return RobustCircuit(
        m=m,
        depth=depth,
        theta=theta,
        variant=variant,
        layers=tuple(layers),
        scheme=scheme,
        fan_in=fan_in,
        layer_meta=tuple(
            LayerWiring(kind="parsed") for _ in layers
        ),
    )
