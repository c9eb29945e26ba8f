"""Expander graphs, their spectral certification, and derived set families.

A family is the collection of neighbor sets of a regular graph whose
normalized second eigenvalue has been measured. Families never rely on
asymptotic constants: a family is considered usable only after
`certify_sampler` passes on an adversarial corpus, which checks

  property 1: the fraction of sets whose sample mean deviates from the
              string mean by more than epsilon is at most delta;
  property 2: for strings with zero-fraction eta < (1-gamma)/2, the fraction
              of sets with sample mean below gamma is at most eta/2, and is
              also compared against the mixing-lemma value
              (4 lambda^2 / (1-gamma)^2) * eta.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    GapforgeError,
    InfeasibleParametersError,
    IterationCapError,
    ParseError,
)
from .util import derive_seed, frac_str, parallel_map, parse_frac, rng_from

DEFAULT_DEGREE_SCHEDULE = (4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128)
_POWER_ITER_CAP = 5000


@dataclass(frozen=True)
class RegularGraph:
    """Undirected D-regular multigraph as per-vertex neighbor lists."""

    num_vertices: int
    degree: int
    adjacency: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.adjacency) != self.num_vertices:
            raise GapforgeError("adjacency length does not match vertex count")
        for row in self.adjacency:
            if len(row) != self.degree:
                raise GapforgeError("vertex without exactly D neighbor entries")
        # symmetry of the edge multiset
        counts: dict[tuple[int, int], int] = {}
        for u, row in enumerate(self.adjacency):
            for v in row:
                counts[(u, v)] = counts.get((u, v), 0) + 1
        for (u, v), c in counts.items():
            if counts.get((v, u), 0) != c:
                raise GapforgeError(f"edge multiset not symmetric at ({u},{v})")

    def neighbor_matrix(self) -> np.ndarray:
        return np.array(self.adjacency, dtype=np.int64)

    def is_connected(self) -> bool:
        seen = bytearray(self.num_vertices)
        queue = deque([0])
        seen[0] = 1
        reached = 1
        while queue:
            u = queue.popleft()
            for v in self.adjacency[u]:
                if not seen[v]:
                    seen[v] = 1
                    reached += 1
                    queue.append(v)
        return reached == self.num_vertices


def _pairing_graph(N: int, D: int, rng: np.random.Generator,
                   repair_sweeps: int = 400) -> list[set[int]] | None:
    """One configuration-model draw repaired to a simple graph, or None."""
    stubs = np.repeat(np.arange(N, dtype=np.int64), D)
    rng.shuffle(stubs)
    pairs = stubs.reshape(-1, 2)
    for _ in range(repair_sweeps):
        u, v = pairs[:, 0], pairs[:, 1]
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        keys = lo * N + hi
        order = np.argsort(keys, kind="stable")
        sorted_keys = keys[order]
        dup = np.zeros(keys.size, dtype=bool)
        dup_sorted = np.zeros(keys.size, dtype=bool)
        same = sorted_keys[1:] == sorted_keys[:-1]
        dup_sorted[1:][same] = True
        dup_sorted[:-1][same] = True
        dup[order] = dup_sorted
        bad = np.flatnonzero((u == v) | dup)
        if bad.size == 0:
            adj = [[] for _ in range(N)]
            for a, b in pairs:
                adj[int(a)].append(int(b))
                adj[int(b)].append(int(a))
            return [set(x) for x in adj] if all(
                len(a) == D for a in adj
            ) else None
        partners = rng.integers(0, pairs.shape[0], size=bad.size)
        for i, j in zip(bad, partners):
            pairs[i, 1], pairs[j, 1] = pairs[j, 1], pairs[i, 1]
    return None


def _complement_adjacency(adj_sets: list[set[int]], N: int) -> list[set[int]]:
    full = set(range(N))
    return [full - s - {v} for v, s in enumerate(adj_sets)]


def _is_bipartite(adj_sets: list[set[int]], N: int) -> bool:
    color = [-1] * N
    for start in range(N):
        if color[start] >= 0:
            continue
        color[start] = 0
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj_sets[u]:
                if color[v] < 0:
                    color[v] = color[u] ^ 1
                    queue.append(v)
                elif color[v] == color[u]:
                    return False
    return True


def _circulant_sets(N: int, D: int) -> list[set[int]]:
    offsets = list(range(1, D // 2 + 1))
    adj = [set() for _ in range(N)]
    for v in range(N):
        for off in offsets:
            adj[v].add((v + off) % N)
            adj[v].add((v - off) % N)
        if D % 2:
            adj[v].add((v + N // 2) % N)
    return adj


def _swap_randomize(adj_sets: list[set[int]], N: int, rng, tries: int) -> list[set[int]]:
    """Degree-preserving double-edge swaps; keeps the graph simple."""
    edges = []
    for u, s in enumerate(adj_sets):
        for v in s:
            if u < v:
                edges.append([u, v])
    M = len(edges)
    for _ in range(tries):
        i, j = int(rng.integers(M)), int(rng.integers(M))
        if i == j:
            continue
        a, b = edges[i]
        c, d = edges[j]
        if rng.integers(2):
            c, d = d, c
        if len({a, b, c, d}) < 4:
            continue
        if c in adj_sets[a] or d in adj_sets[b]:
            continue
        adj_sets[a].remove(b), adj_sets[b].remove(a)
        adj_sets[c].remove(d), adj_sets[d].remove(c)
        adj_sets[a].add(c), adj_sets[c].add(a)
        adj_sets[b].add(d), adj_sets[d].add(b)
        edges[i] = [a, c]
        edges[j] = [b, d]
    return adj_sets


def build_expander(
    N: int,
    D: int,
    seed: int,
    restarts: int = 64,
) -> RegularGraph:
    """Seeded connected non-bipartite simple D-regular graph on N vertices.

    Sparse degrees (directly or through the complement) come from random stub
    pairing with local swap repair; mid densities from a circulant randomized
    by double-edge swaps. Bipartite draws are resampled: their walk matrix
    has |eigenvalue| 1 and they are useless as samplers. Deterministic for a
    fixed seed; raises when the parameters are infeasible or every restart
    fails.
    """
    if D < 3:
        raise InfeasibleParametersError("degree must be at least 3")
    if D > N - 1:
        raise InfeasibleParametersError(f"degree {D} impossible on {N} vertices")
    if (N * D) % 2 != 0:
        raise InfeasibleParametersError(f"N*D must be even, got N={N} D={D}")
    if D == N - 1:
        adj = tuple(
            tuple(v for v in range(N) if v != u) for u in range(N)
        )
        return RegularGraph(N, D, adj)
    use_complement = D > (N - 1) // 2
    build_deg = (N - 1 - D) if use_complement else D
    sparse = build_deg <= max(3, N // 4)
    for attempt in range(restarts):
        rng = rng_from(derive_seed(seed, N, D, attempt))
        adj_sets: list[set[int]] | None
        if not sparse:
            adj_sets = _swap_randomize(
                _circulant_sets(N, D), N, rng, tries=12 * N * D
            )
        elif build_deg == 1:
            perm = rng.permutation(N)
            adj_sets = [set() for _ in range(N)]
            for i in range(0, N, 2):
                a, b = int(perm[i]), int(perm[i + 1])
                adj_sets[a].add(b)
                adj_sets[b].add(a)
        elif build_deg == 2:
            perm = rng.permutation(N)
            adj_sets = [set() for _ in range(N)]
            for i in range(N):
                a, b = int(perm[i]), int(perm[(i + 1) % N])
                adj_sets[a].add(b)
                adj_sets[b].add(a)
        else:
            adj_sets = _pairing_graph(N, build_deg, rng)
        if adj_sets is None:
            continue
        if sparse and use_complement:
            adj_sets = _complement_adjacency(adj_sets, N)
        if any(len(s) != D for s in adj_sets):
            continue
        graph = RegularGraph(
            N, D, tuple(tuple(sorted(s)) for s in adj_sets)
        )
        if graph.is_connected() and not _is_bipartite(adj_sets, N):
            return graph
    raise InfeasibleParametersError(
        f"no connected non-bipartite simple {D}-regular graph found on "
        f"{N} vertices after {restarts} restarts"
    )


def second_eigenvalue(g: RegularGraph, tol: float = 1e-8) -> float:
    """Normalized second-largest absolute eigenvalue of the walk matrix.

    Deflated block power iteration on the squared walk operator restricted to
    the complement of the all-ones eigenvector: squaring makes +/- pairs
    converge, the block rides out the near-degenerate cluster at the bulk
    edge of random regular graphs, and Rayleigh-Ritz extracts the top value.
    For the symmetric operator the Ritz residual bounds the eigenvalue error
    (Weyl), which certifies the +/- tol accuracy. Raises IterationCapError
    with the last estimate if the residual never gets there.
    """
    N, D = g.num_vertices, g.degree
    nbrs = g.neighbor_matrix()
    b = max(2, min(8, N - 2))
    rng = rng_from(derive_seed(0xE16E, N, D))
    V = rng.standard_normal((N, b))

    def deflate(M: np.ndarray) -> np.ndarray:
        return M - M.mean(axis=0, keepdims=True)

    def walk_sq(M: np.ndarray) -> np.ndarray:
        out = M[nbrs].sum(axis=1) / D
        out = out[nbrs].sum(axis=1) / D
        return deflate(out)

    V, _ = np.linalg.qr(deflate(V))
    theta = 0.0
    for _ in range(_POWER_ITER_CAP):
        Y = walk_sq(V)
        H = V.T @ Y
        H = (H + H.T) / 2
        vals, vecs = np.linalg.eigh(H)
        theta = float(vals[-1])
        top = V @ vecs[:, -1]
        resid = float(np.linalg.norm(walk_sq(top) - theta * top))
        lam = float(np.sqrt(max(theta, 0.0)))
        if resid <= max(2.0 * tol * max(lam, tol), 1e-14):
            return lam
        V, _ = np.linalg.qr(deflate(Y))
    raise IterationCapError(
        "block power iteration did not converge", float(np.sqrt(max(theta, 0.0)))
    )


def second_eigenvalue_dense(g: RegularGraph) -> float:
    """Dense eigendecomposition cross-check (small N only)."""
    N, D = g.num_vertices, g.degree
    W = np.zeros((N, N))
    for u, row in enumerate(g.adjacency):
        for v in row:
            W[u, v] += 1.0 / D
    vals = np.sort(np.abs(np.linalg.eigvalsh(W)))[::-1]
    return float(vals[1])


@dataclass(frozen=True)
class SamplerParams:
    """Deviation tolerance, failure budget, completeness threshold, and the
    spectral target a constructed family must meet."""

    epsilon: Fraction
    delta: Fraction
    gamma: Fraction
    target_lambda: float = 0.97

    def __post_init__(self):
        for name in ("epsilon", "delta", "gamma"):
            x = getattr(self, name)
            if not (0 < x < 1):
                raise ValueError(f"{name} must lie in (0, 1), got {x}")
        if not (0 < self.target_lambda < 1):
            raise ValueError("target_lambda must lie in (0, 1)")


PROVENANCE_HALVED = "expander-derived"
PROVENANCE_FULL = "expander-full"
PROVENANCE_EXPLICIT = "explicit-list"


@dataclass(frozen=True)
class SamplerFamily:
    """A set family over [N]: one sorted index tuple per set, all equal size.

    expander-derived families keep the lexicographically first floor(N/2)
    neighbor sets of a verified expander; expander-full families keep all N
    (that is what the one-sided reduction consumes); explicit-list families
    come from serialized text and carry no graph.
    """

    ground_size: int
    sets: tuple[tuple[int, ...], ...]
    params: SamplerParams
    provenance: str
    measured_lambda: float | None = None
    degree: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.provenance == PROVENANCE_HALVED and len(self.sets) != self.ground_size // 2:
            raise GapforgeError("halved family must hold floor(N/2) sets")
        if self.provenance == PROVENANCE_FULL and len(self.sets) != self.ground_size:
            raise GapforgeError("full family must hold N sets")
        sizes = {len(s) for s in self.sets}
        if len(sizes) > 1:
            raise GapforgeError("sets must share one cardinality")
        for s in self.sets:
            if len(set(s)) != len(s):
                raise GapforgeError("set with repeated elements")
            if any(not (0 <= x < self.ground_size) for x in s):
                raise GapforgeError("set element outside the ground set")

    @property
    def set_size(self) -> int:
        return len(self.sets[0]) if self.sets else 0

    def incidence(self) -> np.ndarray:
        mat = np.zeros((len(self.sets), self.ground_size), dtype=np.uint8)
        for i, s in enumerate(self.sets):
            mat[i, list(s)] = 1
        return mat


def _family_from_graph(
    graph: RegularGraph,
    params: SamplerParams,
    lam: float,
    seed: int,
    keep: int,
    provenance: str,
) -> SamplerFamily:
    sets = tuple(tuple(sorted(graph.adjacency[v])) for v in range(keep))
    return SamplerFamily(
        ground_size=graph.num_vertices,
        sets=sets,
        params=params,
        provenance=provenance,
        measured_lambda=lam,
        degree=graph.degree,
        seed=seed,
    )


def _search_expander(
    params: SamplerParams,
    N: int,
    seed: int,
    degree_schedule: Sequence[int] | None,
) -> tuple[RegularGraph, float]:
    schedule = [
        d
        for d in (degree_schedule or DEFAULT_DEGREE_SCHEDULE)
        if 3 <= d <= N - 1 and (N * d) % 2 == 0
    ]
    if (degree_schedule is None) and (N - 1 not in schedule) and N - 1 >= 3:
        schedule.append(N - 1)
    last_error = None
    for D in schedule:
        try:
            graph = build_expander(N, D, derive_seed(seed, D))
        except InfeasibleParametersError as exc:
            last_error = exc
            continue
        lam = second_eigenvalue(graph, tol=1e-8)
        if lam <= params.target_lambda:
            return graph, lam
    raise InfeasibleParametersError(
        f"no degree in {schedule} achieves lambda <= {params.target_lambda} "
        f"on {N} vertices ({last_error})"
    )


def build_sampler_family(
    params: SamplerParams,
    N: int,
    seed: int,
    degree_schedule: Sequence[int] | None = None,
) -> SamplerFamily:
    """Halved family: floor(N/2) neighbor sets of a verified expander."""
    if N < 4:
        raise InfeasibleParametersError("ground set must have at least 4 points")
    graph, lam = _search_expander(params, N, seed, degree_schedule)
    return _family_from_graph(graph, params, lam, seed, N // 2, PROVENANCE_HALVED)


def build_full_family(
    params: SamplerParams,
    N: int,
    seed: int,
    degree_schedule: Sequence[int] | None = None,
) -> SamplerFamily:
    """Full family: all N neighbor sets (one per vertex)."""
    if N < 4:
        raise InfeasibleParametersError("ground set must have at least 4 points")
    graph, lam = _search_expander(params, N, seed, degree_schedule)
    return _family_from_graph(graph, params, lam, seed, N, PROVENANCE_FULL)


def family_from_sets(
    ground_size: int, sets: Iterable[Sequence[int]], params: SamplerParams
) -> SamplerFamily:
    return SamplerFamily(
        ground_size=ground_size,
        sets=tuple(tuple(sorted(s)) for s in sets),
        params=params,
        provenance=PROVENANCE_EXPLICIT,
    )


def intersection_degree(fam: SamplerFamily) -> int:
    """Exact max number of other sets any set shares an element with."""
    if not fam.sets:
        return 0
    inc = fam.incidence().astype(np.int32)
    overlap = inc @ inc.T
    np.fill_diagonal(overlap, 0)
    return int((overlap > 0).sum(axis=1).max())


def mixing_bound(lam: float, gamma: Fraction, eta: Fraction) -> float:
    """(4 lambda^2 / (1-gamma)^2) * eta, valid for eta < (1-gamma)/2."""
    if not (0 < float(gamma) < 1) or not (0 <= lam < 1):
        raise ValueError("lambda and gamma must lie in (0, 1)")
    if not eta < (1 - gamma) / 2:
        raise ValueError("eta must be below (1-gamma)/2")
    g = float(gamma)
    return (4.0 * lam * lam / ((1.0 - g) ** 2)) * float(eta)


@dataclass(frozen=True)
class StringReport:
    label: str
    mean: Fraction
    deviation_fraction: Fraction
    deviation_ok: bool
    eta: Fraction | None
    low_fraction: Fraction | None
    eta_budget_ok: bool | None
    mixing_value: float | None
    mixing_ok: bool | None

    def to_doc(self) -> dict:
        return {
            "label": self.label,
            "mean": frac_str(self.mean),
            "deviation_fraction": frac_str(self.deviation_fraction),
            "deviation_ok": self.deviation_ok,
            "eta": None if self.eta is None else frac_str(self.eta),
            "low_fraction": None if self.low_fraction is None else frac_str(self.low_fraction),
            "eta_budget_ok": self.eta_budget_ok,
            "mixing_value": self.mixing_value,
            "mixing_ok": self.mixing_ok,
        }


@dataclass(frozen=True)
class SamplerReport:
    ground_size: int
    num_sets: int
    set_size: int
    params: SamplerParams
    measured_lambda: float | None
    strings: tuple[StringReport, ...]
    passed: bool

    def to_doc(self) -> dict:
        return {
            "ground_size": self.ground_size,
            "num_sets": self.num_sets,
            "set_size": self.set_size,
            "epsilon": frac_str(self.params.epsilon),
            "delta": frac_str(self.params.delta),
            "gamma": frac_str(self.params.gamma),
            "measured_lambda": self.measured_lambda,
            "strings": [s.to_doc() for s in self.strings],
            "passed": self.passed,
        }


def certify_sampler(
    fam: SamplerFamily,
    corpus: Sequence[tuple[str, Sequence[int]]] | Sequence[Sequence[int]],
    jobs: int = 1,
) -> SamplerReport:
    """Exact per-string property checks over every set of the family.

    Counts are exact rationals, so aggregation order (and therefore the
    worker count) cannot change the report.
    """
    labeled: list[tuple[str, Sequence[int]]] = []
    for i, entry in enumerate(corpus):
        if isinstance(entry, tuple) and len(entry) == 2 and isinstance(entry[0], str):
            labeled.append(entry)  # type: ignore[arg-type]
        else:
            labeled.append((f"s{i}", entry))  # type: ignore[arg-type]
    inc = fam.incidence().astype(np.int64)
    num_sets, C = len(fam.sets), fam.set_size
    eps, delta, gamma = fam.params.epsilon, fam.params.delta, fam.params.gamma
    eta_cut = (1 - gamma) / 2

    def check(one: tuple[str, Sequence[int]]) -> StringReport:
        label, bits = one
        vec = np.asarray(bits, dtype=np.int64)
        if vec.size != fam.ground_size:
            raise GapforgeError(
                f"string {label!r} has {vec.size} bits, ground set has {fam.ground_size}"
            )
        mean = Fraction(int(vec.sum()), fam.ground_size)
        ones = inc @ vec
        bad = sum(
            1 for o in ones.tolist() if abs(Fraction(o, C) - mean) > eps
        )
        dev_frac = Fraction(bad, num_sets)
        eta = 1 - mean
        row_eta = None
        low_frac = None
        budget_ok = None
        mix_val = None
        mix_ok = None
        if eta < eta_cut:
            row_eta = eta
            low = sum(1 for o in ones.tolist() if Fraction(o, C) < gamma)
            low_frac = Fraction(low, num_sets)
            budget_ok = low_frac <= eta / 2
            if fam.measured_lambda is not None:
                mix_val = mixing_bound(fam.measured_lambda, gamma, eta) if eta > 0 else 0.0
                mix_ok = float(low_frac) <= mix_val or low == 0
        return StringReport(
            label=label,
            mean=mean,
            deviation_fraction=dev_frac,
            deviation_ok=dev_frac <= delta,
            eta=row_eta,
            low_fraction=low_frac,
            eta_budget_ok=budget_ok,
            mixing_value=mix_val,
            mixing_ok=mix_ok,
        )

    rows = tuple(parallel_map(check, labeled, jobs))
    passed = all(r.deviation_ok for r in rows) and all(
        r.eta_budget_ok for r in rows if r.eta_budget_ok is not None
    ) and all(r.mixing_ok for r in rows if r.mixing_ok is not None)
    return SamplerReport(
        ground_size=fam.ground_size,
        num_sets=num_sets,
        set_size=C,
        params=fam.params,
        measured_lambda=fam.measured_lambda,
        strings=rows,
        passed=passed,
    )


def _local_search_string(
    fam: SamplerFamily,
    start: np.ndarray,
    score_threshold_ones: int,
    below: bool,
    seed: int,
    rounds: int = 300,
    candidates: int = 24,
) -> np.ndarray:
    """Hill-climb zero/one swaps at fixed popcount to maximize the number of
    sets whose one-count is below (or deviates from) a threshold."""
    rng = rng_from(seed)
    inc = fam.incidence().astype(np.int64)
    vec = start.copy()
    ones_per_set = inc @ vec

    def score(counts: np.ndarray) -> int:
        if below:
            return int((counts < score_threshold_ones).sum())
        return int((counts >= score_threshold_ones).sum())

    best = score(ones_per_set)
    for _ in range(rounds):
        ones_pos = np.flatnonzero(vec == 1)
        zero_pos = np.flatnonzero(vec == 0)
        if ones_pos.size == 0 or zero_pos.size == 0:
            break
        improved = False
        for _ in range(candidates):
            p = int(ones_pos[rng.integers(ones_pos.size)])
            q = int(zero_pos[rng.integers(zero_pos.size)])
            delta_counts = ones_per_set - inc[:, p] + inc[:, q]
            s = score(delta_counts)
            if s > best:
                vec[p], vec[q] = 0, 1
                ones_per_set = delta_counts
                best = s
                improved = True
                break
        if not improved:
            break
    return vec


def adversarial_corpus(
    fam: SamplerFamily, seed: int
) -> list[tuple[str, tuple[int, ...]]]:
    """Documented stress corpus: constants, alternating, random and clustered
    strings at several means, plus local-search worst cases for both
    properties."""
    N = fam.ground_size
    gamma = fam.params.gamma
    rng = rng_from(derive_seed(seed, N))
    corpus: list[tuple[str, tuple[int, ...]]] = [
        ("all-ones", tuple([1] * N)),
        ("all-zeros", tuple([0] * N)),
        ("alternating", tuple((i + 1) % 2 for i in range(N))),
    ]

    def at_popcount(k: int) -> np.ndarray:
        vec = np.zeros(N, dtype=np.int64)
        vec[rng.permutation(N)[:k]] = 1
        return vec

    eta_cut = (1 - gamma) / 2
    for frac_label, mean in (("half", Fraction(1, 2)), ("seven-tenths", Fraction(7, 10))):
        k = int(mean * N)
        corpus.append((f"random-{frac_label}", tuple(at_popcount(k).tolist())))
    for scale_label, scale in (("tight", Fraction(9, 10)), ("mid", Fraction(1, 2)), ("small", Fraction(1, 5))):
        eta = eta_cut * scale
        z = int(eta * N)
        vec = np.ones(N, dtype=np.int64)
        vec[:z] = 0
        corpus.append((f"clustered-zeros-{scale_label}", tuple(vec.tolist())))
        vec2 = np.ones(N, dtype=np.int64)
        vec2[rng.permutation(N)[:z]] = 0
        corpus.append((f"random-zeros-{scale_label}", tuple(vec2.tolist())))
    # worst-case search for property 1 around the deviation boundary
    C = fam.set_size
    if C:
        half = at_popcount(N // 2)
        from .util import threshold_count

        dev_thr = threshold_count(Fraction(1, 2) + fam.params.epsilon, C)
        found = _local_search_string(
            fam, half, dev_thr, below=False, seed=derive_seed(seed, 1)
        )
        corpus.append(("search-deviation", tuple(found.tolist())))
        z = max(1, int(eta_cut * Fraction(4, 5) * N))
        start = np.ones(N, dtype=np.int64)
        start[rng.permutation(N)[:z]] = 0
        low_thr = threshold_count(gamma, C)
        found2 = _local_search_string(
            fam, start, low_thr, below=True, seed=derive_seed(seed, 2)
        )
        corpus.append(("search-low-sample", tuple(found2.tolist())))
    return corpus


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def serialize_family(fam: SamplerFamily) -> str:
    lam = "-" if fam.measured_lambda is None else repr(fam.measured_lambda)
    header = (
        f"sampler {fam.ground_size} {fam.set_size} "
        f"{frac_str(fam.params.epsilon)} {frac_str(fam.params.delta)} "
        f"{frac_str(fam.params.gamma)} {lam}"
    )
    lines = [header]
    lines.extend(" ".join(map(str, s)) for s in fam.sets)
    return "\n".join(lines) + "\n"


def parse_family(text: str) -> SamplerFamily:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("sampler"):
        raise ParseError("missing sampler header", 1)
    toks = lines[0].split()
    if len(toks) != 7:
        raise ParseError("malformed sampler header", 1)
    try:
        N, C = int(toks[1]), int(toks[2])
        params = SamplerParams(
            epsilon=parse_frac(toks[3]),
            delta=parse_frac(toks[4]),
            gamma=parse_frac(toks[5]),
        )
        lam = None if toks[6] == "-" else float(toks[6])
    except ValueError as exc:
        raise ParseError(f"malformed sampler header: {exc}", 1) from None
    sets = []
    for no, ln in enumerate(lines[1:], start=2):
        try:
            s = tuple(int(t) for t in ln.split())
        except ValueError:
            raise ParseError("bad set line", no) from None
        if len(s) != C:
            raise ParseError(f"set of size {len(s)}, expected {C}", no)
        sets.append(s)
    fam = SamplerFamily(
        ground_size=N,
        sets=tuple(sets),
        params=params,
        provenance=PROVENANCE_EXPLICIT,
        measured_lambda=lam,
    )
    return fam
