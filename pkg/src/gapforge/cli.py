"""Command-line pipeline: transform, certify, oracle, gap-reduce, bench.

Every command is deterministic given its inputs and seed: reports embed the
seed and effective parameters, carry a schema version, and never include
wall-clock times, so reruns are byte-identical regardless of --jobs.

Exit codes: 0 success/pass, 1 verified failure (with witness in the report),
2 usage or parse error, 3 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import circuit as circuit_mod
from . import csp, gapeth, oracle, sampler
from .errors import GapforgeError, ParseError, ResourceCapError
from .transform import (
    acceptance_probability,
    export_checks_csp,
    exhaustive_adversary,
    greedy_adversary,
    honest_proof,
    transform,
)

SCHEMA = "gapforge-report/1"

EXIT_OK = 0
EXIT_VERIFIED_FAIL = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3


def _emit(doc: dict, path: str | None):
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _load_instance(path: str) -> csp.CspInstance:
    return csp.parse_instance(Path(path).read_text())


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("GAPFORGE_SEED")
    return int(env) if env else 0


def _certificate_reports(c: circuit_mod.RobustCircuit, seed: int, jobs: int) -> list[dict]:
    """Per-layer sampler reports over the wiring viewed as set families.

    Randomized layers are multisets and are skipped (goodness verdicts cover
    them); explicit-list families carry no spectral data, so the mixing line
    only appears for freshly built deterministic layers.
    """
    docs = []
    scheme = c.scheme or circuit_mod.DEFAULT_SCHEME
    params = sampler.SamplerParams(
        epsilon=scheme.slack, delta=scheme.soundness, gamma=scheme.theta
    )
    for layer in range(1, c.depth + 1):
        gates = c.layers[layer - 1]
        if any(len(set(g.inputs)) != len(g.inputs) for g in gates):
            docs.append({"layer": layer, "skipped": "multiset wiring"})
            continue
        fam = sampler.SamplerFamily(
            ground_size=c.width_in(layer),
            sets=tuple(g.inputs for g in gates),
            params=params,
            provenance=sampler.PROVENANCE_EXPLICIT,
            measured_lambda=(
                c.layer_meta[layer - 1].measured_lambda if c.layer_meta else None
            ),
        )
        corpus = sampler.adversarial_corpus(fam, seed)
        rep = sampler.certify_sampler(fam, corpus, jobs=jobs)
        doc = rep.to_doc()
        doc["layer"] = layer
        docs.append(doc)
    return docs


def cmd_transform(args) -> int:
    seed = _seed(args)
    base = _load_instance(args.input)
    scheme = circuit_mod.DEFAULT_SCHEME
    if args.theta:
        scheme_theta = Fraction(args.theta)
        if scheme_theta != scheme.theta:
            raise GapforgeError(
                "custom theta requires a custom (c, s) pair; override not supported here"
            )
    m = base.num_clauses
    if args.variant == "det":
        circ = circuit_mod.build_deterministic(m, seed=seed)
    else:
        f = args.fanin
        if f is None:
            f, _ = circuit_mod.auto_fan_in(m, seed)
        circ = circuit_mod.build_randomized(m, f, seed)
    cert = None
    if args.cert:
        cert = circuit_mod.GoodnessCertificate.from_doc(
            json.loads(Path(args.cert).read_text())
        )
    elif args.certify:
        cert = circuit_mod.certify_goodness(
            circ, exhaustive_cap=args.exhaustive_cap, trials=args.trials, seed=seed
        )
        if not cert.passed:
            _emit(
                {
                    "schema": SCHEMA,
                    "command": "transform",
                    "seed": seed,
                    "error": "goodness certification failed",
                    "certificate": cert.to_doc(),
                },
                args.report,
            )
            return EXIT_VERIFIED_FAIL
    elif not args.waive_cert:
        raise GapforgeError(
            "no certificate: pass --cert FILE, --certify, or --waive-cert"
        )
    ts = transform(
        base, circ, certificate=cert, waive_certificate=cert is None
    )
    if args.out_circuit:
        Path(args.out_circuit).write_text(circuit_mod.serialize_circuit(circ))
    if args.export_checks:
        exported = export_checks_csp(ts)
        Path(args.export_checks).write_text(csp.serialize(exported))
    doc = {
        "schema": SCHEMA,
        "command": "transform",
        "seed": seed,
        "input": {
            "vars": base.num_vars,
            "clauses": base.num_clauses,
            "width": base.width,
        },
        "variant": args.variant,
        "fan_in": circ.fan_in,
        "depth": circ.depth,
        "widths": circ.widths(),
        "accounting": ts.accounting.to_doc(),
        "certificate": None if cert is None else cert.to_doc(),
        "certificate_waived": cert is None,
    }
    if args.adversary == "exhaustive":
        adv = exhaustive_adversary(ts, cap=args.adversary_cap)
        doc["soundness"] = {
            "mode": "exhaustive",
            "max_acceptance": f"{adv.value.numerator}/{adv.value.denominator}",
        }
    elif args.adversary == "greedy":
        val, _ = greedy_adversary(ts, seed=seed)
        doc["soundness"] = {
            "mode": "greedy-lower-bound",
            "greedy_acceptance": f"{val.numerator}/{val.denominator}",
            "analytical_bound": (
                None
                if circ.scheme is None
                else f"{circ.scheme.new_soundness.numerator}/{circ.scheme.new_soundness.denominator}"
            ),
        }
    _emit(doc, args.report)
    return EXIT_OK


def cmd_certify(args) -> int:
    seed = _seed(args)
    circ = circuit_mod.parse_circuit(Path(args.circuit).read_text())
    cert = circuit_mod.certify_goodness(
        circ, exhaustive_cap=args.exhaustive_cap, trials=args.trials, seed=seed
    )
    doc = {
        "schema": SCHEMA,
        "command": "certify",
        "seed": seed,
        "certificate": cert.to_doc(),
        "sampler_reports": _certificate_reports(circ, seed, args.jobs),
    }
    if args.out_cert:
        Path(args.out_cert).write_text(
            json.dumps(cert.to_doc(), sort_keys=True, indent=2) + "\n"
        )
    _emit(doc, args.report)
    return EXIT_OK if cert.passed else EXIT_VERIFIED_FAIL


def cmd_oracle(args) -> int:
    base = _load_instance(args.input)
    rep = oracle.brute_force_opt(base, cap=args.cap)
    doc = {
        "schema": SCHEMA,
        "command": "oracle",
        "input": {"vars": base.num_vars, "clauses": base.num_clauses},
        "result": rep.to_doc(),
    }
    _emit(doc, args.report)
    return EXIT_OK


def cmd_gap_reduce(args) -> int:
    seed = _seed(args)
    base = _load_instance(args.input)
    p = gapeth.ReductionParams(
        s=Fraction(args.s),
        epsilon=Fraction(args.eps),
        k=args.k,
        t=args.t,
        seed=seed,
    ).with_base(base)
    doc = {
        "schema": SCHEMA,
        "command": "gap-reduce",
        "seed": seed,
        "mode": args.mode,
        "params": {
            "s": f"{p.s.numerator}/{p.s.denominator}",
            "epsilon": f"{p.epsilon.numerator}/{p.epsilon.denominator}",
            "k": p.k,
            "t": p.t,
            "k_condition_value": f"{p.k_condition_value.numerator}/{p.k_condition_value.denominator}",
            "k_condition_ok": p.k_condition_ok,
        },
    }
    if args.mode == "one-sided":
        fam = gapeth.reduction_family(p, p.t * base.num_clauses, seed)
        if args.dry_run:
            lst = gapeth.sample_list(base, p)
            balance = gapeth.check_balanced(lst, p)
            d, p_est, lll_value, lll_ok = gapeth._lll_numbers(p, fam)
            doc["dry_run"] = {
                "balance": balance.to_doc(),
                "intersection_degree": d,
                "per_clause_failure_estimate": p_est,
                "lll_value": lll_value,
                "lll_ok": lll_ok,
            }
            _emit(doc, args.report)
            return EXIT_OK
        driver = gapeth.solve_driver(
            base,
            p,
            args.trials,
            subroutine=lambda inst: oracle.is_satisfiable(inst, cap=args.cap),
            reduction="one-sided",
            fam=fam,
        )
    else:
        if args.dry_run:
            _, rep = gapeth.reduce_two_sided(base, p)
            doc["dry_run"] = rep.to_doc()
            _emit(doc, args.report)
            return EXIT_OK
        driver = gapeth.solve_driver(
            base,
            p,
            args.trials,
            subroutine=lambda inst: oracle.is_satisfiable(inst, cap=args.cap),
            reduction="two-sided",
        )
    doc["driver"] = driver.to_doc()
    _emit(doc, args.report)
    return EXIT_OK


def cmd_bench(args) -> int:
    seed = _seed(args)
    timings = {}
    t0 = time.perf_counter()
    circ = circuit_mod.build_deterministic(32, seed=seed)
    timings["build_deterministic_m32"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    cert = circuit_mod.certify_goodness(circ, seed=seed)
    timings["certify_m32"] = time.perf_counter() - t0
    base = csp.CspInstance(
        4,
        tuple(
            csp.disjunction([(v, True) for v in (0, 1, 2)])
            for _ in range(32)
        ),
    )
    t0 = time.perf_counter()
    ts = transform(base, circ, certificate=cert)
    proof = honest_proof(ts, (1, 1, 1, 1))
    value = acceptance_probability(ts, proof)
    timings["transform_and_accept"] = time.perf_counter() - t0
    for name, dt in timings.items():
        print(f"{name}: {dt:.3f}s", file=sys.stderr)
    doc = {
        "schema": SCHEMA,
        "command": "bench",
        "seed": seed,
        "pipeline": {
            "m": 32,
            "certificate_passed": cert.passed,
            "honest_acceptance": f"{value.numerator}/{value.denominator}",
        },
    }
    _emit(doc, args.report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="gapforge", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (falls back to GAPFORGE_SEED, then 0)")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker cap; outputs do not depend on it")
        p.add_argument("--report", type=str, default=None,
                       help="write the JSON report here instead of stdout")

    p = sub.add_parser("transform", help="wrap an instance into the perfectly complete system")
    p.add_argument("--input", required=True)
    p.add_argument("--variant", choices=("det", "rand"), default="det")
    p.add_argument("--fanin", type=int, default=None)
    p.add_argument("--theta", type=str, default=None)
    p.add_argument("--cert", type=str, default=None, help="goodness certificate file")
    p.add_argument("--certify", action="store_true", help="certify in-process")
    p.add_argument("--waive-cert", action="store_true")
    p.add_argument("--exhaustive-cap", type=int, default=circuit_mod.EXHAUSTIVE_CAP)
    p.add_argument("--trials", type=int, default=64)
    p.add_argument("--adversary", choices=("none", "exhaustive", "greedy"),
                   default="none", help="also bound the transformed soundness")
    p.add_argument("--adversary-cap", type=int, default=24)
    p.add_argument("--out-circuit", type=str, default=None)
    p.add_argument("--export-checks", type=str, default=None)
    common(p)
    p.set_defaults(fn=cmd_transform)

    p = sub.add_parser("certify", help="goodness certificate + sampler reports for a circuit file")
    p.add_argument("--circuit", required=True)
    p.add_argument("--exhaustive-cap", type=int, default=circuit_mod.EXHAUSTIVE_CAP)
    p.add_argument("--trials", type=int, default=64)
    p.add_argument("--out-cert", type=str, default=None)
    common(p)
    p.set_defaults(fn=cmd_certify)

    p = sub.add_parser("oracle", help="brute-force optimum of an instance")
    p.add_argument("--input", required=True)
    p.add_argument("--cap", type=int, default=oracle.DEFAULT_ASSIGNMENT_CAP)
    common(p)
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("gap-reduce", help="run a gap reduction / solver driver")
    p.add_argument("--input", required=True)
    p.add_argument("--mode", choices=("one-sided", "two-sided"), default="one-sided")
    p.add_argument("--s", type=str, default="3/4")
    p.add_argument("--eps", type=str, default="1/4")
    p.add_argument("--k", type=int, default=64)
    p.add_argument("--t", type=int, default=32)
    p.add_argument("--trials", type=int, default=64)
    p.add_argument("--cap", type=int, default=oracle.DEFAULT_ASSIGNMENT_CAP)
    p.add_argument("--dry-run", action="store_true")
    common(p)
    p.set_defaults(fn=cmd_gap_reduce)

    p = sub.add_parser("bench", help="time a small fixed pipeline (timings to stderr)")
    common(p)
    p.set_defaults(fn=cmd_bench)
    return top


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except ParseError as exc:
        print(f"gapforge: parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceCapError as exc:
        print(f"gapforge: resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except GapforgeError as exc:
        print(f"gapforge: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"gapforge: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
