"""Command-line behavior: exit codes, report determinism, error mapping."""

import json
from pathlib import Path

import pytest

from gapforge.cli import main
from gapforge.csp import CspInstance, disjunction, serialize

from conftest import random_3sat, unit_pair_instance


@pytest.fixture(scope="module")
def toy_cnf(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "toy16.cnf"
    path.write_text(serialize(random_3sat(4, 16, 5)))
    return str(path)


@pytest.fixture(scope="module")
def no48_cnf(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "no48.cnf"
    path.write_text(serialize(unit_pair_instance(8, 48, (0,))))
    return str(path)


def run(args):
    return main(args)


class TestTransformCommand:
    def test_certify_inline(self, toy_cnf, tmp_path):
        report = tmp_path / "t.json"
        circ = tmp_path / "c.rcirc"
        code = run([
            "transform", "--input", toy_cnf, "--certify", "--seed", "3",
            "--out-circuit", str(circ), "--report", str(report),
        ])
        assert code == 0
        doc = json.loads(report.read_text())
        assert doc["accounting"]["proof_length"] == 4 + 31
        assert doc["accounting"]["randomness_strings"] == 16
        assert doc["certificate"]["passed"]
        assert circ.exists()

    def test_missing_certificate_is_usage_error(self, toy_cnf, tmp_path):
        code = run(["transform", "--input", toy_cnf, "--seed", "3"])
        assert code == 2

    def test_waive_cert(self, toy_cnf, tmp_path):
        report = tmp_path / "t.json"
        code = run([
            "transform", "--input", toy_cnf, "--waive-cert", "--seed", "3",
            "--report", str(report),
        ])
        assert code == 0
        assert json.loads(report.read_text())["certificate_waived"]

    def test_randomized_variant_report(self, tmp_path):
        cnf = tmp_path / "m256.cnf"
        cnf.write_text(serialize(random_3sat(6, 256, 1)))
        report = tmp_path / "r.json"
        code = run([
            "transform", "--input", str(cnf), "--variant", "rand", "--fanin", "8",
            "--waive-cert", "--seed", "1", "--report", str(report),
        ])
        assert code == 0
        doc = json.loads(report.read_text())
        assert doc["depth"] == 3 and doc["fan_in"] == 8
        # extra queries per check: f*d + d + 1 over the base width
        assert doc["accounting"]["max_queries"] <= 3 + 8 * 3 + 3 + 1

    def test_parse_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.cnf"
        bad.write_text("p cnf 2 1\n3 0\n")
        assert run(["transform", "--input", str(bad), "--waive-cert"]) == 2


class TestCertifyCommand:
    def test_round_trip_certify(self, toy_cnf, tmp_path):
        circ = tmp_path / "c.rcirc"
        run([
            "transform", "--input", toy_cnf, "--certify", "--seed", "3",
            "--out-circuit", str(circ), "--report", str(tmp_path / "t.json"),
        ])
        report = tmp_path / "cert.json"
        code = run([
            "certify", "--circuit", str(circ), "--seed", "3",
            "--report", str(report),
        ])
        assert code == 0
        doc = json.loads(report.read_text())
        assert doc["certificate"]["passed"]
        assert any("passed" in r for r in doc["sampler_reports"])


class TestOracleCommand:
    def test_report(self, no48_cnf, tmp_path):
        report = tmp_path / "o.json"
        assert run(["oracle", "--input", no48_cnf, "--report", str(report)]) == 0
        doc = json.loads(report.read_text())
        assert doc["result"]["optimum"] == "1/2"

    def test_cap_exit_code(self, tmp_path):
        cnf = tmp_path / "wide.cnf"
        cnf.write_text(serialize(random_3sat(26, 10, 1)))
        assert run(["oracle", "--input", str(cnf), "--cap", "24"]) == 3


class TestGapReduceCommand:
    def test_dry_run(self, no48_cnf, tmp_path):
        report = tmp_path / "g.json"
        code = run([
            "gap-reduce", "--input", no48_cnf, "--mode", "one-sided",
            "--seed", "1", "--dry-run", "--report", str(report),
        ])
        assert code == 0
        doc = json.loads(report.read_text())
        assert "balance" in doc["dry_run"]
        assert "lll_value" in doc["dry_run"]
        assert doc["params"]["k_condition_ok"]

    def test_no_base_verdict_no(self, no48_cnf, tmp_path):
        report = tmp_path / "g.json"
        code = run([
            "gap-reduce", "--input", no48_cnf, "--mode", "one-sided",
            "--seed", "1", "--trials", "3", "--cap", "16",
            "--report", str(report),
        ])
        assert code == 0
        assert json.loads(report.read_text())["driver"]["answer"] == "NO"


class TestDeterminism:
    def test_reports_byte_identical_across_jobs(self, toy_cnf, tmp_path):
        outs = []
        for jobs in ("1", "4"):
            report = tmp_path / f"t{jobs}.json"
            circ = tmp_path / f"c{jobs}.rcirc"
            code = run([
                "transform", "--input", toy_cnf, "--certify", "--seed", "7",
                "--jobs", jobs, "--out-circuit", str(circ),
                "--report", str(report),
            ])
            assert code == 0
            outs.append((report.read_bytes(), circ.read_bytes()))
        assert outs[0] == outs[1]

    def test_certify_reports_byte_identical(self, toy_cnf, tmp_path):
        circ = tmp_path / "c.rcirc"
        run([
            "transform", "--input", toy_cnf, "--certify", "--seed", "7",
            "--out-circuit", str(circ), "--report", str(tmp_path / "_.json"),
        ])
        blobs = []
        for jobs in ("1", "3"):
            report = tmp_path / f"cert{jobs}.json"
            assert run([
                "certify", "--circuit", str(circ), "--seed", "7",
                "--jobs", jobs, "--report", str(report),
            ]) == 0
            blobs.append(report.read_bytes())
        assert blobs[0] == blobs[1]

    def test_bench_deterministic_report(self, tmp_path):
        blobs = []
        for i in range(2):
            report = tmp_path / f"b{i}.json"
            assert run(["bench", "--seed", "2", "--report", str(report)]) == 0
            blobs.append(report.read_bytes())
        assert blobs[0] == blobs[1]


class TestVerifiedFailure:
    def test_bad_circuit_exits_one_with_witness(self, tmp_path):
        from fractions import Fraction
        from gapforge.circuit import RobustCircuit, ThresholdGate, serialize_circuit

        m = 10
        shared = tuple(range(m))
        theta = Fraction(1, 2)
        widths = [5, 3, 2, 1]
        layers = [tuple(ThresholdGate(shared, theta) for _ in range(widths[0]))]
        for prev_w, w in zip(widths, widths[1:]):
            layers.append(
                tuple(ThresholdGate(tuple(range(prev_w)), theta) for _ in range(w))
            )
        bad = RobustCircuit(
            m=m, depth=4, theta=theta, variant="deterministic",
            layers=tuple(layers),
        )
        path = tmp_path / "bad.rcirc"
        path.write_text(serialize_circuit(bad))
        report = tmp_path / "cert.json"
        code = run([
            "certify", "--circuit", str(path), "--seed", "0",
            "--report", str(report),
        ])
        assert code == 1
        doc = json.loads(report.read_text())
        assert not doc["certificate"]["passed"]
        assert any(v["witness"] for v in doc["certificate"]["layers"])


class TestAdversaryFlag:
    def test_exhaustive_adversary_in_report(self, tmp_path):
        cnf = tmp_path / "low.cnf"
        cnf.write_text(serialize(unit_pair_instance(2, 8, (0,))))
        report = tmp_path / "t.json"
        code = run([
            "transform", "--input", str(cnf), "--certify", "--seed", "0",
            "--adversary", "exhaustive", "--report", str(report),
        ])
        assert code == 0
        doc = json.loads(report.read_text())
        num, den = map(int, doc["soundness"]["max_acceptance"].split("/"))
        assert num / den <= 0.9

    def test_adversary_cap_exit_three(self, toy_cnf, tmp_path):
        code = run([
            "transform", "--input", toy_cnf, "--certify", "--seed", "0",
            "--adversary", "exhaustive", "--adversary-cap", "10",
        ])
        assert code == 3

    def test_greedy_adversary_labeled(self, toy_cnf, tmp_path):
        report = tmp_path / "t.json"
        code = run([
            "transform", "--input", toy_cnf, "--certify", "--seed", "0",
            "--adversary", "greedy", "--report", str(report),
        ])
        assert code == 0
        doc = json.loads(report.read_text())
        assert doc["soundness"]["mode"] == "greedy-lower-bound"
        assert doc["soundness"]["analytical_bound"] == "9/10"


class TestEnvSeed:
    def test_gapforge_seed_fallback(self, toy_cnf, tmp_path, monkeypatch):
        monkeypatch.setenv("GAPFORGE_SEED", "7")
        report = tmp_path / "env.json"
        code = run([
            "transform", "--input", toy_cnf, "--waive-cert",
            "--report", str(report),
        ])
        assert code == 0
        assert json.loads(report.read_text())["seed"] == 7
