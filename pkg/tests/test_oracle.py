"""Ground-truth oracle behavior, tail-bound formulas, estimators."""

import math
from fractions import Fraction

import numpy as np
import pytest

from gapforge.circuit import ThresholdGate
from gapforge.csp import Clause, CspInstance, disjunction, satisfied_fraction
from gapforge.errors import ResourceCapError
from gapforge.oracle import (
    brute_force_opt,
    chernoff_tail,
    estimate,
    exhaustive_layer_check,
    is_satisfiable,
    lll_condition,
)
from gapforge.util import rng_from

from conftest import random_3sat, unit_pair_instance
from test_csp import all_sign_patterns


class TestBruteForce:
    def test_all_sign_patterns(self):
        rep = brute_force_opt(all_sign_patterns())
        assert rep.optimum == Fraction(7, 8)
        assert rep.enumeration_size == 8

    def test_single_clause(self):
        inst = CspInstance(3, (disjunction([(0, True), (1, True), (2, True)]),))
        assert brute_force_opt(inst).optimum == 1

    def test_zero_variable_degenerate(self):
        rep = brute_force_opt(CspInstance(0, ()))
        assert rep.degenerate and rep.optimum == 1

    def test_cap(self):
        inst = CspInstance(30, (disjunction([(0, True)]),))
        with pytest.raises(ResourceCapError):
            brute_force_opt(inst, cap=24)

    def test_argmax_ties_break_low(self):
        inst = unit_pair_instance(2, 4, (0,))
        rep = brute_force_opt(inst)
        assert rep.argmax == (0, 0)  # assignment 0 already achieves 1/2

    def test_agrees_with_satisfied_fraction_spot_checks(self):
        rng = rng_from(17)
        for i in range(5):
            inst = random_3sat(8, 20, i)
            rep = brute_force_opt(inst)
            assert satisfied_fraction(inst, rep.argmax) == rep.optimum
            for _ in range(20):
                bits = tuple(int(b) for b in rng.integers(0, 2, 8))
                assert satisfied_fraction(inst, bits) <= rep.optimum

    def test_is_satisfiable(self):
        assert is_satisfiable(random_3sat(6, 5, 2))
        assert not is_satisfiable(unit_pair_instance(2, 4, (0,)))


class TestLayerCheck:
    def test_identity_wiring_fails_with_witness(self):
        w = 10
        gates = [ThresholdGate((i,), Fraction(1, 2)) for i in range(w)]
        rep = exhaustive_layer_check(gates, w, Fraction(7, 10), Fraction(6, 10))
        assert not rep.passed
        assert rep.witness is not None
        assert sum(rep.witness) <= 7  # violating string respects the mean bound

    def test_full_fan_in_theta_08_passes(self):
        w = 10
        gates = [ThresholdGate(tuple(range(w)), Fraction(4, 5)) for _ in range(5)]
        rep = exhaustive_layer_check(gates, w, Fraction(7, 10), Fraction(6, 10))
        assert rep.passed
        assert rep.worst_output_count == 0  # 0.7 < 0.8 means nobody fires

    def test_same_inputs_low_theta_caught(self):
        w = 10
        shared = tuple(range(w))
        gates = [ThresholdGate(shared, Fraction(1, 2)) for _ in range(5)]
        rep = exhaustive_layer_check(gates, w, Fraction(7, 10), Fraction(6, 10))
        assert not rep.passed and rep.worst_output_count == 5

    def test_width_cap(self):
        gates = [ThresholdGate((0,), Fraction(1, 2))]
        with pytest.raises(ResourceCapError):
            exhaustive_layer_check(gates, 23, Fraction(7, 10), Fraction(6, 10))

    def test_strings_checked_counts_mean_bound(self):
        w = 8
        gates = [ThresholdGate(tuple(range(w)), Fraction(4, 5))]
        rep = exhaustive_layer_check(gates, w, Fraction(7, 10), Fraction(6, 10))
        expected = sum(math.comb(w, k) for k in range(0, 5 + 1))  # popcount <= 5
        assert rep.strings_checked == expected


class TestChernoff:
    def test_upper_form_example(self):
        val = chernoff_tail("bound-1-upper", Fraction(1, 2), Fraction(1), 12)
        assert val == pytest.approx(math.exp(-2))

    def test_small_delta_near_one(self):
        val = chernoff_tail("bound-1-upper", Fraction(1, 2), Fraction(1, 10**6), 10)
        assert val == pytest.approx(1.0, abs=1e-9)

    def test_monotone_decreasing_in_n(self):
        vals = [
            chernoff_tail("bound-1-lower", Fraction(1, 2), Fraction(1, 2), n)
            for n in (4, 8, 16, 32)
        ]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_bound2_range(self):
        assert chernoff_tail("bound-2", Fraction(1, 2), Fraction(3), 10) < 1
        with pytest.raises(ValueError):
            chernoff_tail("bound-2", Fraction(1, 2), Fraction(1), 10)
        with pytest.raises(ValueError):
            chernoff_tail("bound-1-upper", Fraction(1, 2), Fraction(2), 10)


class TestLLL:
    def test_zero(self):
        assert lll_condition(0.0, 5) == (0.0, True)

    def test_boundary(self):
        d = 7
        value, ok = lll_condition(1.0 / (math.e * (d + 1)), d)
        assert value == pytest.approx(1.0)
        assert ok

    def test_violated(self):
        value, ok = lll_condition(0.5, 10)
        assert value == pytest.approx(0.5 * math.e * 11)
        assert not ok


class TestEstimate:
    def test_constant_true(self):
        rep = estimate(lambda seed: True, 100, 0)
        assert rep.frequency == 1 and rep.wilson_high == 1.0

    def test_constant_false(self):
        rep = estimate(lambda seed: False, 100, 0)
        assert rep.frequency == 0

    def test_fair_coin_interval(self):
        rep = estimate(lambda seed: rng_from(seed).integers(0, 2) == 1, 10_000, 5)
        assert rep.wilson_low <= 0.5 <= rep.wilson_high

    def test_jobs_do_not_change_result(self):
        event = lambda seed: rng_from(seed).random() < 0.3
        a = estimate(event, 500, 9, jobs=1)
        b = estimate(event, 500, 9, jobs=4)
        assert a == b
