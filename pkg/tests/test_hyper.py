"""Valuation decomposition, cutoff checks, and theoretical bounds."""

import pytest

from popverif.errors import ModeGateError, ProtocolError
from popverif.hyper import (
    achievable_valuations,
    achievable_valuations_oracle,
    bound_exponents,
    check_config,
    check_protocol,
    check_protocol_ltl,
    initial_configs_upto,
    theoretical_bounds,
)
from popverif.ltl import (
    dualize_hyper,
    parse_hyper,
    parse_ltl,
    wellspec_formula,
)
from popverif.model import Configuration, complete_totality, parse_protocol
from popverif.product import make_product_system, sat_forall
from popverif.flows import empirical_blindness

from conftest import random_formula, random_iopp, seeded


def conv_blocks(protocol):
    psi = wellspec_formula(protocol)
    return tuple(f for v, f in psi.blocks if v == "r1")


class TestAchievableValuations:
    def test_mixed_start_reaches_consensus_one(self, conv_protocol):
        blocks = conv_blocks(conv_protocol)  # (FG delta0, FG delta1)
        got = achievable_valuations(Configuration((1, 1)), blocks, conv_protocol)
        assert got == {(False, True)}

    def test_all_n_start_stays_at_zero(self, conv_protocol):
        blocks = conv_blocks(conv_protocol)
        got = achievable_valuations(Configuration((2, 0)), blocks, conv_protocol)
        assert got == {(True, False)}

    def test_empty_blocks(self, conv_protocol):
        assert achievable_valuations(Configuration((1, 1)), (), conv_protocol) == {()}

    def test_oracle_agrees_on_examples(self, conv_protocol):
        blocks = conv_blocks(conv_protocol)
        for counts in ((1, 1), (2, 0), (0, 2), (2, 1)):
            gamma = Configuration(counts)
            assert achievable_valuations(
                gamma, blocks, conv_protocol
            ) == achievable_valuations_oracle(gamma, blocks, conv_protocol)

    def test_oracle_agrees_on_random_corpus(self):
        rng = seeded(550)
        for _ in range(6):
            p = random_iopp(rng, rng.randint(2, 3), rng.randint(1, 2))
            blocks = tuple(
                random_formula(rng, p.transition_ids(), rng.randint(1, 3),
                               allow_next=False)
                for _ in range(rng.randint(1, 2))
            )
            for counts in [(2, 0, 0), (1, 1, 0), (1, 1, 1)]:
                counts = counts[: p.num_states]
                if len(counts) < p.num_states or sum(counts) < 2:
                    continue
                gamma = Configuration(counts)
                assert achievable_valuations(
                    gamma, blocks, p
                ) == achievable_valuations_oracle(gamma, blocks, p)

    def test_x_gate(self, conv_protocol):
        with pytest.raises(ModeGateError):
            achievable_valuations(
                Configuration((1, 1)),
                (parse_ltl("X n2y", conv_protocol),),
                conv_protocol,
            )


class TestCheckConfig:
    def test_wellspec_holds_from_mixed(self, conv_protocol):
        psi = wellspec_formula(conv_protocol)
        assert check_config(Configuration((1, 1)), psi, conv_protocol)
        assert check_config(Configuration((2, 0)), psi, conv_protocol)

    def test_self_contradictory_exchange(self, conv_protocol):
        # both variables range over the same runs; with one achievable
        # valuation the matrix phi[r1] & !phi[r2] cannot be satisfied
        psi = parse_hyper(
            "forall r1. exists r2. (F G idle_N_N[r1] & !(F G idle_N_N[r2]))",
            conv_protocol,
        )
        assert not check_config(Configuration((2, 0)), psi, conv_protocol)

    def test_trivial_existential(self, conv_protocol):
        psi = parse_hyper("exists r1. (F true)", conv_protocol)
        assert check_config(Configuration((1, 1)), psi, conv_protocol)

    def test_duality_on_corpus(self, conv_protocol):
        psi = wellspec_formula(conv_protocol)
        dual = dualize_hyper(psi)
        for counts in ((1, 1), (2, 0), (0, 2), (2, 1), (1, 2)):
            gamma = Configuration(counts)
            assert check_config(gamma, psi, conv_protocol) != check_config(
                gamma, dual, conv_protocol
            )

    def test_matches_sat_forall_for_universal_singleton(self):
        rng = seeded(551)
        for _ in range(6):
            p = random_iopp(rng, rng.randint(2, 3), rng.randint(1, 2))
            phi = random_formula(rng, p.transition_ids(), rng.randint(1, 3),
                                 allow_next=False)
            from popverif.ltl import HyperFormula, BRef

            psi = HyperFormula(
                prefix=(("forall", "r"),), blocks=(("r", phi),), matrix=BRef(0)
            )
            ps = make_product_system(p, phi, "accelerated")
            for counts in [(2, 0, 0), (1, 1, 0), (0, 1, 2)]:
                counts = counts[: p.num_states]
                if len(counts) < p.num_states or sum(counts) < 2:
                    continue
                gamma = Configuration(counts)
                assert check_config(gamma, psi, p) == sat_forall(gamma, ps)


class TestCheckProtocol:
    def test_convergence_well_specified(self, conv_protocol):
        psi = wellspec_formula(conv_protocol)
        verdict = check_protocol(conv_protocol, psi, mode="forall", cutoff=3)
        assert verdict.holds
        assert verdict.scope == "up-to-cutoff"
        # counts <= 3 over two initial states, size >= 2: 16 - 3 small tuples
        assert verdict.stats["configs_checked"] == 13

    def test_rigged_counterexample_is_lex_least(self, rigged_protocol):
        psi = wellspec_formula(rigged_protocol)
        verdict = check_protocol(rigged_protocol, psi, mode="forall", cutoff=3)
        assert not verdict.holds
        assert verdict.witness == Configuration((0, 1, 1))

    def test_exists_mode_returns_witness(self, conv_protocol):
        psi = wellspec_formula(conv_protocol)
        verdict = check_protocol(conv_protocol, psi, mode="exists", cutoff=2)
        assert verdict.holds
        assert verdict.witness == Configuration((0, 2))

    def test_vacuous_cutoff_warns(self):
        p = complete_totality(
            parse_protocol("states A B\ninitial A\ntrans t: A --B--> B")
        )
        psi = parse_hyper("forall r1. (F true | G t[r1])", p)
        verdict = check_protocol(p, psi, mode="forall", cutoff=1)
        assert verdict.holds
        assert verdict.stats.get("vacuous") is True

    def test_non_iopp_rejected(self):
        p = complete_totality(
            parse_protocol("states A B\ninitial A\ntrans t: (A,B)->(B,A)")
        )
        psi = parse_hyper("forall r1. F t[r1]", p)
        with pytest.raises(ProtocolError):
            check_protocol(p, psi)

    def test_parallel_scan_matches_sequential(self, rigged_protocol):
        psi = wellspec_formula(rigged_protocol)
        seq = check_protocol(rigged_protocol, psi, mode="forall", cutoff=2)
        par = check_protocol(rigged_protocol, psi, mode="forall", cutoff=2, jobs=2)
        assert (seq.answer, seq.witness) == (par.answer, par.witness)


class TestCheckProtocolLtl:
    def test_true_holds(self, conv_protocol):
        verdict = check_protocol_ltl(conv_protocol, parse_ltl("true", conv_protocol))
        assert verdict.holds

    def test_eventually_fire_violated_with_lex_least_witness(self, conv_protocol):
        phi = parse_ltl("F n2y", conv_protocol)
        verdict = check_protocol_ltl(conv_protocol, phi, mode="forall", cutoff=2)
        assert not verdict.holds
        # all-Y start never enables n2y and is lex-least among failures
        assert verdict.witness == Configuration((0, 2))

    def test_exists_mode_finds_mixed_start(self, conv_protocol):
        phi = parse_ltl("F n2y", conv_protocol)
        verdict = check_protocol_ltl(conv_protocol, phi, mode="exists", cutoff=2)
        assert verdict.holds
        assert verdict.witness == Configuration((1, 1))

    def test_plain_fallback_for_general_protocols(self):
        p = complete_totality(
            parse_protocol("states A B\ninitial A B\ntrans t: (A,B)->(B,A)")
        )
        verdict = check_protocol_ltl(p, parse_ltl("true", p), cutoff=2)
        assert verdict.holds

    def test_next_formula_uses_plain(self, conv_protocol):
        phi = parse_ltl("X (F n2y)", conv_protocol)
        verdict = check_protocol_ltl(conv_protocol, phi, mode="exists", cutoff=2)
        assert verdict.holds


class TestEnumeration:
    def test_initial_configs_ascending_lex(self, conv_protocol):
        got = [c.counts for c in initial_configs_upto(conv_protocol, 2)]
        assert got == [(0, 2), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2)]

    def test_support_restricted_to_initial(self):
        p = complete_totality(
            parse_protocol("states A B\ninitial A\ntrans t: A --B--> B")
        )
        for c in initial_configs_upto(p, 4):
            assert c.counts[1] == 0


class TestSatSetBlindness:
    def test_wellspec_sat_set_stabilizes(self, conv_protocol):
        psi = wellspec_formula(conv_protocol)
        cache = {}

        def pred(gamma, _loc):
            if gamma.counts not in cache:
                cache[gamma.counts] = check_config(gamma, psi, conv_protocol)
            return cache[gamma.counts]

        k = empirical_blindness(pred, conv_protocol.num_states, range(2, 7), 4)
        assert k is not None and k <= 4


class TestTheoreticalBounds:
    def test_reference_value_against_mpmath(self, conv_protocol):
        import mpmath

        mpmath.mp.dps = 50
        report = theoretical_bounds(conv_protocol, [2], k_prime=1)
        row = report["rows"][0]
        m = 2
        exponent = (
            mpmath.mpf(3) ** (m * m + 2)
            * 2
            * (mpmath.log(m * m + 2, 2) + 1)
            * (m * m)
        )
        expected = exponent * mpmath.log(3, 10)
        assert abs(row["log10_B"] - float(expected)) <= 1.0

    def test_k_is_m_squared_times_2b_for_small_k_prime(self, conv_protocol):
        import math

        row = theoretical_bounds(conv_protocol, [2], k_prime=1)["rows"][0]
        expected = math.log10(4) + math.log10(2) + row["log10_B"]
        assert abs(row["log10_K"] - expected) < 1e-6

    def test_monotone_in_m_and_control_size(self):
        rows = [bound_exponents(m, 2) for m in (1, 2, 3)]
        assert rows[0]["log10_B"] < rows[1]["log10_B"] < rows[2]["log10_B"]
        rows = [bound_exponents(2, M) for M in (1, 2, 4)]
        assert rows[0]["log10_B"] < rows[1]["log10_B"] < rows[2]["log10_B"]
