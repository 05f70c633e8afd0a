import random
from fractions import Fraction
from itertools import combinations, permutations
from math import comb

import pytest

from ofw.detection import (
    analyze,
    berlekamp_welch,
    correctness_guard,
    enumerate_reveals,
    influence_count,
    influence_fraction_minimal,
    majority_agreement,
)
from ofw.errors import DecodeFailure, ThresholdError
from ofw.modmath import DEFAULT_MODULUS
from ofw.sharing.base import SchemeConfig, Share, shamir_share

N = DEFAULT_MODULUS


def corrupt(shares, pid, delta):
    return [
        Share(s.party_id, (s.value + delta) % s.modulus, s.scheme, s.modulus)
        if s.party_id == pid else s
        for s in shares
    ]


class TestEnumerateReveals:
    def test_exactly_one_entry_at_threshold(self, rng):
        cfg = SchemeConfig("shamir", m=3, t=3, modulus=N)
        table = enumerate_reveals(shamir_share(5, cfg, rng), 3)
        assert len(table.entries) == 1

    def test_thirty_five_combinations(self, rng):
        cfg = SchemeConfig("shamir", m=7, t=3, modulus=N)
        table = enumerate_reveals(shamir_share(5, cfg, rng), 3)
        assert len(table.entries) == comb(7, 3) == 35

    def test_honest_entries_all_equal(self, rng):
        cfg = SchemeConfig("shamir", m=6, t=3, modulus=N)
        table = enumerate_reveals(shamir_share(777, cfg, rng), 3)
        assert set(table.entries.values()) == {777}

    def test_below_threshold_rejected(self, rng):
        cfg = SchemeConfig("shamir", m=3, t=3, modulus=N)
        with pytest.raises(ThresholdError):
            enumerate_reveals(shamir_share(5, cfg, rng)[:2], 3)


class TestAnalyze:
    def test_single_corrupter_worked_case(self, rng):
        cfg = SchemeConfig("shamir", m=7, t=3, modulus=N)
        shares = corrupt(shamir_share(123, cfg, rng), 4, 999)
        report = analyze(enumerate_reveals(shares, 3))
        assert report.consensus_value == 123
        assert report.disagreement
        assert report.influenced_count == 15  # the 20-vs-15 split
        assert report.suspects == frozenset({4})

    def test_all_honest(self, rng):
        cfg = SchemeConfig("shamir", m=5, t=2, modulus=N)
        report = analyze(enumerate_reveals(shamir_share(9, cfg, rng), 2))
        assert not report.disagreement
        assert report.consensus_value == 9
        assert report.suspects == frozenset()

    def test_four_responders_no_majority(self, rng):
        # 3 of 4 combinations are influenced and reveal pairwise different
        # values, so no strict majority can be trusted
        cfg = SchemeConfig("shamir", m=4, t=3, modulus=N)
        shares = corrupt(shamir_share(5, cfg, rng), 1, 3)
        report = analyze(enumerate_reveals(shares, 3))
        assert report.disagreement
        assert report.consensus_value is None
        assert report.influenced_count == 3

    def test_permutation_invariant(self, rng):
        cfg = SchemeConfig("shamir", m=5, t=2, modulus=N)
        shares = corrupt(shamir_share(31, cfg, rng), 2, 17)
        reports = {
            analyze(enumerate_reveals(list(p), 2))
            for p in permutations(shares)
        }
        assert len(reports) == 1

    def test_detection_soundness_randomized(self):
        # m' >= t+1 with >= t honest responders: any corruption that changes a
        # revealed value is flagged
        rng = random.Random(61)
        for _ in range(200):
            t = rng.randrange(2, 4)
            m = rng.randrange(t + 1, 8)
            cfg = SchemeConfig("shamir", m=m, t=t, modulus=N)
            shares = shamir_share(rng.randrange(N), cfg, rng)
            shares = corrupt(shares, rng.randrange(1, m + 1), rng.randrange(1, N))
            assert analyze(enumerate_reveals(shares, t)).disagreement

    def test_identification_soundness_exhaustive_small_field(self):
        # m' = 2t+1, x = 1: the corrupter is named exactly, for every
        # corrupter identity and every corruption value in Z_11
        rng = random.Random(62)
        cfg = SchemeConfig("shamir", m=5, t=2, modulus=11)
        for pid in range(1, 6):
            for delta in range(1, 11):
                shares = corrupt(shamir_share(7, cfg, rng), pid, delta)
                report = analyze(enumerate_reveals(shares, 2))
                assert report.consensus_value == 7
                assert report.suspects == frozenset({pid})


class TestInfluenceBounds:
    def test_paper_values(self):
        assert influence_count(1, 7, 3) == 15
        assert influence_count(0, 7, 3) == 0
        assert influence_count(2, 7, 3) == 25

    def test_exhaustive_oracle_all_small_m(self):
        for m in range(1, 10):
            for t in range(1, m + 1):
                for x in range(0, m + 1):
                    bad = set(range(1, x + 1))
                    brute = sum(
                        1 for c in combinations(range(1, m + 1), t) if bad & set(c)
                    )
                    assert influence_count(x, m, t) == brute

    def test_guard_values(self):
        assert correctness_guard(7, 3, 1) is True  # 35 > 30
        assert correctness_guard(7, 3, 2) is False  # 35 <= 50
        for m_prime in range(3, 9):
            assert correctness_guard(m_prime, 3, 0) is True

    def test_minimal_fraction(self):
        assert influence_fraction_minimal(3) == Fraction(3, 7) == Fraction(15, 35)
        assert influence_fraction_minimal(2) == Fraction(2, 5)
        for t in range(2, 7):
            assert influence_fraction_minimal(t) == Fraction(
                influence_count(1, 2 * t + 1, t), comb(2 * t + 1, t)
            )


class TestBerlekampWelch:
    def test_zero_errors_equals_interpolation(self, rng):
        cfg = SchemeConfig("shamir", m=5, t=3, modulus=N)
        shares = shamir_share(4242, cfg, rng)
        points = [(s.party_id, s.value) for s in shares]
        dec = berlekamp_welch(points, 3, 1, N)
        assert dec.secret == 4242
        assert dec.error_positions == frozenset()

    def test_single_corruption_recovered(self, rng):
        cfg = SchemeConfig("shamir", m=5, t=2, modulus=N)
        shares = corrupt(shamir_share(777, cfg, rng), 3, 5)
        dec = berlekamp_welch([(s.party_id, s.value) for s in shares], 2, 1, N)
        assert dec.secret == 777
        assert dec.error_positions == frozenset({3})

    def test_two_corruptions_recovered(self, rng):
        cfg = SchemeConfig("shamir", m=7, t=3, modulus=N)
        shares = corrupt(corrupt(shamir_share(31337, cfg, rng), 2, 101), 6, 9)
        dec = berlekamp_welch([(s.party_id, s.value) for s in shares], 3, 2, N)
        assert dec.secret == 31337
        assert dec.error_positions == frozenset({2, 6})

    def test_agrees_with_enumeration_consensus(self, rng):
        cfg = SchemeConfig("shamir", m=7, t=3, modulus=N)
        for _ in range(100):
            secret = rng.randrange(N)
            pid = rng.randrange(1, 8)
            shares = corrupt(shamir_share(secret, cfg, rng), pid, rng.randrange(1, N))
            report = analyze(enumerate_reveals(shares, 3))
            dec = berlekamp_welch([(s.party_id, s.value) for s in shares], 3, 2, N)
            assert dec.secret == report.consensus_value == secret
            assert dec.error_positions == report.suspects == frozenset({pid})

    def test_beyond_bound_declares_failure(self, rng):
        cfg = SchemeConfig("shamir", m=7, t=3, modulus=N)
        for _ in range(50):
            shares = shamir_share(rng.randrange(N), cfg, rng)
            for pid in (1, 3, 5):  # three errors, bound is two
                shares = corrupt(shares, pid, rng.randrange(1, N))
            with pytest.raises(DecodeFailure):
                berlekamp_welch([(s.party_id, s.value) for s in shares], 3, 2, N)

    def test_not_enough_points_rejected(self, rng):
        cfg = SchemeConfig("shamir", m=4, t=3, modulus=N)
        points = [(s.party_id, s.value) for s in shamir_share(1, cfg, rng)]
        with pytest.raises(DecodeFailure):
            berlekamp_welch(points, 3, 1, N)  # needs t + 2e = 5 points

    def test_zero_error_budget_with_corruption_fails(self, rng):
        cfg = SchemeConfig("shamir", m=5, t=3, modulus=N)
        shares = corrupt(shamir_share(5, cfg, rng), 2, 7)
        with pytest.raises(DecodeFailure):
            berlekamp_welch([(s.party_id, s.value) for s in shares], 3, 0, N)


class TestMajorityAgreement:
    def test_unanimous(self):
        decision, dissent = majority_agreement({1: "block", 2: "block", 3: "block"})
        assert decision == "block" and dissent == frozenset()

    def test_single_dissenter_logged(self, caplog):
        import logging

        votes = {pid: "forward" for pid in range(1, 8)}
        votes[5] = "block"
        with caplog.at_level(logging.INFO, logger="ofw.detection"):
            decision, dissent = majority_agreement(votes)
        assert decision == "forward"
        assert dissent == frozenset({5})
        assert any("dissent" in rec.message for rec in caplog.records)

    def test_tie_falls_back_to_policy(self):
        votes = {1: "block", 2: "block", 3: "forward", 4: "forward"}
        assert majority_agreement(votes, "closed")[0] == "block"
        assert majority_agreement(votes, "open")[0] == "forward"
