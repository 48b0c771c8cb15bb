"""Pairing-probability tests: closed forms, the enumeration oracle, and
the text format."""

import math

import numpy as np
import pytest

from rnadot.bppm import (
    Bppm,
    EnergyModel,
    compute_bppm,
    default_prune,
    enumerate_structures,
    inside,
    oracle_bppm,
    outside_pair_probs,
    pair_weight,
    read_bppm,
    row_sums,
    write_bppm,
)
from rnadot.rng import substream
from rnadot.seqio import RnaSequence

MODEL = EnergyModel()
W_GC = math.exp(3.0 / 0.6163)


def seq(residues: str) -> RnaSequence:
    return RnaSequence(id="t", family="T", residues=residues)


def random_seq(rng, n: int) -> RnaSequence:
    return seq("".join(rng.choice(list("ACGU"), size=n)))


class TestEnergyModel:
    def test_gc_weight(self):
        assert pair_weight(MODEL, "G", "C") == pytest.approx(W_GC, rel=1e-15)

    def test_forbidden_pair_is_zero(self):
        assert pair_weight(MODEL, "A", "G") == 0.0

    def test_order_insensitive(self):
        assert pair_weight(MODEL, "U", "G") == pair_weight(MODEL, "G", "U")

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            EnergyModel(rt=0.0)
        with pytest.raises(ValueError):
            EnergyModel(min_hairpin=-1)
        with pytest.raises(ValueError):
            EnergyModel(e_gc=float("inf"))

    def test_fingerprint_tracks_parameters(self):
        assert MODEL.fingerprint() != EnergyModel(rt=1.0).fingerprint()


class TestInside:
    def test_no_pairable_span_gives_unit_sum(self):
        logq = inside(seq("AAAA"), MODEL)
        assert math.exp(logq[1, 4]) == 1.0

    def test_two_structure_ensemble(self):
        logq = inside(seq("GAAAC"), MODEL)
        assert math.exp(logq[1, 5]) == pytest.approx(1.0 + W_GC, rel=1e-12)

    def test_matches_oracle_partition_sum(self):
        rng = substream(100, "inside-oracle")
        for _ in range(5):
            s = random_seq(rng, 12)
            total = sum(w for _, w in enumerate_structures(s, MODEL))
            logq = inside(s, MODEL)
            assert math.exp(logq[1, 12]) == pytest.approx(total, rel=1e-9)


class TestEnumeration:
    def test_two_structures_for_single_stem(self):
        structs = enumerate_structures(seq("GAAAC"), MODEL)
        pairsets = sorted(tuple(sorted(p)) for p, _ in structs)
        assert pairsets == [(), ((1, 5),)]
        weights = {tuple(sorted(p)): w for p, w in structs}
        assert weights[()] == 1.0
        assert weights[((1, 5),)] == pytest.approx(W_GC, rel=1e-15)

    def test_hand_enumerated_seven_mer(self):
        structs = enumerate_structures(seq("GGAAACC"), MODEL)
        got = sorted(tuple(sorted(p)) for p, _ in structs)
        expected = sorted(
            [
                (),
                ((1, 6),),
                ((1, 7),),
                ((2, 6),),
                ((2, 7),),
                ((1, 7), (2, 6)),
            ]
        )
        assert got == expected

    def test_empty_only_without_pairable_span(self):
        assert len(enumerate_structures(seq("AAAA"), MODEL)) == 1

    def test_size_guard(self):
        with pytest.raises(ValueError, match="22"):
            enumerate_structures(random_seq(substream(0, "guard"), 23), MODEL)

    def test_no_crossing_or_shared_endpoints(self):
        rng = substream(4, "wellformed")
        s = random_seq(rng, 14)
        for pairs, _ in enumerate_structures(s, MODEL):
            flat = [x for p in pairs for x in p]
            assert len(flat) == len(set(flat))
            for (i, j) in pairs:
                assert j - i >= MODEL.min_hairpin + 1
                for (k, l) in pairs:
                    # nested or disjoint, never crossing
                    assert not (i < k < j < l)


class TestPairProbabilities:
    def test_closed_form_single_pair(self):
        b = compute_bppm(seq("GAAAC"), MODEL, prune_threshold=0.0)
        expect = W_GC / (1.0 + W_GC)
        assert b.p[0, 4] == pytest.approx(expect, abs=1e-12)
        rest = b.p.copy()
        rest[0, 4] = 0.0
        assert np.all(rest == 0.0)

    def test_unpairable_sequence_is_zero_matrix(self):
        b = compute_bppm(seq("AAAA"), MODEL, prune_threshold=0.0)
        assert np.all(b.p == 0.0)

    def test_matches_oracle_on_random_sequences(self):
        rng = substream(7, "dp-vs-oracle")
        for _ in range(10):
            s = random_seq(rng, int(rng.integers(8, 17)))
            dp = compute_bppm(s, MODEL, prune_threshold=0.0)
            oracle = oracle_bppm(s, MODEL)
            assert np.abs(dp.p - oracle.p).max() <= 1e-9

    def test_structural_zeros_are_exact(self):
        rng = substream(8, "zeros")
        s = random_seq(rng, 20)
        b = compute_bppm(s, MODEL, prune_threshold=0.0)
        for i in range(20):
            for j in range(i + 1, 20):
                span_ok = j - i >= MODEL.min_hairpin + 1
                pairable = (
                    pair_weight(MODEL, s.residues[i], s.residues[j]) > 0.0
                )
                if not (span_ok and pairable):
                    assert b.p[i, j] == 0.0

    def test_row_sum_bound(self):
        rng = substream(9, "rowsum")
        for _ in range(5):
            s = random_seq(rng, 40)
            b = compute_bppm(s, MODEL, prune_threshold=0.0)
            assert row_sums(b).max() <= 1.0 + 1e-9

    def test_prune_deviation_bound(self):
        rng = substream(10, "prune")
        n, t = 40, 1e-6
        for _ in range(3):
            s = random_seq(rng, n)
            exact = compute_bppm(s, MODEL, prune_threshold=0.0)
            pruned = compute_bppm(s, MODEL, prune_threshold=t)
            assert np.abs(exact.p - pruned.p).max() <= n * n * t

    def test_deterministic_bitwise(self):
        s = random_seq(substream(11, "det"), 30)
        a = compute_bppm(s, MODEL, prune_threshold=0.0)
        b = compute_bppm(s, MODEL, prune_threshold=0.0)
        assert np.array_equal(a.p, b.p)

    def test_auto_prune_policy(self):
        assert default_prune(64) == 0.0
        assert default_prune(65) == 1e-6

    def test_outside_rejects_mismatched_table(self):
        logq = inside(seq("GAAAC"), MODEL)
        with pytest.raises(ValueError):
            outside_pair_probs(seq("GAAACA"), MODEL, logq)
        with pytest.raises(ValueError):
            outside_pair_probs(seq("GAAAC"), MODEL, logq, prune_threshold=-1.0)

    def test_oracle_asserts_row_sums(self):
        rng = substream(12, "oracle-rowsum")
        for _ in range(5):
            b = oracle_bppm(random_seq(rng, 12), MODEL)
            assert row_sums(b).max() <= 1.0 + 1e-9


class TestBppmValidation:
    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            Bppm(n=3, p=np.zeros((2, 2)))

    def test_range_and_triangle_checks(self):
        p = np.zeros((5, 5))
        p[2, 1] = 0.5  # lower triangle
        with pytest.raises(ValueError, match="triangle"):
            Bppm(n=5, p=p).validate()
        p = np.zeros((5, 5))
        p[0, 4] = 1.5
        with pytest.raises(ValueError, match="0, 1"):
            Bppm(n=5, p=p).validate()

    def test_row_sum_violation_detected(self):
        p = np.zeros((9, 9))
        p[0, 4] = 0.8
        p[0, 8] = 0.8
        with pytest.raises(ValueError, match="row-sum"):
            Bppm(n=9, p=p).validate()


class TestTextFormat:
    def test_round_trip_is_bit_exact(self):
        s = random_seq(substream(13, "roundtrip"), 25)
        b = compute_bppm(s, MODEL, prune_threshold=0.0)
        text = write_bppm(b)
        back = read_bppm(text)
        assert back.n == b.n
        assert np.array_equal(back.p, b.p)
        assert write_bppm(back) == text

    def test_header_and_sorted_entries(self):
        p = np.zeros((6, 6))
        p[1, 5] = 0.25
        p[0, 4] = 0.5
        text = write_bppm(Bppm(n=6, p=p))
        lines = text.splitlines()
        assert lines[0] == "BPPM 6"
        assert lines[1].startswith("1 5 ") and lines[2].startswith("2 6 ")

    def test_rejects_malformed_input(self):
        with pytest.raises(ValueError, match="header"):
            read_bppm("nope\n")
        with pytest.raises(ValueError, match="header"):
            read_bppm("BPPM x\n")
        with pytest.raises(ValueError, match="triangle"):
            read_bppm("BPPM 5\n4 2 0.5\n")
        with pytest.raises(ValueError, match="triangle"):
            read_bppm("BPPM 5\n2 6 0.5\n")
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            read_bppm("BPPM 5\n1 5 1.5\n")
        with pytest.raises(ValueError, match="entry"):
            read_bppm("BPPM 5\n1 5\n")
