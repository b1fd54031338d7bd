import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projsum.core import (
    Spectrum,
    SpectrumEntry,
    SpectrumError,
    TailSpec,
    ValueSeq,
    classify,
    spectrum_from_json,
    split_parts,
)


def spec(*values, mode="type1"):
    return Spectrum(tuple(SpectrumEntry(v, 1) for v in values), (), mode)


class TestSplitParts:
    def test_basic_split(self):
        p = split_parts(spec(F(3, 2), F(1, 2)))
        assert p.excess == ((F(1, 2), 1),)
        assert p.defect == ((F(1, 2), 1),)
        assert p.unit_weight == 0
        assert (p.excess_trace, p.defect_trace) == (F(1, 2), F(1, 2))

    def test_projection_case(self):
        p = split_parts(spec(F(1), F(1), F(1)))
        assert p.excess == () and p.defect == ()
        assert p.unit_weight == 3

    def test_multiplicity_weighting(self):
        p = split_parts(Spectrum((SpectrumEntry(F(2), 2),)))
        assert p.excess_trace == 2

    def test_round_trip_exact(self, rng):
        for _ in range(50):
            values = [F(rng.randint(1, 40), rng.randint(8, 12)) for _ in range(6)]
            s = spec(*values)
            back = split_parts(s).reassemble()
            orig = sorted((e.value, e.mult) for e in s.normalized().entries)
            rec = sorted((e.value, e.mult) for e in back.normalized().entries)
            assert orig == rec

    def test_infinite_tail_trace(self):
        s = Spectrum((), (TailSpec("harmonic", "excess", scale=F(1)),))
        assert split_parts(s).excess_trace == math.inf


class TestTailValidation:
    def test_harmonic_declared_finite_rejected(self):
        with pytest.raises(SpectrumError):
            TailSpec("harmonic", "defect", declared_sum=F(2), scale=F(1, 4))

    def test_geometric_declared_infinite_rejected(self):
        with pytest.raises(SpectrumError):
            TailSpec("geometric", "excess", declared_sum=math.inf,
                     first=F(1, 2), ratio=F(1, 2))

    def test_geometric_wrong_total_rejected(self):
        with pytest.raises(SpectrumError):
            TailSpec("geometric", "excess", declared_sum=F(2),
                     first=F(1, 2), ratio=F(1, 2))

    def test_geometric_correct_total(self):
        t = TailSpec("geometric", "excess", declared_sum=F(1),
                     first=F(1, 2), ratio=F(1, 2))
        assert t.term(3) == F(1, 8)
        assert t.prefix_sum(4) == F(15, 16)

    def test_defect_tail_terms_must_stay_below_one(self):
        with pytest.raises(SpectrumError):
            Spectrum((), (TailSpec("constant", "defect", value=F(3, 2)),))


class TestClassify:
    def test_finite_gap_zero(self):
        v = classify(spec(F(3, 2), F(1, 2)), "type1")
        assert v.outcome == "feasible_finite" and v.k == 0

    def test_non_integer_gap(self):
        v = classify(spec(F(3, 2), F(7, 10)), "type1")
        assert v.outcome == "infeasible"
        assert v.reason == "non_integer_gap"

    def test_type3_subunit_rejected(self):
        v = classify(spec(F(9, 10)), "type3")
        assert v.outcome == "infeasible"

    def test_type3_norm_above_one(self):
        assert classify(spec(F(9, 8)), "type3").outcome == "feasible_type3"

    def test_type3_projection(self):
        assert classify(spec(F(1), F(1)), "type3").outcome == "already_projection"

    def test_infinite_excess(self):
        s = Spectrum((), (TailSpec("harmonic", "excess", scale=F(1)),))
        assert classify(s, "type1").outcome == "feasible_infinite_excess"

    def test_type2_weighted(self):
        s = Spectrum((SpectrumEntry(F(2), F(1, 4)), SpectrumEntry(F(1, 2), F(1, 2))),
                     (), "type2")
        assert classify(s, "type2").outcome == "feasible_type2"

    def test_type2_defect_heavy(self):
        s = Spectrum((SpectrumEntry(F(2), F(1, 8)), SpectrumEntry(F(1, 2), F(1, 2))),
                     (), "type2")
        assert classify(s, "type2").outcome == "infeasible"

    def test_float_gap_rounding(self):
        v = classify(spec(2.5 + 1e-12, 0.5), "type1")
        assert v.outcome == "feasible_finite" and v.k == 1
        assert v.gap is not None and v.gap < 1e-9

    def test_defect_exceeds_excess(self):
        v = classify(spec(F(1, 2), F(1, 2)), "type1")
        assert v.outcome == "infeasible"

    @given(st.integers(1, 50), st.integers(1, 12))
    @settings(max_examples=40, deadline=None)
    def test_monotone_in_excess(self, num, den):
        base = Spectrum((), (TailSpec("harmonic", "excess", scale=F(1)),))
        assert classify(base, "type1").feasible
        more = Spectrum((SpectrumEntry(1 + F(num, den)),),
                        (TailSpec("harmonic", "excess", scale=F(1)),))
        assert classify(more, "type1").feasible


class TestJsonSchema:
    def test_rational_strings_parse_exact(self):
        s = spectrum_from_json(
            {"mode": "type1", "entries": [{"value": "3/2", "mult": 2}]})
        assert s.entries[0].value == F(3, 2)
        assert isinstance(s.entries[0].value, F)

    def test_round_trip(self):
        doc = {"mode": "type1",
               "entries": [{"value": "3/2", "mult": 1}],
               "tail": {"kind": "geometric", "side": "defect",
                        "first": "1/4", "ratio": "1/2", "sum": "1/2"}}
        s = spectrum_from_json(doc)
        again = spectrum_from_json(s.to_json())
        assert again.entries == s.entries
        assert again.tails[0].kind == "geometric"

    def test_bad_entry_reports_index(self):
        with pytest.raises(SpectrumError, match="index 1"):
            spectrum_from_json({"entries": [{"value": 1}, {"mult": 2}]})

    def test_zero_eigenvalue_rejected(self):
        with pytest.raises(SpectrumError):
            spectrum_from_json({"entries": [{"value": 0}]})

    def test_type1_fractional_multiplicity_rejected(self):
        with pytest.raises(SpectrumError):
            spectrum_from_json({"mode": "type1",
                                "entries": [{"value": 2, "mult": "1/2"}]})


class TestValueSeq:
    def test_explicit_plus_tail(self):
        seq = ValueSeq([F(1, 2)], TailSpec("geometric", "excess",
                                           declared_sum=F(1, 2),
                                           first=F(1, 4), ratio=F(1, 2)))
        assert seq.term(1) == F(1, 2)
        assert seq.term(2) == F(1, 4)
        assert seq.prefix(3) == F(7, 8)
        assert seq.total() == 1

    def test_finite_length_guard(self):
        seq = ValueSeq([F(1)])
        with pytest.raises(IndexError):
            seq.term(2)
