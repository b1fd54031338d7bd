from fractions import Fraction as F

import numpy as np
import pytest

from projsum.core import InfeasibleError, Spectrum, SpectrumEntry
from projsum.finite import (
    decompose_finite,
    decompose_with_remainder,
    fillmore_feasible,
    peel_integer,
)
from projsum.verify import check_projection, reconstruct_and_compare

from conftest import feasible_finite_spectrum, infeasible_spectrum


def spec(*values):
    return Spectrum(tuple(SpectrumEntry(v, 1) for v in values))


def target_of(spectrum):
    vals = []
    for e in spectrum.entries:
        vals.extend([float(e.value)] * int(e.mult))
    return np.diag(vals)


class TestFillmore:
    def test_integer_trace_above_rank(self):
        r = fillmore_feasible(spec(F(3, 2), F(3, 2), F(1)))
        assert r.feasible and r.count == 4

    def test_trace_below_rank(self):
        r = fillmore_feasible(spec(F(1, 2), F(1, 2)))
        assert not r.feasible
        assert "below rank" in r.reason

    def test_single_unit(self):
        r = fillmore_feasible(spec(F(1)))
        assert r.feasible and r.count == 1


class TestPeel:
    def test_single_peel(self):
        units, reduced = peel_integer(spec(F(2)))
        assert len(units) == 1
        assert [e.value for e in reduced.entries] == [F(1)]

    def test_largest_first_keeps_positivity(self):
        units, reduced = peel_integer(spec(F(5, 2), F(1, 2)))
        assert len(units) == 1
        vals = [e.value for e in reduced.entries]
        assert vals == [F(3, 2), F(1, 2)]
        assert sum(vals) == len(vals)   # trace equals rank after peeling

    def test_two_peels(self):
        units, reduced = peel_integer(spec(F(3), F(1)))
        assert len(units) == 2
        assert [e.value for e in reduced.entries] == [F(1), F(1)]

    def test_nothing_to_peel(self):
        with pytest.raises(InfeasibleError):
            peel_integer(spec(F(3, 2), F(1, 2)))


class TestDecomposeFinite:
    def test_two_by_two(self):
        dec = decompose_finite(spec(F(3, 2), F(1, 2)))
        assert len(dec.projections) == 2
        res = reconstruct_and_compare(dec.projections, None, np.diag([1.5, 0.5]))
        assert res < 1e-10
        # first split consumes the defect at mu = lam = 1/2: sigma = nu = 1/4
        assert dec.steps[1].sigma == F(1, 4)

    def test_unit_eigenvalues_pass_through(self):
        dec = decompose_finite(spec(F(1), F(1)))
        assert len(dec.projections) == 2
        assert np.allclose(sum(p.matrix for p in dec.projections), np.eye(2))

    def test_delta_sequence(self):
        dec = decompose_finite(spec(F(2), F(1, 2), F(1, 2)))
        assert len(dec.projections) == 3
        assert [s.delta for s in dec.steps] == [F(1), F(1, 2), F(0)]
        res = reconstruct_and_compare(dec.projections, None,
                                      np.diag([2.0, 0.5, 0.5]))
        assert res < 1e-10

    def test_infeasible_rejected(self):
        with pytest.raises(InfeasibleError):
            decompose_finite(spec(F(1, 2), F(1, 2)))

    def test_fuzz_count_and_residuals(self, rng):
        for _ in range(150):
            s = feasible_finite_spectrum(rng)
            dec = decompose_finite(s)
            expected = int(sum(e.value for e in s.entries))
            assert len(dec.projections) == expected
            for p in dec.projections:
                chk = check_projection(p.matrix)
                assert chk.idempotency < 1e-10 and chk.symmetry < 1e-10
            res = reconstruct_and_compare(dec.projections, None, target_of(s))
            assert res < 1e-9

    def test_fuzz_infeasible_rejected(self, rng):
        for _ in range(150):
            s = infeasible_spectrum(rng)
            with pytest.raises(InfeasibleError):
                decompose_finite(s)

    def test_float_mode(self):
        # float eigenvalues with near-integer trace: every exact-equality
        # decision degrades to the documented 1e-9 tolerance
        values = [1.7, 0.8, 0.5]
        dec = decompose_finite(Spectrum(tuple(SpectrumEntry(v, 1) for v in values)))
        assert len(dec.projections) == 3
        assert reconstruct_and_compare(dec.projections, None,
                                       np.diag(values)) < 1e-9

    def test_float_mode_with_rounding_slack(self):
        values = [1.7, 0.8, 0.5 - 3e-10]
        dec = decompose_finite(Spectrum(tuple(SpectrumEntry(v, 1) for v in values)))
        assert len(dec.projections) == 3
        assert reconstruct_and_compare(dec.projections, None,
                                       np.diag(values)) < 1e-9

    def test_permutation_robustness(self, rng):
        values = [F(5, 2), F(1, 2), F(3, 4), F(5, 4)]
        for _ in range(8):
            rng.shuffle(values)
            s = spec(*values)
            dec = decompose_finite(s)
            assert len(dec.projections) == 5
            assert reconstruct_and_compare(dec.projections, None,
                                           target_of(s)) < 1e-9


class TestDecomposeWithRemainder:
    def test_boundary_balanced_case(self):
        dec = decompose_with_remainder(spec(F(3, 2), F(1, 2)))
        assert len(dec.projections) == 1
        coeff, vec = dec.remainder
        assert coeff == 1
        assert abs(np.linalg.norm(vec) - 1) < 1e-12
        assert np.linalg.norm(dec.reconstruction() - np.diag([1.5, 0.5])) < 1e-10

    def test_single_split_with_surplus(self):
        dec = decompose_with_remainder(spec(F(2), F(3, 4)))
        assert len(dec.projections) == 1
        assert dec.remainder[0] == F(7, 4)
        assert np.linalg.norm(dec.reconstruction() - np.diag([2.0, 0.75])) < 1e-10

    def test_surplus_above_max_mu_rejected(self):
        with pytest.raises(InfeasibleError, match="max"):
            decompose_with_remainder(spec(F(3, 2), F(3, 2)))

    def test_negative_surplus_rejected(self):
        with pytest.raises(InfeasibleError):
            decompose_with_remainder(spec(F(1, 2), F(1, 2)))

    def test_max_mu_processed_last(self):
        # surplus 3/4 fits under max mu = 1 only if the largest entry waits
        dec = decompose_with_remainder(spec(F(2), F(5, 4), F(1, 2)))
        assert len(dec.projections) == 2
        target = np.diag([2.0, 1.25, 0.5])
        assert np.linalg.norm(dec.reconstruction() - target) < 1e-10

    def test_agrees_with_finite_on_balanced(self, rng):
        # balanced spectra built from (1+x, 1-x) pairs: the remainder form
        # emits one fewer projection and its remainder coefficient is exactly 1
        for _ in range(25):
            pairs = rng.randint(1, 4)
            values = []
            for _ in range(pairs):
                x = F(rng.randint(1, 9), rng.randint(10, 16))
                values += [1 + x, 1 - x]
            rng.shuffle(values)
            s = spec(*values)
            dec = decompose_with_remainder(s)
            fin = decompose_finite(s)
            assert len(dec.projections) + 1 == len(fin.projections)
            assert dec.remainder[0] == 1
            assert reconstruct_and_compare(
                dec.projections, dec.remainder, target_of(s)) < 1e-9
