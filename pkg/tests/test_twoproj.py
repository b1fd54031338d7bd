import math
import random
from fractions import Fraction as F

import numpy as np
import pytest

from projsum.core import Spectrum, SpectrumEntry, SpectrumError
from projsum.pairsplit import split_pair
from projsum.twoproj import PairingError, build_two_projections, symmetry_pairing


def spec(*values):
    return Spectrum(tuple(SpectrumEntry(v, 1) for v in values))


def symmetric_spectrum(rng: random.Random, max_pairs=4):
    values = []
    for _ in range(rng.randint(1, max_pairs)):
        t = F(rng.randint(1, 15), 16)
        values += [t, 2 - t]
    for _ in range(rng.randint(0, 2)):
        values.append(F(rng.choice([1, 2])))
    rng.shuffle(values)
    return spec(*values)


class TestSymmetryPairing:
    def test_single_pair(self):
        pairing = symmetry_pairing(spec(F(3, 2), F(1, 2)))
        assert pairing.pairs == [(1, 0)]
        assert pairing.fixed_unit == [] and pairing.doubled == []

    def test_doubled_only(self):
        pairing = symmetry_pairing(spec(F(2), F(2)))
        assert pairing.pairs == [] and pairing.doubled == [0, 1]

    def test_asymmetric_witness(self):
        with pytest.raises(PairingError) as err:
            symmetry_pairing(spec(F(3, 2), F(3, 4)))
        assert err.value.witness == F(3, 4)

    def test_unmatched_super_unit_witness(self):
        with pytest.raises(PairingError) as err:
            symmetry_pairing(spec(F(3, 2)))
        assert err.value.witness == F(1, 2)

    def test_out_of_range_rejected(self):
        with pytest.raises(SpectrumError):
            symmetry_pairing(spec(F(5, 2)))

    def test_multiplicity_matching(self):
        pairing = symmetry_pairing(spec(F(1, 4), F(1, 4), F(7, 4), F(7, 4)))
        assert len(pairing.pairs) == 2


class TestBuildTwoProjections:
    def test_reference_matrices(self):
        p, q = build_two_projections(spec(F(3, 2), F(1, 2)))
        s3 = math.sqrt(3)
        # on the (sub-unit, super-unit) plane: P = [[t, -s],[-s, 2-t]] / 2
        expect_p = np.array([[3 / 4, -s3 / 4], [-s3 / 4, 1 / 4]])
        assert np.allclose(p.matrix, expect_p, atol=1e-12)
        assert np.allclose(p.matrix + q.matrix, np.diag([1.5, 0.5]), atol=1e-12)

    def test_unit_goes_to_p(self):
        p, q = build_two_projections(spec(F(1)))
        assert np.allclose(p.matrix, [[1.0]])
        assert q.rank == 0

    def test_doubled_in_both(self):
        p, q = build_two_projections(spec(F(2)))
        assert np.allclose(p.matrix, [[1.0]])
        assert np.allclose(q.matrix, [[1.0]])

    def test_fuzz_symmetric_spectra(self, rng):
        for _ in range(60):
            s = symmetric_spectrum(rng)
            p, q = build_two_projections(s)
            pm, qm = p.matrix, q.matrix
            assert np.linalg.norm(pm @ pm - pm) < 1e-10
            assert np.linalg.norm(qm @ qm - qm) < 1e-10
            vals = []
            for e in s.entries:
                vals.extend([float(e.value)] * int(e.mult))
            assert np.linalg.norm(pm + qm - np.diag(vals)) < 1e-10

    def test_agrees_with_pair_split(self):
        # each paired plane matches the 2x2 split at mu = lam = 1 - t, where
        # the remainder coefficient is exactly 1 (both summands projections)
        t = F(1, 2)
        p, q = build_two_projections(spec(t, 2 - t))
        ps = split_pair(1 - t, 1 - t, e_index=1, f_index=0)
        assert ps.remainder_coeff == 1
        w = ps.w_vector(2)
        v = ps.v_vector(2)
        assert np.allclose(p.matrix, np.outer(w, w), atol=1e-12)
        assert np.allclose(q.matrix, np.outer(v, v), atol=1e-12)
