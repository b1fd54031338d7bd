import math
from fractions import Fraction as F

import numpy as np
import pytest

from projsum.core import (
    InfeasibleError,
    Spectrum,
    SpectrumEntry,
    SpectrumError,
    TailSpec,
    ValueSeq,
)
from projsum.series import (
    PrefixCollisionError,
    SumMismatchError,
    decompose_trace_balanced,
    single_defect_run,
    single_excess_run,
    interleave_run,
    prefix_collisions,
    sigma_step,
)
from projsum.verify import overlap_probe


def dyadic_excess(total=F(1, 2)):
    return ValueSeq([], TailSpec("geometric", "excess", declared_sum=total,
                                 first=total / 2, ratio=F(1, 2)))


def dyadic_defect(total=F(1, 2)):
    return ValueSeq([], TailSpec("geometric", "defect", declared_sum=total,
                                 first=total / 2, ratio=F(1, 2)))


def base3_defect():
    # terms 2/3^j, total 1
    return ValueSeq([], TailSpec("geometric", "defect", declared_sum=F(1),
                                 first=F(2, 3), ratio=F(1, 3)))


def base2_excess():
    return ValueSeq([], TailSpec("geometric", "excess", declared_sum=F(1),
                                 first=F(1, 2), ratio=F(1, 2)))


class TestSingleDefectRun:
    def test_dyadic_deltas_exact(self):
        st = single_defect_run(F(1, 2), dyadic_excess(), 30)
        for j in range(1, 31):
            assert st.delta(j) == -F(1, 2 ** j)
        deltas = [st.delta(j) for j in range(1, 32)]
        assert all(a < b for a, b in zip(deltas, deltas[1:]))

    def test_dyadic_sigmas_exact(self):
        st = single_defect_run(F(1, 2), dyadic_excess(), 5)
        assert st.sigma(2) == F(4, 9)
        assert st.sigma(3) == F(4, 7)

    def test_recurrence_matches_closed_form(self):
        st = single_defect_run(F(1, 2), dyadic_excess(), 30)
        for j in range(1, 31):
            assert np.linalg.norm(st.v(j) - st.closed_form_v(j)) < 1e-12

    def test_partial_identity_every_step(self):
        st = single_defect_run(F(1, 2), dyadic_excess(), 30)
        assert all(s.residual < 1e-10 for s in st.steps)

    def test_overlap_strictly_decreasing(self):
        st = single_defect_run(F(1, 2), dyadic_excess(), 25)
        overlaps = [abs(st.v(j)[0]) for j in range(2, 26)]
        assert all(b < a for a, b in zip(overlaps, overlaps[1:]))
        # frozen from a direct product evaluation of the sigma transcript
        assert overlaps[18] == pytest.approx(0.015018212608842386, abs=1e-12)
        assert overlaps[18] < 0.3

    def test_lambda_zero_already_projection(self):
        st = single_defect_run(F(0), ValueSeq([]), 10)
        assert st.status == "already_projection"
        assert st.remainder_coeff is None

    def test_sum_mismatch(self):
        with pytest.raises(SumMismatchError):
            single_defect_run(F(1, 3), dyadic_excess(), 10)

    def test_divergence_certificate_lower_bound(self):
        # (1 - sigma_j) > (delta_{j-1} - delta_j) / (2 delta_{j-1} - delta_j)
        #              > (1/2) (delta_{j-1} - delta_j) / delta_{j-1}
        st = single_defect_run(F(1, 2), dyadic_excess(), 30)
        total = F(0)
        for j in range(2, 31):
            dp, dc = st.delta(j - 1), st.delta(j)
            bound = F(1, 2) * (dp - dc) / dp
            assert 1 - st.sigma(j) > bound > 0
            total += 1 - st.sigma(j)
        assert st.sum_one_minus_sigma > 5  # grows without bound along the run


class TestSingleExcessRun:
    def test_dyadic_sigma(self):
        st = single_excess_run(F(1, 2), dyadic_defect(), 10)
        assert st.sigma(2) == F(4, 5)
        for j in range(1, 11):
            assert st.delta(j) == F(1, 2 ** j)

    def test_unit_defects_stripped(self):
        seq = ValueSeq([F(1), F(1, 4), F(1, 4), F(1, 2)])
        st = single_excess_run(F(2), seq, 10)
        copies = [p for p in st.projections if p.label == "unit-copy@g0"]
        assert len(copies) == 1
        target = np.diag(st.target_diag)
        recon = sum(p.matrix for p in st.projections)
        recon = recon + float(st.remainder_coeff) * np.outer(
            st.remainder_vector, st.remainder_vector)
        assert np.linalg.norm(recon - target) < 1e-10

    def test_zero_steps_returns_center_remainder(self):
        st = single_excess_run(F(1, 2), dyadic_defect(), 0)
        assert st.projections == []
        assert st.remainder_coeff == F(3, 2)

    def test_partial_identity(self):
        st = single_excess_run(F(1, 2), dyadic_defect(), 25)
        assert all(s.residual < 1e-10 for s in st.steps)
        for j in range(1, 26):
            assert np.linalg.norm(st.v(j) - st.closed_form_v(j)) < 1e-12


class TestInterleave:
    def test_base23_cut_indices(self):
        plan, st = interleave_run(base2_excess(), base3_defect(), 50)
        assert plan.branch == "defect_first"
        assert plan.n[0] == 2 and plan.m[0] == 2

    def test_sign_pattern(self):
        plan, st = interleave_run(base2_excess(), base3_defect(), 50)
        # delta flips negative exactly when an f-consumption closes a block
        # and positive when an e-consumption does; never zero
        for j, d in enumerate(st.deltas, start=1):
            assert d != 0

    def test_block_boundary_sigma_below_half(self):
        plan, st = interleave_run(base2_excess(), base3_defect(), 50)
        # boundaries J_k: delta flips from negative to positive
        for j in range(2, len(st.deltas) + 1):
            if st.deltas[j - 2] < 0 < st.deltas[j - 1]:
                assert st.sigma(j) < F(1, 2)

    def test_residuals(self):
        _, st = interleave_run(base2_excess(), base3_defect(), 50)
        assert all(s.residual < 1e-10 for s in st.steps)

    def test_positive_carried_weight(self):
        _, st = interleave_run(base2_excess(), base3_defect(), 50)
        assert all(1 + d > 0 for d in st.deltas)

    def test_mirror_branch(self):
        # swap roles: excess terms 2/3^j, defect terms 1/2^j (mu_1 > lam_1)
        mu = ValueSeq([], TailSpec("geometric", "excess", declared_sum=F(1),
                                   first=F(2, 3), ratio=F(1, 3)))
        lam = ValueSeq([], TailSpec("geometric", "defect", declared_sum=F(1),
                                    first=F(1, 2), ratio=F(1, 2)))
        plan, st = interleave_run(mu, lam, 40)
        assert plan.branch == "excess_first"
        assert all(s.residual < 1e-10 for s in st.steps)
        crossings = 0
        for j in range(2, len(st.deltas) + 1):
            if st.deltas[j - 2] < 0 < st.deltas[j - 1]:
                assert st.sigma(j) < F(1, 2)
                crossings += 1
        assert crossings >= 3

    def test_first_collision_rejected(self):
        with pytest.raises(PrefixCollisionError):
            interleave_run(base2_excess(), dyadic_defect(F(1)), 20)

    def test_sum_mismatch(self):
        with pytest.raises(SumMismatchError):
            interleave_run(base2_excess(), ValueSeq([F(1, 3)]), 10)


class TestPrefixCollisions:
    def test_identical_sequences_diagonal(self):
        out = prefix_collisions(base2_excess(), dyadic_defect(F(1)), 12)
        assert out == [(k, k) for k in range(1, 13)]

    def test_base23_empty(self):
        assert prefix_collisions(base2_excess(), base3_defect(), 200) == []

    def test_engineered_collision(self):
        lam = ValueSeq([F(1, 2), F(1, 4)])
        mu = ValueSeq([F(3, 4), F(1, 4)])
        out = prefix_collisions(mu, lam, 10)
        assert (2, 1) in out

    def test_floats_rejected(self):
        with pytest.raises(SpectrumError):
            prefix_collisions(ValueSeq([0.5, 0.5]), ValueSeq([0.5, 0.5]), 5)


class TestDispatcher:
    def check(self, dec):
        recon = dec.reconstruction()
        target = np.diag(dec.target_diag)
        assert np.linalg.norm(recon - target) < 1e-9
        return dec

    def test_single_defect_routing(self):
        s = Spectrum((SpectrumEntry(F(1, 2)),),
                     (TailSpec("geometric", "excess", declared_sum=F(1, 2),
                               first=F(1, 4), ratio=F(1, 2)),))
        dec = self.check(decompose_trace_balanced(s, steps=20))
        assert "single-defect" in dec.routing

    def test_collisions_everywhere_blockwise(self):
        s = Spectrum((), (TailSpec("geometric", "excess", declared_sum=F(1),
                                   first=F(1, 2), ratio=F(1, 2)),
                          TailSpec("geometric", "defect", declared_sum=F(1),
                                   first=F(1, 2), ratio=F(1, 2))))
        dec = self.check(decompose_trace_balanced(s, steps=20, collision_budget=100))
        assert dec.routing.startswith("blocks(")
        assert dec.status == "prefix-only"
        # each dyadic block is two coordinates wide and two projections deep
        assert len(dec.projections) == 20

    def test_collision_free_interleave(self):
        s = Spectrum((), (TailSpec("geometric", "excess", declared_sum=F(1),
                                   first=F(1, 2), ratio=F(1, 2)),
                          TailSpec("geometric", "defect", declared_sum=F(1),
                                   first=F(2, 3), ratio=F(1, 3))))
        dec = self.check(decompose_trace_balanced(s, steps=30, collision_budget=100))
        assert dec.routing == "interleave"

    def test_single_collision_blocks_then_interleave(self):
        s = Spectrum((SpectrumEntry(F(3, 4), 2),),
                     (TailSpec("geometric", "excess", declared_sum=F(1),
                               first=F(1, 2), ratio=F(1, 2)),
                      TailSpec("geometric", "defect", declared_sum=F(1, 2),
                               first=F(1, 3), ratio=F(1, 3))))
        dec = self.check(decompose_trace_balanced(s, steps=30, collision_budget=100))
        assert dec.routing.startswith("blocks(1)+interleave")

    def test_finite_case_with_peel(self):
        s = Spectrum((SpectrumEntry(F(3)), SpectrumEntry(F(1, 2), 2)))
        dec = self.check(decompose_trace_balanced(s))
        assert dec.routing == "peel(1)+finite"
        assert len(dec.projections) == 4

    def test_presplit_excess_routing(self):
        s = Spectrum((SpectrumEntry(F(5, 4), 2),),
                     (TailSpec("geometric", "defect", declared_sum=F(1, 2),
                               first=F(1, 4), ratio=F(1, 2)),))
        dec = self.check(decompose_trace_balanced(s, steps=20))
        assert "presplit+single-excess" in dec.routing

    def test_single_excess_direct(self):
        s = Spectrum((SpectrumEntry(F(3, 2)),),
                     (TailSpec("geometric", "defect", declared_sum=F(1, 2),
                               first=F(1, 4), ratio=F(1, 2)),))
        dec = self.check(decompose_trace_balanced(s, steps=20))
        assert dec.routing == "single-excess"

    def test_presplit_defect_routing(self):
        # two explicit defects, infinite excess; the head prefix never hits
        # the defect head sum exactly, so a remainder pre-split runs first
        s = Spectrum((SpectrumEntry(F(1, 2)), SpectrumEntry(F(3, 4))),
                     (TailSpec("geometric", "excess", declared_sum=F(3, 4),
                               first=F(3, 8), ratio=F(1, 2)),))
        dec = self.check(decompose_trace_balanced(s, steps=20))
        assert dec.routing == "presplit+single-defect"

    def test_blockcut_defect_routing(self):
        # mu_1 = 1/2 equals lambda_1 exactly: the balanced prefix closes as a
        # finite block and the run continues without a remainder direction
        s = Spectrum((SpectrumEntry(F(1, 2)), SpectrumEntry(F(3, 4)),
                      SpectrumEntry(F(3, 2))),
                     (TailSpec("geometric", "excess", declared_sum=F(1, 4),
                               first=F(1, 8), ratio=F(1, 2)),))
        dec = self.check(decompose_trace_balanced(s, steps=20))
        assert dec.routing == "blockcut+single-defect"

    def test_peel_then_single_excess(self):
        s = Spectrum((SpectrumEntry(F(5, 2)),),
                     (TailSpec("geometric", "defect", declared_sum=F(1, 2),
                               first=F(1, 4), ratio=F(1, 2)),))
        dec = self.check(decompose_trace_balanced(s, steps=20))
        assert dec.routing.startswith("peel(1)+")

    def test_infeasible_rejected(self):
        s = Spectrum((SpectrumEntry(F(3, 2)), SpectrumEntry(F(7, 10))))
        with pytest.raises(InfeasibleError):
            decompose_trace_balanced(s)

    def test_already_projection(self):
        s = Spectrum((SpectrumEntry(F(1), 3),))
        dec = decompose_trace_balanced(s)
        assert dec.routing == "already-projection"
        assert len(dec.projections) == 3

    def test_fuzz_balanced_infinite_spectra(self, rng):
        # random explicit entries balanced by a geometric tail on the lighter
        # side; every route the dispatcher picks must leave a verified prefix
        routes = set()
        for _ in range(60):
            n_ex = rng.randint(0, 3)
            n_de = rng.randint(0, 3)
            entries = []
            ex_total = F(0)
            de_total = F(0)
            for _ in range(n_ex):
                mu = F(rng.randint(1, 24), rng.randint(8, 16))
                entries.append(SpectrumEntry(1 + mu))
                ex_total += mu
            for _ in range(n_de):
                lam = F(rng.randint(1, 12), 16)
                entries.append(SpectrumEntry(1 - lam))
                de_total += lam
            gap = ex_total - de_total
            if gap > 0 and gap < 2:
                tail = TailSpec("geometric", "defect", declared_sum=gap,
                                first=gap / 2, ratio=F(1, 2))
            elif gap < 0:
                tail = TailSpec("geometric", "excess", declared_sum=-gap,
                                first=-gap / 2, ratio=F(1, 2))
            else:
                continue
            s = Spectrum(tuple(entries), (tail,))
            dec = decompose_trace_balanced(s, steps=15)
            routes.add(dec.routing.split("(")[0])
            recon = dec.reconstruction()
            assert np.linalg.norm(recon - np.diag(dec.target_diag)) < 1e-9
            for p in dec.projections:
                m = p.matrix
                assert np.linalg.norm(m @ m - m) < 1e-10
        assert len(routes) >= 2


class TestSigmaStep:
    def test_matches_recurrence_values(self):
        # sigma from consecutive deltas of the dyadic run
        assert sigma_step(-F(1, 2), -F(1, 4)) == F(4, 9)
        assert sigma_step(-F(1, 4), -F(1, 8)) == F(4, 7)


class TestOverlapProbeIntegration:
    def test_probe_matches_both_ways(self):
        st = single_defect_run(F(1, 2), dyadic_excess(), 12)
        v = overlap_probe(st, 0, 10)
        assert v == pytest.approx(abs(st.v(10)[0]), abs=1e-12)

    def test_probe_one_past_carrier(self):
        st = single_defect_run(F(1, 2), dyadic_excess(), 12)
        got = overlap_probe(st, 5, 6)
        assert got == pytest.approx(math.sqrt(1 - float(st.sigma(6))), abs=1e-12)

    def test_probe_beyond_consumed(self):
        st = single_defect_run(F(1, 2), dyadic_excess(), 6)
        assert overlap_probe(st, 6, 3) == 0.0
