import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projsum.core import Projection, RankOneProjection
from projsum.pairsplit import (
    PairSplitError,
    nu_rho,
    rebalance,
    rebalance_commuting,
    rebalance_rank_one,
    split_equal_multi,
    split_pair,
)


class TestNuRho:
    def test_mu_zero_branch(self):
        for lam in (F(0), F(1, 3), F(1)):
            assert nu_rho(F(0), lam) == (1, 0)

    def test_lambda_one(self):
        assert nu_rho(F(1), F(1)) == (0, 0)

    def test_hand_substitution(self):
        # nu = (1/2)(1/2) / ((3/2)(3/2)), rho = (1/2)(1) / (3/2)
        assert nu_rho(F(1), F(1, 2)) == (F(1, 9), F(1, 3))

    def test_exactness_preserved(self):
        nu, rho = nu_rho(F(2, 3), F(1, 5))
        assert isinstance(nu, F) and isinstance(rho, F)

    def test_out_of_range(self):
        with pytest.raises(PairSplitError):
            nu_rho(F(-1), F(1, 2))
        with pytest.raises(PairSplitError):
            nu_rho(F(1), F(3, 2))

    @given(st.fractions(min_value=0, max_value=4),
           st.fractions(min_value=0, max_value=1))
    @settings(max_examples=200, deadline=None)
    def test_always_in_unit_interval(self, mu, lam):
        nu, rho = nu_rho(mu, lam)
        assert 0 <= nu <= 1 and 0 <= rho <= 1


class TestSplitPair:
    def test_matrix_identity_hand_case(self):
        ps = split_pair(F(1), F(1, 2))
        w, v = ps.block()
        s2 = math.sqrt(2)
        assert np.allclose(w, [[2 / 3, -s2 / 3], [-s2 / 3, 1 / 3]], atol=1e-12)
        assert ps.remainder_coeff == F(3, 2)
        assert np.allclose(w + 1.5 * v, np.diag([2.0, 0.5]), atol=1e-12)

    def test_mu_zero_identity_split(self):
        ps = split_pair(F(0), F(1, 3))
        w, v = ps.block()
        assert np.allclose(w, np.diag([1.0, 0.0]), atol=1e-15)
        assert np.allclose(v, np.diag([0.0, 1.0]), atol=1e-15)

    def test_lambda_one_collapse(self):
        ps = split_pair(F(1), F(1))
        w, v = ps.block()
        target = np.diag([2.0, 0.0])
        assert np.allclose(w + float(ps.remainder_coeff) * v, target, atol=1e-12)
        assert np.allclose(w, np.diag([1.0, 0.0]), atol=1e-12)

    def test_same_index_rejected(self):
        with pytest.raises(PairSplitError):
            split_pair(F(1), F(1, 2), 3, 3)

    def test_grid_identities(self):
        # unit vectors, idempotency, and reconstruction over a coarse grid;
        # the full 200x200 grid runs in the acceptance suite
        for i in range(0, 41, 4):
            for j in range(0, 11, 2):
                mu, lam = F(i, 10), F(j, 10)
                ps = split_pair(mu, lam)
                w, v = ps.block()
                assert abs(np.trace(w) - 1) < 1e-12
                assert np.linalg.norm(w @ w - w) < 1e-12
                assert np.linalg.norm(v @ v - v) < 1e-12
                target = np.diag([1 + float(mu), 1 - float(lam)])
                recon = w + float(ps.remainder_coeff) * v
                assert np.linalg.norm(recon - target) < 1e-12


class TestRebalance:
    def test_equal_b_c(self):
        assert rebalance(F(1), F(1), F(1)) == (0, 1)

    def test_a_zero(self):
        assert rebalance(F(0), F(2), F(1)) == (0, 0)

    def test_hand_substitution(self):
        assert rebalance(F(1, 2), F(2), F(1)) == (F(1, 3), F(1, 9))

    def test_matches_nu_rho(self):
        # b = 1 + mu, a = 1 - lam, c = 1 reproduces the basic parameters
        for i in range(0, 21, 3):
            for j in range(0, 10, 2):
                mu, lam = F(i, 5), F(j, 10)
                nu, rho = nu_rho(mu, lam)
                rho2, nu2 = rebalance(1 - lam, 1 + mu, F(1))
                assert (rho2, nu2) == (rho, nu)

    def test_ordering_violation(self):
        with pytest.raises(PairSplitError):
            rebalance(F(2), F(1), F(3, 2))


class TestRebalanceRankOne:
    def test_equal_projections(self):
        p = RankOneProjection(np.array([1.0, 0.0]))
        p2, q2 = rebalance_rank_one(F(1, 2), p, F(2), p, F(1))
        assert np.allclose(p2.matrix, p.matrix)
        assert np.allclose(q2.matrix, p.matrix)

    def test_orthogonal_matches_diagonal_case(self):
        p = RankOneProjection(np.array([0.0, 1.0]))   # carries a = 1/2
        q = RankOneProjection(np.array([1.0, 0.0]))   # carries b = 2
        p2, q2 = rebalance_rank_one(F(1, 2), p, F(2), q, F(1))
        lhs = 0.5 * p.matrix + 2.0 * q.matrix
        rhs = 1.0 * p2.matrix + 1.5 * q2.matrix
        assert np.linalg.norm(lhs - rhs) < 1e-10

    def test_oblique_pair_reconstructs(self):
        p = RankOneProjection(np.array([1.0, 0.0]))
        q = RankOneProjection(np.array([1.0, 1.0]) / math.sqrt(2))
        p2, q2 = rebalance_rank_one(0.5, p, 2.0, q, 1.0)
        lhs = 0.5 * p.matrix + 2.0 * q.matrix
        rhs = p2.matrix + 1.5 * q2.matrix
        assert np.linalg.norm(lhs - rhs) < 1e-10
        for r in (p2, q2):
            assert np.linalg.norm(r.matrix @ r.matrix - r.matrix) < 1e-10


class TestRebalanceCommuting:
    def test_equal_projections_pass_through(self):
        p = Projection(np.eye(3)[:, :2])
        p2, q2 = rebalance_commuting(F(1, 4), p, F(1, 2), p, F(1, 3))
        assert np.allclose(p2.matrix, p.matrix, atol=1e-12)
        assert np.allclose(q2.matrix, p.matrix, atol=1e-12)

    def test_a_zero_orthogonal_rank_one(self):
        p = Projection(np.eye(2)[:, :1])
        q = Projection(np.eye(2)[:, 1:])
        p2, q2 = rebalance_commuting(F(0), p, F(1), q, F(1, 2))
        # rho' = nu' = 0 forces both outputs onto the b-side projection
        assert np.allclose(p2.matrix, q.matrix, atol=1e-12)
        assert np.allclose(q2.matrix, q.matrix, atol=1e-12)

    def test_block_example_reconstructs(self):
        p = Projection(np.eye(3)[:, :2])          # diag(1,1,0)
        q = Projection(np.eye(3)[:, 1:])          # diag(0,1,1)
        a, b, c = F(1, 2), F(1), F(3, 4)
        p2, q2 = rebalance_commuting(a, p, b, q, c)
        lhs = 0.5 * p.matrix + 1.0 * q.matrix
        rhs = 0.75 * p2.matrix + 0.75 * q2.matrix
        assert np.linalg.norm(lhs - rhs) < 1e-10
        assert p2.rank == 2 and q2.rank == 2
        for r in (p2, q2):
            m = r.matrix
            assert np.linalg.norm(m @ m - m) < 1e-10

    def test_noncommuting_rejected(self):
        theta = 0.3
        vec = np.array([math.cos(theta), math.sin(theta)])
        p = Projection(np.array([[1.0], [0.0]]))
        q = Projection(vec[:, None])
        with pytest.raises(PairSplitError):
            rebalance_commuting(F(0), p, F(1), q, F(1, 2))

    def test_rank_mismatch_rejected(self):
        # The finite-rank (finite-equivalence) hypothesis is essential, not a
        # convenience: with P infinite and P != I there are no projections
        # P', Q' with (1/5)P + I = (2/5)P' + (4/5)Q' at all -- the norm bound
        # forces Q' = I and then P = P' = I.  The matrix model only ever sees
        # the finite case, where the rank test below is the whole hypothesis.
        p = Projection(np.eye(3)[:, :2])
        q = Projection(np.eye(3)[:, 2:])
        with pytest.raises(PairSplitError):
            rebalance_commuting(F(0), p, F(1), q, F(1, 2))


class TestSplitEqualMulti:
    def test_single_projection(self):
        out = split_equal_multi([F(1)])
        assert len(out) == 1
        assert np.allclose(out[0].matrix, [[1.0]])

    def test_three_halves_pair(self):
        out = split_equal_multi([F(3, 2), F(3, 2)])
        assert len(out) == 3
        total = sum(p.matrix for p in out)
        assert np.linalg.norm(total - np.diag([1.5, 1.5])) < 1e-10

    def test_rank_below_count_rejected(self):
        with pytest.raises(PairSplitError):
            split_equal_multi([F(1, 2), F(1, 2), F(1), F(1)])

    def test_non_integer_sum_rejected(self):
        with pytest.raises(PairSplitError):
            split_equal_multi([F(1, 2), F(3, 4)])

    def test_higher_rank_blocks(self):
        out = split_equal_multi([F(3, 2), F(3, 2)], rank=2)
        assert len(out) == 3
        assert all(p.rank == 2 for p in out)
        total = sum(p.matrix for p in out)
        target = np.diag([1.5, 1.5, 1.5, 1.5])
        assert np.linalg.norm(total - target) < 1e-10
