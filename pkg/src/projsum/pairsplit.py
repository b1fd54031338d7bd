"""The 2x2 engine: closed-form splits of two-coefficient diagonals.

Everything downstream reduces to one identity on an orthogonal pair (e, f):

    (1+mu) e(x)e + (1-lam) f(x)f  =  w(x)w + (1+mu-lam) v(x)v

with w = sqrt(rho) f - sqrt(1-rho) e and v = sqrt(nu) f + sqrt(1-nu) e.  The
sign convention (w carries the minus on e, v the plus) is frozen so that the
iterative constructions are bit-reproducible.

The generalizations: ``rebalance`` redistributes arbitrary nonnegative
coefficients b >= c >= a across an orthogonal pair, ``rebalance_rank_one``
drops the orthogonality requirement by diagonalizing a rank-two operator,
``rebalance_commuting`` lifts to commuting equal-rank projection pairs, and
``split_equal_multi`` turns an integer-total combination of equal-rank
orthogonal projections into that many projections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple, Union

import numpy as np

from .core import (
    Projection,
    RankOneProjection,
    Scalar,
    is_exact,
    to_float,
)


class PairSplitError(ValueError):
    pass


def _check_range(mu: Scalar, lam: Scalar) -> None:
    if to_float(mu) < 0:
        raise PairSplitError(f"mu must be >= 0, got {mu}")
    if not (0 <= to_float(lam) <= 1):
        raise PairSplitError(f"lambda must lie in [0,1], got {lam}")


def nu_rho(mu: Scalar, lam: Scalar) -> Tuple[Scalar, Scalar]:
    """Overlap parameters (nu, rho) of the 2x2 split; exact on rational input.

    nu = (1-lam)lam / ((1+mu-lam)(mu+lam)) and rho = (1-lam)mu / (mu+lam)
    for mu != 0;  (nu, rho) = (1, 0) for mu = 0.
    """
    _check_range(mu, lam)
    if mu == 0:
        one = Fraction(1) if is_exact(mu, lam) else 1.0
        return one, 0 * one
    nu = (1 - lam) * lam / ((1 + mu - lam) * (mu + lam))
    rho = (1 - lam) * mu / (mu + lam)
    return nu, rho


def _sqrt(x: Scalar) -> float:
    xf = to_float(x)
    if xf < 0:
        # exact arithmetic keeps these in range; floats may dip below by rounding
        if xf < -1e-12:
            raise PairSplitError(f"negative radicand {x}")
        xf = 0.0
    return math.sqrt(xf)


@dataclass
class PairSplit:
    """Result of one 2x2 split over basis coordinates (e_index, f_index).

    ``w_coeffs`` and ``v_coeffs`` are the (f, e) coefficient pairs
    (sqrt(rho), -sqrt(1-rho)) and (sqrt(nu), sqrt(1-nu)).
    """

    nu: Scalar
    rho: Scalar
    remainder_coeff: Scalar
    e_index: int
    f_index: int
    w_coeffs: Tuple[float, float]
    v_coeffs: Tuple[float, float]

    def w_vector(self, dim: int) -> np.ndarray:
        v = np.zeros(dim)
        v[self.f_index], v[self.e_index] = self.w_coeffs
        return v

    def v_vector(self, dim: int) -> np.ndarray:
        v = np.zeros(dim)
        v[self.f_index], v[self.e_index] = self.v_coeffs
        return v

    def block(self) -> Tuple[np.ndarray, np.ndarray]:
        """(w(x)w, v(x)v) as 2x2 blocks ordered (e, f)."""
        wf, we = self.w_coeffs
        vf, ve = self.v_coeffs
        w = np.array([we, wf])
        v = np.array([ve, vf])
        return np.outer(w, w), np.outer(v, v)


def split_pair(mu: Scalar, lam: Scalar, e_index: int = 0, f_index: int = 1) -> PairSplit:
    """Split (1+mu) e(x)e + (1-lam) f(x)f into w(x)w + (1+mu-lam) v(x)v."""
    if e_index == f_index:
        raise PairSplitError("e_index and f_index must differ")
    nu, rho = nu_rho(mu, lam)
    w = (_sqrt(rho), -_sqrt(1 - rho))
    v = (_sqrt(nu), _sqrt(1 - nu))
    return PairSplit(nu=nu, rho=rho, remainder_coeff=1 + mu - lam,
                     e_index=e_index, f_index=f_index, w_coeffs=w, v_coeffs=v)


def pair_vectors(mu: Scalar, lam: Scalar, e_vec: np.ndarray, f_vec: np.ndarray):
    """Apply the split with arbitrary orthonormal carrier vectors.

    Returns (w, v, remainder_coeff, nu, rho).  Used by the iterative
    constructions, where one of the carriers is a running dense vector.
    """
    nu, rho = nu_rho(mu, lam)
    w = _sqrt(rho) * f_vec - _sqrt(1 - rho) * e_vec
    v = _sqrt(nu) * f_vec + _sqrt(1 - nu) * e_vec
    return w, v, 1 + mu - lam, nu, rho


def rebalance(a: Scalar, b: Scalar, c: Scalar) -> Tuple[Scalar, Scalar]:
    """Redistribution parameters (rho', nu') for b E + a F = c P- + (a+b-c) P+.

    Requires 0 <= a <= c <= b.  P-/P+ are built from (rho', nu') with the same
    coefficient pattern as the basic split (P- carries the minus sign on E).
    """
    af, bf, cf = to_float(a), to_float(b), to_float(c)
    if af < 0 or not (af <= cf <= bf):
        raise PairSplitError(f"need 0 <= a <= c <= b, got a={a}, c={c}, b={b}")
    if b == c:
        one = Fraction(1) if is_exact(a, b, c) else 1.0
        return 0 * one, one
    if a == 0:
        zero = Fraction(0) if is_exact(a, b, c) else 0.0
        return zero, zero
    if c == 0:
        raise PairSplitError("c = 0 with a > 0")
    rho = a * (b - c) / (c * (b - a))
    nu = a * (c - a) / ((a + b - c) * (b - a))
    return rho, nu


def _rebalance_vectors(a, b, c, e_vec, f_vec):
    """P' = w(x)w, Q' = v(x)v realizing b e(x)e + a f(x)f = c P' + (a+b-c) Q'."""
    rho, nu = rebalance(a, b, c)
    w = _sqrt(rho) * f_vec - _sqrt(1 - rho) * e_vec
    v = _sqrt(nu) * f_vec + _sqrt(1 - nu) * e_vec
    return w, v


def _eig2_symmetric(m11: float, m12: float, m22: float):
    """Eigenpairs of a symmetric 2x2, larger eigenvalue first."""
    if m12 == 0:
        if m11 >= m22:
            return (m11, np.array([1.0, 0.0])), (m22, np.array([0.0, 1.0]))
        return (m22, np.array([0.0, 1.0])), (m11, np.array([1.0, 0.0]))
    half_tr = 0.5 * (m11 + m22)
    disc = math.hypot(0.5 * (m11 - m22), m12)
    big, small = half_tr + disc, half_tr - disc
    u = np.array([m12, big - m11])
    u /= np.linalg.norm(u)
    u_perp = np.array([-u[1], u[0]])
    return (big, u), (small, u_perp)


def _as_unit_vector(p: Union[RankOneProjection, np.ndarray]) -> np.ndarray:
    v = p.vector if isinstance(p, RankOneProjection) else np.asarray(p, dtype=float)
    n = np.linalg.norm(v)
    if abs(n - 1.0) > 1e-10:
        raise PairSplitError(f"not a unit vector (norm {n})")
    return v


def rebalance_rank_one(a: Scalar, P, b: Scalar, Q, c: Scalar):
    """aP + bQ = cP' + (a+b-c)Q' for rank-one P, Q that need not be orthogonal.

    Diagonalizes the rank-<=2 operator aP + bQ on span{p, q} and applies the
    orthogonal-pair redistribution on the eigenbasis.  Degenerate span returns
    (P, P).
    """
    af, bf, cf = to_float(a), to_float(b), to_float(c)
    if not (af <= cf <= bf):
        raise PairSplitError(f"need a <= c <= b, got a={a}, c={c}, b={b}")
    p = _as_unit_vector(P)
    q = _as_unit_vector(Q)
    overlap = float(np.dot(p, q))
    if abs(abs(overlap) - 1.0) <= 1e-12:
        return RankOneProjection(p, "P'"), RankOneProjection(p, "Q'")
    if a == c:
        return (RankOneProjection(p, "P'"), RankOneProjection(q, "Q'"))
    if c == b:
        return (RankOneProjection(q, "P'"), RankOneProjection(p, "Q'"))
    if af == 0:
        return (RankOneProjection(q, "P'"), RankOneProjection(q, "Q'"))
    # orthonormal basis (u1, u2) of span{p, q}
    u1 = p
    r = q - overlap * p
    u2 = r / np.linalg.norm(r)
    # M = a p(x)p + b q(x)q on that basis
    qb = np.array([overlap, float(np.linalg.norm(r))])
    m = af * np.outer([1.0, 0.0], [1.0, 0.0]) + bf * np.outer(qb, qb)
    (big, e2), (small, f2) = _eig2_symmetric(m[0, 0], m[0, 1], m[1, 1])
    e_vec = e2[0] * u1 + e2[1] * u2
    f_vec = f2[0] * u1 + f2[1] * u2
    w, v = _rebalance_vectors(small, big, cf, e_vec, f_vec)
    return RankOneProjection(w, "P'"), RankOneProjection(v, "Q'")


def _orthonormal_range(m: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis of the range of a (near-)projection matrix."""
    u, s, _ = np.linalg.svd(m)
    r = int(np.sum(s > 0.5))
    return u[:, :r]


def rebalance_commuting(a: Scalar, P: Projection, b: Scalar, Q: Projection,
                        c: Scalar, tol: float = 1e-10):
    """aP + bQ = cP' + (a+b-c)Q' for commuting projections of any rank.

    Requires PQ = QP, 0 <= a < b, a <= c <= b and equal ranks of P - PQ and
    Q - PQ.  The common part PQ passes to both outputs untouched; the disjoint
    parts split block-by-block through paired range bases.
    """
    af, bf, cf = to_float(a), to_float(b), to_float(c)
    if not (0 <= af < bf) or not (af <= cf <= bf):
        raise PairSplitError(f"need 0 <= a < b and a <= c <= b, got {a}, {c}, {b}")
    pm, qm = P.matrix, Q.matrix
    if np.linalg.norm(pm @ qm - qm @ pm) > tol:
        raise PairSplitError("projections do not commute")
    d = pm @ qm
    rp = pm - d
    rq = qm - d
    rank_p = int(round(np.trace(rp)))
    rank_q = int(round(np.trace(rq)))
    if rank_p != rank_q:
        raise PairSplitError(
            f"rank(P-PQ)={rank_p} != rank(Q-PQ)={rank_q}; no equivalence")
    common = _orthonormal_range(d) if np.trace(d) > 0.5 else np.zeros((pm.shape[0], 0))
    if rank_p == 0:
        return (Projection(common, "P'"), Projection(common, "Q'"))
    fp = _orthonormal_range(rp)   # carries coefficient a (the F role)
    fq = _orthonormal_range(rq)   # carries coefficient b (the E role)
    w_cols, v_cols = [], []
    for i in range(rank_p):
        w, v = _rebalance_vectors(a, b, c, fq[:, i], fp[:, i])
        w_cols.append(w)
        v_cols.append(v)
    p_frame = np.column_stack(w_cols + [common] if common.size else w_cols)
    q_frame = np.column_stack(v_cols + [common] if common.size else v_cols)
    return Projection(p_frame, "P'"), Projection(q_frame, "Q'")


def split_equal_multi(coeffs: Sequence[Scalar], rank: int = 1) -> List[Projection]:
    """Sum_j gamma_j E_j with integer total k >= n becomes k equal-rank projections.

    The E_j are realized as the canonical block basis (j-th block of ``rank``
    coordinates, in input order); the rank-one diagonal case delegates to the
    finite decomposition and the result tensors with the identity on each
    block.
    """
    from .finite import decompose_finite  # local import: finite builds on this module
    from .core import Spectrum, SpectrumEntry

    coeffs = list(coeffs)
    n = len(coeffs)
    if n == 0:
        return []
    if any(to_float(g) <= 0 for g in coeffs):
        raise PairSplitError("coefficients must be positive")
    total = sum(coeffs, Fraction(0)) if is_exact(*coeffs) else sum(map(float, coeffs))
    if is_exact(*coeffs):
        if Fraction(total).denominator != 1:
            raise PairSplitError(f"coefficient sum {total} is not an integer")
        k = int(total)
    else:
        k = round(total)
        if abs(total - k) > 1e-9:
            raise PairSplitError(f"coefficient sum {total} is not an integer")
    if k < n:
        raise PairSplitError(
            f"coefficient sum {k} is below the projection count {n}; "
            "the trace must dominate the rank")
    spec = Spectrum(tuple(SpectrumEntry(g, 1) for g in coeffs))
    dec = decompose_finite(spec)
    out: List[Projection] = []
    eye = np.eye(rank)
    for p in dec.projections:
        if rank == 1:
            out.append(Projection(p.vector[:, None], p.label))
        else:
            out.append(Projection(np.kron(p.vector[:, None], eye), p.label))
    return out
