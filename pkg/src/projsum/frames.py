"""Bridging decompositions and partial isometries with identity block-diagonal.

A decomposition A = sum P_j with integer trace D corresponds to a partial
isometry V (V^T V the range projection of A) and an orthogonal partition
I = sum E_j of the D-dimensional identity for which sum_j E_j V A V^T E_j = I.
Forward: stack partial isometries W_j mapping each P_j onto its identity
block, sum them and polar-decompose.  Backward: P_j = A^{1/2} V^T E_j V A^{1/2}.

``kadison_index`` computes the diagonal integrality obstruction: for diagonal
entries c of a projection, b - a with a the mass of entries <= 1/2 and b the
co-mass of entries > 1/2 is always an integer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple

import numpy as np

from .core import (
    InfeasibleError,
    Scalar,
    is_exact,
    to_float,
)


class CertificateError(ValueError):
    pass


@dataclass
class IsometryCertificate:
    V: np.ndarray                      # D x d partial isometry
    partition: List[np.ndarray]        # orthogonal projections summing to I_D
    range_residual: float              # ||V^T V - R_A||
    compression_residual: float        # ||sum E_j V A V^T E_j - I||

    @property
    def block_dimension(self) -> int:
        return self.V.shape[0]


def _range_projection(a: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    w, u = np.linalg.eigh(a)
    keep = w > tol * max(1.0, float(np.max(np.abs(w))))
    return u[:, keep] @ u[:, keep].T


def _sqrt_psd(a: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh(a)
    w = np.clip(w, 0.0, None)
    return u @ np.diag(np.sqrt(w)) @ u.T


def decomposition_to_isometry(a: np.ndarray, projections: Sequence) -> IsometryCertificate:
    """Build the partial isometry certificate from A = sum P_j, Tr A integer.

    The identity space has dimension Tr A; E_j are consecutive basis blocks
    sized by rank P_j.  The polar factor is computed through the SVD and
    defined on the row space only, so V^T V equals the range projection of A.
    """
    a = np.asarray(a, dtype=float)
    d = a.shape[0]
    tr = float(np.trace(a))
    D = round(tr)
    if abs(tr - D) > 1e-9 or D <= 0:
        raise InfeasibleError(
            f"trace {tr} is not a positive integer; no identity block exists",
            reason="non_integer_trace")
    mats = [p.matrix if hasattr(p, "matrix") else np.asarray(p, dtype=float)
            for p in projections]
    total = sum(mats)
    if np.linalg.norm(total - a) > 1e-9 * (1 + np.linalg.norm(a)):
        raise CertificateError("projections do not sum to A")
    ranks = [int(round(np.trace(m))) for m in mats]
    if sum(ranks) != D:
        raise CertificateError(
            f"projection ranks sum to {sum(ranks)}, trace needs {D}")

    b = np.zeros((D, d))
    offset = 0
    for m, r in zip(mats, ranks):
        if r == 1:
            w, u = np.linalg.eigh(m)
            vec = u[:, -1]
            b[offset, :] = vec
        else:
            w, u = np.linalg.eigh(m)
            cols = u[:, np.argsort(w)[::-1][:r]]
            b[offset:offset + r, :] = cols.T
        offset += r

    u, s, vt = np.linalg.svd(b, full_matrices=False)
    rank = int(np.sum(s > 1e-10 * max(1.0, float(s[0]))))
    v = u[:, :rank] @ vt[:rank, :]

    partition = []
    offset = 0
    for r in ranks:
        e = np.zeros((D, D))
        e[offset:offset + r, offset:offset + r] = np.eye(r)
        partition.append(e)
        offset += r

    r_a = _range_projection(a)
    range_residual = float(np.linalg.norm(v.T @ v - r_a))
    vav = v @ a @ v.T
    comp = sum(e @ vav @ e for e in partition)
    compression_residual = float(np.linalg.norm(comp - np.eye(D)))
    return IsometryCertificate(V=v, partition=partition,
                               range_residual=range_residual,
                               compression_residual=compression_residual)


def isometry_to_decomposition(v: np.ndarray, partition: Sequence[np.ndarray],
                              a: np.ndarray, tol: float = 1e-8) -> List[np.ndarray]:
    """Recover projections P_j = A^{1/2} V^T E_j V A^{1/2} from a certificate."""
    a = np.asarray(a, dtype=float)
    v = np.asarray(v, dtype=float)
    D = v.shape[0]
    part_sum = sum(np.asarray(e, dtype=float) for e in partition)
    if np.linalg.norm(part_sum - np.eye(D)) > tol:
        raise CertificateError("partition does not sum to the identity")
    r_a = _range_projection(a)
    if np.linalg.norm(v.T @ v - r_a) > tol:
        raise CertificateError("V^T V is not the range projection of A")
    vav = v @ a @ v.T
    comp = sum(np.asarray(e) @ vav @ np.asarray(e) for e in partition)
    if np.linalg.norm(comp - np.eye(D)) > tol:
        raise CertificateError("block compression of VAV^T is not the identity")
    root = _sqrt_psd(a)
    out = []
    for e in partition:
        p = root @ v.T @ np.asarray(e) @ v @ root
        out.append(p)
    return out


def kadison_index(c: Sequence[Scalar]) -> Tuple[Scalar, Scalar, Scalar, bool]:
    """(a, b, index, is_integer) for diagonal entries c of a candidate projection.

    a sums the entries <= 1/2, b sums 1 - entry over entries > 1/2; the index
    b - a is an exact integer precisely when c is the diagonal of a
    projection.  Exact in rational mode; 1e-9 in float mode.
    """
    vals = [Fraction(x) if isinstance(x, (int, Fraction)) else x for x in c]
    for x in vals:
        if not (0 <= to_float(x) <= 1):
            raise ValueError(f"diagonal entries must lie in [0,1], got {x}")
    exact = is_exact(*vals) if vals else True
    half = Fraction(1, 2)
    a = sum((x for x in vals if to_float(x) <= 0.5 and (not exact or x <= half)),
            Fraction(0))
    b = sum((1 - x for x in vals if to_float(x) > 0.5 or (exact and x > half)),
            Fraction(0))
    index = b - a
    if exact:
        is_int = Fraction(index).denominator == 1
    else:
        is_int = abs(to_float(index) - round(to_float(index))) <= 1e-9
    return a, b, index, is_int


def projection_diagonal_expansion(p: np.ndarray, tol: float = 1e-10):
    """Expand a projection's diagonal as weights of rank-one pieces on its range.

    With W an isometry from a rank(P)-dimensional space onto ran P, returns
    pairs (c_n, w_n) with c_n the diagonal entries and w_n = W^T e_n / sqrt(c_n)
    unit vectors satisfying sum c_n w_n (x) w_n = I on the range space.
    Rows with c_n = 0 map to a fixed unit vector with weight 0.
    """
    p = np.asarray(p, dtype=float)
    idem = float(np.linalg.norm(p @ p - p))
    sym = float(np.linalg.norm(p - p.T))
    if idem > tol or sym > tol:
        raise ValueError(
            f"not a projection: idempotency {idem:.2e}, symmetry {sym:.2e}")
    w, u = np.linalg.eigh(p)
    cols = u[:, w > 0.5]
    r = cols.shape[1]
    out = []
    for n in range(p.shape[0]):
        c_n = float(p[n, n])
        if c_n <= tol:
            vec = np.zeros(r)
            if r:
                vec[0] = 1.0
            out.append((0.0, vec))
        else:
            vec = cols.T @ np.eye(p.shape[0])[:, n] / math.sqrt(c_n)
            out.append((c_n, vec))
    return out
