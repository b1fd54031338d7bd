"""Sums of exactly two projections for finite diagonal operators.

A finite positive operator with spectrum in (0, 2] is a sum of two
projections exactly when its spectrum is symmetric about 1: every eigenvalue
t in (0,1) pairs with 2-t at equal multiplicity, while eigenvalues 1 and 2
are unconstrained (2 = 1+1 splits as a doubled direction, and eigenvalue-1
directions attach wholly to the first projection).  On each paired 2-plane
the two projections are

    P- = (1/2) [[t, -s], [-s, 2-t]],    P+ = (1/2) [[t, s], [s, 2-t]]

on the (t-eigenvector, (2-t)-eigenvector) basis, with s = sqrt(t(2-t)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Tuple

import numpy as np

from .core import (
    Projection,
    Scalar,
    Spectrum,
    SpectrumError,
    is_exact,
    to_float,
)
from .finite import _expand


class PairingError(ValueError):
    """Asymmetric multiplicity; ``witness`` is the offending sub-unit value."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass
class SymmetryPairing:
    pairs: List[Tuple[int, int]]   # (coordinate of t, coordinate of 2-t), t < 1
    fixed_unit: List[int]          # coordinates with eigenvalue 1
    doubled: List[int]             # coordinates with eigenvalue 2


def _is(v: Scalar, target: int) -> bool:
    if isinstance(v, (int, Fraction)):
        return v == target
    return abs(v - target) <= 1e-12


def symmetry_pairing(spectrum: Spectrum) -> SymmetryPairing:
    """Match each sub-unit eigenvalue coordinate with a 2-t partner.

    Exact matching in rational mode, 1e-9 in float mode.  Raises
    PairingError with the first mismatched sub-unit value as witness (or the
    reflection 2-s of an unmatched super-unit value).
    """
    values = _expand(spectrum)
    for v in values:
        if not (0 < to_float(v) <= 2 + 1e-12):
            raise SpectrumError(f"two-projection sums need spectrum in (0,2], got {v}")
    fixed = [c for c, v in enumerate(values) if _is(v, 1)]
    doubled = [c for c, v in enumerate(values) if _is(v, 2)]
    sub = [(c, v) for c, v in enumerate(values)
           if to_float(v) < 1 and not _is(v, 1)]
    sup = [(c, v) for c, v in enumerate(values)
           if to_float(v) > 1 and not _is(v, 2)]

    exact = is_exact(*values) if values else True
    taken = [False] * len(sup)
    pairs: List[Tuple[int, int]] = []
    for c_sub, t in sub:
        found = None
        for k, (c_sup, s) in enumerate(sup):
            if taken[k]:
                continue
            if (2 - s == t) if exact else abs(to_float(2 - s) - to_float(t)) <= 1e-9:
                found = k
                break
        if found is None:
            raise PairingError(
                f"eigenvalue {t} has no partner at {2 - t}", witness=t)
        taken[found] = True
        pairs.append((c_sub, sup[found][0]))
    for k, (c_sup, s) in enumerate(sup):
        if not taken[k]:
            raise PairingError(
                f"eigenvalue {s} has no partner at {2 - s}", witness=2 - s)
    return SymmetryPairing(pairs=pairs, fixed_unit=fixed, doubled=doubled)


def build_two_projections(spectrum: Spectrum,
                          pairing: SymmetryPairing = None) -> Tuple[Projection, Projection]:
    """Construct (P, Q) with P + Q = A from a symmetric spectrum.

    Eigenvalue-1 coordinates attach to P; eigenvalue-2 coordinates belong to
    both.  Each paired 2-plane contributes one rank-one piece to each side.
    """
    if pairing is None:
        pairing = symmetry_pairing(spectrum)
    values = _expand(spectrum)
    d = len(values)
    p_cols: List[np.ndarray] = []
    q_cols: List[np.ndarray] = []
    for c_sub, c_sup in pairing.pairs:
        t = to_float(values[c_sub])
        wf, we = math.sqrt(t / 2), math.sqrt((2 - t) / 2)
        w = np.zeros(d)
        w[c_sub], w[c_sup] = wf, -we
        v = np.zeros(d)
        v[c_sub], v[c_sup] = wf, we
        p_cols.append(w)
        q_cols.append(v)
    for c in pairing.fixed_unit:
        e = np.zeros(d)
        e[c] = 1.0
        p_cols.append(e)
    for c in pairing.doubled:
        e = np.zeros(d)
        e[c] = 1.0
        p_cols.append(e.copy())
        q_cols.append(e.copy())
    p_frame = np.column_stack(p_cols) if p_cols else np.zeros((d, 0))
    q_frame = np.column_stack(q_cols) if q_cols else np.zeros((d, 0))
    return Projection(p_frame, "P"), Projection(q_frame, "Q")
