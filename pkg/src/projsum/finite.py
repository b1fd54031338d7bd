"""Finite-rank decomposition into rank-one projections.

A finite positive diagonal operator is a sum of projections exactly when its
trace is a positive integer at least as large as its rank.  The construction
peels off ``trace - rank`` basis projections from the largest eigenvalues,
passes eigenvalue-1 coordinates through unchanged, and then chains the
remaining excess/defect entries through repeated 2x2 splits.  The running
remainder (1+delta) v (x) v tracks delta = consumed excess - consumed defect,
which returns to zero exactly when everything is consumed.

``decompose_with_remainder`` runs the same chain when the trace gap is not an
integer: it requires 0 <= sum(mu) - sum(lam) <= max(mu), defers the largest
excess entry to the last position, and leaves a single weighted rank-one
remainder instead of finishing on a projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np

from .core import (
    InfeasibleError,
    RankOneProjection,
    Scalar,
    Spectrum,
    SpectrumEntry,
    SpectrumError,
    StepDiag,
    is_exact,
    to_float,
)
from .pairsplit import pair_vectors


@dataclass
class FiniteDecomposition:
    projections: List[RankOneProjection]
    remainder: Optional[Tuple[Scalar, np.ndarray]]
    dimension: int
    steps: List[StepDiag] = field(default_factory=list)

    def reconstruction(self) -> np.ndarray:
        out = np.zeros((self.dimension, self.dimension))
        for p in self.projections:
            out += p.matrix
        if self.remainder is not None:
            coeff, vec = self.remainder
            out += to_float(coeff) * np.outer(vec, vec)
        return out


@dataclass
class FillmoreResult:
    feasible: bool
    count: Optional[int] = None
    reason: str = ""


def _expand(spectrum: Spectrum) -> List[Scalar]:
    """Eigenvalues repeated by multiplicity, in entry order."""
    if spectrum.tails:
        raise SpectrumError("finite decomposition needs a finite spectrum")
    values: List[Scalar] = []
    for e in spectrum.entries:
        m = e.mult
        if isinstance(m, float):
            if abs(m - round(m)) > 1e-12:
                raise SpectrumError(f"multiplicity {m} is not an integer")
            m = round(m)
        elif isinstance(m, Fraction):
            if m.denominator != 1:
                raise SpectrumError(f"multiplicity {m} is not an integer")
            m = int(m)
        values.extend([e.value] * int(m))
    return values


def _is_one(v: Scalar) -> bool:
    if isinstance(v, (int, Fraction)):
        return v == 1
    return abs(v - 1.0) <= 1e-12


def fillmore_feasible(spectrum: Spectrum) -> FillmoreResult:
    """Finite sum-of-projections test: integer trace >= rank."""
    values = _expand(spectrum)
    rank = len(values)
    trace = sum(values, Fraction(0)) if is_exact(*values) else sum(map(float, values))
    if isinstance(trace, Fraction):
        if trace.denominator != 1:
            return FillmoreResult(False, reason=f"trace {trace} is not an integer")
        count = int(trace)
    else:
        count = round(trace)
        if abs(trace - count) > 1e-9:
            return FillmoreResult(False, reason=f"trace {trace} is not an integer")
    if count < rank:
        return FillmoreResult(False, reason=f"trace {count} is below rank {rank}")
    if count == 0:
        return FillmoreResult(False, reason="zero operator")
    return FillmoreResult(True, count=count)


def peel_integer(spectrum: Spectrum):
    """Emit trace-gap many basis projections off the largest excess coordinates.

    Each peel subtracts 1 from the currently largest eigenvalue above 1, which
    keeps the operator positive without lookahead.  Returns the emitted basis
    projections and the reduced per-coordinate spectrum (trace = rank).
    """
    values = _expand(spectrum)
    d = len(values)
    trace = sum(values, Fraction(0)) if is_exact(*values) else sum(map(float, values))
    gap = trace - d
    if isinstance(gap, Fraction):
        if gap.denominator != 1 or gap < 1:
            raise InfeasibleError(f"nothing to peel: trace gap {gap}")
        k = int(gap)
    else:
        k = round(gap)
        if abs(gap - k) > 1e-9 or k < 1:
            raise InfeasibleError(f"nothing to peel: trace gap {gap}")
    units: List[RankOneProjection] = []
    for _ in range(k):
        coord = max(range(d), key=lambda c: to_float(values[c]))
        if to_float(values[coord]) <= 1:
            raise InfeasibleError("insufficient excess to peel")
        e = np.zeros(d)
        e[coord] = 1.0
        units.append(RankOneProjection(e, f"peel@{coord}"))
        values[coord] = values[coord] - 1
    reduced = Spectrum(tuple(SpectrumEntry(v, 1) for v in values), (), spectrum.mode)
    return units, reduced


def _chain(values: List[Scalar], coords: List[int], dim: int,
           allow_remainder: bool):
    """Consume excess/defect coordinates through chained 2x2 splits.

    ``values`` are the eigenvalues (none equal to 1) at ``coords``.  Excess
    entries initialize or re-initialize the carried direction; the carried
    weight 1+delta meets the next defect while delta > 0 and the next excess
    while delta < 0.  At delta = 0 the carried direction is itself a
    projection: it is emitted and the chain restarts.
    """
    excess = [(c, v - 1) for c, v in zip(coords, values) if to_float(v) > 1]
    defect = [(c, 1 - v) for c, v in zip(coords, values) if to_float(v) < 1]
    projections: List[RankOneProjection] = []
    steps: List[StepDiag] = []
    zero = Fraction(0) if is_exact(*values) else 0.0

    ei = di = 0
    carried: Optional[np.ndarray] = None
    delta = zero
    step_no = 0

    def basis(c: int) -> np.ndarray:
        v = np.zeros(dim)
        v[c] = 1.0
        return v

    def is_zero(x: Scalar) -> bool:
        return x == 0 if isinstance(x, (int, Fraction)) else abs(x) <= 1e-9

    while True:
        if carried is None:
            if ei == len(excess):
                break
            coord, mu = excess[ei]
            ei += 1
            carried = basis(coord)
            delta = delta + mu
            step_no += 1
            steps.append(StepDiag(step_no, delta, None, 0.0, f"e@{coord}"))
            continue
        if is_zero(delta):
            projections.append(RankOneProjection(carried, "chain-closed"))
            carried = None
            if ei == len(excess) and di == len(defect):
                break
            continue
        if to_float(delta) > 0:
            if di == len(defect):
                break  # remainder case: positive surplus survives
            coord, lam = defect[di]
            di += 1
            w, v, _, nu, rho = pair_vectors(delta, lam, carried, basis(coord))
            projections.append(RankOneProjection(w, f"split@f{coord}"))
            carried = v
            delta = delta - lam
            step_no += 1
            steps.append(StepDiag(step_no, delta, nu, 0.0, f"f@{coord}"))
        else:
            if ei == len(excess):
                raise InfeasibleError(
                    f"defect surplus {-to_float(delta)} with no excess left")
            coord, mu = excess[ei]
            ei += 1
            w, v, _, nu, rho = pair_vectors(mu, -delta, basis(coord), carried)
            projections.append(RankOneProjection(w, f"split@e{coord}"))
            carried = v
            delta = delta + mu
            step_no += 1
            steps.append(StepDiag(step_no, delta, nu, 0.0, f"e@{coord}"))

    if carried is not None:
        if not allow_remainder:
            raise InfeasibleError(f"chain ended with surplus delta = {delta}")
        # the max-mu-last ordering guarantees the surplus only survives once
        # every entry is consumed
        assert ei == len(excess) and di == len(defect)
        return projections, (1 + delta, carried), steps
    if not allow_remainder:
        return projections, None, steps
    # remainder contract: the last emitted projection is reported as the
    # weighted remainder with coefficient exactly 1
    if not projections:
        raise InfeasibleError("nothing to decompose")
    last = projections.pop()
    one = Fraction(1) if isinstance(delta, (int, Fraction)) else 1.0
    return projections, (one, last.vector), steps


def decompose_finite(spectrum: Spectrum) -> FiniteDecomposition:
    """Decompose a feasible finite spectrum into exactly trace-many projections."""
    check = fillmore_feasible(spectrum)
    if not check.feasible:
        raise InfeasibleError(check.reason)
    values = _expand(spectrum)
    d = len(values)

    projections: List[RankOneProjection] = []
    steps: List[StepDiag] = []

    trace = sum(values, Fraction(0)) if is_exact(*values) else sum(map(float, values))
    gap = trace - d
    k = int(gap) if isinstance(gap, Fraction) else round(gap)
    if k >= 1:
        working = Spectrum(tuple(SpectrumEntry(v, 1) for v in values), (), spectrum.mode)
        units, reduced = peel_integer(working)
        projections.extend(units)
        values = [e.value for e in reduced.entries]

    unit_coords = [c for c, v in enumerate(values) if _is_one(v)]
    for c in unit_coords:
        e = np.zeros(d)
        e[c] = 1.0
        projections.append(RankOneProjection(e, f"unit@{c}"))

    rest = [(c, v) for c, v in enumerate(values) if not _is_one(v)]
    if rest:
        coords = [c for c, _ in rest]
        vals = [v for _, v in rest]
        chain_projs, rem, steps = _chain(vals, coords, d, allow_remainder=False)
        assert rem is None
        projections.extend(chain_projs)

    expected = check.count
    if len(projections) != expected:
        raise AssertionError(
            f"produced {len(projections)} projections, expected trace {expected}")
    return FiniteDecomposition(projections, None, d, steps)


def decompose_with_remainder(spectrum: Spectrum) -> FiniteDecomposition:
    """Chain all entries but leave a weighted rank-one remainder.

    Requires 0 <= sum(mu) - sum(lam) <= max(mu); the largest excess entry is
    deferred (stable swap) to the last position so the chain never strands a
    defect.  Produces n+m-1 projections plus remainder 1 + sum(mu) - sum(lam).
    """
    values = _expand(spectrum)
    d = len(values)
    mus = [v - 1 for v in values if to_float(v) > 1]
    lams = [1 - v for v in values if to_float(v) < 1 and not _is_one(v)]
    s = sum(mus, Fraction(0)) - sum(lams, Fraction(0))
    if to_float(s) < 0:
        raise InfeasibleError(
            f"violated 0 <= sum(mu) - sum(lam): sum(mu) - sum(lam) = {s}")
    if mus:
        mx = max(mus, key=to_float)
        if to_float(s) > to_float(mx):
            raise InfeasibleError(
                f"violated sum(mu) - sum(lam) <= max(mu): {s} > {mx}")
    elif to_float(s) > 0:
        raise InfeasibleError("no excess entries to carry the surplus")

    # stable swap: move the (first) largest excess coordinate to the end
    order = list(range(d))
    excess_coords = [c for c in order if to_float(values[c]) > 1]
    if excess_coords:
        cmax = max(excess_coords, key=lambda c: to_float(values[c]))
        order.remove(cmax)
        order.append(cmax)

    unit_coords = [c for c in order if _is_one(values[c])]
    rest = [(c, values[c]) for c in order if not _is_one(values[c])]

    projections: List[RankOneProjection] = []
    for c in unit_coords:
        e = np.zeros(d)
        e[c] = 1.0
        projections.append(RankOneProjection(e, f"unit@{c}"))

    if rest:
        coords = [c for c, _ in rest]
        vals = [v for _, v in rest]
        chain_projs, rem, steps = _chain(vals, coords, d, allow_remainder=True)
        projections.extend(chain_projs)
    elif projections:
        last = projections.pop()
        rem = (Fraction(1), last.vector)
        steps = []
    else:
        raise InfeasibleError("empty spectrum")
    return FiniteDecomposition(projections, rem, d, steps)
