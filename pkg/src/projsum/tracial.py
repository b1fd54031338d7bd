"""Type II machinery at desk scale, in exact rational arithmetic.

The balanced state (mu, lam, tauE, tauF) with mu*tauE = lam*tauF drives a
subtractive iteration: while mu < lam the defect absorbs the excess
(lam -> lam - mu, tauE -> tauE - tauF), while mu > lam the excess absorbs the
defect (mu -> mu - lam, tauF -> tauF - tauE); equality terminates with a sum
of two equivalent projections.  On rational inputs this is the subtractive
Euclid algorithm and always terminates; the float demo with an irrational
ratio keeps alternating branches while both traces shrink toward zero.

A strict surplus mu*tauE > lam*tauF splits the excess projection into three
pieces: a balanced part that feeds the iteration, a second balanced (or, for
integer mu, trivially integer) part, and an integer multiple of a projection.
The water-filling matcher distributes each defect entry across excess entries
so that every matched pair is exactly balanced.

``realize_matrix_model`` replays the whole pipeline inside a concrete N x N
diagonal algebra with normalized trace: traces become ranks, projections
become explicit frames, and the produced decomposition is re-verified
numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import InfeasibleError, Projection, Scalar, is_exact, to_float
from .pairsplit import nu_rho

Rational = Union[Fraction, int]


class TracialError(ValueError):
    pass


def _frac(x, name: str) -> Fraction:
    if isinstance(x, (Fraction, int)):
        return Fraction(x)
    raise TracialError(f"{name} must be an exact rational, got {x!r}")


# ---------------------------------------------------------------------------
# the balanced state and its iteration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceState:
    """Balanced excess/defect pair: mu*tauE = lam*tauF, all positive."""

    mu: Scalar
    lam: Scalar
    tauE: Scalar
    tauF: Scalar

    def __post_init__(self):
        if to_float(self.mu) <= 0:
            raise TracialError(f"mu must be > 0, got {self.mu}")
        if not (0 < to_float(self.lam) < 1):
            raise TracialError(f"lambda must lie in (0,1), got {self.lam}")
        if to_float(self.tauE) <= 0 or to_float(self.tauF) <= 0:
            raise TracialError("traces must be positive")
        lhs, rhs = self.mu * self.tauE, self.lam * self.tauF
        if self.is_exact():
            balanced = lhs == rhs
        else:
            # float mode exists only for the non-termination demo; the exact
            # invariant is relaxed to a relative tolerance there
            l, r = to_float(lhs), to_float(rhs)
            balanced = abs(l - r) <= 1e-9 * (abs(l) + abs(r) + 1e-300)
        if not balanced:
            raise TracialError(
                f"unbalanced state: mu*tauE = {lhs} != lam*tauF = {rhs}")

    def is_exact(self) -> bool:
        return is_exact(self.mu, self.lam, self.tauE, self.tauF)


@dataclass
class IterationResult:
    states: List[TraceState]          # initial state first
    branches: List[str]               # "absorb_excess" (mu<lam) / "absorb_defect"
    status: str                       # "terminated_equal" | "running"
    terminal_step: Optional[int] = None

    def csv_rows(self) -> List[tuple]:
        rows = [("k", "branch", "mu", "lambda", "tauE", "tauF")]
        for k, s in enumerate(self.states):
            b = self.branches[k - 1] if k >= 1 else ""
            rows.append((k, b, str(s.mu), str(s.lam), str(s.tauE), str(s.tauF)))
        return rows


def iterate_balanced(state: TraceState, max_steps: int = 1000) -> IterationResult:
    """Run the subtractive iteration until mu = lam or the step budget ends.

    Every visited state satisfies the balanced invariant exactly, and both
    traces are nonincreasing.  Rational inputs always terminate (subtractive
    Euclid); the float mode exists for the irrational-ratio demonstration.
    """
    states = [state]
    branches: List[str] = []
    cur = state
    for k in range(max_steps):
        if cur.mu == cur.lam:
            return IterationResult(states, branches, "terminated_equal", k)
        if cur.mu < cur.lam:
            nxt = TraceState(cur.mu, cur.lam - cur.mu,
                             cur.tauE - cur.tauF, cur.tauF)
            branches.append("absorb_excess")
        else:
            nxt = TraceState(cur.mu - cur.lam, cur.lam,
                             cur.tauE, cur.tauF - cur.tauE)
            branches.append("absorb_defect")
        states.append(nxt)
        cur = nxt
    if cur.mu == cur.lam:
        return IterationResult(states, branches, "terminated_equal", max_steps)
    return IterationResult(states, branches, "running")


# ---------------------------------------------------------------------------
# the three-way split of a strict surplus
# ---------------------------------------------------------------------------

@dataclass
class IntegerMultiple:
    """count copies of one projection of the given trace."""

    count: int
    trace: Fraction
    coefficient: Fraction       # count as an exact scalar, for reporting


@dataclass
class GeneralSplit:
    tauE1: Fraction
    tauE2: Fraction
    tauE3: Fraction
    balanced_head: Optional[TraceState]       # (1+mu)E1 + (1-lam)F, if E1 != 0
    balanced_mid: Optional[TraceState]        # A2 when mu is not an integer
    mid_integer: Optional[IntegerMultiple]    # A2 when mu is an integer
    tail_integer: IntegerMultiple             # A3 = (1+floor(mu)) E2


def split_surplus(mu, lam, tauE, tauF) -> GeneralSplit:
    """Split a strict surplus mu*tauE > lam*tauF >= 0 into three tractable pieces.

    The traces are tauE1 = (lam/mu) tauF, tauE2 = s/(1+floor(mu)) and
    tauE3 = (1 - mu + floor(mu)) s / (mu (1+floor(mu))) with s the surplus;
    they add back to tauE exactly.
    """
    mu = _frac(mu, "mu")
    lam = _frac(lam, "lambda")
    tauE = _frac(tauE, "tauE")
    tauF = _frac(tauF, "tauF")
    if mu <= 0 or tauE <= 0 or lam < 0 or tauF < 0:
        raise TracialError("need mu, tauE > 0 and lam, tauF >= 0")
    s = mu * tauE - lam * tauF
    if s == 0:
        raise TracialError("balanced input: route through the iteration")
    if s < 0:
        raise InfeasibleError("defect weight exceeds excess weight",
                              reason="defect_exceeds_excess")
    fl = math.floor(mu)
    tauE1 = (lam / mu) * tauF
    tauE2 = s / (1 + fl)
    tauE3 = (1 - mu + fl) * s / (mu * (1 + fl))
    if tauE1 + tauE2 + tauE3 != tauE:
        raise AssertionError("trace split does not add back to tauE")

    head = None
    if tauE1 > 0:
        head = TraceState(mu, lam, tauE1, tauF)
    if mu == fl:
        mid_int = IntegerMultiple(count=1 + fl, trace=tauE3,
                                  coefficient=Fraction(1 + fl))
        mid_bal = None
    else:
        mid_bal = TraceState(mu, 1 + fl - mu, tauE3, tauE2)
        mid_int = None
    tail = IntegerMultiple(count=1 + fl, trace=tauE2, coefficient=Fraction(1 + fl))
    return GeneralSplit(tauE1=tauE1, tauE2=tauE2, tauE3=tauE3,
                        balanced_head=head, balanced_mid=mid_bal,
                        mid_integer=mid_int, tail_integer=tail)


# ---------------------------------------------------------------------------
# water-filling matcher
# ---------------------------------------------------------------------------

@dataclass
class MatchResult:
    matches: Dict[Tuple[int, int], Tuple[Fraction, Fraction]]  # (j,i) -> (tEji, tFji)
    leftovers: List[Tuple[int, Fraction]]                      # (j, leftover tauE)


def water_fill_match(excess: Sequence[Tuple[Scalar, Scalar]],
                    defect: Sequence[Tuple[Scalar, Scalar]]) -> MatchResult:
    """Distribute each defect entry across excess entries, exactly balanced.

    ``excess`` holds (mu_j, tauE_j), ``defect`` (lam_i, tauF_i); requires
    sum(mu tauE) >= sum(lam tauF).  Defect entries are consumed in order,
    each drawing from the excess entry with the largest remaining weighted
    capacity mu_j * tauE_j first.  Every matched cell satisfies
    lam_i tauF_ji = mu_j tauE_ji exactly; residual excess returns as
    leftovers.
    """
    ex = [(_frac(m, "mu"), _frac(t, "tauE")) for m, t in excess]
    de = [(_frac(l, "lambda"), _frac(t, "tauF")) for l, t in defect]
    cap = [m * t for m, t in ex]
    need = sum((l * t for l, t in de), Fraction(0))
    have = sum(cap, Fraction(0))
    if need > have:
        raise InfeasibleError(
            f"defect weight {need} exceeds excess weight {have}",
            reason="defect_exceeds_excess")
    remaining = list(cap)
    matches: Dict[Tuple[int, int], Tuple[Fraction, Fraction]] = {}
    for i, (lam, tF) in enumerate(de):
        want = lam * tF
        while want > 0:
            j = max(range(len(ex)), key=lambda t: remaining[t])
            if remaining[j] == 0:
                raise AssertionError("capacity exhausted despite feasibility")
            take = min(want, remaining[j])
            mu_j = ex[j][0]
            tEji = take / mu_j
            tFji = take / lam
            prev = matches.get((j, i), (Fraction(0), Fraction(0)))
            matches[(j, i)] = (prev[0] + tEji, prev[1] + tFji)
            remaining[j] -= take
            want -= take
    leftovers = []
    for j, ((mu_j, _), rem) in enumerate(zip(ex, remaining)):
        if rem > 0:
            leftovers.append((j, rem / mu_j))
    return MatchResult(matches=matches, leftovers=leftovers)


# ---------------------------------------------------------------------------
# concrete matrix realization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TracialSpectrum:
    """Diagonalizable positive operator as (coefficient, trace) pairs."""

    terms: tuple                   # of (coefficient, trace), exact rationals
    normalized: bool = True        # total trace <= 1 when True

    def __post_init__(self):
        terms = tuple((_frac(c, "coefficient"), _frac(t, "trace"))
                      for c, t in self.terms)
        object.__setattr__(self, "terms", terms)
        for c, t in terms:
            if c <= 0 or t <= 0:
                raise TracialError("coefficients and traces must be positive")
        if self.normalized and sum(t for _, t in terms) > 1:
            raise TracialError("normalized spectrum needs total trace <= 1")

    def excess(self) -> List[Tuple[Fraction, Fraction]]:
        return [(c - 1, t) for c, t in self.terms if c > 1]

    def defect(self) -> List[Tuple[Fraction, Fraction]]:
        return [(1 - c, t) for c, t in self.terms if c < 1]

    def units(self) -> List[Fraction]:
        return [t for c, t in self.terms if c == 1]


@dataclass
class RealizedDecomposition:
    projections: List[Projection]
    denominator: int
    dimension: int
    target_diag: np.ndarray
    transcript: List[str] = field(default_factory=list)

    def reconstruction(self) -> np.ndarray:
        out = np.zeros((self.dimension, self.dimension))
        for p in self.projections:
            out += p.matrix
        return out

    def residual(self) -> float:
        return float(np.linalg.norm(np.diag(self.target_diag) - self.reconstruction()))


def _pair_frames(mu: Fraction, lam: Fraction, e_frame: np.ndarray,
                 f_frame: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Columnwise 2x2 splits: (1+mu) E + (1-lam) F = W W^T + (1+mu-lam) V V^T."""
    nu, rho = nu_rho(mu, lam)
    sr, sr1 = math.sqrt(to_float(rho)), math.sqrt(to_float(1 - rho))
    sn, sn1 = math.sqrt(to_float(nu)), math.sqrt(to_float(1 - nu))
    w = sr * f_frame - sr1 * e_frame
    v = sn * f_frame + sn1 * e_frame
    return w, v


def _realize_balanced(state: TraceState, e_frame: np.ndarray, f_frame: np.ndarray,
                      max_steps: int = 100_000) -> List[Projection]:
    """Concrete frames for a balanced pair, following the iteration."""
    mu, lam = state.mu, state.lam
    projections: List[Projection] = []
    k = 0
    while True:
        rE, rF = e_frame.shape[1], f_frame.shape[1]
        if mu == lam:
            if rE != rF:
                raise AssertionError("equal coefficients need equal ranks")
            w, v = _pair_frames(mu, lam, e_frame, f_frame)
            projections.append(Projection(w, f"R{k}-"))
            projections.append(Projection(v, f"R{k}+"))
            return projections
        if k >= max_steps:
            raise TracialError("iteration budget exhausted in realization")
        k += 1
        if mu < lam:
            # tauE > tauF: pair the first rF excess columns, keep the rest
            e_pair, e_rest = e_frame[:, :rF], e_frame[:, rF:]
            w, v = _pair_frames(mu, lam, e_pair, f_frame)
            projections.append(Projection(w, f"R{k}"))
            e_frame, f_frame = e_rest, v
            lam = lam - mu
        else:
            f_pair, f_rest = f_frame[:, :rE], f_frame[:, rE:]
            w, v = _pair_frames(mu, lam, e_frame, f_pair)
            projections.append(Projection(w, f"R{k}"))
            e_frame, f_frame = v, f_rest
            mu = mu - lam


def _collect_denominators(spectrum: TracialSpectrum) -> Tuple[List, int]:
    """Dry-run the pipeline symbolically; return the work list and the LCM."""
    denoms: List[int] = []
    work: List[tuple] = []

    def note(*fracs: Fraction):
        for f in fracs:
            denoms.append(Fraction(f).denominator)

    for c, t in spectrum.terms:
        note(t)
    for t in spectrum.units():
        work.append(("unit", t))
    match = water_fill_match(spectrum.excess(), spectrum.defect())
    ex = spectrum.excess()
    de = spectrum.defect()
    for (j, i), (tE, tF) in sorted(match.matches.items()):
        note(tE, tF)
        st = TraceState(ex[j][0], de[i][0], tE, tF)
        run = iterate_balanced(st, max_steps=100_000)
        if run.status != "terminated_equal":
            raise TracialError("rational iteration failed to terminate")
        for s in run.states:
            note(s.tauE, s.tauF)
        work.append(("pair", st))
    for j, tE0 in match.leftovers:
        note(tE0)
        mu_j = ex[j][0]
        split = split_surplus(mu_j, Fraction(0), tE0, Fraction(0))
        note(split.tauE2, split.tauE3)
        if split.balanced_mid is not None:
            run = iterate_balanced(split.balanced_mid, max_steps=100_000)
            if run.status != "terminated_equal":
                raise TracialError("rational iteration failed to terminate")
            for s in run.states:
                note(s.tauE, s.tauF)
            work.append(("pair", split.balanced_mid))
        if split.mid_integer is not None:
            work.append(("integer", split.mid_integer))
        work.append(("integer", split.tail_integer))
    lcm = 1
    for d in denoms:
        lcm = lcm * d // math.gcd(lcm, d)
    return work, lcm


def realize_matrix_model(spectrum: TracialSpectrum, denominator: int,
                         refine_cap: int = 4096) -> RealizedDecomposition:
    """Realize the type II pipeline in a concrete diagonal matrix algebra.

    ``denominator`` is refined to the LCM of every trace denominator in the
    full computation transcript; a refinement past ``refine_cap`` is an error
    reporting the offending value.  Projections are realized on consecutive
    index ranges, so the output is deterministic.
    """
    work, lcm = _collect_denominators(spectrum)
    N = denominator * lcm // math.gcd(denominator, lcm)
    if N > refine_cap:
        raise TracialError(
            f"denominator {denominator} refines to {N} (> cap {refine_cap}); "
            f"transcript requires multiples of {lcm}")

    dim = 0
    ranges: List[Tuple[int, int]] = []
    for c, t in spectrum.terms:
        r = t * N
        if r.denominator != 1:
            raise TracialError(f"trace {t} not representable at N = {N}")
        ranges.append((dim, dim + int(r)))
        dim += int(r)
    target = np.zeros(dim)
    for (c, _), (a, b) in zip(spectrum.terms, ranges):
        target[a:b] = to_float(c)

    # carve consecutive sub-ranges of each term's range as the pipeline asks
    cursors = {idx: ranges[idx][0] for idx in range(len(ranges))}

    def take(term_idx: int, trace: Fraction) -> np.ndarray:
        r = trace * N
        if r.denominator != 1:
            raise TracialError(f"trace {trace} not representable at N = {N}")
        r = int(r)
        a = cursors[term_idx]
        if a + r > ranges[term_idx][1]:
            raise AssertionError("range overrun in realization")
        cursors[term_idx] = a + r
        frame = np.zeros((dim, r))
        for i in range(r):
            frame[a + i, i] = 1.0
        return frame

    term_of_excess: List[int] = [i for i, (c, _) in enumerate(spectrum.terms) if c > 1]
    term_of_defect: List[int] = [i for i, (c, _) in enumerate(spectrum.terms) if c < 1]
    term_of_unit: List[int] = [i for i, (c, _) in enumerate(spectrum.terms) if c == 1]

    projections: List[Projection] = []
    transcript: List[str] = []

    unit_cursor = 0
    ex = spectrum.excess()
    de = spectrum.defect()
    match = water_fill_match(ex, de)

    for t in spectrum.units():
        frame = take(term_of_unit[unit_cursor], t)
        unit_cursor += 1
        projections.append(Projection(frame, "unit"))
        transcript.append(f"unit trace {t}")

    for (j, i), (tE, tF) in sorted(match.matches.items()):
        st = TraceState(ex[j][0], de[i][0], tE, tF)
        e_frame = take(term_of_excess[j], tE)
        f_frame = take(term_of_defect[i], tF)
        got = _realize_balanced(st, e_frame, f_frame)
        projections.extend(got)
        transcript.append(f"pair ({j},{i}): {len(got)} projections")

    for j, tE0 in match.leftovers:
        mu_j = ex[j][0]
        split = split_surplus(mu_j, Fraction(0), tE0, Fraction(0))
        e2 = take(term_of_excess[j], split.tauE2)
        e3 = take(term_of_excess[j], split.tauE3) if split.tauE3 > 0 else None
        if split.balanced_mid is not None:
            got = _realize_balanced(split.balanced_mid, e3, e2)
            projections.extend(got)
            transcript.append(f"leftover {j} balanced: {len(got)} projections")
        elif split.mid_integer is not None and e3 is not None:
            for _ in range(split.mid_integer.count):
                projections.append(Projection(e3.copy(), "int-multiple"))
            transcript.append(f"leftover {j} integer x{split.mid_integer.count}")
        for _ in range(split.tail_integer.count):
            projections.append(Projection(e2.copy(), "int-multiple"))
        transcript.append(f"leftover {j} tail x{split.tail_integer.count}")

    return RealizedDecomposition(projections=projections, denominator=N,
                                 dimension=dim, target_diag=target,
                                 transcript=transcript)
