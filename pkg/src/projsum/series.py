"""Iterative constructions for finite-trace spectra with infinitely many terms.

A single defect entry fed by a summable excess sequence (or a single excess
entry fed by summable defects) is consumed one term at a time: the carried
remainder (1+delta_j) v_j (x) v_j absorbs the next term through a 2x2 split,
and delta_j walks monotonically to 0.  The carried direction obeys the
recurrence

    v_1 = c_1,   v_j = sqrt(sigma_j) v_{j-1} + sqrt(1-sigma_j) c_j

over the consumed carriers c_j, with sigma_j determined by consecutive deltas:

    sigma_j = (1+delta_{j-1}) delta_{j-1} / ((1+delta_j)(2 delta_{j-1} - delta_j)).

Closed form: (v_n, c_k) = sqrt(1-sigma_k) * prod_{i=k+1..n} sqrt(sigma_i), so
strong convergence of the construction reduces to the decay of that product.
Truncated runs return a verified prefix plus the remaining carried term; no
claim of completed convergence is ever made.

When excess and defect both carry infinitely many terms the two sequences are
interleaved by the sign of delta, provided their prefix sums never collide.
The collision set routes the trace-balanced dispatcher: every collision closes
a finite trace-balanced block (handled by the finite module) and a
collision-free tail is interleaved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np

from .core import (
    Decomposition,
    FEASIBLE_FINITE,
    InfeasibleError,
    RankOneProjection,
    Remainder,
    Scalar,
    Spectrum,
    SpectrumEntry,
    SpectrumError,
    StepDiag,
    ValueSeq,
    classify,
    is_exact,
    split_parts,
    to_float,
)
from .finite import decompose_finite, decompose_with_remainder
from .pairsplit import pair_vectors


class SumMismatchError(ValueError):
    pass


class PrefixCollisionError(ValueError):
    """Prefix sums collide where the interleaving forbids it."""

    def __init__(self, message, m=None, n=None):
        super().__init__(message)
        self.m = m
        self.n = n


def _as_seq(seq) -> ValueSeq:
    if isinstance(seq, ValueSeq):
        return seq
    return ValueSeq(list(seq))


def _exact_eq(a: Scalar, b: Scalar, tol: float = 1e-12) -> bool:
    if is_exact(a, b):
        return a == b
    return abs(to_float(a) - to_float(b)) <= tol * (1 + abs(to_float(b)))


def sigma_step(delta_prev: Scalar, delta_cur: Scalar) -> Scalar:
    """sigma_j from (delta_{j-1}, delta_j); exact on rational input."""
    return ((1 + delta_prev) * delta_prev
            / ((1 + delta_cur) * (2 * delta_prev - delta_cur)))


@dataclass
class RecursionState:
    """Transcript of one carried-remainder run (local coordinates).

    Carrier ordinal k (1-indexed) lives on local coordinate k-1.  ``deltas``
    and ``sigmas`` are the 1-indexed transcripts delta_1..delta_{n+1} and
    sigma_1..sigma_{n+1}; ``vs`` holds v_1..v_{n+1}.
    """

    status: str
    dimension: int
    projections: List[RankOneProjection]
    remainder_coeff: Optional[Scalar]
    remainder_vector: Optional[np.ndarray]
    deltas: List[Scalar]
    sigmas: List[Scalar]
    vs: List[np.ndarray]
    steps: List[StepDiag] = field(default_factory=list)
    target_diag: Optional[np.ndarray] = None
    sum_one_minus_sigma: float = 0.0

    def delta(self, j: int) -> Scalar:
        return self.deltas[j - 1]

    def sigma(self, j: int) -> Scalar:
        return self.sigmas[j - 1]

    def v(self, j: int) -> np.ndarray:
        return self.vs[j - 1]

    def closed_form_v(self, j: int) -> np.ndarray:
        """v_j rebuilt from the sigma transcript alone."""
        out = np.zeros(self.dimension)
        for k in range(1, j + 1):
            amp = math.sqrt(max(0.0, 1 - to_float(self.sigmas[k - 1])))
            for i in range(k + 1, j + 1):
                amp *= math.sqrt(to_float(self.sigmas[i - 1]))
            out[k - 1] = amp
        return out


def _residual(target: np.ndarray, projections, coeff, vec) -> float:
    d = len(target)
    acc = np.zeros((d, d))
    for p in projections:
        acc += p.matrix
    acc += to_float(coeff) * np.outer(vec, vec)
    return float(np.linalg.norm(np.diag(target) - acc))


def _run_chain(center_value: Scalar, terms: List[Tuple[Scalar, str]],
               mode: str) -> RecursionState:
    """Shared engine for the single-center runs.

    ``mode`` is "defect" (center 1-lam fed by excess terms, delta < 0) or
    "excess" (center 1+mu fed by defect terms, delta > 0).  Local coordinates:
    center at 0, the j-th consumed term at j.
    """
    n = len(terms)
    dim = n + 1
    exact = is_exact(center_value, *[t for t, _ in terms])
    zero = Fraction(0) if exact else 0.0

    if mode == "defect":
        delta = zero - center_value          # delta_1 = -lam
        target0 = 1 - center_value
    else:
        delta = zero + center_value          # delta_1 = +mu
        target0 = 1 + center_value

    target = np.zeros(dim)
    target[0] = to_float(target0)
    v = np.zeros(dim)
    v[0] = 1.0

    deltas = [delta]
    sigmas = [zero]
    vs = [v.copy()]
    projections: List[RankOneProjection] = []
    steps: List[StepDiag] = []
    sum_oms = 0.0

    for j, (term, label) in enumerate(terms, start=1):
        g = np.zeros(dim)
        g[j] = 1.0
        if mode == "defect":
            # carried (1+delta) v + (1+mu_j) g:  mu-role mu_j, lam-role -delta
            target[j] = to_float(1 + term)
            w, v_new, _, nu, _ = pair_vectors(term, -delta, g, v)
            delta_new = delta + term
            sigma = nu
        else:
            # carried (1+delta) v + (1-lam_j) g:  mu-role delta, lam-role lam_j
            target[j] = to_float(1 - term)
            w, v_new, _, nu, _ = pair_vectors(delta, term, v, g)
            delta_new = delta - term
            sigma = 1 - nu
        sigma_check = sigma_step(delta, delta_new)
        if not _exact_eq(sigma, sigma_check):
            raise AssertionError(
                f"sigma mismatch at step {j}: {sigma} vs {sigma_check}")
        if to_float(1 + delta_new) <= 0:
            raise AssertionError(f"1 + delta must stay positive, got {delta_new}")
        projections.append(RankOneProjection(w, f"P{j}"))
        v = v_new
        delta = delta_new
        deltas.append(delta)
        sigmas.append(sigma)
        vs.append(v.copy())
        sum_oms += 1 - to_float(sigma)
        res = _residual(target, projections, 1 + delta, v)
        steps.append(StepDiag(j, delta, sigma, res, label))

    return RecursionState(
        status="ok", dimension=dim, projections=projections,
        remainder_coeff=1 + delta, remainder_vector=v,
        deltas=deltas, sigmas=sigmas, vs=vs, steps=steps,
        target_diag=target, sum_one_minus_sigma=sum_oms)


def single_defect_run(lam: Scalar, mu_seq, steps: int) -> RecursionState:
    """Single defect 1-lam fed by excess terms with sum(mu) = lam exactly.

    delta_j = sum_{i<j} mu_i - lam increases strictly to 0; the run returns
    after ``steps`` consumed terms (or when a finite sequence is exhausted).
    lam = 0 forces all terms to vanish: the input is already a projection.
    """
    seq = _as_seq(mu_seq)
    if not (0 <= to_float(lam) <= 1):
        raise SpectrumError(f"lambda must lie in [0,1], got {lam}")
    total = seq.total()
    if lam == 0:
        if total != 0:
            raise SumMismatchError(f"lambda = 0 needs zero excess, got sum {total}")
        state = _run_chain(Fraction(0), [], "defect")
        state.status = "already_projection"
        state.projections = [RankOneProjection(np.array([1.0]), "g0")]
        state.remainder_coeff = None
        state.remainder_vector = None
        return state
    if not _exact_eq(total, lam):
        raise SumMismatchError(f"sum(mu) = {total} != lambda = {lam}")
    fl = seq.finite_length
    n = min(steps, fl) if fl is not None else steps
    terms = [(seq.term(j), f"mu[{j}]") for j in range(1, n + 1)]
    if any(to_float(t) <= 0 for t, _ in terms):
        raise SpectrumError("excess terms must be positive")
    return _run_chain(lam, terms, "defect")


def single_excess_run(mu: Scalar, lambda_seq, steps: int) -> RecursionState:
    """Single excess 1+mu fed by defect terms with sum(lam) = mu exactly.

    Terms equal to 1 are stripped first, each emitting one copy of the center
    projection (the center weight drops by 1); terms equal to 0 pass through
    as unit projections on their own coordinates.  The chain then runs on the
    terms strictly inside (0,1), with delta_j decreasing to 0.
    """
    seq = _as_seq(lambda_seq)
    if to_float(mu) <= 0:
        raise SpectrumError(f"mu must be > 0, got {mu}")
    total = seq.total()
    if not _exact_eq(total, mu):
        raise SumMismatchError(f"sum(lambda) = {total} != mu = {mu}")

    fl = seq.finite_length
    active: List[Scalar] = []
    ones = 0
    zero_coords = 0
    j = 0
    scan_cap = fl if fl is not None else steps + 10_000
    while len(active) < steps and j < scan_cap:
        j += 1
        t = seq.term(j)
        tf = to_float(t)
        if not (0 <= tf <= 1):
            raise SpectrumError(f"defect terms must lie in [0,1], got {t}")
        if _exact_eq(t, 1):
            ones += 1
        elif tf == 0:
            zero_coords += 1
        else:
            active.append(t)

    mu_eff = mu - ones
    if to_float(mu_eff) < 0:
        raise SumMismatchError(f"{ones} unit defects exceed the excess mu = {mu}")

    if to_float(mu_eff) == 0:
        state = RecursionState(
            status="already_projection", dimension=1,
            projections=[RankOneProjection(np.array([1.0]), "g0")],
            remainder_coeff=None, remainder_vector=None,
            deltas=[Fraction(0) if is_exact(mu) else 0.0],
            sigmas=[Fraction(0) if is_exact(mu) else 0.0],
            vs=[np.array([1.0])], steps=[], target_diag=np.array([1.0]))
    else:
        terms = [(t, f"lam[{k}]") for k, t in enumerate(active, start=1)]
        state = _run_chain(mu_eff, terms, "excess")

    if ones or zero_coords:
        base_dim = state.dimension
        dim = base_dim + zero_coords

        def pad(vec):
            out = np.zeros(dim)
            out[: len(vec)] = vec
            return out

        pre: List[RankOneProjection] = []
        g0 = np.zeros(dim)
        g0[0] = 1.0
        for _ in range(ones):
            pre.append(RankOneProjection(g0.copy(), "unit-copy@g0"))
        for z in range(zero_coords):
            e = np.zeros(dim)
            e[base_dim + z] = 1.0
            pre.append(RankOneProjection(e, "unit"))
        state.projections = pre + [RankOneProjection(pad(p.vector), p.label)
                                   for p in state.projections]
        state.vs = [pad(v) for v in state.vs]
        if state.remainder_vector is not None:
            state.remainder_vector = pad(state.remainder_vector)
        t = np.ones(dim)
        t[: base_dim] = state.target_diag
        t[0] += ones
        state.target_diag = t
        state.dimension = dim
    return state


# ---------------------------------------------------------------------------
# interleaving
# ---------------------------------------------------------------------------

@dataclass
class InterleavePlan:
    branch: str                       # "defect_first" | "excess_first"
    m: List[int]                      # defect cut indices m_1, m_2, ...
    n: List[int]                      # excess cut indices n_1, n_2, ...
    order: List[Tuple[str, int]]      # consumption order ("e"|"f", index)


def interleave_run(mu_seq, lambda_seq, steps: int) -> Tuple[InterleavePlan, RecursionState]:
    """Interleave excess and defect terms by the sign of the running delta.

    Requires sum(lam) = sum(mu) exactly, no prefix-sum collision within the
    run, and lam_1 != mu_1.  Starts on the defect side when lam_1 > mu_1 and
    on the excess side otherwise (the mirrored branch, with all sign
    conventions flipped).  Sign pattern, positivity of 1+delta, sigma in
    (0,1), and sigma < 1/2 at every return-to-start-side boundary are
    asserted at each computed index.
    """
    if steps < 2:
        raise ValueError("interleave needs at least 2 steps")
    mu = _as_seq(mu_seq)
    lam = _as_seq(lambda_seq)
    t_mu, t_lam = mu.total(), lam.total()
    if not _exact_eq(t_mu, t_lam):
        raise SumMismatchError(f"sum(mu) = {t_mu} != sum(lambda) = {t_lam}")
    mu1, lam1 = mu.term(1), lam.term(1)
    if _exact_eq(mu1, lam1):
        raise PrefixCollisionError("lambda_1 = mu_1: route through the dispatcher",
                                   m=1, n=1)
    branch = "defect_first" if to_float(lam1) > to_float(mu1) else "excess_first"

    dim = steps
    exact = mu.is_exact() and lam.is_exact()
    zero = Fraction(0) if exact else 0.0

    target = np.zeros(dim)
    projections: List[RankOneProjection] = []
    steps_out: List[StepDiag] = []
    deltas: List[Scalar] = []
    sigmas: List[Scalar] = [zero]
    vs: List[np.ndarray] = []
    order: List[Tuple[str, int]] = []
    m_cuts: List[int] = []
    n_cuts: List[int] = []

    ne = nf = 0

    def consume_f():
        nonlocal nf
        nf += 1
        order.append(("f", nf))
        return lam.term(nf)

    def consume_e():
        nonlocal ne
        ne += 1
        order.append(("e", ne))
        return mu.term(ne)

    if branch == "defect_first":
        t = consume_f()
        delta = zero - t
        target[0] = to_float(1 - t)
    else:
        t = consume_e()
        delta = zero + t
        target[0] = to_float(1 + t)
    v = np.zeros(dim)
    v[0] = 1.0
    deltas.append(delta)
    vs.append(v.copy())
    sum_oms = 0.0

    for j in range(2, steps + 1):
        if delta == 0 or (not exact and abs(to_float(delta)) <= 1e-15):
            raise PrefixCollisionError(
                f"prefix sums collide at (m, n) = ({nf}, {ne})", m=nf, n=ne)
        g = np.zeros(dim)
        g[j - 1] = 1.0
        went_positive = went_negative = False
        if to_float(delta) > 0:
            t = consume_f()
            target[j - 1] = to_float(1 - t)
            w, v_new, _, nu, _ = pair_vectors(delta, t, v, g)
            delta_new = delta - t
            sigma = 1 - nu
            if to_float(delta_new) < 0:
                went_negative = True
                m_cuts.append(nf)
        else:
            t = consume_e()
            target[j - 1] = to_float(1 + t)
            w, v_new, _, nu, _ = pair_vectors(t, -delta, g, v)
            delta_new = delta + t
            sigma = nu
            if to_float(delta_new) > 0:
                went_positive = True
                n_cuts.append(ne)
        sigma_check = sigma_step(delta, delta_new)
        if not _exact_eq(sigma, sigma_check):
            raise AssertionError(f"sigma mismatch at step {j}")
        if not (0 < to_float(sigma) < 1):
            raise AssertionError(f"sigma out of (0,1) at step {j}: {sigma}")
        if to_float(1 + delta_new) <= 0:
            raise AssertionError(f"1 + delta <= 0 at step {j}")
        # the sigma < 1/2 certificate attaches to every crossing of delta from
        # negative to positive, in both branches: the bound only uses that
        # delta increases through 0 there
        if went_positive and not to_float(sigma) < 0.5:
            raise AssertionError(
                f"sigma = {to_float(sigma)} >= 1/2 at block boundary j = {j}")
        projections.append(RankOneProjection(w, f"P{j-1}"))
        v = v_new
        delta = delta_new
        deltas.append(delta)
        sigmas.append(sigma)
        vs.append(v.copy())
        sum_oms += 1 - to_float(sigma)
        res = _residual(target, projections, 1 + delta, v)
        steps_out.append(StepDiag(j, delta, sigma, res,
                                  order[-1][0] + str(order[-1][1])))

    _check_interleave_chain(mu, lam, m_cuts, n_cuts, branch)
    plan = InterleavePlan(branch=branch, m=m_cuts, n=n_cuts, order=order)
    state = RecursionState(
        status="ok", dimension=dim, projections=projections,
        remainder_coeff=1 + delta, remainder_vector=v,
        deltas=deltas, sigmas=sigmas, vs=vs, steps=steps_out,
        target_diag=target, sum_one_minus_sigma=sum_oms)
    return plan, state


def _check_interleave_chain(mu: ValueSeq, lam: ValueSeq,
                            m_cuts: List[int], n_cuts: List[int], branch: str) -> None:
    """Assert the chain of prefix-sum inequalities behind the cut sequences."""
    if branch == "excess_first":
        mu, lam = lam, mu
        m_cuts, n_cuts = n_cuts, m_cuts
    prev_m = 1
    for k, nk in enumerate(n_cuts):
        if not to_float(mu.prefix(nk - 1)) < to_float(lam.prefix(prev_m)):
            raise AssertionError(f"interleave chain violated before n cut {nk}")
        if not to_float(lam.prefix(prev_m)) < to_float(mu.prefix(nk)):
            raise AssertionError(f"interleave chain violated at n cut {nk}")
        if k < len(m_cuts):
            mk = m_cuts[k]
            if not to_float(lam.prefix(mk - 1)) < to_float(mu.prefix(nk)):
                raise AssertionError(f"interleave chain violated before m cut {mk}")
            if not to_float(mu.prefix(nk)) < to_float(lam.prefix(mk)):
                raise AssertionError(f"interleave chain violated at m cut {mk}")
            prev_m = mk


# ---------------------------------------------------------------------------
# prefix-sum collisions
# ---------------------------------------------------------------------------

def prefix_collisions(mu_seq, lambda_seq, budget: int) -> List[Tuple[int, int]]:
    """All (m, n) with m, n <= budget and S_lam(m) = S_mu(n), decided exactly.

    Float inputs are rejected: exact equality of prefix sums is not a float
    decision.
    """
    mu = _as_seq(mu_seq)
    lam = _as_seq(lambda_seq)
    if not (mu.is_exact() and lam.is_exact()):
        raise SpectrumError("prefix_collisions needs exact rational sequences")
    out: List[Tuple[int, int]] = []
    max_m = min(budget, lam.finite_length) if lam.finite_length is not None else budget
    max_n = min(budget, mu.finite_length) if mu.finite_length is not None else budget
    if max_m < 1 or max_n < 1:
        return out
    m = n = 1
    s_lam = lam.prefix(1)
    s_mu = mu.prefix(1)
    while m <= max_m and n <= max_n:
        if s_lam == s_mu:
            out.append((m, n))
            m += 1
            n += 1
            if m > max_m or n > max_n:
                break
            s_lam = s_lam + lam.term(m)
            s_mu = s_mu + mu.term(n)
        elif s_lam < s_mu:
            m += 1
            if m > max_m:
                break
            s_lam = s_lam + lam.term(m)
        else:
            n += 1
            if n > max_n:
                break
            s_mu = s_mu + mu.term(n)
    return out


# ---------------------------------------------------------------------------
# the trace-balanced dispatcher
# ---------------------------------------------------------------------------

class _Layout:
    """Global coordinate allocator for the dispatcher output."""

    def __init__(self):
        self.values: List[float] = []
        self.labels: List[str] = []

    def alloc(self, value: Scalar, label: str) -> int:
        self.values.append(to_float(value))
        self.labels.append(label)
        return len(self.values) - 1

    @property
    def dim(self) -> int:
        return len(self.values)


def _basis(coord: int) -> np.ndarray:
    """Basis vector padded to its own coordinate; final padding happens last."""
    v = np.zeros(coord + 1)
    v[coord] = 1.0
    return v


def _finalize(vec: np.ndarray, dim: int) -> np.ndarray:
    out = np.zeros(dim)
    out[: len(vec)] = vec
    return out


class TailShift:
    """View of a tail with its first ``drop`` terms removed."""

    def __init__(self, tail, drop: int):
        self._tail = tail
        self._drop = drop
        self.side = tail.side

    def term(self, j: int) -> Scalar:
        return self._tail.term(j + self._drop)

    def prefix_sum(self, n: int) -> Scalar:
        return self._tail.prefix_sum(n + self._drop) - self._tail.prefix_sum(self._drop)

    def exact_total(self) -> Scalar:
        t = self._tail.exact_total()
        return t if t == math.inf else t - self._tail.prefix_sum(self._drop)

    @property
    def is_infinite(self) -> bool:
        return self._tail.is_infinite

    def is_exact(self) -> bool:
        return self._tail.is_exact()


def _shift_seq(seq: ValueSeq, k: int) -> ValueSeq:
    """The sequence with its first k terms removed."""
    if k <= len(seq.explicit):
        return ValueSeq(seq.explicit[k:], seq.tail)
    drop = k - len(seq.explicit)
    return ValueSeq([], TailShift(seq.tail, drop))


def _prepend_seq(first: Scalar, seq: ValueSeq) -> ValueSeq:
    return ValueSeq([first] + list(seq.explicit), seq.tail)


def _finite_on_coords(values: List[Scalar], coords: List[int]) -> List[RankOneProjection]:
    """Finite decomposition embedded on the given global coordinates."""
    spec = Spectrum(tuple(SpectrumEntry(v, 1) for v in values))
    dec = decompose_finite(spec)
    out = []
    width = max(coords) + 1
    for p in dec.projections:
        vec = np.zeros(width)
        for local, c in enumerate(coords):
            vec[c] = p.vector[local]
        out.append(RankOneProjection(vec, p.label))
    return out


def _with_remainder_on_coords(values: List[Scalar], coords: List[int]):
    """Remainder-form finite decomposition embedded on global coordinates.

    Returns (projections, remainder direction, surplus s' = coeff - 1).
    """
    spec = Spectrum(tuple(SpectrumEntry(v, 1) for v in values))
    dec = decompose_with_remainder(spec)
    width = max(coords) + 1
    out = []
    for p in dec.projections:
        vec = np.zeros(width)
        for local, c in enumerate(coords):
            vec[c] = p.vector[local]
        out.append(RankOneProjection(vec, p.label))
    coeff, rvec = dec.remainder
    rem = np.zeros(width)
    for local, c in enumerate(coords):
        rem[c] = rvec[local]
    return out, rem, coeff - 1


def _embed_state(state: RecursionState, cols: List[np.ndarray]):
    """Map a local-coordinate run through orthonormal global columns."""
    width = max(len(c) for c in cols)
    mat = np.zeros((width, len(cols)))
    for i, c in enumerate(cols):
        mat[: len(c), i] = c
    projs = [RankOneProjection(mat @ p.vector, p.label) for p in state.projections]
    rem = None
    if state.remainder_coeff is not None:
        rem = Remainder(state.remainder_coeff, mat @ state.remainder_vector)
    return projs, rem


def _units_only(spectrum: Spectrum) -> Decomposition:
    parts = split_parts(spectrum)
    u = int(parts.unit_weight)
    projections = []
    for c in range(u):
        e = np.zeros(u)
        e[c] = 1.0
        projections.append(RankOneProjection(e, "unit"))
    return Decomposition(projections=projections, remainder=None, dimension=u,
                         routing="already-projection", target_diag=np.ones(u))


def decompose_trace_balanced(spectrum: Spectrum, steps: int = 50,
                             collision_budget: int = 1000) -> Decomposition:
    """Route a feasible finite-trace spectrum to its construction.

    The integer trace gap is peeled first (largest excess coordinates), then
    eigenvalue-1 coordinates pass through, and the dispatch runs on the rank
    of each side: finite/finite goes to the finite module; one infinite side
    runs the single-center chain after a finite pre-split; two infinite sides
    are routed by the prefix-sum collision set (blocks / blocks+interleave /
    interleave).  The result is a verified prefix; unconsumed tail terms are
    reported in ``tail_note``, never silently dropped.
    """
    verdict = classify(spectrum, "type1")
    if verdict.outcome == "already_projection":
        return _units_only(spectrum)
    if verdict.outcome != FEASIBLE_FINITE:
        raise InfeasibleError(
            f"not trace-balanced: {verdict.outcome} ({verdict.detail})",
            reason=verdict.outcome)
    k = verdict.k

    parts = split_parts(spectrum)
    layout = _Layout()
    projections: List[RankOneProjection] = []
    diag_steps: List[StepDiag] = []

    # eigenvalue-1 coordinates pass straight through
    for _ in range(int(parts.unit_weight)):
        c = layout.alloc(1, "unit")
        projections.append(RankOneProjection(_basis(c), "unit"))

    # explicit excess coordinates, allocated up front so peeling can emit here
    ex_vals: List[Scalar] = []
    ex_coords: List[int] = []
    for mu_val, w in parts.excess:
        for _ in range(int(w)):
            ex_coords.append(layout.alloc(1 + mu_val, "excess"))
            ex_vals.append(mu_val)

    # integer peeling, largest current excess first
    for _ in range(k):
        candidates = [i for i in range(len(ex_vals)) if to_float(ex_vals[i]) > 0]
        if not candidates:
            raise InfeasibleError(
                "trace gap exceeds the explicit excess available for peeling")
        i = max(candidates, key=lambda t: to_float(ex_vals[t]))
        projections.append(RankOneProjection(_basis(ex_coords[i]),
                                             f"peel@{ex_coords[i]}"))
        ex_vals[i] = ex_vals[i] - 1

    # re-sort post-peel entries into classes
    new_excess: List[Tuple[int, Scalar]] = []
    post_defect: List[Tuple[int, Scalar]] = []
    for coord, mu_val in zip(ex_coords, ex_vals):
        mf = to_float(mu_val)
        if mf > 0:
            new_excess.append((coord, mu_val))
        elif mu_val == 0 or abs(mf) <= 1e-15:
            projections.append(RankOneProjection(_basis(coord), "unit"))
        else:
            post_defect.append((coord, -mu_val))

    defect_pairs: List[Tuple[int, Scalar]] = []
    for lam_val, w in parts.defect:
        for _ in range(int(w)):
            defect_pairs.append((layout.alloc(1 - lam_val, "defect"), lam_val))
    defect_pairs.extend(post_defect)

    mu_seq = ValueSeq([m for _, m in new_excess], parts.excess_tail)
    lam_seq = ValueSeq([l for _, l in defect_pairs], parts.defect_tail)
    ex_coord_list = [c for c, _ in new_excess]
    de_coord_list = [c for c, _ in defect_pairs]

    def coord_for(side: str, j: int) -> int:
        """Global coordinate of the j-th term (1-indexed); allocates tail coords."""
        lst = ex_coord_list if side == "e" else de_coord_list
        seq = mu_seq if side == "e" else lam_seq
        while len(lst) < j:
            t = seq.term(len(lst) + 1)
            val = 1 + t if side == "e" else 1 - t
            lst.append(layout.alloc(val, f"{side}-tail"))
        return lst[j - 1]

    n_len = mu_seq.finite_length
    m_len = lam_seq.finite_length

    routing = f"peel({k})+" if k else ""
    remainder: Optional[Remainder] = None
    tail_note = ""
    status = "ok"

    if n_len is not None and m_len is not None:
        routing += "finite"
        if n_len or m_len:
            values = ([1 + mu_seq.term(j) for j in range(1, n_len + 1)]
                      + [1 - lam_seq.term(i) for i in range(1, m_len + 1)])
            coords = ([coord_for("e", j) for j in range(1, n_len + 1)]
                      + [coord_for("f", i) for i in range(1, m_len + 1)])
            projections += _finite_on_coords(values, coords)

    elif n_len is not None:
        # finite excess feeding an infinite defect sequence
        n = n_len
        if n == 0:
            raise InfeasibleError("no excess to balance an infinite defect")
        if n == 1:
            routing += "single-excess"
            center = _basis(coord_for("e", 1))
            state = single_excess_run(mu_seq.term(1), lam_seq, steps)
            cols = [center] + [_basis(coord_for("f", j))
                               for j in range(1, state.dimension)]
            projs, remainder = _embed_state(state, cols)
            projections += projs
            diag_steps += state.steps
        else:
            routing += "presplit+single-excess"
            s_head = mu_seq.prefix(n - 1)
            m = 1
            while not lam_seq.prefix(m) > s_head:
                m += 1
            pre_vals = ([1 + mu_seq.term(j) for j in range(1, n + 1)]
                        + [1 - lam_seq.term(i) for i in range(1, m + 1)])
            pre_coords = ([coord_for("e", j) for j in range(1, n + 1)]
                          + [coord_for("f", i) for i in range(1, m + 1)])
            pre_projs, rem_vec, s_prime = _with_remainder_on_coords(pre_vals, pre_coords)
            projections += pre_projs
            state = single_excess_run(s_prime, _shift_seq(lam_seq, m), steps)
            cols = [rem_vec] + [_basis(coord_for("f", m + j))
                                for j in range(1, state.dimension)]
            projs, remainder = _embed_state(state, cols)
            projections += projs
            diag_steps += state.steps
        tail_note = "defect tail beyond the computed prefix unconsumed"

    elif m_len is not None:
        # finite defect fed by an infinite excess sequence
        M = m_len
        if M == 0:
            raise InfeasibleError(
                "infinite excess with zero trace gap and no defect is impossible")
        if M == 1:
            routing += "single-defect"
            center = _basis(coord_for("f", 1))
            state = single_defect_run(lam_seq.term(1), mu_seq, steps)
            cols = [center] + [_basis(coord_for("e", j))
                               for j in range(1, state.dimension)]
            projs, remainder = _embed_state(state, cols)
            projections += projs
            diag_steps += state.steps
        else:
            s_head = lam_seq.prefix(M - 1)
            n = 1
            while mu_seq.prefix(n) < s_head:
                n += 1
            pre_vals = ([1 + mu_seq.term(j) for j in range(1, n + 1)]
                        + [1 - lam_seq.term(i) for i in range(1, M)])
            pre_coords = ([coord_for("e", j) for j in range(1, n + 1)]
                          + [coord_for("f", i) for i in range(1, M)])
            center = _basis(coord_for("f", M))
            if mu_seq.prefix(n) == s_head:
                # balanced prefix closes exactly; no remainder direction needed
                routing += "blockcut+single-defect"
                projections += _finite_on_coords(pre_vals, pre_coords)
                state = single_defect_run(lam_seq.term(M), _shift_seq(mu_seq, n), steps)
                cols = [center] + [_basis(coord_for("e", n + j))
                                   for j in range(1, state.dimension)]
            else:
                routing += "presplit+single-defect"
                pre_projs, rem_vec, s_prime = _with_remainder_on_coords(
                    pre_vals, pre_coords)
                projections += pre_projs
                state = single_defect_run(
                    lam_seq.term(M),
                    _prepend_seq(s_prime, _shift_seq(mu_seq, n)), steps)
                cols = [center, rem_vec] + [_basis(coord_for("e", n + j - 1))
                                            for j in range(2, state.dimension)]
            projs, remainder = _embed_state(state, cols)
            projections += projs
            diag_steps += state.steps
        tail_note = "excess tail beyond the computed prefix unconsumed"

    else:
        # both sides infinite: route by the collision set
        collisions = prefix_collisions(mu_seq, lam_seq, collision_budget)
        consumed_e = consumed_f = 0
        if collisions:
            blocks_used = 0
            for (m_c, n_c) in collisions:
                block_size = (n_c - consumed_e) + (m_c - consumed_f)
                if consumed_e + consumed_f + block_size > steps:
                    break
                values = ([1 + mu_seq.term(j) for j in range(consumed_e + 1, n_c + 1)]
                          + [1 - lam_seq.term(i) for i in range(consumed_f + 1, m_c + 1)])
                coords = ([coord_for("e", j) for j in range(consumed_e + 1, n_c + 1)]
                          + [coord_for("f", i) for i in range(consumed_f + 1, m_c + 1)])
                projections += _finite_on_coords(values, coords)
                consumed_e, consumed_f = n_c, m_c
                blocks_used += 1
            tail_mu = _shift_seq(mu_seq, consumed_e)
            tail_lam = _shift_seq(lam_seq, consumed_f)
            if prefix_collisions(tail_mu, tail_lam, collision_budget):
                routing += f"blocks({blocks_used})"
                status = "prefix-only"
                tail_note = ("collisions persist past the computed prefix; "
                             "blockwise route continues beyond the budget")
            else:
                routing += f"blocks({blocks_used})+interleave"
                budget_left = max(steps - consumed_e - consumed_f, 2)
                try:
                    plan, state = interleave_run(tail_mu, tail_lam, budget_left)
                except PrefixCollisionError as exc:
                    status = "indeterminate"
                    routing += "(indeterminate)"
                    tail_note = f"routing indeterminate past the budget: {exc}"
                else:
                    cols = [_basis(coord_for(side, (consumed_e if side == "e"
                                                    else consumed_f) + idx))
                            for side, idx in plan.order]
                    projs, remainder = _embed_state(state, cols)
                    projections += projs
                    diag_steps += state.steps
                    tail_note = "interleaved tail beyond the computed prefix unconsumed"
        else:
            routing += "interleave"
            try:
                plan, state = interleave_run(mu_seq, lam_seq, steps)
            except PrefixCollisionError as exc:
                status = "indeterminate"
                routing += "(indeterminate)"
                tail_note = f"routing indeterminate past the budget: {exc}"
            else:
                cols = [_basis(coord_for(side, idx)) for side, idx in plan.order]
                projs, remainder = _embed_state(state, cols)
                projections += projs
                diag_steps += state.steps
                tail_note = "interleaved tail beyond the computed prefix unconsumed"

    dim = layout.dim
    projections = [RankOneProjection(_finalize(p.vector, dim), p.label)
                   for p in projections]
    if remainder is not None:
        remainder = Remainder(remainder.coeff, _finalize(remainder.vector, dim))
    return Decomposition(
        projections=projections, remainder=remainder, dimension=dim,
        steps=diag_steps, routing=routing, status=status, tail_note=tail_note,
        target_diag=np.array(layout.values) if layout.values else np.zeros(0))
