"""Constructions for spectra whose excess trace diverges.

The greedy block accumulation walks the excess sequence and cuts it as soon
as the accumulated excess covers the current defect carry: block k ends at
the smallest index n_k whose running excess sum reaches the carry, absorbs
the integer part of the overshoot into the cut coordinate, and hands the
fractional leftover (1 - beta_k) to block k+1 as its new carry.  Every block
has an exactly integer coefficient sum, so the finite machinery decomposes it
outright, and the unconsumed operator telescopes to the carry plus the
untouched tail.

``dyadic_expansion`` and ``band_partition`` provide the bookkeeping for the
sub-unit part and the band structure of spectra above 1; ``partition_indices``
deals a divergent sequence into any number of classes, each still divergent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Set

import numpy as np

from .core import (
    Decomposition,
    RankOneProjection,
    Scalar,
    Spectrum,
    SpectrumEntry,
    SpectrumError,
    StepDiag,
    ValueSeq,
    is_exact,
    to_float,
)
from .finite import decompose_finite


class DivergenceError(ValueError):
    """The required divergence certificate is missing or contradicted."""


def _as_seq(seq) -> ValueSeq:
    return seq if isinstance(seq, ValueSeq) else ValueSeq(list(seq))


class StrideView(ValueSeq):
    """Arithmetic subsequence offset, offset+stride, ... of a parent sequence.

    Divergence passes to every stride view for the built-in divergent tail
    kinds (harmonic, constant); a finite parent stays finite.
    """

    def __init__(self, parent: ValueSeq, offset: int, stride: int):
        super().__init__([], None)
        if offset < 1 or stride < 1:
            raise ValueError("offset and stride must be >= 1")
        self._parent = parent
        self._offset = offset
        self._stride = stride

    def term(self, j: int) -> Scalar:
        return self._parent.term(self._offset + (j - 1) * self._stride)

    def prefix(self, n: int) -> Scalar:
        return sum((self.term(j) for j in range(1, n + 1)), Fraction(0))

    def total(self) -> Scalar:
        t = self._parent.total()
        if t == math.inf:
            return math.inf
        fl = self.finite_length
        return self.prefix(fl) if fl is not None else t

    @property
    def finite_length(self) -> Optional[int]:
        fl = self._parent.finite_length
        if fl is None:
            return None
        if fl < self._offset:
            return 0
        return (fl - self._offset) // self._stride + 1

    def is_exact(self) -> bool:
        return self._parent.is_exact()


def stride_view(seq, offset: int, stride: int) -> StrideView:
    return StrideView(_as_seq(seq), offset, stride)


def _require_divergent(seq: ValueSeq) -> None:
    if seq.total() != math.inf:
        raise DivergenceError(
            f"excess sum {seq.total()} is finite; divergence not certified")


def _require_bounded(seq: ValueSeq, probe: int = 1000) -> None:
    # built-in tail kinds are bounded by construction; probe the prefix anyway
    sup = max((to_float(seq.term(j)) for j in range(1, probe + 1)), default=0.0)
    if not math.isfinite(sup):
        raise DivergenceError("sup of the excess terms is not finite")


@dataclass
class GreedyBlock:
    index: int                 # k, 1-based
    n_k: int                   # cut position in the excess sequence
    alpha_k: Scalar            # carry actually consumed at the cut
    beta_k: Scalar             # next carry, in (0, 1]
    floor_term: int            # integer part absorbed at the cut coordinate
    k_count: int               # projections this block decomposes into
    carry_in: Scalar           # lambda-role entering the block
    summands: int              # rank of the block operator

    def coefficient_sum(self) -> Scalar:
        # (n_k - n_{k-1} - 1) unit-excess terms are accounted by the caller;
        # kept here for reporting only
        return self.k_count


def greedy_blocks(mu_seq, lam: Scalar, max_blocks: int,
                  term_budget: int = 100_000) -> List[GreedyBlock]:
    """Cut a divergent excess sequence into integer-sum blocks.

    ``lam`` in (0, 1] is the initial defect carry.  Block k runs from
    n_{k-1}+1 to the smallest n_k with accumulated excess >= carry; the cut
    coordinate keeps 1 + alpha_k + floor(mu_{n_k} - alpha_k) and passes
    (1 - beta_k) to the next block.  Raises if divergence is not certified;
    if the term budget runs out the list returned so far is flagged by a
    DivergenceError instead (the caller sees a hard error, not a bad block).
    """
    seq = _as_seq(mu_seq)
    if not (0 < to_float(lam) <= 1):
        raise SpectrumError(f"lambda must lie in (0,1], got {lam}")
    _require_divergent(seq)
    _require_bounded(seq)

    blocks: List[GreedyBlock] = []
    carry = lam
    pos = 0
    for k in range(1, max_blocks + 1):
        acc = Fraction(0) if is_exact(carry) else 0.0
        start = pos + 1
        n_k = None
        while pos - start + 1 < term_budget:
            pos += 1
            term = seq.term(pos)
            if to_float(term) <= 0:
                raise SpectrumError(f"excess term {pos} is not positive")
            acc = acc + term
            if acc >= carry:
                n_k = pos
                break
        if n_k is None:
            raise DivergenceError(
                f"term budget {term_budget} exhausted inside block {k}; "
                f"{len(blocks)} complete blocks were built")
        mu_cut = seq.term(n_k)
        alpha = carry - (acc - mu_cut)
        over = mu_cut - alpha
        floor_term = math.floor(over)
        frac = over - floor_term
        beta = 1 - frac
        summands = (n_k - start + 1) + (1 if not _is_one(carry) else 0)
        k_count = (n_k - start + 1) + 1 + floor_term
        if is_exact(carry, *[seq.term(j) for j in range(start, n_k + 1)]):
            coeff_sum = sum((1 + seq.term(j) for j in range(start, n_k)),
                            Fraction(0))
            coeff_sum += 1 + alpha + floor_term
            if not _is_one(carry):
                coeff_sum += 1 - carry
            if Fraction(coeff_sum).denominator != 1 or int(coeff_sum) != k_count:
                raise AssertionError(
                    f"block {k} coefficient sum {coeff_sum} != k_count {k_count}")
        blocks.append(GreedyBlock(index=k, n_k=n_k, alpha_k=alpha, beta_k=beta,
                                  floor_term=floor_term, k_count=k_count,
                                  carry_in=carry, summands=summands))
        carry = beta
    return blocks


def _is_one(x: Scalar) -> bool:
    if isinstance(x, (int, Fraction)):
        return x == 1
    return abs(x - 1.0) <= 1e-12


def decompose_divergent(mu_seq, lam: Scalar, blocks: int) -> Decomposition:
    """Decompose the rank-one model of a divergent-excess operator blockwise.

    Coordinates: the initial defect direction at 0, the j-th excess direction
    at j.  Each greedy block becomes k_count rank-one projections through the
    finite machinery; after block k the unconsumed operator is exactly
    (1 - beta_k) on the cut coordinate plus the untouched tail.
    """
    seq = _as_seq(mu_seq)
    plan = greedy_blocks(seq, lam, blocks)
    dim = plan[-1].n_k + 1
    projections: List[RankOneProjection] = []
    diag: List[StepDiag] = []
    target = np.zeros(dim)
    target[0] = to_float(1 - lam) if not _is_one(lam) else 0.0
    for j in range(1, dim):
        target[j] = to_float(1 + seq.term(j))

    carry_coord = 0
    prev_n = 0
    for blk in plan:
        coords: List[int] = []
        values: List[Scalar] = []
        if not _is_one(blk.carry_in):
            coords.append(carry_coord)
            values.append(1 - blk.carry_in)
        for j in range(prev_n + 1, blk.n_k):
            coords.append(j)
            values.append(1 + seq.term(j))
        coords.append(blk.n_k)
        values.append(1 + blk.alpha_k + blk.floor_term)
        spec = Spectrum(tuple(SpectrumEntry(v, 1) for v in values))
        dec = decompose_finite(spec)
        if len(dec.projections) != blk.k_count:
            raise AssertionError(
                f"block {blk.index}: {len(dec.projections)} projections, "
                f"expected {blk.k_count}")
        block_target = np.diag([to_float(v) for v in values])
        res = float(np.linalg.norm(block_target - dec.reconstruction()))
        diag.append(StepDiag(blk.index, blk.alpha_k, blk.beta_k, res,
                             f"block n_k={blk.n_k} k={blk.k_count}"))
        for p in dec.projections:
            vec = np.zeros(dim)
            for local, c in enumerate(coords):
                vec[c] = p.vector[local]
            projections.append(RankOneProjection(vec, f"D{blk.index}:{p.label}"))
        carry_coord = blk.n_k
        prev_n = blk.n_k

    last = plan[-1]
    remainder_note = (f"carry (1-beta_{last.index}) = {1 - last.beta_k} on "
                      f"coordinate {last.n_k}; excess tail from term "
                      f"{last.n_k + 1} untouched")
    # the carry is part of the *unconsumed* operator, not a produced term:
    # expose it through the target so reconstruction checks can subtract it
    target_consumed = target.copy()
    target_consumed[last.n_k] -= to_float(1 - last.beta_k)
    return Decomposition(
        projections=projections, remainder=None, dimension=dim,
        steps=diag, routing=f"greedy-blocks({len(plan)})", status="ok",
        tail_note=remainder_note, target_diag=target_consumed)


def blocks_csv_rows(plan: Sequence[GreedyBlock]) -> List[tuple]:
    rows = [("k", "n_k", "alpha_k", "beta_k", "k_count", "summands")]
    for b in plan:
        rows.append((b.index, b.n_k, str(b.alpha_k), str(b.beta_k),
                     b.k_count, b.summands))
    return rows


# ---------------------------------------------------------------------------
# dyadic expansion of the sub-unit part
# ---------------------------------------------------------------------------

@dataclass
class DyadicTerm:
    bit: int                   # weight 2^-bit (bit 0 means weight 1)
    weight: Scalar
    support: Set[int]          # input indices whose expansion sets this bit


def dyadic_expansion(values: Sequence[Scalar], depth: int = 32):
    """Binary-expand values in [0, 1] into shared dyadic layers.

    value = sum over set bits of 2^-i, truncated at ``depth``; the i-th layer
    collects the indices whose bit i is set.  A value of exactly 1 occupies
    the special bit-0 layer (weight 1, a plain unit projection).  Returns
    (terms, residuals) with per-value truncation error <= 2^-depth.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    supports: dict = {}
    residuals: List[Scalar] = []
    for idx, raw in enumerate(values):
        v = Fraction(raw) if not isinstance(raw, Fraction) else raw
        if not (0 <= v <= 1):
            raise SpectrumError(f"value {raw} outside [0,1]")
        if v == 1:
            supports.setdefault(0, set()).add(idx)
            residuals.append(Fraction(0))
            continue
        r = v
        for i in range(1, depth + 1):
            w = Fraction(1, 2 ** i)
            if r >= w:
                supports.setdefault(i, set()).add(idx)
                r -= w
        residuals.append(r)
        if r > Fraction(1, 2 ** depth):
            raise AssertionError("dyadic residual exceeded 2^-depth")
    terms = [DyadicTerm(bit=i, weight=(Fraction(1) if i == 0 else Fraction(1, 2 ** i)),
                        support=s)
             for i, s in sorted(supports.items())]
    return terms, residuals


# ---------------------------------------------------------------------------
# band partition of spectra above 1
# ---------------------------------------------------------------------------

@dataclass
class Band:
    index: int                 # band j; band 1 is [2, inf)
    weight: Scalar             # total multiplicity assigned
    entries: List[int]         # input entry indices


def band_index(value: Scalar) -> int:
    """Band of an eigenvalue > 1: [1+1/j, 1+1/(j-1)) with band 1 = [2, inf)."""
    if to_float(value) <= 1:
        raise SpectrumError(f"band partition needs values > 1, got {value}")
    if to_float(value) >= 2 and value >= 2:
        return 1
    excess = value - 1
    if isinstance(excess, Fraction):
        return int(math.ceil(Fraction(1) / excess))
    return int(math.ceil(1.0 / excess))


def band_partition(spectrum: Spectrum):
    """Assign every entry to its band and test divergence of sum (1/j) w_j.

    Returns (bands, diverges) where ``diverges`` reports whether the banded
    lower bound of the excess trace diverges (prefix plus tail certificate).
    """
    bands: dict = {}
    for i, e in enumerate(spectrum.entries):
        j = band_index(e.value)
        b = bands.setdefault(j, Band(j, Fraction(0), []))
        b.weight = b.weight + e.mult
        b.entries.append(i)
    tail = spectrum.tail_for("excess")
    diverges = False
    if tail is not None and tail.is_infinite:
        diverges = True
    else:
        total = sum((Fraction(1, b.index) * b.weight for b in bands.values()),
                    Fraction(0))
        # finite spectra never diverge; reported for the caller's ledger
        diverges = False if not bands else bool(total == math.inf)
    out = [bands[j] for j in sorted(bands)]
    return out, diverges


# ---------------------------------------------------------------------------
# index partitioning for shared divergence
# ---------------------------------------------------------------------------

@dataclass
class IndexClass:
    label: int
    indices: List[int]
    prefix_sum: Scalar
    certified: bool
    flagged: bool = False


def partition_indices(mu_seq, count: int, budget: Scalar = 1,
                      truncation: int = 10_000) -> List[IndexClass]:
    """Deal a divergent sequence round-robin into ``count`` divergent classes.

    Class r takes indices r+1, r+1+count, ... (1-indexed).  Each class is
    certified by its prefix sum exceeding ``budget`` within the truncation;
    a class that falls short is flagged, not failed (built-in divergent tails
    make every arithmetic subsequence divergent, so the certificate is a
    checked formality).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    seq = _as_seq(mu_seq)
    _require_divergent(seq)
    classes = []
    for r in range(count):
        idxs = []
        s = Fraction(0)
        j = r + 1
        certified = False
        while j <= truncation:
            idxs.append(j)
            s = s + seq.term(j)
            if to_float(s) > to_float(budget):
                certified = True
                break
            j += count
        classes.append(IndexClass(label=r, indices=idxs, prefix_sum=s,
                                  certified=certified, flagged=not certified))
    return classes
