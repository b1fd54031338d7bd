"""Shared fuzz generators (seeded, deterministic)."""

import random
from fractions import Fraction

import numpy as np
import pytest

from projsum.core import Spectrum, SpectrumEntry


def random_rational(rng: random.Random, lo=Fraction(1, 12), hi=Fraction(4),
                    max_den=12) -> Fraction:
    den = rng.randint(1, max_den)
    lo_num = int(lo * den) + 1
    hi_num = int(hi * den)
    if lo_num > hi_num:
        lo_num = hi_num
    return Fraction(rng.randint(lo_num, hi_num), den)


def feasible_finite_spectrum(rng: random.Random, max_rank=12) -> Spectrum:
    """Random rational spectrum with integer trace >= rank (values in (0,4])."""
    while True:
        rank = rng.randint(1, max_rank)
        values = [random_rational(rng, Fraction(1, 12), Fraction(7, 2))
                  for _ in range(rank - 1)]
        partial = sum(values, Fraction(0))
        base = int(partial) + 1
        extra = rng.randint(0, 2)
        target = max(base + extra, rank)
        last = target - partial
        if Fraction(0) < last <= 4:
            values.append(last)
            rng.shuffle(values)
            return Spectrum(tuple(SpectrumEntry(v, 1) for v in values))


def infeasible_spectrum(rng: random.Random, max_rank=12) -> Spectrum:
    """Random rational spectrum rejected by the type I classifier."""
    while True:
        rank = rng.randint(1, max_rank)
        values = [random_rational(rng, Fraction(1, 12), Fraction(7, 2))
                  for _ in range(rank)]
        trace = sum(values, Fraction(0))
        gap = trace - rank
        if gap.denominator != 1 or gap < 0:
            # non-integer trace gap, or defect exceeding excess
            spec = Spectrum(tuple(SpectrumEntry(v, 1) for v in values))
            from projsum.core import classify
            if not classify(spec, "type1").feasible:
                return spec


def balanced_trace_state(rng: random.Random):
    """Balanced (mu, lam, tauE, tauF), every denominator <= 64."""
    from projsum.tracial import TraceState
    while True:
        mu = Fraction(rng.randint(1, 48), rng.choice([2, 4, 8, 16]))
        lam = Fraction(rng.randint(1, 15), 16)
        tauF = Fraction(rng.randint(1, 63), 64)
        tauE = lam * tauF / mu
        if tauE <= 0 or tauE.denominator > 64:
            continue
        if max(mu.denominator, lam.denominator, tauF.denominator) > 64:
            continue
        return TraceState(mu, lam, tauE, tauF)


def rational_projection(rng: random.Random, max_dim=32):
    """Projection matrix with rational diagonal: permuted 2x2 blocks + 0/1."""
    dim = rng.randint(2, max_dim)
    mat = np.zeros((dim, dim))
    diag_exact = []
    i = 0
    while i < dim:
        kind = rng.random()
        if kind < 0.5 and i + 1 < dim:
            c = Fraction(rng.randint(1, 15), 16)
            s = float(c) * (1 - float(c))
            mat[i, i] = float(c)
            mat[i + 1, i + 1] = 1 - float(c)
            off = s ** 0.5
            mat[i, i + 1] = mat[i + 1, i] = off
            diag_exact += [c, 1 - c]
            i += 2
        elif kind < 0.75:
            mat[i, i] = 1.0
            diag_exact.append(Fraction(1))
            i += 1
        else:
            diag_exact.append(Fraction(0))
            i += 1
    perm = list(range(dim))
    rng.shuffle(perm)
    p = mat[np.ix_(perm, perm)]
    diag = [diag_exact[j] for j in perm]
    return p, diag


@pytest.fixture
def rng():
    return random.Random(20260808)
