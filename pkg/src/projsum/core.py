"""Shared data model: spectra, excess/defect splitting, and the feasibility classifier.

A positive diagonalizable operator is described by its spectrum (eigenvalue,
multiplicity) together with an optional symbolic tail for infinite families.
Every eigenvalue above 1 contributes its excess ``value - 1``; every eigenvalue
below 1 contributes its defect ``1 - value``; eigenvalues equal to 1 are
already projection directions.  The classifier decides, from the excess and
defect traces alone, whether the operator is a (strong) sum of projections in
the type I / II / III models:

* type I:  feasible iff the excess trace is infinite, or both traces are
  finite with ``defect <= excess`` and an integer gap;
* type II: feasible iff ``excess >= defect`` (diagonalizable input presumed;
  the condition is only known to be sufficient in that case);
* type III: feasible iff the norm exceeds 1 or the operator is a projection.

Arithmetic is dual-mode: exact :class:`fractions.Fraction` whenever all inputs
are rational (``"p/q"`` strings in the JSON schema parse to exact rationals),
binary floating point otherwise.  Exact equality decisions (integer gaps,
prefix-sum collisions, iteration termination) are only meaningful in exact
mode; float mode replaces them with a documented tolerance of 1e-9.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import numpy as np

Scalar = Union[Fraction, int, float]

INT_GAP_TOL = 1e-9
UNIT_EIGENVALUE_TOL = 1e-12
TAIL_PREFIX_TERMS = 10_000

INF = math.inf


class SpectrumError(ValueError):
    """Ill-formed spectrum or tail declaration."""


class InfeasibleError(ValueError):
    """A construction was requested for a spectrum the classifier rejects."""

    def __init__(self, message: str, reason: str = "infeasible"):
        super().__init__(message)
        self.reason = reason


# ---------------------------------------------------------------------------
# scalar helpers
# ---------------------------------------------------------------------------

def is_exact(*values: Scalar) -> bool:
    return all(isinstance(v, (Fraction, int)) for v in values)


def to_float(x: Scalar) -> float:
    return float(x)


def parse_scalar(x) -> Scalar:
    """Parse a JSON-level number: ``"p/q"`` strings become exact rationals."""
    if isinstance(x, bool):
        raise SpectrumError(f"not a number: {x!r}")
    if isinstance(x, str):
        try:
            return Fraction(x)
        except (ValueError, ZeroDivisionError) as exc:
            raise SpectrumError(f"cannot parse rational {x!r}") from exc
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return x
    if isinstance(x, Fraction):
        return x
    raise SpectrumError(f"not a number: {x!r}")


def scalar_to_json(x: Scalar):
    """Full-precision serialization: rationals as strings, floats as repr."""
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else str(x.numerator)
    if isinstance(x, int):
        return str(x)
    if x == INF:
        return "infinite"
    return x


def exact_floor(x: Scalar) -> int:
    if isinstance(x, (Fraction, int)):
        return math.floor(x)
    return math.floor(x)


# ---------------------------------------------------------------------------
# tails
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailSpec:
    """Finite encoding of an infinite family of excess/defect terms.

    ``kind`` is one of ``geometric`` (first, ratio), ``harmonic`` (scale),
    ``constant`` (value) or ``explicit`` (term function + description).
    ``declared_sum`` is either a finite value or ``math.inf``; the declaration
    is validated against a 10^4-term prefix (symbolically for built-in kinds).
    """

    kind: str
    side: str  # "excess" | "defect"
    declared_sum: Scalar = INF
    first: Optional[Scalar] = None
    ratio: Optional[Scalar] = None
    scale: Optional[Scalar] = None
    value: Optional[Scalar] = None
    description: str = ""
    term_fn: Optional[Callable[[int], Scalar]] = None

    def __post_init__(self):
        if self.side not in ("excess", "defect"):
            raise SpectrumError(f"tail side must be excess/defect, got {self.side!r}")
        if self.kind == "geometric":
            if self.first is None or self.ratio is None:
                raise SpectrumError("geometric tail needs first and ratio")
            if not (0 < to_float(self.ratio) < 1) or to_float(self.first) <= 0:
                raise SpectrumError("geometric tail needs first > 0, ratio in (0,1)")
        elif self.kind == "harmonic":
            if self.scale is None or to_float(self.scale) <= 0:
                raise SpectrumError("harmonic tail needs scale > 0")
        elif self.kind == "constant":
            if self.value is None or to_float(self.value) <= 0:
                raise SpectrumError("constant tail needs value > 0")
        elif self.kind == "explicit":
            if self.term_fn is None:
                raise SpectrumError("explicit tail needs a term function")
        else:
            raise SpectrumError(f"unknown tail kind {self.kind!r}")
        self.validate_declared_sum()

    def term(self, j: int) -> Scalar:
        """j-th tail term, 1-indexed."""
        if j < 1:
            raise IndexError("tail terms are 1-indexed")
        if self.kind == "geometric":
            return self.first * self.ratio ** (j - 1)
        if self.kind == "harmonic":
            return self.scale / j if isinstance(self.scale, float) else Fraction(self.scale, j)
        if self.kind == "constant":
            return self.value
        return self.term_fn(j)

    def prefix_sum(self, n: int) -> Scalar:
        if n <= 0:
            return Fraction(0)
        if self.kind == "geometric":
            return self.first * (1 - self.ratio ** n) / (1 - self.ratio)
        if self.kind == "constant":
            return self.value * n
        return sum(self.term(j) for j in range(1, n + 1))

    def exact_total(self) -> Scalar:
        """Closed-form total for built-in kinds (inf for divergent kinds)."""
        if self.kind == "geometric":
            return self.first / (1 - self.ratio)
        if self.kind in ("harmonic", "constant"):
            return INF
        return self.declared_sum

    @property
    def is_infinite(self) -> bool:
        return self.exact_total() == INF

    def validate_declared_sum(self) -> None:
        total = self.exact_total()
        declared = self.declared_sum
        if declared == INF:
            if total != INF:
                raise SpectrumError(
                    f"{self.kind} tail declared infinite but sums to {total}")
            return
        if total == INF:
            raise SpectrumError(
                f"{self.kind} tail diverges but was declared Finite({declared})")
        # finite declaration: prefix of 10^4 terms must sit within
        # 1e-9 * (1 + declared) of the declared bound
        v = to_float(declared)
        prefix = to_float(self.prefix_sum(TAIL_PREFIX_TERMS))
        if abs(prefix - v) > 1e-9 * (1 + abs(v)):
            raise SpectrumError(
                f"declared sum {declared} not certified by prefix ({prefix})")

    def is_exact(self) -> bool:
        params = [p for p in (self.first, self.ratio, self.scale, self.value) if p is not None]
        return is_exact(*params) if params else self.kind == "explicit"

    def to_json(self) -> dict:
        out = {"kind": self.kind, "side": self.side,
               "sum": scalar_to_json(self.declared_sum)}
        for name in ("first", "ratio", "scale", "value"):
            v = getattr(self, name)
            if v is not None:
                out[name] = scalar_to_json(v)
        if self.description:
            out["description"] = self.description
        return out


def tail_from_json(obj: dict) -> TailSpec:
    kind = obj.get("kind")
    side = obj.get("side", "excess")
    declared = obj.get("sum", "infinite")
    declared_sum = INF if declared in ("infinite", "inf", None) else parse_scalar(declared)
    kwargs = {}
    for name in ("first", "ratio", "scale", "value"):
        if name in obj:
            kwargs[name] = parse_scalar(obj[name])
    return TailSpec(kind=kind, side=side, declared_sum=declared_sum, **kwargs)


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumEntry:
    """One eigenvalue with its multiplicity (type I) or trace weight (type II)."""

    value: Scalar
    mult: Scalar = 1

    def __post_init__(self):
        if to_float(self.value) <= 0:
            raise SpectrumError(f"eigenvalue must be > 0, got {self.value}")
        if to_float(self.mult) <= 0:
            raise SpectrumError(f"multiplicity must be > 0, got {self.mult}")


@dataclass(frozen=True)
class Spectrum:
    """Finite list of eigenvalue entries plus optional per-side tails."""

    entries: tuple
    tails: tuple = ()
    mode: str = "type1"

    def __post_init__(self):
        entries = tuple(e if isinstance(e, SpectrumEntry) else SpectrumEntry(*e)
                        for e in self.entries)
        object.__setattr__(self, "entries", entries)
        tails = self.tails
        if tails is None:
            tails = ()
        elif isinstance(tails, TailSpec):
            tails = (tails,)
        else:
            tails = tuple(tails)
        object.__setattr__(self, "tails", tails)
        if self.mode not in ("type1", "type2"):
            raise SpectrumError(f"mode must be type1/type2, got {self.mode!r}")
        if self.mode == "type1":
            for e in entries:
                m = e.mult
                if isinstance(m, float) or (isinstance(m, Fraction) and m.denominator != 1):
                    raise SpectrumError(
                        f"type1 multiplicities must be integers, got {m}")
        sides = [t.side for t in tails]
        if len(sides) != len(set(sides)):
            raise SpectrumError("at most one tail per side")
        for t in tails:
            if t.side == "defect":
                # defect tail terms are defects 1 - eigenvalue, so must stay in (0,1)
                if to_float(t.term(1)) >= 1:
                    raise SpectrumError("defect tail terms must lie in (0,1)")

    @property
    def tail(self) -> Optional[TailSpec]:
        return self.tails[0] if len(self.tails) == 1 else None

    def tail_for(self, side: str) -> Optional[TailSpec]:
        for t in self.tails:
            if t.side == side:
                return t
        return None

    def is_exact(self) -> bool:
        ok = all(is_exact(e.value, e.mult) for e in self.entries)
        return ok and all(t.is_exact() for t in self.tails)

    def is_finite(self) -> bool:
        return not self.tails

    def normalized(self) -> "Spectrum":
        """Merge duplicate eigenvalues, keeping first-occurrence order."""
        seen: dict = {}
        order = []
        for e in self.entries:
            key = e.value
            if key in seen:
                seen[key] = seen[key] + e.mult
            else:
                seen[key] = e.mult
                order.append(key)
        merged = tuple(SpectrumEntry(v, seen[v]) for v in order)
        return Spectrum(merged, self.tails, self.mode)

    def trace(self) -> Scalar:
        # any tail contributes infinitely many eigenvalues approaching 1
        if self.tails:
            return INF
        return sum((e.value * e.mult for e in self.entries), Fraction(0))

    def max_value(self) -> Scalar:
        best = max((e.value for e in self.entries), default=Fraction(0))
        for t in self.tails:
            if t.side == "excess":
                best = max(best, 1 + t.term(1))
        return best

    def is_projection_spectrum(self) -> bool:
        return not self.tails and all(_is_unit(e.value) for e in self.entries)

    def total_multiplicity(self) -> Scalar:
        base = sum((Fraction(e.mult) if not isinstance(e.mult, float) else e.mult
                    for e in self.entries), Fraction(0))
        return INF if self.tails else base

    def to_json(self) -> dict:
        out = {"mode": self.mode,
               "entries": [{"value": scalar_to_json(e.value),
                            "mult": scalar_to_json(e.mult)} for e in self.entries]}
        if self.tails:
            tails = [t.to_json() for t in self.tails]
            out["tail"] = tails[0] if len(tails) == 1 else tails
        return out


def _is_unit(value: Scalar) -> bool:
    if isinstance(value, (Fraction, int)):
        return value == 1
    return abs(value - 1.0) <= UNIT_EIGENVALUE_TOL


def spectrum_from_json(obj) -> Spectrum:
    if isinstance(obj, str):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or "entries" not in obj:
        raise SpectrumError("spectrum JSON must be an object with 'entries'")
    entries = []
    for i, e in enumerate(obj["entries"]):
        try:
            entries.append(SpectrumEntry(parse_scalar(e["value"]),
                                         parse_scalar(e.get("mult", 1))))
        except (KeyError, TypeError) as exc:
            raise SpectrumError(f"bad entry at index {i}: {e!r}") from exc
    tails_obj = obj.get("tail")
    if tails_obj is None:
        tails = ()
    elif isinstance(tails_obj, dict):
        tails = (tail_from_json(tails_obj),)
    else:
        tails = tuple(tail_from_json(t) for t in tails_obj)
    return Spectrum(tuple(entries), tails, obj.get("mode", "type1"))


# ---------------------------------------------------------------------------
# excess / defect split
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Parts:
    """The split of a spectrum into excess, defect and unit pieces.

    ``excess`` holds pairs (mu, weight) with mu = value - 1 > 0, ``defect``
    pairs (lam, weight) with lam = 1 - value in (0, 1]; ``unit_weight`` is the
    total multiplicity at eigenvalue 1.  Traces include tail contributions and
    may be infinite.
    """

    excess: tuple
    defect: tuple
    unit_weight: Scalar
    excess_trace: Scalar
    defect_trace: Scalar
    excess_tail: Optional[TailSpec] = None
    defect_tail: Optional[TailSpec] = None

    def reassemble(self, mode: str = "type1") -> Spectrum:
        entries = []
        for mu, w in self.excess:
            entries.append(SpectrumEntry(1 + mu, w))
        for lam, w in self.defect:
            entries.append(SpectrumEntry(1 - lam, w))
        if to_float(self.unit_weight) > 0:
            entries.append(SpectrumEntry(Fraction(1), self.unit_weight))
        tails = tuple(t for t in (self.excess_tail, self.defect_tail) if t is not None)
        return Spectrum(tuple(entries), tails, mode)


def split_parts(spectrum: Spectrum) -> Parts:
    excess, defect = [], []
    unit = Fraction(0)
    for e in spectrum.entries:
        if _is_unit(e.value):
            unit += Fraction(e.mult) if not isinstance(e.mult, float) else e.mult
        elif to_float(e.value) > 1:
            excess.append((e.value - 1, e.mult))
        else:
            defect.append((1 - e.value, e.mult))
    ex_tail = spectrum.tail_for("excess")
    de_tail = spectrum.tail_for("defect")
    ex_trace = sum((m * w for m, w in excess), Fraction(0))
    de_trace = sum((l * w for l, w in defect), Fraction(0))
    if ex_tail is not None:
        t = ex_tail.exact_total()
        ex_trace = INF if t == INF else ex_trace + t
    if de_tail is not None:
        t = de_tail.exact_total()
        de_trace = INF if t == INF else de_trace + t
    return Parts(tuple(excess), tuple(defect), unit, ex_trace, de_trace,
                 ex_tail, de_tail)


# ---------------------------------------------------------------------------
# classifier
# ---------------------------------------------------------------------------

ALREADY_PROJECTION = "already_projection"
FEASIBLE_FINITE = "feasible_finite"
FEASIBLE_INFINITE_EXCESS = "feasible_infinite_excess"
FEASIBLE_TYPE_II = "feasible_type2"
FEASIBLE_TYPE_III = "feasible_type3"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class FeasibilityVerdict:
    outcome: str
    k: Optional[int] = None
    reason: Optional[str] = None
    detail: str = ""
    gap: Optional[float] = None

    @property
    def feasible(self) -> bool:
        return self.outcome != INFEASIBLE

    def to_json(self) -> dict:
        out = {"outcome": self.outcome}
        if self.k is not None:
            out["k"] = self.k
        if self.reason is not None:
            out["reason"] = self.reason
        if self.detail:
            out["detail"] = self.detail
        if self.gap is not None:
            out["gap"] = self.gap
        return out


def classify(spectrum: Spectrum, factor: str = None) -> FeasibilityVerdict:
    """Decide whether the operator is a (strongly converging) sum of projections.

    ``factor`` defaults to the spectrum's own mode.  Type III uses only the
    norm and the projection flag.  In type I float mode, a trace gap within
    1e-9 of an integer is rounded and the gap reported.
    """
    if factor is None:
        factor = spectrum.mode
    if factor not in ("type1", "type2", "type3"):
        raise SpectrumError(f"unknown factor type {factor!r}")

    if spectrum.is_projection_spectrum():
        return FeasibilityVerdict(ALREADY_PROJECTION, detail="all eigenvalues equal 1")

    if factor == "type3":
        if to_float(spectrum.max_value()) > 1:
            return FeasibilityVerdict(FEASIBLE_TYPE_III, detail="norm exceeds 1")
        return FeasibilityVerdict(
            INFEASIBLE, reason="norm_at_most_one",
            detail="‖A‖ ≤ 1 and not a projection")

    parts = split_parts(spectrum)
    ex, de = parts.excess_trace, parts.defect_trace

    if factor == "type2":
        if ex == INF or (de != INF and ex >= de):
            return FeasibilityVerdict(
                FEASIBLE_TYPE_II,
                detail="excess trace >= defect trace (diagonalizable input presumed)")
        return FeasibilityVerdict(
            INFEASIBLE, reason="defect_exceeds_excess",
            detail=f"defect trace {de} exceeds excess trace {ex}")

    # type I
    if ex == INF:
        return FeasibilityVerdict(FEASIBLE_INFINITE_EXCESS,
                                  detail="excess trace diverges")
    if de == INF:
        return FeasibilityVerdict(
            INFEASIBLE, reason="infinite_defect_finite_excess",
            detail="defect trace infinite but excess trace finite")
    gap = ex - de
    ok, k, err = _within_integer(gap)
    if (ok and k < 0) or (not ok and to_float(gap) < 0):
        return FeasibilityVerdict(
            INFEASIBLE, reason="defect_exceeds_excess",
            detail=f"defect trace {de} exceeds excess trace {ex}")
    if not ok:
        return FeasibilityVerdict(
            INFEASIBLE, reason="non_integer_gap",
            detail=f"trace gap {gap} is not a nonnegative integer",
            gap=to_float(gap))
    return FeasibilityVerdict(FEASIBLE_FINITE, k=k,
                              gap=(err if err else None),
                              detail=f"trace gap {k}")


def _within_integer(x: Scalar):
    """(is_integer, rounded, float error).  Exact for rationals."""
    if isinstance(x, (int, Fraction)):
        xf = Fraction(x)
        if xf.denominator == 1:
            return True, int(xf), 0.0
        return False, None, None
    r = round(x)
    if abs(x - r) <= INT_GAP_TOL:
        return True, int(r), abs(x - r)
    return False, None, None


# ---------------------------------------------------------------------------
# projections and decompositions (shared output containers)
# ---------------------------------------------------------------------------

@dataclass
class RankOneProjection:
    """Rank-one projection v (x) v, stored as its unit vector."""

    vector: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=float)

    @property
    def matrix(self) -> np.ndarray:
        return np.outer(self.vector, self.vector)

    @property
    def rank(self) -> int:
        return 1

    def embedded(self, dim: int) -> np.ndarray:
        v = np.zeros(dim)
        v[: len(self.vector)] = self.vector
        return v


@dataclass
class Projection:
    """Projection of arbitrary rank, stored as an orthonormal frame (columns)."""

    frame: np.ndarray
    label: str = ""

    def __post_init__(self):
        f = np.asarray(self.frame, dtype=float)
        if f.ndim == 1:
            f = f[:, None]
        self.frame = f

    @property
    def matrix(self) -> np.ndarray:
        return self.frame @ self.frame.T

    @property
    def rank(self) -> int:
        return self.frame.shape[1]


AnyProjection = Union[RankOneProjection, Projection]


@dataclass
class Remainder:
    """Weighted rank-one (or frame) remainder term ``coeff * v (x) v``."""

    coeff: Scalar
    vector: np.ndarray

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=float)

    @property
    def matrix(self) -> np.ndarray:
        if self.vector.ndim == 1:
            return to_float(self.coeff) * np.outer(self.vector, self.vector)
        return to_float(self.coeff) * self.vector @ self.vector.T


@dataclass
class StepDiag:
    """Per-step diagnostics for the iterative constructions."""

    j: int
    delta: Scalar
    sigma: Optional[Scalar]
    residual: float
    consumed: str = ""


@dataclass
class Decomposition:
    """Ordered projections plus remainder and per-step diagnostics."""

    projections: list
    remainder: Optional[Remainder]
    dimension: int
    steps: list = field(default_factory=list)
    routing: str = ""
    status: str = "ok"
    tail_note: str = ""
    target_diag: Optional[np.ndarray] = None

    def reconstruction(self) -> np.ndarray:
        out = np.zeros((self.dimension, self.dimension))
        for p in self.projections:
            m = p.matrix
            d = m.shape[0]
            out[:d, :d] += m
        if self.remainder is not None:
            m = self.remainder.matrix
            d = m.shape[0]
            out[:d, :d] += m
        return out

    def steps_csv_rows(self) -> list:
        rows = [("j", "delta", "sigma", "residual", "consumed")]
        for s in self.steps:
            rows.append((s.j, scalar_to_json(s.delta),
                         scalar_to_json(s.sigma) if s.sigma is not None else "",
                         repr(s.residual), s.consumed))
        return rows


# ---------------------------------------------------------------------------
# sequence view over one side of a spectrum (explicit prefix + tail)
# ---------------------------------------------------------------------------

class ValueSeq:
    """1-indexed sequence of positive terms: explicit prefix plus optional tail.

    Used for the excess (mu_j) and defect (lambda_i) sequences of the series
    and divergent constructions.  Multiplicities expand to repeated terms.
    """

    def __init__(self, explicit: Sequence[Scalar], tail: Optional[TailSpec] = None):
        self.explicit = list(explicit)
        self.tail = tail

    @classmethod
    def from_parts(cls, parts: Parts, side: str) -> "ValueSeq":
        pairs = parts.excess if side == "excess" else parts.defect
        tail = parts.excess_tail if side == "excess" else parts.defect_tail
        explicit = []
        for value, weight in pairs:
            if isinstance(weight, float) or (isinstance(weight, Fraction)
                                             and weight.denominator != 1):
                raise SpectrumError(
                    "sequence expansion needs integer multiplicities")
            explicit.extend([value] * int(weight))
        return cls(explicit, tail)

    def term(self, j: int) -> Scalar:
        if j < 1:
            raise IndexError("terms are 1-indexed")
        if j <= len(self.explicit):
            return self.explicit[j - 1]
        if self.tail is None:
            raise IndexError(f"sequence has only {len(self.explicit)} terms")
        return self.tail.term(j - len(self.explicit))

    def prefix(self, n: int) -> Scalar:
        n_exp = min(n, len(self.explicit))
        s = sum(self.explicit[:n_exp], Fraction(0))
        if n > n_exp:
            if self.tail is None:
                raise IndexError(f"sequence has only {len(self.explicit)} terms")
            s = s + self.tail.prefix_sum(n - len(self.explicit))
        return s

    def total(self) -> Scalar:
        s = sum(self.explicit, Fraction(0))
        if self.tail is not None:
            t = self.tail.exact_total()
            return INF if t == INF else s + t
        return s

    @property
    def finite_length(self) -> Optional[int]:
        return None if self.tail is not None else len(self.explicit)

    def is_exact(self) -> bool:
        ok = is_exact(*self.explicit) if self.explicit else True
        return ok and (self.tail is None or self.tail.is_exact())

    def terms(self, n: int) -> list:
        return [self.term(j) for j in range(1, n + 1)]
