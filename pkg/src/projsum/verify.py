"""Independent verification oracles.

Everything here is recomputed from raw matrices and transcripts; none of the
construction modules are imported, so a bug upstream cannot vouch for itself.
The eigensolver is a cyclic Jacobi sweep (unconditionally convergent for
symmetric matrices, no external solver); the 2x2 oracle recovers the split
parameters by bisecting the determinant condition rather than evaluating the
closed form.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import Spectrum, SpectrumEntry, to_float


class VerificationError(ValueError):
    pass


@dataclass
class ProjectionCheck:
    idempotency: float
    symmetry: float
    rank: int

    def ok(self, tol: float = 1e-10) -> bool:
        return self.idempotency <= tol and self.symmetry <= tol


@dataclass
class VerificationReport:
    projection_checks: List[ProjectionCheck] = field(default_factory=list)
    reconstruction_residual: Optional[float] = None
    trace_target: Optional[float] = None
    trace_sum: Optional[float] = None
    overlap_probes: List[Tuple[int, int, float]] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def trace_gap(self) -> Optional[float]:
        if self.trace_target is None or self.trace_sum is None:
            return None
        return abs(self.trace_target - self.trace_sum)

    def ok(self, construction_tol: float = 1e-10,
           reconstruction_tol: float = 1e-9) -> bool:
        if any(not c.ok(construction_tol) for c in self.projection_checks):
            return False
        if (self.reconstruction_residual is not None
                and self.reconstruction_residual > reconstruction_tol):
            return False
        return True

    def to_json(self) -> dict:
        return {
            "projections": [{"idempotency": c.idempotency, "symmetry": c.symmetry,
                             "rank": c.rank} for c in self.projection_checks],
            "reconstruction_residual": self.reconstruction_residual,
            "trace": {"target": self.trace_target, "sum": self.trace_sum,
                      "gap": self.trace_gap},
            "overlap_probes": [{"q": q, "n": n, "value": v}
                               for q, n, v in self.overlap_probes],
            "notes": self.notes,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def check_projection(p: np.ndarray, tol: float = 1e-10) -> ProjectionCheck:
    """Idempotency and symmetry residuals plus the numerical rank at tol."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise VerificationError(f"expected a square matrix, got shape {p.shape}")
    idem = float(np.linalg.norm(p @ p - p))
    sym = float(np.linalg.norm(p - p.T))
    if idem <= 0.25 * tol and sym <= 0.25 * tol:
        # eigenvalues of a near-idempotent cluster at {0, 1} within 2*idem,
        # so the rank at tol is the rounded trace
        rank = int(round(float(np.trace(p))))
    else:
        evals, _ = _jacobi(0.5 * (p + p.T))
        rank = int(np.sum(np.abs(evals) > tol * max(1.0, float(np.max(np.abs(evals))))))
    return ProjectionCheck(idempotency=idem, symmetry=sym, rank=rank)


def reconstruct_and_compare(projections: Sequence, remainder, target) -> float:
    """Frobenius residual of sum(P_j) (+ remainder) - target."""
    target = np.asarray(target, dtype=float)
    d = target.shape[0]
    if target.shape != (d, d):
        raise VerificationError(f"target must be square, got {target.shape}")
    acc = np.zeros_like(target)
    for p in projections:
        m = p.matrix if hasattr(p, "matrix") else np.asarray(p, dtype=float)
        if m.shape != target.shape:
            raise VerificationError(
                f"projection shape {m.shape} mismatches target {target.shape}")
        acc += m
    if remainder is not None:
        if hasattr(remainder, "matrix"):
            acc += remainder.matrix
        else:
            coeff, vec = remainder
            vec = np.asarray(vec, dtype=float)
            acc += to_float(coeff) * np.outer(vec, vec)
    return float(np.linalg.norm(acc - target))


def overlap_probe(run, q: int, n: int, tol: float = 1e-12) -> float:
    """|(v_n, c_{q+1})| computed two ways: stored vector and sigma product.

    ``run`` is a recursion transcript exposing ``vs`` (v_1..) and ``sigmas``
    (sigma_1..); carrier ordinal q+1 lives on local coordinate q.  The stored
    dot product must agree with sqrt(1-sigma_{q+1}) * prod sqrt(sigma_i) to
    ``tol``.
    """
    if n < 1 or n > len(run.vs):
        raise VerificationError(f"transcript has {len(run.vs)} vectors, asked v_{n}")
    v_n = run.vs[n - 1]
    stored = abs(float(v_n[q])) if q < len(v_n) else 0.0
    if q >= n:
        closed = 0.0
    else:
        closed = math.sqrt(max(0.0, 1 - to_float(run.sigmas[q])))
        for i in range(q + 2, n + 1):
            closed *= math.sqrt(to_float(run.sigmas[i - 1]))
    if abs(stored - closed) > tol:
        raise VerificationError(
            f"overlap mismatch at (q={q}, n={n}): stored {stored}, closed {closed}")
    return closed


def _jacobi(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Rotations are applied as O(d) row/column updates; the sweep stops when
    the off-diagonal norm falls below tol * ||A||.
    """
    a = np.array(a, dtype=float)
    d = a.shape[0]
    v = np.eye(d)
    if d == 1:
        return np.array([a[0, 0]]), v
    norm = max(float(np.linalg.norm(a)), 1e-300)
    for _ in range(max_sweeps):
        off_m = a - np.diag(np.diag(a))
        off = float(np.linalg.norm(off_m))
        if off <= tol * norm:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = 0.5 * math.atan2(2 * apq, a[q, q] - a[p, p])
                c, s = math.cos(theta), math.sin(theta)
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                v_p, v_q = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * v_p - s * v_q
                v[:, q] = s * v_p + c * v_q
    return np.diag(a).copy(), v


def diagonalize_symmetric(matrix: np.ndarray, tol: float = 1e-10):
    """Jacobi eigendecomposition of a symmetric PSD matrix.

    Returns (Spectrum, frame) with eigenvalues clipped at 0 and near-zero
    eigenvalues excluded (the kernel is never represented).  Raises on
    asymmetric or indefinite input.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise VerificationError(f"expected a square matrix, got {m.shape}")
    scale = max(1.0, float(np.linalg.norm(m)))
    if float(np.linalg.norm(m - m.T)) > tol * scale:
        raise VerificationError("matrix is not symmetric at the given tolerance")
    evals, evecs = _jacobi(0.5 * (m + m.T))
    if float(np.min(evals)) < -max(tol, 1e-10) * scale:
        raise VerificationError(
            f"matrix is not positive semidefinite: min eigenvalue {np.min(evals)}")
    order = np.argsort(evals)[::-1]
    entries = []
    cols = []
    for i in order:
        ev = float(evals[i])
        if ev <= tol * scale:
            continue
        entries.append(SpectrumEntry(ev, 1))
        cols.append(evecs[:, i])
    frame = np.column_stack(cols) if cols else np.zeros((m.shape[0], 0))
    return Spectrum(tuple(entries)), frame


def brute_force_2x2(mu, lam, iterations: int = 80):
    """Independent oracle for the 2x2 split parameters.

    Searches for x = (w, f)^2 in [0,1] such that diag(1+mu, 1-lam) - w (x) w
    is PSD of rank <= 1 (equivalently, zero determinant) with trace
    1 + mu - lam, by bisecting the determinant.  Returns (rho, nu).  Accepts
    scalars or numpy arrays (broadcast).
    """
    mu_f = np.asarray(mu, dtype=float)
    lam_f = np.asarray(lam, dtype=float)
    if np.any(mu_f < 0) or np.any(lam_f < 0) or np.any(lam_f > 1):
        raise VerificationError("parameters out of range")

    def det_at(x):
        # determinant of the residual [[1+mu-(1-x), -sqrt(x(1-x))], ...]
        a11 = 1 + mu_f - (1 - x)
        a22 = 1 - lam_f - x
        a12 = -np.sqrt(np.clip(x * (1 - x), 0.0, None))
        return a11 * a22 - a12 * a12

    lo = np.zeros_like(mu_f + lam_f, dtype=float)
    hi = np.ones_like(lo)
    f_lo = det_at(lo)
    # f(0) = mu (1-lam) >= 0, f(1) = -(1+mu) lam <= 0: bisection closes in
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        f_mid = det_at(mid)
        go_right = (f_mid > 0) & (f_lo >= 0)
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
    x = np.where(f_lo == 0, 0.0, 0.5 * (lo + hi))
    rho = x
    trace_res = mu_f - lam_f + 1
    a22 = 1 - lam_f - rho
    with np.errstate(divide="ignore", invalid="ignore"):
        nu = np.where(np.abs(trace_res) > 1e-300, a22 / trace_res, 1.0)
    nu = np.clip(nu, 0.0, 1.0)
    if np.ndim(mu) == 0 and np.ndim(lam) == 0:
        return float(rho), float(nu)
    return rho, nu
