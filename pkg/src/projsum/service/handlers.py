"""Shared request handlers behind both the HTTP routes and the CLI.

Each handler takes a validated request model and returns a response model;
domain outcomes (feasible / infeasible) are encoded in the response status,
while malformed inputs raise ``projsum.core.SpectrumError`` for the transport
layer to translate (HTTP 422, CLI exit 1).
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import List, Optional

import numpy as np

from .. import divergent as divergent_mod
from .. import frames as frames_mod
from .. import series as series_mod
from .. import tracial as tracial_mod
from .. import twoproj as twoproj_mod
from .. import verify as verify_mod
from ..core import (
    InfeasibleError,
    Projection,
    RankOneProjection,
    Remainder,
    Spectrum,
    SpectrumError,
    ValueSeq,
    classify,
    scalar_to_json,
    spectrum_from_json,
    split_parts,
    to_float,
)
from ..finite import decompose_finite
from . import models as m


def _parse_spectrum(model: m.SpectrumModel) -> Spectrum:
    return spectrum_from_json(model.to_plain())


def _coerce_float(spectrum: Spectrum) -> Spectrum:
    """Binary floating-point copy of a spectrum (the --mode float path)."""
    from ..core import SpectrumEntry, TailSpec

    entries = tuple(SpectrumEntry(float(e.value), e.mult)
                    for e in spectrum.entries)
    tails = []
    for t in spectrum.tails:
        kwargs = {name: (float(v) if v is not None else None)
                  for name, v in (("first", t.first), ("ratio", t.ratio),
                                  ("scale", t.scale), ("value", t.value))}
        declared = t.declared_sum if t.declared_sum == math.inf else float(t.declared_sum)
        tails.append(TailSpec(t.kind, t.side, declared_sum=declared, **kwargs))
    return Spectrum(entries, tuple(tails), spectrum.mode)


def _verdict_model(v) -> m.VerdictModel:
    return m.VerdictModel(outcome=v.outcome, k=v.k, reason=v.reason,
                          detail=v.detail, gap=v.gap)


def classify_handler(req: m.ClassifyRequest) -> m.ClassifyResponse:
    spectrum = _parse_spectrum(req.spectrum)
    verdict = classify(spectrum, req.factor)
    status = "ok" if verdict.feasible else "infeasible"
    return m.ClassifyResponse(verdict=_verdict_model(verdict), status=status)


def _projection_models(projections) -> List[m.ProjectionModel]:
    out = []
    for p in projections:
        if isinstance(p, RankOneProjection) or (hasattr(p, "vector")):
            out.append(m.ProjectionModel(vector=[float(x) for x in p.vector],
                                         label=getattr(p, "label", "")))
        else:
            cols = [[float(x) for x in p.frame[:, i]]
                    for i in range(p.frame.shape[1])]
            out.append(m.ProjectionModel(frame=cols, label=getattr(p, "label", "")))
    return out


def _report(projections, remainder, target: Optional[np.ndarray],
            enforce_tol: Optional[float] = None) -> m.ReportModel:
    """Independent re-verification; raises when ``enforce_tol`` is violated."""
    report = verify_mod.VerificationReport()
    for p in projections:
        report.projection_checks.append(verify_mod.check_projection(p.matrix))
    if target is not None:
        t = np.diag(target)
        report.reconstruction_residual = verify_mod.reconstruct_and_compare(
            projections, remainder, t)
        report.trace_target = float(np.sum(target))
        total = sum(float(np.trace(p.matrix)) for p in projections)
        if remainder is not None:
            total += float(np.trace(remainder.matrix))
        report.trace_sum = total
    if enforce_tol is not None and not report.ok(
            construction_tol=1e-10, reconstruction_tol=max(enforce_tol, 1e-9)):
        raise verify_mod.VerificationError(
            "internal verification failed: "
            f"reconstruction {report.reconstruction_residual}, worst projection "
            f"{max((c.idempotency for c in report.projection_checks), default=0.0)}")
    return m.ReportModel(**report.to_json())


def _seq_total_is_infinite(seq: ValueSeq) -> bool:
    return seq.total() == math.inf


def decompose_handler(req: m.DecomposeRequest) -> m.DecomposeResponse:
    spectrum = _parse_spectrum(req.spectrum)
    if req.mode == "float":
        spectrum = _coerce_float(spectrum)
    factor = req.factor or spectrum.mode
    verdict = classify(spectrum, factor)
    if not verdict.feasible:
        return m.DecomposeResponse(status="infeasible",
                                   verdict=_verdict_model(verdict))

    if factor == "type3":
        raise SpectrumError(
            "type III feasibility has no finite matrix model to decompose")

    if factor == "type2":
        return _decompose_type2(spectrum, verdict, req)

    if verdict.outcome == "feasible_infinite_excess":
        return _decompose_divergent(spectrum, verdict, req)

    if spectrum.is_finite():
        dec = decompose_finite(spectrum)
        target = np.array([to_float(v) for v in _expanded_values(spectrum)])
        projs = dec.projections
        report = _report(projs, None, target, enforce_tol=req.tol)
        return m.DecomposeResponse(
            status="ok", verdict=_verdict_model(verdict), routing="finite",
            dimension=dec.dimension, projections=_projection_models(projs),
            target_diag=[float(x) for x in target], report=report,
            diagnostics=_diag_rows(dec.steps))

    dec = series_mod.decompose_trace_balanced(
        spectrum, steps=req.steps, collision_budget=req.collision_budget)
    remainder = dec.remainder
    report = _report(dec.projections, remainder, dec.target_diag,
                     enforce_tol=req.tol)
    return m.DecomposeResponse(
        status=dec.status, verdict=_verdict_model(verdict), routing=dec.routing,
        dimension=dec.dimension, projections=_projection_models(dec.projections),
        remainder=_remainder_model(remainder),
        target_diag=[float(x) for x in dec.target_diag],
        tail_note=dec.tail_note, report=report,
        diagnostics=_diag_rows(dec.steps))


def _expanded_values(spectrum: Spectrum):
    vals = []
    for e in spectrum.entries:
        vals.extend([e.value] * int(e.mult))
    return vals


def _remainder_model(remainder: Optional[Remainder]) -> Optional[m.RemainderModel]:
    if remainder is None:
        return None
    return m.RemainderModel(coeff=scalar_to_json(remainder.coeff),
                            vector=[float(x) for x in remainder.vector])


def _diag_rows(steps) -> List[dict]:
    rows = []
    for s in steps:
        rows.append({"j": s.j, "delta": scalar_to_json(s.delta),
                     "sigma": scalar_to_json(s.sigma) if s.sigma is not None else None,
                     "residual": s.residual, "consumed": s.consumed})
    return rows


def _decompose_divergent(spectrum: Spectrum, verdict, req) -> m.DecomposeResponse:
    """Divergent excess: pair each defect with a divergent slice of the excess."""
    parts = split_parts(spectrum)
    mu_seq = ValueSeq.from_parts(parts, "excess")
    defects = []
    for lam, w in parts.defect:
        defects.extend([lam] * int(w))
    if parts.defect_tail is not None:
        raise SpectrumError(
            "divergent route needs finitely many defect entries at desk scale")

    projections: List[RankOneProjection] = []
    diagnostics: List[dict] = []
    target_vals: List[float] = []
    offset = 0

    count = max(1, len(defects))
    slices = ([mu_seq] if count == 1 else
              [divergent_mod.stride_view(mu_seq, r + 1, count) for r in range(count)])

    for _ in range(int(parts.unit_weight)):
        target_vals.append(1.0)
        vec_index = len(target_vals) - 1
        v = np.zeros(vec_index + 1)
        v[vec_index] = 1.0
        projections.append(RankOneProjection(v, "unit"))

    for r, sl in enumerate(slices):
        lam = defects[r] if r < len(defects) else Fraction(1)
        dec = divergent_mod.decompose_divergent(sl, lam, req.blocks)
        base = len(target_vals)
        target_vals.extend(dec.target_diag.tolist())
        for p in dec.projections:
            v = np.zeros(base + dec.dimension)
            v[base: base + dec.dimension] = p.vector
            projections.append(RankOneProjection(v, f"s{r}:{p.label}"))
        for s in dec.steps:
            diagnostics.append({"j": s.j, "delta": scalar_to_json(s.delta),
                                "sigma": scalar_to_json(s.sigma),
                                "residual": s.residual,
                                "consumed": f"slice{r}:{s.consumed}"})

    dim = len(target_vals)
    projections = [RankOneProjection(_pad(p.vector, dim), p.label)
                   for p in projections]
    target = np.array(target_vals)
    report = _report(projections, None, target, enforce_tol=req.tol)
    return m.DecomposeResponse(
        status="ok", verdict=_verdict_model(verdict),
        routing=f"greedy-divergent({len(slices)} slices x {req.blocks} blocks)",
        dimension=dim, projections=_projection_models(projections),
        target_diag=[float(x) for x in target],
        tail_note="excess tail beyond the greedy blocks unconsumed",
        report=report, diagnostics=diagnostics)


def _pad(vec: np.ndarray, dim: int) -> np.ndarray:
    out = np.zeros(dim)
    out[: len(vec)] = vec
    return out


def _decompose_type2(spectrum: Spectrum, verdict, req) -> m.DecomposeResponse:
    if spectrum.tails:
        raise SpectrumError("the tracial route needs finitely many terms")
    terms = tuple((e.value, e.mult) for e in spectrum.entries)
    tspec = tracial_mod.TracialSpectrum(terms, normalized=False)
    realized = tracial_mod.realize_matrix_model(tspec, req.denominator)
    report = _report(realized.projections, None, realized.target_diag,
                     enforce_tol=req.tol)
    return m.DecomposeResponse(
        status="ok", verdict=_verdict_model(verdict),
        routing=f"tracial(N={realized.denominator})",
        dimension=realized.dimension,
        projections=_projection_models(realized.projections),
        target_diag=[float(x) for x in realized.target_diag],
        report=report,
        diagnostics=[{"j": i, "delta": None, "sigma": None, "residual": None,
                      "consumed": line}
                     for i, line in enumerate(realized.transcript)])


def two_proj_handler(req: m.TwoProjRequest) -> m.TwoProjResponse:
    spectrum = _parse_spectrum(req.spectrum)
    try:
        pairing = twoproj_mod.symmetry_pairing(spectrum)
    except twoproj_mod.PairingError as exc:
        return m.TwoProjResponse(status="infeasible", reason=str(exc),
                                 witness=scalar_to_json(exc.witness))
    p, q = twoproj_mod.build_two_projections(spectrum, pairing)
    from ..finite import _expand
    target = np.array([to_float(v) for v in _expand(spectrum)])
    report = _report([p, q], None, target)
    pf = [[float(x) for x in p.frame[:, i]] for i in range(p.rank)]
    qf = [[float(x) for x in q.frame[:, i]] for i in range(q.rank)]
    return m.TwoProjResponse(status="ok", p_frame=pf, q_frame=qf, report=report)


def frames_handler(req: m.FramesRequest) -> m.FramesResponse:
    spectrum = _parse_spectrum(req.spectrum)
    try:
        dec = decompose_finite(spectrum)
    except InfeasibleError as exc:
        return m.FramesResponse(status="infeasible", reason=str(exc))
    target = np.diag([to_float(v) for v in _expanded_values(spectrum)])
    cert = frames_mod.decomposition_to_isometry(target, dec.projections)
    back = frames_mod.isometry_to_decomposition(cert.V, cert.partition, target)
    roundtrip = float(np.linalg.norm(sum(back) - target))
    vav = cert.V @ target @ cert.V.T
    return m.FramesResponse(
        status="ok", block_dimension=cert.block_dimension,
        range_residual=cert.range_residual,
        compression_residual=cert.compression_residual,
        roundtrip_residual=roundtrip,
        compressed_diagonal=[float(x) for x in np.diag(vav)])


def index_handler(req: m.IndexRequest) -> m.IndexResponse:
    from ..core import parse_scalar
    values = [parse_scalar(x) for x in req.c]
    a, b, index, is_int = frames_mod.kadison_index(values)
    return m.IndexResponse(a=scalar_to_json(a), b=scalar_to_json(b),
                           index=scalar_to_json(index), is_integer=is_int)


def simulate_handler(req: m.SimulateRequest) -> m.SimulateResponse:
    from ..core import parse_scalar, tail_from_json

    def seq_from(values, tail_model, side):
        explicit = [parse_scalar(x) for x in (values or [])]
        tail = None
        if tail_model is not None:
            plain = tail_model.model_dump(exclude_none=True)
            plain["side"] = side
            tail = tail_from_json(plain)
        return ValueSeq(explicit, tail)

    if req.kind == "trace-iterate":
        if not req.state or len(req.state) != 4:
            raise SpectrumError("trace-iterate needs state = [mu, lambda, tauE, tauF]")
        vals = [parse_scalar(x) for x in req.state]
        run = tracial_mod.iterate_balanced(tracial_mod.TraceState(*vals),
                                          max_steps=req.steps or 1000)
        rows = run.csv_rows()
        return m.SimulateResponse(kind=req.kind, columns=[str(c) for c in rows[0]],
                                  rows=[[str(x) for x in r] for r in rows[1:]])

    if req.kind == "greedy":
        if req.lam is None:
            raise SpectrumError("greedy needs lam")
        mu = seq_from(req.mu_seq, req.mu_tail, "excess")
        lam = parse_scalar(req.lam)
        plan = divergent_mod.greedy_blocks(mu, lam, req.blocks)
        dec = divergent_mod.decompose_divergent(mu, lam, req.blocks)
        columns = ["k", "n_k", "alpha_k", "beta_k", "k_count", "residual"]
        rows = []
        for b, step in zip(plan, dec.steps):
            rows.append([str(b.index), str(b.n_k), str(b.alpha_k),
                         str(b.beta_k), str(b.k_count), repr(step.residual)])
        return m.SimulateResponse(kind=req.kind, columns=columns, rows=rows)

    if req.kind == "single-defect":
        if req.lam is None:
            raise SpectrumError("single-defect needs lam")
        mu = seq_from(req.mu_seq, req.mu_tail, "excess")
        state = series_mod.single_defect_run(parse_scalar(req.lam), mu, req.steps)
    elif req.kind == "single-excess":
        if req.mu is None:
            raise SpectrumError("single-excess needs mu")
        lam = seq_from(req.lambda_seq, req.lambda_tail, "defect")
        state = series_mod.single_excess_run(parse_scalar(req.mu), lam, req.steps)
    else:
        mu = seq_from(req.mu_seq, req.mu_tail, "excess")
        lam = seq_from(req.lambda_seq, req.lambda_tail, "defect")
        _, state = series_mod.interleave_run(mu, lam, req.steps)

    columns = ["j", "delta", "sigma", "residual", "consumed", "overlap_c1"]
    rows = []
    for i, s in enumerate(state.steps):
        # overlap of the carried direction (vs[i+1]) with the first consumed
        # carrier, recomputed through the independent probe
        overlap = verify_mod.overlap_probe(state, 0, i + 2)
        rows.append([str(s.j), str(s.delta),
                     "" if s.sigma is None else str(s.sigma),
                     repr(s.residual), s.consumed, repr(overlap)])
    return m.SimulateResponse(kind=req.kind, columns=columns, rows=rows)


def verify_handler(req: m.VerifyRequest) -> m.VerifyResponse:
    projections = []
    for p in req.projections:
        if p.vector is not None:
            projections.append(RankOneProjection(np.array(p.vector), p.label))
        elif p.frame is not None:
            projections.append(Projection(np.array(p.frame).T, p.label))
        else:
            raise SpectrumError("projection needs a vector or a frame")
    remainder = None
    if req.remainder is not None:
        from ..core import parse_scalar
        remainder = Remainder(parse_scalar(req.remainder.coeff),
                              np.array(req.remainder.vector))
    if req.target_diag is not None:
        target = np.array(req.target_diag, dtype=float)
    elif req.spectrum is not None:
        target = np.array([to_float(v)
                           for v in _expanded_values(_parse_spectrum(req.spectrum))])
    else:
        raise SpectrumError("verification needs target_diag or a finite spectrum")
    report = _report(projections, remainder, target)
    ok = all(c["idempotency"] <= req.tol and c["symmetry"] <= req.tol
             for c in report.projections)
    ok = ok and (report.reconstruction_residual is not None
                 and report.reconstruction_residual <= req.tol)
    return m.VerifyResponse(status="ok" if ok else "failed", report=report)
