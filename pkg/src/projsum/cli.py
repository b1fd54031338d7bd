"""Batch command-line front door: a thin client over the service handlers.

Subcommands mirror the service endpoints one-to-one; the CLI builds the same
request models, calls the same handler functions in-process, and serializes
the responses.  Exit codes: 0 success, 2 infeasible, 1 malformed input or
internal error.

    projsum classify spectrum.json --factor type1
    projsum decompose spectrum.json --mode exact --steps 50 --out dec.json
    projsum two-proj spectrum.json
    projsum frames spectrum.json
    projsum index diag.json
    projsum simulate run.json --format csv
    projsum verify dec.json
    projsum serve --port 8000
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Optional

from pydantic import ValidationError

from .core import InfeasibleError, SpectrumError
from .service import handlers
from .service import models as m

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2


def _read_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise SpectrumError(f"input file not found: {path}")
    except json.JSONDecodeError as exc:
        raise SpectrumError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}")


def _emit(payload, out: Optional[str], fmt: str) -> None:
    if fmt == "csv":
        text = _to_csv(payload)
    else:
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _to_csv(payload: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    if "columns" in payload and "rows" in payload:
        writer.writerow(payload["columns"])
        for row in payload["rows"]:
            writer.writerow(row)
    elif "diagnostics" in payload:
        writer.writerow(["j", "delta", "sigma", "residual", "consumed"])
        for d in payload["diagnostics"]:
            writer.writerow([d.get("j"), d.get("delta"), d.get("sigma"),
                             d.get("residual"), d.get("consumed")])
    else:
        for key, value in sorted(payload.items()):
            writer.writerow([key, json.dumps(value, sort_keys=True)])
    return buf.getvalue()


def _status_exit(status: str) -> int:
    if status in ("ok", "prefix-only"):
        return EXIT_OK
    if status == "infeasible":
        return EXIT_INFEASIBLE
    if status == "indeterminate":
        return EXIT_OK
    return EXIT_ERROR


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="projsum",
        description="Decide and construct decompositions of positive "
                    "operators into sums of projections.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_input=True):
        if with_input:
            p.add_argument("input", help="input JSON file")
        p.add_argument("--out", help="write the result here instead of stdout")
        p.add_argument("--format", choices=["json", "csv"], default="json")
        p.add_argument("--tol", type=float, default=1e-9,
                       help="verification tolerance")

    p = sub.add_parser("classify", help="feasibility verdict for a spectrum")
    add_common(p)
    p.add_argument("--factor", choices=["type1", "type2", "type3"])

    p = sub.add_parser("decompose", help="construct and verify a decomposition")
    add_common(p)
    p.add_argument("--factor", choices=["type1", "type2", "type3"])
    p.add_argument("--mode", choices=["exact", "float"], default="exact")
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--blocks", type=int, default=8)
    p.add_argument("--collision-budget", type=int, default=1000,
                   help="prefix-sum collision scan budget")
    p.add_argument("--denominator", type=int, default=1,
                   help="matrix-model denominator for the type II route")

    p = sub.add_parser("two-proj", help="sum-of-two-projections construction")
    add_common(p)

    p = sub.add_parser("frames", help="partial-isometry certificate round trip")
    add_common(p)

    p = sub.add_parser("index", help="diagonal integrality index")
    add_common(p)

    p = sub.add_parser("simulate", help="iteration transcripts as CSV/JSON")
    add_common(p)
    p.add_argument("--steps", type=int)
    p.add_argument("--blocks", type=int)

    p = sub.add_parser("verify", help="re-check an emitted decomposition file")
    add_common(p)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    args = parser.parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service.app import app
        uvicorn.run(app, host=args.host, port=args.port)
        return EXIT_OK

    try:
        payload, status = _dispatch(args)
    except (ValidationError, SpectrumError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    _emit(payload, args.out, args.format)
    return _status_exit(status)


def _dispatch(args):
    doc = _read_json(args.input)

    if args.command == "classify":
        req = m.ClassifyRequest(spectrum=m.SpectrumModel(**doc),
                                factor=args.factor)
        resp = handlers.classify_handler(req)
        return resp.model_dump(exclude_none=True), resp.status

    if args.command == "decompose":
        req = m.DecomposeRequest(
            spectrum=m.SpectrumModel(**doc), factor=args.factor, mode=args.mode,
            steps=args.steps, blocks=args.blocks, collision_budget=args.collision_budget,
            tol=args.tol, denominator=args.denominator)
        resp = handlers.decompose_handler(req)
        return resp.model_dump(exclude_none=True), resp.status

    if args.command == "two-proj":
        resp = handlers.two_proj_handler(
            m.TwoProjRequest(spectrum=m.SpectrumModel(**doc)))
        return resp.model_dump(exclude_none=True), resp.status

    if args.command == "frames":
        resp = handlers.frames_handler(
            m.FramesRequest(spectrum=m.SpectrumModel(**doc)))
        return resp.model_dump(exclude_none=True), resp.status

    if args.command == "index":
        resp = handlers.index_handler(m.IndexRequest(**doc))
        return resp.model_dump(), "ok"

    if args.command == "simulate":
        if args.steps is not None:
            doc["steps"] = args.steps
        if args.blocks is not None:
            doc["blocks"] = args.blocks
        resp = handlers.simulate_handler(m.SimulateRequest(**doc))
        return resp.model_dump(), "ok"

    if args.command == "verify":
        resp = handlers.verify_handler(m.VerifyRequest(**doc))
        return resp.model_dump(exclude_none=True), resp.status

    raise SpectrumError(f"unknown command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
