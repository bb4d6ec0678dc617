"""Command-line front end.

Every command writes one JSON report (to ``--out`` or standard output).
Exit status: 0 when the check passes, 1 on an inequality violation or a
solver failure, 2 on bad input.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .datum import BLDatum, load_datum, parse_builtin, validate_datum
from .errors import BLEPIError
from .solver import MgResult, SolverOptions, Status, solve_mg
from .transport import map_from_spec
from .verifier import lemma1_check, proof_chain_audit, theorem_check_sampled, theorem_gap_gaussian

log = logging.getLogger("blepi")

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def jsonable(obj):
    """Recursively convert to plain JSON types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def emit_trace_csv(result: MgResult, path) -> None:
    """Write ``iteration,objective,stationarity`` rows at 17 significant digits."""
    if not result.trace:
        raise ValueError("result has an empty trace")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "objective", "stationarity"])
        for it, F, stat in result.trace:
            w.writerow([it, format(F, ".17g"), format(stat, ".17g")])


def _read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def _load_datum(spec: str | None) -> BLDatum:
    if spec is None:
        raise InputError("--datum is required for this command")
    if spec.startswith("builtin:"):
        return parse_builtin(spec[len("builtin:"):])
    try:
        return load_datum(spec)
    except OSError as exc:
        raise InputError(f"cannot read {spec}: {exc.strerror or exc}") from None


def _is_matrix(x) -> bool:
    return isinstance(x, list) and bool(x) and all(isinstance(row, list) and all(isinstance(v, (int, float)) for v in row) for row in x)


def parse_sigmas(text: str) -> list:
    """``"[[1]],[[4]]"`` or ``"[[[1]],[[4]]]"`` -> list of per-block matrices."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        try:
            doc = json.loads(f"[{text}]")
        except json.JSONDecodeError as exc:
            raise InputError(f"--sigmas is not valid JSON: {exc}") from None
    if isinstance(doc, tuple):
        doc = list(doc)
    if _is_matrix(doc):
        doc = [doc]
    if not isinstance(doc, list) or not all(_is_matrix(s) for s in doc):
        raise InputError("--sigmas must be a list of 2-D numeric arrays")
    return doc


def _solver_options(args) -> SolverOptions:
    return SolverOptions(max_iters=args.max_iters, stat_tol=args.stat_tol, seed=args.seed, restarts=args.restarts)


def _cmd_validate(args, datum):
    rep = validate_datum(datum)
    return rep.to_dict(), EXIT_OK if rep.ok else EXIT_FAIL


def _cmd_solve(args, datum):
    res = solve_mg(datum, _solver_options(args))
    if args.trace_csv:
        try:
            emit_trace_csv(res, args.trace_csv)
        except OSError as exc:
            raise InputError(f"cannot write {args.trace_csv}: {exc.strerror or exc}") from None
    code = EXIT_FAIL if res.status is Status.MAX_ITERATIONS else EXIT_OK
    return res.to_dict(), code


def _resolve_mg(args, datum):
    if args.mg is not None:
        return args.mg, True, None
    res = solve_mg(datum, _solver_options(args))
    if res.status is Status.UNBOUNDED:
        return math.inf, False, res
    return res.value, res.converged, res


def _cmd_verify_gaussian(args, datum):
    if args.sigmas is None:
        raise InputError("--sigmas is required for verify-gaussian")
    mg, _, res = _resolve_mg(args, datum)
    rep = theorem_gap_gaussian(datum, parse_sigmas(args.sigmas), mg)
    out = rep.to_dict()
    if res is not None:
        out["solver"] = res.to_dict()
    return out, EXIT_OK if rep.passed else EXIT_FAIL


def _cmd_verify_sampled(args, datum):
    if args.targets is None:
        raise InputError("--targets is required for verify-sampled")
    targets = _read_json(args.targets)
    if not isinstance(targets, list):
        raise InputError("--targets must hold a JSON array of distribution specs")
    mg, converged, res = _resolve_mg(args, datum)
    rep = theorem_check_sampled(datum, targets, args.samples, args.seed, mg, k=args.k, jitter=args.jitter, mg_converged=converged)
    out = rep.to_dict()
    if res is not None:
        out["solver"] = res.to_dict()
    return out, EXIT_OK if rep.passed else EXIT_FAIL


def _lemma_inputs(args, datum):
    if args.targets is None:
        raise InputError("--targets (transport map description) is required")
    if not 0 <= args.map_index < datum.m:
        raise InputError(f"--map-index {args.map_index} out of range for m={datum.m}")
    return datum.maps[args.map_index], map_from_spec(_read_json(args.targets))


def _cmd_lemma1(args, datum):
    A, T = _lemma_inputs(args, datum)
    rep = lemma1_check(A, T, args.samples, args.seed, k=args.k, jitter=args.jitter)
    return rep.to_dict(), EXIT_OK if rep.passed else EXIT_FAIL


def _cmd_audit(args, datum):
    A, T = _lemma_inputs(args, datum)
    rep = proof_chain_audit(A, T, args.samples, args.seed, n_strata=args.strata, k=args.k)
    return rep.to_dict(), EXIT_OK if rep.passed else EXIT_FAIL


COMMANDS = {
    "validate": _cmd_validate,
    "solve": _cmd_solve,
    "verify-gaussian": _cmd_verify_gaussian,
    "verify-sampled": _cmd_verify_sampled,
    "lemma1": _cmd_lemma1,
    "audit": _cmd_audit,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--datum", help="datum JSON file, or builtin:<name>[:<param>] (epi:0.5, identity:3, unbalanced, zamir_feder:[[1,1]])")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write the report here instead of standard output")
    common.add_argument("--dump-datum", action="store_true", help="embed the parsed datum in the report")
    common.add_argument("-v", "--verbose", action="store_true")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--max-iters", type=int, default=2000)
    solver.add_argument("--stat-tol", type=float, default=1e-8)
    solver.add_argument("--restarts", type=int, default=4)

    sampling = argparse.ArgumentParser(add_help=False)
    sampling.add_argument("--targets", help="JSON file: distribution specs (array) or a map description")
    sampling.add_argument("--samples", type=int, default=20000)
    sampling.add_argument("--k", type=int, default=5, help="neighbour order of the k-NN entropy estimator")
    sampling.add_argument("--jitter", action="store_true", help="jitter samples by 1e-10 before k-NN estimation")

    mg = argparse.ArgumentParser(add_help=False)
    mg.add_argument("--mg", type=float, help="value of M_g; solved for when omitted")

    p = argparse.ArgumentParser(prog="blepi", description="Gaussian constant and numerical checks for the unified entropy power / Brascamp-Lieb inequality.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check signs, surjectivity and dimension balance")
    s = sub.add_parser("solve", parents=[common, solver], help="compute M_g")
    s.add_argument("--trace-csv", help="write the iteration trace as CSV")
    g = sub.add_parser("verify-gaussian", parents=[common, solver, mg], help="exact check for Gaussian inputs")
    g.add_argument("--sigmas", help='per-block covariances as inline JSON, e.g. "[[1]],[[4]]"')
    sub.add_parser("verify-sampled", parents=[common, solver, mg, sampling], help="Monte Carlo check for scalar blocks")
    for name, helptext in (("lemma1", "check the change-of-variables lemma"), ("audit", "report every step of the lemma's argument")):
        q = sub.add_parser(name, parents=[common, sampling], help=helptext)
        q.add_argument("--map-index", type=int, default=0, help="which A_j of the datum to use")
        if name == "audit":
            q.add_argument("--strata", type=int, default=8)
    return p


def run(argv=None) -> tuple[int, dict | None]:
    """Parse ``argv``, run the command, write the report; return ``(status, report)``."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return (EXIT_INPUT if exc.code else EXIT_OK), None
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        datum = _load_datum(args.datum)
        result, code = COMMANDS[args.command](args, datum)
    except (InputError, BLEPIError, ValueError) as exc:
        print(f"blepi {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT, None

    report = {
        "artifact": "blepi",
        "version": __version__,
        "command": args.command,
        "seed": args.seed,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "result": result,
    }
    if args.dump_datum:
        report["datum"] = datum.to_dict()
    text = json.dumps(jsonable(report), indent=2, allow_nan=False) + "\n"
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            print(f"blepi {args.command}: cannot write {args.out}: {exc.strerror or exc}", file=sys.stderr)
            return EXIT_INPUT, None
    else:
        sys.stdout.write(text)
    return code, report


def main(argv=None) -> int:
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
