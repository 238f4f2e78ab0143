"""Command-line front end: fisher | crb | verify | check | sweep.

Exit codes: 0 success, 2 input error, 3 singular information,
4 bound verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__
from .errors import CRBoundError, DomainError, SingularInformation
from .estimation import (MC_PASS_RATE, SLACK_TOL, dtheta_via_estimator, mc_verify, proof_chain_check,
                         variance, verify_bound)
from .expectation import EXACT, ExpectationMethod, rule
from .geometry import (ParameterFunction, builtin_charts, crb, fisher_matrix, gradient, pullback,
                       reparameterize)
from .modelspec import SCHEMA_VERSION, LoadedSpec, SpecError, read_spec, validate
from .score import reweight, score_directional, score_mean

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SINGULAR = 3
EXIT_FAILED = 4


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def fmt_number(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON with floats written at 17 significant digits and non-finite floats as null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None or (isinstance(obj, float) and not math.isfinite(obj)):
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_number(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        items = [f"{pad}{dumps(v, indent, _level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def emit_json(payload: dict, out) -> None:
    validate(payload, "report")
    out.write(dumps(payload) + "\n")


def _matrix_lines(m: np.ndarray) -> list[str]:
    return ["  [" + ", ".join(f"{v: .10g}" for v in row) + "]" for row in m]


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def parse_at(text: Optional[str], names: Sequence[str], skip: Sequence[str] = ()) -> dict[str, float]:
    values: dict[str, float] = {}
    if text:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise SpecError(f"malformed --at entry {part!r}; expected name=value")
            name, value = (s.strip() for s in part.split("=", 1))
            if name not in names:
                raise SpecError(f"unknown coordinate {name!r}; coordinates are {tuple(names)}")
            try:
                values[name] = float(value)
            except ValueError:
                raise SpecError(f"malformed value {value!r} for coordinate {name!r}") from None
    missing = [n for n in names if n not in values and n not in skip]
    if missing:
        raise SpecError(f"--at must give a value for {', '.join(missing)}")
    return values


def point_from_at(spec: LoadedSpec, text: Optional[str]) -> np.ndarray:
    fam = spec.family
    values = parse_at(text, fam.coordinate_names)
    p = np.array([values[n] for n in fam.coordinate_names])
    return fam.check(p)


def parse_range(text: str, names: Sequence[str]) -> tuple[str, np.ndarray]:
    try:
        name, rest = text.split("=", 1)
        lo, hi, steps = rest.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError:
        raise SpecError(f"malformed --range {text!r}; expected name=lo:hi:steps") from None
    name = name.strip()
    if name not in names:
        raise SpecError(f"unknown coordinate {name!r} in --range")
    if steps < 1:
        raise SpecError("--range needs at least one step")
    return name, np.linspace(lo, hi, steps)


def method_for(spec: LoadedSpec, args) -> ExpectationMethod:
    m = spec.method
    if m.is_exact:
        return m
    seed = args.seed if args.seed is not None else m.seed
    return ExpectationMethod.monte_carlo(m.mc_samples, seed, args.threads)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_fisher(spec: LoadedSpec, args, out) -> int:
    p = point_from_at(spec, args.at)
    method = method_for(spec, args)
    fm = fisher_matrix(spec.family, p, method, spec.fd)
    payload = {
        "schema_version": SCHEMA_VERSION, "command": "fisher", "family": spec.family.name,
        "coordinates": list(spec.family.coordinate_names), "at": p.tolist(),
        "matrix": fm.entries.tolist(), "inverse": fm.inverse.tolist(),
        "condition_estimate": fm.condition_estimate, "method": method.describe(),
    }
    if args.format == "json":
        emit_json(payload, out)
    else:
        lines = [f"family: {spec.family.name}",
                 "at: " + ", ".join(f"{n}={fmt_number(v)}" for n, v in zip(spec.family.coordinate_names, p)),
                 "Fisher information:", *_matrix_lines(fm.entries),
                 "inverse:", *_matrix_lines(fm.inverse),
                 f"condition estimate: {fm.condition_estimate:.6g}"]
        out.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_crb(spec: LoadedSpec, args, out) -> int:
    theta = spec.theta
    if args.theta is not None:
        theta = ParameterFunction.from_expression(args.theta, spec.family.coordinate_names, spec.fd)
    p = point_from_at(spec, args.at)
    method = method_for(spec, args)
    fm = fisher_matrix(spec.family, p, method, spec.fd)
    g = gradient(theta, fm, spec.family)
    payload = {
        "schema_version": SCHEMA_VERSION, "command": "crb", "family": spec.family.name,
        "coordinates": list(spec.family.coordinate_names), "at": p.tolist(),
        "theta": theta.label, "theta_value": theta(p), "partials": g.differential.tolist(),
        "gradient": g.components.tolist(), "bound": g.squared_norm, "method": method.describe(),
    }
    if args.format == "json":
        emit_json(payload, out)
    else:
        out.write(f"theta: {theta.label} = {fmt_number(theta(p))}\n"
                  f"gradient: [{', '.join(fmt_number(c) for c in g.components)}]\n"
                  f"bound: {fmt_number(g.squared_norm)}\n")
    return EXIT_OK


def cmd_verify(spec: LoadedSpec, args, out) -> int:
    if spec.estimator is None:
        raise SpecError("verify needs an 'estimator' in the spec")
    p = point_from_at(spec, args.at)
    method = method_for(spec, args)
    report = verify_bound(spec.estimator, spec.theta, spec.family, p, method, spec.fd)
    summary = None
    passed = report.passed
    if args.mc_seeds:
        m = spec.method
        base = args.seed if args.seed is not None else m.seed
        samples = m.mc_samples if not m.is_exact else 100_000
        summary = mc_verify(spec.estimator, spec.theta, spec.family, p,
                            [base + i for i in range(args.mc_seeds)], samples, spec.fd, args.threads)
        passed = passed and summary.pass_rate >= MC_PASS_RATE
    payload = {"schema_version": SCHEMA_VERSION, "command": "verify", "report": report.to_dict(),
               "mc": None if summary is None else summary.to_dict(), "passed": bool(passed)}
    if args.format == "json":
        emit_json(payload, out)
    else:
        rows = [("family", report.family), ("theta", report.theta), ("estimator", report.estimator),
                ("theta value", fmt_number(report.theta_value)),
                ("estimator mean", fmt_number(report.estimator_mean)),
                ("bias", fmt_number(report.bias)), ("biased", str(report.biased).lower()),
                ("variance", fmt_number(report.variance)), ("bound", fmt_number(report.bound)),
                ("slack", fmt_number(report.slack)),
                ("efficiency", "n/a" if report.efficiency is None else fmt_number(report.efficiency))]
        if report.mc_std_error is not None:
            rows.append(("mc std error", fmt_number(report.mc_std_error)))
        if summary is not None:
            rows += [("mc seeds", str(len(summary.seeds))), ("mc pass rate", fmt_number(summary.pass_rate)),
                     ("mc min slack", fmt_number(summary.min_slack))]
        rows.append(("result", "PASS" if passed else "FAIL"))
        width = max(len(k) for k, _ in rows)
        out.write("".join(f"{k:<{width}}  {v}\n" for k, v in rows))
    return EXIT_OK if passed else EXIT_FAILED


def _check_weight(X: np.ndarray) -> np.ndarray:
    return np.exp(0.25 * np.sin(X.sum(axis=1)))


def run_checks(spec: LoadedSpec, p: np.ndarray) -> list[dict]:
    """The invariance and identity checks behind ``crbound check``."""
    fam, fd = spec.family, spec.fd
    method = EXACT if fam.space.admits_exact else spec.method
    analytic = fam.has_analytic_score
    checks: list[dict] = []

    def record(name, residual, tol, detail=""):
        ok = residual is not None and math.isfinite(residual) and residual <= tol
        checks.append({"name": name, "residual": residual, "tolerance": tol, "passed": bool(ok),
                       "detail": detail})

    directions = [np.eye(fam.k)[i] for i in range(fam.k)] + ([np.ones(fam.k)] if fam.k > 1 else [])
    tol = 1e-8 if analytic else 1e-6
    for v in directions:
        record(f"score_mean[{','.join(fmt_number(c) for c in v)}]",
               abs(score_mean(fam, p, v, method, fd)), tol)

    r = rule(fam, p, EXACT) if fam.space.admits_exact else rule(fam, p, method)
    picks = r.points[np.unique(np.linspace(0, r.size - 1, 5).astype(int))]
    for label, base, tol in [("", fam, 1e-10 if analytic else 1e-7),
                             ("[fd]", fam.without_analytic_score(), 1e-7)]:
        if label and not analytic:
            continue
        other = reweight(base, _check_weight)
        res = max(abs(score_directional(base, p, v, x, fd) - score_directional(other, p, v, x, fd))
                  for v in directions for x in picks)
        record(f"reference_measure_invariance{label}", res, tol)

    if spec.estimator is not None:
        for i, v in enumerate(directions):
            lhs, rhs = dtheta_via_estimator(spec.estimator, fam, p, v, method, fd)
            record(f"dtheta_via_estimator[{i}]", abs(lhs - rhs), 1e-6,
                   f"lhs={fmt_number(lhs)} rhs={fmt_number(rhs)}")
        chain = proof_chain_check(spec.estimator, spec.theta, fam, p, method, fd)
        biased = abs(variance(spec.estimator, fam, p, method).mean - spec.theta(p)) > 1e-8
        detail = "estimator is biased at this point; chain not applicable" if biased else ""
        record("proof_chain[a=b]", None if biased else abs(chain.a - chain.b), 1e-7, detail)
        record("proof_chain[b<=c]", None if biased else max(chain.b - chain.c, 0.0), 1e-9, detail)
        record("proof_chain[c=d]", None if biased else abs(chain.c - chain.d), 1e-9, detail)

    base_fm = fisher_matrix(fam, p, method, fd)
    base_bound = gradient(spec.theta, base_fm, fam).squared_norm
    for chart in builtin_charts(fam):
        new = reparameterize(fam, chart)
        q = chart.to_new(p)
        fm = fisher_matrix(new, q, method, fd)
        J = chart.jacobian_at(q)
        record(f"tensor_law[{chart.label}]", float(np.max(np.abs(fm.entries - J.T @ base_fm.entries @ J))),
               1e-6)
        bound = crb(pullback(spec.theta, chart), new, q, method, fd)
        rel = abs(bound - base_bound) / max(abs(base_bound), 1e-300) if base_bound else abs(bound)
        record(f"chart_invariance[{chart.label}]", rel, 1e-6,
               f"bound={fmt_number(bound)} reference={fmt_number(base_bound)}")
    return checks


def cmd_check(spec: LoadedSpec, args, out) -> int:
    p = point_from_at(spec, args.at)
    checks = run_checks(spec, p)
    passed = all(c["passed"] for c in checks)
    payload = {"schema_version": SCHEMA_VERSION, "command": "check", "family": spec.family.name,
               "at": p.tolist(), "checks": checks, "passed": passed}
    if args.format == "json":
        emit_json(payload, out)
    else:
        width = max(len(c["name"]) for c in checks)
        for c in checks:
            res = "n/a" if c["residual"] is None else f"{c['residual']:.3e}"
            line = f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']:<{width}}  residual {res}  (tol {c['tolerance']:.0e})"
            if c["detail"]:
                line += f"  {c['detail']}"
            out.write(line + "\n")
        out.write(("all checks passed" if passed else "some checks FAILED") + "\n")
    return EXIT_OK if passed else EXIT_FAILED


SWEEP_COLUMNS = ("point", "theta", "variance", "bound", "slack", "efficiency", "error")


def sweep_rows(spec: LoadedSpec, name: str, values: np.ndarray, fixed: dict[str, float],
               method: ExpectationMethod) -> list[dict]:
    fam = spec.family
    points = []
    for v in values:
        p = np.array([v if n == name else fixed[n] for n in fam.coordinate_names])
        if not fam.contains(p):
            raise DomainError(f"--range point {name}={fmt_number(v)} is outside the parameter domain")
        points.append(p)
    rows = []
    for v, p in zip(values, points):
        row = {"point": v, "theta": spec.theta(p), "variance": None, "bound": None, "slack": None,
               "efficiency": None, "error": ""}
        try:
            row["bound"] = crb(spec.theta, fam, p, EXACT if fam.space.admits_exact else method, spec.fd)
            if spec.estimator is not None:
                var = variance(spec.estimator, fam, p, method).value
                row["variance"] = var
                row["slack"] = var - row["bound"]
                row["efficiency"] = row["bound"] / var if var > 0 else None
        except SingularInformation:
            row["error"] = "singular_information"
        except CRBoundError as exc:
            row["error"] = type(exc).__name__.lower()
        rows.append(row)
    return rows


def format_csv(rows: list[dict]) -> str:
    lines = [",".join(SWEEP_COLUMNS)]
    for row in rows:
        cells = []
        for col in SWEEP_COLUMNS:
            v = row[col]
            cells.append("" if v is None else v if isinstance(v, str) else fmt_number(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def cmd_sweep(spec: LoadedSpec, args, out) -> int:
    names = spec.family.coordinate_names
    name, values = parse_range(args.range, names)
    fixed = parse_at(args.at, names, skip=(name,))
    rows = sweep_rows(spec, name, values, fixed, method_for(spec, args))
    text = format_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        out.write(text)
    return EXIT_OK


COMMANDS = {"fisher": cmd_fisher, "crb": cmd_crb, "verify": cmd_verify, "check": cmd_check,
            "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("spec", type=Path, help="model spec JSON file")
    common.add_argument("--at", default=None, help="parameter point, e.g. 'mu=0.5,sigma=1'")
    common.add_argument("--format", choices=["table", "json"], default="table")
    common.add_argument("--seed", type=int, default=None, help="override the spec's Monte Carlo seed")
    common.add_argument("--threads", type=int, default=1, help="workers for Monte Carlo sampling")
    common.add_argument("--out", default=None, help="output file (sweep CSV)")

    parser = argparse.ArgumentParser(prog="crbound", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"crbound {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fisher", parents=[common], help="Fisher information matrix and its inverse")
    crb_p = sub.add_parser("crb", parents=[common], help="variance lower bound for theta")
    crb_p.add_argument("--theta", default=None, help="parameter function expression")
    ver = sub.add_parser("verify", parents=[common], help="estimator variance against the bound")
    ver.add_argument("--mc-seeds", type=int, default=0, help="also run Monte Carlo confirmation")
    sub.add_parser("check", parents=[common], help="run the identity and invariance checks")
    sw = sub.add_parser("sweep", parents=[common], help="tabulate the bound along one coordinate")
    sw.add_argument("--range", required=True, help="name=lo:hi:steps")
    return parser


def main(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.threads < 1 or (getattr(args, "mc_seeds", 0) or 0) < 0:
        err.write("crbound: --threads must be >= 1 and --mc-seeds >= 0\n")
        return EXIT_INPUT
    try:
        spec = read_spec(args.spec)
        return COMMANDS[args.command](spec, args, out)
    except SingularInformation as exc:
        err.write(f"crbound: singular information: {exc}\n")
        return EXIT_SINGULAR
    except (CRBoundError, ValueError) as exc:
        err.write(f"crbound: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
