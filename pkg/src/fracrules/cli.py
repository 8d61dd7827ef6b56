"""Command-line front end.

Subcommands:

    deriv      evaluate the fractional derivative of a DSL function
    check      evaluate both sides of a product/chain identity
    reproduce  run the built-in falsification suite
    locality   compare right continuations at a gluing point

Output goes to stdout as a table (default), JSON or CSV; diagnostics go to
stderr. Exit codes: 0 success (check: HOLDS), 1 VIOLATED or failed
reproduction/locality, 2 parse error, 3 domain error. Output is
deterministic: identical invocations produce identical bytes.
"""

from __future__ import annotations

import argparse
import math
import sys

from . import __version__
from .engine import EngineConfig, frac_deriv
from .errors import FracRulesError, ParseError
from .piecewise import parse as parse_fn
from .piecewise import range_bounds
from .rules import (
    LOCALITY_TOL,
    VERDICT_TOL,
    RuleId,
    check_chain_a,
    check_chain_b,
    check_leibniz,
    locality_test,
    reproduce_suite,
)

_EXIT_VIOLATED = 1
_EXIT_PARSE = 2
_EXIT_DOMAIN = 3


# --------------------------------------------------------------------------
# serialization (deterministic field order, lossless numbers in JSON)
# --------------------------------------------------------------------------

def _f17(x: float) -> str:
    if not math.isfinite(x):
        return '"inf"' if x > 0 else ('"-inf"' if x < 0 else '"nan"')
    return format(float(x) + 0.0, ".17g")


def _f7(x) -> str:
    if x is None:
        return "mismatch"
    if not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return format(float(x) + 0.0, ".7g")


def _jstr(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch in ('"', "\\"):
            out.append("\\" + ch)
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def _jval(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return _f17(v)
    if isinstance(v, str):
        return _jstr(v)
    if isinstance(v, dict):
        return "{" + ",".join(f"{_jstr(str(k))}:{_jval(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_jval(x) for x in v) + "]"
    raise TypeError(f"unserializable value {v!r}")


def _emit_json(doc: dict) -> str:
    return _jval(doc) + "\n"


def _emit_csv(header, rows) -> str:
    def cell(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return format(v + 0.0, ".17g") if math.isfinite(v) else str(v)
        return str(v)

    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(cell(v) for v in row))
    return "\n".join(lines) + "\n"


def _emit_table(rows) -> str:
    width = max(len(k) for k, _ in rows)
    return "".join(f"{k.ljust(width)}  {v}\n" for k, v in rows)


# --------------------------------------------------------------------------
# document builders
# --------------------------------------------------------------------------

def _config_echo(args, method=None) -> dict:
    cfg = {
        "alpha": float(args.alpha),
        "domain_end": float(args.domain_end),
        "nodes": int(args.nodes),
        "tol": float(args.tol),
    }
    if method is not None:
        cfg["method"] = method
    return cfg


def _document(command: str, config: dict, results: list, status: str) -> dict:
    return {
        "tool": "fracrules",
        "version": __version__,
        "command": command,
        "config": config,
        "results": results,
        "status": status,
    }


def _conditions_record(conds: dict) -> dict:
    out = {}
    for name, c in conds.items():
        out[name] = {
            "left_derivative": c.left_derivative,
            "right_derivative": c.right_derivative,
            "differentiable": c.differentiable,
            "note": c.note,
        }
    return out


def _rule_record(report, extra=None) -> dict:
    rec = {
        "kind": "rule_report",
        "rule": report.rule.value,
        "point": report.point,
        "alpha": report.alpha,
        "lhs": report.lhs,
        "rhs": report.rhs,
        "residual": report.residual,
        "verdict": report.verdict,
        "side_conditions": _conditions_record(report.side_conditions),
    }
    if extra:
        rec.update(extra)
    return rec


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def _engine_config(args) -> EngineConfig:
    return EngineConfig(nodes=args.nodes, merge_tol=args.tol)


def _cmd_deriv(args) -> int:
    f = parse_fn(args.fn, args.domain_end)
    config = _engine_config(args)
    r = frac_deriv(f, args.alpha, args.at, method=args.method, config=config)
    status = "ok" if not r.mismatch else "two-sided-mismatch"
    rec = {
        "kind": "frac_deriv",
        "fn": args.fn,
        "point": r.point,
        "alpha": r.alpha.alpha,
        "method": r.method,
        "left_limit": r.left_limit,
        "right_limit": r.right_limit,
        "value": r.value,
        "err_estimate": r.err_estimate,
    }
    doc = _document("deriv", _config_echo(args, args.method), [rec], status)
    if args.format == "json":
        _out(_emit_json(doc))
    elif args.format == "csv":
        header = ["fn", "alpha", "point", "method", "left_limit", "right_limit", "value", "err_estimate"]
        _out(_emit_csv(header, [[args.fn, r.alpha.alpha, r.point, r.method,
                                 r.left_limit, r.right_limit, r.value, r.err_estimate]]))
    else:
        _out(_emit_table([
            ("fn", args.fn),
            ("alpha", _f7(r.alpha.alpha)),
            ("point", _f7(r.point)),
            ("method", r.method),
            ("left_limit", _f7(r.left_limit)),
            ("right_limit", _f7(r.right_limit)),
            ("value", _f7(r.value)),
            ("err_estimate", _f7(r.err_estimate)),
            ("status", status),
        ]))
    return 0


def _outer_domain(u) -> float:
    return max(range_bounds(u)[1], 1e-6)


def _cmd_check(args) -> int:
    config = _engine_config(args)
    alpha, t = args.alpha, args.at
    if args.rule == "leibniz":
        if args.u is None or args.v is None:
            raise ParseError("leibniz needs --u and --v", 0)
        u = parse_fn(args.u, args.domain_end)
        v = parse_fn(args.v, args.domain_end)
        report = check_leibniz(u, v, alpha, t, config, args.tol)
        operands = {"u": args.u, "v": args.v}
    else:
        if args.f is None or args.u is None:
            raise ParseError(f"{args.rule} needs --f and --u", 0)
        u = parse_fn(args.u, args.domain_end)
        f = parse_fn(args.f, _outer_domain(u))
        checker = check_chain_a if args.rule == "chain-a" else check_chain_b
        report = checker(f, u, alpha, t, config, args.tol)
        operands = {"f": args.f, "u": args.u}

    status = "holds" if report.verdict == "HOLDS" else "violated"
    rec = _rule_record(report, extra={"operands": operands})
    doc = _document("check", _config_echo(args), [rec], status)
    if args.format == "json":
        _out(_emit_json(doc))
    elif args.format == "csv":
        header = ["rule", "alpha", "point", "lhs", "rhs", "residual", "verdict"]
        _out(_emit_csv(header, [[report.rule.value, report.alpha, report.point,
                                 report.lhs, report.rhs, report.residual, report.verdict]]))
    else:
        rows = [
            ("rule", report.rule.value),
            ("alpha", _f7(report.alpha)),
            ("point", _f7(report.point)),
            ("lhs", _f7(report.lhs)),
            ("rhs", _f7(report.rhs)),
            ("residual", _f7(report.residual)),
            ("verdict", report.verdict),
        ]
        for name, c in report.side_conditions.items():
            sides = f"left {_f7(c.left_derivative) if c.left_derivative is not None else '-'}"
            sides += f", right {_f7(c.right_derivative) if c.right_derivative is not None else '-'}"
            sides += f", differentiable: {'yes' if c.differentiable else 'no'}"
            if c.note:
                sides += f" ({c.note})"
            rows.append((f"condition[{name}]", sides))
        _out(_emit_table(rows))
    return 0 if report.verdict == "HOLDS" else _EXIT_VIOLATED


def _locality_record(loc, ok: bool) -> dict:
    return {
        "kind": "locality",
        "t0": loc.t0,
        "alpha": loc.alpha,
        "base_value": loc.base_value,
        "continuation_values": list(loc.continuation_values),
        "max_deviation": loc.max_deviation,
        "ok": ok,
    }


def _cmd_reproduce(args) -> int:
    config = _engine_config(args)
    res = reproduce_suite(alpha=args.alpha, domain_end=args.domain_end,
                          config=config, tol=args.tol)
    results = []
    for c in res.cases:
        results.append(_rule_record(c.report, extra={
            "case": c.case_id,
            "description": c.description,
            "expected_lhs": c.expected_lhs,
            "expected_rhs": c.expected_rhs,
            "ok": c.ok,
        }))
    results.append(_locality_record(res.locality, res.locality_ok))
    status = "ok" if res.ok else "failed"
    doc = _document("reproduce", _config_echo(args), results, status)
    if args.format == "json":
        _out(_emit_json(doc))
    elif args.format == "csv":
        header = ["case", "rule", "point", "lhs", "rhs", "residual", "verdict",
                  "expected_lhs", "expected_rhs", "ok"]
        rows = [
            [c.case_id, c.report.rule.value, c.report.point, c.report.lhs,
             c.report.rhs, c.report.residual, c.report.verdict,
             c.expected_lhs, c.expected_rhs, c.ok]
            for c in res.cases
        ]
        loc = res.locality
        rows.append(["LOC", "locality", loc.t0, loc.base_value, None,
                     loc.max_deviation, "AGREES" if res.locality_ok else "DEVIATES",
                     None, None, res.locality_ok])
        _out(_emit_csv(header, rows))
    else:
        lines = []
        head = (f"{'case':<5} {'rule':<9} {'point':>6} {'lhs':>12} {'rhs':>12} "
                f"{'residual':>12} {'verdict':<9} {'expected_lhs':>12} {'expected_rhs':>12} ok")
        lines.append(head + "\n")
        for c in res.cases:
            r = c.report
            lines.append(
                f"{c.case_id:<5} {r.rule.value:<9} {_f7(r.point):>6} {_f7(r.lhs):>12} "
                f"{_f7(r.rhs):>12} {_f7(r.residual):>12} {r.verdict:<9} "
                f"{_f7(c.expected_lhs):>12} {_f7(c.expected_rhs):>12} {'yes' if c.ok else 'NO'}\n"
            )
        loc = res.locality
        lines.append(
            f"{'LOC':<5} {'locality':<9} {_f7(loc.t0):>6} {_f7(loc.base_value):>12} "
            f"{'-':>12} {_f7(loc.max_deviation):>12} "
            f"{'AGREES' if res.locality_ok else 'DEVIATES':<9} {'-':>12} {'-':>12} "
            f"{'yes' if res.locality_ok else 'NO'}\n"
        )
        lines.append(f"status {status}\n")
        _out("".join(lines))
    return 0 if res.ok else _EXIT_VIOLATED


def _cmd_locality(args) -> int:
    config = _engine_config(args)
    u1 = parse_fn(args.u1, args.domain_end)
    conts = [parse_fn(src, args.domain_end) for src in args.cont]
    loc = locality_test(u1, conts, args.alpha, args.t0, config)
    ok = loc.max_deviation <= args.loc_tol
    doc = _document(
        "locality",
        _config_echo(args),
        [_locality_record(loc, ok)],
        "ok" if ok else "failed",
    )
    if args.format == "json":
        _out(_emit_json(doc))
    elif args.format == "csv":
        header = ["t0", "alpha", "base_value", "continuations", "max_deviation", "ok"]
        _out(_emit_csv(header, [[loc.t0, loc.alpha, loc.base_value,
                                 len(loc.continuation_values), loc.max_deviation, ok]]))
    else:
        rows = [
            ("u1", args.u1),
            ("t0", _f7(loc.t0)),
            ("alpha", _f7(loc.alpha)),
            ("base_value", _f7(loc.base_value)),
        ]
        for i, v in enumerate(loc.continuation_values):
            rows.append((f"continuation[{i}]", f"{args.cont[i]}  ->  {_f7(v)}"))
        rows.append(("max_deviation", _f7(loc.max_deviation)))
        rows.append(("status", "ok" if ok else "failed"))
        _out(_emit_table(rows))
    return 0 if ok else _EXIT_VIOLATED


def _out(text: str) -> None:
    sys.stdout.write(text)


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _add_common(p, with_at=True):
    p.add_argument("--alpha", type=float, default=0.5, help="derivative order in (0,1)")
    if with_at:
        p.add_argument("--at", type=float, required=True, help="evaluation point")
    p.add_argument("--format", choices=["table", "json", "csv"], default="table")
    p.add_argument("--tol", type=float, default=VERDICT_TOL,
                   help="verdict/merge tolerance")
    p.add_argument("--nodes", type=int, default=64, help="quadrature nodes per cell")
    p.add_argument("--domain-end", dest="domain_end", type=float, default=4.0,
                   help="right end of the function domain")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fracrules",
        description="Fractional derivatives of piecewise-smooth functions "
                    "and checks of the claimed product/chain rules.",
    )
    ap.add_argument("--version", action="version", version=f"fracrules {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("deriv", help="evaluate a fractional derivative")
    p.add_argument("--fn", required=True, help="function in the DSL, e.g. 'sqrt(t)+relu(t-1)'")
    p.add_argument("--method", choices=["auto", "symbolic", "quadrature", "oracle"],
                   default="auto")
    _add_common(p)
    p.set_defaults(run=_cmd_deriv)

    p = sub.add_parser("check", help="check one identity at a point")
    p.add_argument("rule", choices=[r.value for r in RuleId])
    p.add_argument("--u", help="inner/left operand")
    p.add_argument("--v", help="second factor (leibniz)")
    p.add_argument("--f", help="outer function, in the variable u (chain rules)")
    _add_common(p)
    p.set_defaults(run=_cmd_check)

    p = sub.add_parser("reproduce", help="run the built-in falsification suite")
    _add_common(p, with_at=False)
    p.set_defaults(run=_cmd_reproduce)

    p = sub.add_parser("locality", help="compare continuations past a gluing point")
    p.add_argument("--u1", required=True, help="base function (DSL)")
    p.add_argument("--cont", action="append", required=True,
                   help="continuation (DSL); repeatable")
    p.add_argument("--t0", type=float, required=True, help="gluing point")
    p.add_argument("--loc-tol", dest="loc_tol", type=float, default=LOCALITY_TOL)
    _add_common(p, with_at=False)
    p.set_defaults(run=_cmd_locality)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except ParseError as exc:
        print(f"fracrules: parse error: {exc}", file=sys.stderr)
        return _EXIT_PARSE
    except FracRulesError as exc:
        print(f"fracrules: {exc}", file=sys.stderr)
        return _EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
