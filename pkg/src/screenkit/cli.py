"""Command-line front end.

Subcommands: solve, verify, converse, competitive, bundling, sweep, report.
Outputs are deterministic for a fixed config and seed; runtimes are only
included when asked for. Exit codes: 0 success, 1 file or parse problem,
2 size guard, 3 failed validation or verification.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .applications import (BundleInstance, CompetitiveParams,
                           certify_bundling, competitive_separating,
                           solve_bundling)
from .errors import ScreenkitError, SizeGuardExceeded, StructuralError
from .io import canonical_json, load_instance, load_params
from .model import validate_instance
from .solver import (DEFAULT_GUARD, productive_marginal, solve_downward_1d,
                     solve_full_1d, solve_joint)
from .stochastics import random_positive_instance
from .theorems import converse_construct, verify_theorem1

REPORT_COLUMNS = ("instance_id", "mode", "value", "gap", "y0_as",
                  "assumptions", "runtime_ms")


def _fail(message: str, code: int) -> int:
    print(message, file=sys.stderr)
    return code


def _load(path: str):
    try:
        return load_instance(path)
    except FileNotFoundError:
        raise _CliExit(f"no such file: {path}", 1)
    except StructuralError as exc:
        raise _CliExit(str(exc), 1)


class _CliExit(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _emit(payload, fmt: str, out: str | None) -> None:
    if fmt == "json":
        text = canonical_json(payload)
    elif fmt == "csv":
        rows = payload if isinstance(payload, list) else [payload]
        buf = _io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS,
                                extrasaction="ignore", lineterminator="\r\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k)) for k in REPORT_COLUMNS})
        text = buf.getvalue()
    elif fmt == "pretty-table":
        rows = payload if isinstance(payload, list) else [payload]
        text = _pretty(rows)
    else:
        raise _CliExit(f"unknown format {fmt!r}", 1)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ";".join(str(v) for v in value)
    return str(value)


def _pretty(rows: list) -> str:
    if not rows:
        return "(empty)\n"
    if len(rows) == 1 and isinstance(rows[0], dict):
        items = [(k, _cell(v) if not isinstance(v, dict) else canonical_json(v).strip())
                 for k, v in sorted(rows[0].items())]
        width = max(len(k) for k, _ in items)
        return "".join(f"{k.ljust(width)}  {v}\n" for k, v in items)
    keys = sorted({k for row in rows for k in row})
    table = [[_cell(row.get(k)) for k in keys] for row in rows]
    widths = [max(len(k), *(len(r[i]) for r in table)) for i, k in enumerate(keys)]
    lines = ["  ".join(k.ljust(w) for k, w in zip(keys, widths)).rstrip()]
    for r in table:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _solve_payload(inst, mode: str, guard: int, timing: bool,
                   instance_id: str) -> dict:
    t0 = time.perf_counter()
    if mode == "joint":
        res = solve_joint(inst, guard=guard)
        mech = res.mechanism
        payload = {
            "instance_id": instance_id,
            "mode": mode,
            "value": res.value,
            "mechanism": {
                "support": [list(p) for p in inst.dist.support],
                "x": list(mech.x),
                "y": list(mech.y),
                "t": list(mech.t),
            },
            "some_optimum_baseline": res.some_optimum_baseline,
            "all_optima_baseline": res.all_optima_baseline,
            "certificate": res.certificate,
        }
    elif mode in ("downward1d", "full1d"):
        line = productive_marginal(inst)
        solver = solve_downward_1d if mode == "downward1d" else solve_full_1d
        res = solver(line)
        payload = {
            "instance_id": instance_id,
            "mode": mode,
            "value": res.value,
            "mechanism": {
                "levels": line.theta.tolist(),
                "x_idx": list(res.x_idx),
                "x": [float(line.x_grid[i]) for i in res.x_idx],
                "t": list(res.t),
            },
            "certificate": res.certificate,
        }
    else:
        raise _CliExit(f"unknown mode {mode!r}", 1)
    if timing:
        payload["runtime_ms"] = round(1e3 * (time.perf_counter() - t0), 3)
    return payload


def _verify_payload(inst, guard: int, timing: bool, instance_id: str) -> dict:
    t0 = time.perf_counter()
    report = verify_theorem1(inst, guard=guard)
    flagged = report.assumption_status.failures
    payload = {
        "instance_id": instance_id,
        "mode": "verify",
        "value": report.v_joint,
        "productive_value": report.v_productive,
        "gap": report.gap,
        "y0_as": report.y0_almost_surely,
        "strictly_costly": report.strictly_costly,
        "some_optimum_baseline": report.some_optimum_baseline,
        "assumptions": "ok" if not flagged else flagged,
        "applicable": report.applicable,
        "passed": report.passed if report.applicable else None,
    }
    if timing:
        payload["runtime_ms"] = round(1e3 * (time.perf_counter() - t0), 3)
    return payload


def _converse_payload(inst, coordinate: int, margin: float,
                      instance_id: str) -> dict:
    art = converse_construct(inst, coord=coordinate,
                             dominance_margin=margin)
    return {
        "instance_id": instance_id,
        "mode": "converse",
        "coordinate": art.coordinate,
        "eps": art.eps_star,
        "payoff_bound": art.r_val,
        "productive_bound": art.q_val,
        "value": art.menu_value,
        "productive_value": art.productive_value,
        "gap": art.margin,
        "certified": True,
    }


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    if args.strict:
        report = validate_instance(inst)
        if not report.assumptions_hold:
            raise _CliExit(
                f"assumption checks failed: {report.failures}", 3)
    payload = _solve_payload(inst, args.mode, args.guard, args.timing,
                             Path(args.instance).stem)
    _emit(payload, args.format, args.out)
    return 0


def _verify_instances(args):
    if args.instance:
        yield Path(args.instance).stem, _load(args.instance)
    else:
        for k in range(args.random):
            yield f"seed{args.seed}-{k}", random_positive_instance(
                args.seed, stream=k)


def cmd_verify(args) -> int:
    if not args.instance and not args.random:
        raise _CliExit("verify needs --instance or --random N", 1)
    rows = []
    failed = False
    for instance_id, inst in _verify_instances(args):
        if args.converse:
            rows.append(_converse_payload(inst, args.coordinate, args.margin,
                                          instance_id))
            continue
        payload = _verify_payload(inst, args.guard, args.timing, instance_id)
        if payload["applicable"] and not payload["passed"]:
            failed = True
        if args.strict and payload["assumptions"] != "ok":
            failed = True
        rows.append(payload)
    _emit(rows if len(rows) > 1 else rows[0], args.format, args.out)
    return 3 if failed else 0


def cmd_converse(args) -> int:
    inst = _load(args.instance)
    payload = _converse_payload(inst, args.coordinate, args.margin,
                                Path(args.instance).stem)
    _emit(payload, args.format, args.out)
    return 0


def cmd_competitive(args) -> int:
    if args.params:
        kind, params = load_params(args.params)
        if kind != "competitive":
            raise _CliExit(f"expected kind 'competitive', got {kind!r}", 1)
        p = CompetitiveParams(**params)
    else:
        p = CompetitiveParams()
    sep = competitive_separating(p)
    payload = {
        "mode": "competitive",
        "offer_low": list(sep.offer_l),
        "offer_high": list(sep.offer_h),
        "value": sep.value_high,
        "value_without_activity": sep.value_high_no_instrument,
        "gap": sep.gain,
        "checked_points": sep.checked_points,
    }
    _emit(payload, args.format, args.out)
    return 0


def cmd_bundling(args) -> int:
    if args.params:
        kind, params = load_params(args.params)
        if kind != "bundling":
            raise _CliExit(f"expected kind 'bundling', got {kind!r}", 1)
        import numpy as np
        b = BundleInstance(
            int(params["n_goods"]),
            np.asarray(params["values"], dtype=float),
            np.asarray(params["prob"], dtype=float),
            np.asarray(params["quality_grid"], dtype=float),
            np.asarray(params["cost_samples"], dtype=float))
    else:
        from .presets import bundling_default
        b = bundling_default()
    sol = solve_bundling(b)
    payload = {
        "mode": "bundling",
        "value": sol.value,
        "menu": [list(opt) for opt in sol.menu],
    }
    if args.certify:
        cert = certify_bundling(b)
        payload["certificate"] = {
            "brute_force_value": cert.brute_force_value,
            "options": cert.options,
            "menu_is_optimal": cert.menu_is_optimal,
        }
        if not cert.menu_is_optimal:
            _emit(payload, args.format, args.out)
            raise _CliExit("bundling menu is not optimal", 3)
    _emit(payload, args.format, args.out)
    return 0


def cmd_sweep(args) -> int:
    workers = max(1, int(os.environ.get("SCREENKIT_THREADS", "1")))

    def one(k: int) -> dict:
        inst = random_positive_instance(args.seed, stream=k)
        instance_id = f"seed{args.seed}-{k}"
        if args.mode:
            return _solve_payload(inst, args.mode, args.guard, args.timing,
                                  instance_id)
        return _verify_payload(inst, args.guard, args.timing, instance_id)

    if workers == 1:
        rows = [one(k) for k in range(args.random)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, range(args.random)))
    rows.sort(key=lambda r: int(r["instance_id"].rsplit("-", 1)[1]))
    _emit(rows, args.format, args.out)
    failed = any(r.get("applicable") and not r.get("passed") for r in rows)
    return 3 if failed else 0


def cmd_report(args) -> int:
    import json
    rows = []
    for path in args.results:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise _CliExit(f"no such file: {path}", 1)
        except json.JSONDecodeError as exc:
            raise _CliExit(f"not valid JSON: {path}: {exc}", 1)
        rows.extend(data if isinstance(data, list) else [data])
    rows.sort(key=lambda r: (str(r.get("instance_id", "")),
                             str(r.get("mode", ""))))
    _emit(rows, "csv", args.out)
    return 0


def _add_common(sub):
    sub.add_argument("--out", default=None, help="write output here")
    sub.add_argument("--format", default="json",
                     choices=("json", "csv", "pretty-table"))
    sub.add_argument("--timing", action="store_true",
                     help="include runtime_ms (breaks byte-identical output)")
    sub.add_argument("--guard", type=int, default=DEFAULT_GUARD,
                     help="joint enumeration size guard")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="screenkit",
        description="Finite screening problems with a productive allocation "
                    "and costly instruments: solvers and verification.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--mode", default="joint",
                   choices=("downward1d", "full1d", "joint"))
    s.add_argument("--strict", action="store_true",
                   help="fail (exit 3) if assumption checks fail")
    _add_common(s)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check the reduction theorem")
    v.add_argument("--instance", default=None)
    v.add_argument("--random", type=int, default=0, metavar="N",
                   help="verify N generated instances instead of a file")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--strict", action="store_true",
                   help="treat flagged assumptions as failures")
    v.add_argument("--converse", action="store_true",
                   help="build the dominating menu for dependent types")
    v.add_argument("--coordinate", type=int, default=0)
    v.add_argument("--margin", type=float, default=1e-6)
    _add_common(v)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("converse",
                       help="menu construction for negatively dependent types")
    c.add_argument("--instance", required=True)
    c.add_argument("--coordinate", type=int, default=0)
    c.add_argument("--margin", type=float, default=1e-6)
    _add_common(c)
    c.set_defaults(func=cmd_converse)

    k = sub.add_parser("competitive", help="Pareto-optimal separating offers")
    k.add_argument("--params", default=None)
    _add_common(k)
    k.set_defaults(func=cmd_competitive)

    b = sub.add_parser("bundling", help="grand-bundle quality menu")
    b.add_argument("--params", default=None)
    b.add_argument("--certify", action="store_true",
                   help="brute-force the bundling mechanisms (two types)")
    _add_common(b)
    b.set_defaults(func=cmd_bundling)

    w = sub.add_parser("sweep", help="batch-run generated instances")
    w.add_argument("--random", type=int, required=True, metavar="N")
    w.add_argument("--seed", type=int, required=True)
    w.add_argument("--mode", default=None,
                   choices=("downward1d", "full1d", "joint"),
                   help="solve in this mode instead of verifying")
    _add_common(w)
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="aggregate result files into CSV")
    r.add_argument("results", nargs="*")
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_report)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _CliExit as exc:
        return _fail(str(exc), exc.code)
    except SizeGuardExceeded as exc:
        return _fail(str(exc), 2)
    except ScreenkitError as exc:
        return _fail(str(exc), 3)


if __name__ == "__main__":
    sys.exit(main())
