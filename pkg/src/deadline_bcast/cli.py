"""``deadline-bcast`` command line.

Subcommands: outage, policy-compare, region, schedule, rate-solve, validate.
Exit codes: 0 ok, 2 invalid config, 3 guard violation, 4 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path

from . import __version__
from .channel import GENERATOR_NAME, DeadlineConfig, ErasurePattern, ErasureProbs, block_stats
from .cutset import region_boundary
from .errors import ConfigError, GuardError, OracleMismatchError
from .outage import (
    POLICIES,
    brute_force_outage,
    build_cost_table,
    exact_outage,
    monte_carlo_outage,
    rate_solver,
)
from .schedulers import _check_causal, current_csi_policy, greedy_full_csi, past_csi_policy
from .validate import format_table, run_checks

EXIT_OK, EXIT_CONFIG, EXIT_GUARD, EXIT_VALIDATION = 0, 2, 3, 4

OUTAGE_COLUMNS = [
    "t1", "t2", "lambda1", "lambda2", "eps00", "eps01", "eps10", "eps11",
    "pout", "method", "trials", "seed", "stderr",
]
METHOD_NAMES = {"exact": "exact", "bruteforce": "bruteforce", "mc": "montecarlo"}


def parse_values(text: str, field: str, integer: bool = False) -> list:
    """``"1"``, ``"1,2,4"`` or an inclusive range ``"0:6:0.25"``."""
    try:
        if ":" in text:
            start, stop, step = (Decimal(x) for x in text.split(":"))
            if step <= 0 or stop < start:
                raise ConfigError(f"{field}: bad range {text!r}")
            n = int((stop - start) / step)
            vals = [start + i * step for i in range(n + 1)]
        else:
            vals = [Decimal(x) for x in text.split(",") if x.strip()]
    except (InvalidOperation, ValueError):
        raise ConfigError(f"{field}: cannot parse {text!r}") from None
    if not vals:
        raise ConfigError(f"{field}: empty value list")
    if integer:
        if any(v != int(v) for v in vals):
            raise ConfigError(f"{field}: expected integers, got {text!r}")
        return [int(v) for v in vals]
    return [float(v) for v in vals]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def header_line(seed) -> str:
    return f"# deadline-bcast v{__version__} generator={GENERATOR_NAME} seed={'none' if seed is None else seed}"


def _eps_list(args) -> list[ErasureProbs]:
    if args.erasure_p is not None:
        return [ErasureProbs.independent(p) for p in parse_values(args.erasure_p, "erasure_p")]
    return [ErasureProbs.parse(args.eps)]


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(seed, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(header_line(seed) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def _gnuplot_script(data_path: str, sweep_axes: list[str]) -> str:
    cols = {name: i + 1 for i, name in enumerate(OUTAGE_COLUMNS)}
    lines = ["set datafile separator ','", "set datafile commentschars '#'", "set key autotitle columnhead"]
    if len(sweep_axes) >= 2:
        x, y = sweep_axes[:2]
        lines += [
            f"set xlabel '{x}'", f"set ylabel '{y}'", "set zlabel 'P_out'",
            f"splot '{data_path}' using {cols[x]}:{cols[y]}:{cols['pout']} with points",
        ]
    else:
        x = sweep_axes[0] if sweep_axes else "lambda1"
        lines += [
            f"set xlabel '{x}'", "set ylabel 'P_out'",
            f"plot '{data_path}' using {cols[x]}:{cols['pout']} with steps",
        ]
    return "\n".join(lines) + "\n"


def cmd_outage(args) -> int:
    t1s = parse_values(args.t1, "t1", integer=True)
    t2s = parse_values(args.t2, "t2", integer=True) if args.t2 is not None else None
    eps_list = _eps_list(args)
    if args.m is not None:
        if args.lambda2 is None:
            raise ConfigError("lambda2: required when m is given")
        lam_pairs = [(m * l2, l2) for m in parse_values(args.m, "m") for l2 in parse_values(args.lambda2, "lambda2")]
    else:
        l1s = parse_values(args.lambda1, "lambda1")
        if args.lambda2 is None:
            lam_pairs = [(l, l) for l in l1s]
        else:
            lam_pairs = [(a, b) for a in l1s for b in parse_values(args.lambda2, "lambda2")]

    method = args.method
    rows, results = [], []
    for eps in eps_list:
        for t1 in t1s:
            for t2 in (t2s if t2s is not None else [t1]):
                for l1, l2 in lam_pairs:
                    cfg = DeadlineConfig(l1, l2, t1, t2)
                    if method == "exact":
                        res = exact_outage(cfg, eps)
                    elif method == "bruteforce":
                        res = brute_force_outage(cfg, eps)
                    else:
                        res = monte_carlo_outage(args.policy, cfg, eps, args.trials, args.seed)
                    results.append(res)
                    e = eps.as_tuple()
                    rows.append({
                        "t1": t1, "t2": t2, "lambda1": l1, "lambda2": l2,
                        "eps00": e[0], "eps01": e[1], "eps10": e[2], "eps11": e[3],
                        "pout": res.value, "method": res.method,
                        "trials": res.trials, "seed": res.seed, "stderr": res.stderr,
                    })

    seed = args.seed if method == "mc" else None
    if args.format == "json":
        meta = {"tool": "deadline-bcast", "version": __version__, "generator": GENERATOR_NAME, "seed": seed}
        body = results[0].to_dict() if len(results) == 1 else [r.to_dict() for r in results]
        _emit(json.dumps({"meta": meta, "results": body}, indent=2) + "\n", args.output)
    else:
        _emit(_csv_text(seed, OUTAGE_COLUMNS, rows), args.output)

    if args.gnuplot:
        axes = [c for c in ("lambda1", "lambda2", "t1", "t2", "eps00") if len({r[c] for r in rows}) > 1]
        Path(args.gnuplot).write_text(_gnuplot_script(args.output or "outage.csv", axes))
    return EXIT_OK


def cmd_policy_compare(args) -> int:
    eps = ErasureProbs.parse(args.eps)
    Ts = parse_values(args.t, "t", integer=True)
    columns = ["t", "lambda1", "lambda2", "full_exact", "current_mc", "current_stderr", "past_mc", "past_stderr", "ordered"]
    rows = []
    for T in Ts:
        cfg = DeadlineConfig(args.lambda1, args.lambda2, T, T)
        full = exact_outage(cfg, eps).value
        cur = monte_carlo_outage("current_csi", cfg, eps, args.trials, args.seed)
        past = monte_carlo_outage("past_csi", cfg, eps, args.trials, args.seed)
        ordered = (
            full <= cur.value + 3 * cur.stderr
            and cur.value <= past.value + 3 * math.hypot(cur.stderr, past.stderr)
        )
        rows.append({
            "t": T, "lambda1": cfg.lambda1, "lambda2": cfg.lambda2, "full_exact": full,
            "current_mc": cur.value, "current_stderr": cur.stderr,
            "past_mc": past.value, "past_stderr": past.stderr, "ordered": int(ordered),
        })
    _emit(_csv_text(args.seed, columns, rows), args.output)
    return EXIT_OK


def cmd_region(args) -> int:
    pattern = ErasurePattern.parse(args.pattern)
    verts = region_boundary(block_stats(pattern, args.t1))
    rows = [{"lambda1": a, "lambda2": b} for a, b in verts]
    _emit(_csv_text(None, ["lambda1", "lambda2"], rows), args.output)
    return EXIT_OK


def cmd_schedule(args) -> int:
    pattern = ErasurePattern.parse(args.pattern)
    t2 = args.t2 if args.t2 is not None else len(pattern)
    t1 = args.t1 if args.t1 is not None else t2
    cfg = DeadlineConfig(args.lambda1, args.lambda2, t1, t2)
    if args.policy == "greedy_full":
        out = greedy_full_csi(pattern, cfg)
    else:
        if args.eps is None:
            raise ConfigError(f"eps: required for policy {args.policy}")
        eps = ErasureProbs.parse(args.eps)
        l1, l2 = _check_causal(pattern, cfg)
        cost = build_cost_table(cfg.T, l1, l2, eps)
        if args.policy == "current_csi":
            out = current_csi_policy(pattern, cfg, cost)
        else:
            out = past_csi_policy(pattern, cfg, eps, cost)
    lines = out.trace_lines()
    lines.append("delivered1=" + ",".join(f"{d:g}" for d in out.delivered1) + f" delivered2={out.delivered2:g}")
    lines.append(f"met_deadlines={'true' if out.met_deadlines else 'false'}")
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def cmd_rate_solve(args) -> int:
    eps = ErasureProbs.parse(args.eps)
    sol = rate_solver(eps, args.t1, args.t2 if args.t2 is not None else args.t1, args.p, args.m)
    doc = {
        "meta": {"tool": "deadline-bcast", "version": __version__},
        "eps": list(eps.as_tuple()), "t1": args.t1, "t2": args.t2 if args.t2 is not None else args.t1,
        "p": args.p, "m": args.m, **sol.to_dict(),
    }
    _emit(json.dumps(doc, indent=2) + "\n", args.output)
    return EXIT_OK


def cmd_validate(args) -> int:
    results = run_checks(quick=args.quick)
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deadline-bcast", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"deadline-bcast {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="JSON file whose keys are this command's long options")
        p.add_argument("--output", "-o", help="write here instead of stdout")

    p = sub.add_parser("outage", help="global deadline outage probability (point or sweep)")
    p.add_argument("--t1", default="1", help="value, list or start:stop:step")
    p.add_argument("--t2", help="defaults to t1")
    p.add_argument("--lambda1", default="0")
    p.add_argument("--lambda2", help="defaults to lambda1")
    p.add_argument("--m", help="ray slope(s); sets lambda1 = m * lambda2")
    p.add_argument("--eps", default="0.1,0.2,0.2,0.5", help="eps00,eps01,eps10,eps11")
    p.add_argument("--erasure-p", dest="erasure_p", help="per-user iid erasure probability (overrides --eps)")
    p.add_argument("--method", choices=sorted(METHOD_NAMES), default="exact")
    p.add_argument("--policy", choices=POLICIES, default="greedy_full", help="policy simulated by --method mc")
    p.add_argument("--trials", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--gnuplot", help="also write a gnuplot script for the data")
    common(p)
    p.set_defaults(func=cmd_outage)

    p = sub.add_parser("policy-compare", help="full vs current vs past CSI outage over T")
    p.add_argument("--t", default="1:10:1")
    p.add_argument("--lambda1", type=int, default=1)
    p.add_argument("--lambda2", type=int, default=1)
    p.add_argument("--eps", default="0.1,0.2,0.2,0.5")
    p.add_argument("--trials", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_policy_compare)

    p = sub.add_parser("region", help="cut-set region corners for one erasure pattern")
    p.add_argument("--pattern", required=True, help="e.g. 10,11,00,01,11,10")
    p.add_argument("--t1", type=int, required=True)
    common(p)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("schedule", help="per-slot trace of one policy on one pattern")
    p.add_argument("--pattern", required=True)
    p.add_argument("--t1", type=int)
    p.add_argument("--t2", type=int, help="defaults to the pattern length")
    p.add_argument("--lambda1", type=float, default=0.0)
    p.add_argument("--lambda2", type=float, default=0.0)
    p.add_argument("--policy", choices=POLICIES, default="greedy_full")
    p.add_argument("--eps", help="needed by the causal policies")
    common(p)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("rate-solve", help="largest rates on a ray meeting a target outage")
    p.add_argument("--eps", default="0.1,0.2,0.2,0.5")
    p.add_argument("--t1", type=int, required=True)
    p.add_argument("--t2", type=int)
    p.add_argument("--p", type=float, required=True, help="tolerable outage probability")
    p.add_argument("--m", type=float, default=1.0, help="lambda1 = m * lambda2")
    common(p)
    p.set_defaults(func=cmd_rate_solve)

    p = sub.add_parser("validate", help="run the oracle and invariant checks")
    p.add_argument("--quick", action="store_true")
    p.set_defaults(func=cmd_validate)
    parser.subcommands = sub.choices
    return parser


def _config_path(argv: list[str]) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _load_config(sub_parser: argparse.ArgumentParser, command: str, path: str) -> None:
    """Install a JSON experiment config as defaults on ``sub_parser``."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be a JSON object")
    actions = {a.dest: a for a in sub_parser._actions if a.dest not in ("help", "config")}
    defaults = {}
    for key, value in doc.items():
        action = actions.get(key.replace("-", "_"))
        if action is None:
            raise ConfigError(f"config: unknown field {key!r} for command {command}")
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        if isinstance(action, argparse._StoreTrueAction):
            if not isinstance(value, bool):
                raise ConfigError(f"config: field {key!r} must be true or false")
        elif action.type is None:
            value = str(value)
        else:
            try:
                value = action.type(value)
            except (TypeError, ValueError):
                raise ConfigError(f"config: field {key!r} has invalid value {value!r}") from None
        if action.choices is not None and value not in action.choices:
            raise ConfigError(f"config: field {key!r} must be one of {', '.join(map(str, action.choices))}")
        action.required = False
        defaults[action.dest] = value
    sub_parser.set_defaults(**defaults)


def parse_args(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    path = _config_path(argv)
    command = next((a for a in argv if not a.startswith("-")), None)
    if path and command in parser.subcommands:
        _load_config(parser.subcommands[command], command, path)
    # Flags given on the command line override config-file values.
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(parser, argv)
        return args.func(args)
    except GuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
