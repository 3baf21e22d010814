"""``qte-audit`` command line."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import attacks as atk
from .audit import MAX_DIM_CAP, REGISTRY, AuditCase, emit_report, list_audits, run_audit
from .circuits import DimensionCapError, dim_cap
from .io import ExpressionError, SchemaError, load_channel, parse_expression
from .schemes import correctness_gap, encryption_gap, tamper_profile

ATTACK_NAMES = ("identity", "bitflip", "double_split", "share_split", "full_measure",
                "random_isometry", "cgm")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qte-audit", description="Numerical audits of tamper-evident encryption.")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list registered audit cases")

    run = sub.add_parser("run", help="run one audit case or all of them")
    run.add_argument("--case", default="all", help="case id such as T05, or 'all'")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--trials", type=int, default=None, help="override the trial count where a case has one")
    run.add_argument("--dim-cap", type=int, default=MAX_DIM_CAP)
    run.add_argument("--out", type=Path, default=None, help="write the report here instead of stdout")
    run.add_argument("--format", choices=("json", "csv", "text"), default="text")

    scheme = sub.add_parser("scheme", help="evaluate a construction")
    ssub = scheme.add_subparsers(dest="scheme_command", required=True)
    ev = ssub.add_parser("eval", help="evaluate a metric on a construction expression")
    ev.add_argument("--expr", required=True, help="e.g. 'double(conj_parity_pad(n=3))'")
    ev.add_argument("--metric", choices=("eps", "alpha", "profile"), default="eps")
    ev.add_argument("--attack", default="identity",
                    help=f"one of {', '.join(ATTACK_NAMES)}, or a channel file path")
    ev.add_argument("--messages", nargs=2, type=int, default=(0, 1), metavar=("M0", "M1"),
                    help="message indices compared by the profile metric")
    ev.add_argument("--seed", type=int, default=0)
    return p


def _cmd_list() -> int:
    for e in list_audits():
        print(f"{e['id']}  {e['tag']:<42} {e['title']}")
    return 0


def _cmd_run(args) -> int:
    ids = list(REGISTRY) if args.case == "all" else [args.case]
    unknown = [i for i in ids if i not in REGISTRY]
    if unknown:
        print(f"unknown case {unknown[0]!r}; see 'qte-audit list'", file=sys.stderr)
        return 2
    if not 1 <= args.dim_cap <= MAX_DIM_CAP:
        print(f"--dim-cap must be in [1, {MAX_DIM_CAP}]", file=sys.stderr)
        return 2
    reports = []
    for cid in ids:
        params = {}
        if args.trials is not None and "trials" in REGISTRY[cid].defaults:
            params["trials"] = args.trials
        reports.append(run_audit(AuditCase(cid, params, args.seed, args.dim_cap)))
    body = emit_report(reports if args.case == "all" else reports[0], args.format)
    if args.out is None:
        sys.stdout.write(body.decode())
    else:
        args.out.write_bytes(body)
    return 0 if all(r.passed for r in reports) else 1


def _attack(name: str, scheme, m0, m1, seed: int):
    shape = scheme.cipher_shape
    if name == "cgm":
        return atk.cgm_distinguisher_attack(scheme, m0, m1)
    if name in ATTACK_NAMES:
        params = {"seed": seed} if name == "random_isometry" else {}
        return atk.builtin_attack(name, shape, **params)
    return load_channel(name)


def _cmd_scheme_eval(args) -> int:
    scheme = parse_expression(args.expr)
    out = {"expr": args.expr, "scheme": scheme.name, "metric": args.metric}
    if args.metric == "eps":
        out["value"] = correctness_gap(scheme).value
    elif args.metric == "alpha":
        out["value"] = encryption_gap(scheme).value
    else:
        m0, m1 = (scheme.messages[i] for i in args.messages)
        prof = tamper_profile(scheme, _attack(args.attack, scheme, m0, m1, args.seed), m0, m1)
        out.update(attack=args.attack, expectation=prof.expectation(), min_delta=prof.min_delta(),
                   max_distance=prof.max_distance())
    print(json.dumps(out, indent=2, default=str))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "list":
            return _cmd_list()
        if args.command == "run":
            return _cmd_run(args)
        with dim_cap(MAX_DIM_CAP):
            return _cmd_scheme_eval(args)
    except (ExpressionError, SchemaError, DimensionCapError, ValueError, IndexError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
