"""``mpstbus`` command line.

Exit status: 0 success, 1 a run or fuzz campaign found a violation,
2 usage or scenario syntax errors.
"""
from __future__ import annotations

import argparse
import sys

from ..errors import DSLSyntaxError
from .dsl import parse_scenario
from .executor import DEFAULT_TIMEOUT, MODES, Report, run
from .fuzz import FuzzConfig, fuzz
from .scenarios import BUILTINS, builtin


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mpstbus", description="Multiparty session bus runner.")
    sub = p.add_subparsers(dest="cmd", required=True)

    def run_opts(sp):
        sp.add_argument("--mode", choices=MODES, default="threads")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--trace", metavar="FILE", help="write the event trace to FILE")
        sp.add_argument("--stats", action="store_true", help="print runtime counters")
        sp.add_argument("--link-random", action="store_true",
                        help="pick keep boards at random (seeded by --seed)")
        sp.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT,
                        help="seconds without progress before declaring deadlock")

    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("file")
    run_opts(r)

    e = sub.add_parser("example", help="run a built-in scenario")
    e.add_argument("name", choices=sorted(BUILTINS) + ["queue"])
    e.add_argument("n", nargs="?", type=int, help="queue length (queue only)")
    run_opts(e)

    f = sub.add_parser("fuzz", help="fuzz random scenarios in both modes")
    f.add_argument("--iters", type=int, default=1000)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", default=".", help="directory for counterexample files")
    f.add_argument("--arity", type=int, help="fix the arity (default: random in 2..4)")
    f.add_argument("--mode", choices=MODES, action="append",
                   help="restrict to one mode (repeatable)")
    f.add_argument("--link-random", action="store_true")
    f.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    return p


def _report(rep: Report, args) -> int:
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write("\n".join(rep.trace) + "\n")
    for line in rep.oracle_log:
        print(line)
    if args.stats:
        for k, v in rep.stats.items():
            print(f"{k}={v}")
    print(rep.summary())
    for v in rep.violations:
        if v.trace and not args.trace:
            print("--- trace ---", file=sys.stderr)
            print("\n".join(v.trace), file=sys.stderr)
            break
    return 0 if rep.ok else 1


def main(argv: list[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    policy = "random" if args.link_random else "drain"

    if args.cmd == "fuzz":
        try:
            cfg = FuzzConfig(arity=args.arity)
        except ValueError as exc:
            print(f"mpstbus: {exc}", file=sys.stderr)
            return 2
        rep = fuzz(args.iters, args.seed, cfg, modes=tuple(args.mode or MODES), out_dir=args.out,
                   timeout=args.timeout, link_policy=policy)
        print(rep.summary())
        for line in rep.failures[:10]:
            print("  " + line)
        if rep.counterexample:
            print(f"counterexample: {rep.counterexample}")
        return 0 if rep.ok else 1

    try:
        if args.cmd == "run":
            with open(args.file) as fh:
                sc = parse_scenario(fh.read(), name=args.file)
        else:
            if args.n is not None and args.name != "queue":
                raise ValueError("only the queue example takes a length")
            sc = builtin(args.name, args.n)
    except DSLSyntaxError as exc:
        print(f"{getattr(args, 'file', args.cmd)}:{exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"mpstbus: {exc}", file=sys.stderr)
        return 2
    rep = run(sc, seed=args.seed, mode=args.mode, timeout=args.timeout, link_policy=policy)
    return _report(rep, args)


if __name__ == "__main__":
    sys.exit(main())
