"""``grpsim`` command line.

Exit codes: 0 pass, 2 invalid input, 3 I/O failure, 4 a requested check
failed. ``GRP_LOG`` sets the log level (``DEBUG``, ``INFO``, ...).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import ExitStack
from pathlib import Path

from grpsim import __version__
from grpsim.checker import CHECK_NAMES, evaluate
from grpsim.gen import Kind, generate
from grpsim.oracle import sweep
from grpsim.scenario_io import dump_scenario, load_scenario
from grpsim.sim import ScenarioError, Simulator

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_CHECK = 0, 2, 3, 4
DEFAULT_CHECKS = ("attractor", "continuity")
MAX_SWEEP_N = 8

log = logging.getLogger("grpsim")


def _setup_logging() -> None:
    name = os.environ.get("GRP_LOG", "WARNING").upper()
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if not isinstance(logging.getLevelName(name), int):
        log.warning("unknown GRP_LOG level %r, using WARNING", name)


def _checks(text: str) -> tuple[str, ...]:
    names = tuple(x.strip() for x in text.split(",") if x.strip())
    bad = [x for x in names if x not in CHECK_NAMES]
    if bad:
        raise argparse.ArgumentTypeError(
            f"unknown check(s) {', '.join(bad)}; choose from {', '.join(CHECK_NAMES)}"
        )
    return names


def _positive(text: str) -> int:
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {val}")
    return val


def _open_out(stack: ExitStack, path: str | None):
    if path is None:
        return None
    if path == "-":
        return sys.stdout
    return stack.enter_context(open(path, "w", encoding="utf-8", buffering=1))


def run_one(
    scenario: str,
    seed: int | None = None,
    dmax: int | None = None,
    trace_out: str | None = None,
    verdict_out: str | None = None,
    checks: tuple[str, ...] = DEFAULT_CHECKS,
    lockstep: bool = False,
) -> tuple[int, str]:
    """Simulate one scenario file; returns ``(exit code, message)``."""
    try:
        sc = load_scenario(scenario, seed=seed, dmax=dmax)
    except ScenarioError as exc:
        return EXIT_INVALID, f"{scenario}: {exc}"
    except OSError as exc:
        return EXIT_IO, f"{scenario}: {exc}"

    try:
        with ExitStack() as stack:
            trace_fh = _open_out(stack, trace_out)

            def stream(snap):
                if trace_fh is not None:
                    trace_fh.write(snap.render() + "\n")

            trace = Simulator(sc, lockstep=lockstep, on_snapshot=stream).run()
            verdict = evaluate(trace.snapshots, sc.dmax)
            results = {name: verdict.check(name) for name in checks}
            verdict_fh = _open_out(stack, verdict_out)
            if verdict_fh is not None:
                verdict_fh.write(verdict.to_json(results))
    except OSError as exc:
        return EXIT_IO, f"{scenario}: {exc}"

    failed = [k for k, ok in results.items() if not ok]
    if failed:
        return EXIT_CHECK, f"{scenario}: failed {', '.join(failed)}"
    return EXIT_OK, f"{scenario}: ok ({', '.join(checks) or 'no checks'})"


def _per_file(base: str | None, scenario: str, suffix: str, many: bool) -> str | None:
    if base is None or not many or base == "-":
        return base
    return str(Path(base) / (Path(scenario).stem + suffix))


def cmd_run(args: argparse.Namespace) -> int:
    many = len(args.scenario) > 1
    if many:
        for d in (args.trace_out, args.verdict_out):
            if d not in (None, "-"):
                try:
                    Path(d).mkdir(parents=True, exist_ok=True)
                except OSError as exc:
                    print(f"grpsim: {exc}", file=sys.stderr)
                    return EXIT_IO
    jobs = [
        (
            path,
            args.seed,
            args.dmax,
            _per_file(args.trace_out, path, ".trace.jsonl", many),
            _per_file(args.verdict_out, path, ".verdict.json", many),
            args.check,
            args.lockstep,
        )
        for path in args.scenario
    ]
    if args.jobs > 1 and many:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run_one, *zip(*jobs)))
    else:
        results = [run_one(*job) for job in jobs]
    for _, msg in results:
        print(msg, file=sys.stderr)
    # The most severe class wins: I/O, then invalid input, then checks.
    codes = {code for code, _ in results}
    for code in (EXIT_IO, EXIT_INVALID, EXIT_CHECK):
        if code in codes:
            return code
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    try:
        text = dump_scenario(generate(args.kind, args.n, args.dmax, args.seed, args.loss_bound))
    except (ScenarioError, ValueError) as exc:
        print(f"grpsim: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        if args.out in (None, "-"):
            sys.stdout.write(text)
        else:
            Path(args.out).write_text(text, encoding="utf-8")
    except OSError as exc:
        print(f"grpsim: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_oracle_sweep(args: argparse.Namespace) -> int:
    if args.max_n > MAX_SWEEP_N or args.max_n < 2:
        print(f"grpsim: --max-n must be in [2, {MAX_SWEEP_N}]", file=sys.stderr)
        return EXIT_INVALID
    report = sweep(args.max_n, range(1, args.dmax_max + 1))
    for line in report.lines():
        print(line, file=sys.stderr)
    try:
        if args.out in (None, "-"):
            sys.stdout.write(report.to_json())
        else:
            Path(args.out).write_text(report.to_json(), encoding="utf-8")
    except OSError as exc:
        print(f"grpsim: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grpsim", description="GRP group-membership simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate scenario files and check the trace")
    p.add_argument("--scenario", action="append", required=True, metavar="PATH",
                   help="scenario YAML; repeat for several files")
    p.add_argument("--seed", type=int, help="override the channel seed")
    p.add_argument("--dmax", type=_positive, help="override dmax")
    p.add_argument("--trace-out", metavar="PATH",
                   help="JSON-lines trace ('-' for stdout; a directory with several scenarios)")
    p.add_argument("--verdict-out", metavar="PATH",
                   help="verdict JSON ('-' for stdout; a directory with several scenarios)")
    p.add_argument("--check", type=_checks, default=DEFAULT_CHECKS, metavar="LIST",
                   help=f"comma-separated subset of {','.join(CHECK_NAMES)} (default: %(default)s)")
    p.add_argument("--lockstep", action="store_true", help="align timers to multiples of their periods")
    p.add_argument("--jobs", type=_positive, default=1, help="worker processes for several scenarios")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gen", help="write a generated scenario")
    p.add_argument("--kind", type=Kind, choices=list(Kind), required=True, metavar="KIND",
                   help=", ".join(k.value for k in Kind))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dmax", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loss-bound", type=int, help="bounded loss: at most K consecutive drops per link")
    p.add_argument("--out", metavar="PATH", help="output YAML (default stdout)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("oracle-sweep", help="compare the compatibility test with brute force")
    p.add_argument("--max-n", type=int, default=7)
    p.add_argument("--dmax-max", type=_positive, default=3)
    p.add_argument("--out", metavar="PATH", help="report JSON (default stdout)")
    p.set_defaults(func=cmd_oracle_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
