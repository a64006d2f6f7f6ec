"""Command-line front end: ``trapdoor <command> [flags]``.

Exit status is 0 on success, 1 on usage errors and 2 on data or contract errors.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence, TextIO

from trapdoor.distributions import (
    TrapdoorParams,
    parse_atom,
    pmf,
    read_dataset,
    sample,
    tv_decomposed,
    tv_exact_bruteforce,
    write_dataset,
)
from trapdoor.errors import StructuralError, TrapdoorError
from trapdoor.experiments import format_summary, read_config, run_sweep, summarize
from trapdoor.learners import LEARNER_IDS, LearnReport, PrivacyBudget, make_learner
from trapdoor.reductions import lift_product_samples, read_product_dataset

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    def __init__(self, message: str, help_text: str):
        super().__init__(message)
        self.help_text = help_text


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        raise UsageError(message, self.format_usage())


def format_number(x: float, digits: int | None = None) -> str:
    """Shortest round-trip form of ``x`` (at most 17 significant digits), or ``digits`` of them."""
    if digits is not None:
        return format(float(x), f".{digits}g")
    text = repr(float(x))
    return text[:-2] if text.endswith(".0") else text


def _vector(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated decimals, got {text!r}")


def format_report(learner: str, report: LearnReport, digits: int | None = None) -> str:
    """``learner,d,key_count,fallback_used,w,p_1,...,p_d`` on a single line."""
    est = report.estimate
    fields = [
        learner,
        str(report.inferred_d),
        str(report.key_count),
        "true" if report.fallback_used else "false",
        format_number(est.w, digits),
    ]
    fields.extend(format_number(v, digits) for v in est.p)
    return ",".join(fields)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trapdoor", description="Trapdoor distribution toolkit.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="command")
    sub.required = True

    def params_flags(p: argparse.ArgumentParser, with_p: bool = True) -> None:
        p.add_argument("--d", type=int, required=True, help="dimension (>= 2)")
        p.add_argument("--w", type=float, required=True, help="mixing weight of the key component")
        if with_p:
            p.add_argument("--p", type=_vector, required=True, help="comma-separated probabilities")

    p = sub.add_parser("sample", help="draw a dataset and write it to a file")
    params_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("pmf", help="probability of one atom")
    params_flags(p)
    p.add_argument("--atom", required=True, help="K:b1,...,bd or H:+-j")
    p.add_argument("--digits", type=int)

    p = sub.add_parser("tv", help="total variation distance of two class members")
    params_flags(p, with_p=False)
    p.add_argument("--a-p", type=_vector, required=True)
    p.add_argument("--b-p", type=_vector, required=True)
    p.add_argument("--brute", action="store_true", help="enumerate the full support")
    p.add_argument("--digits", type=int)

    p = sub.add_parser("learn", help="run a learner on a dataset file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--learner", choices=LEARNER_IDS, required=True)
    p.add_argument("--w", type=float, required=True)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--digits", type=int)

    p = sub.add_parser("lift", help="lift a product-dataset file to a trapdoor-dataset file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--w", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="run a Monte Carlo sweep from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--alpha", type=float, help="failure threshold for the printed summary")
    return parser


def _params(args: argparse.Namespace, p: Sequence[float]) -> TrapdoorParams:
    if len(p) != args.d:
        raise StructuralError(f"--d is {args.d} but the vector has {len(p)} entries")
    return TrapdoorParams(w=args.w, d=args.d, p=tuple(p))


def _run(args: argparse.Namespace, out: TextIO) -> None:
    cmd = args.command
    if cmd == "sample":
        write_dataset(sample(_params(args, args.p), args.n, args.seed), args.out)
    elif cmd == "pmf":
        params = _params(args, args.p)
        print(format_number(pmf(params, parse_atom(args.atom, args.d)), args.digits), file=out)
    elif cmd == "tv":
        a, b = _params(args, args.a_p), _params(args, args.b_p)
        tv = tv_exact_bruteforce(a, b) if args.brute else tv_decomposed(a, b)
        print(format_number(tv, args.digits), file=out)
    elif cmd == "learn":
        data = read_dataset(args.input)
        budget = None
        if args.learner != "nonprivate":
            if args.epsilon is None or args.delta is None:
                raise UsageError(f"--learner {args.learner} requires --epsilon and --delta", "")
            budget = PrivacyBudget(args.epsilon, args.delta)
        report = make_learner(args.learner, args.w, budget, args.seed)(data)
        print(format_report(args.learner, report, args.digits), file=out)
    elif cmd == "lift":
        write_dataset(lift_product_samples(read_product_dataset(args.input), args.w, args.seed), args.out)
    elif cmd == "sweep":
        config = read_config(args.config)
        rows = run_sweep(config, workers=args.workers)
        alpha = args.alpha if args.alpha is not None else config.alpha
        if alpha is not None:
            print(format_summary(summarize(rows, alpha)), file=out)


def dispatch(argv: Sequence[str], out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
        _run(args, out)
    except UsageError as exc:
        print(f"trapdoor: error: {exc}", file=err)
        if exc.help_text:
            print(exc.help_text, file=err, end="")
        return EXIT_USAGE
    except (TrapdoorError, OSError) as exc:
        print(f"trapdoor: {exc}", file=err)
        return EXIT_DATA
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    return EXIT_OK


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
