"""Command-line interface: generate, tune, evaluate, sweep, verify.

Exit codes: 0 ok, 1 usage error, 2 validation error, 3 verification failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from . import workload as wl
from .errors import ValidationError, VerificationFailure
from .harness import evaluate_dirs, sweep, tune, write_run
from .tuners import ALGORITHMS, TunerOptions
from .verify import SUITES, run_suite

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_VERIFY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for validation here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_spec(text: str) -> wl.GeneratorSpec:
    """A preset name, a path to a JSON file, or an inline JSON object."""
    if text in wl.PRESETS:
        return wl.preset(text)
    if os.path.exists(text):
        with open(text) as fh:
            raw = fh.read()
    else:
        raw = text
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"--spec is neither a preset, a file nor JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("--spec JSON must be an object")
    base = wl.preset(data["preset"]) if "preset" in data else wl.GeneratorSpec()
    merged = {**base.to_dict(), **{k: v for k, v in data.items() if k != "preset"}}
    return wl.GeneratorSpec.from_dict(merged)


def _float_list(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _seed_list(text: str) -> list:
    """``0,3,5`` or a half-open range ``0:10``."""
    try:
        if ":" in text:
            lo, hi = text.split(":", 1)
            return list(range(int(lo), int(hi)))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected seeds like 0,1,2 or 0:10, got {text!r}")


def _add_tuning_args(p: argparse.ArgumentParser) -> None:
    d = TunerOptions()
    p.add_argument("--workload", required=True, help="workload JSON from `generate`")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="two-phase-greedy")
    p.add_argument("--wii", choices=("off", "bound", "coverage"), default=d.wii)
    p.add_argument("--budget", type=int, default=d.budget)
    p.add_argument("-K", type=int, default=d.K, help="maximum configuration size")
    p.add_argument("--step", type=int, default=d.step)
    p.add_argument("--sigma", type=float, default=d.sigma)
    p.add_argument("--tau", type=float, default=d.tau)
    p.add_argument("--theta", type=float, default=d.theta)
    p.add_argument("--esvs", choices=("heuristic", "generic", "fixed"), default=None,
                   help="verification scheme (default: heuristic for greedy, generic for mcts)")


def _options(args, **extra) -> TunerOptions:
    return TunerOptions(K=args.K, budget=args.budget, wii=args.wii, theta=args.theta,
                        esvs=args.esvs, step=args.step, sigma=args.sigma, tau=args.tau, **extra)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="esctune", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic workload")
    p.add_argument("--spec", default="default",
                   help=f"preset ({', '.join(sorted(wl.PRESETS))}), JSON file or inline JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("tune", help="run one tuning session and write its artifacts")
    _add_tuning_args(p)
    p.add_argument("--esc", choices=("off", "b", "i"), default="off")
    p.add_argument("--epsilon", type=float, default=TunerOptions.epsilon)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--adversarial", action="store_true", help="perturb the cost oracle")
    p.add_argument("-o", "--output", required=True, help="run directory")

    p = sub.add_parser("evaluate", help="compare a run with its ground-truth run")
    p.add_argument("--run", required=True)
    p.add_argument("--ground-truth", required=True)

    p = sub.add_parser("sweep", help="epsilon x variant x seed sweep as CSV")
    _add_tuning_args(p)
    p.add_argument("--epsilons", type=_float_list,
                   default=[0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10])
    p.add_argument("--seeds", type=_seed_list, default=[0])
    p.add_argument("--variants", default=None,
                   help="comma-separated subset of EscB,EscI,EscB-FixStep,EscI-FixStep,baseline")
    p.add_argument("--timing", action="store_true", help="add the (non-deterministic) ESV time column")
    p.add_argument("-o", "--output", default="-")

    p = sub.add_parser("verify", help="brute-force checks of the oracle and bounds")
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")
    p.add_argument("--seeds", type=_seed_list, default=list(range(10)))
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--spec", default="default")
    p.add_argument("--adversarial", action="store_true")
    return parser


def _cmd_generate(args) -> int:
    spec = _load_spec(args.spec)
    w = wl.generate_workload(spec, args.seed)
    wl.save(w, args.output)
    print(f"wrote {args.output}: {len(w.queries)} queries, {len(w.index_ids)} candidates")
    return EXIT_OK


def _cmd_tune(args) -> int:
    w = wl.load(args.workload)
    opts = _options(args, esc=args.esc, epsilon=args.epsilon, seed=args.seed)
    result = tune(w, args.algorithm, opts, adversarial=args.adversarial)
    write_run(result, w, args.output)
    print(f"{result.reason}: calls={result.calls_used} esvs={result.esv_count} "
          f"improvement={result.observed_improvement:.4f} config={wl.format_config(result.config)}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    metrics = evaluate_dirs(args.run, args.ground_truth)
    print(json.dumps(metrics.to_dict(), indent=1, sort_keys=True))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    w = wl.load(args.workload)
    kwargs = {}
    if args.variants:
        kwargs["variants"] = [v.strip() for v in args.variants.split(",") if v.strip()]
    text = sweep(w, args.algorithm, _options(args), args.epsilons, args.seeds,
                 timing=args.timing, **kwargs)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    return EXIT_OK


def _cmd_verify(args) -> int:
    spec = _load_spec(args.spec)
    suites = SUITES if args.suite == "all" else (args.suite,)
    failures = []
    for suite in suites:
        try:
            rep = run_suite(suite, args.seeds, args.samples, spec, args.adversarial)
            print("ok   " + rep.summary())
        except VerificationFailure as exc:
            print("FAIL " + str(exc))
            failures.append(exc)
    if failures:
        for exc in failures:
            for ce in exc.counterexamples[:20]:
                print("  " + json.dumps(ce, sort_keys=True, default=str), file=sys.stderr)
            if len(exc.counterexamples) > 20:
                print(f"  ... {len(exc.counterexamples) - 20} more", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


COMMANDS = {"generate": _cmd_generate, "tune": _cmd_tune, "evaluate": _cmd_evaluate,
            "sweep": _cmd_sweep, "verify": _cmd_verify}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"esctune: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except VerificationFailure as exc:
        print(f"esctune: verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except OSError as exc:
        print(f"esctune: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
