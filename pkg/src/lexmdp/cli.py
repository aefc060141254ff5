"""Command-line entry points.

Exit codes: 0 success, 1 usage error, 2 validation/format error,
3 solver precondition error, 4 verification failure. Default
tolerances honour the LEXMDP_EPS / LEXMDP_ETA environment variables.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .errors import (
    EnumerationCapError,
    ModelFormatError,
    ModelValidationError,
    PreconditionError,
)
from .formats import (
    build_header,
    dump_json,
    load_model,
    load_strategy,
    reach_result_document,
    safety_result_document,
    save_model,
    save_strategy,
    simulation_document,
)
from .lake import (
    SlipParams,
    benchmark_csv,
    benchmark_json,
    generate_layout,
    layout_to_mdp,
    render_layout,
    run_benchmark,
)
from .model import convert_mode
from .numeric import DEFAULT_EPS, DEFAULT_ETA, EXACT, FLOAT
from .oracle import simulate
from .prism import export_prism
from .reach import solve_reach_length
from .safety import solve_safety_mp
from .verify import run_verification, verification_document, verification_table


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _env_float(name: str, default: float) -> float:
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise UsageError(f"{name} must be a float, got {raw!r}") from exc


def _add_tolerance_args(sub):
    sub.add_argument("--eps", type=float, default=None,
                     help="float-mode value iteration tolerance "
                          f"(default {DEFAULT_EPS}, env LEXMDP_EPS)")
    sub.add_argument("--eta", type=float, default=None,
                     help="float-mode optimal-action slack "
                          f"(default {DEFAULT_ETA}, env LEXMDP_ETA)")


def _tolerances(args) -> tuple[float, float]:
    eps = args.eps if args.eps is not None else _env_float("LEXMDP_EPS", DEFAULT_EPS)
    eta = args.eta if args.eta is not None else _env_float("LEXMDP_ETA", DEFAULT_ETA)
    if eps <= 0 or eta <= 0:
        raise UsageError("tolerances must be positive")
    return eps, eta


def _emit(document: dict, out: str | None) -> None:
    text = dump_json(document)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _loaded_model(args):
    model = load_model(args.model)
    if getattr(args, "mode", None) and args.mode != model.mode:
        model = convert_mode(model, args.mode)
    return model


def _label_states(model, label: str):
    if label == "target":
        return model.target_set
    if label == "bad":
        return model.bad_set
    raise UsageError(f"unknown label {label!r}; the model format defines target/bad")


def cmd_solve_reach(args) -> int:
    eps, eta = _tolerances(args)
    model = _loaded_model(args)
    targets = _label_states(model, args.target_label)
    result = solve_reach_length(model, targets=targets, eps=eps, eta=eta)
    header = build_header(mode=model.mode, seed=None, eps=eps, eta=eta)
    _emit(reach_result_document(result, model, header), args.out)
    if args.strategy_out:
        save_strategy(model, result.strategy, args.strategy_out, header)
    return 0


def cmd_solve_safety(args) -> int:
    eps, eta = _tolerances(args)
    model = _loaded_model(args)
    bad = _label_states(model, args.bad_label)
    result = solve_safety_mp(model, bad=bad, eps=eps, eta=eta)
    header = build_header(mode=model.mode, seed=None, eps=eps, eta=eta)
    _emit(safety_result_document(result, model, header), args.out)
    if args.strategy_out:
        save_strategy(model, result.strategy, args.strategy_out, header)
    return 0


def cmd_gen_lake(args) -> int:
    slip = SlipParams(args.slip_intended, args.slip_side)
    layout = generate_layout(args.seed, args.width, args.height,
                             args.wall_p, args.hole_p)
    model = layout_to_mdp(layout, slip)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    layout_path = out_dir / f"lake_{args.seed}.txt"
    model_path = out_dir / f"lake_{args.seed}.json"
    layout_path.write_text(render_layout(layout) + "\n", encoding="utf-8")
    save_model(model, model_path)
    sys.stdout.write(f"{layout_path}\n{model_path}\n")
    return 0


def _parse_dims(raw: str) -> tuple[int, int]:
    try:
        w, h = raw.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise UsageError(f"--dims expects WxH, got {raw!r}") from exc


def cmd_bench(args) -> int:
    eps, eta = _tolerances(args)
    width, height = _parse_dims(args.dims)
    slip = SlipParams(args.slip_intended, args.slip_side)
    report = run_benchmark(
        args.count, args.seed, width, height, args.wall_p, args.hole_p,
        slip, EXACT, eps=eps, eta=eta,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "bench.csv").write_text(benchmark_csv(report), encoding="utf-8")
    (out_dir / "bench.json").write_text(
        dump_json(benchmark_json(report)), encoding="utf-8"
    )
    written = [out_dir / "bench.csv", out_dir / "bench.json"]
    if not args.no_figures:
        from .figures import render_benchmark_figures

        written += render_benchmark_figures(report, out_dir)
    agg = report.aggregates
    ratios = agg["ratios"]
    sys.stdout.write("\n".join(str(p) for p in written) + "\n")
    sys.stdout.write(
        f"layouts={agg['layouts']} solved={agg['solved']} "
        f"unreachable={agg['unreachable']}\n"
    )
    if ratios["count"]:
        sys.stdout.write(
            "ratio>=2: {:.2f}  ratio>=10: {:.2f}  ratio>=1000: {:.2f}\n".format(
                ratios["fraction_ge_2"], ratios["fraction_ge_10"],
                ratios["fraction_ge_1000"],
            )
        )
    return 0


def cmd_verify(args) -> int:
    results = run_verification(
        instances=args.instances, max_states=args.max_states, seed=args.seed
    )
    document = verification_document(
        results, seed=args.seed, instances=args.instances,
        max_states=args.max_states,
    )
    sys.stdout.write(verification_table(results) + "\n")
    if args.json_out:
        Path(args.json_out).write_text(dump_json(document), encoding="utf-8")
    return 0 if document["all_passed"] else 4


def cmd_simulate(args) -> int:
    model = _loaded_model(args)
    strategy = load_strategy(args.strategy, model)
    stats = simulate(model, strategy, model.initial_state,
                     args.episodes, args.horizon, args.seed)
    header = build_header(mode=model.mode, seed=args.seed)
    _emit(simulation_document(stats, header), args.out)
    return 0


def cmd_export_prism(args) -> int:
    model = _loaded_model(args)
    sys.stdout.write(export_prism(model))
    return 0


def build_parser() -> _Parser:
    parser = _Parser(
        prog="lexmdp",
        description="Lexicographic bi-objective MDP solvers with a gridworld "
                    "benchmark and a brute-force verification oracle.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-reach", help="maximize reach probability, then "
                                           "minimize conditional expected length")
    p.add_argument("--model", required=True)
    p.add_argument("--target-label", default="target")
    p.add_argument("--mode", choices=(EXACT, FLOAT), default=None)
    p.add_argument("--out", default=None, help="result JSON path (default stdout)")
    p.add_argument("--strategy-out", default=None)
    _add_tolerance_args(p)
    p.set_defaults(func=cmd_solve_reach)

    p = sub.add_parser("solve-safety", help="maximize safety probability, then "
                                            "maximize conditional mean payoff")
    p.add_argument("--model", required=True)
    p.add_argument("--bad-label", default="bad")
    p.add_argument("--mode", choices=(EXACT, FLOAT), default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--strategy-out", default=None)
    _add_tolerance_args(p)
    p.set_defaults(func=cmd_solve_safety)

    p = sub.add_parser("gen-lake", help="generate a slippery-grid layout and model")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--width", type=int, default=10)
    p.add_argument("--height", type=int, default=10)
    p.add_argument("--wall-p", type=float, default=0.1)
    p.add_argument("--hole-p", type=float, default=0.1)
    p.add_argument("--slip-intended", type=int, default=10)
    p.add_argument("--slip-side", type=int, default=1)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_gen_lake)

    p = sub.add_parser("bench", help="batch benchmark against careless baselines")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dims", default="10x10")
    p.add_argument("--wall-p", type=float, default=0.1)
    p.add_argument("--hole-p", type=float, default=0.1)
    p.add_argument("--slip-intended", type=int, default=10)
    p.add_argument("--slip-side", type=int, default=1)
    p.add_argument("--out-dir", default="bench_out")
    p.add_argument("--no-figures", action="store_true")
    _add_tolerance_args(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="run the solver-vs-oracle check battery")
    p.add_argument("--instances", type=int, default=25)
    p.add_argument("--max-states", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json-out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="seeded Monte-Carlo rollouts of a strategy")
    p.add_argument("--model", required=True)
    p.add_argument("--strategy", required=True)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mode", choices=(EXACT, FLOAT), default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("export-prism", help="print the model in PRISM syntax")
    p.add_argument("--model", required=True)
    p.add_argument("--mode", choices=(EXACT, FLOAT), default=None)
    p.set_defaults(func=cmd_export_prism)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ModelFormatError, ModelValidationError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except (PreconditionError, EnumerationCapError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
