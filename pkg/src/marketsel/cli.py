"""Command-line interface.

Subcommands: ``run`` executes a built-in or JSON-described scenario and
writes artifacts, ``sweep`` drives a survival-time epsilon grid,
``verify`` runs the acceptance checks, ``list`` shows the catalog.

Exit codes: 0 success, 1 runtime failure (including failed checks),
2 usage or schema errors.  Artifacts carry no timestamps, so identical
invocations produce identical bytes; progress lines (with timing) go to
stderr only.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from .agents import AgentSpec
from .catalog import builtin_scenarios, builtin_sweeps, evaluate_checks, run_sweep
from .errors import MarketSelError, SchemaError
from .experiments import Scenario, dump_json, run_scenario, write_artifacts
from .market import MarketConfig
from .shift import ShiftSchedule
from .verify import CHECK_NAMES, run_checks

_NUMBER_ARRAY = {"type": "array", "items": {"type": "number"}, "minItems": 2}

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "market", "agents", "seeds"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "market": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n_states", "horizon"],
            "properties": {
                "n_states": {"type": "integer", "minimum": 2},
                "horizon": {"type": "integer", "minimum": 1},
                "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "strategy_floor": {"type": "number", "minimum": 0},
                "q": _NUMBER_ARRAY,
                "schedule": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["duration", "distribution"],
                        "properties": {
                            "duration": {"type": "integer", "minimum": 1},
                            "distribution": _NUMBER_ARRAY,
                        },
                    },
                },
                "initial_wealths": {"type": "array", "items": {"type": "number"}},
            },
        },
        "agents": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind"],
                "properties": {
                    "kind": {
                        "enum": [
                            "fixed", "bayes", "noisy_bayes", "robust_bayes",
                            "ucb", "ogd", "magic",
                        ]
                    },
                    "name": {"type": "string"},
                    "alpha": _NUMBER_ARRAY,
                    "models": {"type": "array", "items": _NUMBER_ARRAY, "minItems": 1},
                    "prior": {"type": "array", "items": {"type": "number"}},
                    "theta_a": _NUMBER_ARRAY,
                    "theta_b": _NUMBER_ARRAY,
                    "eta": {"type": "number", "minimum": 0},
                    "alpha0": _NUMBER_ARRAY,
                    "step_scale": {"type": "number", "exclusiveMinimum": 0},
                    "floor": {"type": "number", "minimum": 0},
                },
            },
        },
        "seeds": {
            "type": "object",
            "additionalProperties": False,
            "required": ["base", "count"],
            "properties": {
                "base": {"type": "integer", "minimum": 0},
                "count": {"type": "integer", "minimum": 1},
            },
        },
        "outputs": {
            "type": "array",
            "items": {
                "enum": [
                    "mean_trajectory", "regret_curve", "shifted_regret",
                    "robust_floor", "strategy_variance", "early_half_fraction",
                    "prices", "trace",
                ]
            },
        },
        "window": {"type": "integer", "minimum": 1},
    },
}

_DEFAULT_DOC_OUTPUTS = ("mean_trajectory", "regret_curve")


class UsageError(Exception):
    """Bad invocation or unreadable/invalid input document."""


def load_scenario_document(path: str) -> Scenario:
    """Parse and validate a scenario JSON document."""
    import jsonschema

    try:
        with open(path) as fh:
            raw = fh.read()
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from exc
    try:
        document = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        where = "$" + "".join(
            f"[{p!r}]" if isinstance(p, str) else f"[{p}]" for p in first.absolute_path
        )
        raise SchemaError(f"{path}: {where}: {first.message}")
    market = document["market"]
    if ("q" in market) == ("schedule" in market):
        raise SchemaError(f"{path}: $['market']: exactly one of 'q' or 'schedule' required")
    schedule = None
    if "schedule" in market:
        schedule = ShiftSchedule.from_dicts(market["schedule"])
    config = MarketConfig(
        n_states=market["n_states"],
        horizon=market["horizon"],
        delta=market.get("delta", 0.01),
        q=market.get("q"),
        schedule=schedule,
        initial_wealths=market.get("initial_wealths"),
        strategy_floor=market.get("strategy_floor", 1e-6),
        agents=[AgentSpec.from_dict(a) for a in document["agents"]],
    )
    try:
        config.validate()
    except MarketSelError as exc:
        raise SchemaError(f"{path}: $['market']: {exc}") from exc
    return Scenario(
        name=document["name"],
        description=document.get("description", ""),
        config=config,
        n_seeds=document["seeds"]["count"],
        base_seed=document["seeds"]["base"],
        outputs=tuple(document.get("outputs", _DEFAULT_DOC_OUTPUTS)),
        window=document.get("window", 10_000),
    )


def _out_root(explicit: str | None) -> str:
    if explicit:
        return explicit
    return os.environ.get("MSL_OUT", "out")


def _log(message: str) -> None:
    print(f"[{time.strftime('%H:%M:%S')}] {message}", file=sys.stderr)


def _print_summary_table(result) -> None:
    print(f"scenario {result.name}: T={result.horizon}, seeds={result.n_seeds}")
    header = f"{'agent':>6} {'kind':>13} {'terminal wealth':>16} {'regret (mean)':>14}"
    print(header)
    terminal = result.terminal_wealths.mean(axis=0)
    regrets = result.regrets.mean(axis=0)
    for n, kind in enumerate(result.agent_kinds):
        print(f"{n:>6} {kind:>13} {terminal[n]:>16.6f} {regrets[n]:>14.3f}")
    if result.shifted_regrets is not None:
        means = result.shifted_regrets.mean(axis=0)
        values = ", ".join(f"agent {n}: {v:.3f}" for n, v in enumerate(means))
        print(f"shifted regret (mean): {values}")
    for check in result.check_results:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"check {check['name']}: {status} - {check['detail']}")


def cmd_run(args) -> int:
    scenarios = builtin_scenarios()
    if args.scenario in scenarios:
        scenario = scenarios[args.scenario]
    elif args.scenario.endswith(".json") or os.path.sep in args.scenario:
        scenario = load_scenario_document(args.scenario)
    else:
        known = ", ".join(sorted(scenarios))
        raise UsageError(f"unknown scenario {args.scenario!r}; built-ins: {known}")
    _log(f"running {scenario.name}")
    started = time.time()
    result = run_scenario(
        scenario,
        horizon=args.horizon,
        n_seeds=args.seeds,
        base_seed=args.seed,
        n_workers=args.threads,
        keep_first_record=True,
    )
    evaluate_checks(scenario, result)
    _log(f"finished in {time.time() - started:.1f}s")
    out_dir = os.path.join(_out_root(args.out), scenario.name)
    written = write_artifacts(result, out_dir, trace_format=args.format)
    _print_summary_table(result)
    print("artifacts: " + ", ".join(written))
    if result.check_results and not all(c["passed"] for c in result.check_results):
        return 1
    return 0


def cmd_sweep(args) -> int:
    sweeps = builtin_sweeps()
    if args.sweep not in sweeps:
        raise UsageError(f"unknown sweep {args.sweep!r}; built-ins: {', '.join(sorted(sweeps))}")
    sweep = sweeps[args.sweep]
    epsilons = None
    if args.eps is not None:
        try:
            epsilons = tuple(float(e) for e in args.eps.split(",") if e.strip())
        except ValueError as exc:
            raise UsageError(f"bad --eps list: {exc}") from exc
        if not epsilons:
            raise UsageError("empty --eps grid")
    _log(f"running sweep {sweep.name}")
    started = time.time()
    result = run_sweep(sweep, epsilons=epsilons, n_seeds=args.seeds, n_workers=args.threads)
    _log(f"finished in {time.time() - started:.1f}s")
    out_dir = os.path.join(_out_root(args.out), f"sweep_{sweep.name}")
    os.makedirs(out_dir, exist_ok=True)
    exponent_path = os.path.join(out_dir, "exponent.json")
    dump_json(result.summary_document(), exponent_path)
    for point in result.points:
        print(
            f"eps={point['eps']:g}: tau={point['tau']}"
            + (" (censored)" if point["censored"] else "")
            + f"  [T={point['horizon']}, seeds={point['n_seeds']}]"
        )
    if result.fit:
        print(
            f"fitted exponent {result.fit['slope']:.3f} "
            f"(target {result.target_slope}, window {list(result.slope_window)}), "
            f"R^2 {result.fit['r_squared']:.3f}"
        )
    else:
        print("fit unavailable (zero or censored survival times)")
    print(f"artifacts: {exponent_path}")
    return 0 if result.passed else 1


def cmd_verify(args) -> int:
    names = None
    if args.checks:
        names = [c.strip() for c in args.checks.split(",") if c.strip()]
        unknown = set(names) - set(CHECK_NAMES)
        if unknown:
            raise UsageError(
                f"unknown checks: {sorted(unknown)}; see 'marketsel list'"
            )
    failures = 0

    def report(result):
        nonlocal failures
        status = "PASS" if result.passed else "FAIL"
        print(f"{status} {result.name}: {result.detail}")
        sys.stdout.flush()
        if not result.passed:
            failures += 1

    _log(f"acceptance checks at level {args.level}")
    run_checks(level=args.level, names=names, n_workers=args.threads, report=report)
    print(("all checks passed" if failures == 0 else f"{failures} check(s) failed"))
    return 0 if failures == 0 else 1


def cmd_list(args) -> int:
    print("scenarios:")
    for name, scenario in sorted(builtin_scenarios().items()):
        cfg = scenario.config
        print(
            f"  {name:<18} T={cfg.horizon:<8} seeds={scenario.n_seeds:<4} "
            f"agents={[spec.kind for spec in cfg.agents]}"
        )
        print(f"  {'':<18} {scenario.description}")
    print("sweeps:")
    for name, sweep in sorted(builtin_sweeps().items()):
        print(
            f"  {name:<18} eps={list(sweep.epsilons)} seeds={sweep.n_seeds} "
            f"target slope {sweep.target_slope}"
        )
        print(f"  {'':<18} {sweep.description}")
    print("checks:")
    for name in CHECK_NAMES:
        print(f"  {name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marketsel",
        description="Asset-market simulations with heterogeneous learning agents.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a built-in scenario or a JSON document")
    run_p.add_argument("scenario", help="built-in name or path to a scenario document")
    run_p.add_argument("--horizon", type=int, default=None, help="override the horizon")
    run_p.add_argument("--seeds", type=int, default=None, help="override the seed count")
    run_p.add_argument("--seed", type=int, default=None, help="override the base seed")
    run_p.add_argument("--out", default=None, help="output root (default $MSL_OUT or ./out)")
    run_p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="trace file format")
    run_p.add_argument("--threads", type=int, default=1, help="independent seed workers")
    run_p.set_defaults(fn=cmd_run)

    sweep_p = sub.add_parser("sweep", help="run a survival-time epsilon sweep")
    sweep_p.add_argument("sweep", help="built-in sweep name (obs1, obs2, obs3)")
    sweep_p.add_argument("--eps", default=None, help="comma-separated epsilon grid")
    sweep_p.add_argument("--seeds", type=int, default=None, help="override the seed count")
    sweep_p.add_argument("--out", default=None, help="output root (default $MSL_OUT or ./out)")
    sweep_p.add_argument("--threads", type=int, default=1, help="independent seed workers")
    sweep_p.set_defaults(fn=cmd_sweep)

    verify_p = sub.add_parser("verify", help="run the acceptance checks")
    verify_p.add_argument("level", nargs="?", default="full", choices=("fast", "full"))
    verify_p.add_argument("--checks", default=None, help="comma-separated check names")
    verify_p.add_argument("--threads", type=int, default=1, help="independent seed workers")
    verify_p.set_defaults(fn=cmd_verify)

    list_p = sub.add_parser("list", help="list scenarios, sweeps, and checks")
    list_p.set_defaults(fn=cmd_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (UsageError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MarketSelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1


if __name__ == "__main__":
    sys.exit(main())
