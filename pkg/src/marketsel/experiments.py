"""Scenario execution: multi-seed runs, trace statistics, artifacts.

A scenario bundles a market configuration with a seed range and a list
of requested statistics.  Seeds are independent (seed of run i is
base_seed + i) and may execute in parallel; all reductions combine
results in seed order, so a rerun with the same invocation reproduces
every artifact byte for byte.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError
from .market import MarketConfig, RunRecord, run_market
from .regret import build_ledger, hindsight_best, survival_time
from .rng import run_seed
from .shift import shifted_regret

__all__ = [
    "Scenario",
    "SummaryStats",
    "ScenarioResult",
    "run_scenario",
    "sliding_window_mean",
    "wealth_distribution",
    "write_artifacts",
]

HIST_BINS = 100
MAX_SERIES_POINTS = 1000
MAX_TRACE_CELLS = 4_000_000


def sliding_window_mean(series: np.ndarray, window: int = 10_000) -> np.ndarray:
    """Causal trailing mean; the first window-1 entries average the
    available prefix."""
    s = np.asarray(series, dtype=np.float64)
    if s.size == 0:
        raise InvalidInputError("empty series")
    if window < 1 or window > s.shape[0]:
        raise InvalidInputError("window must lie in [1, len(series)]")
    cum = np.concatenate([np.zeros((1,) + s.shape[1:]), np.cumsum(s, axis=0)])
    idx = np.arange(1, s.shape[0] + 1)
    lo = np.maximum(idx - window, 0)
    widths = (idx - lo).reshape((-1,) + (1,) * (s.ndim - 1))
    return (cum[idx] - cum[lo]) / widths


def wealth_distribution(
    wealth_paths, t_start: int, t_end: int, bins: int = HIST_BINS
) -> dict:
    """Pooled per-step wealth histogram per agent over [t_start, t_end).

    ``wealth_paths`` is an iterable of (T+1, N) arrays.  Returns bin
    counts on [0, 1] plus the exact pooled sample mean per agent.
    """
    counts = None
    total = None
    n_samples = 0
    edges = np.linspace(0.0, 1.0, bins + 1)
    for path in wealth_paths:
        path = np.asarray(path, dtype=np.float64)
        if not (0 <= t_start < t_end <= path.shape[0]):
            raise InvalidInputError("time range outside the trajectory")
        block = path[t_start:t_end]
        if counts is None:
            counts = np.zeros((block.shape[1], bins), dtype=np.int64)
            total = np.zeros(block.shape[1])
        for n in range(block.shape[1]):
            h, _ = np.histogram(block[:, n], bins=edges)
            counts[n] += h
        total += block.sum(axis=0)
        n_samples += block.shape[0]
    if counts is None:
        raise InvalidInputError("no trajectories given")
    return {
        "bin_edges": edges,
        "counts": counts,
        "sample_mean": total / n_samples,
        "n_samples": n_samples,
    }


@dataclass
class Scenario:
    """A named experiment: market configuration plus seed range.

    ``config`` carries the default horizon; ``schedule_builder``, when
    set, recomputes the shift schedule if the horizon is overridden
    (block boundaries typically scale with the horizon).
    """

    name: str
    config: MarketConfig
    n_seeds: int
    base_seed: int = 1000
    outputs: tuple = ("mean_trajectory",)
    window: int = 10_000
    hist_range: tuple | None = None  # fractions of horizon, e.g. (0.5, 1.0)
    checkpoints: tuple | None = None  # extra regret-curve times
    checks: tuple = ()
    description: str = ""
    schedule_builder: object = None  # picklable callable: horizon -> ShiftSchedule

    def config_for(self, horizon: int | None = None) -> MarketConfig:
        if horizon is None or horizon == self.config.horizon:
            return self.config
        cfg = replace(self.config, horizon=int(horizon))
        if self.schedule_builder is not None:
            cfg = replace(cfg, schedule=self.schedule_builder(int(horizon)))
        return cfg

    def to_document(self) -> dict:
        """Serializable scenario document (see cli module for the schema)."""
        cfg = self.config
        market = {
            "n_states": cfg.n_states,
            "delta": cfg.delta,
            "horizon": cfg.horizon,
            "strategy_floor": cfg.strategy_floor,
        }
        if cfg.q is not None:
            market["q"] = np.asarray(cfg.q, dtype=float).tolist()
        if cfg.schedule is not None:
            market["schedule"] = cfg.schedule.to_dict()
        if cfg.initial_wealths is not None:
            market["initial_wealths"] = np.asarray(
                cfg.initial_wealths, dtype=float
            ).tolist()
        return {
            "name": self.name,
            "description": self.description,
            "market": market,
            "agents": [spec.to_dict() for spec in cfg.agents],
            "seeds": {"base": self.base_seed, "count": self.n_seeds},
            "outputs": list(self.outputs),
            "window": self.window,
        }


@dataclass
class SummaryStats:
    """The headline statistics of a scenario run."""

    window: int
    window_times: np.ndarray
    window_means: np.ndarray  # (points, N)
    terminal_wealths: np.ndarray  # (n_seeds, N)
    regret_times: np.ndarray
    regret_curves: np.ndarray  # (points, N) mean over seeds
    survival_times: list
    fitted_exponents: dict = field(default_factory=dict)


@dataclass
class ScenarioResult:
    """Everything collected from executing a scenario."""

    name: str
    config: MarketConfig
    n_seeds: int
    base_seed: int
    outputs: tuple
    window: int
    terminal_wealths: np.ndarray  # (n_seeds, N)
    regrets: np.ndarray  # (n_seeds, N)
    benchmark_values: np.ndarray  # (n_seeds,)
    identity_residual_max: float
    conservation_residual_max: float
    clamp_totals: np.ndarray
    agent_kinds: list
    mean_trajectory: np.ndarray | None = None  # (T+1, N)
    regret_checkpoints: np.ndarray | None = None  # times (C,)
    regret_curve: np.ndarray | None = None  # (n_seeds, N, C)
    shifted_regrets: np.ndarray | None = None  # (n_seeds,)
    robust_floor_margins: np.ndarray | None = None  # (n_seeds,)
    strategy_var_first: np.ndarray | None = None  # (n_seeds, N)
    strategy_var_last: np.ndarray | None = None
    early_half_fraction: np.ndarray | None = None  # (n_seeds, N)
    histogram: dict | None = None
    first_record: RunRecord | None = None
    check_results: list = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return self.config.horizon

    def survival(self) -> list[dict]:
        out = []
        if self.mean_trajectory is None:
            return out
        for n in range(self.mean_trajectory.shape[1]):
            tau, censored = survival_time(self.mean_trajectory[:, n])
            out.append({"agent": n, "tau": tau, "censored": censored})
        return out

    def stats(self) -> SummaryStats:
        times, curves = (np.array([]), np.array([]))
        if self.mean_trajectory is not None:
            window = min(self.window, self.mean_trajectory.shape[0])
            smoothed = sliding_window_mean(self.mean_trajectory, window)
            times = _subsample_indices(smoothed.shape[0])
            curves = smoothed[times]
        return SummaryStats(
            window=self.window,
            window_times=times,
            window_means=curves,
            terminal_wealths=self.terminal_wealths,
            regret_times=(
                self.regret_checkpoints if self.regret_checkpoints is not None else np.array([])
            ),
            regret_curves=(
                self.regret_curve.mean(axis=0).T if self.regret_curve is not None else np.array([])
            ),
            survival_times=self.survival(),
        )

    def summary_document(self) -> dict:
        doc = {
            "name": self.name,
            "horizon": int(self.horizon),
            "n_seeds": int(self.n_seeds),
            "base_seed": int(self.base_seed),
            "agent_kinds": list(self.agent_kinds),
            "terminal_wealth": {
                "mean": self.terminal_wealths.mean(axis=0).tolist(),
                "median": np.median(self.terminal_wealths, axis=0).tolist(),
                "per_seed": _maybe_list(self.terminal_wealths),
            },
            "regret": {
                "mean": self.regrets.mean(axis=0).tolist(),
                "per_seed": _maybe_list(self.regrets),
            },
            "benchmark_value_mean": float(self.benchmark_values.mean()),
            "identity_residual_max": self.identity_residual_max,
            "conservation_residual_max": self.conservation_residual_max,
            "clamp_totals": self.clamp_totals.tolist(),
        }
        stats = self.stats()
        if stats.window_times.size:
            doc["window_means"] = {
                "window": int(stats.window),
                "times": stats.window_times.tolist(),
                "series": stats.window_means.T.tolist(),
            }
            doc["survival"] = self.survival()
        if self.regret_checkpoints is not None:
            doc["regret_curve"] = {
                "times": self.regret_checkpoints.tolist(),
                "mean": self.regret_curve.mean(axis=0).tolist(),
            }
        if self.shifted_regrets is not None:
            doc["shifted_regret"] = {
                "mean": self.shifted_regrets.mean(axis=0).tolist(),
                "per_seed": _maybe_list(self.shifted_regrets),
            }
        if self.robust_floor_margins is not None:
            doc["robust_floor_margin_min"] = float(self.robust_floor_margins.min())
        if self.strategy_var_first is not None:
            doc["strategy_variance"] = {
                "first_window": self.strategy_var_first.mean(axis=0).tolist(),
                "last_window": self.strategy_var_last.mean(axis=0).tolist(),
            }
        if self.early_half_fraction is not None:
            doc["early_half_fraction"] = self.early_half_fraction.mean(axis=0).tolist()
        if self.histogram is not None:
            doc["wealth_distribution"] = {
                "bins": HIST_BINS,
                "counts": self.histogram["counts"].tolist(),
                "sample_mean": self.histogram["sample_mean"].tolist(),
                "n_samples": int(self.histogram["n_samples"]),
            }
        if self.check_results:
            doc["checks"] = self.check_results
        return doc


def _maybe_list(arr: np.ndarray, limit: int = 20_000):
    return arr.tolist() if arr.size <= limit else None


def _subsample_indices(length: int, max_points: int = MAX_SERIES_POINTS) -> np.ndarray:
    if length <= max_points:
        return np.arange(length)
    return np.unique(np.linspace(0, length - 1, max_points).astype(np.int64))


def _checkpoints(horizon: int, extra: tuple | None = None, n_points: int = 24) -> np.ndarray:
    pts = np.geomspace(10, horizon, n_points).astype(np.int64)
    tail = [horizon, max(horizon // 5, 1)]
    if extra:
        tail += [int(c) for c in extra if 1 <= int(c) <= horizon]
    pts = np.unique(np.concatenate([pts[pts >= 1], tail]))
    return pts[pts <= horizon]


def _collect_seed(
    config: MarketConfig, outputs: tuple, window: int, hist_steps, extra_checkpoints=None
) -> dict:
    """Run one seed and extract the requested statistics."""
    need_prices = "prices" in outputs or "trace" in outputs
    record = run_market(config, record_prices=need_prices)
    ledger = build_ledger(record)
    out = {
        "terminal": record.terminal_wealths(),
        "regrets": ledger.regrets,
        "benchmark": ledger.benchmark_value,
        "identity": float(np.abs(ledger.identity_residuals()).max()),
        "clamps": record.clamp_counts,
        "kinds": record.agent_kinds,
    }
    conservation = float(np.abs(record.wealth_path.sum(axis=1) - 1.0).max())
    if need_prices:
        conservation = max(
            conservation, float(np.abs(record.prices.sum(axis=1) - 1.0).max())
        )
    out["conservation"] = conservation
    if "mean_trajectory" in outputs:
        out["trajectory"] = record.wealth_path
    if "regret_curve" in outputs:
        checkpoints = _checkpoints(config.horizon, extra_checkpoints)
        realized = record.realized_log_strategies()
        cum_util = np.cumsum(realized, axis=1)
        curve = np.empty((realized.shape[0], checkpoints.size))
        for j, c in enumerate(checkpoints):
            _, bench = hindsight_best(record.states[:c], config.n_states)
            curve[:, j] = bench - cum_util[:, c - 1]
        out["regret_checkpoints"] = checkpoints
        out["regret_curve"] = curve
    if "shifted_regret" in outputs and config.schedule is not None:
        realized = record.realized_log_strategies()
        out["shifted"] = np.array(
            [
                shifted_regret(realized[n], config.schedule, record.states, config.n_states)
                for n in range(realized.shape[0])
            ]
        )
    if "robust_floor" in outputs:
        out["floor_margin"] = _robust_floor_margin(record)
    if "strategy_variance" in outputs:
        span = min(10_000, config.horizon)
        first = record.strategies[:, :span, 0]
        last = record.strategies[:, -span:, 0]
        out["var_first"] = first.var(axis=1)
        out["var_last"] = last.var(axis=1)
    if "early_half_fraction" in outputs:
        span = min(10_000, config.horizon)
        out["early_half"] = (record.wealth_path[1 : span + 1] > 0.5).mean(axis=0)
    if hist_steps is not None:
        t0, t1 = hist_steps
        edges = np.linspace(0.0, 1.0, HIST_BINS + 1)
        block = record.wealth_path[t0:t1]
        counts = np.stack(
            [np.histogram(block[:, n], bins=edges)[0] for n in range(block.shape[1])]
        )
        out["hist_counts"] = counts
        out["hist_total"] = block.sum(axis=0)
        out["hist_n"] = block.shape[0]
    return out


def _robust_floor_margin(record: RunRecord) -> float:
    """Worst slack of the regularized-Bayes weight floor across agents."""
    from .agents import RobustBayesAgent
    from .market import _agent_instances

    margins = []
    for agent in _agent_instances(record.config):
        if not isinstance(agent, RobustBayesAgent):
            continue
        stream = agent.weight_stream(record.states)  # (T+1, K)
        t = np.arange(1, stream.shape[0], dtype=np.float64)
        eps = t**-2.0
        floors = eps / (1.0 + stream.shape[1] * eps)
        margins.append(float((stream[1:].min(axis=1) - floors).min()))
    if not margins:
        raise InvalidInputError("no regularized-Bayes agent in this scenario")
    return min(margins)


def _run_chunk(args) -> list[dict]:
    config, seeds, outputs, window, hist_steps, extra_checkpoints = args
    results = []
    for seed in seeds:
        cfg = replace(config, seed=seed)
        results.append(
            _collect_seed(cfg, outputs, window, hist_steps, extra_checkpoints)
        )
    return results


def run_scenario(
    scenario: Scenario,
    horizon: int | None = None,
    n_seeds: int | None = None,
    base_seed: int | None = None,
    n_workers: int = 1,
    extra_outputs: tuple = (),
    keep_first_record: bool = False,
) -> ScenarioResult:
    """Execute all seeds of a scenario and reduce the statistics.

    Results are combined in seed order whatever the worker count, and
    the whole computation is a pure function of (scenario, overrides).
    """
    config = scenario.config_for(horizon)
    config.validate()
    n_seeds = scenario.n_seeds if n_seeds is None else int(n_seeds)
    base_seed = scenario.base_seed if base_seed is None else int(base_seed)
    if n_seeds < 1:
        raise InvalidInputError("need at least one seed")
    outputs = tuple(dict.fromkeys(tuple(scenario.outputs) + tuple(extra_outputs)))
    hist_steps = None
    if scenario.hist_range is not None:
        f0, f1 = scenario.hist_range
        hist_steps = (int(f0 * config.horizon), int(f1 * config.horizon) + 1)

    seeds = [run_seed(base_seed, i) for i in range(n_seeds)]
    if n_workers > 1 and n_seeds > 1:
        chunks = np.array_split(np.asarray(seeds, dtype=np.uint64), n_workers)
        jobs = [
            (
                config,
                [int(s) for s in chunk],
                outputs,
                scenario.window,
                hist_steps,
                scenario.checkpoints,
            )
            for chunk in chunks
            if len(chunk)
        ]
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            per_seed = [r for chunk in pool.map(_run_chunk, jobs) for r in chunk]
    else:
        per_seed = _run_chunk(
            (config, seeds, outputs, scenario.window, hist_steps, scenario.checkpoints)
        )

    first = per_seed[0]
    n_agents = first["terminal"].size
    result = ScenarioResult(
        name=scenario.name,
        config=config,
        n_seeds=n_seeds,
        base_seed=base_seed,
        outputs=outputs,
        window=scenario.window,
        terminal_wealths=np.stack([r["terminal"] for r in per_seed]),
        regrets=np.stack([r["regrets"] for r in per_seed]),
        benchmark_values=np.array([r["benchmark"] for r in per_seed]),
        identity_residual_max=max(r["identity"] for r in per_seed),
        conservation_residual_max=max(r["conservation"] for r in per_seed),
        clamp_totals=np.sum([r["clamps"] for r in per_seed], axis=0),
        agent_kinds=first["kinds"],
    )
    if "trajectory" in first:
        acc = np.zeros_like(first["trajectory"])
        for r in per_seed:
            acc += r["trajectory"]
        result.mean_trajectory = acc / n_seeds
    if "regret_curve" in first:
        result.regret_checkpoints = first["regret_checkpoints"]
        result.regret_curve = np.stack([r["regret_curve"] for r in per_seed])
    if "shifted" in first:
        result.shifted_regrets = np.stack([r["shifted"] for r in per_seed])
    if "floor_margin" in first:
        result.robust_floor_margins = np.array([r["floor_margin"] for r in per_seed])
    if "var_first" in first:
        result.strategy_var_first = np.stack([r["var_first"] for r in per_seed])
        result.strategy_var_last = np.stack([r["var_last"] for r in per_seed])
    if "early_half" in first:
        result.early_half_fraction = np.stack([r["early_half"] for r in per_seed])
    if "hist_counts" in first:
        counts = np.sum([r["hist_counts"] for r in per_seed], axis=0)
        total = np.sum([r["hist_total"] for r in per_seed], axis=0)
        n_samples = sum(r["hist_n"] for r in per_seed)
        result.histogram = {
            "bin_edges": np.linspace(0.0, 1.0, HIST_BINS + 1),
            "counts": counts,
            "sample_mean": total / n_samples,
            "n_samples": n_samples,
        }
    if keep_first_record:
        result.first_record = run_market(
            replace(config, seed=seeds[0]), record_prices=True
        )
    return result


# ---------------------------------------------------------------------------
# artifacts


class _NumpyEncoder(json.JSONEncoder):
    def default(self, obj):
        if isinstance(obj, (np.integer,)):
            return int(obj)
        if isinstance(obj, (np.floating,)):
            return float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, (np.bool_,)):
            return bool(obj)
        return super().default(obj)


def to_json(document: dict) -> str:
    return json.dumps(document, indent=2, sort_keys=True, cls=_NumpyEncoder) + "\n"


def dump_json(document: dict, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(to_json(document))


def write_plot_svg(result: ScenarioResult, path: str) -> None:
    """Line rendering of the windowed mean wealth (plus terminal
    histogram when recorded).  Presentation only."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = result.name
    n_panels = 2 if result.histogram is not None else 1
    fig, axes = plt.subplots(1, n_panels, figsize=(6 * n_panels, 4))
    axes = np.atleast_1d(axes)
    stats = result.stats()
    ax = axes[0]
    if stats.window_times.size:
        for n in range(stats.window_means.shape[1]):
            ax.plot(
                stats.window_times,
                stats.window_means[:, n],
                label=f"agent {n} ({result.agent_kinds[n]})",
            )
        ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("step")
    ax.set_ylabel(f"wealth share ({result.window}-step window)")
    ax.set_title(result.name)
    ax.legend(loc="best", fontsize=8)
    if result.histogram is not None:
        ax = axes[1]
        edges = result.histogram["bin_edges"]
        centers = 0.5 * (edges[:-1] + edges[1:])
        for n in range(result.histogram["counts"].shape[0]):
            ax.step(centers, result.histogram["counts"][n], where="mid", label=f"agent {n}")
        ax.set_xlabel("wealth share")
        ax.set_ylabel("pooled step count")
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_artifacts(
    result: ScenarioResult, out_dir: str, trace_format: str = "csv"
) -> list[str]:
    """Write summary.json, the first-seed trace, and the plot."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    summary_path = os.path.join(out_dir, "summary.json")
    dump_json(result.summary_document(), summary_path)
    written.append(summary_path)
    record = result.first_record
    if record is not None:
        cells = record.strategies.size
        if cells <= MAX_TRACE_CELLS:
            seed = record.config.seed
            if trace_format == "csv":
                trace_path = os.path.join(out_dir, f"trace_{seed}.csv")
                with open(trace_path, "w") as fh:
                    fh.write(record.to_csv())
            else:
                trace_path = os.path.join(out_dir, f"trace_{seed}.json")
                dump_json(
                    {
                        "states": record.states,
                        "wealth_path": record.wealth_path,
                        "prices": record.prices,
                        "strategies": record.strategies,
                    },
                    trace_path,
                )
            written.append(trace_path)
    plot_path = os.path.join(out_dir, f"plot_{result.name}.svg")
    write_plot_svg(result, plot_path)
    written.append(plot_path)
    return written
