"""Evaluation protocol, metrics aggregation, plots, and replay checking.

Every pruning strategy is evaluated on identical environment seeds (paired
comparison); reports are deterministic byte-for-byte given (spec, config).
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .gridworld import EnvConfig
from .policy import GtrxlPolicy, load_checkpoint
from .trainer import (
    STRATEGIES,
    STRATEGY_LEARNED,
    STRATEGY_LEARNED_NOISY,
    STRATEGY_NONE,
    STRATEGY_RANDOM,
    EpisodeRunner,
    RunConfig,
    SimConfig,
)

log = logging.getLogger(__name__)


@dataclass
class EvalSpec:
    strategies: tuple[str, ...] = (STRATEGY_NONE, STRATEGY_RANDOM)
    n_simulations: int = 600
    step_budget: int | None = None  # None -> max robot moves
    checkpoint: str | None = None   # required for learned strategies
    seed_base: int = 0

    def validate(self) -> None:
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ValueError(f"unknown strategy {s!r}")
        needs_ckpt = any(s.startswith("learned") for s in self.strategies)
        if needs_ckpt and self.checkpoint is None:
            raise ValueError("learned strategies require a checkpoint path")
        if self.n_simulations < 1:
            raise ValueError("n_simulations must be >= 1")


@dataclass
class StrategyResult:
    records: list[dict] = field(default_factory=list)
    mean_coverage: float = 0.0
    std_coverage: float = 0.0
    mean_tree_size: float = 0.0
    std_tree_size: float = 0.0
    mean_size_reduction: float = 0.0  # vs the paired no-pruning twin, when present


@dataclass
class EvalReport:
    spec: EvalSpec
    step_budget: int
    strategies: dict[str, StrategyResult]

    def to_dict(self) -> dict:
        return {
            "spec": asdict(self.spec),
            "step_budget": self.step_budget,
            "strategies": {k: asdict(v) for k, v in self.strategies.items()},
        }


def aggregate(values: list[float]) -> tuple[float, float]:
    """Sample mean and standard deviation (n-1 denominator; 0 for a single record)."""
    if not values:
        raise ValueError("cannot aggregate an empty record set")
    mean = float(np.mean(values))
    if len(values) == 1:
        log.warning("single record: reporting std = 0 by convention")
        return mean, 0.0
    return mean, float(np.std(values, ddof=1))


def _episode_seed_for(seed_base: int, episode: int) -> int:
    return int(np.random.SeedSequence([seed_base, 0, episode, 0]).generate_state(1)[0])


def run_episode(
    env_config: EnvConfig,
    sim_config: SimConfig,
    strategy: str,
    episode: int,
    seed_base: int,
    step_budget: int,
    policy: GtrxlPolicy | None = None,
) -> dict:
    """One fixed-budget episode; returns its record."""
    runner = EpisodeRunner(
        env_config, sim_config, strategy, policy=policy,
        base_seed=seed_base, env_id=0, sample_actions=False, auto_reset=False,
    )
    runner.reset(episode, map_seed=_episode_seed_for(seed_base, episode))
    if step_budget < 1:
        raise ValueError("step_budget must be >= 1")
    steps = 0
    cause = "budget"
    while steps < step_budget:
        res = runner.step()
        steps += 1
        if res.done:
            cause = res.cause
            break
    nodes_added_total = runner.tree._next_id - 1
    return {
        "episode": episode,
        "strategy": strategy,
        "map_seed": runner.map_seed,
        "steps": steps,
        "final_coverage": res.coverage,
        "final_tree_size": len(runner.tree),
        "nodes_added_total": nodes_added_total,
        "reward_sum": runner.reward_sum,
        "mean_step_reward": runner.reward_sum / max(steps, 1),
        "cause": cause,
    }


def run_eval(
    spec: EvalSpec,
    env_config: EnvConfig,
    sim_config: SimConfig,
    log_path: str | None = None,
) -> EvalReport:
    """Paired-seed evaluation of the requested strategies.

    Strategy `none` skips pruning; `random` replaces the mixture with a
    uniform random prune set at the same rate; `learned` decodes the mean
    action; `learned-noisy` additionally enables gates plus trigonometric
    noise. Episode i of every strategy uses the identical map.
    """
    spec.validate()
    budget = spec.step_budget if spec.step_budget is not None else sim_config.rewards.max_moves
    policy = None
    if any(s.startswith("learned") for s in spec.strategies):
        policy, _ = load_checkpoint(spec.checkpoint)
    lines: list[str] = []
    header = {
        "type": "header", "kind": "eval", "spec": asdict(spec), "step_budget": budget,
        "env": asdict(env_config), "sim": asdict(sim_config),
    }
    lines.append(json.dumps(header, sort_keys=True))

    results: dict[str, StrategyResult] = {}
    for strategy in spec.strategies:
        sim = sim_config
        if strategy == STRATEGY_LEARNED_NOISY and not sim.pruner.noise_enabled:
            from dataclasses import replace
            sim = replace(sim, pruner=replace(sim.pruner, noise_enabled=True))
        recs = []
        for ep in range(spec.n_simulations):
            rec = run_episode(env_config, sim, strategy, ep, spec.seed_base, budget, policy)
            recs.append(rec)
            lines.append(json.dumps({**rec, "type": "episode"}, sort_keys=True))
        res = StrategyResult(records=recs)
        res.mean_coverage, res.std_coverage = aggregate([r["final_coverage"] for r in recs])
        res.mean_tree_size, res.std_tree_size = aggregate(
            [float(r["final_tree_size"]) for r in recs]
        )
        results[strategy] = res

    if STRATEGY_NONE in results:
        base = results[STRATEGY_NONE].records
        for strategy, res in results.items():
            if strategy == STRATEGY_NONE:
                continue
            reductions = [
                1.0 - r["final_tree_size"] / b["final_tree_size"]
                for r, b in zip(res.records, base)
                if b["final_tree_size"] > 0
            ]
            if reductions:
                res.mean_size_reduction = float(np.mean(reductions))

    report = EvalReport(spec=spec, step_budget=budget, strategies=results)
    for strategy, res in results.items():
        summary = asdict(res)
        summary.pop("records")
        lines.append(json.dumps({"type": "summary", "strategy": strategy, **summary}, sort_keys=True))
    if log_path is not None:
        os.makedirs(os.path.dirname(log_path) or ".", exist_ok=True)
        with open(log_path, "w") as f:
            f.write("\n".join(lines) + "\n")
    return report


# -- plots -------------------------------------------------------------------


def _ema(xs: list[float], alpha: float) -> list[float]:
    out: list[float] = []
    acc = None
    for x in xs:
        acc = x if acc is None else alpha * acc + (1 - alpha) * x
        out.append(acc)
    return out


def emit_training_plots(log_path: str, out_dir: str, ema_alpha: float | None = None) -> list[str]:
    """Value loss / episode reward / coverage vs timesteps, plus the raw data."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    updates = []
    with open(log_path) as f:
        for line in f:
            rec = json.loads(line)
            if rec.get("type") == "update":
                updates.append(rec)
    if not updates:
        raise ValueError(f"no update records in {log_path}")
    os.makedirs(out_dir, exist_ok=True)
    steps = [u["global_step"] for u in updates]
    series = {
        "value_loss": [u["value_loss"] for u in updates],
        "mean_episode_reward": [u["mean_episode_reward"] for u in updates],
        "mean_coverage": [u["mean_coverage"] for u in updates],
    }
    data_path = os.path.join(out_dir, "training_curves.jsonl")
    with open(data_path, "w") as f:
        for i, s in enumerate(steps):
            f.write(json.dumps({"global_step": s, **{k: v[i] for k, v in series.items()}},
                               sort_keys=True) + "\n")
    fig, axes = plt.subplots(1, 3, figsize=(14, 4))
    for ax, (name, ys) in zip(axes, series.items()):
        ax.plot(steps, ys, lw=1.0, label=name)
        if ema_alpha is not None:
            ax.plot(steps, _ema(ys, ema_alpha), lw=1.5, label="EMA")
            ax.legend()
        ax.set_xlabel("timesteps")
        ax.set_title(name.replace("_", " "))
    fig.tight_layout()
    img_path = os.path.join(out_dir, "training_curves.png")
    fig.savefig(img_path, dpi=120)
    plt.close(fig)
    return [img_path, data_path]


def emit_eval_plot(report: EvalReport, out_dir: str) -> str:
    """Per-strategy final-coverage bar chart with std whiskers."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    names = list(report.strategies)
    means = [100 * report.strategies[n].mean_coverage for n in names]
    stds = [100 * report.strategies[n].std_coverage for n in names]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(names, means, yerr=stds, capsize=4, color="#4878cf")
    ax.set_ylabel("final explored area (%)")
    fig.tight_layout()
    path = os.path.join(out_dir, "eval_coverage.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


# -- replay ------------------------------------------------------------------


class ReplayDivergence(RuntimeError):
    pass


def _load_records(path: str) -> tuple[dict, list[dict]]:
    with open(path) as f:
        lines = [json.loads(line) for line in f if line.strip()]
    if not lines or lines[0].get("type") != "header":
        raise ValueError(f"{path} is not a produced log (missing header)")
    return lines[0], lines[1:]


def replay(log_path: str, workdir: str) -> int:
    """Re-execute a training or eval log from its recorded config and seeds.

    Raises ReplayDivergence at the first record that differs; returns the
    number of records verified.
    """
    from .configs import run_config_from_dict

    header, records = _load_records(log_path)
    os.makedirs(workdir, exist_ok=True)
    if header["kind"] == "train":
        run = run_config_from_dict(header["config"])
        run.out_dir = workdir
        from .trainer import train
        new_path = train(run)
    elif header["kind"] == "eval":
        from .configs import env_config_from_dict, sim_config_from_dict
        spec_d = dict(header["spec"])
        spec_d["strategies"] = tuple(spec_d["strategies"])
        spec = EvalSpec(**spec_d)
        new_path = os.path.join(workdir, "eval_log.jsonl")
        run_eval(spec, env_config_from_dict(header["env"]),
                 sim_config_from_dict(header["sim"]), log_path=new_path)
    else:
        raise ValueError(f"unknown log kind {header['kind']!r}")

    _, new_records = _load_records(new_path)
    for i, (old, new) in enumerate(zip(records, new_records)):
        if old != new:
            raise ReplayDivergence(
                f"record {i} diverged:\n  logged:   {json.dumps(old, sort_keys=True)}\n"
                f"  replayed: {json.dumps(new, sort_keys=True)}"
            )
    if len(records) != len(new_records):
        raise ReplayDivergence(
            f"record count changed: {len(records)} logged vs {len(new_records)} replayed"
        )
    return len(records)
