"""Command-line interface: train / eval / render / replay / plot."""

from __future__ import annotations

import argparse
import json
import sys

from .configs import (
    PROFILES,
    apply_dotted_overrides,
    make_run_config,
    run_config_from_dict,
)


def _load_config_file(path: str):
    with open(path) as f:
        return run_config_from_dict(json.load(f))


def _parse_overrides(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"override {pair!r} is not KEY=VALUE")
        key, value = pair.split("=", 1)
        out[key] = json.loads(value) if value and value[0] in "0123456789-[.tfn\"" else value
    return out


def _resolve_run(args) -> "RunConfig":
    if args.config:
        run = _load_config_file(args.config)
    else:
        run = make_run_config(args.scale)
    if getattr(args, "seed", None) is not None:
        run.seed = args.seed
    if getattr(args, "set", None):
        apply_dotted_overrides(run, _parse_overrides(args.set))
    return run


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="exploresparse",
        description="Frontier-exploration simulator with learned RRT-graph pruning.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run-config file")
    common.add_argument("--scale", choices=PROFILES, default="desk",
                        help="built-in config profile (ignored with --config)")
    common.add_argument("--seed", type=int, default=None, help="run seed")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted config override, e.g. ppo.lr=1e-4")

    pt = sub.add_parser("train", parents=[common], help="run PPO training")
    pt.add_argument("--out", default="runs/train", help="output directory")
    pt.add_argument("--steps", type=int, default=None, help="total environment steps")
    pt.add_argument("--resume", default=None, help="checkpoint to resume from")

    pe = sub.add_parser("eval", parents=[common], help="run the strategy evaluation")
    pe.add_argument("--strategy", action="append", default=None,
                    choices=["none", "random", "learned", "learned-noisy"],
                    help="strategy to evaluate (repeatable; default: none + random)")
    pe.add_argument("--n", type=int, default=100, help="simulations per strategy")
    pe.add_argument("--budget", type=int, default=None, help="per-sim step budget")
    pe.add_argument("--checkpoint", default=None, help="policy checkpoint for learned strategies")
    pe.add_argument("--out", default="runs/eval", help="output directory")

    pr = sub.add_parser("render", parents=[common], help="dump map images for an episode")
    pr.add_argument("--episode", type=int, default=0, help="episode index (seeds the map)")
    pr.add_argument("--steps", type=int, default=None, help="steps to simulate")
    pr.add_argument("--every", type=int, default=10, help="snapshot every N steps")
    pr.add_argument("--strategy", default="none",
                    choices=["none", "random", "learned", "learned-noisy"])
    pr.add_argument("--checkpoint", default=None)
    pr.add_argument("--out", default="runs/render", help="output directory")

    pp = sub.add_parser("replay", help="re-execute a log and check zero divergence")
    pp.add_argument("log", help="training or eval log (JSONL)")
    pp.add_argument("--workdir", default="runs/replay", help="scratch directory")

    pl = sub.add_parser("plot", help="emit plots from a training log or eval report")
    pl.add_argument("log", help="training or eval log (JSONL)")
    pl.add_argument("--out", default="runs/plots", help="output directory")
    pl.add_argument("--ema", type=float, default=None,
                    help="optional EMA smoothing factor in (0, 1); raw data is always emitted")
    return p


def cmd_train(args) -> int:
    from .trainer import train

    run = _resolve_run(args)
    run.out_dir = args.out
    if args.steps is not None:
        run.ppo.total_timesteps = args.steps
    path = train(run, resume_from=args.resume)
    print(f"training log: {path}")
    return 0


def cmd_eval(args) -> int:
    import os

    from .harness import EvalSpec, emit_eval_plot, run_eval

    run = _resolve_run(args)
    strategies = tuple(args.strategy) if args.strategy else ("none", "random")
    spec = EvalSpec(
        strategies=strategies,
        n_simulations=args.n,
        step_budget=args.budget,
        checkpoint=args.checkpoint,
        seed_base=run.seed,
    )
    log_path = os.path.join(args.out, "eval_log.jsonl")
    report = run_eval(spec, run.env, run.sim, log_path=log_path)
    emit_eval_plot(report, args.out)
    for name, res in report.strategies.items():
        print(f"{name}: coverage {100 * res.mean_coverage:.2f} +- {100 * res.std_coverage:.2f} %"
              f" | tree size {res.mean_tree_size:.1f}"
              + (f" | size reduction {100 * res.mean_size_reduction:.1f} %"
                 if name != "none" and "none" in report.strategies else ""))
    print(f"eval log: {log_path}")
    return 0


def cmd_render(args) -> int:
    import os

    from .harness import _episode_seed_for
    from .observation import composite_rgb, write_ppm
    from .policy import load_checkpoint
    from .trainer import EpisodeRunner

    run = _resolve_run(args)
    policy = None
    if args.strategy.startswith("learned"):
        if args.checkpoint is None:
            raise ValueError("learned strategies require --checkpoint")
        policy, _ = load_checkpoint(args.checkpoint)
    runner = EpisodeRunner(run.env, run.sim, args.strategy, policy=policy,
                           base_seed=run.seed, sample_actions=False, auto_reset=False)
    runner.reset(args.episode, map_seed=_episode_seed_for(run.seed, args.episode))
    os.makedirs(args.out, exist_ok=True)
    budget = args.steps if args.steps is not None else run.sim.rewards.max_moves
    paths = []

    def snap(step):
        path = os.path.join(args.out, f"ep{args.episode:04d}_step{step:04d}.ppm")
        write_ppm(composite_rgb(runner.grid, runner.tree, runner.robot), path)
        paths.append(path)

    snap(0)
    for step in range(1, budget + 1):
        res = runner.step()
        if step % args.every == 0 or res.done:
            snap(step)
        if res.done:
            break
    print("\n".join(paths))
    return 0


def cmd_replay(args) -> int:
    from .harness import replay

    n = replay(args.log, args.workdir)
    print(f"replay OK: {n} records reproduced with zero divergence")
    return 0


def cmd_plot(args) -> int:
    import json as _json

    from .harness import _load_records, emit_training_plots

    header, _ = _load_records(args.log)
    if header["kind"] == "train":
        paths = emit_training_plots(args.log, args.out, ema_alpha=args.ema)
    else:
        from .configs import env_config_from_dict, sim_config_from_dict
        from .harness import EvalSpec, emit_eval_plot, run_eval

        spec_d = dict(header["spec"])
        spec_d["strategies"] = tuple(spec_d["strategies"])
        report = run_eval(EvalSpec(**spec_d), env_config_from_dict(header["env"]),
                          sim_config_from_dict(header["sim"]))
        paths = [emit_eval_plot(report, args.out)]
    print("\n".join(paths))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "train": cmd_train,
            "eval": cmd_eval,
            "render": cmd_render,
            "replay": cmd_replay,
            "plot": cmd_plot,
        }[args.command]
        return handler(args)
    except SystemExit as e:  # argparse errors already printed
        return int(e.code or 0)
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
