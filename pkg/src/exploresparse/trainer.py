"""PPO-clip with GAE over rollouts from the simulator loop.

One timestep: grow the RRT, render and tokenize, run the policy, decode
the mixture, prune, select a frontier (counting attempts), move, reward,
check termination. Collection interleaves independent environment
instances round-robin into one shared update window.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from . import exploration, gridworld, observation, pruner, reward
from .exploration import ExplorationTree, TreeNode, classify_nodes, grow, move_robot, select_frontier
from .gridworld import EnvConfig, GridMap, RobotState, coverage, generate_environment
from .policy import (
    EpisodicMemory,
    GtrxlPolicy,
    PolicyConfig,
    gaussian_log_prob,
    init_params,
    sample_action,
    save_checkpoint,
    to_gmm,
)
from .pruner import (
    PrunerConfig,
    apply_prune,
    prune_count_with_carry,
    random_prune_set,
    select_prune_set,
)
from .reward import RewardConstants, StepRewardInput, total_reward

STRATEGY_NONE = "none"
STRATEGY_RANDOM = "random"
STRATEGY_LEARNED = "learned"
STRATEGY_LEARNED_NOISY = "learned-noisy"
STRATEGIES = (STRATEGY_NONE, STRATEGY_RANDOM, STRATEGY_LEARNED, STRATEGY_LEARNED_NOISY)


class TrainingError(RuntimeError):
    """Non-finite loss or irrecoverable training-state failure."""


@dataclass
class SimConfig:
    rrt_step: float = 10.0
    growth_attempts: int = 100      # samples per growth call
    max_growth_calls: int = 100     # growth calls per episode ("grown a fixed number of times")
    frontier_distance: float | None = None  # None -> fov_radius / 2
    min_frontier_stride: float | None = None  # None -> fov_radius
    pruner: PrunerConfig = field(default_factory=PrunerConfig)
    rewards: RewardConstants = field(default_factory=RewardConstants)


@dataclass
class PpoConfig:
    lr: float = 3e-4
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.1
    value_coeff: float = 0.5
    entropy_coeff: float = 0.01
    update_every: int = 512         # environment steps per update window
    k_epochs: int = 4
    n_minibatch: int = 4
    target_kl: float = 0.03
    total_timesteps: int = 1_000_000
    optimizer: str = "adam"

    def validate(self) -> None:
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must be in (0, 1)")
        if not (0.0 <= self.gae_lambda <= 1.0):
            raise ValueError("gae_lambda must be in [0, 1]")
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be positive")


def episode_seed(base_seed: int, env_id: int, episode_idx: int) -> tuple[int, np.random.Generator]:
    """(map seed, in-episode rng) derived reproducibly from the run seed."""
    map_seed = int(np.random.SeedSequence([base_seed, env_id, episode_idx, 0]).generate_state(1)[0])
    rng = np.random.default_rng(np.random.SeedSequence([base_seed, env_id, episode_idx, 1]))
    return map_seed, rng


@dataclass
class StepResult:
    reward: float
    done: bool
    cause: str | None
    coverage: float
    tree_size: int
    prune_n: int
    attempts: int
    tokens: np.ndarray | None = None
    raw_action: np.ndarray | None = None
    log_prob: float = 0.0
    value: float = 0.0
    mem_data: np.ndarray | None = None
    mem_valid: int = 0
    episode_summary: dict | None = None


class EpisodeRunner:
    """One environment instance: map + robot + tree + policy memory + RNG stream."""

    def __init__(
        self,
        env_config: EnvConfig,
        sim_config: SimConfig,
        strategy: str,
        policy: GtrxlPolicy | None = None,
        base_seed: int = 0,
        env_id: int = 0,
        sample_actions: bool = True,
        auto_reset: bool = True,
    ):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}")
        if strategy.startswith("learned") and policy is None:
            raise ValueError("learned strategies require a policy")
        self.env_config = env_config
        self.sim = sim_config
        self.strategy = strategy
        self.policy = policy
        self.base_seed = base_seed
        self.env_id = env_id
        self.sample_actions = sample_actions
        self.auto_reset = auto_reset
        self.episode_idx = 0
        self.reset(0)

    # -- episode lifecycle ---------------------------------------------------

    def reset(self, episode_idx: int, map_seed: int | None = None) -> None:
        self.episode_idx = episode_idx
        derived_seed, self.rng = episode_seed(self.base_seed, self.env_id, episode_idx)
        if map_seed is None:
            map_seed = derived_seed
        self.map_seed = map_seed
        self.grid, self.robot = generate_environment(self.env_config, map_seed)
        self.tree = ExplorationTree(self.robot.x, self.robot.y)
        self.growth_calls = 0
        self.step_count = 0
        self.reward_sum = 0.0
        # frontier targets that revealed nothing (wall-facing); skipped later
        self.exhausted: set[tuple[int, int]] = set()
        # sub-node remainder of the prune fraction, carried across rounds
        self.prune_carry = 0.0
        if self.policy is not None and self.policy.config.memory_len > 0:
            self.memory = EpisodicMemory.empty(self.policy.config, self.policy.action_log_std.dtype)
        else:
            self.memory = None

    @property
    def frontier_distance(self) -> float:
        if self.sim.frontier_distance is not None:
            return self.sim.frontier_distance
        return self.env_config.fov_radius / 2

    @property
    def min_frontier_stride(self) -> float:
        if self.sim.min_frontier_stride is not None:
            return self.sim.min_frontier_stride
        return float(self.env_config.fov_radius)

    def _noise_config(self) -> PrunerConfig:
        cfg = self.sim.pruner
        if self.strategy == STRATEGY_LEARNED_NOISY:
            return cfg
        # base learned strategy never applies the noise term
        if cfg.noise_enabled:
            return PrunerConfig(
                prune_fraction=cfg.prune_fraction,
                sigma_min=cfg.sigma_min,
                noise_enabled=False,
                noise_scale=cfg.noise_scale,
                noise_frequencies=cfg.noise_frequencies,
            )
        return cfg

    # -- one timestep --------------------------------------------------------

    def step(self) -> StepResult:
        grid, robot, tree = self.grid, self.robot, self.tree
        if self.growth_calls < self.sim.max_growth_calls:
            grow(tree, grid, self.sim.growth_attempts, self.sim.rrt_step, self.rng)
            self.growth_calls += 1
        classes = classify_nodes(tree, grid, self.frontier_distance)
        anchor = tree.nearest(robot.x, robot.y)
        protected = (tree.root_id, anchor)

        tokens = raw = mem_data = None
        log_prob = 0.0
        value = 0.0
        mem_valid = 0
        pruned_classes: list[exploration.NodeClass] = []
        prune_n = 0
        if self.strategy != STRATEGY_NONE:
            n, self.prune_carry = prune_count_with_carry(
                tree.nodes_added_since_prune,
                self.sim.pruner.prune_fraction,
                len(tree),
                self.prune_carry,
            )
            if self.strategy == STRATEGY_RANDOM:
                ids = random_prune_set(tree, n, self.rng, protected)
            else:
                img = observation.render(grid, tree, robot)
                seq = observation.tokenize(img, self.policy.config.patch_size)
                tokens = seq.patches
                if self.memory is not None:
                    mem_data = self.memory.data.numpy().copy()
                    mem_valid = self.memory.valid
                out = self.policy.act(tokens, self.memory)
                if out.new_memory is not None:
                    self.memory = out.new_memory
                value = out.value
                raw, log_prob = sample_action(out, self.rng, deterministic=not self.sample_actions)
                gmm = to_gmm(raw, grid.width, grid.height, self.policy.config)
                ids = select_prune_set(
                    tree, gmm, n, self._noise_config(), (grid.width, grid.height), protected
                )
            pruned_classes = [classes[i] for i in ids]
            apply_prune(tree, ids, protected)
            prune_n = len(ids)

        # frontier move; a no-move outcome triggers regrowth, never a crash
        attempts = 0
        live = {i: c for i, c in classes.items() if i in tree.nodes}
        stride = self.min_frontier_stride
        fov = self.env_config.fov_radius
        choice = select_frontier(tree, grid, robot, live, self.exhausted, stride, fov)
        while choice.target_id is None and self.growth_calls < self.sim.max_growth_calls:
            attempts += choice.attempts
            grow(tree, grid, self.sim.growth_attempts, self.sim.rrt_step, self.rng)
            self.growth_calls += 1
            choice = select_frontier(
                tree, grid, robot, classify_nodes(tree, grid, self.frontier_distance),
                self.exhausted, stride, fov,
            )
        attempts += choice.attempts
        if choice.target_id is not None and robot.moves_taken < self.sim.rewards.max_moves:
            target = tree.nodes[choice.target_id]
            target_cell = (target.x, target.y)
            if move_robot(tree, grid, robot, choice.target_id) == 0:
                self.exhausted.add(target_cell)

        cov = coverage(grid)
        cause = None
        if cov >= 1.0:
            cause = "coverage"
        elif robot.moves_taken >= self.sim.rewards.max_moves:
            cause = "move-cap"
        elif self.growth_calls >= self.sim.max_growth_calls:
            cause = "growth-cap"
        done = cause is not None

        r = total_reward(
            StepRewardInput(pruned=pruned_classes, attempts=attempts, terminal=done, coverage=cov),
            self.sim.rewards,
        )
        self.step_count += 1
        self.reward_sum += r

        summary = None
        if done:
            summary = {
                "episode": self.episode_idx,
                "env_id": self.env_id,
                "map_seed": self.map_seed,
                "steps": self.step_count,
                "reward_sum": self.reward_sum,
                "mean_step_reward": self.reward_sum / self.step_count,
                "final_coverage": cov,
                "final_tree_size": len(tree),
                "cause": cause,
            }
            if self.auto_reset:
                self.reset(self.episode_idx + 1)
        return StepResult(
            reward=r,
            done=done,
            cause=cause,
            coverage=cov,
            tree_size=len(tree) if not done else summary["final_tree_size"],
            prune_n=prune_n,
            attempts=attempts,
            tokens=tokens,
            raw_action=raw,
            log_prob=log_prob,
            value=value,
            mem_data=mem_data,
            mem_valid=mem_valid,
            episode_summary=summary,
        )

    def peek_value(self) -> float:
        """Critic value of the current state; advances no RNG and no memory."""
        img = observation.render(self.grid, self.tree, self.robot)
        seq = observation.tokenize(img, self.policy.config.patch_size)
        out = self.policy.act(seq.patches, self.memory.clone() if self.memory else None)
        return out.value

    # -- checkpoint support --------------------------------------------------

    def state_dict(self) -> dict:
        nodes = [
            (nid, n.x, n.y, -1 if n.parent is None else n.parent)
            for nid, n in sorted(self.tree.nodes.items())
        ]
        return {
            "episode_idx": self.episode_idx,
            "map_seed": self.map_seed,
            "occupancy": self.grid.occupancy.copy(),
            "explored": self.grid.explored.copy(),
            "free_cell_count": self.grid.free_cell_count,
            "robot": (self.robot.x, self.robot.y, self.robot.fov_radius, self.robot.moves_taken),
            "tree_nodes": nodes,
            "tree_next_id": self.tree._next_id,
            "tree_added": self.tree.nodes_added_since_prune,
            "growth_calls": self.growth_calls,
            "step_count": self.step_count,
            "reward_sum": self.reward_sum,
            "exhausted": sorted(self.exhausted),
            "prune_carry": self.prune_carry,
            "rng_state": self.rng.bit_generator.state,
            "memory": None if self.memory is None else (self.memory.data.numpy().copy(), self.memory.valid),
        }

    def load_state_dict(self, state: dict) -> None:
        self.episode_idx = state["episode_idx"]
        self.map_seed = state["map_seed"]
        self.grid = GridMap(
            state["occupancy"].copy(), state["explored"].copy(), state["free_cell_count"]
        )
        rx, ry, fov, moves = state["robot"]
        self.robot = RobotState(rx, ry, fov, moves)
        nodes = state["tree_nodes"]
        root_id, rxx, ryy, _ = nodes[0] if nodes[0][3] == -1 else next(
            n for n in nodes if n[3] == -1
        )
        tree = ExplorationTree(rxx, ryy)
        tree.nodes = {}
        for nid, x, y, parent in nodes:
            tree.nodes[nid] = TreeNode(x, y, None if parent == -1 else parent)
        for nid, node in tree.nodes.items():
            if node.parent is not None:
                tree.nodes[node.parent].children.add(nid)
        tree.root_id = root_id
        tree._next_id = state["tree_next_id"]
        tree.nodes_added_since_prune = state["tree_added"]
        tree._invalidate()
        self.tree = tree
        self.growth_calls = state["growth_calls"]
        self.step_count = state["step_count"]
        self.reward_sum = state["reward_sum"]
        self.exhausted = {tuple(c) for c in state["exhausted"]}
        self.prune_carry = state["prune_carry"]
        self.rng = np.random.default_rng()
        self.rng.bit_generator.state = state["rng_state"]
        if state["memory"] is None:
            self.memory = None
        else:
            data, valid = state["memory"]
            dtype = self.policy.action_log_std.dtype if self.policy is not None else torch.float32
            self.memory = EpisodicMemory(torch.as_tensor(data, dtype=dtype), valid)


# -- GAE ---------------------------------------------------------------------


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    last_value: float,
    gamma: float,
    gae_lambda: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Advantages and returns for one env stream.

    delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
    A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
    returns = advantages + values. `last_value` bootstraps a truncated end.
    """
    n = len(rewards)
    adv = np.zeros(n)
    next_value = last_value
    next_adv = 0.0
    for t in range(n - 1, -1, -1):
        not_done = 1.0 - float(dones[t])
        delta = rewards[t] + gamma * next_value * not_done - values[t]
        next_adv = delta + gamma * gae_lambda * not_done * next_adv
        adv[t] = next_adv
        next_value = values[t]
    return adv, adv + values


class RolloutBuffer:
    """Per-step records for one PPO update window."""

    FIELDS = ("env_id", "tokens", "raw", "log_prob", "reward", "value", "done",
              "mem_data", "mem_valid")

    def __init__(self):
        self.records: list[dict] = []

    def __len__(self) -> int:
        return len(self.records)

    def add(self, env_id: int, res: StepResult) -> None:
        self.records.append(
            {
                "env_id": env_id,
                "tokens": res.tokens,
                "raw": res.raw_action,
                "log_prob": res.log_prob,
                "reward": res.reward,
                "value": res.value,
                "done": res.done,
                "mem_data": res.mem_data,
                "mem_valid": res.mem_valid,
            }
        )

    def clear(self) -> None:
        self.records = []

    def advantages_and_returns(
        self, last_values: dict[int, float], gamma: float, lam: float
    ) -> tuple[np.ndarray, np.ndarray]:
        """Per-env GAE scattered back to buffer order."""
        n = len(self.records)
        adv = np.zeros(n)
        ret = np.zeros(n)
        by_env: dict[int, list[int]] = {}
        for i, rec in enumerate(self.records):
            by_env.setdefault(rec["env_id"], []).append(i)
        for env_id, idxs in by_env.items():
            rewards = np.array([self.records[i]["reward"] for i in idxs])
            values = np.array([self.records[i]["value"] for i in idxs])
            dones = np.array([self.records[i]["done"] for i in idxs])
            last = 0.0 if dones[-1] else last_values.get(env_id, 0.0)
            a, r = compute_gae(rewards, values, dones, last, gamma, lam)
            adv[idxs] = a
            ret[idxs] = r
        return adv, ret


@dataclass
class UpdateStats:
    policy_loss: float
    value_loss: float
    entropy: float
    approx_kl: float
    first_approx_kl: float
    clip_fraction: float
    minibatches_done: int


def _batched_forward(model: GtrxlPolicy, records: list[dict], idx: np.ndarray):
    dtype = model.action_log_std.dtype
    tokens = torch.as_tensor(
        np.stack([records[i]["tokens"] for i in idx]), dtype=dtype
    )
    if model.config.memory_len > 0:
        mem = torch.as_tensor(
            np.stack([records[i]["mem_data"] for i in idx], axis=1), dtype=dtype
        )  # (L, B, M, d)
        valid = torch.as_tensor(np.array([records[i]["mem_valid"] for i in idx]))
        mean, value, _, _ = model.forward(tokens, mem, valid)
    else:
        mean, value, _, _ = model.forward(tokens)
    return mean, value


def ppo_update(
    model: GtrxlPolicy,
    optimizer: torch.optim.Optimizer,
    buffer: RolloutBuffer,
    advantages: np.ndarray,
    returns: np.ndarray,
    config: PpoConfig,
    rng: np.random.Generator,
) -> UpdateStats:
    """Clipped-surrogate PPO over k_epochs x n_minibatch shuffled minibatches.

    Early-stops remaining minibatches once mean approx-KL exceeds target_kl.
    Never mutates the buffer.
    """
    records = buffer.records
    n = len(records)
    dtype = model.action_log_std.dtype
    adv_t = torch.as_tensor(advantages, dtype=dtype)
    adv_t = (adv_t - adv_t.mean()) / (adv_t.std(unbiased=False) + 1e-8)
    ret_t = torch.as_tensor(returns, dtype=dtype)
    old_logp = torch.as_tensor(np.array([r["log_prob"] for r in records]), dtype=dtype)
    raw = torch.as_tensor(np.stack([r["raw"] for r in records]), dtype=dtype)
    a_dim = model.config.action_dim

    stats = dict(policy_loss=0.0, value_loss=0.0, entropy=0.0, kl=0.0, clip=0.0)
    first_kl = None
    done_mb = 0
    stop = False
    for _ in range(config.k_epochs):
        if stop:
            break
        perm = rng.permutation(n)
        for chunk in np.array_split(perm, config.n_minibatch):
            if len(chunk) == 0:
                continue
            mean, value = _batched_forward(model, records, chunk)
            log_std = model.action_log_std
            var = torch.exp(2.0 * log_std)
            diff = raw[chunk] - mean
            new_logp = (
                -0.5 * (diff * diff / var).sum(dim=1)
                - log_std.sum()
                - 0.5 * a_dim * math.log(2 * math.pi)
            )
            ratio = torch.exp(new_logp - old_logp[chunk])
            a = adv_t[chunk]
            surr = torch.minimum(ratio * a, torch.clamp(ratio, 1 - config.clip_eps, 1 + config.clip_eps) * a)
            policy_loss = -surr.mean()
            value_loss = ((value - ret_t[chunk]) ** 2).mean()
            entropy = log_std.sum() + 0.5 * a_dim * math.log(2 * math.pi * math.e)
            loss = policy_loss + config.value_coeff * value_loss - config.entropy_coeff * entropy
            if not torch.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss (policy={float(policy_loss)}, value={float(value_loss)})"
                )
            with torch.no_grad():
                approx_kl = float((old_logp[chunk] - new_logp).mean())
                clip_frac = float(((ratio - 1.0).abs() > config.clip_eps).to(dtype).mean())
            if first_kl is None:
                first_kl = approx_kl
            if approx_kl > config.target_kl:
                stop = True
                break
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            stats["policy_loss"] += float(policy_loss.detach())
            stats["value_loss"] += float(value_loss.detach())
            stats["entropy"] += float(entropy.detach())
            stats["kl"] += approx_kl
            stats["clip"] += clip_frac
            done_mb += 1
    k = max(done_mb, 1)
    return UpdateStats(
        policy_loss=stats["policy_loss"] / k,
        value_loss=stats["value_loss"] / k,
        entropy=stats["entropy"] / k,
        approx_kl=stats["kl"] / k,
        first_approx_kl=0.0 if first_kl is None else first_kl,
        clip_fraction=stats["clip"] / k,
        minibatches_done=done_mb,
    )


def make_optimizer(model: GtrxlPolicy, config: PpoConfig) -> torch.optim.Optimizer:
    if config.optimizer == "adam":
        return torch.optim.Adam(model.parameters(), lr=config.lr)
    if config.optimizer == "rmsprop":
        return torch.optim.RMSprop(model.parameters(), lr=config.lr)
    if config.optimizer == "sgd":
        return torch.optim.SGD(model.parameters(), lr=config.lr)
    raise ValueError(f"unknown optimizer {config.optimizer!r}")


# -- training driver ---------------------------------------------------------


@dataclass
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    seed: int = 0
    n_envs: int = 4
    out_dir: str = "runs/default"
    checkpoint_every: int = 20  # updates; 0 disables intermediate checkpoints
    profile: str = "custom"


def _update_record(update_idx, global_step, stats, window) -> dict:
    eps = window["episodes"]
    return {
        "type": "update",
        "update_idx": update_idx,
        "global_step": global_step,
        "policy_loss": stats.policy_loss,
        "value_loss": stats.value_loss,
        "entropy": stats.entropy,
        "approx_kl": stats.approx_kl,
        "clip_fraction": stats.clip_fraction,
        "mean_episode_reward": (
            float(np.mean([e["mean_step_reward"] for e in eps])) if eps else window["last_reward"]
        ),
        "mean_coverage": (
            float(np.mean([e["final_coverage"] for e in eps])) if eps else window["last_coverage"]
        ),
        "tree_size_mean": float(np.mean(window["tree_sizes"])) if window["tree_sizes"] else 0.0,
        "prune_count_mean": float(np.mean(window["prune_ns"])) if window["prune_ns"] else 0.0,
    }


def train(run: RunConfig, resume_from: str | None = None, log_name: str = "train_log.jsonl") -> str:
    """Run PPO training; returns the log path.

    Writes line-delimited records (header, episodes, updates) and versioned
    checkpoints; fully resumable with identical continuation under the same
    seeds.
    """
    from .configs import run_config_to_dict  # local import avoids a cycle

    run.ppo.validate()
    os.makedirs(run.out_dir, exist_ok=True)
    log_path = os.path.join(run.out_dir, log_name)

    model = init_params(run.policy, run.seed)
    optimizer = make_optimizer(model, run.ppo)
    runners = [
        EpisodeRunner(
            run.env, run.sim, STRATEGY_LEARNED_NOISY if run.policy.with_gates else STRATEGY_LEARNED,
            policy=model, base_seed=run.seed, env_id=i, sample_actions=True,
        )
        for i in range(run.n_envs)
    ]
    trainer_rng = np.random.default_rng(np.random.SeedSequence([run.seed, 999331]))
    global_step = 0
    update_idx = 0
    window = {"episodes": [], "tree_sizes": [], "prune_ns": [],
              "last_reward": 0.0, "last_coverage": 0.0}

    if resume_from is not None:
        payload = torch.load(resume_from, weights_only=False)
        if payload["config_hash"] != run.policy.hash():
            raise TrainingError("checkpoint/config hash mismatch")
        model.load_state_dict(payload["state_dict"])
        optimizer.load_state_dict(payload["optimizer"])
        extra = payload["extra"]
        global_step = extra["global_step"]
        update_idx = extra["update_idx"]
        trainer_rng.bit_generator.state = extra["trainer_rng"]
        window["last_reward"] = extra["last_reward"]
        window["last_coverage"] = extra["last_coverage"]
        for runner, state in zip(runners, extra["runner_states"]):
            runner.load_state_dict(state)
        log_mode = "a"
    else:
        log_mode = "w"

    buffer = RolloutBuffer()
    log = open(log_path, log_mode)
    if log_mode == "w":
        header = {"type": "header", "kind": "train", "config": run_config_to_dict(run)}
        log.write(json.dumps(header, sort_keys=True) + "\n")

    def checkpoint(tag: str) -> None:
        extra = {
            "global_step": global_step,
            "update_idx": update_idx,
            "trainer_rng": trainer_rng.bit_generator.state,
            "last_reward": window["last_reward"],
            "last_coverage": window["last_coverage"],
            "runner_states": [r.state_dict() for r in runners],
        }
        save_checkpoint(os.path.join(run.out_dir, f"checkpoint_{tag}.pt"), model, optimizer, extra)

    try:
        while global_step < run.ppo.total_timesteps:
            runner = runners[global_step % run.n_envs]
            res = runner.step()
            buffer.add(runner.env_id, res)
            window["tree_sizes"].append(res.tree_size)
            window["prune_ns"].append(res.prune_n)
            if res.episode_summary is not None:
                rec = dict(res.episode_summary)
                rec["type"] = "episode"
                log.write(json.dumps(rec, sort_keys=True) + "\n")
                window["episodes"].append(res.episode_summary)
            global_step += 1
            if len(buffer) >= run.ppo.update_every:
                last_values = {
                    r.env_id: r.peek_value() for r in runners
                }
                adv, ret = buffer.advantages_and_returns(
                    last_values, run.ppo.gamma, run.ppo.gae_lambda
                )
                stats = ppo_update(model, optimizer, buffer, adv, ret, run.ppo, trainer_rng)
                update_idx += 1
                rec = _update_record(update_idx, global_step, stats, window)
                log.write(json.dumps(rec, sort_keys=True) + "\n")
                log.flush()
                if window["episodes"]:
                    window["last_reward"] = float(
                        np.mean([e["mean_step_reward"] for e in window["episodes"]])
                    )
                    window["last_coverage"] = float(
                        np.mean([e["final_coverage"] for e in window["episodes"]])
                    )
                window["episodes"] = []
                window["tree_sizes"] = []
                window["prune_ns"] = []
                buffer.clear()
                if run.checkpoint_every and update_idx % run.checkpoint_every == 0:
                    checkpoint(f"u{update_idx:06d}")
        checkpoint("final")
    finally:
        log.close()
    return log_path
