"""Configuration profiles and (de)serialization for run configs.

Profiles:
  paper     - 250x250 map, full-width policy (reference scale; not a test gate)
  desk      - 100x100 map, 1/8-width policy; runs the acceptance suite on one
              workstation
  tiny      - 50x50 map, 1/64-width policy, short episodes; unit-test scale
  gradcheck - 16x16 map, width-16 policy for finite-difference verification
"""

from __future__ import annotations

from dataclasses import asdict

from .gridworld import EnvConfig
from .policy import PolicyConfig
from .pruner import PrunerConfig
from .reward import RewardConstants
from .trainer import PpoConfig, RunConfig, SimConfig

PROFILES = ("paper", "desk", "tiny", "gradcheck")


def make_run_config(profile: str = "desk", with_gates: bool = False, **overrides) -> RunConfig:
    if profile == "paper":
        env = EnvConfig()
        policy = PolicyConfig(with_gates=with_gates)
        sim = SimConfig()
        ppo = PpoConfig()
        n_envs = 4
    elif profile == "desk":
        env = EnvConfig(
            width=100, height=100,
            obstacle_count_range=(8, 16), obstacle_size_range=(4, 20), fov_radius=10,
        )
        policy = PolicyConfig(with_gates=with_gates).scaled(1 / 8)
        policy.env_size = 100
        sim = SimConfig(rrt_step=4.0, growth_attempts=30)
        ppo = PpoConfig(total_timesteps=50_000)
        n_envs = 4
    elif profile == "tiny":
        env = EnvConfig(
            width=50, height=50,
            obstacle_count_range=(2, 5), obstacle_size_range=(3, 10), fov_radius=6,
        )
        policy = PolicyConfig(with_gates=with_gates).scaled(1 / 64)
        policy.env_size = 50
        sim = SimConfig(
            rrt_step=3.0, growth_attempts=15, max_growth_calls=25,
            rewards=RewardConstants(max_moves=25),
        )
        ppo = PpoConfig(total_timesteps=256, update_every=64)
        n_envs = 2
    elif profile == "gradcheck":
        env = EnvConfig(
            width=16, height=16, obstacle_count_range=(1, 2),
            obstacle_size_range=(2, 4), fov_radius=4,
        )
        policy = PolicyConfig(
            env_size=16, patch_size=8, n_layers=2, n_heads=2, head_size=8,
            pwff_size=16, layer_size=16, memory_len=8,
            actor_hidden=(32, 16), critic_hidden=(32, 16), with_gates=with_gates,
        )
        sim = SimConfig(rrt_step=2.0, growth_attempts=8, max_growth_calls=10,
                        rewards=RewardConstants(max_moves=10))
        ppo = PpoConfig(total_timesteps=128, update_every=32)
        n_envs = 1
    else:
        raise ValueError(f"unknown profile {profile!r}; choose from {PROFILES}")
    run = RunConfig(env=env, sim=sim, policy=policy, ppo=ppo, n_envs=n_envs, profile=profile)
    for key, value in overrides.items():
        if not hasattr(run, key):
            raise ValueError(f"unknown run-config key {key!r}")
        setattr(run, key, value)
    return run


# -- dict round trip (JSON logs / config files) ------------------------------


def run_config_to_dict(run: RunConfig) -> dict:
    return asdict(run)


def _tup(v):
    return None if v is None else tuple(v)


def env_config_from_dict(d: dict) -> EnvConfig:
    d = dict(d)
    d["obstacle_count_range"] = _tup(d["obstacle_count_range"])
    d["obstacle_size_range"] = _tup(d["obstacle_size_range"])
    return EnvConfig(**d)


def sim_config_from_dict(d: dict) -> SimConfig:
    d = dict(d)
    pr = dict(d.pop("pruner"))
    pr["noise_frequencies"] = _tup(pr["noise_frequencies"])
    d["pruner"] = PrunerConfig(**pr)
    d["rewards"] = RewardConstants(**d.pop("rewards"))
    return SimConfig(**d)


def policy_config_from_dict(d: dict) -> PolicyConfig:
    d = dict(d)
    d["actor_hidden"] = tuple(d["actor_hidden"])
    d["critic_hidden"] = tuple(d["critic_hidden"])
    return PolicyConfig(**d)


def run_config_from_dict(d: dict) -> RunConfig:
    return RunConfig(
        env=env_config_from_dict(d["env"]),
        sim=sim_config_from_dict(d["sim"]),
        policy=policy_config_from_dict(d["policy"]),
        ppo=PpoConfig(**d["ppo"]),
        seed=d["seed"],
        n_envs=d["n_envs"],
        out_dir=d["out_dir"],
        checkpoint_every=d["checkpoint_every"],
        profile=d.get("profile", "custom"),
    )


def apply_dotted_overrides(run: RunConfig, overrides: dict[str, object]) -> None:
    """Apply {'ppo.lr': 1e-4, 'env.fov_radius': 8, ...} onto a RunConfig."""
    for key, value in overrides.items():
        target = run
        parts = key.split(".")
        for part in parts[:-1]:
            if not hasattr(target, part):
                raise ValueError(f"unknown config section {part!r} in {key!r}")
            target = getattr(target, part)
        leaf = parts[-1]
        if not hasattr(target, leaf):
            raise ValueError(f"unknown config key {key!r}")
        current = getattr(target, leaf)
        if isinstance(current, tuple) and isinstance(value, list):
            value = tuple(value)
        setattr(target, leaf, value)
