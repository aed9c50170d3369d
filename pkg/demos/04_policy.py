"""One forward pass through the gated-transformer policy, end to end.

Renders the 4-channel observation, tokenizes it into patches, runs the
recurrent transformer (with its episodic memory), and decodes the actor
output into a Gaussian-mixture pruning action.

Run:  python3 demos/04_policy.py
"""

import numpy as np
import torch

from exploresparse.configs import make_run_config
from exploresparse.gridworld import generate_environment
from exploresparse.exploration import ExplorationTree, grow
from exploresparse.observation import render, tokenize
from exploresparse.policy import (
    EpisodicMemory,
    PolicyOutput,
    init_params,
    sample_action,
    to_gmm,
)


def main() -> None:
    rc = make_run_config("desk")
    cfg = rc.policy
    print(f"Policy config: {cfg.n_layers} layers x {cfg.layer_size} wide, "
          f"{cfg.n_heads} heads, memory {cfg.memory_len}, "
          f"action dim {cfg.action_dim}")

    grid, robot = generate_environment(rc.env, seed=1)
    tree = ExplorationTree(robot.x, robot.y)
    rng = np.random.default_rng(1)
    for _ in range(5):
        grow(tree, grid, rc.sim.growth_attempts, rc.sim.rrt_step, rng)
    obs = render(grid, tree, robot)
    print(f"\nObservation: {obs.shape} float32 in [0,1] "
          f"(occupancy / explored / tree / robot channels)")

    seq = tokenize(obs, cfg.patch_size)
    print(f"Tokenized into {seq.patches.shape[0]} patches of dim {seq.patches.shape[1]} "
          f"({cfg.patch_size}x{cfg.patch_size} per channel, row-major)")

    model = init_params(cfg, seed=0)
    n_params = sum(p.numel() for p in model.parameters())
    print(f"Initialized {n_params} parameters (seeded, reproducible).")

    memory = EpisodicMemory.empty(cfg, model.action_log_std.dtype)
    tokens = torch.as_tensor(seq.patches, dtype=torch.float32).unsqueeze(0)
    with torch.no_grad():
        for t in range(3):
            mean, value, mem_data, mem_valid = model.forward(
                tokens, memory.data.unsqueeze(1), torch.tensor([memory.valid]))
            memory = EpisodicMemory(mem_data.squeeze(1), int(mem_valid[0]))
            print(f"  step {t}: value estimate {float(value[0]):+.4f}, "
                  f"memory holds {memory.valid}/{cfg.memory_len} past activations")

    out = PolicyOutput(
        action_mean=mean[0].numpy(),
        action_log_std=model.action_log_std.detach().numpy(),
        value=float(value[0]),
    )
    raw, log_prob = sample_action(out, np.random.default_rng(0))
    gmm = to_gmm(raw, rc.env.width, rc.env.height, cfg)
    print(f"\nSampled action log-probability: {log_prob:.2f}")
    print("Decoded mixture (weights sum to 1, means inside the map, stds floored):")
    for k in range(gmm.n_components):
        print(f"  component {k}: w={gmm.weights[k]:.3f} "
              f"mean=({gmm.means[k, 0]:6.1f},{gmm.means[k, 1]:6.1f}) "
              f"std=({gmm.stds[k, 0]:.2f},{gmm.stds[k, 1]:.2f})")
    gmm.validate(bounds=(rc.env.width, rc.env.height), sigma_min=cfg.sigma_min)
    print("Action validated.")


if __name__ == "__main__":
    main()
