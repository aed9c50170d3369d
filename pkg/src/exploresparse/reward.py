"""Shaped reward: per-node components, timestep aggregate, terminal bonus."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .exploration import NodeClass


@dataclass
class RewardConstants:
    attempt_penalty: float = 5.0   # lambda_A
    max_moves: int = 100           # lambda_M
    terminal_scale: float = 8.0    # lambda_B
    discount: float = 0.99         # gamma

    def validate(self) -> None:
        if self.attempt_penalty <= 0 or self.terminal_scale <= 0:
            raise ValueError("penalty/terminal scales must be positive")
        if self.max_moves < 1:
            raise ValueError("max_moves must be >= 1")
        if not (0.0 <= self.discount < 1.0):
            raise ValueError("discount must be in [0, 1)")


@dataclass
class StepRewardInput:
    pruned: list[NodeClass] = field(default_factory=list)  # classes captured pre-removal
    attempts: int = 0          # N_a
    terminal: bool = False
    coverage: float = 0.0      # C, used only at terminal


def node_reward(cls: NodeClass) -> tuple[float, float]:
    """(r_f, r_c): -1 when the node is a frontier / leaf-or-split node, else +1."""
    r_f = 1.0 - 2.0 * float(cls.is_frontier)
    r_c = 1.0 - 2.0 * float(cls.is_leaf or cls.is_split)
    return r_f, r_c


def timestep_reward(inp: StepRewardInput, k: RewardConstants) -> float:
    """Mean per-node reward over the prune set minus the attempt penalty."""
    if not inp.pruned:
        raise ValueError("timestep reward requires a non-empty prune set")
    total = sum(sum(node_reward(c)) for c in inp.pruned)
    penalty = k.attempt_penalty * inp.attempts / (2.0 * k.max_moves)
    return total / len(inp.pruned) - penalty


def terminal_bonus(c: float, k: RewardConstants) -> float:
    """Exponential coverage bonus, zero at C=0."""
    if not (0.0 <= c <= 1.0):
        raise ValueError("coverage must be in [0, 1]")
    return k.terminal_scale * (math.exp(c) - 1.0)


def total_reward(inp: StepRewardInput, k: RewardConstants) -> float:
    """Timestep reward plus terminal bonus when terminal.

    A step with an empty prune set contributes 0 in place of the (undefined)
    timestep aggregate.
    """
    if inp.pruned:
        r = timestep_reward(inp, k)
    else:
        r = 0.0
    if inp.terminal:
        r += terminal_bonus(inp.coverage, k)
    return r
