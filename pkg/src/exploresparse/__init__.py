"""Frontier-based exploration simulator with learned RRT-graph sparsification.

A 2D occupancy-grid robot explores by growing a global RRT inside explored
space and moving to frontier nodes; a gated-transformer policy trained with
PPO emits Gaussian-mixture parameters over the map, and the highest-density
graph nodes are pruned each timestep.
"""

from .exploration import ExplorationTree, NodeClass, classify_nodes, grow, move_robot, select_frontier
from .gridworld import EnvConfig, GridMap, RobotState, coverage, generate_environment, line_of_sight, reveal
from .observation import TokenSequence, detokenize, render, tokenize
from .policy import GmmAction, GtrxlPolicy, PolicyConfig, init_params, sample_action, to_gmm
from .pruner import PrunerConfig, gmm_density, prune_count, random_prune_set, select_prune_set
from .reward import RewardConstants, StepRewardInput, node_reward, terminal_bonus, timestep_reward, total_reward
from .trainer import EpisodeRunner, PpoConfig, RunConfig, SimConfig, compute_gae, ppo_update, train

__version__ = "0.1.0"
