"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from exploresparse.exploration import ExplorationTree
from exploresparse.gridworld import GridMap, RobotState


def open_grid(width: int, height: int, explored: bool = True) -> GridMap:
    """Obstacle-free grid, optionally fully explored."""
    occ = np.zeros((height, width), dtype=bool)
    exp = np.full((height, width), explored, dtype=bool)
    return GridMap(occupancy=occ, explored=exp, free_cell_count=width * height)


def grid_with_obstacles(width: int, height: int, obstacles: list[tuple[int, int]],
                        explored: bool = True) -> GridMap:
    """Grid with the listed (x, y) obstacle cells; everything explored by default."""
    occ = np.zeros((height, width), dtype=bool)
    for x, y in obstacles:
        occ[y, x] = True
    exp = np.full((height, width), explored, dtype=bool)
    return GridMap(occupancy=occ, explored=exp,
                   free_cell_count=int(np.count_nonzero(~occ)))


def chain_tree(coords: list[tuple[int, int]]) -> ExplorationTree:
    """Tree whose nodes form a chain root -> 1 -> 2 -> ... at the given coords."""
    tree = ExplorationTree(*coords[0])
    parent = tree.root_id
    for x, y in coords[1:]:
        parent = tree.add_node(x, y, parent)
    return tree


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


def robot_at(x: int, y: int, fov: int = 2) -> RobotState:
    return RobotState(x=x, y=y, fov_radius=fov)
