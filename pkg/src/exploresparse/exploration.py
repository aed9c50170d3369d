"""Global RRT frontier-exploration engine.

The tree is grown inside explored free space, nodes are classified as
frontier / leaf / split, frontier moves are selected nearest-first, and
node removal reconnects children to the grandparent so pruning one node
never deletes descendants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .gridworld import GridMap, RobotState, reveal, segment_explored_free


class TreeError(RuntimeError):
    """Structural violation: removing the root/anchor or an inconsistent link."""


@dataclass
class NodeClass:
    is_frontier: bool
    is_leaf: bool
    is_split: bool


@dataclass
class TreeNode:
    x: int
    y: int
    parent: int | None
    children: set[int] = field(default_factory=set)


class ExplorationTree:
    """Rooted tree of waypoints; connected and acyclic after every operation."""

    def __init__(self, root_x: int, root_y: int):
        self.nodes: dict[int, TreeNode] = {0: TreeNode(root_x, root_y, parent=None)}
        self.root_id = 0
        self.nodes_added_since_prune = 0
        self._next_id = 1
        self._coords_cache: tuple[np.ndarray, np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self.nodes)

    def _invalidate(self) -> None:
        self._coords_cache = None

    def coords_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(ids, coords) with coords float (N, 2) as [x, y], aligned with ids."""
        if self._coords_cache is None:
            ids = np.fromiter(self.nodes.keys(), dtype=np.int64, count=len(self.nodes))
            coords = np.array([[self.nodes[i].x, self.nodes[i].y] for i in ids], dtype=float)
            self._coords_cache = (ids, coords)
        return self._coords_cache

    def add_node(self, x: int, y: int, parent: int) -> int:
        nid = self._next_id
        self._next_id += 1
        self.nodes[nid] = TreeNode(x, y, parent=parent)
        self.nodes[parent].children.add(nid)
        self.nodes_added_since_prune += 1
        self._invalidate()
        return nid

    def nearest(self, x: float, y: float) -> int:
        ids, coords = self.coords_arrays()
        d2 = (coords[:, 0] - x) ** 2 + (coords[:, 1] - y) ** 2
        return int(ids[int(np.argmin(d2))])

    def remove_node(self, nid: int, protected: tuple[int, ...] = ()) -> None:
        """Delete a node, re-parenting its children to its parent."""
        if nid == self.root_id:
            raise TreeError("refusing to remove the root node")
        if nid in protected:
            raise TreeError(f"refusing to remove protected node {nid}")
        node = self.nodes.get(nid)
        if node is None:
            raise TreeError(f"unknown node id {nid}")
        parent = self.nodes[node.parent]
        parent.children.discard(nid)
        for cid in node.children:
            self.nodes[cid].parent = node.parent
            parent.children.add(cid)
        del self.nodes[nid]
        self._invalidate()

    def path(self, a: int, b: int) -> list[int]:
        """Node ids along the unique tree path from a to b (inclusive)."""
        to_root_a = []
        nid = a
        while nid is not None:
            to_root_a.append(nid)
            nid = self.nodes[nid].parent
        ancestors = {n: i for i, n in enumerate(to_root_a)}
        to_root_b = []
        nid = b
        while nid not in ancestors:
            to_root_b.append(nid)
            nid = self.nodes[nid].parent
        lca = nid
        return to_root_a[: ancestors[lca] + 1] + list(reversed(to_root_b))

    def audit(self, grid: GridMap | None = None) -> None:
        """Full structural check; raises TreeError on any violation."""
        roots = [i for i, n in self.nodes.items() if n.parent is None]
        if roots != [self.root_id]:
            raise TreeError(f"expected single root {self.root_id}, found {roots}")
        seen: set[int] = set()
        stack = [self.root_id]
        while stack:
            nid = stack.pop()
            if nid in seen:
                raise TreeError(f"cycle or duplicate link at node {nid}")
            seen.add(nid)
            for cid in self.nodes[nid].children:
                if cid not in self.nodes:
                    raise TreeError(f"dangling child link {nid} -> {cid}")
                if self.nodes[cid].parent != nid:
                    raise TreeError(f"inconsistent parent link at {cid}")
                stack.append(cid)
        if seen != set(self.nodes):
            raise TreeError("tree is disconnected")
        if grid is not None:
            for nid, node in self.nodes.items():
                if not grid.is_explored_free(node.x, node.y):
                    raise TreeError(f"node {nid} not on an explored free cell")

    def snapshot_lines(self) -> list[str]:
        """Line-delimited export: 'id x y parent' (parent -1 for the root)."""
        out = []
        for nid in sorted(self.nodes):
            n = self.nodes[nid]
            p = -1 if n.parent is None else n.parent
            out.append(f"{nid} {n.x} {n.y} {p}")
        return out


def grow(
    tree: ExplorationTree,
    grid: GridMap,
    attempts: int,
    step: float,
    rng: np.random.Generator,
) -> list[int]:
    """One RRT growth round: `attempts` uniform samples in explored free space.

    Each sample extends the nearest node toward it by at most `step` cells;
    the node is added only if the whole segment stays inside explored free
    cells. Returns the ids added (possibly empty).
    """
    explored_free = np.argwhere(grid.explored & ~grid.occupancy)  # [y, x]
    if len(explored_free) == 0:
        return []
    added: list[int] = []
    picks = rng.integers(0, len(explored_free), size=attempts)
    for i in range(attempts):
        sy, sx = explored_free[picks[i]]
        near_id = tree.nearest(sx, sy)
        near = tree.nodes[near_id]
        dx = float(sx - near.x)
        dy = float(sy - near.y)
        dist = math.hypot(dx, dy)
        if dist < 1e-9:
            continue
        scale = min(1.0, step / dist)
        nx = int(round(near.x + dx * scale))
        ny = int(round(near.y + dy * scale))
        if (nx, ny) == (near.x, near.y):
            continue
        if not grid.in_bounds(nx, ny):
            continue
        if not segment_explored_free(grid, (near.x, near.y), (nx, ny)):
            continue
        added.append(tree.add_node(nx, ny, near_id))
    return added


def classify_nodes(
    tree: ExplorationTree, grid: GridMap, frontier_distance: float
) -> dict[int, NodeClass]:
    """Pure classification of every node from (tree, map).

    A node is a frontier node iff some unexplored cell lies within
    frontier_distance (Euclidean) of its coordinates.
    """
    if grid.explored.all():
        near_unexplored = np.zeros_like(grid.explored)
    else:
        # distance of each explored cell to the nearest unexplored cell
        dist = ndimage.distance_transform_edt(grid.explored)
        near_unexplored = dist <= frontier_distance
    out: dict[int, NodeClass] = {}
    for nid, node in tree.nodes.items():
        n_children = len(node.children)
        out[nid] = NodeClass(
            is_frontier=bool(near_unexplored[node.y, node.x]),
            is_leaf=n_children == 0,
            is_split=n_children >= 2,
        )
    return out


def frontier_visible(grid: GridMap, x: int, y: int, radius: int) -> bool:
    """True iff some unexplored cell within `radius` has line of sight from (x, y).

    Moving to such a cell is guaranteed to reveal at least one new cell.
    Monotone: once false for a cell, it stays false as exploration grows.
    """
    from .gridworld import disc_offsets, line_of_sight

    exp = grid.explored
    for dx, dy in disc_offsets(radius):
        cx, cy = x + dx, y + dy
        if grid.in_bounds(cx, cy) and not exp[cy, cx] and line_of_sight(grid, (x, y), (cx, cy)):
            return True
    return False


@dataclass
class FrontierChoice:
    target_id: int | None
    attempts: int  # candidates examined before acceptance (all, when no move)


def select_frontier(
    tree: ExplorationTree,
    grid: GridMap,
    robot: RobotState,
    classes: dict[int, NodeClass],
    exhausted: set[tuple[int, int]] | None = None,
    min_stride: float = 0.0,
    fov_radius: int | None = None,
) -> FrontierChoice:
    """Pick the nearest reachable frontier node.

    Candidates are iterated in ascending Euclidean distance from the robot
    (ties by id); one is accepted if its cell is explored free and a tree
    path from the robot-nearest node exists, and moving there would reveal
    something (an unexplored cell within the FOV has line of sight from it).
    Returns no-move when none is acceptable. Cells in `exhausted` (proven
    wall-facing, permanently useless) are skipped outright and the set is
    extended with newly rejected cells.
    """
    candidates = [
        nid
        for nid, c in classes.items()
        if c.is_frontier
        and nid in tree.nodes
        and (exhausted is None or (tree.nodes[nid].x, tree.nodes[nid].y) not in exhausted)
    ]
    if not candidates:
        return FrontierChoice(None, 0)
    anchor = tree.nearest(robot.x, robot.y)
    min_d2 = min_stride * min_stride

    def key(nid: int) -> tuple[int, float, int]:
        n = tree.nodes[nid]
        d2 = (n.x - robot.x) ** 2 + (n.y - robot.y) ** 2
        # prefer candidates at least min_stride away so a dense tree does not
        # force sub-FOV crawling; within each group, nearest first
        return (0 if d2 >= min_d2 else 1, d2, nid)

    examined = 0
    for nid in sorted(candidates, key=key):
        node = tree.nodes[nid]
        if grid.is_explored_free(node.x, node.y):
            try:
                tree.path(anchor, nid)
            except KeyError:
                examined += 1
                continue
            if fov_radius is None or frontier_visible(grid, node.x, node.y, fov_radius):
                return FrontierChoice(nid, examined)
            if exhausted is not None:
                exhausted.add((node.x, node.y))
        examined += 1
    return FrontierChoice(None, examined)


def move_robot(
    tree: ExplorationTree, grid: GridMap, robot: RobotState, target_id: int
) -> int:
    """Execute one frontier move along the tree path, revealing at each node.

    Counts as a single move for the move-cap accounting. Returns the number
    of newly revealed cells.
    """
    target = tree.nodes[target_id]
    if not grid.is_explored_free(target.x, target.y):
        raise ValueError(f"target node {target_id} is no longer on a free explored cell")
    anchor = tree.nearest(robot.x, robot.y)
    revealed = 0
    for nid in tree.path(anchor, target_id):
        node = tree.nodes[nid]
        robot.x, robot.y = node.x, node.y
        revealed += reveal(grid, robot)
    robot.moves_taken += 1
    return revealed
