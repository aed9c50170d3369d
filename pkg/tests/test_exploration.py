"""RRT exploration: growth, classification, frontier selection, removal."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exploresparse.exploration import (
    ExplorationTree,
    NodeClass,
    TreeError,
    classify_nodes,
    frontier_visible,
    grow,
    move_robot,
    select_frontier,
)
from exploresparse.gridworld import reveal

from .conftest import chain_tree, grid_with_obstacles, open_grid, robot_at


# -- grow ---------------------------------------------------------------------


def test_grow_extends_at_most_step_from_nearest():
    grid = open_grid(41, 41)
    tree = ExplorationTree(20, 20)
    rng = np.random.default_rng(0)
    added = grow(tree, grid, attempts=50, step=5.0, rng=rng)
    assert added
    for nid in added:
        node = tree.nodes[nid]
        parent = tree.nodes[node.parent]
        d = math.hypot(node.x - parent.x, node.y - parent.y)
        assert d <= 5.0 + 0.75  # step plus rounding to the cell grid


def test_grow_deterministic_replay():
    grid = open_grid(30, 30)
    t1 = ExplorationTree(15, 15)
    t2 = ExplorationTree(15, 15)
    grow(t1, grid, 100, 4.0, np.random.default_rng(9))
    grow(t2, grid, 100, 4.0, np.random.default_rng(9))
    assert 1 <= len(t1) - 1 <= 100
    assert t1.snapshot_lines() == t2.snapshot_lines()


def test_grow_rejects_segments_through_unexplored():
    # two explored islands; any cross-island segment crosses unexplored cells
    grid = open_grid(30, 5, explored=False)
    grid.explored[2, 1] = True
    grid.explored[2, 28] = True
    tree = ExplorationTree(1, 2)
    added = grow(tree, grid, attempts=200, step=40.0, rng=np.random.default_rng(1))
    assert added == []
    assert len(tree) == 1


def test_grow_counts_nodes_added_since_prune():
    grid = open_grid(30, 30)
    tree = ExplorationTree(15, 15)
    added = grow(tree, grid, 60, 4.0, np.random.default_rng(2))
    assert tree.nodes_added_since_prune == len(added)


# -- classify -----------------------------------------------------------------


def test_classify_leaf_and_split_definitions():
    tree = chain_tree([(5, 5), (8, 5)])
    for i in range(3):
        tree.add_node(10 + i, 5 + i, parent=1)
    grid = open_grid(20, 20)
    classes = classify_nodes(tree, grid, frontier_distance=2.0)
    assert classes[0].is_leaf is False and classes[0].is_split is False  # one child
    assert classes[1].is_split is True and classes[1].is_leaf is False   # three children
    for nid in (2, 3, 4):
        assert classes[nid].is_leaf is True and classes[nid].is_split is False


def test_classify_no_frontier_on_fully_explored_map():
    tree = chain_tree([(5, 5), (8, 5)])
    grid = open_grid(20, 20, explored=True)
    classes = classify_nodes(tree, grid, frontier_distance=3.0)
    assert not any(c.is_frontier for c in classes.values())


def test_classify_frontier_distance_threshold():
    grid = open_grid(20, 20, explored=True)
    grid.explored[10, 15] = False  # single unexplored cell at (15, 10)
    tree = chain_tree([(13, 10), (5, 10)])
    classes = classify_nodes(tree, grid, frontier_distance=2.0)
    assert classes[0].is_frontier is True    # distance 2
    assert classes[1].is_frontier is False   # distance 10


def test_classify_is_pure():
    grid = open_grid(20, 20)
    grid.explored[0, 0] = False
    tree = chain_tree([(5, 5), (8, 5), (11, 5)])
    a = classify_nodes(tree, grid, 2.0)
    b = classify_nodes(tree, grid, 2.0)
    assert a == b


# -- select_frontier ----------------------------------------------------------


def _classes(frontier_ids, tree):
    return {
        nid: NodeClass(is_frontier=nid in frontier_ids,
                       is_leaf=not tree.nodes[nid].children,
                       is_split=len(tree.nodes[nid].children) >= 2)
        for nid in tree.nodes
    }


def test_select_frontier_singleton():
    grid = open_grid(20, 20)
    tree = chain_tree([(5, 5), (10, 5)])
    choice = select_frontier(tree, grid, robot_at(5, 5), _classes({1}, tree))
    assert choice.target_id == 1
    assert choice.attempts == 0


def test_select_frontier_empty_candidates():
    grid = open_grid(20, 20)
    tree = chain_tree([(5, 5), (10, 5)])
    choice = select_frontier(tree, grid, robot_at(5, 5), _classes(set(), tree))
    assert choice.target_id is None
    assert choice.attempts == 0


def test_select_frontier_skips_blocked_nearer_candidate():
    # frontier nodes at distances 5 and 9; the nearer one's cell turned obstacle
    grid = open_grid(30, 30)
    tree = chain_tree([(5, 5), (10, 5), (14, 5)])
    grid.occupancy[5, 10] = True  # node 1's cell no longer free
    choice = select_frontier(tree, grid, robot_at(5, 5), _classes({1, 2}, tree))
    assert choice.target_id == 2
    assert choice.attempts == 1


def test_select_frontier_nearest_first_tie_by_id():
    grid = open_grid(30, 30)
    tree = chain_tree([(5, 5)])
    a = tree.add_node(9, 5, 0)   # distance 4
    b = tree.add_node(5, 9, 0)   # distance 4 (tie)
    c = tree.add_node(5, 7, 0)   # distance 2
    choice = select_frontier(tree, grid, robot_at(5, 5), _classes({a, b, c}, tree))
    assert choice.target_id == c
    choice = select_frontier(tree, grid, robot_at(5, 5), _classes({a, b}, tree))
    assert choice.target_id == a  # tie resolved by ascending id


def test_select_frontier_min_stride_prefers_far_group():
    grid = open_grid(40, 40)
    tree = chain_tree([(5, 5)])
    near = tree.add_node(7, 5, 0)    # distance 2, below stride
    far = tree.add_node(15, 5, 0)    # distance 10, above stride
    classes = _classes({near, far}, tree)
    choice = select_frontier(tree, grid, robot_at(5, 5), classes, min_stride=8.0)
    assert choice.target_id == far
    choice = select_frontier(tree, grid, robot_at(5, 5), classes)
    assert choice.target_id == near


def test_select_frontier_exhausted_cells_skipped():
    grid = open_grid(30, 30)
    tree = chain_tree([(5, 5), (10, 5), (14, 5)])
    exhausted = {(10, 5)}
    choice = select_frontier(tree, grid, robot_at(5, 5), _classes({1, 2}, tree),
                             exhausted=exhausted)
    assert choice.target_id == 2


def test_select_frontier_visibility_gate_rejects_wall_facing():
    # unexplored pocket behind a wall: a frontier node with no revealable cell
    grid = open_grid(30, 30, explored=True)
    grid.occupancy[10, 12] = True
    grid.explored[10, 13] = False  # unexplored, but wall blocks sight from (11, 10)
    tree = chain_tree([(5, 10), (11, 10)])
    exhausted: set = set()
    choice = select_frontier(tree, grid, robot_at(5, 10), _classes({1}, tree),
                             exhausted=exhausted, fov_radius=2)
    assert choice.target_id is None
    assert (11, 10) in exhausted
    # without the gate the node is accepted (spec default behavior)
    choice = select_frontier(tree, grid, robot_at(5, 10), _classes({1}, tree))
    assert choice.target_id == 1


def test_frontier_visible_true_with_open_unexplored():
    grid = open_grid(20, 20, explored=True)
    grid.explored[5, 7] = False
    assert frontier_visible(grid, 5, 5, radius=3)
    assert not frontier_visible(grid, 15, 15, radius=3)


# -- move_robot ---------------------------------------------------------------


def test_move_to_own_position_increments_moves_reveals_nothing():
    grid = open_grid(20, 20, explored=True)
    tree = chain_tree([(5, 5)])
    robot = robot_at(5, 5, fov=2)
    revealed = move_robot(tree, grid, robot, 0)
    assert revealed == 0
    assert robot.moves_taken == 1


def test_move_reveals_along_path():
    # path around two hops; compare against per-node reveal on a twin grid
    grid = open_grid(30, 30, explored=False)
    grid.explored[:12, :12] = True
    tree = chain_tree([(2, 2), (6, 2), (10, 2)])
    robot = robot_at(2, 2, fov=2)
    twin = grid.copy()
    total = move_robot(tree, grid, robot, 2)
    expect = 0
    for x, y in [(2, 2), (6, 2), (10, 2)]:
        expect += reveal(twin, robot_at(x, y, fov=2))
    assert total == expect
    assert np.array_equal(grid.explored, twin.explored)
    assert (robot.x, robot.y) == (10, 2)
    assert robot.moves_taken == 1


def test_move_rejects_invalid_target():
    grid = open_grid(20, 20)
    tree = chain_tree([(5, 5), (10, 5)])
    grid.occupancy[5, 10] = True
    with pytest.raises(ValueError):
        move_robot(tree, grid, robot_at(5, 5), 1)


# -- remove_node / structure --------------------------------------------------


def test_remove_leaf():
    tree = chain_tree([(0, 0), (2, 0), (4, 0)])
    tree.remove_node(2)
    assert 2 not in tree.nodes
    assert tree.nodes[1].children == set()
    tree.audit()


def test_remove_chain_interior_reconnects_to_grandparent():
    tree = chain_tree([(0, 0), (2, 0), (4, 0)])
    tree.remove_node(1)
    assert tree.nodes[2].parent == 0
    assert tree.nodes[0].children == {2}
    tree.audit()


def test_remove_split_node_reparents_all_children():
    tree = chain_tree([(0, 0), (2, 0)])
    c1 = tree.add_node(4, 0, 1)
    c2 = tree.add_node(2, 2, 1)
    tree.remove_node(1)
    assert tree.nodes[c1].parent == 0 and tree.nodes[c2].parent == 0
    assert tree.nodes[0].children == {c1, c2}
    tree.audit()


def test_remove_root_and_protected_refused():
    tree = chain_tree([(0, 0), (2, 0)])
    with pytest.raises(TreeError):
        tree.remove_node(0)
    with pytest.raises(TreeError):
        tree.remove_node(1, protected=(1,))
    with pytest.raises(TreeError):
        tree.remove_node(99)


def test_path_through_lowest_common_ancestor():
    tree = chain_tree([(0, 0), (2, 0), (4, 0)])
    b1 = tree.add_node(2, 2, 1)
    assert tree.path(2, b1) == [2, 1, b1]
    assert tree.path(0, 2) == [0, 1, 2]
    assert tree.path(2, 2) == [2]


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_random_grow_remove_interleaving_audits_clean(seed):
    rng = np.random.default_rng(seed)
    grid = open_grid(25, 25)
    tree = ExplorationTree(12, 12)
    for _ in range(30):
        if rng.random() < 0.6 or len(tree) < 3:
            grow(tree, grid, attempts=5, step=4.0, rng=rng)
        else:
            candidates = [n for n in tree.nodes if n != tree.root_id]
            tree.remove_node(int(rng.choice(candidates)))
        tree.audit(grid)


def test_snapshot_lines_format():
    tree = chain_tree([(1, 2), (3, 4)])
    assert tree.snapshot_lines() == ["0 1 2 -1", "1 3 4 0"]
