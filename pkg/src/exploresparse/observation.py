"""Render (map, tree, robot) into the fixed-size state image and patch tokens.

The observation is a 4-plane intensity image (obstacle, explored-free,
graph overlay, robot/FOV) rather than an RGB screenshot; a palette
composite is available for human viewing and PPM export.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exploration import ExplorationTree
from .gridworld import GridMap, RobotState, disc_offsets, supercover_line

N_CHANNELS = 4
CH_OBSTACLE = 0
CH_EXPLORED = 1
CH_GRAPH = 2
CH_ROBOT = 3

# Palette for the composite export (RGB): magenta obstacles, gray explored
# free space, black unexplored, blue tree, yellow robot/FOV ring.
PALETTE = {
    "unexplored": (0, 0, 0),
    "explored_free": (128, 128, 128),
    "obstacle": (255, 0, 255),
    "graph": (0, 64, 255),
    "fov": (255, 255, 0),
    "robot": (255, 160, 0),
}

FOV_RING_INTENSITY = 0.5  # FOV ring vs full-intensity robot dot in CH_ROBOT


def render(grid: GridMap, tree: ExplorationTree, robot: RobotState) -> np.ndarray:
    """Deterministic (C, H, W) float32 rasterization in [0, 1].

    Only explored obstacles appear (the agent observes what it has sensed);
    tree edges are drawn as supercover segments in the graph plane.
    """
    h, w = grid.occupancy.shape
    img = np.zeros((N_CHANNELS, h, w), dtype=np.float32)
    img[CH_OBSTACLE] = (grid.occupancy & grid.explored).astype(np.float32)
    img[CH_EXPLORED] = (grid.explored & ~grid.occupancy).astype(np.float32)
    graph = img[CH_GRAPH]
    for nid, node in tree.nodes.items():
        if node.parent is not None:
            parent = tree.nodes[node.parent]
            for (cx, cy) in supercover_line((node.x, node.y), (parent.x, parent.y)):
                graph[cy, cx] = 1.0
        graph[node.y, node.x] = 1.0
    rob = img[CH_ROBOT]
    r = robot.fov_radius
    for dx, dy in disc_offsets(r):
        if (r - 1) ** 2 < dx * dx + dy * dy <= r * r:
            cx, cy = robot.x + dx, robot.y + dy
            if grid.in_bounds(cx, cy):
                rob[cy, cx] = FOV_RING_INTENSITY
    rob[robot.y, robot.x] = 1.0
    return img


@dataclass
class TokenSequence:
    patches: np.ndarray          # (n_tokens, patch*patch*channels)
    grid_shape: tuple[int, int]  # (rows, cols) of the patch grid
    patch_size: int


def tokenize(img: np.ndarray, patch_size: int) -> TokenSequence:
    """Cut the image into row-major flattened patches; lossless."""
    c, h, w = img.shape
    if h % patch_size or w % patch_size:
        raise ValueError(f"image {h}x{w} not divisible by patch size {patch_size}")
    rows, cols = h // patch_size, w // patch_size
    # (C, rows, p, cols, p) -> (rows, cols, C, p, p) -> (rows*cols, C*p*p)
    x = img.reshape(c, rows, patch_size, cols, patch_size)
    x = x.transpose(1, 3, 0, 2, 4).reshape(rows * cols, c * patch_size * patch_size)
    return TokenSequence(np.ascontiguousarray(x), (rows, cols), patch_size)


def detokenize(seq: TokenSequence, channels: int = N_CHANNELS) -> np.ndarray:
    """Inverse of tokenize."""
    rows, cols = seq.grid_shape
    p = seq.patch_size
    x = seq.patches.reshape(rows, cols, channels, p, p).transpose(2, 0, 3, 1, 4)
    return np.ascontiguousarray(x.reshape(channels, rows * p, cols * p))


def composite_rgb(grid: GridMap, tree: ExplorationTree | None, robot: RobotState | None) -> np.ndarray:
    """(H, W, 3) uint8 palette composite matching the documented color key."""
    h, w = grid.occupancy.shape
    rgb = np.zeros((h, w, 3), dtype=np.uint8)
    rgb[grid.explored & ~grid.occupancy] = PALETTE["explored_free"]
    rgb[grid.explored & grid.occupancy] = PALETTE["obstacle"]
    if tree is not None:
        for node in tree.nodes.values():
            if node.parent is not None:
                parent = tree.nodes[node.parent]
                for (cx, cy) in supercover_line((node.x, node.y), (parent.x, parent.y)):
                    rgb[cy, cx] = PALETTE["graph"]
            rgb[node.y, node.x] = PALETTE["graph"]
    if robot is not None:
        r = robot.fov_radius
        for dx, dy in disc_offsets(r):
            if (r - 1) ** 2 < dx * dx + dy * dy <= r * r:
                cx, cy = robot.x + dx, robot.y + dy
                if grid.in_bounds(cx, cy):
                    rgb[cy, cx] = PALETTE["fov"]
        rgb[robot.y, robot.x] = PALETTE["robot"]
    return rgb


def write_ppm(rgb: np.ndarray, path) -> None:
    """Binary P6 portable pixmap."""
    h, w, _ = rgb.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(rgb.astype(np.uint8).tobytes())
