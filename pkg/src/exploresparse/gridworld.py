"""Deterministic 2D occupancy-grid environment with a field-of-view robot.

The grid holds free and obstacle cells plus a monotone "explored" mask.
The robot senses through a Euclidean-disc field of view with supercover
line-of-sight; obstacle cells block sight but are themselves revealed
(the robot sees the wall face).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage


class EnvironmentGenerationError(RuntimeError):
    """Raised when no valid free region can be generated (over-dense obstacles)."""


@dataclass
class EnvConfig:
    width: int = 250
    height: int = 250
    obstacle_count_range: tuple[int, int] = (8, 16)
    obstacle_size_range: tuple[int, int] = (10, 50)
    fov_radius: int = 25
    # minimum clearance of the start cell from obstacles; None -> fov_radius / 2
    min_start_clearance: float | None = None
    max_regen_attempts: int = 50

    def validate(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError("map dimensions must be positive")
        lo, hi = self.obstacle_count_range
        if lo > hi or lo < 0:
            raise ValueError("obstacle_count_range must be a non-empty range")
        lo, hi = self.obstacle_size_range
        if lo > hi or lo < 1:
            raise ValueError("obstacle_size_range must be a non-empty range")
        if self.fov_radius < 1:
            raise ValueError("fov_radius must be >= 1")

    @property
    def start_clearance(self) -> float:
        if self.min_start_clearance is not None:
            return self.min_start_clearance
        return self.fov_radius / 2


@dataclass
class GridMap:
    occupancy: np.ndarray  # bool (H, W), True = obstacle
    explored: np.ndarray   # bool (H, W), monotone within an episode
    free_cell_count: int

    @property
    def height(self) -> int:
        return self.occupancy.shape[0]

    @property
    def width(self) -> int:
        return self.occupancy.shape[1]

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def is_free(self, x: int, y: int) -> bool:
        return self.in_bounds(x, y) and not self.occupancy[y, x]

    def is_explored_free(self, x: int, y: int) -> bool:
        return self.is_free(x, y) and bool(self.explored[y, x])

    def copy(self) -> "GridMap":
        return GridMap(self.occupancy.copy(), self.explored.copy(), self.free_cell_count)


@dataclass
class RobotState:
    x: int
    y: int
    fov_radius: int
    moves_taken: int = 0

    @property
    def position(self) -> tuple[int, int]:
        return (self.x, self.y)


@lru_cache(maxsize=None)
def disc_offsets(radius: int) -> tuple[tuple[int, int], ...]:
    """Integer offsets within Euclidean distance `radius` of the origin."""
    r = int(np.ceil(radius))
    out = []
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if dx * dx + dy * dy <= radius * radius:
                out.append((dx, dy))
    return tuple(out)


def supercover_line(a: tuple[int, int], b: tuple[int, int]) -> list[tuple[int, int]]:
    """All grid cells crossed by the segment between the centers of a and b.

    Supercover variant of Bresenham: when the segment passes exactly through
    a cell corner, both adjacent cells are included, so the result is
    symmetric in (a, b) as a set.
    """
    x, y = a
    x1, y1 = b
    dx = x1 - x
    dy = y1 - y
    xstep = 1 if dx > 0 else -1
    ystep = 1 if dy > 0 else -1
    dx = abs(dx)
    dy = abs(dy)
    ddx = 2 * dx
    ddy = 2 * dy
    cells = [(x, y)]
    if ddx >= ddy:
        errorprev = error = dx
        for _ in range(dx):
            x += xstep
            error += ddy
            if error > ddx:
                y += ystep
                error -= ddx
                if error + errorprev < ddx:
                    cells.append((x, y - ystep))
                elif error + errorprev > ddx:
                    cells.append((x - xstep, y))
                else:  # exact corner crossing
                    cells.append((x, y - ystep))
                    cells.append((x - xstep, y))
            cells.append((x, y))
            errorprev = error
    else:
        errorprev = error = dy
        for _ in range(dy):
            y += ystep
            error += ddx
            if error > ddy:
                x += xstep
                error -= ddy
                if error + errorprev < ddy:
                    cells.append((x - xstep, y))
                elif error + errorprev > ddy:
                    cells.append((x, y - ystep))
                else:
                    cells.append((x - xstep, y))
                    cells.append((x, y - ystep))
            cells.append((x, y))
            errorprev = error
    return cells


def line_of_sight(grid: GridMap, a: tuple[int, int], b: tuple[int, int]) -> bool:
    """True iff no cell strictly between a and b on the grid ray is an obstacle.

    Endpoints are excluded so that a visible wall face does not block itself;
    symmetric in (a, b).
    """
    if a == b:
        return True
    occ = grid.occupancy
    for (cx, cy) in supercover_line(a, b):
        if (cx, cy) == a or (cx, cy) == b:
            continue
        if occ[cy, cx]:
            return False
    return True


def segment_explored_free(grid: GridMap, a: tuple[int, int], b: tuple[int, int]) -> bool:
    """True iff every cell crossed by the segment (endpoints included) is explored and free."""
    occ = grid.occupancy
    exp = grid.explored
    for (cx, cy) in supercover_line(a, b):
        if occ[cy, cx] or not exp[cy, cx]:
            return False
    return True


def reveal(grid: GridMap, robot: RobotState) -> int:
    """Mark every cell in the robot's FOV disc with unobstructed sight as explored.

    Returns the number of newly explored cells. Idempotent: a second call from
    the same position returns 0.
    """
    newly = 0
    rx, ry = robot.x, robot.y
    exp = grid.explored
    for dx, dy in disc_offsets(robot.fov_radius):
        cx, cy = rx + dx, ry + dy
        if not grid.in_bounds(cx, cy) or exp[cy, cx]:
            continue
        if line_of_sight(grid, (rx, ry), (cx, cy)):
            exp[cy, cx] = True
            newly += 1
    return newly


def coverage(grid: GridMap) -> float:
    """Fraction of free cells that have been explored, in [0, 1]."""
    if grid.free_cell_count == 0:
        return 1.0
    explored_free = int(np.count_nonzero(grid.explored & ~grid.occupancy))
    return explored_free / grid.free_cell_count


def _populate_obstacles(occ: np.ndarray, config: EnvConfig, rng: np.random.Generator) -> None:
    h, w = occ.shape
    lo_n, hi_n = config.obstacle_count_range
    n = int(rng.integers(lo_n, hi_n + 1))
    lo_s, hi_s = config.obstacle_size_range
    for _ in range(n):
        bw = int(rng.integers(lo_s, hi_s + 1))
        bh = int(rng.integers(lo_s, hi_s + 1))
        bw = min(bw, w)
        bh = min(bh, h)
        x0 = int(rng.integers(0, w - bw + 1))
        y0 = int(rng.integers(0, h - bh + 1))
        occ[y0:y0 + bh, x0:x0 + bw] = True


def _start_candidates(occ: np.ndarray, clearance: float) -> np.ndarray:
    """(N, 2) array of [y, x] free cells at >= clearance from any obstacle,
    restricted to the largest connected free component."""
    free = ~occ
    if clearance > 0 and occ.any():
        # EDT distance of each free cell to the nearest obstacle cell
        dist = ndimage.distance_transform_edt(free)
        ok = free & (dist >= clearance)
    else:
        ok = free
    if not ok.any():
        return np.empty((0, 2), dtype=int)
    labels, n_comp = ndimage.label(free)
    if n_comp > 1:
        sizes = ndimage.sum_labels(np.ones_like(labels), labels, index=range(1, n_comp + 1))
        biggest = int(np.argmax(sizes)) + 1
        ok = ok & (labels == biggest)
    return np.argwhere(ok)


def generate_environment(config: EnvConfig, seed: int) -> tuple[GridMap, RobotState]:
    """Build a seeded random map and place the robot; reveals the start FOV.

    The same (config, seed) always yields a bit-identical map and start.
    Raises EnvironmentGenerationError after max_regen_attempts failed layouts.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    for _ in range(config.max_regen_attempts):
        occ = np.zeros((config.height, config.width), dtype=bool)
        _populate_obstacles(occ, config, rng)
        candidates = _start_candidates(occ, config.start_clearance)
        if len(candidates) == 0:
            continue
        sy, sx = candidates[int(rng.integers(0, len(candidates)))]
        grid = GridMap(
            occupancy=occ,
            explored=np.zeros_like(occ),
            free_cell_count=int(np.count_nonzero(~occ)),
        )
        robot = RobotState(x=int(sx), y=int(sy), fov_radius=config.fov_radius)
        reveal(grid, robot)
        return grid, robot
    raise EnvironmentGenerationError(
        f"no valid start region after {config.max_regen_attempts} layouts; "
        "obstacle configuration is too dense"
    )
