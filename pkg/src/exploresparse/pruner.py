"""Decode a Gaussian-mixture action into a concrete prune set.

Mixture density is evaluated at node coordinates, optional trigonometric
noise and per-component gates are applied, and the highest-density nodes
are removed at the configured fraction of tree growth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass
class GmmAction:
    """K-component mixture over map coordinates with diagonal covariance.

    weights: (K,) simplex; means: (K, 2) map coordinates [x, y];
    stds: (K, 2) per-axis positive lengths; gates: optional (K,) bool,
    False deactivates a component (its weight mass is simply absent).
    """

    weights: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    gates: np.ndarray | None = None

    @property
    def n_components(self) -> int:
        return len(self.weights)

    def validate(self, bounds: tuple[float, float] | None = None, sigma_min: float = 0.0) -> None:
        if abs(float(self.weights.sum()) - 1.0) > 1e-9 or (self.weights < 0).any():
            raise ValueError("mixture weights must be a simplex")
        if (self.stds < sigma_min).any() or (self.stds <= 0).any():
            raise ValueError("stds must be positive and >= sigma_min")
        if bounds is not None:
            w, h = bounds
            if (self.means[:, 0] < 0).any() or (self.means[:, 0] > w - 1).any():
                raise ValueError("mean x out of map bounds")
            if (self.means[:, 1] < 0).any() or (self.means[:, 1] > h - 1).any():
                raise ValueError("mean y out of map bounds")


@dataclass
class PrunerConfig:
    prune_fraction: float = 0.96  # fraction of growth cancelled per prune round
    sigma_min: float = 0.05
    noise_enabled: bool = False
    noise_scale: float = 1e-3
    # per-axis angular frequencies of the noise pattern; None -> (2pi/width, 2pi/height)
    noise_frequencies: tuple[float, float] | None = None

    def validate(self) -> None:
        if not (0.0 <= self.prune_fraction < 1.0):
            raise ValueError("prune_fraction must be in [0, 1)")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")

    def frequencies_for(self, width: int, height: int) -> tuple[float, float]:
        if self.noise_frequencies is not None:
            return self.noise_frequencies
        return (TWO_PI / width, TWO_PI / height)


def gmm_density(action: GmmAction, points: np.ndarray) -> np.ndarray:
    """Mixture density at `points` (..., 2); gated-off components contribute 0."""
    pts = np.asarray(points, dtype=float)
    scalar = pts.ndim == 1
    pts = pts.reshape(-1, 2)
    out = np.zeros(len(pts))
    for k in range(action.n_components):
        if action.gates is not None and not action.gates[k]:
            continue
        sx, sy = action.stds[k]
        dx = (pts[:, 0] - action.means[k, 0]) / sx
        dy = (pts[:, 1] - action.means[k, 1]) / sy
        out += action.weights[k] / (TWO_PI * sx * sy) * np.exp(-0.5 * (dx * dx + dy * dy))
    return out[0] if scalar else out


def max_density_on_grid(
    action: GmmAction, width: int, height: int, ignore_gates: bool = False
) -> float:
    """Max mixture density over all cell centers of the map grid.

    With ignore_gates=True the full (ungated) mixture is evaluated; the
    noise amplitude uses this so deactivating components cannot zero out
    the noise itself.
    """
    probe = action
    if ignore_gates and action.gates is not None:
        probe = GmmAction(action.weights, action.means, action.stds, gates=None)
    xs, ys = np.meshgrid(np.arange(width, dtype=float), np.arange(height, dtype=float))
    pts = np.stack([xs.ravel(), ys.ravel()], axis=1)
    return float(gmm_density(probe, pts).max())


def noise_field(points: np.ndarray, frequencies: tuple[float, float]) -> np.ndarray:
    """Deterministic spatial pattern eta(x) = (sin(wx*x)*cos(wy*y) + 1)/2 in [0, 1]."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    wx, wy = frequencies
    return (np.sin(wx * pts[:, 0]) * np.cos(wy * pts[:, 1]) + 1.0) / 2.0


def apply_noise(
    base_density: np.ndarray,
    points: np.ndarray,
    global_max_density: float,
    config: PrunerConfig,
    frequencies: tuple[float, float],
) -> np.ndarray:
    """base + noise_scale * global_max * eta(x); never below base."""
    eta = noise_field(points, frequencies)
    return np.asarray(base_density, dtype=float) + config.noise_scale * global_max_density * eta


def prune_count(nodes_added_since_prune: int, prune_fraction: float, tree_size: int) -> int:
    """floor(fraction * nodes added), clamped so the tree keeps >= 2 nodes."""
    if nodes_added_since_prune < 0:
        raise ValueError("nodes_added_since_prune must be >= 0")
    n = int(math.floor(prune_fraction * nodes_added_since_prune))
    return max(0, min(n, tree_size - 2))


def prune_count_with_carry(
    nodes_added_since_prune: int, prune_fraction: float, tree_size: int, carry: float
) -> tuple[int, float]:
    """prune_count with the sub-node floor remainder carried across rounds.

    Over an episode the pruned total tracks floor(fraction * cumulative
    growth) instead of losing up to one node per round to flooring.
    Returns (count, new_carry); the carry is dropped when clamping bites.
    """
    if nodes_added_since_prune < 0:
        raise ValueError("nodes_added_since_prune must be >= 0")
    want = prune_fraction * nodes_added_since_prune + carry
    n = int(math.floor(want))
    clamped = max(0, min(n, tree_size - 2))
    new_carry = want - n if clamped == n else 0.0
    return clamped, new_carry


def _prunable_ids(tree, protected: tuple[int, ...]) -> list[int]:
    blocked = set(protected) | {tree.root_id}
    return [nid for nid in tree.nodes if nid not in blocked]


def select_prune_set(
    tree,
    action: GmmAction,
    n: int,
    config: PrunerConfig,
    map_shape: tuple[int, int],
    protected: tuple[int, ...] = (),
) -> list[int]:
    """The n highest-density prunable node ids, ties broken by ascending id.

    With noise enabled, densities are the noised values; with all densities
    equal (e.g. every component gated off and no noise) the order falls
    back to ascending id.
    """
    ids = _prunable_ids(tree, protected)
    if n <= 0 or not ids:
        return []
    ids_arr = np.array(sorted(ids))
    pts = np.array([[tree.nodes[i].x, tree.nodes[i].y] for i in ids_arr], dtype=float)
    dens = gmm_density(action, pts)
    if config.noise_enabled and config.noise_scale > 0:
        width, height = map_shape
        gmax = max_density_on_grid(action, width, height, ignore_gates=True)
        if gmax <= 0:
            gmax = 1.0
        dens = apply_noise(dens, pts, gmax, config, config.frequencies_for(width, height))
    # stable sort on ascending id array -> ties resolve to the lowest ids
    order = np.argsort(-dens, kind="stable")
    take = min(n, len(ids_arr))
    return [int(i) for i in ids_arr[order[:take]]]


def random_prune_set(tree, n: int, rng: np.random.Generator, protected: tuple[int, ...] = ()) -> list[int]:
    """Uniform sample of n prunable ids without replacement; seeded-deterministic."""
    ids = sorted(_prunable_ids(tree, protected))
    take = min(max(n, 0), len(ids))
    if take == 0:
        return []
    picked = rng.choice(len(ids), size=take, replace=False)
    return [ids[int(i)] for i in picked]


def apply_prune(tree, ids: list[int], protected: tuple[int, ...] = ()) -> None:
    """Remove the listed nodes in order; resets the growth counter."""
    for nid in ids:
        tree.remove_node(nid, protected=protected)
    tree.nodes_added_since_prune = 0
