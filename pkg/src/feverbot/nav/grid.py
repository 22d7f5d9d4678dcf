"""Log-odds occupancy grid, lidar mapping with known pose, and the inflated costmap."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..world import LidarScan, Pose2D, World

L_FREE = -0.4
L_OCC = 0.85
L_CLAMP = 3.5

LETHAL = 254.0
INSCRIBED = 253.0
MAX_INFLATION = 252.0


@dataclass(frozen=True)
class PlannerParams:
    cost_factor: float = 0.8
    neutral_cost: float = 50.0
    robot_radius: float = 0.25
    inflation_radius: float = 0.35
    occupied_threshold: float = 0.65

    def __post_init__(self):
        if self.neutral_cost <= 0:
            raise ValueError("neutral_cost must be positive")
        if self.cost_factor < 0:
            raise ValueError("cost_factor must be non-negative")
        if not 0 < self.occupied_threshold < 1:
            raise ValueError("occupied_threshold must lie in (0, 1)")


@dataclass
class OccupancyGrid:
    resolution: float
    width: int
    height: int
    origin: tuple = (0.0, 0.0)
    log_odds: np.ndarray = None  # shape (height, width), indexed [row=iy, col=ix]
    observed: np.ndarray = None

    def __post_init__(self):
        if self.log_odds is None:
            self.log_odds = np.zeros((self.height, self.width))
        if self.observed is None:
            self.observed = np.zeros((self.height, self.width), dtype=bool)
        if self.log_odds.shape != (self.height, self.width):
            raise ValueError("log_odds shape does not match grid size")

    @classmethod
    def for_bounds(cls, bounds, resolution: float = 0.05, margin: float = 0.1) -> "OccupancyGrid":
        w, h = bounds
        nx = int(math.ceil(round((w + 2 * margin) / resolution, 9)))
        ny = int(math.ceil(round((h + 2 * margin) / resolution, 9)))
        return cls(resolution, nx, ny, (-margin, -margin))

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.resolution, self.width, self.height, self.origin,
                             self.log_odds.copy(), self.observed.copy())

    def world_to_cell(self, x: float, y: float) -> tuple:
        return (int(math.floor((x - self.origin[0]) / self.resolution)),
                int(math.floor((y - self.origin[1]) / self.resolution)))

    def cell_center(self, ix: int, iy: int) -> tuple:
        return (self.origin[0] + (ix + 0.5) * self.resolution,
                self.origin[1] + (iy + 0.5) * self.resolution)

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def probability(self) -> np.ndarray:
        return 1.0 - 1.0 / (1.0 + np.exp(self.log_odds))

    def occupied(self, threshold: float = 0.65) -> np.ndarray:
        return self.probability() >= threshold


def grid_from_world(world: World, resolution: float = 0.05, margin: float = 0.1) -> OccupancyGrid:
    """Fully observed ground-truth grid: a cell is occupied when its center lies
    inside an obstacle or outside the world bounds."""
    if world.bounds is None:
        raise ValueError("ground-truth rasterisation needs bounded worlds")
    grid = OccupancyGrid.for_bounds(world.bounds, resolution, margin)
    truth = ground_truth_occupancy(world, grid)
    grid.log_odds = np.where(truth, L_CLAMP, -L_CLAMP)
    grid.observed[:] = True
    return grid


def ground_truth_occupancy(world: World, grid: OccupancyGrid) -> np.ndarray:
    xs = grid.origin[0] + (np.arange(grid.width) + 0.5) * grid.resolution
    ys = grid.origin[1] + (np.arange(grid.height) + 0.5) * grid.resolution
    X, Y = np.meshgrid(xs, ys)
    occ = np.zeros(X.shape, dtype=bool)
    if world.bounds is not None:
        w, h = world.bounds
        occ |= (X < 0) | (Y < 0) | (X > w) | (Y > h)
    for x0, y0, x1, y1 in world.obstacles:
        occ |= (X >= x0) & (X <= x1) & (Y >= y0) & (Y <= y1)
    return occ


def update_occupancy(grid: OccupancyGrid, pose: Pose2D, scan: LidarScan) -> OccupancyGrid:
    """Integrate one scan taken at ``pose`` and return the updated grid.

    Each finite beam lowers the log-odds of the cells it crosses (a DDA line
    walk from the robot cell, endpoint excluded) and raises the endpoint cell.
    Evidence from all beams of the scan is summed, then clamped.
    """
    out = grid.copy()
    finite = np.isfinite(scan.ranges)
    if not finite.any():
        return out
    ix0, iy0 = grid.world_to_cell(pose.x, pose.y)
    if not grid.in_bounds(ix0, iy0):
        raise ValueError("pose lies outside the grid")
    r = scan.ranges[finite]
    a = scan.angles[finite] + pose.theta
    # nudge past the surface so a hit exactly on a cell edge lands in the hit cell
    ex = pose.x + (r + 1e-6) * np.cos(a)
    ey = pose.y + (r + 1e-6) * np.sin(a)
    ix1 = np.floor((ex - grid.origin[0]) / grid.resolution).astype(np.int64)
    iy1 = np.floor((ey - grid.origin[1]) / grid.resolution).astype(np.int64)
    di, dj = ix1 - ix0, iy1 - iy0
    n = np.maximum(np.abs(di), np.abs(dj))

    size = grid.log_odds.size
    free_hits = np.zeros(size, dtype=np.int64)
    kmax = int(n.max())
    if kmax > 0:
        k = np.arange(kmax)[None, :]
        nn = np.maximum(n, 1)[:, None]
        cx = ix0 + np.rint(k * di[:, None] / nn).astype(np.int64)
        cy = iy0 + np.rint(k * dj[:, None] / nn).astype(np.int64)
        mask = (k < n[:, None]) & (cx >= 0) & (cx < grid.width) & (cy >= 0) & (cy < grid.height)
        free_hits = np.bincount((cy * grid.width + cx)[mask], minlength=size)

    hit = (ix1 >= 0) & (ix1 < grid.width) & (iy1 >= 0) & (iy1 < grid.height)
    occ_hits = np.bincount((iy1 * grid.width + ix1)[hit], minlength=size)
    delta = free_hits * L_FREE + occ_hits * L_OCC
    touched = (free_hits > 0) | (occ_hits > 0)

    lo = out.log_odds.ravel()
    lo[touched] = np.clip(lo[touched] + delta[touched], -L_CLAMP, L_CLAMP)
    out.observed.ravel()[touched] = True
    return out


def clearance_map(grid: OccupancyGrid, threshold: float = 0.65) -> np.ndarray:
    """Distance in meters from each cell center to the nearest occupied cell center."""
    occ = grid.occupied(threshold)
    if not occ.any():
        return np.full(occ.shape, np.inf)
    return ndimage.distance_transform_edt(~occ) * grid.resolution


def build_costmap(grid: OccupancyGrid, params: PlannerParams, clearance: np.ndarray = None) -> tuple:
    """Returns (inflation_cost, lethal) arrays.

    Occupied cells and cells within ``robot_radius`` of one are lethal. Beyond
    that the inflation cost falls linearly from 252 at the lethal boundary to 0
    at ``inflation_radius``.
    """
    d = clearance if clearance is not None else clearance_map(grid, params.occupied_threshold)
    lethal = d <= params.robot_radius
    band = params.inflation_radius - params.robot_radius
    if band > 0:
        infl = MAX_INFLATION * np.clip((params.inflation_radius - d) / band, 0.0, 1.0)
    else:
        infl = np.zeros_like(d)
    infl = np.where(lethal, LETHAL, infl)
    infl = np.where(np.isfinite(infl), infl, 0.0)
    return infl, lethal


def cell_costs(grid: OccupancyGrid, params: PlannerParams, clearance: np.ndarray = None) -> tuple:
    """Traversal cost per cell (neutral_cost + cost_factor * inflation) and the lethal mask."""
    infl, lethal = build_costmap(grid, params, clearance)
    cost = params.neutral_cost + params.cost_factor * np.where(lethal, 0.0, infl)
    return cost, lethal


def to_pgm(grid: OccupancyGrid) -> bytes:
    """Binary PGM (P5): free is light, occupied dark, unobserved 205."""
    p = grid.probability()
    img = np.rint(255 * (1.0 - p)).astype(np.uint8)
    img[~grid.observed] = 205
    img = img[::-1]  # row 0 of the image is the top (max y)
    header = (f"P5\n# feverbot-occupancy v1 resolution={grid.resolution} "
              f"origin={grid.origin[0]},{grid.origin[1]}\n{grid.width} {grid.height}\n255\n")
    return header.encode("ascii") + img.tobytes()


def from_pgm(data: bytes, resolution: float = 0.05, origin=(0.0, 0.0)) -> OccupancyGrid:
    """Inverse of :func:`to_pgm` up to 8-bit quantisation."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end].decode("ascii"))
        pos = end
    if tokens[0] != "P5":
        raise ValueError("not a binary PGM")
    w, h = int(tokens[1]), int(tokens[2])
    img = np.frombuffer(data[pos + 1:pos + 1 + w * h], dtype=np.uint8).reshape(h, w)[::-1]
    observed = img != 205
    p = np.clip(1.0 - img / 255.0, 1e-6, 1 - 1e-6)
    lo = np.where(observed, np.clip(np.log(p / (1 - p)), -L_CLAMP, L_CLAMP), 0.0)
    return OccupancyGrid(resolution, w, h, tuple(origin), lo, observed)
