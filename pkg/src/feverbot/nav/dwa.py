"""Dynamic Window Approach local planner."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..world import Pose2D, RobotState, VelocityCommand, normalize_angle
from .grid import OccupancyGrid, clearance_map


@dataclass(frozen=True)
class DwaParams:
    sim_time: float = 1.5
    sim_dt: float = 0.1
    v_samples: int = 11
    w_samples: int = 21
    a_max: float = 0.25
    alpha_max: float = 1.5
    w_goal: float = 1.0
    w_vel: float = 0.3
    w_clear: float = 0.5
    dt: float = 0.1  # control period that bounds the window
    v_max: float = 0.274
    w_max: float = 1.0
    robot_radius: float = 0.25
    occupied_threshold: float = 0.65
    lookahead: float = 0.6
    clearance_max: float = 1.0

    def __post_init__(self):
        if not self.sim_time > self.sim_dt > 0:
            raise ValueError("need sim_time > sim_dt > 0")
        if self.v_samples < 2 or self.w_samples < 2:
            raise ValueError("sample counts must be >= 2")


@dataclass
class Rollouts:
    v: np.ndarray
    w: np.ndarray
    x: np.ndarray  # (N, K) poses after each sim_dt, excluding the start pose
    y: np.ndarray
    theta: np.ndarray
    valid: np.ndarray
    score: np.ndarray
    window: tuple  # (v_lo, v_hi, w_lo, w_hi)


def dynamic_window(state: RobotState, params: DwaParams) -> tuple:
    dv = params.a_max * params.dt
    dw = params.alpha_max * params.dt
    v_lo = max(0.0, state.v - dv)
    v_hi = min(params.v_max, state.v + dv)
    w_lo = max(-params.w_max, state.w - dw)
    w_hi = min(params.w_max, state.w + dw)
    if v_lo > v_hi:  # moving faster than v_max; brake as hard as allowed
        v_lo = v_hi = max(0.0, min(params.v_max, state.v - dv))
    return v_lo, v_hi, w_lo, w_hi


def path_target(pose: Pose2D, path: Sequence[Pose2D], lookahead: float) -> Pose2D:
    """First path point at least ``lookahead`` ahead of the closest one, else the last."""
    d = [math.hypot(p.x - pose.x, p.y - pose.y) for p in path]
    i = int(np.argmin(d))
    for j in range(i, len(path)):
        if d[j] >= lookahead:
            return path[j]
    return path[-1]


def rollout(pose: Pose2D, v: np.ndarray, w: np.ndarray, sim_time: float, sim_dt: float) -> tuple:
    steps = int(round(sim_time / sim_dt))
    t = np.arange(1, steps + 1)[None, :] * sim_dt
    v = v[:, None]
    w = w[:, None]
    th = pose.theta + w * t
    straight = np.abs(w) < 1e-9
    safe_w = np.where(straight, 1.0, w)
    x = np.where(straight, pose.x + v * t * math.cos(pose.theta),
                 pose.x + v / safe_w * (np.sin(th) - math.sin(pose.theta)))
    y = np.where(straight, pose.y + v * t * math.sin(pose.theta),
                 pose.y - v / safe_w * (np.cos(th) - math.cos(pose.theta)))
    return x, y, th


def _lookup(grid: OccupancyGrid, clear: np.ndarray, x, y):
    ix = np.floor((x - grid.origin[0]) / grid.resolution).astype(np.int64)
    iy = np.floor((y - grid.origin[1]) / grid.resolution).astype(np.int64)
    inside = (ix >= 0) & (ix < grid.width) & (iy >= 0) & (iy < grid.height)
    d = np.zeros(x.shape)
    d[inside] = clear[iy[inside], ix[inside]]
    return d  # off-map counts as touching an obstacle


def evaluate(state: RobotState, path: Sequence[Pose2D], grid: OccupancyGrid, params: DwaParams,
             clearance: Optional[np.ndarray] = None) -> Rollouts:
    """Roll out and score every sampled (v, w) in the dynamic window."""
    window = dynamic_window(state, params)
    v_lo, v_hi, w_lo, w_hi = window
    vs = np.linspace(v_lo, v_hi, params.v_samples)
    ws = np.linspace(w_lo, w_hi, params.w_samples)
    V, W = (a.ravel() for a in np.meshgrid(vs, ws, indexing="ij"))
    pose = state.pose
    x, y, th = rollout(pose, V, W, params.sim_time, params.sim_dt)

    clear = clearance if clearance is not None else clearance_map(grid, params.occupied_threshold)
    d = _lookup(grid, clear, x, y)
    d0 = float(_lookup(grid, clear, np.array([pose.x]), np.array([pose.y]))[0])
    r = params.robot_radius
    # when the robot already sits inside the inscribed zone, allow moves that do not get closer
    hits = (d <= r) & ((d0 > r) | (d < d0))
    valid = ~hits.any(axis=1)

    target = path_target(pose, path, params.lookahead)
    ang = np.arctan2(target.y - y[:, -1], target.x - x[:, -1]) - th[:, -1]
    ang = np.abs((ang + np.pi) % (2 * np.pi) - np.pi)
    heading = 1.0 - ang / np.pi
    vel = V / params.v_max
    min_d = np.minimum(d.min(axis=1), params.clearance_max)
    cl = min_d / params.clearance_max
    score = params.w_goal * heading + params.w_vel * vel + params.w_clear * cl
    return Rollouts(V, W, x, y, th, valid, score, window)


def dwa_step(state: RobotState, path: Sequence[Pose2D], grid: OccupancyGrid, params: DwaParams,
             clearance: Optional[np.ndarray] = None) -> VelocityCommand:
    """Best admissible velocity command; ties go to lower |w|, then lower v.

    When every rollout collides, brake as hard as the window allows and turn
    towards the path target (rotation in place once stopped).
    """
    if not path:
        raise ValueError("path must not be empty")
    ro = evaluate(state, path, grid, params, clearance)
    if ro.valid.any():
        idx = np.flatnonzero(ro.valid)
        best = min(idx, key=lambda i: (-round(float(ro.score[i]), 12), abs(float(ro.w[i])), float(ro.v[i])))
        return VelocityCommand(float(ro.v[best]), float(ro.w[best]))
    v_lo, _, w_lo, w_hi = ro.window
    target = path_target(state.pose, path, params.lookahead)
    err = normalize_angle(math.atan2(target.y - state.pose.y, target.x - state.pose.x) - state.pose.theta)
    w = min(max(err / params.dt, w_lo), w_hi)
    return VelocityCommand(v_lo, w)
