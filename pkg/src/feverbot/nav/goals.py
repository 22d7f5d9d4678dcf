"""Goal bookkeeping: person-triggered pause (save + cancel) and resume (re-send)."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from ..world import Pose2D, normalize_angle

POSITION_TOLERANCE = 0.15
HEADING_TOLERANCE = 0.3


class Mode(enum.Enum):
    IDLE = "IDLE"
    NAVIGATING = "NAVIGATING"
    PAUSED = "PAUSED"


class Directive(enum.Enum):
    CONTINUE = "CONTINUE"
    STOP = "STOP"
    RESUME = "RESUME"
    NEW_GOAL = "NEW_GOAL"
    IDLE = "IDLE"


@dataclass(frozen=True)
class GoalManager:
    mode: Mode = Mode.IDLE
    active_goal: Optional[Pose2D] = None
    saved_goal: Optional[Pose2D] = None
    waypoint_queue: tuple = ()

    @classmethod
    def with_goals(cls, goals: Sequence[Pose2D]) -> "GoalManager":
        return cls(waypoint_queue=tuple(goals))


def goal_manager_step(gm: GoalManager, person_present: int, reached: bool = False) -> tuple:
    """Advance the goal state machine one tick. Returns (manager, directive).

    While navigating, a positive person count saves and cancels the goal
    (STOP). Once the count drops to 0 the saved goal is re-sent unchanged
    (RESUME). ``reached`` marks the active goal done and pops the next one.
    """
    if gm.mode is Mode.NAVIGATING:
        if person_present > 0:
            return replace(gm, mode=Mode.PAUSED, saved_goal=gm.active_goal, active_goal=None), Directive.STOP
        if reached:
            return _next_goal(replace(gm, active_goal=None))
        return gm, Directive.CONTINUE
    if gm.mode is Mode.PAUSED:
        if person_present > 0:
            return gm, Directive.STOP
        return replace(gm, mode=Mode.NAVIGATING, active_goal=gm.saved_goal, saved_goal=None), Directive.RESUME
    return _next_goal(gm)


def _next_goal(gm: GoalManager) -> tuple:
    if gm.waypoint_queue:
        goal, rest = gm.waypoint_queue[0], gm.waypoint_queue[1:]
        return replace(gm, mode=Mode.NAVIGATING, active_goal=goal, waypoint_queue=rest), Directive.NEW_GOAL
    return replace(gm, mode=Mode.IDLE, active_goal=None), Directive.IDLE


def skip_goal(gm: GoalManager) -> tuple:
    """Abandon the active goal (e.g. after a planning failure) and take the next."""
    return _next_goal(replace(gm, active_goal=None, saved_goal=None))


def at_position(pose: Pose2D, goal: Pose2D, tol: float = POSITION_TOLERANCE) -> bool:
    return math.hypot(goal.x - pose.x, goal.y - pose.y) <= tol


def heading_error(pose: Pose2D, goal: Pose2D) -> float:
    return normalize_angle(goal.theta - pose.theta)


def split_goals(start: Pose2D, goals: Sequence[Pose2D], max_spacing: float = 3.0) -> list:
    """Insert evenly spaced intermediate goals so consecutive goals are at most
    ``max_spacing`` apart. Intermediate goals face along their segment."""
    out = []
    prev = start
    for g in goals:
        d = math.hypot(g.x - prev.x, g.y - prev.y)
        n = max(1, math.ceil(d / max_spacing - 1e-9))
        heading = math.atan2(g.y - prev.y, g.x - prev.x)
        for k in range(1, n):
            s = k / n
            out.append(Pose2D(prev.x + s * (g.x - prev.x), prev.y + s * (g.y - prev.y), heading))
        out.append(g)
        prev = g
    return out
