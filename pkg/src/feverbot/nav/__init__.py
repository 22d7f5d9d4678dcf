from .dwa import DwaParams, dwa_step
from .goals import Directive, GoalManager, Mode, goal_manager_step, split_goals
from .grid import OccupancyGrid, PlannerParams, build_costmap, grid_from_world, update_occupancy
from .planner import InvalidGoal, InvalidStart, NoPath, PlanningError, plan_global

__all__ = [
    "DwaParams", "dwa_step", "Directive", "GoalManager", "Mode", "goal_manager_step",
    "split_goals", "OccupancyGrid", "PlannerParams", "build_costmap", "grid_from_world",
    "update_occupancy", "InvalidGoal", "InvalidStart", "NoPath", "PlanningError", "plan_global",
]
