"""Scenario files: YAML, UTF-8, ``schema: 1``.

Only ``world.bounds`` and ``robot.start`` are required; every other field has
a default. Unknown keys are rejected so typos surface as errors.
"""
from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from .nav.dwa import DwaParams
from .nav.grid import PlannerParams
from .world import CameraModel, NoiseModel, Person, Pose2D, RobotLimits, World, RobotState, collides

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.message = message
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(field)
        super().__init__(f"{': '.join(where)}: {message}" if where else message)


@dataclass
class ScreeningParams:
    fever_threshold: float = 38.0
    debounce_count: int = 3
    rescreen_after: float = 120.0
    announce_period: float = 10.0


@dataclass
class Scenario:
    bounds: tuple
    robot_start: Pose2D
    obstacles: list = field(default_factory=list)
    people: list = field(default_factory=list)
    goals: list = field(default_factory=list)
    split_goals: bool = False
    goal_spacing: float = 3.0
    limits: RobotLimits = field(default_factory=RobotLimits)
    camera: CameraModel = field(default_factory=CameraModel)
    noise: NoiseModel = field(default_factory=NoiseModel)
    planner: PlannerParams = field(default_factory=PlannerParams)
    dwa: DwaParams = field(default_factory=DwaParams)
    screening: ScreeningParams = field(default_factory=ScreeningParams)
    map_resolution: float = 0.05
    self_occluders: tuple = ()
    dt: float = 0.1
    ticks: int = 3000
    seed: int = 0
    name: str = ""

    @property
    def fever_threshold(self) -> float:
        return self.screening.fever_threshold

    def make_world(self, seed: Optional[int] = None) -> World:
        return World(
            bounds=self.bounds,
            obstacles=list(self.obstacles),
            people=list(self.people),
            robot=RobotState(self.robot_start),
            rng_seed=self.seed if seed is None else seed,
            limits=self.limits,
            camera=self.camera,
            noise=self.noise,
            self_occluders=self.self_occluders,
        )


def _check_keys(raw: dict, allowed, path: str):
    if not isinstance(raw, dict):
        raise ScenarioError("expected a mapping", path)
    for k in raw:
        if k not in allowed:
            raise ScenarioError(f"unknown field {k!r}", f"{path}.{k}" if path else k)


def _num(raw, path, *, positive=False, nonneg=False, integer=False):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ScenarioError(f"expected a number, got {raw!r}", path)
    x = int(raw) if integer else float(raw)
    if integer and raw != x:
        raise ScenarioError(f"expected an integer, got {raw!r}", path)
    if not math.isfinite(x):
        raise ScenarioError("must be finite", path)
    if positive and x <= 0:
        raise ScenarioError(f"must be > 0, got {raw!r}", path)
    if nonneg and x < 0:
        raise ScenarioError(f"must be >= 0, got {raw!r}", path)
    return x


def _vec(raw, n, path):
    if not isinstance(raw, (list, tuple)) or len(raw) != n:
        raise ScenarioError(f"expected a list of {n} numbers, got {raw!r}", path)
    return tuple(_num(v, f"{path}[{i}]") for i, v in enumerate(raw))


def _section(cls, raw, path, base=None, checks=None):
    """Build a parameter dataclass from a mapping, defaulting omitted fields."""
    raw = raw or {}
    names = [f.name for f in dataclasses.fields(cls)]
    _check_keys(raw, names, path)
    kwargs = {}
    for k, v in raw.items():
        spec = (checks or {}).get(k, {})
        if isinstance(v, list):
            v = tuple(_num(x, f"{path}.{k}[{i}]") for i, x in enumerate(v))
        else:
            v = _num(v, f"{path}.{k}", **spec)
        kwargs[k] = v
    try:
        return dataclasses.replace(base, **kwargs) if base is not None else cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ScenarioError(str(exc), path) from exc


def _inside(bounds, x, y):
    return 0 <= x <= bounds[0] and 0 <= y <= bounds[1]


TOP_KEYS = {"schema", "name", "dt", "ticks", "seed", "world", "robot", "goals", "split_goals",
            "goal_spacing", "people", "noise", "planner", "dwa", "screening", "map_resolution"}
PERSON_KEYS = {"id", "waypoints", "height", "core_temp", "entry_time", "cold_offset", "cold_tau",
               "radius", "replies"}


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a mapping")
    _check_keys(doc, TOP_KEYS, "")
    if doc.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported schema {doc.get('schema')!r}", "schema")

    world = doc.get("world")
    if world is None:
        raise ScenarioError("missing required section", "world")
    _check_keys(world, {"bounds", "obstacles"}, "world")
    if "bounds" not in world:
        raise ScenarioError("missing required field", "world.bounds")
    bounds = _vec(world["bounds"], 2, "world.bounds")
    if bounds[0] <= 0 or bounds[1] <= 0:
        raise ScenarioError("bounds must be positive", "world.bounds")
    obstacles = []
    for i, r in enumerate(world.get("obstacles") or []):
        rect = _vec(r, 4, f"world.obstacles[{i}]")
        if not (rect[0] < rect[2] and rect[1] < rect[3]):
            raise ScenarioError("need x_min < x_max and y_min < y_max", f"world.obstacles[{i}]")
        obstacles.append(rect)

    robot = doc.get("robot")
    if robot is None:
        raise ScenarioError("missing required section", "robot")
    limit_names = {f.name for f in dataclasses.fields(RobotLimits)}
    cam_names = {f.name for f in dataclasses.fields(CameraModel)}
    _check_keys(robot, {"start", "self_occluders"} | limit_names | {"camera"}, "robot")
    if "start" not in robot:
        raise ScenarioError("missing required field", "robot.start")
    start = robot["start"]
    if not isinstance(start, (list, tuple)) or len(start) not in (2, 3):
        raise ScenarioError("expected [x, y] or [x, y, theta]", "robot.start")
    start = Pose2D(*_vec(start, len(start), "robot.start"))
    limits = _section(RobotLimits, {k: v for k, v in robot.items() if k in limit_names}, "robot",
                      checks={k: {"positive": True} for k in limit_names})
    camera_raw = robot.get("camera") or {}
    _check_keys(camera_raw, cam_names, "robot.camera")
    camera = _section(CameraModel, camera_raw, "robot.camera",
                      checks={k: {"positive": True} for k in cam_names})
    occluders = tuple(_vec(c, 3, f"robot.self_occluders[{i}]")
                      for i, c in enumerate(robot.get("self_occluders") or []))

    goals = []
    for i, g in enumerate(doc.get("goals") or []):
        if not isinstance(g, (list, tuple)) or len(g) not in (2, 3):
            raise ScenarioError("expected [x, y] or [x, y, theta]", f"goals[{i}]")
        pose = Pose2D(*_vec(g, len(g), f"goals[{i}]"))
        if not _inside(bounds, pose.x, pose.y):
            raise ScenarioError("goal outside world bounds", f"goals[{i}]")
        goals.append(pose)

    people = []
    seen = set()
    for i, p in enumerate(doc.get("people") or []):
        path = f"people[{i}]"
        _check_keys(p, PERSON_KEYS, path)
        for req in ("id", "waypoints"):
            if req not in p:
                raise ScenarioError("missing required field", f"{path}.{req}")
        pid = int(_num(p["id"], f"{path}.id", integer=True))
        if pid in seen:
            raise ScenarioError(f"duplicate person id {pid}", f"{path}.id")
        seen.add(pid)
        wps = p["waypoints"]
        if not isinstance(wps, list) or not wps:
            raise ScenarioError("expected a non-empty list of [t, x, y]", f"{path}.waypoints")
        wps = [_vec(w, 3, f"{path}.waypoints[{j}]") for j, w in enumerate(wps)]
        for j, (t, x, y) in enumerate(wps):
            if not _inside(bounds, x, y):
                raise ScenarioError("waypoint outside world bounds", f"{path}.waypoints[{j}]")
            if j and not t > wps[j - 1][0]:
                raise ScenarioError("waypoint times must be strictly increasing", f"{path}.waypoints[{j}]")
        kwargs = {}
        for k in ("height", "core_temp", "entry_time", "cold_offset", "cold_tau", "radius"):
            if k in p and p[k] is not None:
                kwargs[k] = _num(p[k], f"{path}.{k}",
                                 positive=k in ("height", "cold_tau", "radius"), nonneg=k == "cold_offset")
        replies = p.get("replies") or []
        if not isinstance(replies, list) or not all(isinstance(r, str) for r in replies):
            raise ScenarioError("expected a list of strings", f"{path}.replies")
        people.append(Person(pid, tuple(wps), replies=tuple(replies), **kwargs))

    noise = _section(NoiseModel, doc.get("noise"), "noise", checks={
        "lidar_sigma": {"nonneg": True}, "thermal_sigma": {"nonneg": True}, "p_spike": {"nonneg": True},
        "bias_bound": {"nonneg": True}, "k_vib": {"nonneg": True}})
    if noise.p_spike > 1:
        raise ScenarioError("must be <= 1", "noise.p_spike")

    planner_raw = dict(doc.get("planner") or {})
    planner_base = PlannerParams(robot_radius=limits.radius, inflation_radius=limits.radius + 0.1)
    planner = _section(PlannerParams, planner_raw, "planner", base=planner_base,
                       checks={"inflation_radius": {"nonneg": True}, "robot_radius": {"nonneg": True}})

    dwa_base = DwaParams(a_max=limits.a_max, alpha_max=limits.alpha_max, v_max=limits.v_max,
                         w_max=limits.w_max, robot_radius=limits.radius,
                         occupied_threshold=planner.occupied_threshold)
    dwa = _section(DwaParams, doc.get("dwa"), "dwa", base=dwa_base,
                   checks={"v_samples": {"integer": True}, "w_samples": {"integer": True}})
    if dwa.v_max > limits.v_max or dwa.a_max > limits.a_max:
        raise ScenarioError("local planner limits exceed robot limits", "dwa")

    screening = _section(ScreeningParams, doc.get("screening"), "screening", checks={
        "debounce_count": {"integer": True, "positive": True}, "rescreen_after": {"nonneg": True},
        "announce_period": {"positive": True}})

    dt = _num(doc.get("dt", 0.1), "dt", positive=True)
    dwa = dataclasses.replace(dwa, dt=dt)
    sc = Scenario(
        bounds=bounds, robot_start=start, obstacles=obstacles, people=people, goals=goals,
        split_goals=bool(doc.get("split_goals", False)),
        goal_spacing=_num(doc.get("goal_spacing", 3.0), "goal_spacing", positive=True),
        limits=limits, camera=camera, noise=noise, planner=planner, dwa=dwa, screening=screening,
        map_resolution=_num(doc.get("map_resolution", 0.05), "map_resolution", positive=True),
        self_occluders=occluders, dt=dt,
        ticks=int(_num(doc.get("ticks", 3000), "ticks", positive=True, integer=True)),
        seed=int(_num(doc.get("seed", 0), "seed", nonneg=True, integer=True)),
        name=str(doc.get("name", "")),
    )
    world = sc.make_world()
    if not _inside(bounds, start.x, start.y) or collides(world, start.x, start.y):
        raise ScenarioError("robot start is outside the bounds or overlaps an obstacle", "robot.start")
    return sc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    return parse_scenario(text)


def parse_scenario(text: str) -> Scenario:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        problem = getattr(exc, "problem", None) or str(exc)
        raise ScenarioError(f"parse error: {problem}",
                            line=mark.line + 1 if mark is not None else None) from exc
    if doc is None:
        raise ScenarioError("empty scenario file")
    try:
        return scenario_from_dict(doc)
    except ScenarioError as exc:
        if exc.field is None or exc.line is not None:
            raise
        line = _line_of(yaml.compose(text), exc.field)
        if line is None:
            raise
        raise ScenarioError(exc.message, exc.field, line) from exc


def _line_of(node, path: str) -> Optional[int]:
    """1-based line of the YAML node at a dotted/indexed field path, or of its nearest parent."""
    line = None
    for part in re.findall(r"[^.\[\]]+", path):
        if isinstance(node, yaml.MappingNode):
            match = [v for k, v in node.value if k.value == part]
            if not match:
                # unknown key: report the key itself
                keys = [k for k, _ in node.value if k.value == part]
                return keys[0].start_mark.line + 1 if keys else line
            node = match[0]
        elif isinstance(node, yaml.SequenceNode) and part.isdigit() and int(part) < len(node.value):
            node = node.value[int(part)]
        else:
            break
        line = node.start_mark.line + 1
    return line


def demo_scenario_path():
    return resources.files("feverbot").joinpath("data/demo.yaml")


def load_demo() -> Scenario:
    return parse_scenario(demo_scenario_path().read_text(encoding="utf-8"))
