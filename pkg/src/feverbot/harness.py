"""Deterministic tick loop wiring sensors, navigation, servoing, screening and chat.

Per tick, in this fixed order:

1. announcement (every ``announce_period`` seconds of sim time)
2. sense: lidar -> occupancy update, detections (``detected_objects_in_image``),
   thermal frame
3. ``person_present`` = number of detections
4. goal manager step (stop / resume / next goal)
5. servo alignment towards the detection nearest the image center
6. thermal screening of every detected person; fever opens a chat session
7. one scripted reply per active chat session
8. global plan (when needed) and DWA command, zero when paused or idle
9. ``step_world``
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .chatbot import FALLBACK_REPLY, Chatbot, SessionError
from .nav.dwa import dwa_step, dynamic_window
from .nav.goals import (HEADING_TOLERANCE, Directive, GoalManager, Mode, at_position,
                        goal_manager_step, heading_error, skip_goal, split_goals)
from .nav.grid import OccupancyGrid, cell_costs, clearance_map, update_occupancy
from .nav.planner import InvalidGoal, InvalidStart, NoPath, plan_global
from .scenario import Scenario
from .servo import ManipulatorModel, align_step, center_offset, select_target
from .thermal import DebounceState, screen_tick
from .world import (LIDAR_MAX, LIDAR_MIN, VelocityCommand, person_present_count, simulate_detections,
                    simulate_lidar, simulate_thermal_frame, step_world, visible_people)

log = logging.getLogger(__name__)

EVENT_SCHEMA = "feverbot.event/1"
TRACE_SCHEMA = "feverbot.trace/1"
EVENT_KINDS = ("detection", "stop", "resume", "reading", "fever", "chat", "announcement",
               "goal_reached", "plan_failed")
TRACE_COLUMNS = ("tick", "t", "x", "y", "theta", "v", "w", "pan", "tilt", "person_present")

ANNOUNCEMENT = ("Temperature screening robot on duty. I will check your temperature from a "
                "distance. Please keep your mask on and keep your distance.")

REPLAN_PERIOD = 50       # ticks
REPLAN_DRIFT = 0.5       # m off the current path
START_BLOCKED_LIMIT = 100  # ticks of InvalidStart before the goal is dropped
MISSED_MIN_TICKS = 3      # hot and in scanning range before a miss counts

# JSON Schema for one event record; every line of the event stream validates against it.
_POSE = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_PAYLOADS = {
    "detection": {"detections": {"type": "array", "items": {
        "type": "object", "required": ["person_id", "bbox"], "additionalProperties": False,
        "properties": {"person_id": {"type": "integer"},
                       "bbox": {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4}}}}},
    "stop": {"saved_goal": _POSE, "person_present": {"type": "integer", "minimum": 1}},
    "resume": {"goal": _POSE},
    "reading": {"person_id": {"type": "integer"}, "reading": {"type": "number"}},
    "fever": {"person_id": {"type": "integer"}, "reading": {"type": "number"}},
    "chat": {"person_id": {"type": "integer"}, "speaker": {"enum": ["bot", "user"]},
             "text": {"type": "string"}, "state": {"type": "string"}},
    "announcement": {"text": {"type": "string"}},
    "goal_reached": {"goal": _POSE, "index": {"type": "integer"}},
    "plan_failed": {"goal": _POSE, "reason": {"type": "string"}},
}
EVENT_JSON_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema", "tick", "t", "kind"],
    "properties": {"schema": {"const": EVENT_SCHEMA}, "tick": {"type": "integer", "minimum": 0},
                   "t": {"type": "number", "minimum": 0}, "kind": {"enum": list(EVENT_KINDS)}},
    "allOf": [
        {"if": {"properties": {"kind": {"const": kind}}},
         "then": {"required": list(props), "properties": props}}
        for kind, props in _PAYLOADS.items()
    ],
}


def _pose(p) -> list:
    return [p.x, p.y, p.theta]


@dataclass
class PersonStats:
    first_detected: Optional[float] = None
    run: int = 0
    screened_at: Optional[float] = None
    hot_visible_ticks: int = 0
    flagged_at: Optional[float] = None


@dataclass
class RunResult:
    metrics: dict
    events: list
    trace: list
    commands: list  # commanded VelocityCommand per tick
    transcripts: dict  # person_id -> tuple of (speaker, text)
    pauses: list  # (stop_tick, saved_goal, resume_tick, resumed_goal)
    grid: OccupancyGrid
    world: object

    def events_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True, separators=(",", ":")) + "\n" for e in self.events)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {TRACE_SCHEMA}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        w.writerows(self.trace)
        return buf.getvalue()


class _Runner:
    def __init__(self, scenario: Scenario, seed: Optional[int]):
        self.sc = scenario
        self.world = scenario.make_world(seed)
        self.grid = OccupancyGrid.for_bounds(scenario.bounds, scenario.map_resolution)
        goals = list(scenario.goals)
        if scenario.split_goals:
            goals = split_goals(scenario.robot_start, goals, scenario.goal_spacing)
        self.n_goals = len(goals)
        self.gm = GoalManager.with_goals(goals)
        self.goal_index = -1
        self.path = None
        self.path_age = 0
        self.start_blocked = 0
        self.position_reached = False
        th = scenario.screening.fever_threshold
        self.chatbot = Chatbot(threshold=th)
        self.manip = ManipulatorModel(pan_limit=scenario.limits.pan_limit,
                                      tilt_limit=scenario.limits.tilt_limit)
        self.debounce = {p.id: DebounceState(threshold=th, required=scenario.screening.debounce_count)
                         for p in self.world.people}
        self.stats = {p.id: PersonStats() for p in self.world.people}
        self.reply_index = {p.id: 0 for p in self.world.people}
        self.transcripts = {}
        self.sessions = {}
        self.events = []
        self.trace = []
        self.commands = []
        self.pauses = []
        self.fever_events = []
        self.plan_failures = 0
        self.goals_reached = 0
        self.goal_completion_time = None
        self.distance = 0.0
        self.max_v = 0.0
        self.max_accel = 0.0
        self.lidar_violations = 0
        self.lidar_returns = 0
        self.tick = 0

    # ------------------------------------------------------------ events
    def emit(self, kind, **payload):
        rec = {"schema": EVENT_SCHEMA, "tick": self.tick, "t": round(self.world.clock, 6), "kind": kind}
        rec.update(payload)
        self.events.append(rec)

    # ------------------------------------------------------------ phases
    def step(self):
        sc, world = self.sc, self.world
        period = max(1, int(round(sc.screening.announce_period / sc.dt)))
        if self.tick % period == 0:
            self.emit("announcement", text=ANNOUNCEMENT)

        # sense
        pose = world.robot.pose
        scan = simulate_lidar(world)
        finite = scan.ranges[np.isfinite(scan.ranges)]
        self.lidar_returns += finite.size
        self.lidar_violations += int(((finite < LIDAR_MIN) | (finite > LIDAR_MAX)).sum())
        self.grid = update_occupancy(self.grid, pose, scan)
        visible = visible_people(world)
        detections = simulate_detections(world)
        frame = simulate_thermal_frame(world)
        if detections:
            self.emit("detection", detections=[
                {"person_id": d.person_id, "bbox": [round(c, 3) for c in d.bbox]} for d in detections])
        th = sc.screening.fever_threshold
        for person, _ in visible:
            if person.surface_temp(world.clock) > th:
                self.stats[person.id].hot_visible_ticks += 1

        # person_present -> goal manager
        present = person_present_count(detections)
        reached = False
        if self.gm.mode is Mode.NAVIGATING and self.position_reached:
            reached = abs(heading_error(world.robot.pose, self.gm.active_goal)) <= HEADING_TOLERANCE
        prev = self.gm
        self.gm, directive = goal_manager_step(self.gm, present, reached)
        if reached:
            self._goal_done(prev.active_goal)
        if directive is Directive.STOP and prev.mode is Mode.NAVIGATING:
            self.emit("stop", saved_goal=_pose(self.gm.saved_goal), person_present=present)
            self.pauses.append([self.tick, self.gm.saved_goal, None, None])
        elif directive is Directive.RESUME:
            self.emit("resume", goal=_pose(self.gm.active_goal))
            self.pauses[-1][2:] = [self.tick, self.gm.active_goal]
            self.path = None
        elif directive is Directive.NEW_GOAL:
            self._new_goal()

        # servo
        target = select_target(detections)
        if target is not None:
            world.robot = align_step(world.robot, center_offset(target), self.manip)

        # screening
        by_id = {d.person_id: d for d in detections}
        for pid in sorted(self.debounce):
            self._screen(pid, frame, by_id.get(pid))

        # chat
        for pid in sorted(self.sessions):
            self._chat(pid)

        # plan + local control
        cmd = self._control()
        self.commands.append(cmd)

        before = world.robot
        step_world(world, sc.dt, cmd)
        after = world.robot
        self.distance += before.pose.distance_to(after.pose)
        self.max_v = max(self.max_v, after.v)
        self.max_accel = max(self.max_accel, abs(after.v - before.v) / sc.dt)
        p = after.pose
        self.trace.append([self.tick, round(world.clock, 6), round(p.x, 6), round(p.y, 6),
                           round(p.theta, 6), round(after.v, 6), round(after.w, 6),
                           round(after.pan, 6), round(after.tilt, 6), present])
        self.tick += 1

    def _new_goal(self):
        self.goal_index += 1
        self.path = None
        self.position_reached = False
        self.start_blocked = 0

    def _goal_done(self, goal):
        self.goals_reached += 1
        self.emit("goal_reached", goal=_pose(goal), index=self.goal_index)
        if not self.gm.waypoint_queue:
            self.goal_completion_time = round(self.world.clock, 6)

    def _screen(self, pid, frame, det):
        st = self.stats[pid]
        t = self.world.clock
        in_session = pid in self.sessions
        cooling = st.flagged_at is not None and t - st.flagged_at < self.sc.screening.rescreen_after
        if in_session or cooling:
            det = None
        state, fever, reading = screen_tick(frame, det, self.debounce[pid])
        self.debounce[pid] = state
        if reading is None:
            st.run = 0
            return
        if st.first_detected is None:
            st.first_detected = t
        st.run += 1
        if st.run >= self.sc.screening.debounce_count and st.screened_at is None:
            st.screened_at = t
        self.emit("reading", person_id=pid, reading=round(reading, 4))
        if fever:
            st.flagged_at = t
            self.fever_events.append((pid, reading))
            self.emit("fever", person_id=pid, reading=round(reading, 4))
            try:
                session = self.chatbot.start_session(pid, reading)
            except SessionError as exc:
                log.debug("chat not started: %s", exc)
                return
            self.sessions[pid] = session
            self.transcripts[pid] = session.transcript
            self.emit("chat", person_id=pid, speaker="bot", text=session.transcript[-1][1], state=session.state)

    def _chat(self, pid):
        person = self.world.person(pid)
        i = self.reply_index[pid]
        if i >= len(person.replies):
            return
        self.reply_index[pid] = i + 1
        utterance = person.replies[i]
        session = self.sessions[pid]
        self.emit("chat", person_id=pid, speaker="user", text=utterance, state=session.state)
        session, reply = self.chatbot.respond(session, utterance)
        self.emit("chat", person_id=pid, speaker="bot", text=reply, state=session.state)
        if reply == FALLBACK_REPLY:
            prompt = self.chatbot.prompt(session.state)
            if prompt:
                self.emit("chat", person_id=pid, speaker="bot", text=prompt, state=session.state)
        self.transcripts[pid] = session.transcript
        if session.done:
            del self.sessions[pid]
        else:
            self.sessions[pid] = session

    def _fail_goal(self, reason):
        self.plan_failures += 1
        self.emit("plan_failed", goal=_pose(self.gm.active_goal), reason=reason)
        self.gm, directive = skip_goal(self.gm)
        if directive is Directive.NEW_GOAL:
            self._new_goal()

    def _control(self) -> VelocityCommand:
        if self.gm.mode is not Mode.NAVIGATING:
            return VelocityCommand(0.0, 0.0)
        sc = self.sc
        robot = self.world.robot
        goal = self.gm.active_goal
        if not self.position_reached and at_position(robot.pose, goal):
            self.position_reached = True
        clear = clearance_map(self.grid, sc.planner.occupied_threshold)
        if self.position_reached:
            # turn in place onto the goal heading
            v_lo, _, w_lo, w_hi = dynamic_window(robot, sc.dwa)
            w = min(max(heading_error(robot.pose, goal) / sc.dt, w_lo), w_hi)
            return VelocityCommand(v_lo, w)

        costmap = cell_costs(self.grid, sc.planner, clear)
        if self.path is not None:
            self.path_age += 1
            if self._path_stale(costmap[1]):
                self.path = None
        if self.path is None:
            try:
                self.path = plan_global(self.grid, sc.planner, robot.pose, goal, costmap)
                self.path_age = 0
                self.start_blocked = 0
            except InvalidStart:
                self.start_blocked += 1
                if self.start_blocked >= START_BLOCKED_LIMIT:
                    self._fail_goal("start blocked")
                    return VelocityCommand(0.0, 0.0)
            except (NoPath, InvalidGoal) as exc:
                self._fail_goal(type(exc).__name__)
                return VelocityCommand(0.0, 0.0)
        if self.path is None:
            v_lo, _, _, _ = dynamic_window(robot, sc.dwa)
            return VelocityCommand(v_lo, 0.0)
        return dwa_step(robot, self.path, self.grid, sc.dwa, clear)

    def _path_stale(self, lethal) -> bool:
        if self.path_age >= REPLAN_PERIOD:
            return True
        pose = self.world.robot.pose
        if min(math.hypot(p.x - pose.x, p.y - pose.y) for p in self.path) > REPLAN_DRIFT:
            return True
        g = self.grid
        for p in self.path:
            ix, iy = g.world_to_cell(p.x, p.y)
            if g.in_bounds(ix, iy) and lethal[iy, ix]:
                return True
        return False

    def finished(self) -> bool:
        return (self.gm.mode is Mode.IDLE and not self.gm.waypoint_queue
                and not self.sessions and self.tick > 0)

    def metrics(self) -> dict:
        th = self.sc.screening.fever_threshold
        flagged = {pid for pid, _ in self.fever_events}
        people = {p.id: p for p in self.world.people}
        false_alarms = sum(1 for pid, _ in self.fever_events if people[pid].core_temp <= th)
        missed = sorted(pid for pid, st in self.stats.items()
                        if st.hot_visible_ticks >= MISSED_MIN_TICKS and pid not in flagged)
        times = [st.screened_at - st.first_detected for st in self.stats.values() if st.screened_at is not None]
        return {
            "ticks": self.tick,
            "sim_time": round(self.world.clock, 6),
            "people_screened": sum(1 for st in self.stats.values() if st.screened_at is not None),
            "fevers_flagged": len(self.fever_events),
            "flagged_ids": sorted(flagged),
            "false_alarms": false_alarms,
            "missed_fevers": len(missed),
            "missed_ids": missed,
            "mean_time_to_scan": round(sum(times) / len(times), 6) if times else None,
            "goals_total": self.n_goals,
            "goals_reached": self.goals_reached,
            "goal_completion_time": self.goal_completion_time,
            "plan_failures": self.plan_failures,
            "distance_traveled": round(self.distance, 6),
            "max_speed": round(self.max_v, 9),
            "max_accel": round(self.max_accel, 9),
            "lidar_returns": self.lidar_returns,
            "lidar_out_of_range": self.lidar_violations,
        }


def run(scenario: Scenario, seed: Optional[int] = None, ticks: Optional[int] = None) -> RunResult:
    """Run a scenario to completion or until the tick budget is spent."""
    r = _Runner(scenario, seed)
    budget = scenario.ticks if ticks is None else ticks
    while r.tick < budget:
        r.step()
        if r.finished():
            break
    pauses = [tuple(p) for p in r.pauses]
    return RunResult(r.metrics(), r.events, r.trace, r.commands, dict(r.transcripts), pauses, r.grid, r.world)
