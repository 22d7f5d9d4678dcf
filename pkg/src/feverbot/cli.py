"""Command line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .chatbot import FALLBACK_REPLY, Chatbot, ChatError
from .harness import run
from .nav.grid import grid_from_world, to_pgm
from .nav.planner import PlanningError, plan_cells, plan_global
from .scenario import ScenarioError, load_demo, load_scenario
from .world import Pose2D

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

PLAN_SCHEMA = "feverbot.plan/1"

log = logging.getLogger("feverbot")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; usage errors map to 1 here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _scenario(path):
    return load_demo() if path is None else load_scenario(path)


def _write(path, data, binary=False):
    if path == "-":
        if binary:
            sys.stdout.buffer.write(data)
        else:
            sys.stdout.write(data)
        return
    p = Path(path)
    if binary:
        p.write_bytes(data)
    else:
        p.write_text(data, encoding="utf-8")


def cmd_run(args) -> int:
    sc = _scenario(args.scenario)
    result = run(sc, seed=args.seed, ticks=args.ticks)
    if args.out:
        _write(args.out, result.events_jsonl())
    if args.trace:
        _write(args.trace, result.trace_csv())
    if args.out != "-":
        print(json.dumps(result.metrics, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_plan(args) -> int:
    sc = _scenario(args.scenario)
    start = Pose2D(*args.start) if args.start else sc.robot_start
    if args.goal:
        goal = Pose2D(*args.goal)
    elif sc.goals:
        goal = sc.goals[0]
    else:
        raise ScenarioError("scenario has no goals; pass --goal", "goals")
    world = sc.make_world()
    grid = grid_from_world(world, sc.map_resolution)
    _, cost = plan_cells(grid, sc.planner, start, goal)
    path = plan_global(grid, sc.planner, start, goal)
    doc = {"schema": PLAN_SCHEMA, "start": [start.x, start.y, start.theta],
           "goal": [goal.x, goal.y, goal.theta], "cost": cost,
           "waypoints": [[round(p.x, 6), round(p.y, 6), round(p.theta, 6)] for p in path]}
    _write(args.out or "-", json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_map(args) -> int:
    sc = _scenario(args.scenario)
    result = run(sc, seed=args.seed, ticks=args.ticks)
    _write(args.out, to_pgm(result.grid), binary=True)
    return EXIT_OK


def cmd_chat(args) -> int:
    bot = Chatbot.from_file(args.intents, threshold=args.threshold) if args.intents else Chatbot(threshold=args.threshold)
    session = bot.start_session(args.person_id, args.reading)
    out = sys.stdout
    print(session.transcript[-1][1], file=out, flush=True)
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        session, reply = bot.respond(session, line)
        print(reply, file=out, flush=True)
        if reply == FALLBACK_REPLY and bot.prompt(session.state):
            print(bot.prompt(session.state), file=out, flush=True)
        if session.done:
            return EXIT_OK
    print("input ended before the conversation finished", file=sys.stderr)
    return EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="feverbot", description="Fever screening robot simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_args(sp):
        sp.add_argument("--scenario", help="scenario YAML (default: bundled demo)")
        sp.add_argument("--seed", type=int, help="RNG seed (default: scenario seed)")
        sp.add_argument("--ticks", type=int, help="tick budget (default: scenario ticks)")

    r = sub.add_parser("run", help="run a scenario and report metrics")
    scenario_args(r)
    r.add_argument("--out", help="event stream (JSON lines); '-' for stdout")
    r.add_argument("--trace", help="trajectory trace (CSV); '-' for stdout")
    r.set_defaults(func=cmd_run)

    pl = sub.add_parser("plan", help="one-shot global plan on the ground-truth map")
    pl.add_argument("--scenario", help="scenario YAML (default: bundled demo)")
    pl.add_argument("--start", type=float, nargs=3, metavar=("X", "Y", "THETA"))
    pl.add_argument("--goal", type=float, nargs=3, metavar=("X", "Y", "THETA"))
    pl.add_argument("--out", help="output JSON (default: stdout)")
    pl.set_defaults(func=cmd_plan)

    c = sub.add_parser("chat", help="interactive screening conversation on stdin/stdout")
    c.add_argument("--intents", help="intent YAML (default: bundled set)")
    c.add_argument("--reading", type=float, default=38.6, help="temperature that opened the session")
    c.add_argument("--threshold", type=float, default=38.0)
    c.add_argument("--person-id", type=int, default=1)
    c.set_defaults(func=cmd_chat)

    m = sub.add_parser("map", help="run a scenario and dump the occupancy grid as PGM")
    scenario_args(m)
    m.add_argument("--out", required=True, help="output .pgm path; '-' for stdout")
    m.set_defaults(func=cmd_map)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "ticks", None) is not None and args.ticks < 0:
        print("feverbot: error: --ticks must be non-negative", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ScenarioError, ChatError) as exc:
        print(f"feverbot: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PlanningError as exc:
        print(f"feverbot: planning failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"feverbot: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
