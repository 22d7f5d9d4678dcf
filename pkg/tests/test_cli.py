import io
import json

import pytest
import yaml

from feverbot.chatbot import FALLBACK_REPLY
from feverbot.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, PLAN_SCHEMA, main
from feverbot.nav.grid import from_pgm

SMALL = {"schema": 1, "dt": 0.1, "ticks": 400, "seed": 5,
         "world": {"bounds": [6.0, 3.0], "obstacles": [[2.5, 0.0, 3.0, 1.2]]},
         "robot": {"start": [1.0, 1.5, 0.0]},
         "goals": [[5.0, 1.5, 0.0]]}


@pytest.fixture
def small(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump(SMALL))
    return str(path)


def feed(monkeypatch, text):
    monkeypatch.setattr("sys.stdin", io.StringIO(text))


def test_run_writes_events_and_trace(small, tmp_path, capsys):
    out, trace = tmp_path / "ev.jsonl", tmp_path / "tr.csv"
    assert main(["run", "--scenario", small, "--out", str(out), "--trace", str(trace)]) == EXIT_OK
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["goals_reached"] == 1
    events = [json.loads(line) for line in out.read_text().splitlines()]
    assert events[0]["kind"] == "announcement"
    assert events[-1]["kind"] == "goal_reached"
    assert trace.read_text().startswith("# feverbot.trace/1\ntick,")


def test_run_events_to_stdout_suppresses_metrics(small, capsys):
    assert main(["run", "--scenario", small, "--ticks", "5", "--out", "-"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(json.loads(line)["schema"] == "feverbot.event/1" for line in lines)


def test_plan_json(small, tmp_path):
    out = tmp_path / "plan.json"
    code = main(["plan", "--scenario", small, "--start", "1", "1.5", "0", "--goal", "5", "1.5", "0",
                 "--out", str(out)])
    assert code == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["schema"] == PLAN_SCHEMA
    assert doc["waypoints"][0][:2] == pytest.approx([1.0, 1.5], abs=0.1)
    assert doc["waypoints"][-1] == pytest.approx([5.0, 1.5, 0.0], abs=0.05)
    assert doc["cost"] > 0


def test_plan_into_obstacle_is_runtime_failure(small, capsys):
    assert main(["plan", "--scenario", small, "--goal", "2.75", "0.5", "0"]) == EXIT_RUNTIME
    assert "planning failed" in capsys.readouterr().err


def test_map_writes_pgm(small, tmp_path):
    out = tmp_path / "map.pgm"
    assert main(["map", "--scenario", small, "--ticks", "20", "--out", str(out)]) == EXIT_OK
    data = out.read_bytes()
    assert data.startswith(b"P5\n# feverbot-occupancy v1")
    grid = from_pgm(data)
    # the grid covers the 6 m x 3 m world at 0.05 m plus a border
    assert grid.width >= 120 and grid.height >= 60


def test_chat_happy_path(monkeypatch, capsys):
    feed(monkeypatch, "hello\nyes\nno\nthanks bye\n")
    assert main(["chat", "--reading", "38.9"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert "38.9" in lines[0]
    assert lines[-1] == "Thank you for your time. Take care."


def test_chat_fallback_reprompts(monkeypatch, capsys):
    feed(monkeypatch, "hello\npurple elephants\nyes\nno\nbye\n")
    assert main(["chat"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    i = lines.index(FALLBACK_REPLY)
    assert lines[i + 1] == "Have you been vaccinated against COVID-19?"
    assert lines[i - 1].endswith(lines[i + 1])


def test_chat_eof_is_runtime_failure(monkeypatch, capsys):
    feed(monkeypatch, "hello\n")
    assert main(["chat"]) == EXIT_RUNTIME
    assert "input ended" in capsys.readouterr().err


def test_chat_bad_intents_is_config_error(tmp_path, monkeypatch):
    feed(monkeypatch, "")
    assert main(["chat", "--intents", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    bad = tmp_path / "bad.yaml"
    bad.write_text("intents: 3\n")
    assert main(["chat", "--intents", str(bad)]) == EXIT_CONFIG


@pytest.mark.parametrize("argv", [[], ["dance"], ["run", "--seed", "x"], ["run", "--ticks", "-1"],
                                  ["plan", "--start", "1", "2"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == EXIT_CONFIG


def test_bad_scenario_reports_field_and_line(tmp_path, capsys):
    doc = dict(SMALL, dt=-0.1)
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(doc, sort_keys=False))
    assert main(["run", "--scenario", str(path)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "dt" in err and "line 2" in err
