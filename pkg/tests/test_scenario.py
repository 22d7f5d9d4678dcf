import pytest

from feverbot.scenario import ScenarioError, load_demo, load_scenario, parse_scenario, scenario_from_dict

MINIMAL = "world:\n  bounds: [6, 4]\nrobot:\n  start: [1, 1]\n"


def test_minimal_file_fills_defaults():
    sc = parse_scenario(MINIMAL)
    assert sc.bounds == (6.0, 4.0)
    assert sc.fever_threshold == 38.0
    assert sc.screening.debounce_count == 3
    assert sc.dt == 0.1 and sc.ticks == 3000
    assert sc.limits.v_max == 0.274
    assert sc.noise.p_spike == 0.01 and sc.noise.bias_bound == 0.5
    assert sc.planner.cost_factor == 0.8 and sc.planner.neutral_cost == 50
    assert sc.planner.inflation_radius == pytest.approx(0.35)
    assert (sc.dwa.sim_time, sc.dwa.v_samples, sc.dwa.w_samples) == (1.5, 11, 21)
    assert sc.people == [] and sc.goals == []


def test_overrides_are_applied():
    sc = parse_scenario(MINIMAL + "screening: {fever_threshold: 37.5}\ndwa: {w_vel: 0.1}\nnoise: {k_vib: 0}\n")
    assert sc.fever_threshold == 37.5 and sc.dwa.w_vel == 0.1 and sc.noise.k_vib == 0.0


@pytest.mark.parametrize("extra, field", [
    ("people:\n  - id: 1\n    waypoints: [[0, 1, 1], [5, 7, 1]]\n", "people[0].waypoints[1]"),
    ("goals: [[9, 1]]\n", "goals[0]"),
    ("people:\n  - {id: 1, waypoints: [[0, 1, 1]]}\n  - {id: 1, waypoints: [[0, 2, 1]]}\n", "people[1].id"),
    ("noise: {thermal_sigma: -1}\n", "noise.thermal_sigma"),
    ("speed: 3\n", "speed"),
    ("dt: 0\n", "dt"),
    ("dwa: {v_max: 1.0}\n", "dwa"),
])
def test_validation_errors_name_the_field(extra, field):
    with pytest.raises(ScenarioError) as ei:
        parse_scenario(MINIMAL + extra)
    assert ei.value.field == field
    assert ei.value.line is not None


def test_missing_required_fields():
    with pytest.raises(ScenarioError, match="world"):
        scenario_from_dict({"robot": {"start": [1, 1]}})
    with pytest.raises(ScenarioError, match="robot.start"):
        scenario_from_dict({"world": {"bounds": [3, 3]}, "robot": {}})


def test_start_inside_obstacle_rejected():
    with pytest.raises(ScenarioError, match="robot.start"):
        parse_scenario("world: {bounds: [6, 4], obstacles: [[0, 0, 2, 2]]}\nrobot: {start: [1, 1]}\n")


def test_parse_error_reports_line():
    with pytest.raises(ScenarioError) as ei:
        parse_scenario("world:\n  bounds: [6, 4\nrobot: {start: [1, 1]}\n")
    assert ei.value.line is not None and "parse error" in str(ei.value)


def test_wrong_schema_version():
    with pytest.raises(ScenarioError, match="schema"):
        parse_scenario("schema: 2\n" + MINIMAL)


def test_load_from_file(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text(MINIMAL, encoding="utf-8")
    assert load_scenario(p).bounds == (6.0, 4.0)
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.yaml")


def test_demo_scenario_loads():
    sc = load_demo()
    assert len(sc.people) == 3 and len(sc.goals) == 3
    assert [p.id for p in sc.people if p.core_temp > sc.fever_threshold] == [2]
