import math
import textwrap

import pytest

from hovershoe.faults import ConfigError
from hovershoe.scenario import (
    bundled_scenarios, grid_rectangles, load_scenario, parse_scenario,
)
from hovershoe.planner.grid import load_grid


def write(tmp_path, text, name="s.yaml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return p


def test_bundled_set_complete():
    names = set(bundled_scenarios())
    assert {"velocity_steps", "turn_step", "circle", "wave", "kick_robustness",
            "obstacle_course", "wave_split", "x_gap", "zero"} <= names


@pytest.mark.parametrize("name", bundled_scenarios())
def test_bundled_validate(name):
    s = load_scenario(name)
    assert s.duration > 0 and s.name == name
    times = [r[0] for r in s.schedule]
    assert times == sorted(times)


def test_velocity_steps_schedule():
    s = load_scenario("velocity_steps")
    assert [r[1] for r in s.schedule] == [0.5, 1.0, 1.5]
    assert s.setpoint_at(7.0)[0] == 1.0


def test_unknown_key_reports_line(tmp_path):
    p = write(tmp_path, """\
        name: a
        duration: 1.0
        mode: manual-setpoints
        schedule: [[0, 0, 0]]
        gainz: {Kp_x: 1}
        """)
    with pytest.raises(ConfigError) as e:
        load_scenario(p)
    assert e.value.where == f"{p}:5 (gainz)"


def test_unknown_gain_field_reports_line(tmp_path):
    p = write(tmp_path, """\
        name: a
        duration: 1.0
        mode: manual-setpoints
        schedule: [[0, 0, 0]]
        gains:
          Kp_vel: 0.1
          Kp_bogus: 1.0
        """)
    with pytest.raises(ConfigError) as e:
        load_scenario(p)
    assert e.value.where == f"{p}:7 (gains.Kp_bogus)"


def test_yaml_syntax_error_has_line(tmp_path):
    p = write(tmp_path, "name: a\nduration: [1.0\nmode: wave\n")
    with pytest.raises(ConfigError) as e:
        load_scenario(p)
    assert str(p) in str(e.value) and "YAML" in str(e.value)


@pytest.mark.parametrize(
    "raw, field",
    [
        (dict(duration=0.0), "duration"),
        (dict(duration=-1.0), "duration"),
        (dict(duration="long"), "duration"),
        (dict(mode="teleop"), "mode"),
        (dict(schedule=[[1.0, 0.5, 0.0], [0.5, 1.0, 0.0]]), "schedule"),
        (dict(schedule=[[0.0, 0.5]]), "schedule.0"),
        (dict(goal=[1.0, 0.0]), "mode"),
        (dict(wave={"amplitude": 0.1}), "mode"),
        (dict(disturbances=[{"target": "left", "impulse": [1.0], "time": 1.0}]), "disturbances.0.impulse"),
        (dict(disturbances=[{"target": "middle", "impulse": [1.0, 0.0], "time": 1.0}]), "disturbances.0.target"),
        (dict(planner={"period_ticks": 0}), "planner.period_ticks"),
        (dict(obstacles=[{"polygon": [[0, 0], [1, 0]]}]), "obstacles.0.polygon"),
        (dict(seed=-3), "seed"),
    ],
)
def test_validation_errors_name_field(raw, field):
    base = dict(name="a", duration=1.0, mode="manual-setpoints", schedule=[[0.0, 0.0, 0.0]])
    base.update(raw)
    with pytest.raises(ConfigError) as e:
        parse_scenario(base)
    assert f"({field})" in e.value.where


def test_missing_required():
    with pytest.raises(ConfigError, match="required"):
        parse_scenario({"name": "a", "mode": "wave", "wave": {}})


@pytest.mark.parametrize(
    "mode, extra",
    [("manual-setpoints", {}), ("wave", {"wave": {}}), ("autonomous-goal", {"goal": [1.0, 0.0]})],
)
def test_mode_needs_its_data(mode, extra):
    with pytest.raises(ConfigError):
        parse_scenario({"name": "a", "duration": 1.0, "mode": mode})
    s = parse_scenario({"name": "a", "duration": 1.0, "mode": mode, **(extra or {"schedule": [[0, 0, 0]]})})
    assert s.mode == mode


def test_setpoint_schedule_and_wave():
    s = parse_scenario({"name": "a", "duration": 3.0, "mode": "manual-setpoints",
                        "schedule": [[0.0, 0.5, 0.0], [1.0, 1.0, 0.2, 0.3]]})
    assert s.setpoint_at(0.999) == (0.5, 0.0, 0.2)
    assert s.setpoint_at(1.0) == (1.0, 0.2, 0.3)
    w = parse_scenario({"name": "w", "duration": 2.0, "mode": "wave",
                        "wave": {"mean": 0.2, "amplitude": 0.1, "frequency": 0.5}})
    assert w.setpoint_at(0.5)[2] == pytest.approx(0.2 + 0.1 * math.sin(math.pi * 0.5))


def test_obstacle_grid(tmp_path):
    (tmp_path / "m.txt").write_text("4 3 0.5 0.0 0.0\n0000\n0110\n0000\n")
    p = write(tmp_path, """\
        name: g
        duration: 1.0
        mode: autonomous-goal
        goal: [1.9, 0.2]
        obstacle_grid: m.txt
        """)
    s = load_scenario(p)
    assert len(s.obstacles) == 1
    poly = s.obstacles[0].polygon
    assert poly[:, 0].min() == 0.5 and poly[:, 0].max() == 1.5
    assert poly[:, 1].min() == 0.5 and poly[:, 1].max() == 1.0
    assert len(grid_rectangles(load_grid(tmp_path / "m.txt"))) == 1


def test_with_gains_is_a_copy():
    s = load_scenario("velocity_steps")
    t = s.with_gains(Kp_vel=0.12)
    assert t.gains.Kp_vel == 0.12 and s.gains.Kp_vel != 0.12
