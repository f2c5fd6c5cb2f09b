"""Small builders shared by the closed-loop tests."""
from hovershoe.runner import run_scenario
from hovershoe.scenario import parse_scenario


def scenario(**raw):
    raw.setdefault("name", "test")
    raw.setdefault("mode", "manual-setpoints")
    if raw["mode"] == "manual-setpoints":
        raw.setdefault("schedule", [[0.0, 0.0, 0.0]])
    return parse_scenario(raw)


def simulate(**raw):
    return run_scenario(scenario(**raw))
