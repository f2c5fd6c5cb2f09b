"""Scenario files.

A scenario is a YAML mapping.  Every key is optional except ``name``,
``duration`` and ``mode``::

    name: velocity_steps
    duration: 15.0            # s, > 0
    seed: 1
    mode: manual-setpoints    # | autonomous-goal | wave
    dt: 0.001                 # control/physics tick, s
    initial: {x: 0, y: 0, heading: 0, speed: 0, x_gap: 0}
    platform: {m: 3.0, c4: 200.0}          # PlatformParams overrides
    rider: {M: 32.0, L: 0.9}               # RiderParams overrides
    gains: {Kp_vel: 0.06}                  # Gains overrides
    noise: {std_v: 0.02}                   # NoiseConfig overrides, or "exact"
    schedule:                 # manual-setpoints: rows [t, v_d, psi_dot_d] or
      - [0.0, 0.5, 0.0]       # [t, v_d, psi_dot_d, y_offset], t sorted
    y_offset: 0.2             # stance half-width when not scheduled
    wave: {v_d: 1.0, psi_dot_d: 0.0, mean: 0.2, amplitude: 0.1, frequency: 0.5}
    goal: [10.0, 0.0, 0.0]    # autonomous-goal: x, y, heading
    obstacles:                # polygons; low ones are below the scan plane
      - {polygon: [[3, -1], [3.5, -1], [3.5, 0], [3, 0]], low: false}
    obstacle_grid: course.txt # ASCII grid file; occupied cells become obstacles
    ground_truth: false       # feed the controller exact odometry
    disturbances:
      - {target: left, impulse: [4.0, 0.0], time: 3.0}
    planner: {period_ticks: 100, v_max: 0.8, ...}   # see PlannerConfig
    metrics: {transient: 2.0, settle_band: 0.05}
    outputs: {trajectory: trajectory.csv, channels: channels.csv, metrics: metrics.json}

Errors are reported as :class:`ConfigError` naming the field and line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .control import Gains
from .faults import ConfigError
from .planner.grid import OCCUPIED, OccupancyGrid, load_grid
from .platform import PlatformParams
from .rider import RiderParams
from .world import Disturbance, NoiseConfig

MODES = ("manual-setpoints", "autonomous-goal", "wave")

_TOP_KEYS = {
    "name", "duration", "seed", "mode", "dt", "initial", "platform", "rider", "gains",
    "noise", "schedule", "y_offset", "wave", "goal", "obstacles", "disturbances",
    "planner", "metrics", "outputs", "description", "obstacle_grid", "ground_truth",
}


@dataclass(frozen=True)
class WaveSpec:
    v_d: float = 1.0
    psi_dot_d: float = 0.0
    mean: float = 0.2
    amplitude: float = 0.1
    frequency: float = 0.5  # Hz

    def y_offset(self, t: float) -> float:
        return self.mean + self.amplitude * math.sin(2 * math.pi * self.frequency * t)


@dataclass(frozen=True)
class Obstacle:
    polygon: np.ndarray
    low: bool = False


@dataclass(frozen=True)
class PlannerConfig:
    period_ticks: int = 100
    resolution: float = 0.05
    map_origin: tuple[float, float] | None = None
    map_size: tuple[float, float] | None = None  # m; defaults to the obstacle bounding box + 2 m
    inflation_radius: float = 1.0
    decay: float = 4.0
    robot_radius: float = 0.3
    clearance_margin: float = 0.1
    v_max: float = 0.8
    a_max: float = 0.5
    psi_dot_max: float = 1.0
    lookahead: float = 1.75
    goal_tolerance: float = 0.25
    scan_beams: int = 181
    scan_range: float = 4.0
    scan_fov: float = math.pi
    stop_at_goal: float = 1.0  # s to keep simulating after the goal is reached; < 0 disables


@dataclass(frozen=True)
class MetricsConfig:
    transient: float = 2.0
    settle_band: float = 0.05
    gap_tolerance: float = 0.005


@dataclass(frozen=True)
class Outputs:
    trajectory: str = "trajectory.csv"
    channels: str = "channels.csv"
    metrics: str = "metrics.json"


@dataclass(frozen=True)
class Scenario:
    name: str
    duration: float
    mode: str
    seed: int = 0
    dt: float = 1e-3
    initial: dict = field(default_factory=dict)
    platform: PlatformParams = field(default_factory=PlatformParams)
    rider: RiderParams = field(default_factory=RiderParams)
    gains: Gains = field(default_factory=Gains)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    schedule: tuple[tuple[float, ...], ...] = ()
    y_offset: float = 0.2
    wave: WaveSpec | None = None
    goal: tuple[float, float, float] | None = None
    obstacles: tuple[Obstacle, ...] = ()
    disturbances: tuple[Disturbance, ...] = ()
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    outputs: Outputs = field(default_factory=Outputs)
    description: str = ""
    ground_truth: bool = False
    source: str | None = None

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration / self.dt))

    def setpoint_at(self, t: float) -> tuple[float, float, float]:
        """(v_d, psi_dot_d, y_offset) from the schedule or wave spec."""
        if self.mode == "wave":
            w = self.wave
            return w.v_d, w.psi_dot_d, w.y_offset(t)
        v = p = 0.0
        y = self.y_offset
        for row in self.schedule:
            if row[0] > t + 1e-12:
                break
            v, p = row[1], row[2]
            if len(row) > 3:
                y = row[3]
        return v, p, y

    def with_gains(self, **kw) -> "Scenario":
        return replace(self, gains=replace(self.gains, **kw))


def grid_rectangles(grid: OccupancyGrid) -> list[np.ndarray]:
    """Occupied cells as axis-aligned rectangles, one per horizontal run."""
    out = []
    r = grid.resolution
    ox, oy = grid.origin
    for i in range(grid.height):
        occ = np.concatenate([[False], grid.data[i] == OCCUPIED, [False]])
        edges = np.flatnonzero(occ[1:] != occ[:-1])
        for j0, j1 in zip(edges[::2], edges[1::2]):
            x0, x1 = ox + j0 * r, ox + j1 * r
            y0, y1 = oy + i * r, oy + (i + 1) * r
            out.append(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]]))
    return out


# ---------------------------------------------------------------- loading


def _line_index(text: str) -> dict:
    """Map key paths (tuples) to 1-based line numbers."""
    out = {}

    def walk(node, path):
        out[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                out[path + (k.value,)] = k.start_mark.line + 1
                walk(v, path + (k.value,))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, path + (i,))

    root = yaml.compose(text)
    if root is not None:
        walk(root, ())
    return out


class _Ctx:
    def __init__(self, src, lines):
        self.src = src
        self.lines = lines

    def where(self, *path) -> str:
        p = tuple(path)
        while p and p not in self.lines:
            p = p[:-1]
        line = self.lines.get(p)
        name = ".".join(str(x) for x in path) or "<root>"
        loc = f"{self.src}:{line}" if line else str(self.src)
        return f"{loc} ({name})"

    def fail(self, msg, *path):
        raise ConfigError(msg, where=self.where(*path))


def _num(ctx, v, *path, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        ctx.fail(f"expected a number, got {v!r}", *path)
    v = float(v)
    if not math.isfinite(v):
        ctx.fail("must be finite", *path)
    if positive and v <= 0:
        ctx.fail("must be > 0", *path)
    if nonneg and v < 0:
        ctx.fail("must be >= 0", *path)
    return v


def _overrides(ctx, cls, raw, key, base=None):
    if raw is None:
        return base if base is not None else cls()
    if not isinstance(raw, dict):
        ctx.fail("expected a mapping", key)
    names = {f.name: f for f in fields(cls)}
    kw = {}
    for k, v in raw.items():
        if k not in names:
            ctx.fail(f"unknown field (known: {', '.join(sorted(names))})", key, k)
        if isinstance(v, list):
            kw[k] = tuple(_num(ctx, x, key, k, i) for i, x in enumerate(v))
        elif isinstance(v, (int, float)) and not isinstance(v, bool):
            kw[k] = type(v)(_num(ctx, v, key, k)) if isinstance(v, int) else _num(ctx, v, key, k)
        else:
            kw[k] = v
    try:
        return replace(base, **kw) if base is not None else cls(**kw)
    except (ValueError, TypeError) as e:
        ctx.fail(str(e), key)


def _polygon(ctx, raw, *path):
    try:
        poly = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        ctx.fail("polygon must be a list of [x, y] points", *path)
    if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3 or not np.all(np.isfinite(poly)):
        ctx.fail("polygon must have >= 3 finite [x, y] points", *path)
    return poly


def parse_scenario(raw, src="<scenario>", lines=None) -> Scenario:
    ctx = _Ctx(src, lines or {})
    if not isinstance(raw, dict):
        ctx.fail("scenario must be a mapping")
    for k in raw:
        if k not in _TOP_KEYS:
            ctx.fail(f"unknown key (known: {', '.join(sorted(_TOP_KEYS))})", k)
    for k in ("name", "duration", "mode"):
        if k not in raw:
            ctx.fail("required key missing", k)

    name = str(raw["name"])
    duration = _num(ctx, raw["duration"], "duration", positive=True)
    mode = raw["mode"]
    if mode not in MODES:
        ctx.fail(f"mode must be exactly one of {', '.join(MODES)}", "mode")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        ctx.fail("seed must be a non-negative integer", "seed")
    dt = _num(ctx, raw.get("dt", 1e-3), "dt", positive=True)
    if dt > 2e-3:
        ctx.fail("dt must be <= 0.002", "dt")

    initial = raw.get("initial", {}) or {}
    if not isinstance(initial, dict):
        ctx.fail("expected a mapping", "initial")
    allowed = {"x", "y", "heading", "speed", "x_gap"}
    for k, v in initial.items():
        if k not in allowed:
            ctx.fail(f"unknown field (known: {', '.join(sorted(allowed))})", "initial", k)
        initial[k] = _num(ctx, v, "initial", k)

    platform = _overrides(ctx, PlatformParams, raw.get("platform"), "platform")
    rider = _overrides(ctx, RiderParams, raw.get("rider"), "rider")
    gains = _overrides(ctx, Gains, raw.get("gains"), "gains")
    noise_raw = raw.get("noise")
    if noise_raw == "exact":
        noise = NoiseConfig.exact()
    else:
        noise = _overrides(ctx, NoiseConfig, noise_raw, "noise")

    y_offset = _num(ctx, raw.get("y_offset", rider.y_nominal), "y_offset", positive=True)

    schedule = []
    for i, row in enumerate(raw.get("schedule", []) or []):
        if not isinstance(row, list) or len(row) not in (3, 4):
            ctx.fail("schedule rows are [t, v_d, psi_dot_d] or [t, v_d, psi_dot_d, y_offset]", "schedule", i)
        schedule.append(tuple(_num(ctx, x, "schedule", i) for x in row))
    times = [r[0] for r in schedule]
    if any(b < a for a, b in zip(times, times[1:])):
        ctx.fail("schedule times must be sorted", "schedule")

    wave = None
    if "wave" in raw:
        wave = _overrides(ctx, WaveSpec, raw["wave"], "wave")

    goal = None
    if "goal" in raw:
        g = raw["goal"]
        if not isinstance(g, list) or len(g) not in (2, 3):
            ctx.fail("goal is [x, y] or [x, y, heading]", "goal")
        goal = tuple(_num(ctx, x, "goal", i) for i, x in enumerate(g))
        if len(goal) == 2:
            goal = goal + (0.0,)

    # exactly one way of producing set-points
    if mode == "manual-setpoints":
        if not schedule:
            ctx.fail("manual-setpoints mode needs a schedule", "schedule")
        if wave is not None or goal is not None:
            ctx.fail("manual-setpoints mode takes neither wave nor goal", "mode")
    elif mode == "wave":
        if wave is None:
            ctx.fail("wave mode needs a wave spec", "wave")
        if schedule or goal is not None:
            ctx.fail("wave mode takes neither schedule nor goal", "mode")
    else:
        if goal is None:
            ctx.fail("autonomous-goal mode needs a goal", "goal")
        if schedule or wave is not None:
            ctx.fail("autonomous-goal mode takes neither schedule nor wave", "mode")

    obstacles = []
    for i, ob in enumerate(raw.get("obstacles", []) or []):
        if isinstance(ob, dict):
            extra = set(ob) - {"polygon", "low"}
            if extra:
                ctx.fail(f"unknown obstacle field {sorted(extra)[0]!r}", "obstacles", i)
            if "polygon" not in ob:
                ctx.fail("obstacle needs a polygon", "obstacles", i)
            obstacles.append(Obstacle(_polygon(ctx, ob["polygon"], "obstacles", i, "polygon"), bool(ob.get("low", False))))
        else:
            obstacles.append(Obstacle(_polygon(ctx, ob, "obstacles", i)))

    if "obstacle_grid" in raw:
        g = raw["obstacle_grid"]
        gpath = Path(g)
        if not gpath.is_absolute() and Path(str(src)).is_file():
            gpath = Path(str(src)).parent / gpath
        try:
            grid = load_grid(gpath)
        except OSError as e:
            ctx.fail(f"cannot read grid file ({e})", "obstacle_grid")
        obstacles.extend(Obstacle(p) for p in grid_rectangles(grid))

    gt = raw.get("ground_truth", False)
    if not isinstance(gt, bool):
        ctx.fail("expected true or false", "ground_truth")

    disturbances = []
    for i, d in enumerate(raw.get("disturbances", []) or []):
        if not isinstance(d, dict) or set(d) != {"target", "impulse", "time"}:
            ctx.fail("disturbance needs exactly target, impulse, time", "disturbances", i)
        imp = d["impulse"]
        if not isinstance(imp, list) or len(imp) != 2:
            ctx.fail("impulse is [jx, jy] in N s", "disturbances", i, "impulse")
        try:
            disturbances.append(
                Disturbance(
                    d["target"],
                    tuple(_num(ctx, x, "disturbances", i, "impulse") for x in imp),
                    _num(ctx, d["time"], "disturbances", i, "time", nonneg=True),
                )
            )
        except ValueError as e:
            if isinstance(e, ConfigError):
                raise
            ctx.fail(str(e), "disturbances", i, "target")

    planner_raw = raw.get("planner")
    if isinstance(planner_raw, dict):
        planner_raw = dict(planner_raw)
        for k in ("map_origin", "map_size"):
            if k in planner_raw and planner_raw[k] is not None and len(planner_raw[k]) != 2:
                ctx.fail("expected [x, y]", "planner", k)
    planner = _overrides(ctx, PlannerConfig, planner_raw, "planner")
    if planner.period_ticks < 1 or int(planner.period_ticks) != planner.period_ticks:
        ctx.fail("period_ticks must be a positive integer", "planner", "period_ticks")
    metrics = _overrides(ctx, MetricsConfig, raw.get("metrics"), "metrics")
    outputs = _overrides(ctx, Outputs, raw.get("outputs"), "outputs")

    return Scenario(
        name=name,
        duration=duration,
        mode=mode,
        seed=seed,
        dt=dt,
        initial=initial,
        platform=platform,
        rider=rider,
        gains=gains,
        noise=noise,
        schedule=tuple(schedule),
        y_offset=y_offset,
        wave=wave,
        goal=goal,
        obstacles=tuple(obstacles),
        disturbances=tuple(disturbances),
        planner=planner,
        metrics=metrics,
        outputs=outputs,
        description=str(raw.get("description", "")),
        ground_truth=gt,
        source=str(src),
    )


BUNDLED_DIR = Path(__file__).parent / "scenarios"


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in BUNDLED_DIR.glob("*.yaml"))


def resolve(path_or_name) -> Path:
    """A file path, or the name of a bundled scenario."""
    p = Path(path_or_name)
    if p.exists():
        return p
    q = BUNDLED_DIR / f"{path_or_name}.yaml"
    if q.exists():
        return q
    raise ConfigError(f"no such scenario file or bundled scenario: {path_or_name}")


def load_scenario(path_or_name) -> Scenario:
    path = resolve(path_or_name)
    text = path.read_text()
    try:
        raw = yaml.safe_load(text)
        lines = _line_index(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark else str(path)
        raise ConfigError(f"YAML parse error: {getattr(e, 'problem', e)}", where=where) from None
    return parse_scenario(raw, src=path, lines=lines)
