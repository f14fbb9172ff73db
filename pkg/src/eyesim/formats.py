"""Scenario configuration, input-trace parsing, and trial-log persistence.

Scenario files are JSON validated against the shipped schema; loading deep
merges the file onto the documented defaults so the returned Scenario never
contains hidden fallbacks. Input traces and trial logs are plain CSV with
fixed column orders, 9 significant digits, and byte-stable output.

File-unit convention: seconds, meters, m/s and rad/s for velocities, N and
N*m for wrenches; reported forces in trial logs are mN and depths mm.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .control import AfcGains, MasterBodyMap, MotionScaling
from .engine import InputSample, RobotConfig, RobotInput, TickRecord, TrialLog, World, make_world
from .kinematics import JointAxis, JointLimits, RigidTransform, RobotModel
from .scene import EyePhantom, TaskLayout

SIDES = ("right", "left")

# Per-robot trial-log column suffixes, in the exact written order.
_ROBOT_COLUMNS = (
    [f"th{i}" for i in range(5)]
    + [f"thd{i}" for i in range(5)]
    + ["svx", "svy", "svz", "swx", "swy", "swz"]  # actual spatial twist
    + ["dvx", "dvy", "dvz", "dwx", "dwy", "dwz"]  # desired body twist
    + ["ivx", "ivy", "ivz", "iwx", "iwy", "iwz"]  # raw input (wrench in BMAC)
    + ["fsx", "fsy", "fs", "ft", "depth", "dx", "dy", "pedal", "clutch"]
)
_META_ORDER = (
    "mode",
    "posture",
    "scenario_hash",
    "seed",
    "dt",
    "completion_reason",
    "completion_time",
    "touch_order",
    "ticks",
)


class ScenarioError(ValueError):
    """Scenario file failed validation; message names the offending JSON path."""


class TraceError(ValueError):
    """Input trace is malformed; message names the offending line."""


@dataclass
class Scenario:
    """Fully materialized trial configuration, ready to build a World."""

    raw: dict  # the merged, validated JSON document
    dt: float
    seed: int
    mode: str
    posture: str
    max_duration: float
    noise_force_mn: float
    noise_depth_mm: float
    scene: EyePhantom
    task: TaskLayout
    configs: dict[str, RobotConfig]
    initial_theta: dict[str, np.ndarray]


def _unit(v):
    a = np.asarray(v, dtype=float)
    return (a / np.linalg.norm(a)).tolist()


def _default_robot_block(side: str) -> dict:
    """Home pose threading the tool through this side's port, 8 mm inserted,
    with the rotation axes pivoting at the handle."""
    sx = 1.0 if side == "right" else -1.0
    u = np.array([sx * 0.6, 0.0, 0.8])  # port direction, unit by construction
    shaft_length = 0.03
    insertion = 0.008
    radius = 0.012
    handle = (radius + shaft_length - insertion) * u
    z_b = (-u).tolist()
    x_b = _unit(np.cross([0.0, 1.0, 0.0], -u))
    y_b = np.cross(z_b, x_b).tolist()
    rotation = np.column_stack([x_b, y_b, z_b]).tolist()
    rot = float(np.deg2rad(75.0))  # pins demand yaw swings beyond 50 deg
    return {
        "axes": [
            {"kind": "prismatic", "v": [1.0, 0.0, 0.0]},
            {"kind": "prismatic", "v": [0.0, 1.0, 0.0]},
            {"kind": "prismatic", "v": [0.0, 0.0, 1.0]},
            {"kind": "revolute", "omega": [0.0, 0.0, 1.0], "q": handle.tolist()},
            {"kind": "revolute", "omega": [0.0, 1.0, 0.0], "q": handle.tolist()},
        ],
        "home": {"rotation": rotation, "translation": handle.tolist()},
        "joint_limits": {
            "pos_min": [-0.05, -0.05, -0.05, -rot, -rot],
            "pos_max": [0.05, 0.05, 0.05, rot, rot],
            "vel_max": [0.05, 0.05, 0.05, 1.0, 1.0],
        },
        "initial_theta": [0.0, 0.0, 0.0, 0.0, 0.0],
        "shaft_length": shaft_length,
        "port": 0 if side == "right" else 1,
        "role": "dominant" if side == "right" else "non-dominant",
        "master_map": np.eye(3).tolist(),
        "scaling": [1.0] * 6,
        "afc": {
            "threshold_mn": 100.0,
            "safe_limit_mn": 120.0,
            "force_gain": 2e-4,
            "adapt_gain": 5e-7,
            "alpha0": 0.0,
        },
        "admittance": [0.01, 0.01, 0.01, 0.2, 0.2, 0.2],
        "plant": {"time_constant": 0.002, "rate_limit": [4.0, 4.0, 4.0, 50.0, 50.0]},
        "optimizer": {"damping": 1e-3, "weights": [1.0] * 6},
    }


def default_scenario() -> dict:
    """The complete documented default scenario as a plain JSON document."""
    return {
        "dt": 0.001,
        "seed": 0,
        "mode": "BMAT",
        "posture": "sitting",
        "max_duration": 60.0,
        "scene": {
            "center": [0.0, 0.0, 0.0],
            "radius": 0.012,
            "retina_radius": 0.0115,
            "orientation": np.eye(3).tolist(),
            "ports": [[0.6, 0.0, 0.8], [-0.6, 0.0, 0.8]],
            "rot_stiffness": 0.02,
            "rot_damping": 0.05,
            "sclera_stiffness": 100.0,
            "retina_stiffness": 500.0,
            "guard_radius": 0.005,
            "dynamic": True,
            "noise": {"force_sigma_mn": 2.0, "depth_sigma_mm": 0.05},
        },
        "task": {
            "colors": ["red", "green", "blue", "yellow"],
            "pins": [
                _unit([0.5 * np.cos(np.deg2rad(p)), 0.5 * np.sin(np.deg2rad(p)), -np.sqrt(0.75)])
                for p in (45.0, 135.0, 225.0, 315.0)
            ],
            "start": [0.0, 0.0, -1.0],
            "capture_radius": 0.0005,
        },
        "robots": {side: _default_robot_block(side) for side in SIDES},
    }


def _deep_merge(base, override):
    if isinstance(base, dict) and isinstance(override, dict):
        out = dict(base)
        for k, v in override.items():
            out[k] = _deep_merge(base[k], v) if k in base else v
        return out
    return override


def _schema() -> dict:
    text = resources.files("eyesim.schemas").joinpath("scenario.schema.json").read_text()
    return json.loads(text)


def validate_scenario_dict(doc: dict) -> None:
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: e.json_path)
    if errors:
        e = errors[0]
        raise ScenarioError(f"{e.json_path}: {e.message}")


def _build_robot(block: dict) -> tuple[RobotConfig, np.ndarray]:
    axes = []
    for a in block["axes"]:
        if a["kind"] == "prismatic":
            axes.append(JointAxis("prismatic", v=np.array(a["v"], dtype=float)))
        else:
            axes.append(
                JointAxis(
                    "revolute",
                    omega=np.array(a["omega"], dtype=float),
                    q=np.array(a["q"], dtype=float),
                )
            )
    model = RobotModel(
        axes=axes,
        home=RigidTransform(
            np.array(block["home"]["rotation"], dtype=float),
            np.array(block["home"]["translation"], dtype=float),
        ),
        joint_limits=JointLimits(
            pos_min=block["joint_limits"]["pos_min"],
            pos_max=block["joint_limits"]["pos_max"],
            vel_max=block["joint_limits"]["vel_max"],
        ),
    )
    afc = block["afc"]
    config = RobotConfig(
        model=model,
        shaft_length=float(block["shaft_length"]),
        port_index=int(block["port"]),
        role=block["role"],
        gains=AfcGains(
            threshold_mn=afc["threshold_mn"],
            safe_limit_mn=afc["safe_limit_mn"],
            force_gain=afc["force_gain"],
            adapt_gain=afc["adapt_gain"],
            alpha0=afc["alpha0"],
        ),
        scaling=MotionScaling(kappa=tuple(block["scaling"])),
        master_map=MasterBodyMap(np.array(block["master_map"], dtype=float)),
        admittance=np.array(block["admittance"], dtype=float),
        plant_time_constant=float(block["plant"]["time_constant"]),
        plant_rate_limit=np.array(block["plant"]["rate_limit"], dtype=float),
        optimizer_damping=float(block["optimizer"]["damping"]),
        optimizer_weights=np.array(block["optimizer"]["weights"], dtype=float),
    )
    theta0 = np.array(block["initial_theta"], dtype=float)
    if not model.joint_limits.contains(theta0):
        raise ScenarioError("initial_theta lies outside the joint limits")
    return config, theta0


def scenario_from_dict(doc: dict) -> Scenario:
    """Merge onto defaults, validate, and build the typed Scenario."""
    merged = _deep_merge(default_scenario(), doc)
    validate_scenario_dict(merged)
    sc = merged["scene"]
    scene = EyePhantom(
        center=np.array(sc["center"], dtype=float),
        radius=float(sc["radius"]),
        retina_radius=float(sc["retina_radius"]),
        orientation=np.array(sc["orientation"], dtype=float),
        home_orientation=np.array(sc["orientation"], dtype=float),
        ports=np.array(sc["ports"], dtype=float),
        rot_stiffness=float(sc["rot_stiffness"]),
        rot_damping=float(sc["rot_damping"]),
        sclera_stiffness=float(sc["sclera_stiffness"]),
        retina_stiffness=float(sc["retina_stiffness"]),
        guard_radius=float(sc["guard_radius"]),
        dynamic=bool(sc["dynamic"]),
    )
    tk = merged["task"]
    task = TaskLayout(
        colors=tuple(tk["colors"]),
        pins=np.array(tk["pins"], dtype=float),
        start=np.array(tk["start"], dtype=float),
        capture_radius=float(tk["capture_radius"]),
    )
    configs: dict[str, RobotConfig] = {}
    theta0: dict[str, np.ndarray] = {}
    for side in SIDES:
        try:
            configs[side], theta0[side] = _build_robot(merged["robots"][side])
        except (ValueError, KeyError) as err:
            raise ScenarioError(f"$.robots.{side}: {err}") from err
    ports_assigned = sorted(configs[s].port_index for s in SIDES)
    if ports_assigned != [0, 1]:
        raise ScenarioError("$.robots: the two robots must claim distinct ports 0 and 1")
    roles = sorted(configs[s].role for s in SIDES)
    if roles != ["dominant", "non-dominant"]:
        raise ScenarioError("$.robots: exactly one robot must be dominant")
    noise = sc["noise"]
    return Scenario(
        raw=merged,
        dt=float(merged["dt"]),
        seed=int(merged["seed"]),
        mode=merged["mode"],
        posture=merged["posture"],
        max_duration=float(merged["max_duration"]),
        noise_force_mn=float(noise["force_sigma_mn"]),
        noise_depth_mm=float(noise["depth_sigma_mm"]),
        scene=scene,
        task=task,
        configs=configs,
        initial_theta=theta0,
    )


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    if not p.exists():
        raise ScenarioError(f"scenario file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as err:
        raise ScenarioError(f"{p}: invalid JSON ({err})") from err
    if not isinstance(doc, dict):
        raise ScenarioError(f"{p}: top level must be a JSON object")
    return scenario_from_dict(doc)


def build_world(scenario: Scenario, seed: int | None = None, dt: float | None = None) -> World:
    """World from a scenario, with optional seed/dt overrides (CLI flags)."""
    return make_world(
        configs=scenario.configs,
        initial_theta=scenario.initial_theta,
        scene=scenario.scene,
        task=scenario.task,
        mode=scenario.mode,
        dt=scenario.dt if dt is None else dt,
        seed=scenario.seed if seed is None else seed,
        noise_force_mn=scenario.noise_force_mn,
        noise_depth_mm=scenario.noise_depth_mm,
    )


def scenario_hash(scenario: Scenario) -> str:
    blob = json.dumps(scenario.raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def run_hash(scenario: Scenario, trace_bytes: bytes, seed: int, dt: float) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(scenario.raw, sort_keys=True, separators=(",", ":")).encode())
    h.update(b"\x00")
    h.update(trace_bytes)
    h.update(f"\x00{seed}\x00{dt!r}".encode())
    return h.hexdigest()[:12]


# ---------------------------------------------------------------------------
# input traces

def trace_header(mode: str) -> list[str]:
    names = ("vx", "vy", "vz", "wx", "wy", "wz") if mode == "BMAT" else (
        "fx", "fy", "fz", "tx", "ty", "tz")
    cols = ["t"]
    for side in ("r", "l"):
        cols += [f"{side}_{n}" for n in names] + [f"{side}_pedal", f"{side}_clutch"]
    return cols


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def parse_trace(path: str | Path, mode: str) -> list[InputSample]:
    p = Path(path)
    if not p.exists():
        raise TraceError(f"trace file not found: {p}")
    expected = trace_header(mode)
    samples: list[InputSample] = []
    last_t = -np.inf
    with open(p, "r", newline="") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines:
        raise TraceError(f"{p}: empty file (expected a header line)")
    header = lines[0].split(",")
    if header != expected:
        raise TraceError(f"{p}: line 1: header must be {','.join(expected)}")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(expected):
            raise TraceError(f"{p}: line {lineno}: expected {len(expected)} fields")
        try:
            vals = [float(x) for x in parts]
        except ValueError as err:
            raise TraceError(f"{p}: line {lineno}: {err}") from err
        if not all(np.isfinite(v) for v in vals):
            raise TraceError(f"{p}: line {lineno}: non-finite field")
        t = vals[0]
        if t <= last_t:
            raise TraceError(f"{p}: line {lineno}: timestamps must strictly increase")
        last_t = t
        right = RobotInput(np.array(vals[1:7]), pedal=vals[7], clutch=int(vals[8]))
        left = RobotInput(np.array(vals[9:15]), pedal=vals[15], clutch=int(vals[16]))
        samples.append(InputSample(t=t, right=right, left=left))
    return samples


def write_trace(samples: list[InputSample], path: str | Path, mode: str) -> None:
    # shortest-repr floats: traces must survive a write/parse round trip exactly
    lines = [",".join(trace_header(mode))]
    for s in samples:
        row = [repr(float(s.t))]
        for rin in (s.right, s.left):
            row += [repr(float(v)) for v in rin.command]
            row += [repr(float(rin.pedal)), str(int(rin.clutch))]
        lines.append(",".join(row))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode())


# ---------------------------------------------------------------------------
# trial logs

def trial_columns() -> list[str]:
    cols = ["t"]
    for side, prefix in (("right", "r"), ("left", "l")):
        cols += [f"{prefix}_{c}" for c in _ROBOT_COLUMNS]
    cols.append("events")
    return cols


def _robot_row(rec: dict) -> list[str]:
    out = [_fmt(v) for v in rec["theta"]]
    out += [_fmt(v) for v in rec["theta_dot"]]
    out += [_fmt(v) for v in rec["vel_spatial"]]
    out += [_fmt(v) for v in rec["vel_des_body"]]
    out += [_fmt(v) for v in rec["input"]]
    out += [_fmt(rec[k]) for k in ("fsx", "fsy", "fs", "ft", "depth")]
    out += [str(int(rec["delta_x"])), str(int(rec["delta_y"]))]
    out += [_fmt(rec["pedal"]), str(int(rec["clutch"]))]
    return out


def trial_csv_bytes(log: TrialLog) -> bytes:
    """Render a trial log to its canonical byte form."""
    lines = []
    keys = [k for k in _META_ORDER if k in log.meta]
    keys += sorted(k for k in log.meta if k not in _META_ORDER)
    for k in keys:
        lines.append(f"# {k}={json.dumps(log.meta[k])}")
    lines.append(",".join(trial_columns()))
    for rec in log.records:
        row = [_fmt(rec.t)]
        row += _robot_row(rec.robots["right"])
        row += _robot_row(rec.robots["left"])
        row.append(";".join(rec.events))
        lines.append(",".join(row))
    return ("\n".join(lines) + "\n").encode()


def write_trial_csv(log: TrialLog, path: str | Path) -> None:
    try:
        Path(path).write_bytes(trial_csv_bytes(log))
    except OSError as err:
        raise OSError(f"failed to write trial log {path}: {err}") from err


def _robot_record(vals: list[float]) -> dict:
    # vals laid out exactly as _robot_row writes them
    return {
        "theta": np.array(vals[0:5]),
        "theta_dot": np.array(vals[5:10]),
        "vel_spatial": np.array(vals[10:16]),
        "vel_des_body": np.array(vals[16:22]),
        "input": np.array(vals[22:28]),
        "fsx": vals[28],
        "fsy": vals[29],
        "fs": vals[30],
        "ft": vals[31],
        "depth": vals[32],
        "delta_x": int(vals[33]),
        "delta_y": int(vals[34]),
        "pedal": vals[35],
        "clutch": int(vals[36]),
    }


def read_trial_csv(path: str | Path) -> TrialLog:
    lines = Path(path).read_text().splitlines()
    meta: dict = {}
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        key, _, value = lines[i][1:].strip().partition("=")
        meta[key.strip()] = json.loads(value)
        i += 1
    if i >= len(lines) or lines[i].split(",") != trial_columns():
        raise ValueError(f"{path}: missing or wrong trial header")
    records = []
    ncols = len(trial_columns())
    nrc = len(_ROBOT_COLUMNS)
    for line in lines[i + 1 :]:
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != ncols:
            raise ValueError(f"{path}: malformed row")
        t = float(parts[0])
        r_vals = [float(x) for x in parts[1 : 1 + nrc]]
        l_vals = [float(x) for x in parts[1 + nrc : 1 + 2 * nrc]]
        events = tuple(parts[-1].split(";")) if parts[-1] else ()
        records.append(
            TickRecord(
                t=t,
                robots={
                    "right": _robot_record(r_vals),
                    "left": _robot_record(l_vals),
                },
                events=events,
            )
        )
    return TrialLog(records=records, meta=meta)
