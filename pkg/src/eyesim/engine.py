"""Deterministic fixed-timestep world loop for bimanual trials.

One tick runs, for each robot in a fixed order (right then left): sense the
port forces, add sensor noise, update the hysteresis switches, evaluate the
adaptive velocities for active axes, map the master (or admittance) command
into the body frame, pedal-scale it, blend through the hybrid law, solve the
constrained joint-velocity problem, advance the servo plant, integrate the
joints and refresh the pose. The eye then reorients under both pre-noise
port loads, task progress is checked on the dominant tip, and a tick record
is emitted. Everything is driven by one seeded generator; identical inputs
give bit-identical logs.

The two control paths share nothing: each robot's commands depend only on
its own sensor readings and its own master input.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .control import (
    AfcAxisState,
    AfcGains,
    MasterBodyMap,
    MotionScaling,
    admittance_command,
    afc_axis_velocity,
    hybrid_command,
    map_master_to_body,
    master_safety_scale,
    pedal_scale,
    switching_policy,
)
from .joints import VelocityPlant, solve_joint_velocities, track_joint_velocity
from .kinematics import (
    BodyVelocity,
    JointState,
    RigidTransform,
    RobotModel,
    adjoint,
    body_jacobian,
    forward_kinematics,
)
from .scene import (
    EyePhantom,
    TaskLayout,
    ToolState,
    add_sensor_noise,
    check_pin_touch,
    sclera_force,
    step_eye_dynamics,
)

SIDES = ("right", "left")


class SimulationNaNError(RuntimeError):
    """A non-finite value appeared mid-tick; names the stage and robot."""

    def __init__(self, stage: str, side: str):
        super().__init__(f"non-finite value at stage '{stage}' for robot '{side}'")
        self.stage = stage
        self.side = side


@dataclass
class RobotInput:
    """One robot's share of an input sample."""

    command: np.ndarray  # 6-vector: master velocity (BMAT) or handle wrench (BMAC)
    pedal: float = 1.0
    clutch: int = 1

    def __post_init__(self) -> None:
        self.command = np.asarray(self.command, dtype=float)
        if self.command.shape != (6,):
            raise ValueError("input command must be a 6-vector")

    @staticmethod
    def idle() -> "RobotInput":
        return RobotInput(np.zeros(6), pedal=0.0, clutch=0)


@dataclass
class InputSample:
    """Timestamped operator input for both robots."""

    t: float
    right: RobotInput
    left: RobotInput


@dataclass
class RobotConfig:
    """Static per-robot bundle: kinematic model plus controller parameters."""

    model: RobotModel
    shaft_length: float
    port_index: int
    role: str  # "dominant" | "non-dominant"
    gains: AfcGains
    scaling: MotionScaling
    master_map: MasterBodyMap
    admittance: np.ndarray
    plant_time_constant: float = 0.02
    plant_rate_limit: np.ndarray | None = None
    optimizer_damping: float = 1e-3
    optimizer_weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.admittance = np.asarray(self.admittance, dtype=float)
        if self.plant_rate_limit is None:
            # default: reach the velocity cap in a tenth of a second
            self.plant_rate_limit = 10.0 * self.model.joint_limits.vel_max
        self.plant_rate_limit = np.asarray(self.plant_rate_limit, dtype=float)
        if self.optimizer_weights is not None:
            self.optimizer_weights = np.asarray(self.optimizer_weights, dtype=float)


@dataclass
class RobotState:
    """Evolving per-robot state: joints, servo plant, switches, cached pose."""

    joints: JointState
    plant: VelocityPlant
    afc_x: AfcAxisState
    afc_y: AfcAxisState
    pose: RigidTransform


@dataclass
class TaskProgress:
    """Vessel-following bookkeeping on the dominant tip."""

    touch_order: list[int] = field(default_factory=list)
    touching: int | None = None  # pin currently in contact (edge detection)
    all_touched: bool = False
    completed: bool = False
    completion_time: float | None = None


@dataclass
class TickRecord:
    """Everything logged for one tick (forces in mN, depth in mm)."""

    t: float
    robots: dict  # side -> per-robot record dict
    events: tuple[str, ...] = ()


@dataclass
class TrialLog:
    """Ordered tick records plus trial metadata."""

    records: list[TickRecord]
    meta: dict


@dataclass
class World:
    """All mutable trial state; owned by the tick loop, never shared."""

    configs: dict[str, RobotConfig]
    states: dict[str, RobotState]
    scene: EyePhantom
    task: TaskLayout
    progress: TaskProgress
    mode: str  # "BMAT" | "BMAC"
    dt: float
    seed: int
    rng: np.random.Generator
    noise_force_mn: float
    noise_depth_mm: float
    tick_index: int = 0

    @property
    def clock(self) -> float:
        return self.tick_index * self.dt


def make_world(
    configs: dict[str, RobotConfig],
    initial_theta: dict[str, np.ndarray],
    scene: EyePhantom,
    task: TaskLayout,
    mode: str,
    dt: float,
    seed: int,
    noise_force_mn: float = 2.0,
    noise_depth_mm: float = 0.05,
) -> World:
    if mode not in ("BMAT", "BMAC"):
        raise ValueError("mode must be BMAT or BMAC")
    if dt <= 0:
        raise ValueError("dt must be positive")
    states = {}
    for side in SIDES:
        cfg = configs[side]
        theta = np.asarray(initial_theta[side], dtype=float)
        states[side] = RobotState(
            joints=JointState(theta=theta.copy(), theta_dot=np.zeros(5)),
            plant=VelocityPlant(cfg.plant_time_constant, cfg.plant_rate_limit, np.zeros(5)),
            afc_x=AfcAxisState(alpha=cfg.gains.alpha0),
            afc_y=AfcAxisState(alpha=cfg.gains.alpha0),
            pose=forward_kinematics(cfg.model, theta),
        )
    return World(
        configs=configs,
        states=states,
        scene=scene,
        task=task,
        progress=TaskProgress(),
        mode=mode,
        dt=dt,
        seed=seed,
        rng=np.random.default_rng(seed),
        noise_force_mn=noise_force_mn,
        noise_depth_mm=noise_depth_mm,
    )


def _require_finite(value, stage: str, side: str) -> None:
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise SimulationNaNError(stage, side)


def _step_robot(
    world: World, side: str, rin: RobotInput, t: float
) -> tuple[RobotState, dict, np.ndarray]:
    """Advance one robot by one tick; returns (state', record, port load in N)."""
    cfg = world.configs[side]
    st = world.states[side]
    dt = world.dt

    tool = ToolState(pose=st.pose, shaft_length=cfg.shaft_length)
    clean = sclera_force(world.scene, tool, cfg.port_index, world.task, timestamp=t)
    # Pre-noise port load in N for the eye dynamics; the reading components
    # are the same lateral spring force expressed on the body axes in mN.
    load = (clean.fsx * st.pose.rotation[:, 0] + clean.fsy * st.pose.rotation[:, 1]) * 1e-3
    reading = add_sensor_noise(clean, world.rng, world.noise_force_mn, world.noise_depth_mm)
    _require_finite([reading.fsx, reading.fsy, reading.tip_force], "sense", side)

    afc_x = switching_policy(cfg.gains, st.afc_x, reading.fsx, t)
    afc_y = switching_policy(cfg.gains, st.afc_y, reading.fsy, t)
    vx_a = vy_a = 0.0
    if afc_x.delta == 1:
        vx_a, afc_x = afc_axis_velocity(cfg.gains, afc_x, reading.fsx, t, dt)
    if afc_y.delta == 1:
        vy_a, afc_y = afc_axis_velocity(cfg.gains, afc_y, reading.fsy, t, dt)
    _require_finite([vx_a, vy_a, afc_x.alpha, afc_y.alpha], "adaptive-control", side)

    command = rin.command if rin.clutch else np.zeros(6)
    if world.mode == "BMAT":
        x_o_b = map_master_to_body(cfg.master_map, BodyVelocity.from_vector(command))
    else:
        x_o_b = admittance_command(command, cfg.admittance)
    x_o_b = pedal_scale(x_o_b, rin.pedal)
    guard = master_safety_scale(cfg.gains, reading.norm)
    if guard < 1.0:
        x_o_b = BodyVelocity(guard * x_o_b.linear, guard * x_o_b.angular)
    v_des = hybrid_command(afc_x, afc_y, cfg.scaling, x_o_b, (vx_a, vy_a))
    _require_finite(v_des.as_vector(), "hybrid-command", side)

    J = body_jacobian(cfg.model, st.joints.theta)
    theta_dot_des = solve_joint_velocities(
        J,
        v_des,
        cfg.model.joint_limits,
        st.joints.theta,
        dt,
        damping=cfg.optimizer_damping,
        weights=cfg.optimizer_weights,
    )
    _require_finite(theta_dot_des, "velocity-optimizer", side)

    plant, theta_dot = track_joint_velocity(st.plant, theta_dot_des, dt)
    _require_finite(theta_dot, "velocity-plant", side)

    # Position limits are hard stops: the optimizer bounds the command, but
    # the servo lag can carry residual velocity into the limit, so clip at
    # integration time and absorb the blocked velocity in the plant state.
    limits = cfg.model.joint_limits
    theta_raw = st.joints.theta + theta_dot * dt
    theta = np.clip(theta_raw, limits.pos_min, limits.pos_max)
    stopped = theta != theta_raw
    if np.any(stopped):
        theta_dot = theta_dot.copy()
        theta_dot[stopped] = (theta[stopped] - st.joints.theta[stopped]) / dt
        plant = VelocityPlant(plant.time_constant, plant.rate_limit, theta_dot.copy())
    _require_finite(theta, "integrate", side)
    pose = forward_kinematics(cfg.model, theta)
    _require_finite(pose.translation, "forward-kinematics", side)

    vel_body = J @ theta_dot  # actual end-effector twist at the pre-step pose
    vel_spatial = adjoint(st.pose) @ vel_body

    record = {
        "theta": theta.copy(),
        "theta_dot": theta_dot.copy(),
        "vel_spatial": vel_spatial,
        "vel_des_body": v_des.as_vector(),
        "input": rin.command.copy(),
        "fsx": reading.fsx,
        "fsy": reading.fsy,
        "fs": reading.norm,
        "ft": reading.tip_force,
        "depth": reading.insertion_depth,
        "delta_x": afc_x.delta,
        "delta_y": afc_y.delta,
        "pedal": rin.pedal,
        "clutch": rin.clutch,
    }
    state = RobotState(
        joints=JointState(theta=theta, theta_dot=theta_dot),
        plant=plant,
        afc_x=afc_x,
        afc_y=afc_y,
        pose=pose,
    )
    return state, record, load


def _update_task(world: World, t: float) -> tuple[TaskProgress, list[str]]:
    """Pin touches and completion on the dominant tip; events on rising edges."""
    prog = world.progress
    events: list[str] = []
    dominant = next(s for s in SIDES if world.configs[s].role == "dominant")
    cfg = world.configs[dominant]
    tool = ToolState(pose=world.states[dominant].pose, shaft_length=cfg.shaft_length)
    pin = check_pin_touch(world.scene, tool, world.task)

    touch_order = list(prog.touch_order)
    all_touched = prog.all_touched
    completed = prog.completed
    completion_time = prog.completion_time
    if pin is not None and pin != prog.touching:
        events.append(f"pin:{world.task.colors[pin]}")
        if pin not in touch_order:
            touch_order.append(pin)
            events.append(f"vessel:{world.task.colors[pin]}")
            if len(touch_order) == len(world.task.colors):
                all_touched = True
    if all_touched and not completed:
        start = world.task.start_world(world.scene)
        if float(np.linalg.norm(tool.tip - start)) <= world.task.capture_radius:
            completed = True
            completion_time = t
            events.append("complete")
    return (
        TaskProgress(
            touch_order=touch_order,
            touching=pin,
            all_touched=all_touched,
            completed=completed,
            completion_time=completion_time,
        ),
        events,
    )


def step(world: World, inputs: InputSample, dt: float | None = None) -> tuple[World, TickRecord]:
    """Advance the world by one tick and emit its record.

    dt, when given, must match the world's fixed step; it exists so callers
    can assert the contract rather than silently resample.
    """
    if dt is not None and dt != world.dt:
        raise ValueError("dt must equal the world's fixed step")
    t = world.clock
    records: dict[str, dict] = {}
    loads: dict[int, np.ndarray] = {}
    new_states: dict[str, RobotState] = {}
    for side in SIDES:
        rin = inputs.right if side == "right" else inputs.left
        state, record, load = _step_robot(world, side, rin, t)
        new_states[side] = state
        records[side] = record
        loads[world.configs[side].port_index] = load

    scene = step_eye_dynamics(world.scene, [loads[0], loads[1]], world.dt)

    world = replace(
        world, states=new_states, scene=scene, tick_index=world.tick_index + 1
    )
    progress, events = _update_task(world, t)
    world = replace(world, progress=progress)
    return world, TickRecord(t=t, robots=records, events=tuple(events))


class TraceInputSource:
    """Zero-order-hold playback of a parsed input trace."""

    def __init__(self, samples: list[InputSample]):
        self.samples = samples
        self._idx = 0

    @property
    def empty(self) -> bool:
        return not self.samples

    def end_time(self) -> float:
        return self.samples[-1].t if self.samples else 0.0

    def at(self, t: float) -> InputSample:
        """Latest sample with timestamp <= t, held until the next one."""
        while self._idx + 1 < len(self.samples) and self.samples[self._idx + 1].t <= t:
            self._idx += 1
        s = self.samples[self._idx]
        if t < s.t:  # before the first sample: robots idle
            return InputSample(t=t, right=RobotInput.idle(), left=RobotInput.idle())
        return s


def run_trial(world: World, source: TraceInputSource, max_duration: float) -> TrialLog:
    """Run until task completion, trace exhaustion, or the duration cap."""
    records: list[TickRecord] = []
    if source.empty:
        reason = "empty-trace"
    else:
        end_t = source.end_time()
        while True:
            t = world.clock
            if world.progress.completed:
                reason = "completed"
                break
            if t > max_duration:
                reason = "timeout"
                break
            if t > end_t:
                reason = "trace-exhausted"
                break
            world, rec = step(world, source.at(t))
            records.append(rec)
    meta = {
        "mode": world.mode,
        "seed": world.seed,
        "dt": world.dt,
        "dominant": next(s for s in SIDES if world.configs[s].role == "dominant"),
        "completion_reason": reason,
        "completion_time": world.progress.completion_time,
        "touch_order": [world.task.colors[i] for i in world.progress.touch_order],
        "ticks": len(records),
    }
    return TrialLog(records=records, meta=meta)
