"""Compliant eye-phantom world model and virtual force sensing.

The phantom is a sphere with two sclerotomy ports and a pinned vessel task
on its inner surface. Lateral tool-shaft deviation from a port loads a
linear spring whose force, resolved on the tool's body x/y axes, plays the
role of the real instrument's sclera-force measurement. Tip contact with
the inner surface or a task pin loads a second spring. The eye itself
reorients as a first-order viscoelastic rotation about its fixed center
under the combined port loads.

Force readings are reported in mN and insertion depth in mm; all geometry
is in meters. Sign convention: readings are the lateral force the tool
applies to the sclera, so a positive reading shrinks when the tool moves
along the negative body axis (which is what the adaptive controller does).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .kinematics import RigidTransform, cross3, rotation_exp, rotation_log


@dataclass
class EyePhantom:
    """Spherical eye phantom with sclerotomy ports and viscoelastic rotation."""

    center: np.ndarray  # m, never moves
    radius: float  # m, sclera sphere
    retina_radius: float  # m, inner contact sphere
    orientation: np.ndarray  # 3x3 eye-fixed frame in world
    home_orientation: np.ndarray  # restoring-torque reference
    ports: np.ndarray  # (2, 3) unit directions, eye frame
    rot_stiffness: float  # N*m/rad
    rot_damping: float  # N*m*s/rad
    sclera_stiffness: float  # N/m
    retina_stiffness: float  # N/m
    guard_radius: float = 0.005  # m, lateral engagement window
    dynamic: bool = True

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=float)
        self.orientation = np.asarray(self.orientation, dtype=float)
        self.home_orientation = np.asarray(self.home_orientation, dtype=float)
        self.ports = np.asarray(self.ports, dtype=float)
        if self.radius <= 0 or self.retina_radius <= 0:
            raise ValueError("eye radii must be positive")
        if self.retina_radius > self.radius:
            raise ValueError("retina surface cannot lie outside the sclera")
        for s in (self.sclera_stiffness, self.retina_stiffness, self.rot_stiffness):
            if s < 0:
                raise ValueError("stiffnesses must be non-negative")
        if self.rot_damping <= 0:
            raise ValueError("rotational damping must be positive")
        if self.ports.shape != (2, 3):
            raise ValueError("exactly two sclerotomy ports are required")
        norms = np.linalg.norm(self.ports, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("port directions must be unit vectors")

    def port_world(self, index: int) -> np.ndarray:
        return self.center + self.orientation @ (self.radius * self.ports[index])


@dataclass
class ToolState:
    """Tool body frame plus shaft geometry; the shaft is the body z-axis."""

    pose: RigidTransform
    shaft_length: float

    @property
    def shaft_dir(self) -> np.ndarray:
        return self.pose.rotation[:, 2]

    @property
    def tip(self) -> np.ndarray:
        return self.pose.translation + self.shaft_length * self.shaft_dir


@dataclass
class ScleraForceReading:
    """Virtual sensor output: lateral port forces in the tool body frame."""

    fsx: float  # mN, body x
    fsy: float  # mN, body y
    norm: float  # mN
    tip_force: float  # mN
    insertion_depth: float  # mm
    timestamp: float  # s
    disengaged: bool = False

    @staticmethod
    def from_components(
        fsx: float,
        fsy: float,
        tip_force: float,
        insertion_depth: float,
        timestamp: float,
        disengaged: bool = False,
    ) -> "ScleraForceReading":
        return ScleraForceReading(
            fsx=fsx,
            fsy=fsy,
            norm=float(np.hypot(fsx, fsy)),
            tip_force=tip_force,
            insertion_depth=insertion_depth,
            timestamp=timestamp,
            disengaged=disengaged,
        )


@dataclass
class TaskLayout:
    """Vessel-following task: four colored vessels, one target pin each, and
    the common start/return point, all on the inner sphere (eye frame)."""

    colors: tuple[str, ...]
    pins: np.ndarray  # (4, 3) unit directions, eye frame
    start: np.ndarray  # unit direction, eye frame
    capture_radius: float = 0.0005  # m

    def __post_init__(self) -> None:
        self.pins = np.asarray(self.pins, dtype=float)
        self.start = np.asarray(self.start, dtype=float)
        if len(self.colors) != self.pins.shape[0]:
            raise ValueError("one pin per vessel color is required")
        if self.capture_radius <= 0:
            raise ValueError("capture radius must be positive")

    def pin_world(self, scene: EyePhantom, index: int) -> np.ndarray:
        return scene.center + scene.orientation @ (scene.retina_radius * self.pins[index])

    def start_world(self, scene: EyePhantom) -> np.ndarray:
        return scene.center + scene.orientation @ (scene.retina_radius * self.start)


def _port_geometry(
    scene: EyePhantom, tool: ToolState, port_index: int
) -> tuple[np.ndarray, float, bool]:
    """One-pass (shaft deviation [m], insertion depth [mm], engaged) triple."""
    pw = scene.port_world(port_index)
    p = tool.pose.translation
    d = tool.pose.rotation[:, 2]
    rel = pw - p
    closest = p + float(rel @ d) * d
    dev = closest - pw
    depth_mm = (tool.shaft_length - float(rel @ d)) * 1e3
    engaged = depth_mm > 0.0 and float(dev @ dev) < scene.guard_radius**2
    return dev, depth_mm, engaged


def shaft_deviation(scene: EyePhantom, tool: ToolState, port_index: int) -> np.ndarray:
    """Lateral displacement of the shaft line relative to the port (world, m);
    perpendicular to the shaft by construction."""
    return _port_geometry(scene, tool, port_index)[0]


def insertion_depth(scene: EyePhantom, tool: ToolState, port_index: int) -> float:
    """Signed distance from the port to the tip along the shaft, in mm."""
    return _port_geometry(scene, tool, port_index)[1]


def is_engaged(scene: EyePhantom, tool: ToolState, port_index: int) -> bool:
    """Tool counts as inserted when the tip is past the port and the shaft
    stays within the lateral guard window around it."""
    return _port_geometry(scene, tool, port_index)[2]


def sclera_load_world(scene: EyePhantom, tool: ToolState, port_index: int) -> np.ndarray:
    """Force the tool applies to the eye at the port (world frame, N)."""
    dev, _, engaged = _port_geometry(scene, tool, port_index)
    if not engaged:
        return np.zeros(3)
    return scene.sclera_stiffness * dev


def tip_contact_force(
    scene: EyePhantom,
    tool: ToolState,
    task: TaskLayout | None = None,
    engaged: bool = True,
) -> float:
    """Tip force in mN: retina-stiffness times the deepest penetration of the
    inner sphere or of any pin capture sphere; zero while clear of both."""
    if not engaged:
        return 0.0
    tip = tool.tip
    penetration = max(0.0, float(np.linalg.norm(tip - scene.center)) - scene.retina_radius)
    if task is not None:
        for j in range(task.pins.shape[0]):
            d = float(np.linalg.norm(tip - task.pin_world(scene, j)))
            penetration = max(penetration, task.capture_radius - d)
    return 1e3 * scene.retina_stiffness * max(0.0, penetration)


def sclera_force(
    scene: EyePhantom,
    tool: ToolState,
    port_index: int,
    task: TaskLayout | None = None,
    timestamp: float = 0.0,
) -> ScleraForceReading:
    """Full virtual sensor reading for one tool: lateral port forces resolved
    on the body x/y axes (mN), tip force, and insertion depth."""
    dev, depth, engaged = _port_geometry(scene, tool, port_index)
    if not engaged:
        return ScleraForceReading.from_components(0.0, 0.0, 0.0, depth, timestamp, True)
    load = scene.sclera_stiffness * dev
    fsx = 1e3 * float(load @ tool.pose.rotation[:, 0])
    fsy = 1e3 * float(load @ tool.pose.rotation[:, 1])
    tip_f = tip_contact_force(scene, tool, task, engaged=True)
    return ScleraForceReading.from_components(fsx, fsy, tip_f, depth, timestamp)


def add_sensor_noise(
    reading: ScleraForceReading,
    rng: np.random.Generator,
    force_sigma_mn: float = 2.0,
    depth_sigma_mm: float = 0.05,
) -> ScleraForceReading:
    """Zero-mean Gaussian noise on every channel; the norm is recomputed from
    the noisy components. Always draws the same number of variates so the
    stream stays aligned across ticks."""
    nx, ny, nt, nd = rng.normal(size=4)
    return ScleraForceReading.from_components(
        reading.fsx + force_sigma_mn * nx,
        reading.fsy + force_sigma_mn * ny,
        reading.tip_force + force_sigma_mn * nt,
        reading.insertion_depth + depth_sigma_mm * nd,
        reading.timestamp,
        reading.disengaged,
    )


def step_eye_dynamics(
    scene: EyePhantom, port_forces: list[np.ndarray], dt: float
) -> EyePhantom:
    """First-order viscoelastic reorientation about the fixed center.

    The net torque of the port loads fights a rotational spring anchored at
    the home orientation; damping turns the balance into an angular velocity
    integrated with the exponential map. The rotation is re-projected onto
    SO(3) each step so long trials cannot drift off the group.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not scene.dynamic:
        return scene
    torque = np.zeros(3)
    for i, f in enumerate(port_forces):
        torque += cross3(scene.port_world(i) - scene.center, np.asarray(f, dtype=float))
    deviation = rotation_log(scene.orientation @ scene.home_orientation.T)
    omega = (torque - scene.rot_stiffness * deviation) / scene.rot_damping
    rotated = rotation_exp(omega * dt) @ scene.orientation
    u, _, vt = np.linalg.svd(rotated)
    projected = u @ vt
    if np.linalg.det(projected) < 0:
        u[:, -1] = -u[:, -1]
        projected = u @ vt
    return replace(scene, orientation=projected)


def check_pin_touch(scene: EyePhantom, tool: ToolState, task: TaskLayout) -> int | None:
    """Index of the touched pin, or None. At most one pin per call: nearest
    within the capture radius wins, ties break to the lowest index."""
    tip = tool.tip
    best: int | None = None
    best_d = np.inf
    for j in range(task.pins.shape[0]):
        d = float(np.linalg.norm(tip - task.pin_world(scene, j)))
        if d <= task.capture_radius and d < best_d:  # strict: ties keep lowest index
            best, best_d = j, d
    return best


def default_task() -> TaskLayout:
    """Four vessels fanning out from the posterior pole, 30 degrees off axis."""
    s, c = np.sin(np.deg2rad(30.0)), np.cos(np.deg2rad(30.0))
    dirs = []
    for phi_deg in (45.0, 135.0, 225.0, 315.0):
        phi = np.deg2rad(phi_deg)
        dirs.append([s * np.cos(phi), s * np.sin(phi), -c])
    return TaskLayout(
        colors=("red", "green", "blue", "yellow"),
        pins=np.array(dirs),
        start=np.array([0.0, 0.0, -1.0]),
    )


def default_eye(center: np.ndarray | None = None) -> EyePhantom:
    """24 mm phantom with two superior ports 74 degrees apart."""
    ports = np.array([[0.6, 0.0, 0.8], [-0.6, 0.0, 0.8]])
    return EyePhantom(
        center=np.zeros(3) if center is None else center,
        radius=0.012,
        retina_radius=0.0115,
        orientation=np.eye(3),
        home_orientation=np.eye(3),
        ports=ports,
        rot_stiffness=0.02,
        rot_damping=0.05,
        sclera_stiffness=100.0,
        retina_stiffness=500.0,
    )
