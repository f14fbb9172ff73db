"""Screw-theoretic kinematics for a 5-DoF eye-surgery manipulator.

The robot is modeled as three prismatic joints (XYZ stage) followed by two
revolute joints (yaw, pitch); there is no roll axis. Forward kinematics is
the ordered product of joint screw exponentials times the home pose, and the
body Jacobian transports each joint screw into the moving tool frame.

Conventions: 6-vectors are stacked [linear; angular], SI units (m, rad, s).
All functions here are pure and allocate fresh arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_UNIT_TOL = 1e-12
_SMALL_ANGLE = 1e-9


class InvalidAxisError(ValueError):
    """Joint axis direction is not a unit vector or is inconsistent."""


def skew(v: np.ndarray) -> np.ndarray:
    """3x3 skew-symmetric matrix of a 3-vector (hat operator)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product of two 3-vectors without np.cross's dispatch overhead."""
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def unskew(m: np.ndarray) -> np.ndarray:
    """Inverse of skew(); antisymmetrizes first so near-skew inputs are fine."""
    a = 0.5 * (m - m.T)
    return np.array([a[2, 1], a[0, 2], a[1, 0]])


def rotation_exp(w: np.ndarray) -> np.ndarray:
    """Rodrigues rotation from a rotation vector (axis * angle)."""
    phi = float(np.linalg.norm(w))
    W = skew(w)
    if phi < _SMALL_ANGLE:
        return np.eye(3) + W + 0.5 * (W @ W)
    K = W / phi
    return np.eye(3) + np.sin(phi) * K + (1.0 - np.cos(phi)) * (K @ K)


def rotation_log(R: np.ndarray) -> np.ndarray:
    """Rotation vector of a rotation matrix (principal log)."""
    c = float(np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0))
    phi = float(np.arccos(c))
    if phi < _SMALL_ANGLE:
        return unskew(R)
    if np.pi - phi < 1e-6:
        # Near pi the skew part degenerates; recover the axis from R + I.
        A = R + np.eye(3)
        k = A[:, int(np.argmax(np.diag(A)))]
        k = k / np.linalg.norm(k)
        v = unskew(R)
        if np.dot(k, v) < 0.0:
            k = -k
        return phi * k
    return phi / np.sin(phi) * unskew(R)


@dataclass
class RigidTransform:
    """Element of SE(3): rotation matrix plus translation (meters)."""

    rotation: np.ndarray
    translation: np.ndarray

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt.copy(), -(rt @ self.translation))

    def apply(self, point: np.ndarray) -> np.ndarray:
        return self.rotation @ point + self.translation

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @staticmethod
    def from_matrix(m: np.ndarray) -> "RigidTransform":
        return RigidTransform(np.array(m[:3, :3], dtype=float), np.array(m[:3, 3], dtype=float))

    def validate(self, tol: float = 1e-10) -> None:
        """Raise if the rotation block is not a proper rotation within tol."""
        err = np.max(np.abs(self.rotation.T @ self.rotation - np.eye(3)))
        if err > tol:
            raise ValueError(f"rotation is not orthonormal (max error {err:.3e})")
        if abs(np.linalg.det(self.rotation) - 1.0) > tol:
            raise ValueError("rotation has det != +1")


@dataclass
class Twist:
    """Joint screw coordinates xi = [linear; angular]."""

    linear: np.ndarray
    angular: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])

    def hat(self) -> np.ndarray:
        """4x4 se(3) lift of the twist."""
        m = np.zeros((4, 4))
        m[:3, :3] = skew(self.angular)
        m[:3, 3] = self.linear
        return m


@dataclass
class BodyVelocity:
    """Body-frame twist of the end-effector: [linear m/s; angular rad/s]."""

    linear: np.ndarray
    angular: np.ndarray

    @staticmethod
    def zero() -> "BodyVelocity":
        return BodyVelocity(np.zeros(3), np.zeros(3))

    @staticmethod
    def from_vector(v: np.ndarray) -> "BodyVelocity":
        v = np.asarray(v, dtype=float)
        return BodyVelocity(v[:3].copy(), v[3:].copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])


@dataclass
class JointAxis:
    """One joint screw axis, expressed in the base frame at home position.

    Prismatic joints carry a unit direction v; revolute joints carry a unit
    rotation axis omega plus a point q on that axis.
    """

    kind: str  # "prismatic" | "revolute"
    v: np.ndarray | None = None
    omega: np.ndarray | None = None
    q: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind == "prismatic":
            if self.v is None or self.omega is not None or self.q is not None:
                raise InvalidAxisError("prismatic axis takes v only")
            self.v = np.asarray(self.v, dtype=float)
            if abs(np.linalg.norm(self.v) - 1.0) > _UNIT_TOL:
                raise InvalidAxisError("prismatic direction must be unit norm")
        elif self.kind == "revolute":
            if self.omega is None or self.q is None or self.v is not None:
                raise InvalidAxisError("revolute axis takes omega and q")
            self.omega = np.asarray(self.omega, dtype=float)
            self.q = np.asarray(self.q, dtype=float)
            if abs(np.linalg.norm(self.omega) - 1.0) > _UNIT_TOL:
                raise InvalidAxisError("revolute axis must be unit norm")
        else:
            raise InvalidAxisError(f"unknown joint kind {self.kind!r}")


@dataclass
class JointLimits:
    """Per-joint position range and absolute velocity bound."""

    pos_min: np.ndarray
    pos_max: np.ndarray
    vel_max: np.ndarray

    def __post_init__(self) -> None:
        self.pos_min = np.asarray(self.pos_min, dtype=float)
        self.pos_max = np.asarray(self.pos_max, dtype=float)
        self.vel_max = np.asarray(self.vel_max, dtype=float)
        if not np.all(self.pos_min < self.pos_max):
            raise ValueError("pos_min must be componentwise below pos_max")
        if not np.all(self.vel_max > 0):
            raise ValueError("vel_max must be positive")

    def contains(self, theta: np.ndarray, slack: float = 0.0) -> bool:
        return bool(
            np.all(theta >= self.pos_min - slack) and np.all(theta <= self.pos_max + slack)
        )


@dataclass
class RobotModel:
    """5-DoF chain: three prismatic axes then yaw and pitch, plus home pose."""

    axes: list[JointAxis]
    home: RigidTransform
    joint_limits: JointLimits
    _twists: list[Twist] = field(default=None, repr=False)  # type: ignore[assignment]
    _screws: list[tuple] = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if len(self.axes) != 5:
            raise ValueError("robot model requires exactly 5 joint axes")
        kinds = [a.kind for a in self.axes]
        if kinds != ["prismatic"] * 3 + ["revolute"] * 2:
            raise ValueError("axes must be 3 prismatic then 2 revolute")
        self.home.validate()
        self._twists = [make_twist(a) for a in self.axes]
        # Per-joint precomputation for the tick-rate hot path: skew powers and
        # their action on the linear part (all unit-omega screws).
        screws = []
        for tw in self._twists:
            if np.all(tw.angular == 0.0):
                screws.append(("p", tw.linear))
            else:
                K = skew(tw.angular)
                K2 = K @ K
                screws.append(("r", tw.linear, tw.angular, K, K2, K @ tw.linear, K2 @ tw.linear))
        self._screws = screws

    @property
    def twists(self) -> list[Twist]:
        return self._twists


@dataclass
class JointState:
    """Joint positions (m, rad) and velocities (m/s, rad/s)."""

    theta: np.ndarray
    theta_dot: np.ndarray

    def __post_init__(self) -> None:
        self.theta = np.asarray(self.theta, dtype=float)
        self.theta_dot = np.asarray(self.theta_dot, dtype=float)
        if self.theta.shape != (5,) or self.theta_dot.shape != (5,):
            raise ValueError("joint state vectors must have length 5")


def make_twist(axis: JointAxis) -> Twist:
    """Joint screw from an axis: (v, 0) prismatic, (-omega x q, omega) revolute."""
    if axis.kind == "prismatic":
        return Twist(axis.v.copy(), np.zeros(3))
    return Twist(-np.cross(axis.omega, axis.q), axis.omega.copy())


def exp_twist(xi: Twist, theta: float) -> RigidTransform:
    """Closed-form screw-motion exponential of xi * theta.

    Pure translation when the angular part is zero; otherwise Rodrigues
    rotation with the standard translation integral. A second-order Taylor
    branch covers |rotation| < 1e-9 without loss of precision.
    """
    u = xi.linear * theta
    w = xi.angular * theta
    phi = float(np.linalg.norm(w))
    W = skew(w)
    if phi < _SMALL_ANGLE:
        R = np.eye(3) + W + 0.5 * (W @ W)
        V = np.eye(3) + 0.5 * W + (W @ W) / 6.0
    else:
        K = W / phi
        R = np.eye(3) + np.sin(phi) * K + (1.0 - np.cos(phi)) * (K @ K)
        V = (
            np.eye(3)
            + (1.0 - np.cos(phi)) / phi**2 * W
            + (phi - np.sin(phi)) / phi**3 * (W @ W)
        )
    return RigidTransform(R, V @ u)


def _screw_transform(screw: tuple, th: float) -> tuple[np.ndarray | None, np.ndarray]:
    """(R, p) of one joint exponential from the model's precomputed screw data;
    R is None for pure translations (identity)."""
    if screw[0] == "p":
        return None, screw[1] * th
    _, v, _, K, K2, Kv, K2v = screw
    s, c = np.sin(th), np.cos(th)
    R = np.eye(3) + s * K + (1.0 - c) * K2
    p = th * v + (1.0 - c) * Kv + (th - s) * K2v
    return R, p


def forward_kinematics(model: RobotModel, theta: np.ndarray) -> RigidTransform:
    """Pose of the tool body frame: product of screw exponentials times home."""
    R_acc: np.ndarray | None = None
    p_acc = np.zeros(3)
    for screw, th in zip(model._screws, theta):
        R_j, p_j = _screw_transform(screw, float(th))
        p_acc = p_acc + (p_j if R_acc is None else R_acc @ p_j)
        if R_j is not None:
            R_acc = R_j if R_acc is None else R_acc @ R_j
    home = model.home
    if R_acc is None:
        return RigidTransform(home.rotation.copy(), home.translation + p_acc)
    return RigidTransform(R_acc @ home.rotation, R_acc @ home.translation + p_acc)


def adjoint(g: RigidTransform) -> np.ndarray:
    """6x6 adjoint [[R, skew(p) R], [0, R]] transporting twists between frames."""
    ad = np.zeros((6, 6))
    ad[:3, :3] = g.rotation
    ad[:3, 3:] = skew(g.translation) @ g.rotation
    ad[3:, 3:] = g.rotation
    return ad


def body_jacobian(model: RobotModel, theta: np.ndarray) -> np.ndarray:
    """6x5 body Jacobian: column i is the i-th joint screw transported by the
    inverse adjoint of the suffix product exp(xi_i th_i)...exp(xi_5 th_5) * home."""
    J = np.zeros((6, 5))
    R_t = model.home.rotation
    p_t = model.home.translation
    for i in range(4, -1, -1):
        R_j, p_j = _screw_transform(model._screws[i], float(theta[i]))
        if R_j is None:
            p_t = p_t + p_j
        else:
            p_t = R_j @ p_t + p_j
            R_t = R_j @ R_t
        # Ad of the inverse tail applied to the joint screw, expanded blockwise.
        tw = model.twists[i]
        w_b = R_t.T @ tw.angular
        J[:3, i] = R_t.T @ tw.linear - cross3(R_t.T @ p_t, w_b)
        J[3:, i] = w_b
    return J


def end_effector_velocity(
    model: RobotModel, theta: np.ndarray, theta_dot: np.ndarray
) -> BodyVelocity:
    """Body-frame end-effector twist J(theta) @ theta_dot."""
    return BodyVelocity.from_vector(body_jacobian(model, theta) @ np.asarray(theta_dot, dtype=float))


def spatial_velocity(g: RigidTransform, body_vel: BodyVelocity) -> np.ndarray:
    """Transport a body twist to the base frame via the adjoint of the pose."""
    return adjoint(g) @ body_vel.as_vector()


def default_robot_model() -> RobotModel:
    """Stage axes along XYZ, yaw about z through (0,0,0.1), pitch about y
    through (0,0,0.15), home 0.2 m above the base origin.

    Workspace bounds are +/-5 cm, +/-30 deg, with 5 cm/s and 0.5 rad/s
    velocity caps; scenario files may override all of it.
    """
    axes = [
        JointAxis("prismatic", v=np.array([1.0, 0.0, 0.0])),
        JointAxis("prismatic", v=np.array([0.0, 1.0, 0.0])),
        JointAxis("prismatic", v=np.array([0.0, 0.0, 1.0])),
        JointAxis("revolute", omega=np.array([0.0, 0.0, 1.0]), q=np.array([0.0, 0.0, 0.1])),
        JointAxis("revolute", omega=np.array([0.0, 1.0, 0.0]), q=np.array([0.0, 0.0, 0.15])),
    ]
    rot = np.deg2rad(30.0)
    limits = JointLimits(
        pos_min=np.array([-0.05, -0.05, -0.05, -rot, -rot]),
        pos_max=np.array([0.05, 0.05, 0.05, rot, rot]),
        vel_max=np.array([0.05, 0.05, 0.05, 0.5, 0.5]),
    )
    home = RigidTransform(np.eye(3), np.array([0.0, 0.0, 0.2]))
    return RobotModel(axes=axes, home=home, joint_limits=limits)
