import numpy as np
import pytest
from scipy.linalg import expm

from eyesim.kinematics import (
    BodyVelocity,
    InvalidAxisError,
    JointAxis,
    JointLimits,
    RigidTransform,
    RobotModel,
    Twist,
    adjoint,
    body_jacobian,
    default_robot_model,
    end_effector_velocity,
    exp_twist,
    forward_kinematics,
    make_twist,
    rotation_exp,
    rotation_log,
    skew,
    unskew,
)


def random_theta(rng, model):
    lo, hi = model.joint_limits.pos_min, model.joint_limits.pos_max
    return lo + (hi - lo) * rng.random(5)


def dense_expm_fk(model, theta):
    """Independent oracle: compose dense 4x4 matrix exponentials of xi_i*th_i."""
    g = np.eye(4)
    for xi, th in zip(model.twists, theta):
        g = g @ expm(xi.hat() * th)
    return g @ model.home.as_matrix()


def fd_body_velocity(model, theta, theta_dot, h=1e-6):
    """Central-difference body twist extracted from g^-1 * dg/dt."""
    gp = forward_kinematics(model, theta + h * theta_dot).as_matrix()
    gm = forward_kinematics(model, theta - h * theta_dot).as_matrix()
    g = forward_kinematics(model, theta).as_matrix()
    vhat = np.linalg.inv(g) @ ((gp - gm) / (2.0 * h))
    return np.concatenate([vhat[:3, 3], unskew(vhat[:3, :3])])


def identity_home_model():
    """Same axes as the default model but home = identity, for hand checks."""
    m = default_robot_model()
    return RobotModel(axes=m.axes, home=RigidTransform.identity(), joint_limits=m.joint_limits)


class TestMakeTwist:
    def test_prismatic_x(self):
        tw = make_twist(JointAxis("prismatic", v=np.array([1.0, 0, 0])))
        assert np.array_equal(tw.linear, [1.0, 0, 0])
        assert np.array_equal(tw.angular, [0.0, 0, 0])

    def test_revolute_axis_through_origin(self):
        tw = make_twist(JointAxis("revolute", omega=np.array([0, 0, 1.0]), q=np.zeros(3)))
        assert np.array_equal(tw.linear, [0.0, 0, 0])
        assert np.array_equal(tw.angular, [0.0, 0, 1.0])

    def test_revolute_offset_axis(self):
        # -omega x q computed componentwise by hand: -(z_hat x x_hat) = -y_hat
        tw = make_twist(
            JointAxis("revolute", omega=np.array([0, 0, 1.0]), q=np.array([1.0, 0, 0]))
        )
        np.testing.assert_allclose(tw.linear, [0.0, -1.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(tw.angular, [0.0, 0.0, 1.0], atol=1e-15)

    def test_non_unit_direction_rejected(self):
        with pytest.raises(InvalidAxisError):
            JointAxis("prismatic", v=np.array([1.0, 1.0, 0]))
        with pytest.raises(InvalidAxisError):
            JointAxis("revolute", omega=np.array([0, 0, 2.0]), q=np.zeros(3))


class TestExpTwist:
    def test_pure_translation(self):
        tw = Twist(np.array([1.0, 0, 0]), np.zeros(3))
        g = exp_twist(tw, 0.02)
        np.testing.assert_allclose(g.rotation, np.eye(3), atol=1e-15)
        np.testing.assert_allclose(g.translation, [0.02, 0, 0], atol=1e-15)

    def test_zero_angle_is_identity(self):
        rng = np.random.default_rng(3)
        tw = Twist(rng.normal(size=3), rng.normal(size=3))
        g = exp_twist(tw, 0.0)
        np.testing.assert_allclose(g.as_matrix(), np.eye(4), atol=1e-15)

    def test_quarter_turn_about_z(self):
        tw = make_twist(JointAxis("revolute", omega=np.array([0, 0, 1.0]), q=np.zeros(3)))
        g = exp_twist(tw, np.pi / 2)
        oracle = expm(tw.hat() * (np.pi / 2))
        np.testing.assert_allclose(g.as_matrix(), oracle, atol=1e-13)
        np.testing.assert_allclose(g.rotation @ [1, 0, 0], [0, 1, 0], atol=1e-15)

    def test_matches_dense_expm_for_random_screws(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            w = rng.normal(size=3)
            w /= np.linalg.norm(w)
            tw = Twist(rng.normal(size=3) * 0.1, w)
            th = rng.uniform(-np.pi, np.pi)
            np.testing.assert_allclose(
                exp_twist(tw, th).as_matrix(), expm(tw.hat() * th), atol=1e-12
            )

    def test_small_angle_branch_continuous(self):
        tw = Twist(np.array([0.3, -0.1, 0.2]), np.array([0.0, 1.0, 0.0]))
        g_small = exp_twist(tw, 5e-10)  # Taylor branch
        g_ref = expm(tw.hat() * 5e-10)
        np.testing.assert_allclose(g_small.as_matrix(), g_ref, atol=1e-15)

    def test_revolute_axis_point_is_fixed(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            w = rng.normal(size=3)
            w /= np.linalg.norm(w)
            q = rng.normal(size=3)
            tw = make_twist(JointAxis("revolute", omega=w, q=q))
            th = rng.uniform(-np.pi, np.pi)
            np.testing.assert_allclose(exp_twist(tw, th).apply(q), q, atol=1e-12)


class TestForwardKinematics:
    def test_home_position(self):
        m = default_robot_model()
        g = forward_kinematics(m, np.zeros(5))
        np.testing.assert_allclose(g.as_matrix(), m.home.as_matrix(), atol=1e-15)

    def test_single_prismatic_joint(self):
        m = identity_home_model()
        g = forward_kinematics(m, np.array([0.03, 0, 0, 0, 0]))
        np.testing.assert_allclose(g.rotation, np.eye(3), atol=1e-15)
        np.testing.assert_allclose(g.translation, [0.03, 0, 0], atol=1e-15)

    def test_matches_dense_expm_composition(self):
        m = default_robot_model()
        rng = np.random.default_rng(42)
        for _ in range(100):
            th = random_theta(rng, m)
            np.testing.assert_allclose(
                forward_kinematics(m, th).as_matrix(), dense_expm_fk(m, th), atol=1e-12
            )

    def test_se3_invariants(self):
        m = default_robot_model()
        rng = np.random.default_rng(9)
        for _ in range(100):
            g = forward_kinematics(m, random_theta(rng, m))
            g.validate(tol=1e-10)


class TestAdjoint:
    def test_identity(self):
        np.testing.assert_allclose(adjoint(RigidTransform.identity()), np.eye(6), atol=1e-15)

    def test_pure_rotation_is_block_diagonal(self):
        R = rotation_exp(np.array([0.3, -0.2, 0.5]))
        ad = adjoint(RigidTransform(R, np.zeros(3)))
        np.testing.assert_allclose(ad[:3, :3], R, atol=1e-15)
        np.testing.assert_allclose(ad[3:, 3:], R, atol=1e-15)
        np.testing.assert_allclose(ad[:3, 3:], np.zeros((3, 3)), atol=1e-15)

    def test_inverse_composition(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            g = RigidTransform(rotation_exp(rng.normal(size=3)), rng.normal(size=3))
            np.testing.assert_allclose(adjoint(g) @ adjoint(g.inverse()), np.eye(6), atol=1e-10)

    def test_homomorphism(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            g1 = RigidTransform(rotation_exp(rng.normal(size=3)), rng.normal(size=3))
            g2 = RigidTransform(rotation_exp(rng.normal(size=3)), rng.normal(size=3))
            np.testing.assert_allclose(
                adjoint(g1.compose(g2)), adjoint(g1) @ adjoint(g2), atol=1e-10
            )


class TestBodyJacobian:
    def test_home_identity_columns_are_twists(self):
        m = identity_home_model()
        J = body_jacobian(m, np.zeros(5))
        for i, xi in enumerate(m.twists):
            np.testing.assert_allclose(J[:, i], xi.as_vector(), atol=1e-14)

    def test_finite_difference_agreement(self):
        m = default_robot_model()
        rng = np.random.default_rng(12)
        for _ in range(100):
            th = random_theta(rng, m)
            thd = rng.normal(size=5)
            n = np.linalg.norm(thd)
            if n > 1.0:
                thd /= n
            np.testing.assert_allclose(
                body_jacobian(m, th) @ thd, fd_body_velocity(m, th, thd), atol=1e-6
            )

    def test_prismatic_unit_screw_velocity(self):
        m = default_robot_model()
        rng = np.random.default_rng(13)
        th = random_theta(rng, m)
        v = fd_body_velocity(m, th, np.array([1.0, 0, 0, 0, 0]))
        assert abs(np.linalg.norm(v[:3]) - 1.0) < 1e-6
        assert np.linalg.norm(v[3:]) < 1e-9


class TestEndEffectorVelocity:
    def test_zero_joint_rates(self):
        m = default_robot_model()
        v = end_effector_velocity(m, np.zeros(5), np.zeros(5))
        assert np.all(v.linear == 0) and np.all(v.angular == 0)

    def test_linearity(self):
        m = default_robot_model()
        rng = np.random.default_rng(14)
        th = random_theta(rng, m)
        thd = rng.normal(size=5)
        v1 = end_effector_velocity(m, th, thd).as_vector()
        v2 = end_effector_velocity(m, th, 2.0 * thd).as_vector()
        np.testing.assert_allclose(v2, 2.0 * v1, rtol=0, atol=1e-15)

    def test_matches_finite_differences(self):
        m = default_robot_model()
        rng = np.random.default_rng(15)
        th = random_theta(rng, m)
        thd = rng.normal(size=5)
        thd /= max(1.0, np.linalg.norm(thd))
        np.testing.assert_allclose(
            end_effector_velocity(m, th, thd).as_vector(),
            fd_body_velocity(m, th, thd),
            atol=1e-6,
        )


class TestRotationHelpers:
    def test_exp_log_round_trip(self):
        rng = np.random.default_rng(16)
        for _ in range(50):
            w = rng.normal(size=3)
            if np.linalg.norm(w) > 3.0:
                w *= 3.0 / np.linalg.norm(w)
            np.testing.assert_allclose(rotation_log(rotation_exp(w)), w, atol=1e-9)

    def test_skew_unskew(self):
        v = np.array([0.1, -2.0, 3.5])
        np.testing.assert_allclose(unskew(skew(v)), v, atol=1e-15)
        np.testing.assert_allclose(skew(v) @ v, np.zeros(3), atol=1e-15)


class TestModelValidation:
    def test_requires_three_prismatic_then_two_revolute(self):
        m = default_robot_model()
        axes = [m.axes[3]] + m.axes[1:]  # revolute first
        with pytest.raises(ValueError):
            RobotModel(axes=axes, home=m.home, joint_limits=m.joint_limits)

    def test_limits_must_be_ordered(self):
        with pytest.raises(ValueError):
            JointLimits(pos_min=np.ones(5), pos_max=-np.ones(5), vel_max=np.ones(5))

    def test_body_velocity_vector_round_trip(self):
        v = BodyVelocity.from_vector(np.arange(6.0))
        np.testing.assert_array_equal(v.as_vector(), np.arange(6.0))
