import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disco.dynamics import (SimParams, clip_control, make_env, make_pendulum, make_skidsteer,
                            pendulum_step, rollout, skidsteer_step, wrap_angle)
from disco.errors import InvalidInputError, StepError

finite = st.floats(-10, 10, allow_nan=False)


def unicycle_step(state, w_l, w_r, r_w, a_w, dt):
    """Plain differential-drive unicycle, coded independently of skidsteer_step."""
    x, y, phi = state
    v = r_w * (w_l + w_r) / 2
    omega = r_w * (w_r - w_l) / a_w
    new_phi = phi + omega * dt
    new_phi = (new_phi + np.pi) % (2 * np.pi) - np.pi
    if new_phi == -np.pi:
        new_phi = np.pi
    return np.array([x + v * np.cos(phi) * dt, y + v * np.sin(phi) * dt, new_phi])


class TestPendulum:
    def test_hanging_equilibrium(self):
        out = pendulum_step([np.pi, 0.0], 0.0, [1.0, 1.0])
        assert out[1] == pytest.approx(0.0, abs=1e-12)
        assert out[0] == pytest.approx(np.pi, abs=1e-12)

    def test_upright_equilibrium(self):
        np.testing.assert_array_equal(pendulum_step([0.0, 0.0], 0.0, [1.0, 1.0]), [0.0, 0.0])

    def test_horizontal_pole_semi_implicit(self):
        out = pendulum_step([np.pi / 2, 0.0], 0.0, [1.0, 1.0], dt=0.05)
        assert out[1] == pytest.approx(0.73575, abs=1e-12)
        # angle moves with the updated velocity
        assert out[0] == pytest.approx(np.pi / 2 + 0.05 * 0.73575, abs=1e-12)

    def test_torque_term(self):
        out = pendulum_step([0.0, 0.0], 2.0, [0.5, 2.0], dt=0.05)
        assert out[1] == pytest.approx(0.05 * 3 / (2.0 * 0.25) * 2.0)

    def test_velocity_clamp(self):
        out = pendulum_step([np.pi / 2, 7.9], 2.0, [0.1, 0.1])
        assert out[1] == 8.0

    def test_invalid_inputs(self):
        with pytest.raises(InvalidInputError):
            pendulum_step([np.nan, 0.0], 0.0, [1.0, 1.0])
        with pytest.raises(InvalidInputError):
            pendulum_step([0.0, 0.0], 0.0, [0.0, 1.0])

    def test_vectorised_matches_scalar(self):
        rng = np.random.default_rng(0)
        states = rng.normal(size=(6, 2))
        torques = rng.uniform(-2, 2, 6)
        params = rng.uniform(0.5, 2, (6, 2))
        batch = pendulum_step(states, torques, params)
        for i in range(6):
            np.testing.assert_array_equal(batch[i], pendulum_step(states[i], torques[i], params[i]))


class TestSkidSteer:
    def test_straight_line(self):
        out = skidsteer_step([0.0, 0.0, 0.3], [2.0, 2.0], [0.12, 0.06, 0.31], dt=0.1)
        assert out[0] == pytest.approx(0.06 * 2.0 * 0.1 * np.cos(0.3))
        assert out[1] == pytest.approx(0.06 * 2.0 * 0.1 * np.sin(0.3))
        assert out[2] == pytest.approx(0.3)

    def test_rotation_in_place(self):
        out = skidsteer_step([1.0, 2.0, 0.0], [-1.5, 1.5], [0.0, 0.06, 0.31])
        np.testing.assert_allclose(out[:2], [1.0, 2.0], atol=1e-15)
        assert out[2] > 0

    def test_hand_evaluated_step(self):
        out = skidsteer_step([0.0, 0.0, 0.0], [1.0, 2.0], [0.12, 0.06, 0.31], dt=0.1)
        # v = 0.09, omega = 0.06/0.31, v_y = 0.12 * omega
        np.testing.assert_allclose(out, [0.009, 0.12 * 0.06 / 0.31 * 0.1, 0.06 / 0.31 * 0.1], rtol=1e-12)
        np.testing.assert_allclose(out, [0.009, 0.0023226, 0.019355], atol=5e-7)

    def test_zero_icr_matches_unicycle(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            state = np.array([*rng.normal(size=2), rng.uniform(-np.pi, np.pi)])
            w_l, w_r = rng.uniform(-10, 10, 2)
            r_w, a_w = rng.uniform(0.01, 0.5), rng.uniform(0.1, 0.5)
            got = skidsteer_step(state, [w_l, w_r], [0.0, r_w, a_w], dt=0.1)
            np.testing.assert_allclose(got, unicycle_step(state, w_l, w_r, r_w, a_w, 0.1), atol=1e-12)

    @given(st.tuples(finite, finite, st.floats(-50, 50)), st.tuples(finite, finite),
           st.floats(-0.5, 0.5), st.floats(0.01, 0.5), st.floats(0.1, 0.5))
    @settings(max_examples=200, deadline=None)
    def test_heading_wrapped(self, state, wheels, x_icr, r_w, a_w):
        out = skidsteer_step(state, wheels, [x_icr, r_w, a_w])
        assert -np.pi < out[2] <= np.pi

    def test_invalid_inputs(self):
        with pytest.raises(InvalidInputError):
            skidsteer_step([0, 0, 0], [np.inf, 0], [0.1, 0.06, 0.3])
        with pytest.raises(InvalidInputError):
            skidsteer_step([0, 0, 0], [1, 1], [0.1, -0.06, 0.3])


def test_wrap_angle_interval():
    np.testing.assert_allclose(wrap_angle([np.pi, -np.pi, 3 * np.pi, 0.5]), [np.pi, np.pi, np.pi, 0.5])


@pytest.mark.parametrize("v, expected", [(3.0, 2.0), (-5.0, -2.0), (0.5, 0.5)])
def test_clip_control(v, expected):
    assert clip_control(v, [-2.0, 2.0]) == expected


def test_clip_control_per_dimension():
    np.testing.assert_array_equal(clip_control([3.0, -3.0], [[-1, 1], [-2, 2]]), [1.0, -2.0])
    with pytest.raises(InvalidInputError):
        clip_control(0.0, [1.0, -1.0])


class TestRollout:
    def test_empty_controls(self):
        env = make_pendulum()
        traj = rollout(env, [0.3, 0.1], np.zeros((0, 1)), [1.0, 1.0])
        np.testing.assert_array_equal(traj, [[0.3, 0.1]])

    def test_fixed_point(self):
        env = make_pendulum()
        traj = rollout(env, [np.pi, 0.0], np.zeros((20, 1)), env.params([1.0, 1.0]))
        assert traj.shape == (21, 2)
        np.testing.assert_allclose(traj, np.tile([np.pi, 0.0], (21, 1)), atol=1e-12)

    def test_deterministic(self):
        env = make_skidsteer()
        rng = np.random.default_rng(3)
        controls = rng.normal(size=(30, 2))
        a = rollout(env, [0.0, 0.0, 0.0], controls, [0.1, 0.06, 0.3])
        b = rollout(env, [0.0, 0.0, 0.0], controls, [0.1, 0.06, 0.3])
        assert a.tobytes() == b.tobytes()
        assert a.shape == (31, 3)

    def test_controls_clipped(self):
        env = make_pendulum()
        a = rollout(env, [0.0, 0.0], [[100.0]], [1.0, 1.0])
        b = rollout(env, [0.0, 0.0], [[2.0]], [1.0, 1.0])
        np.testing.assert_array_equal(a, b)

    def test_error_reports_step(self):
        env = make_pendulum()
        with pytest.raises(StepError) as info:
            rollout(env, [0.0, 0.0], [[0.0], [0.0], [np.nan]], [1.0, 1.0])
        assert info.value.step == 2


def test_sim_params_validation():
    env = make_env("skidsteer")
    p = env.params([0.1, 0.06, 0.3])
    assert len(p) == 3 and p.labels[1].startswith("wheel radius")
    with pytest.raises(InvalidInputError):
        env.params([0.1, 0.06])
    with pytest.raises(InvalidInputError):
        SimParams([np.nan])
    with pytest.raises(InvalidInputError):
        make_env("cartpole")
