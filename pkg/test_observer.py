import math

import pytest

from epbabs.actuator import CaliperParams, DrivetrainParams, EpbActuator, MotorParams, ScrewParams
from epbabs.exceptions import ConfigurationError
from epbabs.observer import (LoadTorqueObserver, ObserverGains, ObserverState, saturation, smo_step,
                             torque_error_decay_rate)

GAINS = ObserverGains()


@pytest.fixture(scope='module')
def act():
    return EpbActuator(MotorParams(), DrivetrainParams(), ScrewParams(), CaliperParams())


def test_saturation():
    assert saturation(0.0, 10.0) == 0.0
    assert saturation(5.0, 10.0) == 0.5
    assert saturation(-25.0, 10.0) == -1.0
    assert saturation(1e9, 10.0) == 1.0


def test_feedback_gain_from_time_constant(act):
    assert GAINS.feedback_gain(act.j_n) == pytest.approx(-act.j_n / 0.005)
    assert ObserverGains(g=-1e-3).feedback_gain(act.j_n) == -1e-3


@pytest.mark.parametrize('kwargs', [{'k': 1.0}, {'g': 0.5}, {'phi': 0.0}, {'substeps': 0},
                                    {'anchor_samples': 0}, {'anchor_time_constant': 1e-4}])
def test_invalid_gains_rejected(kwargs):
    with pytest.raises(ConfigurationError):
        ObserverGains(**kwargs).validate()


def test_torque_error_decays_at_design_rate(act):
    rate = torque_error_decay_rate(GAINS, act.j_n, act.c_n, MotorParams().k_t)
    design = abs(GAINS.feedback_gain(act.j_n)) / act.j_n
    assert design == pytest.approx(200.0)
    assert rate == pytest.approx(design, rel=0.10)


def test_decay_window_without_samples_rejected(act):
    with pytest.raises(ConfigurationError):
        torque_error_decay_rate(GAINS, act.j_n, act.c_n, MotorParams().k_t, window=(0.0105, 0.0108))


def test_load_torque_converges(act):
    k_t = MotorParams().k_t
    load, omega = 0.2, 100.0
    i_a = (load + act.c_n * omega) / k_t
    state = ObserverState(omega_hat=omega)
    for _ in range(50):
        state = smo_step(GAINS, state, omega, i_a, act.j_n, act.c_n, k_t)
    assert state.t_hat == pytest.approx(load, rel=0.05)
    assert state.omega_hat == pytest.approx(omega, abs=1.0)


def test_non_finite_measurement_freezes(act):
    state = ObserverState(omega_hat=12.0, t_hat=0.1, omega_prev=12.0, i_prev=3.0)
    out = smo_step(GAINS, state, math.nan, 3.0, act.j_n, act.c_n, 0.011)
    assert out.frozen
    assert out.omega_hat == 12.0 and out.t_hat == 0.1


def make_observer(act):
    return LoadTorqueObserver(GAINS, act.j_n, act.c_n, MotorParams().k_t, act.tmap, act.geometry)


def drive(actuator, obs, duty, seconds, dt=5e-5):
    """Step a real actuator, feeding the observer once per control period."""
    sub = int(round(GAINS.t_ctrl / dt))
    t_epb_hat = obs.t_epb_hat
    for _ in range(int(round(seconds / GAINS.t_ctrl))):
        st = actuator.state
        _, t_epb_hat, _ = obs.update(st.omega_m, st.i_a)
        for _ in range(sub):
            actuator.step(duty, dt)
    return t_epb_hat


def test_brake_torque_tracks_apply_and_holds():
    actuator = EpbActuator(MotorParams(), DrivetrainParams(), ScrewParams(), CaliperParams())
    obs = make_observer(actuator)

    drive(actuator, obs, 0.5, 0.4)
    t_epb_hat = drive(actuator, obs, 0.0, 0.05)
    assert actuator.state.omega_m == 0.0
    assert actuator.state.t_epb > 400.0
    assert t_epb_hat == pytest.approx(actuator.state.t_epb, rel=0.05)

    # a stopped self-locked motor keeps the estimate exactly
    held = t_epb_hat
    assert drive(actuator, obs, 0.0, 0.02) == held


def test_release_rotation_does_not_anchor(act):
    obs = make_observer(act)
    for _ in range(30):
        obs.update(-100.0, -1.0)
    assert obs.bias == 0.0
    assert obs.forward_run == 0
    assert obs.angle < 0.0
    assert obs.t_epb_hat == 0.0


def test_anchor_waits_for_steady_forward_motion(act):
    obs = make_observer(act)
    obs.angle = 2.0 * act.caliper.s_mc / act.geometry.per_rad
    for _ in range(GAINS.anchor_samples - 1):
        obs.update(300.0, 5.0)
    assert obs.bias == 0.0
    assert obs.t_epb_hat > 0.0
    obs.update(300.0, 5.0)
    assert obs.forward_run == GAINS.anchor_samples
    assert obs.bias != 0.0


def test_frozen_update_keeps_estimate(act):
    obs = make_observer(act)
    obs.t_epb_hat = 321.0
    _, t_epb_hat, frozen = obs.update(math.inf, 1.0)
    assert frozen
    assert t_epb_hat == 321.0


def test_speed_error_reaches_layer_monotonically(act):
    k_t = MotorParams().k_t
    gains = ObserverGains(t_ctrl=1e-4, substeps=1)
    load = 0.2
    state = ObserverState()

    def motor_speed(t):
        return 100.0 + 20.0 * math.sin(2.0 * math.pi * 5.0 * t)

    def current(t):
        accel = 20.0 * 2.0 * math.pi * 5.0 * math.cos(2.0 * math.pi * 5.0 * t)
        return (load + act.c_n * motor_speed(t) + act.j_n * accel) / k_t

    errors = []
    for n in range(2000):
        t = n * gains.t_ctrl
        state = smo_step(gains, state, motor_speed(t), current(t), act.j_n, act.c_n, k_t)
        errors.append(state.omega_hat - motor_speed(t))

    outside = [(e0, e1) for e0, e1 in zip(errors[:-1], errors[1:]) if abs(e0) > gains.phi]
    assert outside
    shrinking = sum(1 for e0, e1 in outside if e0 * (e1 - e0) <= 0.0)
    assert shrinking / len(outside) >= 0.99
    assert abs(errors[-1]) <= gains.phi
