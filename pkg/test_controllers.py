import pytest

from epbabs.actuator import CaliperParams, DrivetrainParams, EpbActuator, MotorParams, ScrewParams
from epbabs.controllers import (LowerConstants, LowerGains, Mode, PidGains, PidState, SurfaceState, UpperGains,
                                lower_smc, pid_baseline, supervisor, upper_smc)
from epbabs.exceptions import ConfigurationError

J_R, R_R, M = 1.7, 0.327, 2100.0
T_MAX = 1200.0
DT = 1e-3


@pytest.fixture(scope='module')
def consts():
    act = EpbActuator(MotorParams(), DrivetrainParams(), ScrewParams(), CaliperParams())
    j_b, c_b = act.inertia_damping(-1)
    return LowerConstants.build(MotorParams(), (act.j_n, j_b), (act.c_n, c_b), act.geometry.torque_per_rad, act.tmap)


@pytest.mark.parametrize('v_x, mode', [(17.0, Mode.ACTIVE), (1.0, Mode.ACTIVE), (0.5, Mode.QUIT),
                                       (0.1, Mode.QUIT), (0.05, Mode.STOP), (0.0, Mode.STOP)])
def test_supervisor(v_x, mode):
    assert supervisor(v_x) == mode


def test_upper_smc_clamps_negative_command_and_freezes_integral():
    gains = UpperGains(c_slip=0.0)
    torque, state, clamped = upper_smc(0.22, 0.17, 0.0, 10.0, 0.0, 0.0, J_R, R_R, M, gains,
                                       SurfaceState(), T_MAX, DT)
    # raw command (J v / R)(-eps1 s - eps2) is about -208 N·m
    assert torque == 0.0
    assert clamped
    assert state.integral == 0.0
    assert state.s == pytest.approx(0.05)


def test_upper_smc_equivalent_control_on_surface():
    gains = UpperGains()
    f_xr, sum_fx, v_x = 3000.0, 6000.0, 10.0
    torque, state, clamped = upper_smc(0.17, 0.17, 0.0, v_x, f_xr, sum_fx, J_R, R_R, M, gains,
                                       SurfaceState(), T_MAX, DT)
    expected = R_R * f_xr + (J_R / R_R) * (1.0 - 0.17) * sum_fx / M
    assert torque == pytest.approx(expected)
    assert not clamped
    assert state.s == 0.0


def test_upper_smc_brakes_harder_below_target_slip():
    gains = UpperGains()
    args = (10.0, 3000.0, 6000.0, J_R, R_R, M, gains, SurfaceState(), T_MAX, DT)
    on_target, _, _ = upper_smc(0.17, 0.17, 0.0, *args)
    under, state, _ = upper_smc(0.15, 0.17, 0.0, *args)
    over, _, _ = upper_smc(0.19, 0.17, 0.0, *args)
    assert under > on_target > over
    # outside the boundary layer the integral does not run
    assert state.integral == 0.0


def test_upper_smc_integrates_inside_boundary_layer():
    _, state, clamped = upper_smc(0.165, 0.17, 0.0, 10.0, 3000.0, 6000.0, J_R, R_R, M, UpperGains(),
                                  SurfaceState(), T_MAX, DT)
    assert not clamped
    assert state.integral == pytest.approx(-0.005 * DT)


def test_upper_smc_clamps_at_torque_limit():
    torque, state, clamped = upper_smc(0.0, 0.17, 0.0, 17.0, 4000.0, 8000.0, J_R, R_R, M, UpperGains(),
                                       SurfaceState(integral=0.01), T_MAX, DT)
    assert torque == T_MAX
    assert clamped
    assert state.integral == 0.01


def test_upper_smc_torque_lead():
    gains = UpperGains()
    f_xr, sum_fx, v_x = 3000.0, 6000.0, 10.0
    t_eq = R_R * f_xr + (J_R / R_R) * (1.0 - 0.17) * sum_fx / M
    args = (0.17, 0.17, 0.0, v_x, f_xr, sum_fx, J_R, R_R, M, gains)

    torque, state, _ = upper_smc(*args, SurfaceState(), T_MAX, DT, t_hat=t_eq + 100.0)
    assert state.lead_bias == pytest.approx(100.0 * DT / gains.torque_lead_tau)
    assert torque == pytest.approx(t_eq - gains.torque_lead * (100.0 - state.lead_bias))

    # a lasting offset is absorbed by the running mean
    for _ in range(2000):
        torque, state, _ = upper_smc(*args, state, T_MAX, DT, t_hat=t_eq + 100.0)
    assert state.lead_bias == pytest.approx(100.0, rel=1e-6)
    assert torque == pytest.approx(t_eq, abs=1e-4)


def test_lower_constants(consts):
    assert consts.q1 == pytest.approx(0.011 * 12.0 / 0.365)
    assert consts.q2_forward > consts.q2_backward > 0.011 * 0.011 / 0.365
    assert consts.j_forward > consts.j_backward
    assert consts.kappa == pytest.approx(13.926, rel=1e-3)


def test_lower_smc_holds_without_drive_inside_band(consts):
    gains = LowerGains()
    assert lower_smc(600.0, 600.0, 0.0, 0.0, gains, consts) == (0.0, 0.0, False)
    duty, s_t, saturated = lower_smc(602.0, 600.0, 0.0, 0.2, gains, consts)
    assert duty == 0.0
    assert s_t == pytest.approx(2.0)
    assert not saturated


def test_lower_smc_applies_and_releases(consts):
    gains = LowerGains()
    apply, s_t, saturated = lower_smc(595.0, 600.0, 0.0, 0.0, gains, consts)
    assert 0.0 < apply < 1.0
    assert s_t == pytest.approx(-5.0)
    assert not saturated

    release, s_t, saturated = lower_smc(605.0, 600.0, 0.0, 0.0, gains, consts)
    assert -1.0 < release < 0.0
    assert s_t == pytest.approx(5.0)
    assert not saturated


def test_lower_smc_saturates(consts):
    duty, _, saturated = lower_smc(0.0, 5000.0, 0.0, 0.0, LowerGains(), consts)
    assert duty == 1.0
    assert saturated


def test_lower_smc_speed_tracking(consts):
    gains = LowerGains()
    omega_star = (gains.eps3 * 5.0 + gains.eps4) / consts.kappa
    slow, _, _ = lower_smc(595.0, 600.0, 0.0, 0.6, gains, consts)
    on_speed, _, _ = lower_smc(595.0, 600.0, 0.0, omega_star, gains, consts)
    assert slow - on_speed == pytest.approx(consts.j_forward * gains.k_v * (omega_star - 0.6) / consts.q1)


def test_lower_smc_follows_command_rate(consts):
    gains = LowerGains()
    steady, _, _ = lower_smc(595.0, 600.0, 0.0, 0.0, gains, consts)
    rising, _, _ = lower_smc(595.0, 600.0, 500.0, 0.0, gains, consts)
    assert rising > steady


def test_lower_smc_feed_forward_follows_direction_of_travel(consts):
    # the apply branch has to hold the clamp load, the release branch is helped by it
    gains = LowerGains()
    applying, _, _ = lower_smc(605.0, 600.0, 0.0, 0.6, gains, consts)
    releasing, _, _ = lower_smc(605.0, 600.0, 0.0, -0.6, gains, consts)
    assert applying > releasing


def test_pid_first_steps():
    gains = PidGains()
    torque, state = pid_baseline(0.10, 0.17, gains, PidState(), DT, T_MAX)
    assert torque == pytest.approx(210.0)
    assert state.primed
    assert state.integral == pytest.approx(0.07 * DT)

    torque, state = pid_baseline(0.10, 0.17, gains, state, DT, T_MAX)
    assert torque == pytest.approx(210.0 + 8000.0 * 0.07 * DT)


def test_pid_clamps_and_stops_integrating():
    gains = PidGains()
    torque, state = pid_baseline(0.0, 0.6, gains, PidState(integral=0.1), DT, T_MAX)
    assert torque == T_MAX
    assert state.integral == 0.1

    torque, state = pid_baseline(0.5, 0.17, gains, PidState(), DT, T_MAX)
    assert torque == 0.0
    assert state.integral == 0.0


@pytest.mark.parametrize('gains', [UpperGains(c_slip=0.0), UpperGains(eps1=-1.0), UpperGains(phi_s=0.0)])
def test_upper_gains_validation(gains):
    with pytest.raises(ConfigurationError):
        gains.validate()


def test_lower_gains_validation():
    with pytest.raises(ConfigurationError):
        LowerGains(phi_t=0.0).validate()
    LowerGains().validate()


def test_lower_gains_reject_negative_speed_gain():
    with pytest.raises(ConfigurationError):
        LowerGains(k_v=-1.0).validate()


def test_pid_gains_validation():
    PidGains().validate()
    with pytest.raises(ConfigurationError, match='k_i'):
        PidGains(k_i=-1.0).validate()
