"""
ABS control: slip controller, brake-torque controller, PID baseline, supervisor.

Upper loop (slip -> brake torque). With e = lam - lam_d and the surface
s = e + c∫e, the wheel and body equations give

    v·dlam/dt = -R·dw/dt + (1 - lam)·dv/dt
              = -R(F_x·R - T)/J - (1 - lam)·sum(F_x)/m

Imposing ds/dt = -eps1·s - eps2·sat(s/phi) and solving for T:

    T = R·F_x + (J/R)(1 - lam)·sum(F_x)/m
        + (J·v/R)(dlam_d/dt - c·e - eps1·s - eps2·sat(s/phi))

The tyre force in that law comes from the tyre model at the estimated
friction and load. When the brake-torque estimate is supplied, its deviation
from the equivalent torque, less a slow running mean of that deviation, is
fed back as a lead term; it damps the slip oscillation the actuator lag would
otherwise excite. The integral only runs inside the boundary layer.

Lower loop (brake torque -> duty). With s_T = T_hat - T_d, the reaching law
asks for the motor speed

    w* = (dT_d/dt - eps3·s_T - eps4·sat(s_T/phi_T)) / kappa

where kappa is the brake torque per motor radian in contact. The duty holds
the load torque of the current direction, drives the motor at w* against back
EMF and damping, and adds a speed-tracking term:

    u = [tau_ff(T_hat) + Q2·w* + J_n·k_v·(w* - w)] / Q1

with Q1 = k_t·V_a/R_a and Q2 = k_t·k_e/R_a + c_n. A stationary motor whose
torque error stays inside the hold band gets no drive: self-locking holds the
clamp.
"""

import enum
import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

from epbabs.actuator import BACKWARD, FORWARD, BrakeTorqueMap, MotorParams
from epbabs.exceptions import ConfigurationError
from epbabs.observer import saturation
from epbabs.utils import clamp, param

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UpperGains:
    c_slip: float = param(20.0, 'c_per_s')
    eps1: float = param(40.0, 'eps1_per_s')
    eps2: float = param(2.0, 'eps2_per_s')
    phi_s: float = param(0.01, 'boundary_layer')
    derivative_tau: float = param(0.01, 'derivative_filter_s')
    torque_lead: float = param(1.5, 'torque_lead')
    torque_lead_tau: float = param(0.1, 'torque_lead_filter_s')

    def validate(self) -> None:
        if self.c_slip <= 0:
            raise ConfigurationError(f"slip surface gain must be positive, got {self.c_slip}")
        if self.eps1 < 0 or self.eps2 < 0:
            raise ConfigurationError("slip reaching-law gains must be non-negative")
        if self.phi_s <= 0:
            raise ConfigurationError(f"slip boundary layer must be positive, got {self.phi_s}")
        if self.torque_lead < 0 or self.torque_lead_tau <= 0:
            raise ConfigurationError(
                f"torque lead must be non-negative and its filter positive, "
                f"got {self.torque_lead}, {self.torque_lead_tau} s")


@dataclass(frozen=True)
class LowerGains:
    k_v: float = param(800.0, 'speed_gain_per_s')
    eps3: float = param(40.0, 'eps3_per_s')
    eps4: float = param(100.0, 'eps4_nm_per_s')
    phi_t: float = param(5.0, 'boundary_layer_nm')
    hold_band: float = param(3.0, 'hold_band_nm')
    derivative_tau: float = param(0.01, 'derivative_filter_s')
    moving_speed: float = param(0.5, 'moving_speed_radps')

    def validate(self) -> None:
        if self.k_v < 0:
            raise ConfigurationError(f"speed-tracking gain must be non-negative, got {self.k_v}")
        if self.eps3 < 0 or self.eps4 < 0:
            raise ConfigurationError("torque reaching-law gains must be non-negative")
        if self.phi_t <= 0:
            raise ConfigurationError(f"torque boundary layer must be positive, got {self.phi_t}")
        if self.hold_band < 0 or self.moving_speed < 0:
            raise ConfigurationError("hold band and moving speed must be non-negative")


@dataclass(frozen=True)
class PidGains:
    k_p: float = param(3000.0, 'kp_nm')
    k_i: float = param(8000.0, 'ki_nm_per_s')
    k_d: float = param(30.0, 'kd_nms')
    derivative_tau: float = param(0.01, 'derivative_filter_s')

    def validate(self) -> None:
        for name in ('k_p', 'k_i', 'k_d', 'derivative_tau'):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"PID parameter {name} must be non-negative, got {getattr(self, name)}")


@dataclass(frozen=True)
class SurfaceState:
    """Integral of the tracking error, the last surface value and the lead-term mean."""

    integral: float = 0.0
    s: float = 0.0
    lead_bias: float = 0.0


@dataclass(frozen=True)
class LowerConstants:
    """Motor-side constants of the torque loop, per direction of travel."""

    q1: float
    q2_forward: float
    q2_backward: float
    j_forward: float
    j_backward: float
    kappa: float
    tmap: BrakeTorqueMap

    @classmethod
    def build(cls, motor: MotorParams, inertia: Tuple[float, float], damping: Tuple[float, float],
              kappa: float, tmap: BrakeTorqueMap) -> 'LowerConstants':
        """
        Args:
            motor: Motor parameters
            inertia: Motor-shaft inertia (forward, backward), kg·m²
            damping: Motor-shaft damping (forward, backward), N·m·s/rad
            kappa: Brake torque per motor radian in contact, N·m/rad
            tmap: Shared load-torque law
        """
        q1 = motor.k_t * motor.v_a / motor.r_a
        if q1 < 1e-9:
            raise ConfigurationError(f"stall torque per unit duty underflows: Q1={q1}")
        if kappa < 1e-9:
            raise ConfigurationError(f"brake torque per motor radian underflows: {kappa}")
        emf = motor.k_t * motor.k_e / motor.r_a
        return cls(q1, emf + damping[0], emf + damping[1], inertia[0], inertia[1], kappa, tmap)


class Mode(enum.Enum):
    ACTIVE = 'active'
    QUIT = 'quit'
    STOP = 'stop'


def supervisor(v_x: float, v_quit: float = 1.0, v_stop: float = 0.1) -> Mode:
    """
    ABS supervisor: slip control above v_quit, full apply below it, stop below v_stop.
    """
    if v_x < v_stop:
        return Mode.STOP
    if v_x < v_quit:
        return Mode.QUIT
    return Mode.ACTIVE


def upper_smc(lam_r: float, lam_d: float, lam_d_dot: float, v_x: float, f_xr: float, sum_fx: float,
              j_r: float, r_r: float, m: float, gains: UpperGains, state: SurfaceState, t_max: float,
              dt: float, t_hat: Optional[float] = None) -> Tuple[float, SurfaceState, bool]:
    """
    Sliding-mode slip controller.

    Args:
        lam_r: Rear slip
        lam_d: Target slip
        lam_d_dot: Target slip rate, 1/s
        v_x: Vehicle speed, m/s
        f_xr: Rear tyre force per wheel (braking positive), N
        sum_fx: Total braking force, N
        j_r: Rear wheel inertia, kg·m²
        r_r: Rear wheel radius, m
        m: Vehicle mass, kg
        gains: Controller gains
        state: Surface state
        t_max: Torque limit, N·m
        dt: Control period, s
        t_hat: Estimated brake torque per rear wheel, N·m (None disables the lead term)

    Returns:
        Tuple (brake torque command per rear wheel, new surface state, clamped flag)
    """
    e = lam_r - lam_d
    s = e + gains.c_slip * state.integral
    reach = lam_d_dot - gains.c_slip * e - gains.eps1 * s - gains.eps2 * saturation(s, gains.phi_s)
    t_eq = r_r * f_xr + (j_r / r_r) * (1.0 - lam_r) * sum_fx / m

    lead_bias = state.lead_bias
    lead_term = 0.0
    if t_hat is not None:
        deviation = t_hat - t_eq
        lead_bias += dt / gains.torque_lead_tau * (deviation - lead_bias)
        lead_term = gains.torque_lead * (deviation - lead_bias)

    raw = t_eq + (j_r * v_x / r_r) * reach - lead_term
    torque = clamp(raw, 0.0, t_max)
    clamped = torque != raw
    sliding = abs(s) <= gains.phi_s
    integral = state.integral + e * dt if sliding and not clamped else state.integral
    return torque, SurfaceState(integral, s, lead_bias), clamped


def lower_smc(t_hat: float, t_d: float, t_d_dot: float, omega_m: float, gains: LowerGains,
              consts: LowerConstants) -> Tuple[float, float, bool]:
    """
    Sliding-mode brake-torque controller.

    The feed-forward branch follows the motor's direction of travel; a
    stationary motor takes the branch the requested speed points into.

    Args:
        t_hat: Estimated brake torque, N·m
        t_d: Commanded brake torque, N·m
        t_d_dot: Filtered rate of the command, N·m/s
        omega_m: Motor speed, rad/s
        gains: Controller gains
        consts: Motor-side constants

    Returns:
        Tuple (duty in [-1, 1], surface value, saturated flag)
    """
    s = t_hat - t_d
    if abs(omega_m) <= gains.moving_speed and abs(s) <= gains.hold_band:
        return 0.0, s, False

    omega_star = (t_d_dot - gains.eps3 * s - gains.eps4 * saturation(s, gains.phi_t)) / consts.kappa
    if omega_m > gains.moving_speed:
        direction = FORWARD
    elif omega_m < -gains.moving_speed:
        direction = BACKWARD
    else:
        direction = FORWARD if omega_star >= 0.0 else BACKWARD

    feed_forward = consts.tmap.load_for_brake_torque(max(t_hat, 0.0), direction)
    if direction == FORWARD:
        j_n, q2 = consts.j_forward, consts.q2_forward
    else:
        j_n, q2 = consts.j_backward, consts.q2_backward

    raw = (feed_forward + q2 * omega_star + j_n * gains.k_v * (omega_star - omega_m)) / consts.q1
    duty = clamp(raw, -1.0, 1.0)
    return duty, s, duty != raw


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    e_prev: float = 0.0
    d_filtered: float = 0.0
    primed: bool = False


def pid_baseline(lam_r: float, lam_d: float, gains: PidGains, state: PidState, dt: float,
                 t_max: float) -> Tuple[float, PidState]:
    """
    PID slip controller used as the comparison baseline.

    The derivative acts on the error through a first-order filter; the
    integral stops while the output is clamped and the error pushes further
    into the clamp.

    Returns:
        Tuple (brake torque command per rear wheel, new state)
    """
    e = lam_d - lam_r
    if state.primed and gains.derivative_tau > 0:
        alpha = 1.0 - math.exp(-dt / gains.derivative_tau)
        d = state.d_filtered + alpha * ((e - state.e_prev) / dt - state.d_filtered)
    elif state.primed:
        d = (e - state.e_prev) / dt
    else:
        d = 0.0

    raw = gains.k_p * e + gains.k_i * state.integral + gains.k_d * d
    torque = clamp(raw, 0.0, t_max)
    winding = (raw > t_max and e > 0) or (raw < 0.0 and e < 0)
    integral = state.integral if winding else state.integral + e * dt
    return torque, replace(state, integral=integral, e_prev=e, d_filtered=d, primed=True)
