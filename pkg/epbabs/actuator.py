"""
Electric parking brake actuator: DC motor, gear train, screw-nut and caliper.

The chain is reduced to the motor shaft. In each direction of rotation the
load torque the screw reflects onto the motor is affine in the clamp force,

    T_r = K_dir * F_Q + T_s_dir

with K_dir and T_s_dir fixed by the screw geometry, the Coulomb friction of
the thread and the gear efficiencies. BrakeTorqueMap holds these constants;
the plant and the load-torque observer both use it, so a perfect load-torque
estimate reconstructs the plant brake torque exactly.

A self-locking screw gives K_backward < 0: once clamped, the load cannot drive
the motor backwards and the motor has to pull the nut back actively.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Tuple


from epbabs.exceptions import ConfigurationError
from epbabs.utils import clamp, param

logger = logging.getLogger(__name__)

FORWARD = 1
BACKWARD = -1
STATIC = 0


@dataclass(frozen=True)
class MotorParams:
    """Brushed DC motor constants (SI; torque and back-EMF constants equal)."""

    v_a: float = param(12.0, 'supply_voltage_v')
    r_a: float = param(0.365, 'resistance_ohm')
    l_a: float = param(0.00083, 'inductance_h')
    k_e: float = param(0.011, 'back_emf_vs_per_rad')
    k_t: float = param(0.011, 'torque_constant_nm_per_a')
    j_m: float = param(4.21e-6, 'rotor_inertia_kgm2')
    c_m: float = param(5e-5, 'viscous_damping_nms_per_rad')

    def validate(self) -> None:
        for name in ('v_a', 'r_a', 'l_a', 'k_e', 'k_t', 'j_m', 'c_m'):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"motor parameter {name} must be positive, got {getattr(self, name)}")
        if not math.isclose(self.k_e, self.k_t, rel_tol=1e-9):
            raise ConfigurationError(f"k_e ({self.k_e}) and k_t ({self.k_t}) must be equal in SI units")


@dataclass(frozen=True)
class DrivetrainParams:
    """
    Belt stage (1-2) and two planetary stages (3-5, 6-8) ahead of the screw (9).

    Planet spin ratios default to twice the carrier ratio of their stage.
    """

    i_12: float = param(3.0, 'ratio_12')
    i_35: float = param(4.0, 'ratio_35')
    i_68: float = param(4.0, 'ratio_68')
    eta_12: float = param(0.95, 'eff_12')
    eta_35: float = param(0.9, 'eff_35')
    eta_68: float = param(0.9, 'eff_68')
    eta_21: float = param(0.9, 'eff_21')
    eta_53: float = param(0.9, 'eff_53')
    eta_86: float = param(0.9, 'eff_86')
    eta_89: float = param(0.95, 'eff_89')
    j_1: float = param(2e-6, 'inertia_1_kgm2')
    j_2: float = param(5e-6, 'inertia_2_kgm2')
    j_3: float = param(5e-6, 'inertia_3_kgm2')
    j_4: float = param(1e-7, 'inertia_4_kgm2')
    m_4: float = param(0.002, 'mass_4_kg')
    r_5: float = param(0.008, 'radius_5_m')
    n_planets: int = param(3, 'planet_count')
    j_5: float = param(4e-6, 'inertia_5_kgm2')
    j_6: float = param(4e-6, 'inertia_6_kgm2')
    j_7: float = param(1e-7, 'inertia_7_kgm2')
    m_7: float = param(0.003, 'mass_7_kg')
    r_8: float = param(0.01, 'radius_8_m')
    j_8: float = param(8e-6, 'inertia_8_kgm2')
    j_9: float = param(3e-6, 'inertia_9_kgm2')
    c_1: float = param(1e-6, 'damping_1_nms_per_rad')
    c_2: float = param(2e-5, 'damping_2_nms_per_rad')
    c_3: float = param(5e-4, 'damping_3_nms_per_rad')

    @property
    def i_18(self) -> float:
        return self.i_12 * self.i_35 * self.i_68

    @property
    def eta_forward(self) -> float:
        return self.eta_12 * self.eta_35 * self.eta_68

    @property
    def eta_backward(self) -> float:
        return self.eta_21 * self.eta_53 * self.eta_86

    def validate(self) -> None:
        for name in ('i_12', 'i_35', 'i_68'):
            if getattr(self, name) <= 1.0:
                raise ConfigurationError(f"gear ratio {name} must exceed 1, got {getattr(self, name)}")
        for name in ('eta_12', 'eta_35', 'eta_68', 'eta_21', 'eta_53', 'eta_86', 'eta_89'):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ConfigurationError(f"efficiency {name} must lie in (0, 1], got {value}")
        if self.n_planets < 1:
            raise ConfigurationError(f"planet count must be at least 1, got {self.n_planets}")


@dataclass(frozen=True)
class ScrewParams:
    """Screw-nut geometry and friction."""

    lead: float = param(0.002, 'lead_m')
    diameter: float = param(0.008, 'mean_diameter_m')
    u_s: float = param(0.10, 'sliding_friction')
    f_s: float = param(50.0, 'breakaway_friction_n')

    @property
    def lead_angle(self) -> float:
        return math.atan(self.lead / (math.pi * self.diameter))

    def validate(self) -> None:
        if self.lead <= 0 or self.diameter <= 0:
            raise ConfigurationError("screw lead and diameter must be positive")
        if self.f_s < 0:
            raise ConfigurationError(f"breakaway friction must be non-negative, got {self.f_s}")
        if self.u_s <= math.tan(self.lead_angle):
            raise ConfigurationError(
                f"screw is not self-locking: u_s={self.u_s} <= tan(lead angle)={math.tan(self.lead_angle):.4f}")


@dataclass(frozen=True)
class CaliperParams:
    """Caliper stiffness, clearance and the disc friction interface."""

    k_c: float = param(3e7, 'stiffness_n_per_m')
    b_c: float = param(1e4, 'damping_ns_per_m')
    s_mc: float = param(1e-4, 'clearance_m')
    mu_b: float = param(0.35, 'pad_friction')
    r: float = param(0.2, 'effective_radius_m')
    travel_min: float = param(-5e-4, 'travel_min_m')
    travel_max: float = param(1.5e-3, 'travel_max_m')

    def validate(self) -> None:
        if self.k_c <= 0:
            raise ConfigurationError(f"caliper stiffness must be positive, got {self.k_c}")
        if self.b_c < 0 or self.s_mc < 0:
            raise ConfigurationError("caliper damping and clearance must be non-negative")
        if self.mu_b <= 0 or self.r <= 0:
            raise ConfigurationError("pad friction and effective radius must be positive")
        if not self.travel_min < self.s_mc < self.travel_max:
            raise ConfigurationError(
                f"clearance {self.s_mc} m outside travel limits [{self.travel_min}, {self.travel_max}] m")


@dataclass(frozen=True)
class Reduction:
    """Drivetrain inertia and damping reflected to the motor shaft, per direction."""

    j_eq_forward: float
    j_eq_backward: float
    c_eq_forward: float
    c_eq_backward: float


def reduce_drivetrain(dp: DrivetrainParams) -> Reduction:
    """
    Reflect the gear-train inertias and bearing damping onto the motor shaft.

    Forward rotation divides the reflected terms by the stage efficiencies,
    backward rotation multiplies them by the reverse efficiencies.

    Args:
        dp: Drivetrain parameters

    Returns:
        Reduction

    Raises:
        ConfigurationError: If a reflected inertia or damping is not positive
    """
    i12, i35, i68 = dp.i_12, dp.i_35, dp.i_68
    i14 = 2.0 * i12
    i16 = i12 * i35
    i17 = 2.0 * i12 * i35
    i18 = dp.i_18
    n = dp.n_planets

    stage1 = (dp.j_2 + dp.j_3) / i12 ** 2 + n * dp.m_4 * dp.r_5 ** 2 / (i12 * i16) + n * dp.j_4 / (i12 * i14)
    stage2 = ((dp.j_5 + dp.j_6) / (i12 * i35 * i16) + n * dp.j_7 / (i12 * i35 * i17)
              + n * dp.m_7 * dp.r_8 ** 2 / (i12 * i35 * i18))
    stage3 = (dp.j_8 + dp.j_9) / (i12 * i35 * i68 * i18)

    j_fwd = dp.j_1 + (stage1 + (stage2 + stage3 / dp.eta_68) / dp.eta_35) / dp.eta_12
    j_bwd = dp.j_1 + dp.eta_21 * (stage1 + dp.eta_53 * (stage2 + dp.eta_86 * stage3))

    c_fwd = dp.c_1 + dp.c_2 / (dp.eta_12 * i12 ** 2) + dp.c_3 / (dp.eta_forward * i18 ** 2)
    c_bwd = dp.c_1 + dp.eta_21 * dp.c_2 / i12 ** 2 + dp.eta_backward * dp.c_3 / i18 ** 2

    result = Reduction(j_fwd, j_bwd, c_fwd, c_bwd)
    for name, value in vars(result).items():
        if not value > 0:
            raise ConfigurationError(f"reflected drivetrain {name} is not positive: {value}")
    return result


@dataclass(frozen=True)
class BrakeTorqueMap:
    """
    Affine load-torque law of the screw chain and its inverse.

    Attributes:
        k_forward: Motor-shaft torque per newton of clamp force while applying, N·m/N
        k_backward: Same while releasing (negative for a self-locking screw), N·m/N
        t_s_forward: Load-independent friction torque while applying, N·m
        t_s_backward: Load-independent friction torque while releasing, N·m
        torque_per_force: Disc brake torque per newton of clamp force, m
    """

    k_forward: float
    k_backward: float
    t_s_forward: float
    t_s_backward: float
    torque_per_force: float

    def gain(self, direction: int) -> float:
        return self.k_forward if direction >= 0 else self.k_backward

    def offset(self, direction: int) -> float:
        return self.t_s_forward if direction >= 0 else self.t_s_backward

    def load_torque(self, f_q: float, direction: int) -> float:
        """Motor-shaft load torque for a clamp force and direction of rotation."""
        return self.gain(direction) * f_q + self.offset(direction)

    def breakaway_band(self, f_q: float) -> Tuple[float, float]:
        """Drive-torque interval in which a stationary motor stays stuck."""
        return self.load_torque(f_q, BACKWARD), self.load_torque(f_q, FORWARD)

    def brake_torque_from_load(self, t_r: float, direction: int) -> float:
        """Brake torque reconstructed from a motor-shaft load torque, never negative."""
        f_q = (t_r - self.offset(direction)) / self.gain(direction)
        return max(0.0, f_q * self.torque_per_force)

    def load_for_brake_torque(self, t_epb: float, direction: int) -> float:
        """Motor-shaft load torque that holds a given brake torque."""
        return self.load_torque(max(t_epb, 0.0) / self.torque_per_force, direction)


def brake_torque_gain(dp: DrivetrainParams, screw: ScrewParams, cal: CaliperParams) -> BrakeTorqueMap:
    """
    Build the load-torque law shared by the plant and the observer.

    The gear-side screw torque solves the thread friction together with the
    drive force, T8 = F_Q (pi d u_s cos(g) +/- P_h) / (2 pi (eta_89 - u_s sin(g))),
    then is referred to the motor through the gear ratio and the forward or
    reverse efficiencies.

    Raises:
        ConfigurationError: If a branch gain underflows and cannot be inverted
    """
    gamma = screw.lead_angle
    friction = math.pi * screw.diameter * screw.u_s * math.cos(gamma)
    denom = 2.0 * math.pi * (dp.eta_89 - screw.u_s * math.sin(gamma))
    if denom <= 0:
        raise ConfigurationError(f"screw efficiency {dp.eta_89} too low for friction {screw.u_s}")

    i18 = dp.i_18
    k_fwd = (friction + screw.lead) / denom / (i18 * dp.eta_forward)
    k_bwd = dp.eta_backward * (screw.lead - friction) / denom / i18
    breakaway = math.pi * screw.diameter * screw.f_s / denom
    t_s_fwd = breakaway / (i18 * dp.eta_forward)
    t_s_bwd = -dp.eta_backward * breakaway / i18

    for name, k in (('forward', k_fwd), ('backward', k_bwd)):
        if abs(k) < 1e-12:
            raise ConfigurationError(f"{name} load-torque gain underflows ({k}); screw geometry is degenerate")
    return BrakeTorqueMap(k_fwd, k_bwd, t_s_fwd, t_s_bwd, cal.mu_b * cal.r)


@dataclass(frozen=True)
class ClampGeometry:
    """Nut travel per motor radian and the caliper law it drives."""

    per_rad: float
    k_c: float
    b_c: float
    s_mc: float
    torque_per_force: float

    @classmethod
    def build(cls, dp: DrivetrainParams, screw: ScrewParams, cal: CaliperParams) -> 'ClampGeometry':
        return cls(screw.lead / (2.0 * math.pi * dp.i_18), cal.k_c, cal.b_c, cal.s_mc, cal.mu_b * cal.r)

    @property
    def torque_per_rad(self) -> float:
        """Brake-torque gain per motor radian once the pads touch, N·m/rad."""
        return self.k_c * self.per_rad * self.torque_per_force

    def clamp_force(self, theta_m: float, omega_m: float) -> float:
        s_nut = theta_m * self.per_rad
        if s_nut <= self.s_mc:
            return 0.0
        return max(0.0, self.k_c * (s_nut - self.s_mc) + self.b_c * omega_m * self.per_rad)

    def contact_torque(self, theta_m: float, omega_m: float) -> float:
        """
        Brake torque of the caliper law without its contact limits, N·m.

        Negative while the pads are still in the clearance.
        """
        s_nut = theta_m * self.per_rad
        f = self.k_c * (s_nut - self.s_mc)
        if s_nut > self.s_mc:
            f += self.b_c * self.per_rad * omega_m
        return self.torque_per_force * f


def screw_friction(v: float, f_fm: float, f_sliding: float, f_s: float) -> float:
    """
    Screw-nut friction force with static and sliding cases.

    Args:
        v: Nut sliding velocity
        f_fm: Friction force needed to keep the nut still
        f_sliding: Sliding friction magnitude
        f_s: Maximum static friction

    Returns:
        Friction force, N
    """
    if v != 0.0:
        return math.copysign(f_sliding, v)
    if abs(f_fm) < f_s:
        return f_fm
    return math.copysign(f_s, f_fm)


def brake_torque(f_q: float, cal: CaliperParams) -> float:
    """Disc brake torque for a clamp force, N·m."""
    return cal.mu_b * cal.r * max(f_q, 0.0)


@dataclass
class ScrewChainResult:
    """Nut kinematics, clamp force and motor-shaft load torque."""

    s_nut: float
    s_dot: float
    f_q: float
    t_r: float
    friction: float
    direction: int
    hard_stop: bool


def static_reaction(omega_m: float, drive_torque: float, lo: float, hi: float,
                    omega_zero: float) -> Tuple[int, float]:
    """Direction of rotation and load torque for a motor speed and drive torque."""
    if abs(omega_m) < omega_zero:
        return STATIC, clamp(drive_torque, lo, hi)
    if omega_m > 0:
        return FORWARD, hi
    return BACKWARD, lo


def screw_chain(omega_m: float, theta_m: float, screw: ScrewParams, dp: DrivetrainParams,
                cal: CaliperParams, tmap: BrakeTorqueMap, drive_torque: float = 0.0,
                omega_zero: float = 0.5) -> ScrewChainResult:
    """
    Evaluate the screw-nut and caliper for a motor angle and speed.

    Below omega_zero the motor counts as stationary and the load torque is
    the static reaction: the drive torque itself while it stays inside the
    breakaway band, the band edge otherwise.

    Args:
        omega_m: Motor speed, rad/s
        theta_m: Motor angle, rad
        screw: Screw parameters
        dp: Drivetrain parameters
        cal: Caliper parameters
        tmap: Shared load-torque law
        drive_torque: Electromagnetic motor torque, N·m (used when stationary)
        omega_zero: Stationary-speed threshold, rad/s

    Returns:
        ScrewChainResult
    """
    geometry = ClampGeometry.build(dp, screw, cal)
    s_nut = theta_m * geometry.per_rad
    s_dot = omega_m * geometry.per_rad
    hard_stop = s_nut > cal.travel_max or s_nut < cal.travel_min
    f_q = geometry.clamp_force(theta_m, omega_m)
    lo, hi = tmap.breakaway_band(f_q)
    direction, t_r = static_reaction(omega_m, drive_torque, lo, hi, omega_zero)

    # friction force at the thread, expressed as the force the nut would need
    gamma = screw.lead_angle
    f_sliding = screw.u_s * f_q * math.cos(gamma) + screw.f_s
    f_fm = (2.0 * drive_torque * dp.i_18 / screw.diameter) * math.cos(gamma) - f_q * math.sin(gamma)
    friction = screw_friction(0.0 if direction == STATIC else s_dot, f_fm, f_sliding, screw.f_s + screw.u_s * f_q)

    return ScrewChainResult(s_nut, s_dot, f_q, t_r, friction, direction, hard_stop)


@dataclass
class ActuatorState:
    """Motor state plus the chain quantities derived from it."""

    theta_m: float = 0.0
    omega_m: float = 0.0
    i_a: float = 0.0
    s_nut: float = 0.0
    f_q: float = 0.0
    t_epb: float = 0.0
    t_r: float = 0.0
    energy_in: float = 0.0
    events: List[str] = field(default_factory=list)


def motor_step(p: MotorParams, j_n: float, c_n: float, state: Tuple[float, float, float], duty: float,
               t_r: float, dt: float, locked: bool = False) -> Tuple[float, float, float]:
    """
    Advance (theta_m, omega_m, i_a) by one RK4 step with the load torque held.

    Args:
        p: Motor parameters
        j_n: Total inertia at the motor shaft, kg·m²
        c_n: Total viscous damping at the motor shaft, N·m·s/rad
        state: (theta_m, omega_m, i_a)
        duty: PWM duty, [-1, 1]
        t_r: Load torque, N·m
        dt: Step, s
        locked: Hold the rotor still (stiction)

    Returns:
        Next (theta_m, omega_m, i_a)
    """
    u_v = clamp(duty, -1.0, 1.0) * p.v_a
    k_t, k_e, r_a, l_a = p.k_t, p.k_e, p.r_a, p.l_a

    def rates(omega: float, i_a: float) -> Tuple[float, float]:
        d_omega = 0.0 if locked else (k_t * i_a - c_n * omega - t_r) / j_n
        return d_omega, (u_v - k_e * omega - r_a * i_a) / l_a

    theta, omega, i_a = state
    half = 0.5 * dt
    a1, b1 = rates(omega, i_a)
    w2 = omega + half * a1
    a2, b2 = rates(w2, i_a + half * b1)
    w3 = omega + half * a2
    a3, b3 = rates(w3, i_a + half * b2)
    w4 = omega + dt * a3
    a4, b4 = rates(w4, i_a + dt * b3)
    sixth = dt / 6.0
    return (theta + sixth * (omega + 2.0 * w2 + 2.0 * w3 + w4),
            omega + sixth * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
            i_a + sixth * (b1 + 2.0 * b2 + 2.0 * b3 + b4))


class EpbActuator:
    """
    One rear-wheel actuator stepped at the plant rate.

    The motor is integrated with the load torque of the screw chain held over
    each substep. A stationary motor sticks while its drive torque stays
    inside the breakaway band, which is what holds the clamp with the power
    cut.
    """

    STOP_TOLERANCE = 1e-12

    def __init__(self, motor: MotorParams, drivetrain: DrivetrainParams, screw: ScrewParams,
                 caliper: CaliperParams, omega_zero: float = 0.5):
        for part in (motor, drivetrain, screw, caliper):
            part.validate()
        self.motor = motor
        self.drivetrain = drivetrain
        self.screw = screw
        self.caliper = caliper
        self.omega_zero = omega_zero
        self.reduction = reduce_drivetrain(drivetrain)
        self.tmap = brake_torque_gain(drivetrain, screw, caliper)
        self.geometry = ClampGeometry.build(drivetrain, screw, caliper)
        self.state = ActuatorState()
        self._at_stop = False
        self._direction = STATIC
        self._refresh()

    @property
    def j_n(self) -> float:
        """Forward-branch total inertia at the motor shaft."""
        return self.motor.j_m + self.reduction.j_eq_forward

    @property
    def c_n(self) -> float:
        """Forward-branch total damping at the motor shaft."""
        return self.motor.c_m + self.reduction.c_eq_forward

    @property
    def at_stop(self) -> bool:
        """True while the nut rests on a travel limit."""
        return self._at_stop

    def inertia_damping(self, direction: int) -> Tuple[float, float]:
        if direction < 0:
            return self.motor.j_m + self.reduction.j_eq_backward, self.motor.c_m + self.reduction.c_eq_backward
        return self.j_n, self.c_n

    def _refresh(self) -> None:
        st = self.state
        tm = self.tmap
        st.s_nut = st.theta_m * self.geometry.per_rad
        st.f_q = self.geometry.clamp_force(st.theta_m, st.omega_m)
        st.t_epb = brake_torque(st.f_q, self.caliper)
        lo = tm.k_backward * st.f_q + tm.t_s_backward
        hi = tm.k_forward * st.f_q + tm.t_s_forward
        self._direction, st.t_r = static_reaction(st.omega_m, self.motor.k_t * st.i_a, lo, hi, self.omega_zero)

    def step(self, duty: float, dt: float) -> ActuatorState:
        """
        Advance the actuator by one plant step.

        Args:
            duty: PWM duty, [-1, 1]
            dt: Step, s

        Returns:
            The updated state
        """
        st = self.state
        tm = self.tmap
        drive = self.motor.k_t * st.i_a
        lo = tm.k_backward * st.f_q + tm.t_s_backward
        hi = tm.k_forward * st.f_q + tm.t_s_forward

        stuck = self._direction == STATIC and lo <= drive <= hi
        if stuck:
            direction = STATIC
            t_r = drive
        elif self._direction != STATIC:
            direction = self._direction
            t_r = st.t_r
        else:
            direction = FORWARD if drive > hi else BACKWARD
            t_r = hi if direction > 0 else lo

        j_n, c_n = self.inertia_damping(direction)
        omega_before = st.omega_m
        theta, omega, i_a = motor_step(self.motor, j_n, c_n, (st.theta_m, st.omega_m, st.i_a),
                                       duty, t_r, dt, locked=stuck)
        if stuck or omega_before * omega < 0.0:
            omega = 0.0

        st.energy_in += clamp(duty, -1.0, 1.0) * self.motor.v_a * 0.5 * (st.i_a + i_a) * dt
        st.theta_m, st.omega_m, st.i_a = theta, omega, i_a
        self._limit_travel(theta * self.geometry.per_rad)
        self._refresh()
        return st

    def _limit_travel(self, s_nut: float) -> None:
        cal = self.caliper
        st = self.state
        if s_nut > cal.travel_max or s_nut < cal.travel_min:
            limit = cal.travel_max if s_nut > cal.travel_max else cal.travel_min
            st.theta_m = limit / self.geometry.per_rad
            st.omega_m = 0.0
            if not self._at_stop:
                st.events.append('hard_stop')
                logger.warning("Nut reached its travel limit at %.3g m", limit)
            self._at_stop = True
        elif cal.travel_min + self.STOP_TOLERANCE < s_nut < cal.travel_max - self.STOP_TOLERANCE:
            self._at_stop = False

    def drain_events(self) -> List[str]:
        events, self.state.events = self.state.events, []
        return events
