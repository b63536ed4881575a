"""
Four-wheel longitudinal vehicle with quasi-static load transfer.

State vector layout used by the integrator: [v_x, x, w_fl, w_fr, w_rl, w_rr].
Tyre forces are magnitudes with positive meaning "braking" (opposing vehicle
motion); the right-hand side below is the only place signs are applied.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from epbabs.exceptions import ConfigurationError, DomainError
from epbabs.tyre import TyreModel, force_curve
from epbabs.utils import param, rk4_step

logger = logging.getLogger(__name__)

MAX_ACCEL = 12.0

IDX_V, IDX_X, IDX_FL, IDX_FR, IDX_RL, IDX_RR = range(6)


@dataclass(frozen=True)
class VehicleParams:
    """Vehicle body and wheel parameters (defaults: mid-size sedan bench values)."""

    m: float = param(2100.0, 'mass_kg')
    a: float = param(1.16, 'cg_to_front_m')
    b: float = param(1.64, 'cg_to_rear_m')
    h_g: float = param(0.55, 'cg_height_m')
    r_f: float = param(0.327, 'wheel_radius_front_m')
    r_r: float = param(0.327, 'wheel_radius_rear_m')
    j_f: float = param(1.7, 'wheel_inertia_front_kgm2')
    j_r: float = param(1.7, 'wheel_inertia_rear_kgm2')
    g: float = param(9.81, 'gravity_mps2')
    v_eps: float = param(0.1, 'stop_speed_mps')
    v_floor: float = param(0.5, 'slip_floor_mps')

    @property
    def wheelbase(self) -> float:
        return self.a + self.b

    def validate(self) -> None:
        for name in ('m', 'a', 'b', 'h_g', 'r_f', 'r_r', 'j_f', 'j_r', 'g', 'v_eps'):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"vehicle parameter {name} must be positive, got {getattr(self, name)}")
        if self.v_floor < self.v_eps:
            raise ConfigurationError(f"slip floor {self.v_floor} m/s is below the stop speed {self.v_eps} m/s")


@dataclass(frozen=True)
class VehicleState:
    """Integrated plant state plus the lagged acceleration used for load transfer."""

    v_x: float
    x: float
    omega_fl: float
    omega_fr: float
    omega_rl: float
    omega_rr: float
    a_x_prev: float = 0.0

    @classmethod
    def rolling(cls, p: VehicleParams, v0: float) -> 'VehicleState':
        """Free-rolling initial state at speed v0."""
        return cls(v0, 0.0, v0 / p.r_f, v0 / p.r_f, v0 / p.r_r, v0 / p.r_r)

    @classmethod
    def from_list(cls, y: Sequence[float], a_x_prev: float = 0.0) -> 'VehicleState':
        return cls(*(float(v) for v in y[:6]), a_x_prev=a_x_prev)

    def to_list(self) -> List[float]:
        return [self.v_x, self.x, self.omega_fl, self.omega_fr, self.omega_rl, self.omega_rr]


@dataclass(frozen=True)
class AxleLoads:
    """Per-wheel vertical loads, N."""

    front: float
    rear: float
    clamped: bool = False


@dataclass(frozen=True)
class WheelTorques:
    """
    Applied wheel torques, N·m, as magnitudes.

    Attributes:
        brake: Hydraulic brake torque per wheel (fl, fr, rl, rr)
        drive: Drive torque on the front wheels (fl, fr)
        epb: Parking-brake torque on the rear wheels (rl, rr)
    """

    brake: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    drive: Tuple[float, float] = (0.0, 0.0)
    epb: Tuple[float, float] = (0.0, 0.0)


def axle_loads(p: VehicleParams, a_x: float) -> AxleLoads:
    """
    Quasi-static per-wheel vertical loads for a signed longitudinal acceleration.

    Braking (a_x < 0) shifts load from the rear axle to the front. A load that
    would go negative is clamped to zero, the other axle takes the full weight
    and the result is marked as clamped.

    Args:
        p: Vehicle parameters
        a_x: Signed longitudinal acceleration dv_x/dt, m/s²

    Returns:
        AxleLoads
    """
    if abs(a_x) > MAX_ACCEL:
        raise DomainError(f"acceleration {a_x} m/s² outside ±{MAX_ACCEL} m/s²")

    k = p.m / (2.0 * p.wheelbase)
    front = k * (p.g * p.b - a_x * p.h_g)
    rear = k * (p.g * p.a + a_x * p.h_g)

    if front < 0.0 or rear < 0.0:
        logger.warning("Axle load clamped at a_x=%.3f m/s² (front %.1f N, rear %.1f N)", a_x, front, rear)
        half_weight = p.m * p.g / 2.0
        if front < 0.0:
            return AxleLoads(0.0, half_weight, clamped=True)
        return AxleLoads(half_weight, 0.0, clamped=True)
    return AxleLoads(front, rear)


def slip_ratio(v_x: float, omega: float, r: float, v_eps: float = 0.1, v_floor: float = 0.0) -> float:
    """
    Slip ratio magnitude.

    Braking (v_x >= wR): (v_x - wR) / v_x. Driving (wR > v_x): (wR - v_x) / wR.
    The denominator never drops below v_floor, and both speeds below v_eps
    give zero slip.

    Args:
        v_x: Vehicle speed, m/s
        omega: Wheel speed, rad/s
        r: Wheel radius, m
        v_eps: Standstill threshold, m/s
        v_floor: Minimum denominator, m/s

    Returns:
        Slip ratio in [0, 1]
    """
    wr = omega * r
    if v_x < v_eps and wr < v_eps:
        return 0.0
    if v_x >= wr:
        lam = (v_x - wr) / max(v_x, v_floor)
    else:
        lam = (wr - v_x) / max(wr, v_floor)
    return min(max(lam, 0.0), 1.0)


def _signed_force(p: VehicleParams, v: float, omega: float, r: float, curve: Callable[[float], float]) -> float:
    f = curve(slip_ratio(v, omega, r, p.v_eps, p.v_floor))
    return f if v >= omega * r else -f


def _rates(p: VehicleParams, y: Sequence[float], front: Callable[[float], float],
           rear: Callable[[float], float], applied: Sequence[float]) -> List[float]:
    v = y[IDX_V]
    f_fl = _signed_force(p, v, y[IDX_FL], p.r_f, front)
    # wheels in the same state share one tyre evaluation
    f_fr = f_fl if y[IDX_FR] == y[IDX_FL] else _signed_force(p, v, y[IDX_FR], p.r_f, front)
    f_rl = _signed_force(p, v, y[IDX_RL], p.r_r, rear)
    f_rr = f_rl if y[IDX_RR] == y[IDX_RL] else _signed_force(p, v, y[IDX_RR], p.r_r, rear)

    dv = -(f_fl + f_fr + f_rl + f_rr) / p.m
    rates = [0.0 if v <= 0.0 and dv < 0.0 else dv, v]
    for idx, f, r, j, t in ((IDX_FL, f_fl, p.r_f, p.j_f, applied[0]), (IDX_FR, f_fr, p.r_f, p.j_f, applied[1]),
                            (IDX_RL, f_rl, p.r_r, p.j_r, applied[2]), (IDX_RR, f_rr, p.r_r, p.j_r, applied[3])):
        dw = (f * r - t) / j
        # stiction: brakes hold a stopped wheel but never reverse it
        rates.append(0.0 if y[idx] <= 0.0 and dw < 0.0 else dw)
    return rates


def vehicle_derivatives(p: VehicleParams, y: Sequence[float], a_x_prev: float, torques: WheelTorques,
                        tyre: TyreModel, mu_front: float, mu_rear: float) -> np.ndarray:
    """
    Time derivatives of the plant state.

    Loads come from the previous step's acceleration, which breaks the
    algebraic loop between load transfer and tyre force. A stopped wheel (or
    vehicle) cannot be driven backwards by the brakes.

    Args:
        p: Vehicle parameters
        y: State [v_x, x, w_fl, w_fr, w_rl, w_rr]
        a_x_prev: Lagged signed acceleration, m/s²
        torques: Applied wheel torques
        tyre: Tyre model
        mu_front: Road friction under the front axle
        mu_rear: Road friction under the rear axle

    Returns:
        dy/dt
    """
    loads = axle_loads(p, a_x_prev)
    applied = (
        torques.brake[0] - torques.drive[0],
        torques.brake[1] - torques.drive[1],
        torques.brake[2] + torques.epb[0],
        torques.brake[3] + torques.epb[1],
    )
    return np.array(_rates(p, y, force_curve(tyre, loads.front, mu_front), force_curve(tyre, loads.rear, mu_rear),
                           applied))


def clamp_state(y: Sequence[float]) -> List[float]:
    """Project speeds back onto v_x >= 0, w >= 0 after an integration step."""
    return [max(y[IDX_V], 0.0), y[IDX_X]] + [max(w, 0.0) for w in y[IDX_FL:IDX_RR + 1]]


class VehiclePlant:
    """
    The vehicle stepped at the plant rate with only the rear parking brakes applied.

    Axle loads and the two tyre curves are resolved once per step from the
    lagged acceleration and shared by the four RK4 stages.
    """

    def __init__(self, params: VehicleParams, tyre: TyreModel):
        self.params = params
        self.tyre = tyre

    def step(self, y: Sequence[float], a_x_prev: float, t_epb_rl: float, t_epb_rr: float,
             mu_front: float, mu_rear: float, dt: float) -> Tuple[List[float], AxleLoads]:
        """
        Advance the state by one step.

        Returns:
            Tuple (clamped next state, the loads used for the step)
        """
        p = self.params
        loads = axle_loads(p, a_x_prev)
        front = force_curve(self.tyre, loads.front, mu_front)
        rear = force_curve(self.tyre, loads.rear, mu_rear)
        applied = (0.0, 0.0, t_epb_rl, t_epb_rr)
        y_next, _ = rk4_step(lambda _t, yy: _rates(p, yy, front, rear, applied), 0.0, y, dt)
        return clamp_state(y_next), loads


def rear_braking_distance(p: VehicleParams, mu_x: float, v0: float) -> float:
    """
    Stopping distance with only the rear axle braking at constant utilized friction mu_x.

    Solves the rear-axle force balance with load transfer in closed form:
    deceleration = mu_x·g·a / (L + mu_x·h_g).
    """
    if mu_x <= 0.0:
        raise DomainError(f"utilized friction must be positive, got {mu_x}")
    decel = mu_x * p.g * p.a / (p.wheelbase + mu_x * p.h_g)
    return v0 ** 2 / (2.0 * decel)
