"""
Sliding-mode observer for the motor load torque.

The observer runs the motor model with an extra torque state that is assumed
constant over a control period:

    dw_hat/dt = (k_t i_a - c_n w_hat - T_hat) / J_n + U
    dT_hat/dt = g U
    U = k sat((w_hat - w) / phi)

With k < 0 the speed error e1 = w_hat - w is driven into the boundary layer.
Once it slides, U carries the torque error e2 = T_hat - T_r divided by J_n and
the torque error decays as exp(g t / J_n), so g < 0 sets the convergence time
constant J_n / |g|. The gain |k| has to exceed the largest torque error divided
by J_n for the sliding condition to hold.

The load torque maps back to brake torque only while the motor turns: a
stationary self-locked motor sees a static reaction torque that says nothing
about the clamp. LoadTorqueObserver therefore rebuilds the brake torque from
the integrated motor angle and uses the load-torque estimate only to trim the
offset of that angle while the motor applies.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from epbabs.actuator import FORWARD, BrakeTorqueMap, ClampGeometry
from epbabs.exceptions import ConfigurationError
from epbabs.utils import param

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObserverGains:
    """
    Observer tuning.

    g is derived as -J_n / torque_time_constant unless given explicitly.
    """

    k: float = param(-5e4, 'sliding_gain_radps2')
    g: Optional[float] = param(None, 'feedback_gain_kgm2_per_s')
    torque_time_constant: float = param(0.005, 'torque_time_constant_s')
    phi: float = param(10.0, 'boundary_layer_radps')
    t_ctrl: float = param(1e-3, 'period_s')
    substeps: int = param(10, 'substeps')
    moving_speed: float = param(0.5, 'moving_speed_radps')
    anchor_time_constant: float = param(0.1, 'anchor_time_constant_s')
    anchor_samples: int = param(15, 'anchor_samples')

    def feedback_gain(self, j_n: float) -> float:
        return self.g if self.g is not None else -j_n / self.torque_time_constant

    def validate(self) -> None:
        if self.k >= 0:
            raise ConfigurationError(f"observer sliding gain must be negative, got {self.k}")
        if self.g is not None and self.g >= 0:
            raise ConfigurationError(f"observer feedback gain must be negative, got {self.g}")
        if self.torque_time_constant <= 0 or self.phi <= 0 or self.t_ctrl <= 0:
            raise ConfigurationError("observer time constant, boundary layer and period must be positive")
        if self.anchor_time_constant < self.t_ctrl or self.anchor_samples < 1:
            raise ConfigurationError(
                f"anchor time constant must cover a period and anchor samples must be positive, "
                f"got {self.anchor_time_constant} s, {self.anchor_samples}")
        if self.substeps < 1:
            raise ConfigurationError(f"observer substeps must be at least 1, got {self.substeps}")


@dataclass(frozen=True)
class ObserverState:
    """Estimated motor speed and load torque, plus the last accepted measurement."""

    omega_hat: float = 0.0
    t_hat: float = 0.0
    omega_prev: Optional[float] = None
    i_prev: Optional[float] = None
    frozen: bool = False


def saturation(s_val: float, phi: float) -> float:
    """Boundary-layer saturation: s/phi inside [-phi, phi], ±1 outside."""
    if s_val > phi:
        return 1.0
    if s_val < -phi:
        return -1.0
    return s_val / phi


def smo_step(gains: ObserverGains, state: ObserverState, omega_meas: float, i_meas: float,
             j_n: float, c_n: float, k_t: float, dt: Optional[float] = None) -> ObserverState:
    """
    Advance the observer over one control period.

    The period is split into forward-Euler substeps; the measurements are
    interpolated linearly from the previous sample to the current one.

    Args:
        gains: Observer gains
        state: Current observer state
        omega_meas: Measured motor speed, rad/s
        i_meas: Measured armature current, A
        j_n: Motor-shaft inertia, kg·m²
        c_n: Motor-shaft damping, N·m·s/rad
        k_t: Torque constant, N·m/A
        dt: Period, s (defaults to gains.t_ctrl)

    Returns:
        The next ObserverState; a non-finite measurement returns the state
        unchanged with frozen set
    """
    if not (math.isfinite(omega_meas) and math.isfinite(i_meas)):
        logger.warning("Observer frozen on non-finite measurement (omega=%s, i=%s)", omega_meas, i_meas)
        return replace(state, frozen=True)

    period = gains.t_ctrl if dt is None else dt
    h = period / gains.substeps
    g = gains.feedback_gain(j_n)
    w0 = omega_meas if state.omega_prev is None else state.omega_prev
    i0 = i_meas if state.i_prev is None else state.i_prev

    w_hat, t_hat = state.omega_hat, state.t_hat
    for n in range(gains.substeps):
        frac = n / gains.substeps
        w = w0 + frac * (omega_meas - w0)
        i_a = i0 + frac * (i_meas - i0)
        u = gains.k * saturation(w_hat - w, gains.phi)
        w_hat, t_hat = (w_hat + h * ((k_t * i_a - c_n * w_hat - t_hat) / j_n + u),
                        t_hat + h * g * u)

    return ObserverState(w_hat, t_hat, omega_meas, i_meas, frozen=False)


class LoadTorqueObserver:
    """
    Observer plus brake-torque reconstruction.

    The brake torque is rebuilt from the motor angle through the caliper law,
    with the angle integrated from the measured speed. While the motor applies
    steadily, the load-torque estimate mapped through the forward branch of the
    screw law is taken as the reference and a slow bias pulls the kinematic
    estimate onto it; at standstill or while releasing the bias is held.

    Attributes:
        state: Current ObserverState
        t_epb_hat: Latest brake-torque estimate, N·m
        angle: Integrated motor angle, rad
        bias: Anchoring correction added to the kinematic brake torque, N·m
    """

    def __init__(self, gains: ObserverGains, j_n: float, c_n: float, k_t: float, tmap: BrakeTorqueMap,
                 geometry: ClampGeometry):
        gains.validate()
        self.gains = gains
        self.j_n = j_n
        self.c_n = c_n
        self.k_t = k_t
        self.tmap = tmap
        self.geometry = geometry
        self.state = ObserverState()
        self.t_epb_hat = 0.0
        self.angle = 0.0
        self.bias = 0.0
        self.forward_run = 0

    def anchor_torque(self, t_hat: float, omega: float) -> float:
        """
        Brake torque implied by a load-torque estimate on the forward branch, N·m.

        The estimate lags the true load by the observer time constant, so the
        torque rise over that lag is added back before inverting the screw law.
        """
        g = self.geometry
        lag = self.gains.torque_time_constant * self.tmap.k_forward * g.k_c * g.per_rad * omega
        return self.tmap.brake_torque_from_load(t_hat + lag, FORWARD)

    def update(self, omega_meas: float, i_meas: float) -> Tuple[float, float, bool]:
        """
        Feed one control-period sample.

        Returns:
            Tuple (load torque estimate, brake torque estimate, frozen flag)
        """
        omega_last = self.state.omega_prev
        self.state = smo_step(self.gains, self.state, omega_meas, i_meas, self.j_n, self.c_n, self.k_t)
        if self.state.frozen:
            return self.state.t_hat, self.t_epb_hat, True

        w0 = omega_meas if omega_last is None else omega_last
        self.angle += 0.5 * (w0 + omega_meas) * self.gains.t_ctrl
        kinematic = self.geometry.contact_torque(self.angle, omega_meas)

        self.forward_run = self.forward_run + 1 if omega_meas > self.gains.moving_speed else 0
        if self.forward_run >= self.gains.anchor_samples and kinematic + self.bias > 0.0:
            reference = self.anchor_torque(self.state.t_hat, omega_meas)
            rate = self.gains.t_ctrl / self.gains.anchor_time_constant
            self.bias += rate * (reference - (kinematic + self.bias))

        self.t_epb_hat = max(0.0, kinematic + self.bias)
        return self.state.t_hat, self.t_epb_hat, False


def torque_error_decay_rate(gains: ObserverGains, j_n: float, c_n: float, k_t: float,
                            load_torque: float = 0.2, omega: float = 100.0,
                            window: Tuple[float, float] = (0.005, 0.025)) -> float:
    """
    Fit the decay rate of the torque error after a load-torque step.

    The motor runs at constant speed against load_torque while the observer
    starts from a zero torque estimate. The rate is the negative log-slope of
    |T_hat - T_r| over the time window, 1/s; the design value is |g| / J_n.
    """
    i_a = (load_torque + c_n * omega) / k_t
    state = ObserverState(omega_hat=omega, t_hat=0.0)
    periods = int(math.ceil(window[1] / gains.t_ctrl))

    times, errors = [], []
    for n in range(1, periods + 1):
        state = smo_step(gains, state, omega, i_a, j_n, c_n, k_t)
        t = n * gains.t_ctrl
        err = abs(state.t_hat - load_torque)
        if window[0] <= t <= window[1] + 1e-12 and err > 0.0:
            times.append(t)
            errors.append(math.log(err))
    if len(times) < 2:
        raise ConfigurationError("decay window holds fewer than two observer samples")
    return float(-np.polyfit(times, errors, 1)[0])
