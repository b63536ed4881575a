"""
Closed-loop braking simulation.

The plant (vehicle, tyres and both rear actuators) advances with fixed RK4
steps of dt_plant. Sensors are sampled, and the observer, estimator and
controllers run, once per control period t_ctrl; their outputs are held over
the plant steps of the period. Both rear wheels receive the same torque
command unless per-wheel control is enabled.
"""

import logging
from dataclasses import dataclass, replace
from typing import List, Sequence

import numpy as np

from epbabs.actuator import EpbActuator
from epbabs.controllers import (LowerConstants, Mode, PidState, SurfaceState, lower_smc, pid_baseline,
                                supervisor, upper_smc)
from epbabs.estimator import FrictionEstimator
from epbabs.exceptions import DomainError, NumericalAbort
from epbabs.metrics import RunMetrics, compute_metrics
from epbabs.observer import LoadTorqueObserver
from epbabs.scenario import RoadSegment, ScenarioSpec
from epbabs.trace import (FLAG_DUTY_SAT, FLAG_HARD_STOP, FLAG_LOAD_CLAMP, FLAG_LOAD_GUARD,
                          FLAG_OBSERVER_FROZEN, FLAG_QUIT, FLAG_TORQUE_CLAMP, TraceRecord, join_flags)
from epbabs.tyre import MU_MAX, MU_MIN, build_lookup, initial_slope, tyre_force
from epbabs.utils import DerivativeFilter, clamp, ensure_finite
from epbabs.vehicle import IDX_RL, IDX_RR, IDX_V, IDX_X, MAX_ACCEL, VehiclePlant, VehicleState, axle_loads, slip_ratio

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    scenario: ScenarioSpec
    trace: List[TraceRecord]
    metrics: RunMetrics
    torque_limit: float


def road_mu(schedule: Sequence[RoadSegment], t: float) -> float:
    """Road friction at time t: right-continuous steps, last value held."""
    mu = schedule[0].mu
    for seg in schedule:
        if t < seg.start:
            break
        mu = seg.mu
    return mu


def actuator_torque_limit(actuator: EpbActuator) -> float:
    """Brake torque the actuator holds at stall current, N·m."""
    m = actuator.motor
    tmap = actuator.tmap
    stall = m.k_t * m.v_a / m.r_a
    return max(0.0, (stall - tmap.t_s_forward) / tmap.k_forward * tmap.torque_per_force)


class _WheelLoop:
    """Actuator, observer and torque loop of one rear wheel."""

    def __init__(self, spec: ScenarioSpec):
        p = spec.params
        self.actuator = EpbActuator(p.motor, p.drivetrain, p.screw, p.caliper, p.plant.stiction_speed)
        act = self.actuator
        self.observer = LoadTorqueObserver(replace(p.observer, t_ctrl=spec.t_ctrl), act.j_n, act.c_n,
                                           p.motor.k_t, act.tmap, act.geometry)
        backward = act.inertia_damping(-1)
        self.consts = LowerConstants.build(p.motor, (act.j_n, backward[0]), (act.c_n, backward[1]),
                                           act.geometry.torque_per_rad, act.tmap)
        self.gains = p.lower
        self.cmd_rate = DerivativeFilter(spec.t_ctrl, p.lower.derivative_tau)
        self.omega_meas = 0.0
        self.t_epb_hat = 0.0
        self.duty = 0.0
        self.s_t = 0.0
        self.saturated = False

    def observe(self, omega_meas: float, i_meas: float) -> bool:
        _, self.t_epb_hat, frozen = self.observer.update(omega_meas, i_meas)
        if not frozen:
            self.omega_meas = omega_meas
        return frozen

    def control(self, t_d: float) -> float:
        t_d_dot = self.cmd_rate.update(t_d)
        self.duty, self.s_t, self.saturated = lower_smc(
            self.t_epb_hat, t_d, t_d_dot, self.omega_meas, self.gains, self.consts)
        return self.duty


def _noisy(rng: np.random.Generator, value: float, sigma: float) -> float:
    return value + rng.normal(0.0, sigma) if sigma > 0.0 else value


def run(spec: ScenarioSpec) -> RunResult:
    """
    Simulate one braking run.

    Args:
        spec: Scenario

    Returns:
        RunResult with one trace record per control period

    Raises:
        ScenarioError: Invalid scenario
        ConfigurationError: A parameter group violates its invariants
        NumericalAbort: The plant or controller state became non-finite; the
            exception carries the trace recorded so far
    """
    spec.validate()
    p = spec.params
    vp = p.vehicle
    vp.validate()
    p.tyre.validate()
    p.upper.validate()
    p.lower.validate()
    p.pid.validate()

    tyre = build_lookup(p.tyre) if p.plant.tyre_source == 'table' else p.tyre
    t_ctrl = spec.t_ctrl
    dt = spec.dt_plant

    est_cfg = replace(p.estimator, t_ctrl=t_ctrl).resolved(initial_slope(tyre, axle_loads(vp, 0.0).rear))
    estimator = FrictionEstimator(est_cfg, vp, tyre)
    wheels = [_WheelLoop(spec), _WheelLoop(spec)]
    t_max = actuator_torque_limit(wheels[0].actuator)

    rng = np.random.default_rng(spec.seed)
    noise = spec.noise
    plant = VehiclePlant(vp, tyre)
    y = VehicleState.rolling(vp, spec.v0).to_list()
    a_prev = 0.0
    weight = vp.m * vp.g

    lanes = 2 if spec.per_wheel_control else 1
    surfaces = [SurfaceState() for _ in range(lanes)]
    pid_states = [PidState() for _ in range(lanes)]
    lam_d_rate = DerivativeFilter(t_ctrl, p.upper.derivative_tau)
    speed_rate = DerivativeFilter(t_ctrl, p.upper.derivative_tau)

    trace: List[TraceRecord] = []
    commands = [0.0, 0.0]
    pending_flags: List[str] = []
    load_residual = 0.0
    step = 0

    logger.info("Running %s: v0=%.2f m/s, controller=%s, dt_plant=%g s", spec.name, spec.v0, spec.controller, dt)

    try:
        for k in range(spec.periods + 1):
            t = k * t_ctrl
            mu = road_mu(spec.road, t)
            flags = pending_flags
            pending_flags = []

            v_meas = max(_noisy(rng, y[IDX_V], noise.speed), 0.0)
            w_meas = [max(_noisy(rng, y[idx], noise.wheel_speed), 0.0) for idx in (IDX_RL, IDX_RR)]
            lams = [slip_ratio(v_meas, w, vp.r_r, vp.v_eps, vp.v_floor) for w in w_meas]
            lam_meas = 0.5 * (lams[0] + lams[1])
            lam_true = 0.5 * (slip_ratio(y[IDX_V], y[IDX_RL], vp.r_r, vp.v_eps, vp.v_floor)
                              + slip_ratio(y[IDX_V], y[IDX_RR], vp.r_r, vp.v_eps, vp.v_floor))

            for wl in wheels:
                st = wl.actuator.state
                if wl.observe(_noisy(rng, st.omega_m, noise.motor_speed), _noisy(rng, st.i_a, noise.current)):
                    flags.append(FLAG_OBSERVER_FROZEN)

            mu_hat, guarded = estimator.update(v_meas, lam_meas)
            if guarded:
                flags.append(FLAG_LOAD_GUARD)
            lam_d = estimator.target_slip
            lam_d_dot = lam_d_rate.update(lam_d)
            decel = max(-speed_rate.update(v_meas), 0.0)

            stopped = y[IDX_V] < vp.v_eps
            mode = supervisor(v_meas, p.plant.quit_speed, vp.v_eps)

            if not stopped:
                if mode is Mode.ACTIVE:
                    fz_hat = axle_loads(vp, -min(decel, MAX_ACCEL)).rear
                    mu_model = clamp(mu_hat, MU_MIN, MU_MAX)
                    lane_slips = lams if lanes == 2 else [lam_meas]
                    hats = ([wl.t_epb_hat for wl in wheels] if lanes == 2
                            else [0.5 * (wheels[0].t_epb_hat + wheels[1].t_epb_hat)])
                    lane_cmds = []
                    for j, lam in enumerate(lane_slips):
                        if spec.controller == 'smc':
                            f_xr = tyre_force(tyre, lam, fz_hat, mu_model)
                            cmd, surfaces[j], clamped = upper_smc(
                                lam, lam_d, lam_d_dot, v_meas, f_xr, 2.0 * f_xr, vp.j_r, vp.r_r, vp.m,
                                p.upper, surfaces[j], t_max, t_ctrl, hats[j])
                            if clamped:
                                flags.append(FLAG_TORQUE_CLAMP)
                        else:
                            cmd, pid_states[j] = pid_baseline(lam, lam_d, p.pid, pid_states[j], t_ctrl, t_max)
                        lane_cmds.append(cmd)
                    commands = lane_cmds if lanes == 2 else lane_cmds * 2
                else:
                    commands = [t_max, t_max]
                    flags.append(FLAG_QUIT)

                for wl, cmd in zip(wheels, commands):
                    wl.control(cmd)
                    if wl.saturated:
                        flags.append(FLAG_DUTY_SAT)

            states = [wl.actuator.state for wl in wheels]
            trace.append(TraceRecord(
                t=t, v_x=float(y[IDX_V]), x=float(y[IDX_X]),
                omega_rl=float(y[IDX_RL]), omega_rr=float(y[IDX_RR]),
                lam_r=lam_true, lam_rd=lam_d, mu_true=mu, mu_hat=mu_hat,
                t_cmd=0.5 * (commands[0] + commands[1]),
                t_act=0.5 * (states[0].t_epb + states[1].t_epb),
                t_hat=0.5 * (wheels[0].t_epb_hat + wheels[1].t_epb_hat),
                f_q=0.5 * (states[0].f_q + states[1].f_q),
                i_a=0.5 * (states[0].i_a + states[1].i_a),
                omega_m=0.5 * (states[0].omega_m + states[1].omega_m),
                duty=0.5 * (wheels[0].duty + wheels[1].duty),
                s_r=surfaces[0].s,
                s_t=0.5 * (wheels[0].s_t + wheels[1].s_t),
                flags=join_flags(flags),
            ))

            if stopped or k == spec.periods:
                break

            duties = [wl.duty for wl in wheels]
            for n in range(spec.substeps):
                t_sub = t + n * dt
                mu_sub = road_mu(spec.road, t_sub)
                y_next, loads = plant.step(y, a_prev, states[0].t_epb, states[1].t_epb, mu_sub, mu_sub, dt)
                ensure_finite(y_next, 'plant state', step)
                if loads.clamped:
                    pending_flags.append(FLAG_LOAD_CLAMP)
                load_residual = max(load_residual, abs(2.0 * (loads.front + loads.rear) - weight) / weight)
                a_prev = (y_next[IDX_V] - y[IDX_V]) / dt
                y = y_next

                for wl, duty in zip(wheels, duties):
                    st = wl.actuator.step(duty, dt)
                    ensure_finite((st.theta_m, st.omega_m, st.i_a), 'actuator state', step)
                    if wl.actuator.drain_events():
                        pending_flags.append(FLAG_HARD_STOP)
                states = [wl.actuator.state for wl in wheels]
                step += 1

    except (NumericalAbort, DomainError) as e:
        logger.error("Numerical abort in %s at step %d: %s", spec.name, step, e)
        raise NumericalAbort(f"{spec.name}: {e}", step=step, trace=trace,
                             last_state=VehicleState.from_list(y, a_prev)) from e

    metrics = compute_metrics(trace, p.upper.phi_s, p.lower.phi_t, load_residual, vp.v_eps)
    logger.info("Finished %s: stopped=%s distance=%.2f m time=%.3f s", spec.name, metrics.stopped,
                metrics.stopping_distance, metrics.stop_time)
    return RunResult(spec, trace, metrics, t_max)
