"""
Run metrics computed from a trace.

Steady-state windows are found per road segment. For an error series the
final band is the median absolute error over the second half of the segment;
the transient ends at the first sample from which the error stays within twice
that band for 0.2 s, and the steady window starts 0.2 s after that. Tracking
statistics only use samples where the ABS is active and the vehicle is above
TRACK_SPEED: below it the slip is ill-conditioned and the run is about to hand
over to full apply.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from epbabs.trace import (FLAG_DUTY_SAT, FLAG_QUIT, FLAG_TORQUE_CLAMP, TraceRecord, flag_mask,
                          trace_arrays)

logger = logging.getLogger(__name__)

SETTLE_HOLD = 0.2
LOCK_SLIP = 0.99
LOCK_MIN_SPEED = 1.0
MIN_TORQUE = 100.0
EXCURSION_WINDOW = 1.0
MU_BAND = 0.1
DUTY_DEADBAND = 0.02
TRACK_SPEED = 5.0


@dataclass
class RunMetrics:
    stopped: bool = False
    stopping_distance: float = 0.0
    stop_time: float = 0.0
    slip_error_max: float = 0.0
    slip_error_steady: float = 0.0
    slip_error_mean: float = 0.0
    mu_error_max: float = 0.0
    mu_error_steady: float = 0.0
    torque_error_max: float = 0.0
    torque_error_steady: float = 0.0
    smo_error_steady: float = 0.0
    lock_events: int = 0
    lyapunov_upper_violation: float = 0.0
    lyapunov_lower_violation: float = 0.0
    duty_reversals_per_s: float = 0.0
    switching_reversals_per_s: float = 0.0
    post_switch_slip_excursion: float = 0.0
    post_switch_slip_error_mean: float = 0.0
    mu_reconvergence_time: float = 0.0
    max_load_residual: float = 0.0

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


def segments(t: np.ndarray, mu: np.ndarray) -> List[Tuple[int, int]]:
    """Index ranges [start, stop) of constant road friction."""
    if t.size == 0:
        return []
    cuts = [0] + [i for i in range(1, mu.size) if mu[i] != mu[i - 1]] + [mu.size]
    return [(a, b) for a, b in zip(cuts[:-1], cuts[1:]) if b > a]


def settle_index(t: np.ndarray, err: np.ndarray, hold: float = SETTLE_HOLD) -> Optional[int]:
    """
    First index from which |err| stays within twice its final band for `hold` seconds.

    A run of in-band samples reaching the end of the series also counts.
    Returns None if the series never settles.
    """
    n = err.size
    if n == 0:
        return None
    band = 2.0 * float(np.median(np.abs(err[n // 2:])))
    inside = np.abs(err) <= band + 1e-12

    next_out = np.empty(n, dtype=int)
    nxt = n
    for i in range(n - 1, -1, -1):
        if not inside[i]:
            nxt = i
        next_out[i] = nxt

    for i in range(n):
        if not inside[i]:
            continue
        if next_out[i] == n or t[next_out[i] - 1] - t[i] >= hold:
            return i
    return None


def _steady_stats(t: np.ndarray, err: np.ndarray, valid: np.ndarray,
                  ranges: Sequence[Tuple[int, int]]) -> Tuple[float, float, float]:
    worst = 0.0
    steady_max = 0.0
    steady_sum = 0.0
    steady_n = 0
    for a, b in ranges:
        idx = np.nonzero(valid[a:b])[0] + a
        if idx.size == 0:
            continue
        e = np.abs(err[idx])
        worst = max(worst, float(e.max()))
        k = settle_index(t[idx], e)
        if k is None:
            continue
        start = int(np.searchsorted(t[idx], t[idx][k] + SETTLE_HOLD - 1e-12))
        tail = e[start:]
        if tail.size == 0:
            continue
        steady_max = max(steady_max, float(tail.max()))
        steady_sum += float(tail.sum())
        steady_n += tail.size
    return worst, steady_max, (steady_sum / steady_n if steady_n else 0.0)


def _steady_masks(t, err, valid, ranges) -> np.ndarray:
    mask = np.zeros(t.size, dtype=bool)
    for a, b in ranges:
        idx = np.nonzero(valid[a:b])[0] + a
        if idx.size == 0:
            continue
        k = settle_index(t[idx], np.abs(err[idx]))
        if k is not None:
            start = int(np.searchsorted(t[idx], t[idx][k] + SETTLE_HOLD - 1e-12))
            mask[idx[start:]] = True
    return mask


def lyapunov_violation(s: np.ndarray, valid: np.ndarray, phi: float) -> float:
    """
    Fraction of valid sample pairs where s lies outside the boundary layer and s·ds/dt > 0.

    ds/dt is the forward difference to the next sample; only pairs of
    consecutive valid samples count, and all of them form the denominator.
    """
    if s.size < 2:
        return 0.0
    pair = valid[:-1] & valid[1:]
    count = int(pair.sum())
    if count == 0:
        return 0.0
    growing = (np.abs(s[:-1]) > phi) & (s[:-1] * np.diff(s) > 0.0)
    return float(np.sum(growing & pair)) / count


def duty_reversals(duty: np.ndarray, deadband: float = DUTY_DEADBAND) -> int:
    """Sign changes of the duty, ignoring samples inside the deadband."""
    signs = np.sign(duty[np.abs(duty) > deadband])
    if signs.size < 2:
        return 0
    return int(np.sum(signs[1:] != signs[:-1]))


def switching_reversals(s: np.ndarray, phi: float) -> int:
    """
    Sign changes of a sliding surface between the two sides of its boundary layer.

    Samples inside [-phi, phi] keep the last side, so noise around zero does not count.
    """
    sides = np.sign(s[np.abs(s) > phi])
    if sides.size < 2:
        return 0
    return int(np.sum(sides[1:] != sides[:-1]))


def lock_events(lam: np.ndarray, v: np.ndarray) -> int:
    """Rising edges of a locked rear wheel while the vehicle still moves above 1 m/s."""
    locked = (lam >= LOCK_SLIP) & (v > LOCK_MIN_SPEED)
    if locked.size == 0:
        return 0
    return int(locked[0]) + int(np.sum(locked[1:] & ~locked[:-1]))


def compute_metrics(trace: Sequence[TraceRecord], phi_s: float = 0.01, phi_t: float = 5.0,
                    load_residual: float = 0.0, v_stop: float = 0.1,
                    track_speed: float = TRACK_SPEED) -> RunMetrics:
    """
    Summarise a run.

    Args:
        trace: Trace records, one per control period
        phi_s: Slip-surface boundary layer
        phi_t: Torque-surface boundary layer, N·m
        load_residual: Largest relative load-conservation residual seen by the plant
        v_stop: Speed below which the vehicle counts as stopped, m/s
        track_speed: Speed below which tracking statistics are not collected, m/s

    Returns:
        RunMetrics
    """
    m = RunMetrics(max_load_residual=load_residual)
    if not trace:
        return m

    c = trace_arrays(trace)
    t = c['t']
    quit_mask = flag_mask(trace, FLAG_QUIT)
    active = ~quit_mask & (c['v_x'] >= track_speed)
    ranges = segments(t, c['mu_true'])

    m.stopped = bool(c['v_x'][-1] < v_stop)
    m.stopping_distance = float(c['x'][-1])
    m.stop_time = float(t[-1])

    slip_err = (c['lam_r'] - c['lam_rd']) / np.maximum(c['lam_rd'], 1e-9)
    m.slip_error_max, m.slip_error_steady, m.slip_error_mean = _steady_stats(t, slip_err, active, ranges)

    mu_err = (c['mu_hat'] - c['mu_true']) / c['mu_true']
    m.mu_error_max, m.mu_error_steady, _ = _steady_stats(t, mu_err, active, ranges)

    loaded = active & (c['t_cmd'] >= MIN_TORQUE)
    torque_err = (c['t_act'] - c['t_cmd']) / np.maximum(c['t_cmd'], 1e-9)
    m.torque_error_max, m.torque_error_steady, _ = _steady_stats(t, torque_err, loaded, ranges)

    clamping = active & (c['t_act'] >= MIN_TORQUE)
    smo_err = (c['t_hat'] - c['t_act']) / np.maximum(c['t_act'], 1e-9)
    _, m.smo_error_steady, _ = _steady_stats(t, smo_err, clamping, ranges)

    m.lock_events = lock_events(c['lam_r'], c['v_x'])

    duty_sat = flag_mask(trace, FLAG_DUTY_SAT)
    upper_valid = active & ~flag_mask(trace, FLAG_TORQUE_CLAMP) & ~duty_sat
    lower_valid = active & ~duty_sat
    m.lyapunov_upper_violation = lyapunov_violation(c['s_r'], upper_valid, phi_s)
    m.lyapunov_lower_violation = lyapunov_violation(c['s_t'], lower_valid, phi_t)

    steady = _steady_masks(t, torque_err, loaded, ranges)
    if steady.any():
        span = float(np.sum(steady)) * (t[1] - t[0] if t.size > 1 else 1.0)
        m.duty_reversals_per_s = duty_reversals(c['duty'][steady]) / span if span > 0 else 0.0

    period = float(t[1] - t[0]) if t.size > 1 else 1.0
    n_loaded = int(loaded.sum())
    if n_loaded:
        m.switching_reversals_per_s = switching_reversals(c['s_t'][loaded], phi_t) / (n_loaded * period)

    excursion = 0.0
    error_sum = 0.0
    error_n = 0
    reconverge = 0.0
    for a, b in ranges[1:]:
        t0 = t[a]
        window = np.arange(a, b)
        near = window[(t[window] <= t0 + EXCURSION_WINDOW) & active[window]]
        if near.size:
            gap = np.abs(c['lam_r'][near] - c['lam_rd'][near])
            excursion = max(excursion, float(gap.max()))
            error_sum += float(gap.sum())
            error_n += gap.size
        good = np.abs(mu_err[window]) <= MU_BAND
        hit = np.nonzero(good & active[window])[0]
        reconverge = max(reconverge, float(t[window[hit[0]]] - t0) if hit.size else float(t[b - 1] - t0))
    m.post_switch_slip_excursion = excursion
    m.post_switch_slip_error_mean = error_sum / error_n if error_n else 0.0
    m.mu_reconvergence_time = reconverge

    return m
