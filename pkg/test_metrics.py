import numpy as np
import pytest

from epbabs.metrics import (RunMetrics, compute_metrics, duty_reversals, lock_events, lyapunov_violation,
                            segments, settle_index, switching_reversals)
from epbabs.trace import TRACE_COLUMNS, TraceRecord, join_flags, trace_arrays

DT = 1e-3


def record(n, **kw):
    t = n * DT
    values = dict(t=t, v_x=17.0 - 3.0 * t, x=17.0 * t, omega_rl=40.0, omega_rr=40.0, lam_r=0.17, lam_rd=0.17,
                  mu_true=0.8, mu_hat=0.8, t_cmd=500.0, t_act=500.0, t_hat=500.0, f_q=7000.0, i_a=5.0,
                  omega_m=0.0, duty=0.0, s_r=0.0, s_t=0.0)
    values.update(kw)
    return TraceRecord(**values)


def test_trace_columns_and_flags():
    assert TRACE_COLUMNS[0] == 't' and TRACE_COLUMNS[-1] == 'flags'
    assert join_flags(['quit', 'duty_sat', 'quit']) == 'duty_sat|quit'
    r = record(0, flags='duty_sat|quit')
    assert r.has('quit') and not r.has('hard_stop')
    assert not record(0).has('quit')
    arrays = trace_arrays([record(0), record(1)])
    assert arrays['t'][1] == pytest.approx(DT)
    assert 'flags' not in arrays


def test_segments():
    t = np.arange(4) * DT
    assert segments(t, np.array([0.8, 0.8, 0.2, 0.2])) == [(0, 2), (2, 4)]
    assert segments(np.zeros(0), np.zeros(0)) == []


def test_settle_index():
    t = np.arange(100) * 0.01
    err = np.array([1.0] * 10 + [0.01] * 90)
    assert settle_index(t, err) == 10
    late = err.copy()
    late[25] = 1.0
    assert settle_index(t, late) == 26
    assert settle_index(np.zeros(0), np.zeros(0)) is None


def test_lyapunov_violation():
    valid = np.ones(3, dtype=bool)
    assert lyapunov_violation(np.array([1.0, 0.5, 0.25]), valid, 0.01) == 0.0
    assert lyapunov_violation(np.array([1.0, 2.0, 3.0]), valid, 0.01) == 1.0
    assert lyapunov_violation(np.array([0.005, 0.008, 0.009]), valid, 0.01) == 0.0
    assert lyapunov_violation(np.array([1.0, 2.0, 3.0]), np.array([True, False, True]), 0.01) == 0.0


def test_duty_reversals_ignore_deadband():
    assert duty_reversals(np.array([0.5, -0.5, 0.01, 0.5])) == 2
    assert duty_reversals(np.array([0.01, -0.01])) == 0


def test_lock_events_count_rising_edges_above_walking_speed():
    lam = np.array([0.0, 1.0, 1.0, 0.0, 1.0])
    assert lock_events(lam, np.full(5, 5.0)) == 2
    assert lock_events(lam, np.full(5, 0.5)) == 0


def test_empty_trace():
    assert compute_metrics([], load_residual=1e-12) == RunMetrics(max_load_residual=1e-12)


def test_perfect_tracking():
    trace = [record(n) for n in range(400)]
    m = compute_metrics(trace)
    assert not m.stopped
    assert m.stopping_distance == pytest.approx(17.0 * 399 * DT)
    assert m.stop_time == pytest.approx(399 * DT)
    assert m.slip_error_max == 0.0
    assert m.mu_error_max == 0.0
    assert m.torque_error_max == 0.0
    assert m.lock_events == 0
    assert m.lyapunov_upper_violation == 0.0


def test_stopped_run():
    trace = [record(0), record(1, v_x=0.05, x=12.5)]
    m = compute_metrics(trace)
    assert m.stopped
    assert m.stopping_distance == 12.5


def test_slip_transient_then_steady():
    trace = [record(n, lam_r=0.34 if n < 50 else 0.17) for n in range(400)]
    m = compute_metrics(trace)
    assert m.slip_error_max == pytest.approx(1.0)
    assert m.slip_error_steady == 0.0


def test_full_apply_samples_are_not_scored():
    trace = [record(n, lam_r=0.9, flags='quit') if n >= 300 else record(n) for n in range(400)]
    assert compute_metrics(trace).slip_error_max == 0.0


def test_reconvergence_after_friction_drop():
    trace = [record(n, mu_true=0.8 if n < 100 else 0.2, mu_hat=0.8 if n < 150 else 0.2) for n in range(400)]
    m = compute_metrics(trace)
    assert m.mu_reconvergence_time == pytest.approx(0.05)
    assert m.mu_error_max == pytest.approx(3.0)
    assert m.post_switch_slip_excursion == 0.0


def test_lyapunov_counts_every_valid_pair():
    s = np.array([1.0, 0.5, 1.0, 0.001])
    assert lyapunov_violation(s, np.ones(4, dtype=bool), 0.01) == pytest.approx(1.0 / 3.0)


def test_switching_reversals_keep_side_inside_layer():
    assert switching_reversals(np.array([10.0, -10.0, 2.0, -3.0, 10.0, -3.0]), 5.0) == 2
    assert switching_reversals(np.array([4.0, -4.0, 4.0]), 5.0) == 0


def test_switching_reversal_rate():
    trace = [record(n, s_t=10.0 if n % 2 else -10.0) for n in range(400)]
    assert compute_metrics(trace).switching_reversals_per_s == pytest.approx(399 / 0.4)


def test_low_speed_samples_are_not_scored():
    trace = [record(n, v_x=4.0, lam_r=0.34) for n in range(400)]
    m = compute_metrics(trace)
    assert m.slip_error_max == 0.0
    assert compute_metrics(trace, track_speed=3.0).slip_error_max == pytest.approx(1.0)


def test_steady_window_starts_after_settling_hold():
    errors = [0.5] * 50 + [0.125] * 200 + [0.0625] * 150
    trace = [record(n, lam_rd=0.25, lam_r=0.25 * (1.0 + e)) for n, e in enumerate(errors)]
    m = compute_metrics(trace)
    assert m.slip_error_max == pytest.approx(0.5)
    assert m.slip_error_steady == pytest.approx(0.0625)


def test_post_switch_mean_error():
    trace = [record(n, mu_true=0.8 if n < 100 else 0.2, mu_hat=0.8 if n < 100 else 0.2,
                    lam_r=0.20 if 100 <= n < 110 else 0.17) for n in range(400)]
    m = compute_metrics(trace)
    assert m.post_switch_slip_excursion == pytest.approx(0.03)
    assert m.post_switch_slip_error_mean == pytest.approx(10 * 0.03 / 300)
    assert m.mu_reconvergence_time == 0.0
