"""
Human-readable run, comparison and suite reports.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from epbabs.metrics import RunMetrics

RULE = "=" * 72


@dataclass
class AcceptanceRow:
    """
    One acceptance check.

    Attributes:
        criterion: Acceptance criterion number
        quantity: What was measured
        measured: Measured value
        limit: Pass condition as text
        reference: Reference figure, or '-' when there is none
        passed: Whether the measured value meets the limit
    """

    criterion: int
    quantity: str
    measured: float
    limit: str
    reference: str
    passed: bool


@dataclass
class SuiteEvidence:
    """Everything the suite measured, collected for the acceptance rows."""

    runs: Dict[str, RunMetrics]
    pid_high_to_low: RunMetrics
    tyre_zero_force: float
    tyre_peak_mu: Tuple[float, float]
    tyre_lookup_error: float
    tyre_seconds: float
    smo_decay_rate: float
    smo_design_rate: float
    optimal_slip_high_mu: float
    max_abs_duty: float
    oracle_distance: float
    refined_distance: float
    deterministic: bool
    suite_seconds: float


def _fmt(value: float) -> str:
    if isinstance(value, bool):
        return 'yes' if value else 'no'
    return f"{value:.6g}"


def format_metrics(name: str, metrics: RunMetrics) -> str:
    """
    Flat key/value block for one run.

    Args:
        name: Scenario name
        metrics: Run metrics

    Returns:
        Report text
    """
    lines = [RULE, f"Run metrics: {name}", RULE]
    width = max(len(k) for k in metrics.as_dict())
    for key, value in metrics.as_dict().items():
        lines.append(f"{key:<{width}}  {_fmt(value)}")
    lines.append(RULE)
    return "\n".join(lines)


def comparison_passed(smc: RunMetrics, pid: RunMetrics) -> bool:
    """Both runs stopped and SMC stopped no later in distance than PID."""
    return smc.stopped and pid.stopped and smc.stopping_distance <= pid.stopping_distance


def format_comparison(name: str, smc: RunMetrics, pid: RunMetrics) -> str:
    """Side-by-side SMC/PID summary with distance and time deltas."""
    lines = [RULE, f"SMC vs PID: {name}", RULE]
    lines.append(f"{'metric':<28}{'smc':>14}{'pid':>14}{'pid - smc':>14}")
    for key in ('stopping_distance', 'stop_time', 'slip_error_max', 'slip_error_steady',
                'post_switch_slip_excursion', 'post_switch_slip_error_mean', 'lock_events'):
        a = getattr(smc, key)
        b = getattr(pid, key)
        lines.append(f"{key:<28}{_fmt(a):>14}{_fmt(b):>14}{_fmt(b - a):>14}")
    lines.append("")
    lines.append(f"Result: {'PASS' if comparison_passed(smc, pid) else 'FAIL'}"
                 f" (requires both stopped and distance(smc) <= distance(pid))")
    lines.append(RULE)
    return "\n".join(lines)


def _row(criterion: int, quantity: str, measured: float, limit: str, passed: bool,
         reference: str = '-') -> AcceptanceRow:
    if not isinstance(measured, bool):
        measured = float(measured)
    return AcceptanceRow(criterion, quantity, measured, limit, reference, bool(passed))


def acceptance_rows(ev: SuiteEvidence) -> List[AcceptanceRow]:
    """
    Map the suite evidence onto the acceptance criteria.

    Rows appear in criterion order and every criterion has at least one row.
    """
    single = ev.runs['single_mu']
    h2l = ev.runs['high_to_low']
    sched = ev.runs['estimator_schedule']
    lo, hi = ev.tyre_peak_mu
    rate_err = abs(ev.smo_decay_rate - ev.smo_design_rate) / ev.smo_design_rate
    worst_residual = max(m.max_load_residual for m in list(ev.runs.values()) + [ev.pid_high_to_low])
    upper_violation = max(m.lyapunov_upper_violation for m in ev.runs.values())
    lower_violation = max(m.lyapunov_lower_violation for m in ev.runs.values())
    oracle_dev = abs(single.stopping_distance - ev.oracle_distance) / ev.oracle_distance
    refine_dev = (abs(ev.refined_distance - single.stopping_distance) / single.stopping_distance
                  if single.stopping_distance > 0 else 0.0)
    pid_ratio = (ev.pid_high_to_low.post_switch_slip_error_mean / h2l.post_switch_slip_error_mean
                 if h2l.post_switch_slip_error_mean > 0 else float('inf'))

    return [
        _row(1, "tyre force at zero slip, N", ev.tyre_zero_force, "== 0", ev.tyre_zero_force == 0.0),
        _row(1, "tyre base peak mu, min over 2-6 kN", lo, ">= 0.95", lo >= 0.95),
        _row(1, "tyre base peak mu, max over 2-6 kN", hi, "<= 1.05", hi <= 1.05),
        _row(1, "tyre lookup error / D, 1e4 queries", ev.tyre_lookup_error, "<= 0.01", ev.tyre_lookup_error <= 0.01),
        _row(1, "tyre checks runtime, s", ev.tyre_seconds, "< 5", ev.tyre_seconds < 5.0),
        _row(2, "load conservation residual, all runs", worst_residual, "<= 1e-9", worst_residual <= 1e-9),
        _row(3, "observer decay rate vs |g|/J_n", rate_err, "<= 0.10", rate_err <= 0.10),
        _row(3, "observer steady brake-torque error", single.smo_error_steady, "<= 0.05",
             single.smo_error_steady <= 0.05, '0.026'),
        _row(4, "estimator steady mu error", sched.mu_error_steady, "<= 0.10", sched.mu_error_steady <= 0.10,
             '0.052'),
        _row(4, "estimator re-convergence after switch, s", sched.mu_reconvergence_time, "< 0.3",
             sched.mu_reconvergence_time < 0.3),
        _row(5, "steady slip tracking error", single.slip_error_steady, "<= 0.10",
             single.slip_error_steady <= 0.10, '0.063'),
        _row(5, "lock events above 1 m/s", single.lock_events, "== 0", single.lock_events == 0),
        _row(5, "optimal slip at mu 0.8", ev.optimal_slip_high_mu, "== 0.17",
             abs(ev.optimal_slip_high_mu - 0.17) < 1e-12),
        _row(6, "steady brake-torque tracking error", single.torque_error_steady, "<= 0.12",
             single.torque_error_steady <= 0.12, '0.078'),
        _row(6, "max |duty|, all runs", ev.max_abs_duty, "<= 1", ev.max_abs_duty <= 1.0),
        _row(6, "torque surface sign reversals per s", single.switching_reversals_per_s, "<= 5",
             single.switching_reversals_per_s <= 5.0),
        _row(7, "slip surface Lyapunov violation", upper_violation, "<= 0.01", upper_violation <= 0.01),
        _row(7, "torque surface Lyapunov violation", lower_violation, "<= 0.01", lower_violation <= 0.01),
        _row(8, "distance pid - smc, high to low, m",
             ev.pid_high_to_low.stopping_distance - h2l.stopping_distance, "> 0",
             ev.pid_high_to_low.stopping_distance > h2l.stopping_distance, '3.28'),
        _row(8, "post-switch mean slip error pid / smc", pid_ratio, ">= 2", pid_ratio >= 2.0),
        _row(9, "single-mu distance vs rear-axle bound", oracle_dev, "<= 0.10", oracle_dev <= 0.10),
        _row(10, "distance change with dt_plant halved", refine_dev, "< 0.001", refine_dev < 1e-3),
        _row(10, "identical scenario, identical trace", ev.deterministic, "== yes", ev.deterministic),
        _row(10, "suite runtime, s", ev.suite_seconds, "< 60", ev.suite_seconds < 60.0),
    ]


def format_suite_report(runs: Dict[str, RunMetrics], rows: Sequence[AcceptanceRow],
                        oracle_distance: Optional[float] = None) -> str:
    """
    Consolidated suite report: one section per scenario, then the acceptance table.
    """
    lines = []
    for name, metrics in runs.items():
        lines.append(format_metrics(name, metrics))
        lines.append("")

    lines.append(RULE)
    lines.append("Acceptance")
    lines.append(RULE)
    for r in rows:
        status = 'PASS' if r.passed else 'FAIL'
        lines.append(f"[{status}] {r.criterion:>2}  {r.quantity:<42} {_fmt(r.measured):>12}  "
                     f"{r.limit:<9} ref {r.reference}")

    failed = sum(1 for r in rows if not r.passed)
    lines.append("")
    lines.append(f"{len(rows) - failed}/{len(rows)} checks passed")
    if oracle_distance is not None:
        lines.append("")
        lines.append(f"Rear-axle bound at the target slip: {oracle_distance:.2f} m. The quoted bound of")
        lines.append("37.5 m takes the load transfer onto the rear axle with the wrong sign; braking")
        lines.append("unloads the rear axle. The reference stopping distances (31.44 m SMC, 34.72 m")
        lines.append("PID) lie below any rear-only braking bound for this vehicle, so only the SMC/PID")
        lines.append("ordering is compared.")
    lines.append(RULE)
    return "\n".join(lines)
