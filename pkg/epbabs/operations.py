"""
Operations behind the command-line tools: single runs, SMC/PID comparison,
the canonical paper suite and parameter sweeps. Every run writes its own
output directory.
"""

import csv
import dataclasses
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from epbabs.actuator import EpbActuator
from epbabs.estimator import optimal_slip
from epbabs.exceptions import ConfigurationError, NumericalAbort, ScenarioError
from epbabs.metrics import RunMetrics
from epbabs.observer import torque_error_decay_rate
from epbabs.report import (SuiteEvidence, acceptance_rows, comparison_passed, format_comparison,
                           format_metrics, format_suite_report)
from epbabs.scenario import (ScenarioSpec, apply_overrides, canonical_scenarios, scenario_from_dict,
                             scenario_to_dict)
from epbabs.simulation import RunResult, run
from epbabs.trace import TRACE_COLUMNS, TraceRecord
from epbabs.tyre import base_peak_mu, build_lookup, lookup_error, tyre_force
from epbabs.vehicle import axle_loads, rear_braking_distance

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _prepare_dir(out_dir: PathLike) -> Path:
    path = Path(out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ScenarioError(str(path), f"cannot create output directory: {e}")
    if not os.access(path, os.W_OK):
        raise ScenarioError(str(path), "output directory is not writable")
    return path


def write_trace_csv(trace: Sequence[TraceRecord], path: PathLike) -> None:
    """
    Write a trace as CSV: header row, columns in record order, 9 significant digits.
    """
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(TRACE_COLUMNS)
        for r in trace:
            row = dataclasses.astuple(r)
            writer.writerow(['%.9g' % v for v in row[:-1]] + [row[-1]])


def write_run(name: str, spec: ScenarioSpec, trace: Sequence[TraceRecord], metrics: Optional[RunMetrics],
              out_dir: PathLike) -> Path:
    """
    Write trace.csv, params.yaml and, when metrics are given, metrics.txt and metrics.json.

    Returns:
        The run directory
    """
    path = _prepare_dir(out_dir)
    write_trace_csv(trace, path / 'trace.csv')
    with open(path / 'params.yaml', 'w', encoding='utf-8') as f:
        yaml.safe_dump(scenario_to_dict(spec), f, sort_keys=False)
    if metrics is not None:
        (path / 'metrics.txt').write_text(format_metrics(name, metrics) + "\n", encoding='utf-8')
        with open(path / 'metrics.json', 'w', encoding='utf-8') as f:
            json.dump(metrics.as_dict(), f, indent=2)
            f.write("\n")
    logger.debug("Wrote run %s to %s", name, path)
    return path


def simulate(spec: ScenarioSpec, out_dir: PathLike) -> RunResult:
    """
    Run one scenario and write its outputs.

    On a numerical abort the partial trace and the parameters are written
    before the exception propagates.

    Raises:
        NumericalAbort: The run diverged
    """
    path = _prepare_dir(out_dir)
    try:
        result = run(spec)
    except NumericalAbort as e:
        write_run(spec.name, spec, e.trace, None, path)
        raise
    write_run(spec.name, spec, result.trace, result.metrics, path)
    return result


def compare(spec: ScenarioSpec, out_dir: PathLike) -> Tuple[RunResult, RunResult, bool]:
    """
    Run a scenario under SMC and under PID.

    Writes smc/ and pid/ run directories plus compare.txt.

    Returns:
        Tuple (smc result, pid result, ordering check passed)
    """
    path = _prepare_dir(out_dir)
    smc = simulate(dataclasses.replace(spec, controller='smc'), path / 'smc')
    pid = simulate(dataclasses.replace(spec, controller='pid'), path / 'pid')
    passed = comparison_passed(smc.metrics, pid.metrics)
    (path / 'compare.txt').write_text(format_comparison(spec.name, smc.metrics, pid.metrics) + "\n",
                                      encoding='utf-8')
    return smc, pid, passed


def _trace_bytes(trace: Sequence[TraceRecord]) -> bytes:
    return "\n".join(','.join('%.9g' % v for v in dataclasses.astuple(r)[:-1]) + ',' + r.flags
                     for r in trace).encode('utf-8')


def _tyre_checks(spec: ScenarioSpec) -> Tuple[float, Tuple[float, float], float, float]:
    start = time.perf_counter()
    tyre = spec.params.tyre
    zero = tyre_force(tyre, 0.0, 4000.0, 1.0)
    peaks = [base_peak_mu(tyre, fz) for fz in np.linspace(2000.0, 6000.0, 9)]
    error = lookup_error(build_lookup(tyre))
    return zero, (min(peaks), max(peaks)), error, time.perf_counter() - start


def _suite_run(job: Tuple[str, ScenarioSpec, Optional[str]]) -> Tuple[str, RunResult]:
    key, spec, out_dir = job
    logger.info("Suite run %s", key)
    result = simulate(spec, out_dir) if out_dir is not None else run(spec)
    return key, result


def suite_jobs(jobs: Optional[int], runs: int) -> int:
    """Worker count for the suite: one per run up to the CPU count unless given."""
    if jobs is None:
        jobs = os.cpu_count() or 1
    return max(1, min(jobs, runs))


def paper_suite(out_dir: PathLike, base: Optional[ScenarioSpec] = None,
                jobs: Optional[int] = None) -> Tuple[str, bool]:
    """
    Run the canonical road cases and write the consolidated acceptance report.

    The high-to-low case also runs under PID; the single-friction case is
    repeated once unchanged (determinism) and once with half the plant step
    (step refinement). The runs are independent and go to a process pool.

    Args:
        out_dir: Output directory
        base: Scenario the canonical cases are derived from
        jobs: Worker processes (None: one per run, up to the CPU count; 1 runs in-process)

    Returns:
        Tuple (report text, all checks passed)
    """
    start = time.perf_counter()
    path = _prepare_dir(out_dir)
    base = base or ScenarioSpec()

    cases = canonical_scenarios(base)
    single = cases[0]
    h2l = next(c for c in cases if c.name == 'high_to_low')
    job_list = [(c.name, c, str(path / c.name)) for c in cases]
    job_list += [
        ('high_to_low_pid', dataclasses.replace(h2l, controller='pid', name='high_to_low_pid'),
         str(path / 'high_to_low_pid')),
        ('repeat', single, None),
        ('refined', dataclasses.replace(single, dt_plant=single.dt_plant / 2.0), None),
    ]

    workers = suite_jobs(jobs, len(job_list))
    logger.info("Paper suite: %d runs on %d workers", len(job_list), workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_suite_run, job_list))
    else:
        results = dict(_suite_run(j) for j in job_list)

    runs = {c.name: results[c.name] for c in cases}
    pid = results['high_to_low_pid']

    zero, peak_range, lookup, tyre_seconds = _tyre_checks(base)

    p = base.params
    act = EpbActuator(p.motor, p.drivetrain, p.screw, p.caliper, p.plant.stiction_speed)
    gains = dataclasses.replace(p.observer, t_ctrl=base.t_ctrl)
    decay = torque_error_decay_rate(gains, act.j_n, act.c_n, p.motor.k_t)
    design = abs(gains.feedback_gain(act.j_n)) / act.j_n

    lam_d = optimal_slip(0.8, p.estimator.a1, p.estimator.a2, p.estimator.slip_min, p.estimator.slip_max)
    fz_rear = axle_loads(p.vehicle, 0.0).rear
    mu_x = tyre_force(p.tyre, lam_d, fz_rear, 0.8) / fz_rear
    oracle = rear_braking_distance(p.vehicle, mu_x, single.v0)

    all_traces = [r.trace for r in runs.values()] + [pid.trace]
    max_duty = max(abs(rec.duty) for trace in all_traces for rec in trace)

    evidence = SuiteEvidence(
        runs={name: r.metrics for name, r in runs.items()},
        pid_high_to_low=pid.metrics,
        tyre_zero_force=zero,
        tyre_peak_mu=peak_range,
        tyre_lookup_error=lookup,
        tyre_seconds=tyre_seconds,
        smo_decay_rate=decay,
        smo_design_rate=design,
        optimal_slip_high_mu=lam_d,
        max_abs_duty=max_duty,
        oracle_distance=oracle,
        refined_distance=results['refined'].metrics.stopping_distance,
        deterministic=_trace_bytes(results['repeat'].trace) == _trace_bytes(runs['single_mu'].trace),
        suite_seconds=time.perf_counter() - start,
    )
    rows = acceptance_rows(evidence)
    text = format_suite_report(evidence.runs, rows, oracle)
    (path / 'report.txt').write_text(text + "\n", encoding='utf-8')
    return text, all(r.passed for r in rows)


def _override(axis: str, value: float) -> str:
    # integral values go in as ints so integer keys such as seed accept them
    text = str(int(value)) if float(value).is_integer() else repr(float(value))
    return f"{axis}={text}"


def check_axis(data: Dict[str, Any], axis: str) -> None:
    """
    Check that a dotted key names a single value of a resolved scenario mapping.

    Raises:
        ScenarioError: The key does not exist or names a group
    """
    node: Any = data
    for part in axis.split('.'):
        if isinstance(node, dict) and part in node:
            node = node[part]
        elif isinstance(node, list) and part.isdigit() and int(part) < len(node):
            node = node[int(part)]
        else:
            raise ScenarioError(axis, "not a scenario key")
    if isinstance(node, (dict, list)):
        raise ScenarioError(axis, "names a group, not a single value")


def _sweep_point(job: Tuple[Dict[str, Any], str, float, str]) -> Tuple[float, Optional[Dict[str, float]], str]:
    data, axis, value, out_dir = job
    try:
        spec = scenario_from_dict(apply_overrides(data, [_override(axis, value)]))
        result = simulate(spec, out_dir)
    except (ScenarioError, ConfigurationError) as e:
        logger.warning("Sweep point %s=%g rejected: %s", axis, value, e)
        return value, None, f"invalid: {e}"
    except NumericalAbort as e:
        return value, None, f"numerical abort: {e}"
    return value, result.metrics.as_dict(), ''


def sweep(spec: ScenarioSpec, axis: str, values: Sequence[float], out_dir: PathLike,
          jobs: int = 1) -> List[Tuple[float, Optional[Dict[str, float]], str]]:
    """
    Run a scenario once per value of one parameter.

    Args:
        spec: Base scenario
        axis: Dotted scenario key, e.g. params.upper.eps1_per_s
        values: Values to sweep
        out_dir: Output directory; each value gets its own subdirectory
        jobs: Worker processes

    Returns:
        List of (value, metrics dict or None, error message) in value order

    Raises:
        ScenarioError: The axis does not name a scenario key; invalid values are
            reported per point in the status column instead
    """
    path = _prepare_dir(out_dir)
    data = scenario_to_dict(spec)
    check_axis(data, axis)

    job_list = [(data, axis, v, str(path / f"{i:03d}_{v:g}")) for i, v in enumerate(values)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, job_list))
    else:
        results = [_sweep_point(j) for j in job_list]

    keys = list(RunMetrics().as_dict())
    with open(path / 'sweep.csv', 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow([axis, 'status'] + keys)
        for value, metrics, error in results:
            if metrics is None:
                writer.writerow(['%.9g' % value, error] + [''] * len(keys))
            else:
                writer.writerow(['%.9g' % value, 'ok'] + ['%.9g' % float(metrics[k]) for k in keys])
    return results
