"""
Command-line interface for epbabs.
"""

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import List, Optional

from epbabs.exceptions import ConfigurationError, NumericalAbort, ScenarioError
from epbabs.operations import compare, paper_suite, simulate, sweep
from epbabs.report import format_comparison, format_metrics
from epbabs.scenario import CONTROLLERS, ScenarioSpec, load_scenario
from epbabs.utils import parse_value_list

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2
EXIT_ABORT = 3


def setup_logging(verbose: bool = False, log_file: Optional[Path] = None) -> None:
    """
    Configure the package logger: stderr at INFO (DEBUG with verbose), plus an optional file.
    """
    level = logging.DEBUG if verbose else logging.INFO
    fmt = logging.Formatter('%(asctime)s %(levelname)s %(name)s: %(message)s')
    root = logging.getLogger('epbabs')
    root.setLevel(level)
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()

    stream = logging.StreamHandler(sys.stderr)
    stream.setFormatter(fmt)
    root.addHandler(stream)
    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file, mode='w', encoding='utf-8')
        file_handler.setFormatter(fmt)
        root.addHandler(file_handler)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument('--scenario', help='Scenario YAML file (defaults when omitted)')
    sub.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                     help='Override a scenario key, e.g. params.upper.eps1_per_s=40 (repeatable)')
    sub.add_argument('--out', required=True, help='Output directory')
    sub.add_argument('--verbose', '-v', action='store_true', help='Debug logging')


def main(args: Optional[List[str]] = None) -> int:
    """
    Main entry point for the CLI.

    Args:
        args: Command line arguments (defaults to sys.argv[1:])

    Returns:
        Exit code: 0 success, 1 usage error or failed check, 2 invalid
        scenario or parameters, 3 numerical abort
    """
    parser = argparse.ArgumentParser(
        description='Rear-wheel ABS simulation for an electric parking brake',
        prog='epbabs'
    )
    subparsers = parser.add_subparsers(dest='command', help='Command to execute')

    sim_parser = subparsers.add_parser('simulate', help='Run one scenario')
    _add_common(sim_parser)
    sim_parser.add_argument('--controller', choices=CONTROLLERS, help='Override the scenario controller')

    cmp_parser = subparsers.add_parser('compare', help='Run a scenario under SMC and PID')
    _add_common(cmp_parser)

    suite_parser = subparsers.add_parser('paper-suite', help='Run the canonical road cases and acceptance report')
    _add_common(suite_parser)
    suite_parser.add_argument('--jobs', type=int, default=None,
                              help='Parallel worker processes (default: one per run, up to the CPU count)')

    sweep_parser = subparsers.add_parser('sweep', help='Run a scenario over values of one parameter')
    _add_common(sweep_parser)
    sweep_parser.add_argument('--controller', choices=CONTROLLERS, help='Override the scenario controller')
    sweep_parser.add_argument('--axis', required=True, help='Dotted scenario key to sweep')
    sweep_parser.add_argument('--values', required=True, help='Values: "a,b,c" or "start:stop:step"')
    sweep_parser.add_argument('--jobs', type=int, default=1, help='Parallel worker processes')

    try:
        parsed_args = parser.parse_args(args)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_FAILED

    if not parsed_args.command:
        parser.print_help()
        return EXIT_FAILED

    out_dir = Path(parsed_args.out)
    try:
        setup_logging(parsed_args.verbose, out_dir / 'run.log')
        spec = _load(parsed_args)
        if parsed_args.command == 'simulate':
            return execute_simulate(spec, out_dir)
        elif parsed_args.command == 'compare':
            return execute_compare(spec, out_dir)
        elif parsed_args.command == 'paper-suite':
            return execute_suite(spec, out_dir, parsed_args.jobs)
        elif parsed_args.command == 'sweep':
            return execute_sweep(spec, out_dir, parsed_args.axis, parsed_args.values, parsed_args.jobs)
    except (ScenarioError, ConfigurationError) as e:
        print(f"Invalid scenario: {e}")
        return EXIT_INVALID
    except NumericalAbort as e:
        print(f"Numerical abort at step {e.step}: {e} ({len(e.trace)} trace records written)")
        return EXIT_ABORT
    except OSError as e:
        print(f"Error: {e}")
        return EXIT_FAILED

    print(f"Unknown command: {parsed_args.command}")
    return EXIT_FAILED


def _load(parsed_args: argparse.Namespace) -> ScenarioSpec:
    spec = load_scenario(parsed_args.scenario, parsed_args.overrides)
    controller = getattr(parsed_args, 'controller', None)
    if controller:
        spec = dataclasses.replace(spec, controller=controller)
    return spec


def execute_simulate(spec: ScenarioSpec, out_dir: Path) -> int:
    """
    Execute the simulate command.

    Returns:
        Exit code
    """
    print(f"Simulating {spec.name} ({spec.controller}, v0={spec.v0} m/s)")
    result = simulate(spec, out_dir)
    print(format_metrics(spec.name, result.metrics))
    print(f"Outputs written to {out_dir}")
    return EXIT_OK


def execute_compare(spec: ScenarioSpec, out_dir: Path) -> int:
    """
    Execute the compare command.

    Returns:
        Exit code (1 when SMC does not stop at least as short as PID)
    """
    print(f"Comparing SMC and PID on {spec.name}")
    smc, pid, passed = compare(spec, out_dir)
    print(format_comparison(spec.name, smc.metrics, pid.metrics))
    return EXIT_OK if passed else EXIT_FAILED


def execute_suite(base: ScenarioSpec, out_dir: Path, jobs: Optional[int] = None) -> int:
    """
    Execute the paper-suite command.

    Returns:
        Exit code (1 when any acceptance check fails or --jobs is not positive)
    """
    if jobs is not None and jobs < 1:
        print(f"Error: --jobs must be at least 1, got {jobs}")
        return EXIT_FAILED
    print(f"Running the paper suite into {out_dir}")
    text, passed = paper_suite(out_dir, base, jobs)
    print(text)
    return EXIT_OK if passed else EXIT_FAILED


def execute_sweep(spec: ScenarioSpec, out_dir: Path, axis: str, values_text: str, jobs: int) -> int:
    """
    Execute the sweep command.

    Returns:
        Exit code (1 for a bad value list or when any point aborts)
    """
    try:
        values = parse_value_list(values_text)
    except ValueError as e:
        print(f"Error: {e}")
        return EXIT_FAILED
    if jobs < 1:
        print(f"Error: --jobs must be at least 1, got {jobs}")
        return EXIT_FAILED

    print(f"Sweeping {axis} over {len(values)} values ({jobs} jobs)")
    results = sweep(spec, axis, values, out_dir, jobs)
    failures = 0
    for value, metrics, error in results:
        if metrics is None:
            failures += 1
            print(f"  {axis}={value:g}: {error}")
        else:
            print(f"  {axis}={value:g}: distance={metrics['stopping_distance']:.3f} m "
                  f"slip_error_steady={metrics['slip_error_steady']:.4f}")
    print(f"Sweep table written to {out_dir / 'sweep.csv'}")
    return EXIT_OK if failures == 0 else EXIT_FAILED
