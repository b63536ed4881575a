import csv
import json
from pathlib import Path

import pytest

from epbabs.cli import EXIT_ABORT, EXIT_FAILED, EXIT_INVALID, EXIT_OK, main
from epbabs.exceptions import NumericalAbort
from epbabs.trace import TRACE_COLUMNS

SCENARIO_DIR = Path(__file__).parent / 'scenarios'


def test_no_command_is_usage_error():
    assert main([]) == EXIT_FAILED


def test_help_exits_cleanly():
    assert main(['--help']) == EXIT_OK


def test_missing_output_directory_is_usage_error():
    assert main(['simulate']) == EXIT_FAILED


def test_simulate_writes_outputs(tmp_path):
    out = tmp_path / 'run'
    code = main(['simulate', '--set', 'duration_s=0.02', '--set', 'name=short', '--out', str(out)])
    assert code == EXIT_OK
    for name in ('trace.csv', 'params.yaml', 'metrics.txt', 'metrics.json', 'run.log'):
        assert (out / name).is_file()

    with open(out / 'trace.csv', newline='') as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == TRACE_COLUMNS
    assert len(rows) == 1 + 21

    metrics = json.loads((out / 'metrics.json').read_text())
    assert metrics['stopped'] is False
    assert 'Run metrics: short' in (out / 'metrics.txt').read_text()


def test_simulate_is_reproducible(tmp_path):
    args = ['simulate', '--scenario', str(SCENARIO_DIR / 'noisy_single_mu.yaml'), '--set', 'duration_s=0.02']
    assert main(args + ['--out', str(tmp_path / 'a')]) == EXIT_OK
    assert main(args + ['--out', str(tmp_path / 'b')]) == EXIT_OK
    assert (tmp_path / 'a' / 'trace.csv').read_bytes() == (tmp_path / 'b' / 'trace.csv').read_bytes()


@pytest.mark.parametrize('extra', [
    ['--set', 'params.upper.bogus=1'],
    ['--set', 'v0_mps=-3'],
    ['--set', 'novalue'],
    ['--scenario', 'does/not/exist.yaml'],
    ['--set', 'params.upper.c_per_s=0'],
])
def test_invalid_scenario_exit_code(tmp_path, capsys, extra):
    code = main(['simulate', '--out', str(tmp_path / 'bad')] + extra)
    assert code == EXIT_INVALID
    assert 'Invalid scenario' in capsys.readouterr().out


def test_invalid_key_is_named(tmp_path, capsys):
    main(['simulate', '--out', str(tmp_path), '--set', 'params.upper.bogus=1'])
    assert 'params.upper.bogus' in capsys.readouterr().out


def test_numerical_abort_exit_code(tmp_path, monkeypatch):
    def diverge(spec):
        raise NumericalAbort("plant state went non-finite", step=12)

    monkeypatch.setattr('epbabs.operations.run', diverge)
    assert main(['simulate', '--out', str(tmp_path / 'abort')]) == EXIT_ABORT
    assert (tmp_path / 'abort' / 'params.yaml').is_file()


def test_controller_option(tmp_path):
    out = tmp_path / 'pid'
    assert main(['simulate', '--controller', 'pid', '--set', 'duration_s=0.01', '--out', str(out)]) == EXIT_OK
    assert 'controller: pid' in (out / 'params.yaml').read_text()


def test_compare_from_standstill(tmp_path):
    out = tmp_path / 'cmp'
    assert main(['compare', '--set', 'v0_mps=0', '--out', str(out)]) == EXIT_OK
    assert (out / 'smc' / 'trace.csv').is_file()
    assert (out / 'pid' / 'trace.csv').is_file()
    assert 'Result: PASS' in (out / 'compare.txt').read_text()


def test_compare_without_stop_fails(tmp_path):
    assert main(['compare', '--set', 'duration_s=0.01', '--out', str(tmp_path)]) == EXIT_FAILED


def test_sweep_writes_table(tmp_path):
    out = tmp_path / 'sweep'
    code = main(['sweep', '--set', 'v0_mps=0', '--axis', 'params.upper.eps1_per_s', '--values', '40,60',
                 '--out', str(out)])
    assert code == EXIT_OK
    assert (out / '000_40' / 'trace.csv').is_file()
    assert (out / '001_60' / 'trace.csv').is_file()
    with open(out / 'sweep.csv', newline='') as f:
        rows = list(csv.reader(f))
    assert rows[0][:2] == ['params.upper.eps1_per_s', 'status']
    assert [r[:2] for r in rows[1:]] == [['40', 'ok'], ['60', 'ok']]


def test_sweep_rejects_bad_axis(tmp_path):
    assert main(['sweep', '--axis', 'params.upper.nope', '--values', '1,2', '--out', str(tmp_path)]) == EXIT_INVALID


@pytest.mark.parametrize('values, jobs', [('a,b', '1'), ('1,2', '0')])
def test_sweep_rejects_bad_values(tmp_path, values, jobs):
    code = main(['sweep', '--axis', 'v0_mps', '--values', values, '--jobs', jobs, '--out', str(tmp_path)])
    assert code == EXIT_FAILED


def test_sweep_records_invalid_points(tmp_path):
    out = tmp_path / 'sweep'
    code = main(['sweep', '--set', 'duration_s=0.01', '--axis', 'v0_mps', '--values', '40,-5', '--out', str(out)])
    assert code == EXIT_FAILED
    with open(out / 'sweep.csv', newline='') as f:
        rows = list(csv.reader(f))
    assert [r[0] for r in rows[1:]] == ['40', '-5']
    assert rows[1][1] == 'ok'
    assert rows[2][1].startswith('invalid:') and 'v0_mps' in rows[2][1]


def test_sweep_records_invalid_parameter_groups(tmp_path):
    out = tmp_path / 'sweep'
    code = main(['sweep', '--set', 'duration_s=0.01', '--axis', 'params.caliper.stiffness_n_per_m',
                 '--values', '-1', '--out', str(out)])
    assert code == EXIT_FAILED
    with open(out / 'sweep.csv', newline='') as f:
        rows = list(csv.reader(f))
    assert rows[1][1].startswith('invalid:') and 'params.caliper' in rows[1][1]


def test_sweep_rejects_group_axis(tmp_path):
    assert main(['sweep', '--axis', 'params.upper', '--values', '1', '--out', str(tmp_path)]) == EXIT_INVALID


def test_paper_suite_rejects_bad_jobs(tmp_path):
    assert main(['paper-suite', '--jobs', '0', '--out', str(tmp_path)]) == EXIT_FAILED


def test_paper_suite_rejects_invalid_base(tmp_path):
    assert main(['paper-suite', '--set', 'v0_mps=-1', '--out', str(tmp_path)]) == EXIT_INVALID
