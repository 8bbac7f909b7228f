import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from dcprox.bppa import solve_bppa
from dcprox.cli import main
from dcprox.problems import make_quartic_well
from dcprox.traceio import TRACE_COLUMNS, read_trace_csv, trace_to_csv, write_trace_csv

FIXTURES = Path(__file__).parent / 'fixtures' / 'bad_configs'

INERTIAL = {'lambda': 0.5, 'mu': 0.2, 'alpha': 1.0, 'beta': 1.0, 'gamma': 0.5, 'tau': 0.0}


def _config(tmp_path, name='run', **body):
    data = {'version': 1}
    data.update(body)
    path = tmp_path / (name + '.json')
    path.write_text(json.dumps(data))
    return path


def _quartic(tmp_path, n=1, name='run', **solver):
    solver.setdefault('kind', 'bppa')
    return _config(tmp_path, name, problem={'name': 'quartic_well', 'parameters': {'n': n}},
                   solver=solver)


def _l1l2(tmp_path, name='l1l2', **config):
    cfg = dict(INERTIAL)
    cfg.update(config)
    return _config(tmp_path, name, problem={'name': 'l1_minus_l2', 'parameters': {'n': 5},
                                            'seed': 3},
                   solver={'kind': 'inertial', 'config': cfg})


def _report(cfg_path):
    return json.loads(cfg_path.with_name(cfg_path.stem + '.report.json').read_text())


def _trace(cfg_path):
    return cfg_path.with_name(cfg_path.stem + '.trace.csv')


def test_run_quartic_well_defaults(tmp_path):
    cfg = _quartic(tmp_path)
    assert main(['run', str(cfg), '--quiet']) == 0
    rep = _report(cfg)
    assert rep['termination'] == 'converged'
    assert abs(rep['final_f'] + 0.25) <= 1e-8
    assert rep['checks_passed']
    assert rep['config']['solver']['kind'] == 'bppa'
    assert 'rate_report' in rep
    assert _trace(cfg).read_text().splitlines()[0] == ','.join(TRACE_COLUMNS)


def test_run_rejects_gamma_below_half(tmp_path, capsys):
    cfg = _config(tmp_path, problem={'name': 'quartic_well'},
                  solver={'kind': 'inertial', 'config': dict(INERTIAL, gamma=0.4)})
    assert main(['run', str(cfg)]) == 4
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and 'gamma_below_half' in err[0]
    assert not _trace(cfg).exists()


def test_run_iteration_limit_exit_code(tmp_path):
    cfg = _quartic(tmp_path, config={'max_iter': 1})
    assert main(['run', str(cfg), '--quiet']) == 2
    assert _report(cfg)['termination'] == 'max_iter'


def test_run_line_search_failure_exit_code(tmp_path, capsys):
    cfg = _quartic(tmp_path, config={'alpha': 100.0, 'max_armijo': 1})
    assert main(['run', str(cfg), '--quiet']) == 3
    assert _report(cfg)['termination'] == 'armijo_fail'
    assert 'Armijo' in capsys.readouterr().err


def test_seed_flag_in_either_position(tmp_path):
    cfg = _l1l2(tmp_path)
    assert main(['--seed', '5', 'run', str(cfg), '--quiet']) == 0
    assert _report(cfg)['seed'] == 5
    assert main(['run', str(cfg), '--seed', '6', '--quiet']) == 0
    assert _report(cfg)['seed'] == 6


def test_run_is_deterministic(tmp_path):
    for name, cfg in (('bppa', _quartic(tmp_path, 3, 'a')), ('inertial', _l1l2(tmp_path, 'b'))):
        assert main(['run', str(cfg), '--quiet']) == 0
        first = _trace(cfg).read_bytes()
        assert main(['run', str(cfg), '--quiet']) == 0
        assert _trace(cfg).read_bytes() == first, name


def test_wall_time_only_when_requested(tmp_path):
    cfg = _config(tmp_path, problem={'name': 'quartic_well'}, solver={'kind': 'bppa'},
                  output={'record_wall_time': True, 'trace_path': 'out/t.csv',
                          'report_path': 'out/r.json'})
    assert main(['run', str(cfg), '--quiet']) == 0
    tr = read_trace_csv(tmp_path / 'out' / 't.csv')
    assert all(r.wall_time_s is not None for r in tr.records)
    assert (tmp_path / 'out' / 'r.json').exists()


def test_check_round_trip_for_every_solver(tmp_path):
    cfgs = [_quartic(tmp_path, 3, 'b3'),
            _quartic(tmp_path, 1, 'p1', kind='ppa'),
            _quartic(tmp_path, 2, 'ad', config={'lambda_rule': 'adaptive'}),
            _l1l2(tmp_path)]
    for cfg in cfgs:
        assert main(['run', str(cfg), '--quiet']) == 0
        assert main(['check', str(_trace(cfg)), '--problem', str(cfg), '--quiet']) == 0


def test_check_detects_hand_edited_value(tmp_path, capsys):
    cfg = _quartic(tmp_path, 3)
    assert main(['run', str(cfg), '--quiet']) == 0
    path = _trace(cfg)
    lines = path.read_text().splitlines()
    fields = lines[4].split(',')
    fields[1] = repr(float(fields[1]) + 0.5)
    lines[4] = ','.join(fields)
    path.write_text('\n'.join(lines) + '\n')
    capsys.readouterr()
    assert main(['check', str(path), '--problem', str(cfg), '--quiet']) == 1
    out = capsys.readouterr().out
    row = [ln for ln in out.splitlines() if ln.startswith('monotone_f')]
    assert row and 'FAIL' in row[0]


def test_check_warns_on_wrong_delta_grid(tmp_path, capsys):
    cfg = _l1l2(tmp_path)
    assert main(['run', str(cfg), '--quiet']) == 0
    other = _l1l2(tmp_path, 'other', delta_grid=[0.5, 0.8])
    capsys.readouterr()
    assert main(['check', str(_trace(cfg)), '--problem', str(other)]) == 0
    out = capsys.readouterr().out
    row = [ln for ln in out.splitlines() if ln.startswith('delta_grid')]
    assert row and 'WARN' in row[0]


@pytest.mark.parametrize('content', [
    'k,f\n0,1\n',
    ','.join(TRACE_COLUMNS) + '\n',
    ','.join(TRACE_COLUMNS) + '\n0,abc,,,,,,,,,,\n',
    ','.join(TRACE_COLUMNS) + '\n0,1,2\n',
    ','.join(TRACE_COLUMNS) + '\n,1,,,,,,,,,,\n',
])
def test_malformed_traces_exit_4(tmp_path, capsys, content):
    cfg = _quartic(tmp_path)
    bad = tmp_path / 'bad.csv'
    bad.write_text(content)
    assert main(['check', str(bad), '--problem', str(cfg), '--quiet']) == 4
    assert main(['rates', str(bad), '--quiet']) == 4
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 2


def test_check_missing_trace_and_solver_choice(tmp_path):
    cfg = _config(tmp_path, problem={'name': 'quartic_well'},
                  solvers=[{'kind': 'bppa'}, {'kind': 'ppa'}])
    assert main(['compare', str(cfg), '--quiet']) == 0
    bppa_trace = tmp_path / 'run.trace.bppa.csv'
    assert main(['check', str(bppa_trace), '--problem', str(cfg), '--quiet']) == 4
    assert main(['check', str(bppa_trace), '--problem', str(cfg), '--solver', 'bppa',
                 '--quiet']) == 0
    assert main(['check', str(tmp_path / 'run.trace.ppa.csv'), '--problem', str(cfg),
                 '--solver', '1', '--quiet']) == 0
    assert main(['check', str(tmp_path / 'nope.csv'), '--problem', str(cfg), '--solver', '0',
                 '--quiet']) == 4


def test_compare_boost_needs_no_more_iterations(tmp_path):
    cfg = _config(tmp_path, problem={'name': 'quartic_well', 'parameters': {'n': 3}},
                  solvers=[{'kind': 'bppa'}, {'kind': 'ppa'},
                           {'kind': 'inertial', 'config': dict(INERTIAL, **{'lambda': 0.1})}])
    assert main(['compare', str(cfg), '--quiet']) == 0
    rep = _report(cfg)
    legs = {leg['solver']: leg for leg in rep['legs']}
    assert legs['bppa']['iterations_to_tol'] is not None
    assert legs['ppa']['iterations_to_tol'] is not None
    assert legs['bppa']['iterations_to_tol'] <= legs['ppa']['iterations_to_tol']
    dom = rep['dominance']
    assert dom['states'] > 0 and dom['no_worse'] == dom['states']
    for kind in ('bppa', 'ppa', 'inertial'):
        assert (tmp_path / 'run.trace.{}.csv'.format(kind)).exists()


def test_single_solver_compare_matches_run(tmp_path):
    run_cfg = _quartic(tmp_path, 2, 'single')
    assert main(['run', str(run_cfg), '--quiet']) == 0
    run_rep = _report(run_cfg)
    run_csv = _trace(run_cfg).read_bytes()
    cmp_cfg = _config(tmp_path, 'single_cmp',
                      problem={'name': 'quartic_well', 'parameters': {'n': 2}},
                      solvers=[{'kind': 'bppa'}])
    assert main(['compare', str(cmp_cfg), '--quiet']) == 0
    leg = _report(cmp_cfg)['legs'][0]
    assert _trace(cmp_cfg).read_bytes() == run_csv
    for key in ('termination', 'iterations', 'final_f', 'final_iterate', 'checks',
                'checks_passed', 'rate_report'):
        assert leg[key] == run_rep[key], key


def test_compare_rejects_incompatible_pairing(tmp_path, capsys):
    cfg = _config(tmp_path, problem={'name': 'boxed_indefinite_quadratic',
                                     'parameters': {'Q': [[-1.0]], 'lo': -1.0, 'hi': 1.0}},
                  solvers=[{'kind': 'ppa'}, {'kind': 'bppa'}])
    assert main(['compare', str(cfg), '--quiet']) == 4
    assert 'incompatible' in capsys.readouterr().err
    assert not (tmp_path / 'run.trace.ppa.csv').exists()


def test_rates_exit_codes(tmp_path, capsys):
    cfg = _config(tmp_path, problem={'name': 'quartic_well'},
                  solver={'kind': 'bppa', 'config': {'lambda_value': 100.0, 'tol_d': 1e-12}})
    assert main(['run', str(cfg), '--quiet']) == 0
    capsys.readouterr()
    assert main(['rates', str(_trace(cfg)), '--fstar', '-0.25']) == 0
    out = json.loads(capsys.readouterr().out)
    assert out['rate_report']['classification'] == 'linear'
    assert 0.0 <= out['kl_estimate']['kappa'] < 1.0
    short = _quartic(tmp_path, name='short', config={'max_iter': 3})
    assert main(['run', str(short), '--quiet']) == 2
    assert main(['rates', str(_trace(short)), '--fstar', '-0.25']) == 2
    assert main(['rates', str(_trace(cfg)), '--fstar', '5']) == 4


@pytest.mark.parametrize('path', sorted(FIXTURES.glob('*.json')), ids=lambda p: p.stem)
def test_bad_config_corpus(path, capsys, tmp_path):
    assert main(['run', str(path)]) == 4
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith('error: ')
    assert main(['compare', str(path), '--quiet']) == 4


def test_csv_round_trip_is_lossless(tmp_path):
    tr = solve_bppa(make_quartic_well(2), [1.3, -0.4])
    path = tmp_path / 't.csv'
    write_trace_csv(tr, path)
    back = read_trace_csv(path)
    for a, b in zip(tr.records, back.records):
        assert (a.k, a.f_x, a.d_norm, a.m_k, a.eta_k) == (b.k, b.f_x, b.d_norm, b.m_k, b.eta_k)
        assert (a.grad_residual, a.sum_d_sq) == (b.grad_residual, b.sum_d_sq)
    back.solver = tr.solver
    assert trace_to_csv(back) == trace_to_csv(tr)


def test_console_entry_point(tmp_path):
    cfg = _quartic(tmp_path)
    res = subprocess.run([sys.executable, '-m', 'dcprox.cli', 'run', str(cfg)],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert 'converged' in res.stdout
    assert np.isclose(_report(cfg)['final_f'], -0.25, atol=1e-8)
