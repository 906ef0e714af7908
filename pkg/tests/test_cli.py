"""
Integration tests for the dyadika command line
Every run uses a temporary config so fixtures never touch the repository
"""

import json
from pathlib import Path

import pytest
import yaml

from dyadika.cli import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, build_parser, main
from dyadika.services.config_service import ConfigService
from dyadika.services.fixtures import FixtureStore

PLAN_DIR = Path(__file__).parent.parent / 'plans'


@pytest.fixture
def config_file(tmp_path):
    """Small sweeps, fixtures under tmp_path, calibration at the resolution under test"""

    def write(calibration=6):
        path = tmp_path / 'config.yml'
        path.write_text(yaml.safe_dump({
            'resolution': {'default': 4, 'calibration': calibration},
            'sweep': {'random_functions': 3},
            'bounds': {'atoms_per_p': 2},
            'fixtures': {'path': str(tmp_path / 'constants.yml')},
            'logging': {'level': 'ERROR'},
        }))
        return str(path)

    yield write
    ConfigService.use_path(None)


def write_plan(tmp_path, **plan):
    path = tmp_path / 'plan.json'
    path.write_text(json.dumps(plan))
    return str(path)


@pytest.mark.integration
class TestCommands:
    """Exit codes and report content"""

    def test_stats_csv(self, tmp_path, config_file):
        out = tmp_path / 'stats.csv'
        code = main(['stats', '--resolution', '4', '--output', 'csv', '--out', str(out),
                     '--config', config_file()])
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == 'n,binary,msb,lsb,span,variation,popcount,blocks,passed'
        assert len(lines) == 16
        assert lines[5] == '5,101,2,0,2,4,2,2,True'

    def test_stats_to_stdout(self, capsys, config_file):
        assert main(['stats', '-M', '3', '--config', config_file()]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report['command'] == 'stats'
        assert report['passed'] is True
        assert report['summary'] == {'indices': 7}

    def test_reports_are_deterministic(self, tmp_path, config_file):
        path = config_file()
        first, second = tmp_path / 'a.json', tmp_path / 'b.json'
        assert main(['kernels', '-M', '3', '--seed', '5', '--out', str(first), '--config', path]) == EXIT_OK
        assert main(['kernels', '-M', '3', '--seed', '5', '--out', str(second), '--config', path]) == EXIT_OK
        assert first.read_bytes() == second.read_bytes()

    def test_kernels(self, tmp_path, config_file):
        out = tmp_path / 'kernels.json'
        assert main(['kernels', '-M', '4', '--out', str(out), '--config', config_file()]) == EXIT_OK
        report = json.loads(out.read_text())
        checks = {row['check'] for row in report['rows']}
        assert {'fejer_set_bit_assembly', 'shift_lemma', 'mersenne_expansion', 'fast_vs_naive',
                'smoothing_identity', 'conjugation_commutes'} <= checks
        assert all(row['failures'] == 0 for row in report['rows'])

    def test_kernels_float_mode(self, tmp_path, config_file):
        out = tmp_path / 'kernels.csv'
        code = main(['kernels', '-M', '3', '--mode', 'float', '--output', 'csv', '--out', str(out),
                     '--config', config_file()])
        assert code == EXIT_OK
        assert out.read_text().splitlines()[0] == 'check,count,max_gap,failures,passed'

    @pytest.mark.slow
    def test_lemmas_freeze_fixtures(self, tmp_path, config_file):
        out = tmp_path / 'lemmas.json'
        assert main(['lemmas', '-M', '6', '--out', str(out), '--config', config_file(6)]) == EXIT_OK
        store = FixtureStore(tmp_path / 'constants.yml')
        for name in ('coset_integral_c', 'majorant_c', 'tail_mass_c', 'kernel_doubling_c', 'kernel_mersenne_c'):
            assert store.get(name) is not None
        assert store.get('kernel_doubling_c') == pytest.approx(65 / 33)
        rows = json.loads(out.read_text())['rows']
        assert any(row['check'] == 'kernel_lower_bound' and row['value'] == 0 for row in rows)

    def test_bounds(self, tmp_path, config_file):
        out = tmp_path / 'bounds.json'
        code = main(['bounds', '-M', '3', '--p', '1/2,1/4,1', '--out', str(out), '--config', config_file(3)])
        assert code == EXIT_OK
        kinds = {row['kind'] for row in json.loads(out.read_text())['rows']}
        assert kinds == {'R1', 'R2', 'R0', 'R1_fixture', 'R2_fixture', 'R0_fixture'}

    @pytest.mark.parametrize("plan,code", [
        ({'regime': 'T4b', 'p': '1/4', 'alphas': [3, 5, 17, 257], 'resolution': 14, 'report_from': 2}, EXIT_OK),
        ({'regime': 'T1b', 'p': '1/2', 'alphas': [5, 21], 'phi_rule': 'variation', 'resolution': 6}, EXIT_OK),
        # the T3b rows for (3, 85) shrink from k=1 to k=2
        ({'regime': 'T3b', 'p': '1/2', 'alphas': [3, 85], 'resolution': 8}, EXIT_VIOLATION),
    ])
    def test_counterexample(self, tmp_path, config_file, plan, code):
        out = tmp_path / 'blowup.csv'
        assert main(['counterexample', '--plan', write_plan(tmp_path, **plan), '--mode', 'float',
                     '--output', 'csv', '--out', str(out), '--config', config_file()]) == code
        lines = out.read_text().splitlines()
        assert lines[0] == 'k,alpha,measured,paper_bound'
        assert len(lines) == 1 + len(plan['alphas']) - plan.get('report_from', 1) + 1

    def test_counterexample_rows_must_dominate_the_frozen_constant(self, tmp_path, config_file):
        plan = write_plan(tmp_path, regime='T4b', p='1/4', alphas=[3, 5, 17, 257], resolution=14, report_from=2)
        path = config_file()
        out = tmp_path / 'blowup.json'
        assert main(['counterexample', '--plan', plan, '--mode', 'float', '--out', str(out),
                     '--config', path]) == EXIT_OK
        fixture = json.loads(out.read_text())['summary']['plans'][0]['blowup_fixture']
        store = FixtureStore(tmp_path / 'constants.yml')
        assert store.get(fixture['name']) == pytest.approx(fixture['frozen'])

        store.freeze(fixture['name'], fixture['frozen'] * 10, 14)
        assert main(['counterexample', '--plan', plan, '--mode', 'float', '--out', str(out),
                     '--config', path]) == EXIT_VIOLATION
        blowup = json.loads(out.read_text())['summary']['plans'][0]['blowup']
        assert blowup['monotone'] and not blowup['bounded_below']

    @pytest.mark.slow
    def test_counterexample_default_plans(self, tmp_path, config_file):
        path = Path(config_file())
        settings = yaml.safe_load(path.read_text())
        settings['counterexamples'] = {'plan_dir': str(PLAN_DIR),
                                       'default_plans': ['t1b.json', 't2b.json', 't3b.json', 't4b.json']}
        path.write_text(yaml.safe_dump(settings))
        out = tmp_path / 'blowup.json'
        assert main(['counterexample', '--mode', 'float', '--out', str(out), '--config', str(path)]) == EXIT_OK
        plans = json.loads(out.read_text())['summary']['plans']
        assert [plan['regime'] for plan in plans] == ['T1b', 'T2b', 'T3b', 'T4b']
        assert [plan['rows'][1] - plan['rows'][0] for plan in plans] == [6, 10, 2, 3]
        assert all(plan['blowup']['monotone'] for plan in plans)

    def test_bench(self, tmp_path, config_file):
        path = Path(config_file())
        settings = yaml.safe_load(path.read_text())
        settings['bench'] = {'resolutions': [2, 3], 'repeats': 1}
        path.write_text(yaml.safe_dump(settings))
        out = tmp_path / 'bench.json'
        main(['bench', '--out', str(out), '--config', str(path)])
        rows = json.loads(out.read_text())['rows']
        assert [row['M'] for row in rows] == [2, 3]
        assert all(row['naive_synthesize_s'] >= 0 for row in rows)


class TestUsage:
    """Bad invocations exit with the usage code"""

    def teardown_method(self):
        ConfigService.use_path(None)

    def test_parser_lists_commands(self):
        action = next(a for a in build_parser()._actions if a.dest == 'command')
        assert set(action.choices) == {'kernels', 'lemmas', 'bounds', 'counterexample', 'stats', 'bench'}

    @pytest.mark.parametrize("argv", [
        [],
        ['frobnicate'],
        ['stats', '--resolution', 'ten'],
        ['stats', '--output', 'xml'],
    ])
    def test_argument_errors(self, argv, capsys):
        assert main(argv) == EXIT_USAGE
        assert capsys.readouterr().err.startswith('dyadika:')

    @pytest.mark.parametrize("argv", [
        ['stats', '--resolution', '0'],
        ['stats', '--resolution', '30'],
        ['stats', '--threads', '0'],
        ['bounds', '-M', '3', '--p', '3'],
    ])
    def test_invalid_values(self, argv, config_file):
        assert main(argv + ['--config', config_file()]) == EXIT_USAGE

    def test_missing_plan(self, tmp_path, config_file):
        code = main(['counterexample', '--plan', str(tmp_path / 'none.json'), '--config', config_file()])
        assert code == EXIT_USAGE

    def test_invalid_plan(self, tmp_path, config_file):
        plan = write_plan(tmp_path, regime='T3b', p='1/2', alphas=[5, 9], resolution=8)
        assert main(['counterexample', '--plan', plan, '--config', config_file()]) == EXIT_USAGE

    def test_invalid_config(self, tmp_path):
        path = tmp_path / 'config.yml'
        path.write_text(yaml.safe_dump({'resolution': {'calibration': 99}}))
        assert main(['stats', '--config', str(path)]) == EXIT_USAGE
