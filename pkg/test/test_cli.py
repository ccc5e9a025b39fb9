from __future__ import annotations

import json
from pathlib import Path

import pytest

from ncbt.cli import EXIT_CONFIG
from ncbt.cli import EXIT_FAILED
from ncbt.cli import EXIT_NUMERIC
from ncbt.cli import EXIT_OK
from ncbt.cli import build_parser
from ncbt.cli import main
from ncbt.version import __version__

CONFIG_DIR = Path(__file__).resolve().parents[1] / 'resources' / 'configs'

HOFSTADTER = """\
[model]
kind = "hofstadter"
flux = "1/3"

[window]
sizes = [12, 12]

[invariant]
samples = 1
oracle_grid = 16
tolerance = 0.5
"""

SSH = """\
[model]
kind = "ssh"
t_intra = 0.5
t_inter = 1.0

[window]
sizes = [32]

[invariant]
samples = 1
"""

BUTTERFLY = """\
[model]
kind = "hofstadter"
fluxes = ["0/1", "1/3", "1/4", "1/5"]

[window]
sizes = [12, 12]
"""


@pytest.fixture
def write_config(tmp_path):
    def write(text: str, name: str = 'run.toml') -> str:
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    return write


def run(command: str, config: str, out) -> int:
    return main([command, '--config', config, '--out', str(out), '--jobs', '1'])


def test_parser():
    parser = build_parser()
    args = parser.parse_args(['chern', '--config', 'a.toml', '--seed', '4'])
    assert args.command == 'chern'
    assert args.seed == 4
    assert args.jobs is None
    assert parser.parse_args(['verify', '--quick']).quick
    with pytest.raises(SystemExit):
        parser.parse_args(['chern'])


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(['--version'])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_spectrum(write_config, tmp_path):
    out = tmp_path / 'out'
    assert run('spectrum', write_config(HOFSTADTER), out) == EXIT_OK
    raw = (out / 'spectrum.csv').read_bytes()
    assert b'\r\n' not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == 'index,e_0,residual'
    assert len(lines) == 1 + 144
    values = [float(line.split(',')[1]) for line in lines[1:]]
    assert values == sorted(values)
    gaps = (out / 'gaps.csv').read_text().splitlines()
    assert gaps[0] == 'index,lower,upper,width,midpoint'
    assert len(gaps) == 3
    manifest = json.loads((out / 'run.json').read_text())
    assert manifest['command'] == 'spectrum'
    assert manifest['version'] == __version__
    assert manifest['seed'] == 0
    assert sorted(manifest['outputs']) == ['gaps.csv', 'spectrum.csv', 'spectrum.json']


def test_chern(write_config, tmp_path):
    out = tmp_path / 'out'
    assert run('chern', write_config(HOFSTADTER), out) == EXIT_OK
    result = json.loads((out / 'chern.json').read_text())
    assert result['passed'] is True
    assert result['quantized'] is True
    assert result['matches_oracle'] is True
    assert result['chern']['nearest_integer'] == -1
    assert result['oracle']['value'] == -1
    assert result['e_fermi'] == pytest.approx(0.5 * (-2.0 + 1.0 - 3.0 ** 0.5), abs=0.1)
    assert result['idos']['value'] == pytest.approx(1.0 / 3.0, abs=1e-10)
    assert result['idos']['label'] == [0, -1]
    assert (out / 'chern.csv').exists()


def test_chern_is_deterministic(write_config, tmp_path):
    config = write_config(HOFSTADTER)
    assert run('chern', config, tmp_path / 'a') == EXIT_OK
    assert run('chern', config, tmp_path / 'b') == EXIT_OK
    for name in ('chern.json', 'chern.csv'):
        first = (tmp_path / 'a' / name).read_bytes()
        assert (tmp_path / 'b' / name).read_bytes() == first


def test_chern_not_quantized(write_config, tmp_path):
    strict = HOFSTADTER.replace('tolerance = 0.5', 'tolerance = 1e-12')
    out = tmp_path / 'out'
    assert run('chern', write_config(strict), out) == EXIT_FAILED
    assert json.loads((out / 'chern.json').read_text())['passed'] is False


def test_winding(write_config, tmp_path):
    out = tmp_path / 'out'
    assert run('winding', write_config(SSH), out) == EXIT_OK
    result = json.loads((out / 'winding.json').read_text())
    assert result['passed'] is True
    assert result['chern']['nearest_integer'] == 1
    assert result['oracle']['value'] == 1
    assert result['chern']['value'] == pytest.approx(1.0, abs=1e-3)


def test_winding_needs_chiral_model(write_config, tmp_path):
    assert run('winding', write_config(HOFSTADTER), tmp_path / 'out') == EXIT_CONFIG


def test_butterfly(write_config, tmp_path):
    out = tmp_path / 'out'
    assert run('butterfly', write_config(BUTTERFLY), out) == EXIT_OK
    lines = (out / 'butterfly.csv').read_text().splitlines()
    assert lines[0] == 'flux,flux_value,eigenvalue,residual'
    assert len(lines) == 1 + 3 * 144
    assert {line.split(',')[0] for line in lines[1:]} == {'0', '1/3', '1/4'}
    manifest = json.loads((out / 'run.json').read_text())
    assert manifest['skipped'] == ['1/5']


def test_butterfly_needs_hofstadter(write_config, tmp_path):
    assert run('butterfly', write_config(SSH), tmp_path / 'out') == EXIT_CONFIG


def test_config_errors(write_config, tmp_path):
    out = tmp_path / 'out'
    assert run('spectrum', write_config('[model]\ncolour = "red"\n'), out) == EXIT_CONFIG
    assert run('spectrum', str(tmp_path / 'missing.toml'), out) == EXIT_CONFIG
    bad_axes = HOFSTADTER + 'axes = [1, 3]\n'
    assert run('chern', write_config(bad_axes), out) == EXIT_CONFIG
    wide_margin = HOFSTADTER.replace(
        'sizes = [12, 12]', 'sizes = [6, 6]\nboundary = "open"\nmargin = 5',
    )
    assert run('chern', write_config(wide_margin), out) == EXIT_CONFIG


def test_numerical_errors(write_config, tmp_path):
    out = tmp_path / 'out'
    small = HOFSTADTER.replace('sizes = [12, 12]', 'sizes = [4, 4]')
    assert run('spectrum', write_config(small), out) == EXIT_NUMERIC
    gapless = '[model]\nkind = "qwz"\nmass = 2.0\n\n[spectral]\nfermi_level = 0.0\n'
    assert run('chern', write_config(gapless), out) == EXIT_NUMERIC


def test_jobs_zero(write_config, tmp_path):
    config = write_config(HOFSTADTER)
    assert main(['spectrum', '--config', config, '--jobs', '0']) == EXIT_CONFIG


def test_seed_override(write_config, tmp_path):
    disordered = HOFSTADTER.replace('flux = "1/3"', 'flux = "1/3"\ndisorder = 0.3')
    config = write_config(disordered)
    out = tmp_path / 'out'
    assert main(['spectrum', '--config', config, '--out', str(out), '--seed', '5']) == 0
    manifest = json.loads((out / 'run.json').read_text())
    assert manifest['seed'] == 5
    assert manifest['config']['invariant']['seed'] == 5


@pytest.mark.slow
def test_chern_disordered_hofstadter(tmp_path):
    out = tmp_path / 'out'
    config = str(CONFIG_DIR / 'hofstadter_disorder.toml')
    assert run('chern', config, out) == EXIT_OK
    result = json.loads((out / 'chern.json').read_text())
    chern = result['chern']
    assert result['passed'] is True
    assert result['oracle'] is None
    assert chern['nearest_integer'] == -1
    assert abs(chern['value'] + 1.0) <= 5e-2
    assert len(chern['per_sample']) == 8
    assert all(round(re) == -1 for re, _ in chern['per_sample'])
    assert 0.0 <= chern['stderr'] < 5e-2


@pytest.mark.slow
def test_winding_disordered_ssh(tmp_path):
    out = tmp_path / 'out'
    config = str(CONFIG_DIR / 'ssh_disorder.toml')
    assert run('winding', config, out) == EXIT_OK
    result = json.loads((out / 'winding.json').read_text())
    winding = result['chern']
    assert result['passed'] is True
    assert winding['nearest_integer'] == 1
    assert abs(winding['value'] - 1.0) <= 1e-2
    assert len(winding['per_sample']) == 8
    assert 0.0 <= winding['stderr'] < 1e-2
