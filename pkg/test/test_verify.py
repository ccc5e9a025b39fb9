from __future__ import annotations

import json
import math

import numpy as np
import pytest

import ncbt.invariants
from ncbt.cli import main
from ncbt.twist_core import NcPoly
from ncbt.verify import SUITES
from ncbt.verify import Check
from ncbt.verify import VerifyReport
from ncbt.verify import random_poly
from ncbt.verify import random_twist
from ncbt.verify import run_suite
from ncbt.verify import run_suites


@pytest.fixture
def flipped_chern_sign(monkeypatch):
    """Replace the normalization constant by its opposite."""
    original = ncbt.invariants.lambda_const
    monkeypatch.setattr(ncbt.invariants, 'lambda_const', lambda n: -original(n))


def test_check_and_report():
    ok = Check('algebra', 'ok', 1e-14, 1e-12)
    bad = Check('range', 'bad', math.inf, 0.0)
    assert ok.passed
    assert not bad.passed
    report = VerifyReport((ok, bad))
    assert not report.passed
    assert report.suite_status() == {'algebra': True, 'range': False}
    text = report.render()
    assert text.endswith('verify: FAIL\n')
    assert 'suite range: FAIL' in text
    assert json.loads(json.dumps(report.to_dict()))['suites']['algebra'] is True


def test_random_inputs(rng):
    theta = random_twist(rng, 3, (4,))
    assert theta.dim == 3
    fluxes = theta.entries[np.tril_indices(3, -1)] / (2.0 * math.pi)
    assert np.allclose(fluxes * 4, np.round(fluxes * 4))
    p = random_poly(rng, theta, radius=1, orbital_dim=2)
    assert isinstance(p, NcPoly)
    assert all(max(abs(v) for v in s) <= 1 for s in p.coeffs)


def test_unknown_suite():
    with pytest.raises(ValueError):
        run_suite('geometry')


def test_quick_suites_pass():
    report = run_suites(quick=True)
    failed = [c for c in report.checks if not c.passed]
    assert not failed, failed
    assert set(report.suite_status()) == set(SUITES)
    assert report.render().endswith('verify: PASS\n')


def test_quick_suites_cover_properties():
    report = run_suites(quick=True)
    names = {c.name for c in report.checks}
    assert {
        'commutation relation',
        'torus action is multiplicative',
        'derivations commute',
        'l1 norm is submultiplicative',
        'smooth seminorms increase',
        'fermi projection commutes',
        'fermi projection rank',
        'ssh 0.5/1.0 chiral unitary reassembles',
        'hull metric triangle inequality',
        'coefficient action composes',
        'spectrum is shift invariant',
        'direct translations are symmetries',
        'weak disorder keeps the chern integer',
    } <= names
    assert report.passed


def test_report_is_deterministic():
    suites = ('algebra', 'representation', 'range')
    first = run_suites(quick=True, suites=suites).render()
    assert run_suites(quick=True, suites=suites).render() == first


@pytest.mark.usefixtures('flipped_chern_sign')
def test_wrong_normalization_is_detected():
    report = run_suites(quick=True, suites=('calibration', 'odd'))
    assert report.suite_status() == {'calibration': False, 'odd': False}
    assert not report.passed


@pytest.mark.usefixtures('flipped_chern_sign')
def test_verify_command_fails(capsys, monkeypatch):
    monkeypatch.delenv('NCBT_JOBS', raising=False)
    assert main(['verify', '--quick']) == 1
    assert capsys.readouterr().out.endswith('verify: FAIL\n')


def test_verify_command(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv('NCBT_JOBS', raising=False)
    out = tmp_path / 'out'
    assert main(['verify', '--quick', '--out', str(out)]) == 0
    assert capsys.readouterr().out.endswith('verify: PASS\n')
    result = json.loads((out / 'verify.json').read_text())
    assert result['passed'] is True
    assert result['quick'] is True
    assert json.loads((out / 'run.json').read_text())['outputs'] == ['verify.json']


@pytest.mark.slow
def test_full_suites_pass():
    assert run_suites(quick=False).passed
