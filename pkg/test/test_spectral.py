from __future__ import annotations

import logging

import numpy as np
import pytest

from ncbt.errors import DimensionError
from ncbt.errors import GaplessError
from ncbt.errors import HermiticityError
from ncbt.lattice_rep import LatticeOperator
from ncbt.lattice_rep import Window
from ncbt.lattice_rep import materialize
from ncbt.models import SIGMA_X
from ncbt.models import SIGMA_Y
from ncbt.models import build_hamiltonian
from ncbt.models import chiral_bloch_block
from ncbt.models import hofstadter
from ncbt.models import ssh
from ncbt.spectral import Contour
from ncbt.spectral import Gap
from ncbt.spectral import chiral_unitary
from ncbt.spectral import default_contour
from ncbt.spectral import eigen_residuals
from ncbt.spectral import eigh
from ncbt.spectral import fermi_dirac
from ncbt.spectral import fermi_projection
from ncbt.spectral import find_gaps
from ncbt.spectral import riesz_projection


def op(data) -> LatticeOperator:
    return LatticeOperator.from_matrix(np.asarray(data, dtype=complex))


def gapped_matrix(
        rng: np.random.Generator,
        size: int = 8,
) -> tuple[LatticeOperator, float]:
    """Return a random Hermitian matrix with a gap (-0.5, 0.5) around 0."""
    values = np.concatenate([
        rng.uniform(-3.0, -0.5, size // 2), rng.uniform(0.5, 3.0, size - size // 2),
    ])
    a = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    q, _ = np.linalg.qr(a)
    return op(q @ np.diag(values) @ q.conj().T), 0.0


def test_eigh_examples():
    assert np.allclose(eigh(op(np.diag([1.0, -1.0]))).eigenvalues, [-1.0, 1.0])
    assert np.allclose(eigh(op(SIGMA_X)).eigenvalues, [-1.0, 1.0])


def test_eigh_reconstructs(rng):
    a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    m = op(a + a.conj().T)
    spec = eigh(m)
    v = spec.eigenvectors
    assert np.all(np.diff(spec.eigenvalues) >= 0.0)
    assert np.allclose(v @ np.diag(spec.eigenvalues) @ v.conj().T, m.data, atol=1e-9)
    assert np.allclose(v.conj().T @ v, np.eye(6), atol=1e-10)
    assert np.max(eigen_residuals(m, spec)) < 1e-9 * np.linalg.norm(m.data, 2)
    assert spec.source_hash == eigh(op(m.data.copy())).source_hash


def test_eigh_rejects_non_hermitian():
    with pytest.raises(HermiticityError):
        eigh(op([[0.0, 1.0], [0.0, 0.0]]))


def test_find_gaps():
    gaps = find_gaps(eigh(op(np.diag([-1.0, 1.0]))), 0.5)
    assert gaps == [Gap(-1.0, 1.0)]
    assert gaps[0].width == 2.0
    assert gaps[0].midpoint == 0.0
    assert gaps[0].contains(0.3)
    assert not gaps[0].contains(1.0)
    assert find_gaps(np.arange(10) * 0.1, 0.5) == []
    assert find_gaps([3.0, -3.0, 0.0], 1.0) == [Gap(-3.0, 0.0), Gap(0.0, 3.0)]
    with pytest.raises(ValueError):
        find_gaps([0.0, 1.0], 0.0)
    with pytest.raises(ValueError):
        Gap(1.0, 1.0)


def test_find_gaps_hofstadter_third():
    w = Window((24, 24))
    h = materialize(build_hamiltonian(hofstadter(1, 3)), None, w)
    gaps = find_gaps(eigh(h), 0.5)
    assert len(gaps) == 2
    lower, upper = gaps
    assert lower.lower == pytest.approx(-2.0, abs=0.05)
    assert lower.upper == pytest.approx(1.0 - np.sqrt(3.0), abs=0.05)
    assert upper.lower == pytest.approx(np.sqrt(3.0) - 1.0, abs=0.05)
    assert upper.upper == pytest.approx(2.0, abs=0.05)


def test_fermi_projection_examples():
    spec = eigh(op(np.diag([-1.0, 1.0])))
    assert np.allclose(fermi_projection(spec, 0.0).data, np.diag([1.0, 0.0]))
    assert np.allclose(fermi_projection(spec, -5.0).data, 0.0)
    assert np.allclose(fermi_projection(spec, 5.0).data, np.eye(2))
    with pytest.raises(GaplessError):
        fermi_projection(spec, 1.0 + 1e-10)


def test_fermi_projection_properties(rng):
    for _ in range(5):
        m, e_fermi = gapped_matrix(rng)
        p = fermi_projection(eigh(m), e_fermi).data
        assert np.allclose(p @ p, p, atol=1e-10)
        assert np.allclose(p, p.conj().T, atol=1e-10)
        assert np.allclose(p @ m.data, m.data @ p, atol=1e-9)
        assert round(np.trace(p).real) == 4


def test_fermi_dirac(rng):
    m, e_fermi = gapped_matrix(rng)
    spec = eigh(m)
    p = fermi_projection(spec, e_fermi).data
    assert np.allclose(fermi_dirac(spec, e_fermi, 200.0).data, p, atol=1e-10)
    half = fermi_dirac(eigh(op(np.diag([0.0]))), 0.0, 1.0).data
    assert half[0, 0] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        fermi_dirac(spec, 0.0, 0.0)


def test_contour():
    c = Contour(-2 - 1j, 0 + 1j, 8)
    z, wts = c.nodes()
    assert z.shape == wts.shape == (32,)
    # ∮ dz = 0 and ∮ dz / z = 2πi around the origin.
    assert abs(np.sum(wts)) < 1e-12
    ring = Contour(-1 - 1j, 1 + 1j, 64)
    z, wts = ring.nodes()
    assert np.sum(wts / z) == pytest.approx(2j * np.pi, abs=1e-10)
    z, wts = Contour(-1 - 1j, 1 + 1j, 8, 'trapezoid').nodes()
    assert z.shape == (36,)
    with pytest.raises(ValueError):
        Contour(1 + 1j, -1 - 1j)
    with pytest.raises(ValueError):
        Contour(-1 - 1j, 1 + 1j, rule='simpson')
    with pytest.raises(ValueError):
        Contour(-1 - 1j, 1 + 1j, kind='circle')


def test_default_contour():
    c = default_contour([-3.0, -1.0, 1.0, 2.0], 0.0)
    assert c.lower_left == complex(-4.0, -2.0)
    assert c.upper_right == complex(0.0, 2.0)
    empty = default_contour([1.0, 2.0], 0.0)
    assert empty.upper_right.real == 0.0
    with pytest.raises(GaplessError):
        default_contour([-1.0, 0.0], 0.0)


def test_riesz_examples():
    m = op(np.diag([-1.0, 1.0]))
    p = riesz_projection(m, Contour(-2 - 1j, 0 + 1j))
    assert np.allclose(p.data, np.diag([1.0, 0.0]), atol=1e-8)
    nothing = riesz_projection(m, Contour(2 - 1j, 3 + 1j))
    assert np.allclose(nothing.data, 0.0, atol=1e-8)


def test_contour_distance():
    contour = Contour(-2 - 1j, 0 + 1j)
    assert contour.distance([-1.0, 1.0]) == pytest.approx(1.0)
    assert contour.distance([-1.0 + 0.75j]) == pytest.approx(0.25)
    assert contour.distance([0.0]) == 0.0
    assert Contour(-2 - 1j, 0 + 1j, 8).step() > contour.step()


def test_riesz_warns_near_spectrum(caplog):
    m = op(np.diag([-1.0, 1.0]))
    with caplog.at_level(logging.WARNING, logger='ncbt'):
        riesz_projection(m, Contour(-2 - 1j, 0 + 1j))
    assert not caplog.records
    with caplog.at_level(logging.WARNING, logger='ncbt'):
        riesz_projection(m, Contour(-2 - 1j, -0.9 + 1j, 8))
    assert 'quadrature steps' in caplog.text


def test_riesz_matches_eigh(rng):
    for _ in range(20):
        m, e_fermi = gapped_matrix(rng)
        spec = eigh(m)
        contour = default_contour(spec.eigenvalues, e_fermi)
        riesz = riesz_projection(m, contour).data
        assert np.max(np.abs(riesz - fermi_projection(spec, e_fermi).data)) <= 1e-6
        assert np.max(np.abs(riesz @ riesz - riesz)) <= 1e-6


def test_riesz_trapezoid_converges(rng):
    m, e_fermi = gapped_matrix(rng, 6)
    spec = eigh(m)
    residuals = []
    for points in (16, 32, 64, 128):
        contour = default_contour(spec.eigenvalues, e_fermi, points, 'trapezoid')
        p = riesz_projection(m, contour).data
        residuals.append(np.max(np.abs(p @ p - p)))
    assert all(b < a for a, b in zip(residuals, residuals[1:]))


def test_chiral_unitary_examples():
    u = chiral_unitary(op(SIGMA_X), (1, 1))
    assert np.allclose(u.data, [[1.0]])
    u = chiral_unitary(op(SIGMA_Y), (1, 1))
    assert np.allclose(u.data, [[1j]])
    per_site = LatticeOperator.from_matrix(np.asarray(SIGMA_Y, dtype=complex), 2)
    assert np.allclose(chiral_unitary(per_site, (1, 1)).data, [[1j]])


def test_chiral_unitary_block_grading(rng):
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    unitary, _ = np.linalg.qr(a)
    zero = np.zeros((3, 3))
    h = op(np.block([[zero, unitary.conj().T], [unitary, zero]]))
    u = chiral_unitary(h, (1, 1))
    assert u.data.shape == (3, 3)
    assert u.window.size == 3
    assert np.allclose(u.data, unitary, atol=1e-8)


def test_chiral_unitary_reassembles():
    model = ssh(0.5, 1.0)
    w = Window((16,), orbital_dim=2)
    h = materialize(build_hamiltonian(model), None, w)
    u = chiral_unitary(h, (1, 1))
    assert u.window.orbital_dim == 1
    assert np.allclose(u.data.conj().T @ u.data, np.eye(16), atol=1e-8)
    p = fermi_projection(eigh(h), 0.0).data
    q = np.eye(32) - 2.0 * p
    assert np.allclose(q[1::2, 0::2], u.data, atol=1e-8)
    assert np.allclose(q[0::2, 1::2], u.data.conj().T, atol=1e-8)


def test_chiral_unitary_bloch_phase():
    model = ssh(0.5, 1.0)
    for k in np.linspace(0.0, 2.0 * np.pi, 7):
        block = chiral_bloch_block(model, [k])
        h = np.block([[np.zeros((1, 1)), block.conj().T], [block, np.zeros((1, 1))]])
        u = chiral_unitary(op(h), (1, 1)).data
        assert abs(u[0, 0]) == pytest.approx(1.0)


def test_chiral_unitary_rejects():
    with pytest.raises(HermiticityError):
        chiral_unitary(op(np.diag([1.0, -1.0])), (1, 1))
    with pytest.raises(DimensionError):
        chiral_unitary(op(SIGMA_X), (2, 1))
    with pytest.raises(DimensionError):
        chiral_unitary(op(np.zeros((4, 4))), (3, 1))
    with pytest.raises(GaplessError):
        chiral_unitary(op(np.zeros((2, 2))), (1, 1))
