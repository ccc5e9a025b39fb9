from __future__ import annotations

from fractions import Fraction
import math

import numpy as np
import pytest

from ncbt.errors import DimensionError
from ncbt.errors import GaplessError
from ncbt.errors import NumericalError
from ncbt.invariants import ChernResult
from ncbt.invariants import MultiIndex
from ncbt.invariants import chern_even
from ncbt.invariants import chern_odd
from ncbt.invariants import chern_odd_telescoped
from ncbt.invariants import chern_range
from ncbt.invariants import disorder_average
from ncbt.invariants import gap_label
from ncbt.invariants import hall_tensor
from ncbt.invariants import kspace_chern_oracle
from ncbt.invariants import lambda_const
from ncbt.invariants import pfaffian
from ncbt.invariants import winding_oracle
from ncbt.lattice_rep import LatticeOperator
from ncbt.lattice_rep import Window
from ncbt.lattice_rep import materialize
from ncbt.lattice_rep import volume_trace
from ncbt.models import bloch_function
from ncbt.models import build_hamiltonian
from ncbt.models import chiral_bloch_function
from ncbt.models import hofstadter
from ncbt.models import qwz
from ncbt.models import ssh
from ncbt.spectral import chiral_unitary
from ncbt.spectral import eigh
from ncbt.spectral import fermi_projection
from ncbt.spectral import find_gaps
from ncbt.twist_core import TwistMatrix


def lowest_gap_projection(model, window: Window) -> LatticeOperator:
    spec = eigh(materialize(build_hamiltonian(model), None, window))
    return fermi_projection(spec, find_gaps(spec, 0.5)[0].midpoint)


def ssh_unitary(t_intra: float, t_inter: float, cells: int) -> LatticeOperator:
    model = ssh(t_intra, t_inter)
    h = materialize(build_hamiltonian(model), None, Window((cells,), orbital_dim=2))
    return chiral_unitary(h, model.chiral_split)


def test_multi_index():
    assert len(MultiIndex((2, 1), 2)) == 2
    assert MultiIndex((2, 1), 2).is_strong
    assert not MultiIndex((1,), 2).is_strong
    assert MultiIndex.of([1, 3], 3).axes == (1, 3)
    with pytest.raises(DimensionError):
        MultiIndex((1, 1), 2)
    with pytest.raises(DimensionError):
        MultiIndex((0,), 2)
    with pytest.raises(DimensionError):
        MultiIndex.of(MultiIndex((1,), 1), 2)


def test_lambda_const():
    assert lambda_const(2) == pytest.approx(2j * math.pi)
    assert lambda_const(1) == pytest.approx(1j)
    assert lambda_const(3) == pytest.approx(-math.pi / 3)
    assert lambda_const(4) == pytest.approx((2j * math.pi) ** 2 / 2)
    with pytest.raises(ValueError):
        lambda_const(0)


def test_chern_even_trivial_projections():
    w = Window((4, 4))
    zero = LatticeOperator(w, np.zeros((16, 16)))
    one = LatticeOperator.identity(w)
    assert chern_even(zero, (1, 2)) == 0.0
    assert chern_even(one, (1, 2)) == 0.0
    with pytest.raises(ValueError):
        chern_even(one, (1,))
    with pytest.raises(NumericalError):
        chern_even(LatticeOperator(w, 0.5 * np.eye(16)), (1, 2))


def test_chern_odd_trivial_unitaries():
    w = Window((8,))
    one = LatticeOperator.identity(w)
    assert chern_odd(one, (1,)) == 0.0
    phase = LatticeOperator(w, np.exp(0.7j) * np.eye(8))
    assert abs(chern_odd(phase, (1,))) < 1e-15
    with pytest.raises(ValueError):
        chern_odd(LatticeOperator.identity(Window((4, 4))), (1, 2))
    with pytest.raises(NumericalError):
        chern_odd(LatticeOperator(w, 2.0 * np.eye(8)), (1,))


def test_hofstadter_third_golden():
    """The lowest Hofstadter band at flux 1/3 has Chern number -1."""
    p = lowest_gap_projection(hofstadter(1, 3), Window((18, 18)))
    value = chern_even(p, (1, 2))
    assert abs(value.imag) < 1e-6
    assert value.real == pytest.approx(-1.0, abs=0.25)
    swapped = chern_even(p, (2, 1))
    assert swapped.real == pytest.approx(-value.real, abs=1e-10)
    complement = p.like(np.eye(p.window.size) - p.data)
    assert chern_even(complement, (1, 2)).real == pytest.approx(-value.real, abs=1e-8)


def test_hofstadter_third_oracle():
    model = hofstadter(1, 3)
    oracle = kspace_chern_oracle(bloch_function(model), 1, grid=16)
    assert oracle.value == -1
    assert oracle.stable
    assert oracle.residual < 1e-6


def test_qwz_golden():
    model = qwz(1.0)
    oracle = kspace_chern_oracle(bloch_function(model), 1, grid=16)
    assert oracle.value == -1
    p = lowest_gap_projection(model, Window((12, 12), orbital_dim=2))
    value = chern_even(p, (1, 2)).real
    assert value == pytest.approx(oracle.value, abs=0.25)


def test_qwz_trivial_phase():
    oracle = kspace_chern_oracle(bloch_function(qwz(3.0)), 1, grid=16)
    assert oracle.value == 0


def test_kspace_oracle_flat_bands():
    def flat(k):
        return np.diag([-1.0, 1.0]).astype(complex)

    result = kspace_chern_oracle(flat, 1, grid=8)
    assert result.value == 0
    assert result.raw == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        kspace_chern_oracle(flat, 3, grid=8)


def test_kspace_oracle_gapless():
    with pytest.raises(GaplessError):
        kspace_chern_oracle(bloch_function(qwz(2.0)), 1, grid=16)


def test_hall_tensor():
    p = lowest_gap_projection(hofstadter(1, 3), Window((12, 12)))
    table = hall_tensor(p)
    assert table.shape == (2, 2)
    assert table[0, 1] == pytest.approx(-table[1, 0])
    assert table[0, 0] == 0.0
    assert table[0, 1] == pytest.approx(chern_even(p, (1, 2)).real)
    assert np.array_equal(hall_tensor(p, margin=2), table)
    with pytest.raises(DimensionError):
        hall_tensor(LatticeOperator.identity(Window((4,))))


def test_ssh_winding_golden():
    u = ssh_unitary(0.5, 1.0, 32)
    assert chern_odd(u, (1,)).real == pytest.approx(1.0, abs=1e-3)
    assert abs(chern_odd(u, (1,)).imag) < 1e-6
    trivial = ssh_unitary(1.0, 0.5, 32)
    assert chern_odd(trivial, (1,)).real == pytest.approx(0.0, abs=1e-3)


def test_ssh_winding_matches_oracle():
    for t_intra, t_inter in [(0.5, 1.0), (1.0, 0.5), (0.3, 1.0)]:
        q = chiral_bloch_function(ssh(t_intra, t_inter))
        oracle = winding_oracle(lambda k, q=q: q([k]), grid=256)
        u = ssh_unitary(t_intra, t_inter, 32)
        assert chern_odd(u, (1,)).real == pytest.approx(oracle.value, abs=1e-3)


def test_telescoped_odd_agrees():
    u = ssh_unitary(0.5, 1.0, 24)
    assert chern_odd_telescoped(u, (1,)) == pytest.approx(chern_odd(u, (1,)), abs=1e-10)


def test_winding_oracle_examples():
    assert winding_oracle(lambda k: 2.0).value == 0
    assert winding_oracle(lambda k: 0.5 + np.exp(1j * k)).value == 1
    assert winding_oracle(lambda k: 1.0 + 0.5 * np.exp(1j * k)).value == 0
    assert winding_oracle(lambda k: np.exp(-2j * k), grid=64).value == -2
    with pytest.raises(GaplessError):
        winding_oracle(lambda k: 1.0 + np.exp(1j * k), grid=64)


def test_pfaffian(rng):
    assert pfaffian([[0.0, 2.5], [-2.5, 0.0]]) == pytest.approx(2.5)
    assert pfaffian(np.zeros((2, 2))) == 0.0
    assert pfaffian(np.zeros((0, 0))) == 1.0
    for _ in range(5):
        a = rng.normal(size=(4, 4))
        a = a - a.T
        assert pfaffian(a) ** 2 == pytest.approx(np.linalg.det(a), abs=1e-10)
    with pytest.raises(ValueError):
        pfaffian(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        pfaffian([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ValueError):
        pfaffian(np.zeros((2, 3)))


def test_chern_range():
    phi = 2.0 * math.pi / 3.0
    theta = TwistMatrix.from_fluxes(2, {(2, 1): Fraction(1, 3)})
    assert chern_range(theta, (1, 2)).offsets == (1.0,)
    assert chern_range(theta, (1,)).offsets == (1.0,)
    trace_range = chern_range(theta)
    assert trace_range.offsets[0] == 1.0
    assert trace_range.offsets[1] == pytest.approx(-phi / (2.0 * math.pi))
    assert len(trace_range.offsets) == 2
    assert chern_range(TwistMatrix.zero(2)).offsets == (1.0,)


def test_gap_label():
    offsets = (1.0, -1.0 / 3.0)
    assert gap_label(1.0 / 3.0, offsets) == (0, -1)
    assert gap_label(2.0 / 3.0, offsets) == (0, -2)
    assert gap_label(2.0, offsets) == (2, 0)
    assert gap_label(0.5, offsets) is None
    assert gap_label(1.0, ()) is None
    described = chern_range(TwistMatrix.from_fluxes(2, {(2, 1): Fraction(1, 3)}))
    assert described.contains(1.0 / 3.0)
    assert not described.contains(0.1)


def test_idos_gap_label():
    """The integrated density of states below the first gap is 1/3."""
    p = lowest_gap_projection(hofstadter(1, 3), Window((12, 12)))
    idos = volume_trace(p).real
    assert idos == pytest.approx(1.0 / 3.0, abs=1e-10)
    theta = TwistMatrix.from_fluxes(2, {(2, 1): Fraction(1, 3)})
    assert chern_range(theta).label(idos) == (0, -1)


def test_disorder_average():
    single = disorder_average([0.7 + 0.1j])
    assert single.value == pytest.approx(0.7)
    assert single.stderr == 0.0
    ones = disorder_average([1.0, 1.0, 1.0])
    assert ones.value == 1.0
    assert ones.stderr == 0.0
    mixed = disorder_average([1 + 0.01j, 0.98, 1.02], axes=(1, 2), dim=2)
    assert mixed.value == pytest.approx(1.0)
    assert mixed.imag_residual == pytest.approx(0.01)
    assert mixed.stderr == pytest.approx(0.02 / math.sqrt(3.0))
    assert mixed.nearest_integer == 1
    assert mixed.is_quantized(1e-6)
    assert mixed.is_strong
    with pytest.raises(ValueError):
        disorder_average([])


def test_chern_result_to_dict():
    result = ChernResult(
        value=-0.98, imag_residual=1e-9, per_sample=(-0.98 + 1e-9j,), stderr=0.0,
        axes=(1,), dim=2, window_sizes=(8, 8), boundary='periodic',
    )
    out = result.to_dict()
    assert out['per_sample'] == [[-0.98, 1e-9]]
    assert out['nearest_integer'] == -1
    assert out['quantization_error'] == pytest.approx(0.02)
    assert out['is_strong'] is False
    assert out['window_sizes'] == [8, 8]


@pytest.mark.slow
def test_hofstadter_acceptance():
    model = hofstadter(1, 3)
    p = lowest_gap_projection(model, Window((24, 24)))
    oracle = kspace_chern_oracle(bloch_function(model), 1, grid=64)
    assert chern_even(p, (1, 2)).real == pytest.approx(oracle.value, abs=1e-2)


@pytest.mark.slow
def test_ssh_acceptance():
    u = ssh_unitary(0.5, 1.0, 64)
    q = chiral_bloch_function(ssh(0.5, 1.0))
    oracle = winding_oracle(lambda k: q([k]), grid=2048)
    assert oracle.value == 1
    assert chern_odd(u, (1,)).real == pytest.approx(1.0, abs=1e-3)
