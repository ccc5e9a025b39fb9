"""Deterministic self-check suites behind `ncbt verify`.

Each suite evaluates identities of the algebra, of its lattice
representation and of the invariants on seeded inputs and small golden
models, returning one `Check` per identity.

"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
import math
from typing import Callable, Optional, Sequence

from joblib import Parallel
from joblib import delayed
import numpy as np

from .disorder import DisorderSpec
from .disorder import act
from .disorder import hull_metric
from .disorder import probe_configs
from .disorder import sample_config
from .disorder import shift
from .errors import NcbtError
from .invariants import chern_even
from .invariants import chern_odd
from .invariants import chern_odd_telescoped
from .invariants import chern_range
from .invariants import gap_label
from .invariants import kspace_chern_oracle
from .invariants import pfaffian
from .invariants import winding_oracle
from .lattice_rep import LatticeOperator
from .lattice_rep import Window
from .lattice_rep import covariance_residual
from .lattice_rep import direct_translation
from .lattice_rep import dual_translation
from .lattice_rep import materialize
from .lattice_rep import position_commutator
from .lattice_rep import volume_trace
from .models import SiteTerm
from .models import bloch_function
from .models import build_hamiltonian
from .models import chiral_bloch_function
from .models import hofstadter
from .models import qwz
from .models import ssh
from .spectral import Contour
from .spectral import chiral_unitary
from .spectral import default_contour
from .spectral import eigh
from .spectral import fermi_dirac
from .spectral import fermi_projection
from .spectral import find_gaps
from .spectral import riesz_projection
from .twist_core import Coefficient
from .twist_core import NcPoly
from .twist_core import TwistMatrix
from .twist_core import adjoint
from .twist_core import cocycle
from .twist_core import derive
from .twist_core import fejer
from .twist_core import gram0
from .twist_core import l1_norm
from .twist_core import monomial
from .twist_core import smooth_seminorm
from .twist_core import torus_act
from .twist_core import trace_coefficient
from .utils import debug

SUITES = (
    'algebra',
    'representation',
    'spectral',
    'calibration',
    'odd',
    'range',
    'disorder',
)

VERIFY_SEED = 20240601


@dataclass(frozen=True)
class Check:
    """One verified identity: `value` is a deviation compared to `tolerance`."""

    suite: str
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tolerance)


@dataclass(frozen=True)
class VerifyReport:
    checks: tuple[Check, ...]
    quick: bool = False

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def suite_status(self) -> dict[str, bool]:
        status: dict[str, bool] = {}
        for c in self.checks:
            status[c.suite] = status.get(c.suite, True) and c.passed
        return status

    def render(self) -> str:
        """Return the text report, one line per check then one per suite."""
        lines = []
        for c in self.checks:
            lines.append(
                f'{c.suite:<15} {c.name:<40} {"PASS" if c.passed else "FAIL"}'
                f'  value={c.value:.3e}  tol={c.tolerance:.1e}',
            )
        for suite, ok in self.suite_status().items():
            lines.append(f'suite {suite}: {"PASS" if ok else "FAIL"}')
        lines.append(f'verify: {"PASS" if self.passed else "FAIL"}')
        return '\n'.join(lines) + '\n'

    def to_dict(self) -> dict:
        return {
            'quick': self.quick,
            'passed': self.passed,
            'suites': self.suite_status(),
            'checks': [
                {
                    'suite': c.suite,
                    'name': c.name,
                    'value': c.value,
                    'tolerance': c.tolerance,
                    'passed': c.passed,
                }
                for c in self.checks
            ],
        }


def random_twist(
        rng: np.random.Generator,
        dim: int,
        denominators: Sequence[int] = (1, 2, 3, 4, 6),
) -> TwistMatrix:
    """Return a twist with entries 2πp/q, q drawn from `denominators`."""
    fluxes = {}
    for row in range(2, dim + 1):
        for col in range(1, row):
            q = int(rng.choice(denominators))
            fluxes[(row, col)] = Fraction(int(rng.integers(0, q)), q)
    return TwistMatrix.from_fluxes(dim, fluxes)


def random_poly(
        rng: np.random.Generator,
        twist: TwistMatrix,
        radius: int = 1,
        orbital_dim: int = 1,
        disorder: Optional[DisorderSpec] = None,
        density: float = 0.6,
) -> NcPoly:
    """Return a random polynomial supported in [-radius, radius]^d.

    With a non-clean `disorder`, about half of the coefficients are site
    functions.

    """
    n = orbital_dim
    coeffs = {}
    for s in product(range(-radius, radius + 1), repeat=twist.dim):
        if rng.random() > density:
            continue
        m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        if disorder is not None and not disorder.is_clean and rng.random() < 0.5:
            term = SiteTerm(
                m,
                base=float(rng.normal()),
                strength=float(rng.normal()),
                coordinate=int(rng.integers(disorder.per_site_dim)),
            )
            coeffs[s] = Coefficient.site_function(term, n)
        else:
            coeffs[s] = m
    if not coeffs:
        coeffs[(0,) * twist.dim] = np.eye(n)
    return NcPoly(twist, n, coeffs, disorder)


def _max_abs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a), initial=0.0))


def _op_diff(a: LatticeOperator, b: LatticeOperator) -> float:
    return _max_abs(a.data - b.data)


def _lowest_gap_projection(h: LatticeOperator, min_width: float = 0.5) -> LatticeOperator:
    spec = eigh(h)
    gap = find_gaps(spec, min_width)[0]
    return fermi_projection(spec, gap.midpoint)


def _algebra(quick: bool) -> list[Check]:
    rng = np.random.default_rng(VERIFY_SEED)
    count = 3 if quick else 12
    checks = []

    theta3 = random_twist(rng, 3)
    worst = 0.0
    for _ in range(20):
        x, y, z = (rng.integers(-3, 4, size=3) for _ in range(3))
        lhs = cocycle(theta3, x, y) * cocycle(theta3, x + y, z)
        rhs = cocycle(theta3, x, y + z) * cocycle(theta3, y, z)
        worst = max(worst, abs(lhs - rhs))
    checks.append(Check('algebra', 'cocycle identity', worst, 1.0e-12))

    disorder = DisorderSpec(2, 2, 8, 'uniform', 7)
    samples = probe_configs(disorder)
    assoc = anti = invol = gram = leibniz = 0.0
    for k in range(count):
        theta = random_twist(rng, 2)
        spec = disorder if k % 2 else None
        p, q, r = (random_poly(rng, theta, 1, 2, spec) for _ in range(3))
        assoc = max(assoc, l1_norm((p * q) * r - p * (q * r), samples))
        anti = max(anti, l1_norm(adjoint(p * q) - adjoint(q) * adjoint(p), samples))
        invol = max(invol, l1_norm(adjoint(adjoint(p)) - p, samples))
        lhs = gram0(p)
        rhs = (p * adjoint(p)).coefficient((0, 0))
        for omega in samples if spec is not None else (None,):
            gram = max(gram, _max_abs(lhs(omega) - rhs(omega)))
        for j in (1, 2):
            diff = derive(p * q, j) - (derive(p, j) * q + p * derive(q, j))
            leibniz = max(leibniz, l1_norm(diff, samples))
    checks.append(Check('algebra', 'product associativity', assoc, 1.0e-10))
    checks.append(Check('algebra', 'adjoint reverses products', anti, 1.0e-10))
    checks.append(Check('algebra', 'adjoint is an involution', invol, 1.0e-12))
    checks.append(Check('algebra', 'gram identity', gram, 1.0e-12))
    checks.append(Check('algebra', 'leibniz rule', leibniz, 1.0e-10))

    p = random_poly(rng, random_twist(rng, 2), radius=2, density=1.0)
    weight = sum(c.norm() * sum(abs(v) for v in s) for s, c in p.coeffs.items())
    errors = [l1_norm(fejer(p, n) - p) for n in (1, 2, 4, 8, 16, 32)]
    increase = max(0.0, max(b - a for a, b in zip(errors, errors[1:])))
    checks.append(Check('algebra', 'fejer error nonincreasing', increase, 1.0e-14))
    excess = max(
        e - weight / (n + 1) for e, n in zip(errors, (1, 2, 4, 8, 16, 32))
    )
    checks.append(Check('algebra', 'fejer error bound', max(0.0, excess), 1.0e-12))
    far = l1_norm(fejer(p, int(math.ceil(1000 * weight))) - p)
    checks.append(Check('algebra', 'fejer convergence', far, 1.0e-3))

    basis = np.eye(3, dtype=int)
    commutation = 0.0
    for j, l in product(range(3), repeat=2):
        uj = monomial(theta3, basis[j])
        ul = monomial(theta3, basis[l])
        phase = complex(np.exp(1j * theta3.antisym()[j, l]))
        commutation = max(commutation, l1_norm(uj * ul - phase * (ul * uj)))
    checks.append(Check('algebra', 'commutation relation', commutation, 1.0e-12))

    homomorphism = mixed = overshoot = decrease = 0.0
    for k in range(count):
        theta = random_twist(rng, 2)
        spec = disorder if k % 2 else None
        p, q = (random_poly(rng, theta, 1, 2, spec) for _ in range(2))
        lam = np.exp(2j * np.pi * rng.random(2))
        diff = torus_act(lam, p * q) - torus_act(lam, p) * torus_act(lam, q)
        homomorphism = max(homomorphism, l1_norm(diff, samples))
        diff = derive(derive(p, 1), 2) - derive(derive(p, 2), 1)
        mixed = max(mixed, l1_norm(diff, samples))
        if spec is None:
            bound = l1_norm(p) * l1_norm(q)
            overshoot = max(overshoot, (l1_norm(p * q) - bound) / bound)
        orders = [smooth_seminorm(p, n, samples=samples).value for n in range(3)]
        decrease = max([decrease] + [a - b for a, b in zip(orders, orders[1:])])
    checks.append(Check(
        'algebra', 'torus action is multiplicative', homomorphism, 1.0e-10,
    ))
    checks.append(Check('algebra', 'derivations commute', mixed, 1.0e-12))
    checks.append(Check('algebra', 'l1 norm is submultiplicative', overshoot, 1.0e-12))
    checks.append(Check('algebra', 'smooth seminorms increase', decrease, 0.0))
    return checks


def _representation(quick: bool) -> list[Check]:
    rng = np.random.default_rng(VERIFY_SEED + 1)
    size = 6 if quick else 12
    count = 5 if quick else 50
    denominators = (1, 2, 3, 6) if quick else (1, 2, 3, 4, 6, 12)
    window = Window((size, size), 'periodic', 1)
    mul = adj = der = trace_der = trace_alg = 0.0
    for k in range(count):
        theta = random_twist(rng, 2, denominators)
        n = 1 + k % 2
        w = window.with_orbital_dim(n)
        p = random_poly(rng, theta, 2, n)
        q = random_poly(rng, theta, 2, n)
        mp = materialize(p, None, w)
        mq = materialize(q, None, w)
        mul = max(mul, _op_diff(materialize(p * q, None, w), mp @ mq))
        adj = max(adj, _op_diff(materialize(adjoint(p), None, w), mp.dagger()))
        trace_alg = max(trace_alg, abs(volume_trace(mp) - trace_coefficient(p)))
        for j in (1, 2):
            dp = materialize(derive(p, j), None, w)
            der = max(der, _op_diff(dp, position_commutator(mp, j)))
            trace_der = max(trace_der, abs(volume_trace(dp)))
    checks = [
        Check('representation', 'product is represented', mul, 1.0e-10),
        Check('representation', 'adjoint is represented', adj, 1.0e-10),
        Check('representation', 'derivation is a commutator', der, 1.0e-12),
        Check('representation', 'trace of derivatives vanishes', trace_der, 1.0e-12),
        Check('representation', 'volume trace is the algebra trace', trace_alg, 1.0e-12),
    ]

    theta = TwistMatrix.from_fluxes(2, {(2, 1): Fraction(1, 3)})
    u1 = dual_translation((1, 0), window, theta)
    u2 = dual_translation((0, 1), window, theta)
    phase = np.exp(1j * theta.antisym()[0, 1])
    checks.append(Check(
        'representation', 'lattice commutation relation',
        _op_diff(u1 @ u2, phase * (u2 @ u1)), 1.0e-12,
    ))
    commute = 0.0
    for y, z in (((1, 0), (0, 1)), ((0, 1), (1, 0)), ((2, 1), (1, 1))):
        v = direct_translation(y, window, theta)
        u = dual_translation(z, window, theta)
        commute = max(commute, _op_diff(v @ u, u @ v))
    checks.append(Check(
        'representation', 'direct and dual translations commute', commute, 1.0e-12,
    ))
    model = hofstadter(1, 3)
    covariance = max(
        covariance_residual(model, None, y, window) for y in ((1, 0), (0, 1), (2, 1))
    )
    checks.append(Check('representation', 'covariance', covariance, 1.0e-10))
    h_poly = build_hamiltonian(model)
    h = materialize(h_poly, None, window)
    symmetry = 0.0
    for y in ((1, 0), (0, 1), (1, 2)):
        v = direct_translation(y, window, h_poly.twist)
        symmetry = max(symmetry, _op_diff(v @ h @ v.dagger(), h))
    checks.append(Check(
        'representation', 'direct translations are symmetries', symmetry, 1.0e-10,
    ))
    return checks


def _spectral(quick: bool) -> list[Check]:
    rng = np.random.default_rng(VERIFY_SEED + 2)
    count = 4 if quick else 20
    agree = idem = thermal = commute = rank = 0.0
    matrices = []
    for _ in range(count):
        values = np.concatenate([rng.uniform(-3.0, -1.0, 16), rng.uniform(1.0, 3.0, 16)])
        a = rng.normal(size=(32, 32)) + 1j * rng.normal(size=(32, 32))
        basis, _ = np.linalg.qr(a)
        h = LatticeOperator.from_matrix((basis * values) @ basis.conj().T)
        matrices.append(h)
        spec = eigh(h)
        p = fermi_projection(spec, 0.0)
        riesz = riesz_projection(h, default_contour(spec.eigenvalues, 0.0))
        agree = max(agree, _op_diff(riesz, p))
        idem = max(idem, _max_abs(p.data @ p.data - p.data))
        thermal = max(thermal, _op_diff(fermi_dirac(spec, 0.0, 200.0), p))
        commute = max(commute, _max_abs(p.data @ h.data - h.data @ p.data))
        occupied = np.count_nonzero(spec.eigenvalues <= 0.0)
        rank = max(rank, abs(np.trace(p.data).real - occupied))
    checks = [
        Check('spectral', 'riesz projection matches eigh', agree, 1.0e-6),
        Check('spectral', 'fermi projection is idempotent', idem, 1.0e-10),
        Check('spectral', 'fermi-dirac low temperature limit', thermal, 1.0e-6),
        Check('spectral', 'fermi projection commutes', commute, 1.0e-9),
        Check('spectral', 'fermi projection rank', rank, 1.0e-9),
    ]

    h = matrices[0]
    spec = eigh(h)
    p = fermi_projection(spec, 0.0)
    box = default_contour(spec.eigenvalues, 0.0)
    residuals = []
    for points in (32, 64, 128, 256):
        contour = Contour(box.lower_left, box.upper_right, points, 'trapezoid')
        residuals.append(_op_diff(riesz_projection(h, contour), p))
    ratio = max(b / a for a, b in zip(residuals, residuals[1:]))
    checks.append(Check('spectral', 'trapezoid residual halves on doubling', ratio, 0.5))
    return checks


def _calibration(quick: bool) -> list[Check]:
    checks = []
    tol = 0.25 if quick else 1.0e-2
    grid = 16 if quick else 64

    model = hofstadter(1, 3)
    sizes = (18, 18) if quick else (24, 24)
    h = materialize(build_hamiltonian(model), None, Window(sizes))
    p = _lowest_gap_projection(h)
    value = chern_even(p, (1, 2))
    oracle = kspace_chern_oracle(bloch_function(model), 1, grid)
    debug(f'hofstadter 1/3: real space {value:.6f}, k-space {oracle.value}')
    checks.append(Check(
        'calibration', 'hofstadter chern matches k-space',
        abs(value.real - oracle.value), tol,
    ))
    checks.append(Check(
        'calibration', 'hofstadter chern is real', abs(value.imag), 1.0e-6,
    ))
    checks.append(Check(
        'calibration', 'hofstadter k-space golden value', abs(oracle.value + 1), 0.0,
    ))

    # Clean gap (-2, 1 - √3), kept open by on-site disorder of strength 0.5.
    disordered = hofstadter(1, 3, 0.5, seed=VERIFY_SEED)
    h = materialize(
        build_hamiltonian(disordered),
        sample_config(disordered.disorder, 0),
        Window(sizes),
    )
    p = fermi_projection(eigh(h), 0.5 * (-1.0 - math.sqrt(3.0)))
    value = chern_even(p, (1, 2))
    checks.append(Check(
        'calibration', 'weak disorder keeps the chern integer',
        abs(value.real - oracle.value), 0.25 if quick else 5.0e-2,
    ))

    model = qwz(1.0)
    sizes = (12, 12) if quick else (24, 24)
    h = materialize(build_hamiltonian(model), None, Window(sizes, orbital_dim=2))
    p = fermi_projection(eigh(h), 0.0)
    value = chern_even(p, (1, 2))
    oracle = kspace_chern_oracle(bloch_function(model), 1, grid)
    checks.append(Check(
        'calibration', 'qwz chern matches k-space', abs(value.real - oracle.value), tol,
    ))
    checks.append(Check(
        'calibration', 'qwz k-space golden value', abs(oracle.value + 1), 0.0,
    ))
    complement = p.like(np.eye(p.window.size) - p.data)
    checks.append(Check(
        'calibration', 'complementary projections cancel',
        abs(value + chern_even(complement, (1, 2))), 1.0e-8,
    ))
    checks.append(Check(
        'calibration', 'axis swap flips the sign',
        abs(value + chern_even(p, (2, 1))), 1.0e-10,
    ))
    return checks


def _odd(quick: bool) -> list[Check]:
    checks = []
    size = 32 if quick else 64
    for t_intra, t_inter, expected in ((0.5, 1.0, 1), (1.0, 0.5, 0)):
        model = ssh(t_intra, t_inter)
        h = materialize(build_hamiltonian(model), None, Window((size,), orbital_dim=2))
        u = chiral_unitary(h, model.chiral_split)
        value = chern_odd(u, (1,))
        oracle = winding_oracle(chiral_bloch_function(model))
        label = f'ssh {t_intra}/{t_inter}'
        checks.append(Check(
            'odd', f'{label} winding matches oracle',
            abs(value.real - oracle.value), 1.0e-3,
        ))
        checks.append(Check(
            'odd', f'{label} oracle golden value', abs(oracle.value - expected), 0.0,
        ))
        checks.append(Check(
            'odd', f'{label} telescoped form agrees',
            abs(value - chern_odd_telescoped(u, (1,))), 1.0e-10,
        ))
        ev = eigh(h).eigenvalues
        checks.append(Check(
            'odd', f'{label} spectrum is symmetric', _max_abs(ev + ev[::-1]), 1.0e-10,
        ))
        q = np.eye(h.window.size) - 2.0 * fermi_projection(eigh(h), 0.0).data
        blocks = np.zeros_like(q)
        blocks[0::2, 1::2] = u.data.conj().T
        blocks[1::2, 0::2] = u.data
        checks.append(Check(
            'odd', f'{label} chiral unitary reassembles', _max_abs(q - blocks), 1.0e-8,
        ))
    return checks


def _range(quick: bool) -> list[Check]:
    checks = []
    theta = TwistMatrix.from_fluxes(2, {(2, 1): Fraction(1, 3)})

    def offset_error(axes: tuple[int, ...], expected: tuple[float, ...]) -> float:
        got = chern_range(theta, axes).offsets
        if len(got) != len(expected):
            return math.inf
        return max(abs(a - b) for a, b in zip(got, expected))

    checks.append(Check(
        'range', 'strong invariant range', offset_error((1, 2), (1.0,)), 1.0e-12,
    ))
    checks.append(Check(
        'range', 'weak invariant range', offset_error((1,), (1.0,)), 1.0e-12,
    ))
    checks.append(Check(
        'range', 'gap labelling range', offset_error((), (1.0, -1.0 / 3.0)), 1.0e-12,
    ))

    rng = np.random.default_rng(VERIFY_SEED + 3)
    a = rng.normal(size=(4, 4))
    a = a - a.T
    explicit = a[0, 1] * a[2, 3] - a[0, 2] * a[1, 3] + a[0, 3] * a[1, 2]
    checks.append(Check(
        'range', 'pfaffian expansion', abs(pfaffian(a) - explicit), 1.0e-12,
    ))
    checks.append(Check(
        'range', 'pfaffian squares to determinant',
        abs(pfaffian(a) ** 2 - np.linalg.det(a)), 1.0e-10,
    ))

    h = materialize(build_hamiltonian(hofstadter(1, 3)), None, Window((12, 12)))
    trace = volume_trace(_lowest_gap_projection(h)).real
    label = gap_label(trace, chern_range(theta, ()).offsets)
    checks.append(Check(
        'range', 'integrated density of states is labelled',
        0.0 if label == (0, -1) else math.inf, 0.0,
    ))
    return checks


def _disorder(quick: bool) -> list[Check]:
    checks = []
    spec = DisorderSpec(2, 1, 16, 'uniform', 11)
    a = sample_config(spec, 3)
    b = sample_config(spec, 4)
    checks.append(Check(
        'disorder', 'samples are reproducible',
        0.0 if a == sample_config(spec, 3) else 1.0, 0.0,
    ))
    checks.append(Check(
        'disorder', 'hull metric vanishes on the diagonal', hull_metric(a, a), 0.0,
    ))
    checks.append(Check(
        'disorder', 'hull metric is symmetric',
        abs(hull_metric(a, b) - hull_metric(b, a)), 0.0,
    ))
    checks.append(Check(
        'disorder', 'distinct samples are separated',
        0.0 if hull_metric(a, b) > 0.0 else 1.0, 0.0,
    ))
    composed = shift(shift(a, (1, -2)), (2, 1))
    checks.append(Check(
        'disorder', 'shifts compose', 0.0 if composed == shift(a, (3, -1)) else 1.0, 0.0,
    ))
    identity = shift(a, (0, 0)) == a and shift(shift(a, (2, -1)), (-2, 1)) == a
    checks.append(Check(
        'disorder', 'shifts have identity and inverse', 0.0 if identity else 1.0, 0.0,
    ))

    rng = np.random.default_rng(VERIFY_SEED + 4)
    pool = [sample_config(spec, i) for i in range(6)]
    pool += [shift(omega, (1, 0)) for omega in pool[:3]]
    triangle = 0.0
    for _ in range(100):
        x, y, z = (pool[i] for i in rng.integers(len(pool), size=3))
        excess = hull_metric(x, z) - hull_metric(x, y) - hull_metric(y, z)
        triangle = max(triangle, excess)
    checks.append(Check('disorder', 'hull metric triangle inequality', triangle, 1.0e-12))

    c = Coefficient.site_function(SiteTerm(np.eye(2), 0.3, 1.0, 0), 2)
    composition = 0.0
    for s, t in (((1, 2), (-1, 3)), ((2, 0), (0, -2)), ((0, 1), (1, 1))):
        for omega in (a, b):
            direct = c(shift(shift(omega, (-s[0], -s[1])), (-t[0], -t[1])))
            composition = max(composition, _max_abs(act(s, act(t, c))(omega) - direct))
    checks.append(Check('disorder', 'coefficient action composes', composition, 0.0))

    model = hofstadter(1, 3, 0.5, seed=5)
    omega = sample_config(model.disorder, 0)
    h_poly = build_hamiltonian(model)
    herm = 0.0
    for m in (model, ssh(0.5, 1.0, 0.1, seed=5), qwz(1.0, 0.5, seed=5)):
        poly = build_hamiltonian(m)
        sizes = (12,) * m.dim
        window = Window(sizes, orbital_dim=m.orbital_dim)
        h = materialize(poly, sample_config(m.disorder, 1), window)
        herm = max(herm, h.hermiticity_residual())
    checks.append(Check(
        'disorder', 'disordered hamiltonians are hermitian', herm, 1.0e-12,
    ))
    checks.append(Check(
        'disorder', 'disordered hamiltonian is self-adjoint',
        0.0 if adjoint(h_poly).allclose(h_poly) else 1.0, 0.0,
    ))
    covariance = max(
        covariance_residual(model, omega, y, Window((12, 12))) for y in ((1, 0), (0, 3))
    )
    covariance = max(
        covariance,
        covariance_residual(model, omega, (1, 1), Window((8, 8), 'open'), margin=1),
    )
    checks.append(Check('disorder', 'disordered covariance', covariance, 1.0e-10))

    window = Window((12, 12))
    values = eigh(materialize(h_poly, omega, window)).eigenvalues
    moved = max(
        _max_abs(eigh(materialize(h_poly, shift(omega, y), window)).eigenvalues - values)
        for y in ((1, 0), (0, 1), (2, -3))
    )
    checks.append(Check('disorder', 'spectrum is shift invariant', moved, 1.0e-10))
    return checks


SUITE_FUNCTIONS: dict[str, Callable[[bool], list[Check]]] = {
    'algebra': _algebra,
    'representation': _representation,
    'spectral': _spectral,
    'calibration': _calibration,
    'odd': _odd,
    'range': _range,
    'disorder': _disorder,
}


def run_suite(name: str, quick: bool = False) -> list[Check]:
    """Return the checks of one suite; an exception fails the suite."""
    if name not in SUITE_FUNCTIONS:
        raise ValueError(f'Unknown suite "{name}", expected one of {SUITES}')
    try:
        return SUITE_FUNCTIONS[name](quick)
    except (NcbtError, ValueError, np.linalg.LinAlgError) as e:
        debug(f'Suite {name} raised {type(e).__name__}: {e}')
        return [Check(name, f'raised {type(e).__name__}', math.inf, 0.0)]


def run_suites(
        quick: bool = False,
        jobs: int = 1,
        suites: Sequence[str] = SUITES,
) -> VerifyReport:
    """Run the suites in order, in parallel when `jobs` != 1."""
    if jobs == 1:
        results = [run_suite(name, quick) for name in suites]
    else:
        results = Parallel(n_jobs=jobs)(
            delayed(run_suite)(name, quick) for name in suites
        )
    return VerifyReport(tuple(c for checks in results for c in checks), quick)
