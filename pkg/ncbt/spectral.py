"""Hermitian spectral calculus on lattice operators.

Fermi projections are computed from the eigendecomposition by default; the
Riesz contour integral of the resolvent is an independent second route.

"""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Optional
import warnings

import numpy as np
from numpy.typing import ArrayLike
import scipy.linalg
import scipy.special

from .errors import DimensionError
from .errors import GaplessError
from .errors import HermiticityError
from .errors import NumericalError
from .lattice_rep import OPEN
from .lattice_rep import LatticeOperator
from .lattice_rep import Window
from .twist_core import TwistMatrix
from .utils import array_digest
from .utils import warn

# Allowed |M - M†| relative to max(1, max|M|).
HERMITIAN_TOLERANCE = 1.0e-9

# Minimal distance between the Fermi level and the spectrum.
GAP_TOLERANCE = 1.0e-8

UNITARY_TOLERANCE = 1.0e-8

# Smallest distance from a Riesz contour to the spectrum, in quadrature steps.
CONTOUR_CLEARANCE = 10.0

RULES = ('gauss', 'trapezoid')


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Eigenvalues (ascending) and orthonormal eigenvectors of an operator."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source_hash: str
    window: Window
    twist: Optional[TwistMatrix] = None

    def operator(self, data: np.ndarray) -> LatticeOperator:
        return LatticeOperator(self.window, data, self.twist, hermitian_hint=True)


@dataclass(frozen=True)
class Gap:
    """An open interval free of eigenvalues."""

    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not self.lower < self.upper:
            raise ValueError(f'Empty gap ({self.lower}, {self.upper})')

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def contains(self, energy: float) -> bool:
        return self.lower < energy < self.upper


@dataclass(frozen=True)
class Contour:
    """A counterclockwise rectangle in the complex plane."""

    lower_left: complex
    upper_right: complex
    points_per_edge: int = 64
    rule: str = 'gauss'
    kind: str = 'rectangle'

    def __post_init__(self) -> None:
        if self.kind != 'rectangle':
            raise ValueError(f'Unsupported contour kind "{self.kind}"')
        if self.rule not in RULES:
            raise ValueError(f'Unknown quadrature rule "{self.rule}", expected {RULES}')
        if self.points_per_edge < 1:
            raise ValueError(
                f'Need at least one point per edge, got {self.points_per_edge}',
            )
        ll = complex(self.lower_left)
        ur = complex(self.upper_right)
        if not (ll.real < ur.real and ll.imag < ur.imag):
            raise ValueError(f'Degenerate rectangle {ll} .. {ur}')

    def corners(self) -> tuple[complex, complex, complex, complex]:
        ll = complex(self.lower_left)
        ur = complex(self.upper_right)
        return ll, complex(ur.real, ll.imag), ur, complex(ll.real, ur.imag)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Return quadrature nodes z_k and weights w_k, Σ w_k f(z_k) ≈ ∮ f dz."""
        corners = self.corners()
        n = self.points_per_edge
        if self.rule == 'gauss':
            t, wt = np.polynomial.legendre.leggauss(n)
            t = 0.5 * (t + 1.0)
            wt = 0.5 * wt
        else:
            t = np.linspace(0.0, 1.0, n + 1)
            wt = np.full(n + 1, 1.0 / n)
            wt[[0, -1]] = 0.5 / n
        zs = []
        ws = []
        for a, b in zip(corners, corners[1:] + corners[:1]):
            zs.append(a + (b - a) * t)
            ws.append((b - a) * wt)
        return np.concatenate(zs), np.concatenate(ws)

    def step(self) -> float:
        """Return the largest distance between consecutive nodes."""
        z, _ = self.nodes()
        return float(np.max(np.abs(np.diff(np.append(z, z[0])))))

    def distance(self, points: ArrayLike) -> float:
        """Return the distance between the rectangle's boundary and `points`."""
        z = np.asarray(points, dtype=complex).ravel()
        if not z.size:
            return math.inf
        corners = self.corners()
        best = np.full(z.shape, np.inf)
        for a, b in zip(corners, corners[1:] + corners[:1]):
            t = np.clip(((z - a) * np.conj(b - a)).real / abs(b - a) ** 2, 0.0, 1.0)
            best = np.minimum(best, np.abs(z - (a + t * (b - a))))
        return float(best.min())


def _check_hermitian(m: LatticeOperator, tol: float = HERMITIAN_TOLERANCE) -> None:
    scale = max(1.0, float(np.max(np.abs(m.data), initial=0.0)))
    residual = m.hermiticity_residual()
    if residual > tol * scale:
        raise HermiticityError(f'Operator is not Hermitian, residual {residual:.3e}')


def eigh(m: LatticeOperator, tol: float = HERMITIAN_TOLERANCE) -> SpectralData:
    """Return the eigendecomposition of a Hermitian operator."""
    _check_hermitian(m, tol)
    h = 0.5 * (m.data + m.data.conj().T)
    values, vectors = scipy.linalg.eigh(h, check_finite=False)
    return SpectralData(
        eigenvalues=values,
        eigenvectors=vectors,
        source_hash=array_digest([m.data]),
        window=m.window,
        twist=m.twist,
    )


def eigen_residuals(m: LatticeOperator, spec: SpectralData) -> np.ndarray:
    """Return ‖M v_k - λ_k v_k‖ for every eigenpair."""
    v = spec.eigenvectors
    return np.linalg.norm(m.data @ v - v * spec.eigenvalues[None, :], axis=0)


def find_gaps(spec: SpectralData | ArrayLike, min_width: float) -> list[Gap]:
    """Return the inner spectral gaps of width at least `min_width`.

    `spec` may also be a plain list of eigenvalues, e.g. the union of the
    spectra of several disorder samples.

    """
    if min_width <= 0.0:
        raise ValueError(f'Minimal gap width must be > 0, got {min_width}')
    if isinstance(spec, SpectralData):
        ev = spec.eigenvalues
    else:
        ev = np.sort(np.asarray(spec, dtype=float).ravel())
    widths = np.diff(ev)
    wide = np.nonzero(widths >= min_width)[0]
    return [Gap(float(ev[k]), float(ev[k + 1])) for k in wide]


def _check_gapped(eigenvalues: np.ndarray, energy: float, tol: float) -> None:
    if eigenvalues.size == 0:
        return
    distance = float(np.min(np.abs(eigenvalues - energy)))
    if distance <= tol:
        raise GaplessError(
            f'Fermi level {energy:.6g} is within {distance:.2e} of the spectrum',
        )


def fermi_projection(
        spec: SpectralData,
        e_fermi: float,
        tol: float = GAP_TOLERANCE,
) -> LatticeOperator:
    """Return χ(M ≤ E_F) from the eigendecomposition."""
    _check_gapped(spec.eigenvalues, e_fermi, tol)
    occupied = spec.eigenvectors[:, spec.eigenvalues < e_fermi]
    return spec.operator(occupied @ occupied.conj().T)


def fermi_dirac(spec: SpectralData, mu: float, beta: float) -> LatticeOperator:
    """Return (1 + exp(β(M - μ)))^-1, which tends to χ(M ≤ μ) as β → ∞."""
    if beta <= 0.0:
        raise ValueError(f'Inverse temperature must be > 0, got {beta}')
    occupation = scipy.special.expit(-beta * (spec.eigenvalues - mu))
    v = spec.eigenvectors
    return spec.operator((v * occupation[None, :]) @ v.conj().T)


def default_contour(
        eigenvalues: ArrayLike,
        e_fermi: float,
        points_per_edge: int = 64,
        rule: str = 'gauss',
) -> Contour:
    """Return the rectangle enclosing the spectrum below E_F.

    With g the width of the gap containing E_F, the real extent is
    [min eigenvalue - g/2, E_F] and the imaginary half-height is g.

    """
    ev = np.sort(np.asarray(eigenvalues, dtype=float))
    _check_gapped(ev, e_fermi, GAP_TOLERANCE)
    below = ev[ev < e_fermi]
    above = ev[ev > e_fermi]
    if not below.size:
        g = float(above[0] - e_fermi) if above.size else 1.0
        return Contour(
            complex(e_fermi - g, -g), complex(e_fermi, g), points_per_edge, rule,
        )
    lower = float(below[-1])
    upper = float(above[0]) if above.size else lower + 2.0 * (e_fermi - lower)
    g = upper - lower
    return Contour(
        complex(float(ev[0]) - 0.5 * g, -g),
        complex(e_fermi, g),
        points_per_edge,
        rule,
    )


def riesz_projection(m: LatticeOperator, contour: Contour) -> LatticeOperator:
    """Return (1/2πi) ∮ (z - M)^-1 dz by quadrature over the contour.

    Accuracy needs the contour to stay CONTOUR_CLEARANCE quadrature steps
    away from the spectrum; closer contours are reported with a warning.

    """
    _check_hermitian(m)
    clearance = contour.distance(scipy.linalg.eigvalsh(m.data, check_finite=False))
    step = contour.step()
    if clearance < CONTOUR_CLEARANCE * step:
        warn(
            f'Contour passes within {clearance:.3e} of the spectrum, less than'
            f' {CONTOUR_CLEARANCE:g} quadrature steps of {step:.3e}',
        )
    size = m.window.size
    eye = np.eye(size, dtype=complex)
    acc = np.zeros((size, size), dtype=complex)
    z_nodes, weights = contour.nodes()
    for z, w in zip(z_nodes, weights):
        shifted = z * eye - m.data
        try:
            with warnings.catch_warnings():
                warnings.simplefilter('error', scipy.linalg.LinAlgWarning)
                acc += w * scipy.linalg.solve(shifted, eye, check_finite=False)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as e:
            distance = float(scipy.linalg.svdvals(shifted).min())
            raise NumericalError(
                f'Resolvent solve failed at z = {z:.6g}, distance to the spectrum'
                f' {distance:.3e}',
            ) from e
    return m.like(acc / (2j * np.pi), hermitian_hint=True)


def chiral_unitary(m: LatticeOperator, block_split: tuple[int, int]) -> LatticeOperator:
    """Return the unitary U of the flat-band sign 1 - 2P = [[0, U†], [U, 0]].

    When n₊ + n₋ is the orbital dimension, J is +1 on the first n₊ orbitals
    of every site and -1 on the others. Otherwise the matrix is read as
    n₊ + n₋ blocks of equal size and J is +1 on the first n₊ blocks, e.g.
    `chiral_unitary(LatticeOperator.from_matrix(SIGMA_X), (1, 1))` is [[1]].
    U maps the +1 subspace to the -1 subspace.

    """
    n_plus, n_minus = block_split
    window = m.window
    if n_plus < 0 or n_minus < 0 or n_plus + n_minus == 0:
        raise DimensionError(f'Invalid chiral split {block_split}')
    per_site = n_plus + n_minus == window.orbital_dim
    if not per_site and window.size % (n_plus + n_minus):
        raise DimensionError(
            f'Chiral split {block_split} matches neither the orbital dimension'
            f' {window.orbital_dim} nor the matrix size {window.size}',
        )
    if n_plus != n_minus:
        raise DimensionError(f'Chiral split {block_split} is not balanced')
    if per_site:
        grading = np.tile(
            np.concatenate([np.ones(n_plus), -np.ones(n_minus)]), window.n_sites,
        )
        u_window = window.with_orbital_dim(n_minus)
    else:
        cells = window.size // (n_plus + n_minus)
        grading = np.concatenate([np.ones(n_plus * cells), -np.ones(n_minus * cells)])
        u_window = Window((n_minus * cells,), OPEN)
    scale = max(1.0, float(np.max(np.abs(m.data), initial=0.0)))
    anti = grading[:, None] * m.data * grading[None, :] + m.data
    residual = float(np.max(np.abs(anti), initial=0.0))
    if residual > HERMITIAN_TOLERANCE * scale:
        raise HermiticityError(f'Operator is not chiral, ‖JMJ + M‖ = {residual:.3e}')
    p = fermi_projection(eigh(m), 0.0)
    q = np.eye(window.size) - 2.0 * p.data
    plus = np.nonzero(grading > 0)[0]
    minus = np.nonzero(grading < 0)[0]
    diagonal = max(
        float(np.max(np.abs(q[np.ix_(plus, plus)]), initial=0.0)),
        float(np.max(np.abs(q[np.ix_(minus, minus)]), initial=0.0)),
    )
    if diagonal > UNITARY_TOLERANCE:
        raise NumericalError(
            f'Flat-band sign is not off-diagonal in the grading, residual {diagonal:.3e}',
        )
    u = q[np.ix_(minus, plus)]
    unitarity = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])), initial=0.0))
    if unitarity > UNITARY_TOLERANCE:
        raise NumericalError(f'Extracted block is not unitary, residual {unitarity:.3e}')
    return LatticeOperator(u_window, u, m.twist if per_site else None)
