"""Covariant tight-binding Hamiltonians as polynomials.

A model is the finite family of hoppings W_y, y ∈ Z^d; its Hamiltonian is

    H = Σ_y exp((i/2) yᵀΘy) W_y u^y.

H is self-adjoint if and only if W_{-y} = α(-y)(W_y†) for every y, which
reduces to W_{-y} = W_y† for constant hoppings.

"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
import math
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike

from .disorder import DisorderConfig
from .disorder import DisorderSpec
from .disorder import probe_configs
from .errors import CommensurabilityError
from .errors import DimensionError
from .errors import HermiticityError
from .errors import WindowExceededError
from .twist_core import Coefficient
from .twist_core import NcPoly
from .twist_core import TwistMatrix
from .utils import debug
from .utils import int_key

# Disorder windows of the builders cover open 48x48 windows and more.
DEFAULT_WINDOW_RADIUS = 64

HERMITICITY_TOLERANCE = 1.0e-12

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

# Typing hints.
Site = tuple[int, ...]


@dataclass(frozen=True, eq=False)
class SiteTerm:
    """The site function ω ↦ (base + strength·(2ω(0)[coordinate] - 1))·matrix."""

    matrix: np.ndarray
    base: float = 0.0
    strength: float = 0.0
    coordinate: int = 0

    def __call__(self, omega: DisorderConfig) -> np.ndarray:
        value = omega((0,) * omega.spec.dim)[self.coordinate]
        return (self.base + self.strength * (2.0 * value - 1.0)) * np.asarray(self.matrix)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Hoppings W_y of a covariant family of Hamiltonians."""

    dim: int
    orbital_dim: int
    twist: TwistMatrix
    hoppings: Mapping[Site, Coefficient]
    disorder: DisorderSpec
    chiral_split: Optional[tuple[int, int]] = None
    name: str = 'custom'

    def __post_init__(self) -> None:
        if self.twist.dim != self.dim:
            raise DimensionError(
                f'Twist dimension {self.twist.dim} does not match model dimension'
                f' {self.dim}',
            )
        if self.disorder.dim != self.dim:
            raise DimensionError(
                f'Disorder dimension {self.disorder.dim} does not match model'
                f' dimension {self.dim}',
            )
        hoppings = {
            int_key(y, self.dim, 'hopping'): Coefficient.coerce(w, self.orbital_dim)
            for y, w in dict(self.hoppings).items()
        }
        for y in hoppings:
            if tuple(-v for v in y) not in hoppings:
                raise HermiticityError(
                    f'Hopping {y} has no partner at {tuple(-v for v in y)}',
                    offset=y,
                )
        if self.chiral_split is not None:
            split = tuple(int(v) for v in self.chiral_split)
            if len(split) != 2 or sum(split) != self.orbital_dim or min(split) < 1:
                raise DimensionError(
                    f'Chiral split {self.chiral_split} does not match orbital'
                    f' dimension {self.orbital_dim}',
                )
            object.__setattr__(self, 'chiral_split', split)
        ordered = dict(sorted(hoppings.items()))
        object.__setattr__(self, 'hoppings', MappingProxyType(ordered))

    @property
    def hopping_range(self) -> int:
        return max((max(abs(v) for v in y) for y in self.hoppings), default=0)

    @property
    def is_clean(self) -> bool:
        """Return True if all hoppings are constant matrices."""
        return all(w.is_constant for w in self.hoppings.values())

    @property
    def is_chiral(self) -> bool:
        return self.chiral_split is not None


def _adjoint_partner(y: Site, w: Coefficient) -> Coefficient:
    """Return α(-y)(W_y†), the hopping required at -y."""
    return w.dagger().shifted(tuple(-v for v in y))


def validate_hermiticity(model: ModelSpec) -> None:
    """Raise `HermiticityError` naming the first offending hopping."""
    samples = probe_configs(model.disorder)
    for y, w in model.hoppings.items():
        neg = tuple(-v for v in y)
        diff = model.hoppings[neg].add(_adjoint_partner(y, w).scale(-1.0))
        if diff.is_constant:
            residual = float(np.max(np.abs(diff.value), initial=0.0))
        else:
            try:
                residual = max(
                    float(np.max(np.abs(diff(omega)), initial=0.0)) for omega in samples
                )
            except WindowExceededError as e:
                debug(f'Skipping Hermiticity probe of hopping {y}: {e}')
                continue
        if residual > HERMITICITY_TOLERANCE:
            raise HermiticityError(
                f'Hoppings at {y} and {neg} violate W_-y = α(-y)(W_y†),'
                f' residual {residual:.3e}',
                offset=y,
            )


def build_hamiltonian(model: ModelSpec) -> NcPoly:
    """Return H = Σ_y exp((i/2) yᵀΘy) W_y u^y."""
    validate_hermiticity(model)
    theta = model.twist.entries
    coeffs = {}
    for y, w in model.hoppings.items():
        yv = np.array(y)
        coeffs[y] = w.scale(np.exp(0.5j * (yv @ theta @ yv)))
    disorder = None if model.disorder.is_clean else model.disorder
    return NcPoly(model.twist, model.orbital_dim, coeffs, disorder)


def from_hoppings(
        dim: int,
        orbital_dim: int,
        twist: Optional[TwistMatrix],
        pairs: Iterable[tuple[ArrayLike, object]],
        disorder: Optional[DisorderSpec] = None,
        chiral_split: Optional[tuple[int, int]] = None,
        name: str = 'custom',
) -> ModelSpec:
    """Return a validated model, completing missing partners by adjoints.

    Each pair is (y, W_y) with W_y a Coefficient, a matrix (or scalar) or a
    callable of the configuration. For a y listed without -y, the hopping
    W_{-y} = α(-y)(W_y†) is added.

    """
    twist = twist if twist is not None else TwistMatrix.zero(dim)
    disorder = disorder if disorder is not None else DisorderSpec.clean(dim)
    given: dict[Site, Coefficient] = {}
    for y, w in pairs:
        key = int_key(y, dim, 'hopping')
        if key in given:
            raise HermiticityError(f'Hopping {key} is listed twice', offset=key)
        given[key] = Coefficient.coerce(w, orbital_dim)
    hoppings = dict(given)
    for y, w in given.items():
        neg = tuple(-v for v in y)
        if neg not in given:
            hoppings[neg] = _adjoint_partner(y, w)
    model = ModelSpec(
        dim=dim,
        orbital_dim=orbital_dim,
        twist=twist,
        hoppings=hoppings,
        disorder=disorder,
        chiral_split=chiral_split,
        name=name,
    )
    validate_hermiticity(model)
    return model


def hofstadter(
        p: int,
        q: int,
        onsite_disorder_strength: float = 0.0,
        seed: int = 0,
        window_radius: int = DEFAULT_WINDOW_RADIUS,
        distribution: str = 'uniform',
) -> ModelSpec:
    """Return the square-lattice Hofstadter model at flux 2πp/q per plaquette.

    With a positive strength, the on-site potential is
    strength·(2ω(0) - 1), uniform in [-strength, strength] by default.

    """
    if q < 1 or math.gcd(p, q) != 1:
        raise ValueError(f'Invalid flux {p}/{q}, need q >= 1 and gcd(p, q) = 1')
    if onsite_disorder_strength < 0.0:
        raise ValueError(
            f'Disorder strength must be >= 0, got {onsite_disorder_strength}',
        )
    twist = TwistMatrix.from_fluxes(2, {(2, 1): Fraction(p, q)})
    pairs: list[tuple[Site, object]] = [((1, 0), 1.0), ((0, 1), 1.0)]
    if onsite_disorder_strength > 0.0:
        disorder = DisorderSpec(2, 1, window_radius, distribution, seed)
        pairs.append((
            (0, 0),
            Coefficient.site_function(
                SiteTerm(np.eye(1), strength=onsite_disorder_strength), 1,
            ),
        ))
    else:
        disorder = DisorderSpec.clean(2)
    return from_hoppings(2, 1, twist, pairs, disorder, name=f'hofstadter {p}/{q}')


def ssh(
        t_intra: float,
        t_inter: float,
        bond_disorder_strength: float = 0.0,
        seed: int = 0,
        window_radius: int = DEFAULT_WINDOW_RADIUS,
        distribution: str = 'uniform',
) -> ModelSpec:
    """Return the SSH chain, orbitals (A, B), chiral split (1, 1).

    W_0 couples A and B of a cell with t_intra; W_1 couples B of cell x to A
    of cell x + 1 with t_inter. Bond disorder adds strength·(2ω(0)[k] - 1) to
    the intracell (k = 0) and intercell (k = 1) amplitudes.

    """
    if bond_disorder_strength < 0.0:
        raise ValueError(
            f'Disorder strength must be >= 0, got {bond_disorder_strength}',
        )
    inter = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    if bond_disorder_strength > 0.0:
        disorder = DisorderSpec(1, 2, window_radius, distribution, seed)
        w0 = Coefficient.site_function(
            SiteTerm(SIGMA_X, t_intra, bond_disorder_strength, 0), 2,
        )
        w1 = Coefficient.site_function(
            SiteTerm(inter, t_inter, bond_disorder_strength, 1), 2,
        )
    else:
        disorder = DisorderSpec.clean(1)
        w0 = Coefficient.constant(t_intra * SIGMA_X)
        w1 = Coefficient.constant(t_inter * inter)
    return from_hoppings(
        1, 2, TwistMatrix.zero(1), [((0,), w0), ((1,), w1)], disorder,
        chiral_split=(1, 1), name=f'ssh {t_intra}/{t_inter}',
    )


def qwz(
        mass: float,
        disorder_strength: float = 0.0,
        seed: int = 0,
        window_radius: int = DEFAULT_WINDOW_RADIUS,
        distribution: str = 'uniform',
) -> ModelSpec:
    """Return the two-band Chern insulator of Bloch Hamiltonian
    sin k₁ σ₁ + sin k₂ σ₂ + (m - cos k₁ - cos k₂) σ₃.

    Disorder adds strength·(2ω(0) - 1)·σ₃ to the mass term.

    """
    if disorder_strength < 0.0:
        raise ValueError(f'Disorder strength must be >= 0, got {disorder_strength}')
    if disorder_strength > 0.0:
        disorder = DisorderSpec(2, 1, window_radius, distribution, seed)
        w0 = Coefficient.site_function(
            SiteTerm(SIGMA_Z, mass, disorder_strength, 0), 2,
        )
    else:
        disorder = DisorderSpec.clean(2)
        w0 = Coefficient.constant(mass * SIGMA_Z)
    pairs = [
        ((0, 0), w0),
        ((1, 0), 0.5j * SIGMA_X - 0.5 * SIGMA_Z),
        ((0, 1), 0.5j * SIGMA_Y - 0.5 * SIGMA_Z),
    ]
    return from_hoppings(
        2, 2, TwistMatrix.zero(2), pairs, disorder, name=f'qwz {mass}',
    )


def magnetic_supercell(twist: TwistMatrix, max_period: int = 1024) -> tuple[int, ...]:
    """Return the minimal q with Θ_jk·q_k ∈ 2πZ for all j, k."""
    periods = []
    for k in range(twist.dim):
        column = twist.entries[:, k] / (2.0 * math.pi)
        for q in range(1, max_period + 1):
            scaled = column * q
            if np.all(np.abs(scaled - np.round(scaled)) <= 1.0e-9):
                periods.append(q)
                break
        else:
            raise CommensurabilityError(
                f'No magnetic period up to {max_period} along axis {k + 1}',
            )
    return tuple(periods)


def bloch_function(
        model: ModelSpec,
        supercell: Optional[Sequence[int]] = None,
) -> Callable[[ArrayLike], np.ndarray]:
    """Return k ↦ H(k) on the (magnetic) unit cell of a clean model.

    The convention is H(k) = Σ Φ_s exp(-ik·s) for a trivial cell; cell sites
    are ordered lexicographically, orbitals minor.

    """
    if not model.is_clean:
        raise ValueError('Bloch decomposition needs a model with constant hoppings')
    h = build_hamiltonian(model)
    theta = h.twist.entries
    q = np.array(supercell if supercell is not None else magnetic_supercell(h.twist))
    scaled = theta * q[None, :] / (2.0 * math.pi)
    if q.shape != (model.dim,) or np.any(np.abs(scaled - np.round(scaled)) > 1.0e-9):
        raise CommensurabilityError(
            f'Supercell {tuple(q)} is not a magnetic unit cell of the model',
        )
    cell = tuple(int(v) for v in q)
    cell_sites = np.indices(cell).reshape(model.dim, -1).T
    n = model.orbital_dim
    size = len(cell_sites) * n
    terms = []
    for s, c in h.coeffs.items():
        sv = np.array(s)
        for col, a in enumerate(cell_sites):
            target = a + sv
            offset = np.floor_divide(target, q)
            row = int(np.ravel_multi_index(tuple(target - offset * q), cell))
            value = np.exp(1j * (sv @ theta @ a)) * c.value
            terms.append((row, col, offset.astype(float), value))

    def bloch(k: ArrayLike) -> np.ndarray:
        k = np.asarray(k, dtype=float).reshape(model.dim)
        out = np.zeros((size, size), dtype=complex)
        for row, col, offset, value in terms:
            out[row * n:(row + 1) * n, col * n:(col + 1) * n] += (
                value * np.exp(-1j * (k @ offset))
            )
        return out

    return bloch


def bloch_hamiltonian(
        model: ModelSpec,
        k: ArrayLike,
        supercell: Optional[Sequence[int]] = None,
) -> np.ndarray:
    return bloch_function(model, supercell)(k)


def chiral_bloch_function(model: ModelSpec) -> Callable[[ArrayLike], np.ndarray]:
    """Return k ↦ the (-, +) block of H(k) for a chiral clean model."""
    if not model.is_chiral:
        raise ValueError(f'Model "{model.name}" has no chiral split')
    bloch = bloch_function(model)
    n_plus, n_minus = model.chiral_split
    cells = math.prod(magnetic_supercell(model.twist))
    grading = np.tile(np.concatenate([np.ones(n_plus), -np.ones(n_minus)]), cells)
    plus = np.nonzero(grading > 0)[0]
    minus = np.nonzero(grading < 0)[0]

    def block(k: ArrayLike) -> np.ndarray:
        return bloch(k)[np.ix_(minus, plus)]

    return block


def chiral_bloch_block(model: ModelSpec, k: ArrayLike) -> np.ndarray:
    return chiral_bloch_function(model)(k)
