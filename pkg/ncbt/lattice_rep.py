"""Finite-window lattice representation of the twisted algebra.

Sites of a window are the points of [0, N_1) × ... × [0, N_d), ordered
lexicographically; matrices are laid out site-major, orbital-minor, i.e. the
index of (x, a) is `site_index(x)·n + a`.

The representation of a polynomial p at configuration ω is

    ⟨x + s| π_ω(p) |x⟩ = exp(i sᵀΘx) Φ_s(p)(ϱ(x + s)ω).

On periodic windows x + s is wrapped while the phase keeps the unwrapped
source site x ∈ [0, N); this is consistent when every Θ_jk·N_k is a multiple
of 2π.

"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math
from typing import TYPE_CHECKING, Optional

import numpy as np
from numpy.typing import ArrayLike
import scipy.linalg

from .disorder import DisorderConfig
from .disorder import periodized
from .disorder import shift
from .errors import CommensurabilityError
from .errors import DimensionError
from .twist_core import NcPoly
from .twist_core import TwistMatrix
from .twist_core import check_axis
from .twist_core import monomial
from .utils import int_vector

if TYPE_CHECKING:
    # Import here to avoid circular import.
    from .models import ModelSpec

PERIODIC = 'periodic'
OPEN = 'open'
BOUNDARIES = (PERIODIC, OPEN)

# Tolerance on Θ_jk·N_k / 2π being an integer.
COMMENSURABILITY_TOLERANCE = 1.0e-9


@lru_cache(maxsize=32)
def _lattice_sites(sizes: tuple[int, ...]) -> np.ndarray:
    sites = np.indices(sizes).reshape(len(sizes), -1).T.astype(np.int64)
    sites.flags.writeable = False
    return sites


@dataclass(frozen=True)
class Window:
    """A finite box of sites with its boundary condition."""

    sizes: tuple[int, ...]
    boundary: str = PERIODIC
    orbital_dim: int = 1

    def __post_init__(self) -> None:
        sizes = tuple(int(n) for n in self.sizes)
        if not sizes or any(n < 1 for n in sizes):
            raise DimensionError(f'Window sizes must be positive, got {self.sizes}')
        if self.boundary not in BOUNDARIES:
            raise ValueError(
                f'Unknown boundary "{self.boundary}", expected one of {BOUNDARIES}',
            )
        if self.orbital_dim < 1:
            raise DimensionError(
                f'Orbital dimension must be >= 1, got {self.orbital_dim}',
            )
        object.__setattr__(self, 'sizes', sizes)

    @property
    def dim(self) -> int:
        return len(self.sizes)

    @property
    def n_sites(self) -> int:
        return math.prod(self.sizes)

    @property
    def size(self) -> int:
        """Return the matrix dimension, sites times orbitals."""
        return self.n_sites * self.orbital_dim

    @property
    def is_periodic(self) -> bool:
        return self.boundary == PERIODIC

    @property
    def sites(self) -> np.ndarray:
        """Return the (n_sites, d) array of sites in lexicographic order."""
        return _lattice_sites(self.sizes)

    def site_index(self, x: ArrayLike) -> int:
        x = int_vector(x, self.dim, 'site')
        if np.any(x < 0) or np.any(x >= np.array(self.sizes)):
            raise IndexError(f'Site {tuple(x)} outside of window {self.sizes}')
        return int(np.ravel_multi_index(tuple(x), self.sizes))

    def with_orbital_dim(self, orbital_dim: int) -> Window:
        return Window(self.sizes, self.boundary, orbital_dim)


@dataclass(frozen=True, eq=False)
class LatticeOperator:
    """A dense matrix on a window."""

    window: Window
    data: np.ndarray
    twist: Optional[TwistMatrix] = None
    hermitian_hint: bool = False

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=complex)
        size = self.window.size
        if data.shape != (size, size):
            raise DimensionError(
                f'Matrix of shape {data.shape} does not match window size {size}',
            )
        object.__setattr__(self, 'data', data)

    @classmethod
    def from_matrix(cls, data: ArrayLike, orbital_dim: int = 1) -> LatticeOperator:
        """Wrap a plain square matrix on a 1D open window."""
        data = np.asarray(data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise DimensionError(f'Expected a square matrix, got shape {data.shape}')
        if data.shape[0] % orbital_dim:
            raise DimensionError(
                f'Matrix size {data.shape[0]} is not a multiple of the orbital'
                f' dimension {orbital_dim}',
            )
        window = Window((data.shape[0] // orbital_dim,), OPEN, orbital_dim)
        return cls(window, data)

    @classmethod
    def identity(
            cls,
            window: Window,
            twist: Optional[TwistMatrix] = None,
    ) -> LatticeOperator:
        return cls(window, np.eye(window.size, dtype=complex), twist, True)

    def like(self, data: np.ndarray, hermitian_hint: bool = False) -> LatticeOperator:
        """Return an operator on the same window and twist."""
        return LatticeOperator(self.window, data, self.twist, hermitian_hint)

    def dagger(self) -> LatticeOperator:
        return self.like(self.data.conj().T, self.hermitian_hint)

    def __matmul__(self, other: LatticeOperator) -> LatticeOperator:
        return self.like(self.data @ other.data)

    def __add__(self, other: LatticeOperator) -> LatticeOperator:
        return self.like(self.data + other.data)

    def __sub__(self, other: LatticeOperator) -> LatticeOperator:
        return self.like(self.data - other.data)

    def __mul__(self, z: complex) -> LatticeOperator:
        return self.like(complex(z) * self.data)

    __rmul__ = __mul__

    def hermiticity_residual(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T), initial=0.0))


def commensurability_residual(
        theta: TwistMatrix,
        sizes: tuple[int, ...],
        axis: int = 1,
) -> float:
    """Return max |Θ_jk·N / 2π - round(.)| with N = N_k (axis=1) or N_j (axis=0)."""
    n = np.asarray(sizes, dtype=float)
    scaled = theta.entries * (n[None, :] if axis == 1 else n[:, None]) / (2.0 * np.pi)
    return float(np.max(np.abs(scaled - np.round(scaled)), initial=0.0))


def check_commensurate(
        theta: TwistMatrix,
        window: Window,
        for_translations: bool = False,
) -> None:
    """Raise if the flux is not compatible with the periodic window."""
    if not window.is_periodic:
        return
    axes = (1, 0) if for_translations else (1,)
    for axis in axes:
        residual = commensurability_residual(theta, window.sizes, axis)
        if residual > COMMENSURABILITY_TOLERANCE:
            raise CommensurabilityError(
                f'Twist {theta.entries.tolist()} is not commensurate with the'
                f' periodic window {window.sizes}',
            )


def _check_window(dim: int, orbital_dim: int, window: Window) -> None:
    if window.dim != dim:
        raise DimensionError(
            f'Window dimension {window.dim} does not match lattice dimension {dim}',
        )
    if window.orbital_dim != orbital_dim:
        raise DimensionError(
            f'Window orbital dimension {window.orbital_dim} does not match'
            f' {orbital_dim}',
        )


def materialize(
        p: NcPoly,
        omega: Optional[DisorderConfig],
        window: Window,
) -> LatticeOperator:
    """Return π_ω(p) on the window.

    Hops leaving an open window are dropped. On periodic windows the
    configuration is read through its torus view (`disorder.periodized`).

    """
    _check_window(p.dim, p.orbital_dim, window)
    check_commensurate(p.twist, window)
    sizes = np.array(window.sizes)
    for s in p.support:
        if np.any(np.abs(s) >= sizes):
            raise CommensurabilityError(
                f'Hopping {s} does not fit in the window {window.sizes}',
            )
    if p.has_site_functions:
        if omega is None:
            raise ValueError('A disorder configuration is needed to materialize')
        if window.is_periodic:
            omega = periodized(omega, window.sizes)
    n = p.orbital_dim
    n_sites = window.n_sites
    sites = window.sites
    theta = p.twist.entries
    data = np.zeros((n_sites, n, n_sites, n), dtype=complex)
    for s, c in p.coeffs.items():
        sv = np.array(s)
        targets = sites + sv
        if window.is_periodic:
            targets = np.mod(targets, sizes)
            src = np.arange(n_sites)
        else:
            src = np.nonzero(np.all((targets >= 0) & (targets < sizes), axis=1))[0]
            targets = targets[src]
        if not src.size:
            continue
        tgt = np.ravel_multi_index(tuple(targets.T), window.sizes)
        phase = np.exp(1j * (sites[src] @ (theta.T @ sv)))
        if c.is_constant:
            blocks = phase[:, None, None] * c.value[None, :, :]
        else:
            blocks = phase[:, None, None] * np.stack(
                [c(shift(omega, x)) for x in targets],
            )
        # Each s maps sites injectively, so no index repeats here.
        data[tgt, :, src, :] += blocks
    return LatticeOperator(window, data.reshape(window.size, window.size), p.twist)


def dual_translation(y: ArrayLike, window: Window, theta: TwistMatrix) -> LatticeOperator:
    """Return U^y, with U^y|x⟩ = exp(i yᵀΘx)|x + y⟩."""
    return materialize(monomial(theta, y, orbital_dim=window.orbital_dim), None, window)


def direct_translation(
        y: ArrayLike,
        window: Window,
        theta: TwistMatrix,
) -> LatticeOperator:
    """Return V^y, with V^y|x⟩ = exp(i (x + y)ᵀΘy)|x + y⟩.

    V^y commutes with every U^z. On periodic windows this requires both
    Θ_jk·N_k and Θ_jk·N_j to be multiples of 2π.

    """
    if window.dim != theta.dim:
        raise DimensionError(
            f'Window dimension {window.dim} does not match twist dimension'
            f' {theta.dim}',
        )
    check_commensurate(theta, window, for_translations=True)
    y = int_vector(y, window.dim, 'translation')
    sizes = np.array(window.sizes)
    sites = window.sites
    targets = sites + y
    if window.is_periodic:
        src = np.arange(window.n_sites)
        wrapped = np.mod(targets, sizes)
    else:
        src = np.nonzero(np.all((targets >= 0) & (targets < sizes), axis=1))[0]
        targets = targets[src]
        wrapped = targets
    phase = np.exp(1j * (targets @ (theta.entries @ y)))
    perm = np.zeros((window.n_sites, window.n_sites), dtype=complex)
    if src.size:
        perm[np.ravel_multi_index(tuple(wrapped.T), window.sizes), src] = phase
    data = np.kron(perm, np.eye(window.orbital_dim))
    return LatticeOperator(window, data, theta)


def position_commutator(
        m: LatticeOperator,
        j: int,
        strict: bool = True,
) -> LatticeOperator:
    """Return i[X_j, M] with X_j the position operator along axis j (1-based).

    On periodic windows displacements use the minimal image. A displacement
    of exactly N_j/2 is ambiguous: with `strict`, a nonzero entry there is an
    error; otherwise such entries are treated as displacement 0.

    """
    window = m.window
    check_axis(j, window.dim)
    coords = window.sites[:, j - 1]
    disp = coords[:, None] - coords[None, :]
    if window.is_periodic:
        size = window.sizes[j - 1]
        half = size // 2
        disp = np.mod(disp + half, size) - half
        if size % 2 == 0:
            ambiguous = np.abs(disp) == half
            if strict:
                n = window.orbital_dim
                blocks = np.abs(m.data).reshape(
                    window.n_sites, n, window.n_sites, n,
                ).max(axis=(1, 3))
                scale = max(1.0, float(blocks.max(initial=0.0)))
                if np.any(blocks[ambiguous] > 1.0e-12 * scale):
                    raise CommensurabilityError(
                        f'Operator has entries at displacement {half} along axis'
                        f' {j}, ambiguous on a periodic window of size {size}',
                    )
            disp = np.where(ambiguous, 0, disp)
    n = window.orbital_dim
    factor = np.kron(disp, np.ones((n, n)))
    return m.like(1j * factor * m.data)


def interior_mask(window: Window, margin: int = 0) -> np.ndarray:
    """Return the boolean mask of sites at distance >= margin from open edges."""
    if margin < 0:
        raise ValueError(f'Margin must be >= 0, got {margin}')
    if window.is_periodic:
        return np.ones(window.n_sites, dtype=bool)
    sizes = np.array(window.sizes)
    mask = np.all(
        (window.sites >= margin) & (window.sites <= sizes - 1 - margin), axis=1,
    )
    if not mask.any():
        raise ValueError(
            f'Margin {margin} leaves no interior site in window {window.sizes}',
        )
    return mask


def site_average(window: Window, site_traces: np.ndarray, margin: int = 0) -> complex:
    """Return the average of per-site traces over the interior."""
    return complex(np.mean(site_traces[interior_mask(window, margin)]))


def site_traces(m: LatticeOperator) -> np.ndarray:
    """Return tr_orbital ⟨x|M|x⟩ for every site x."""
    n = m.window.orbital_dim
    return np.diagonal(m.data).reshape(m.window.n_sites, n).sum(axis=1)


def volume_trace(m: LatticeOperator, margin: int = 0) -> complex:
    """Return the per-site trace, averaged over interior sites.

    The orbital trace is not normalized; `margin` is ignored on periodic
    windows.

    """
    return site_average(m.window, site_traces(m), margin)


def fourier_from_matrix(
        m: LatticeOperator,
        s: ArrayLike,
        x: ArrayLike,
        twist: Optional[TwistMatrix] = None,
) -> np.ndarray:
    """Return exp(-i sᵀΘx)⟨x + s|M|x⟩, an estimate of Φ_s(ϱ(x + s)ω)."""
    theta = twist if twist is not None else m.twist
    if theta is None:
        raise ValueError('A twist matrix is needed to extract Fourier coefficients')
    window = m.window
    s = int_vector(s, window.dim, 's')
    x = int_vector(x, window.dim, 'x')
    sizes = np.array(window.sizes)
    if window.is_periodic:
        x = np.mod(x, sizes)
        target = np.mod(x + s, sizes)
    else:
        target = x + s
    a = window.site_index(x)
    b = window.site_index(target)
    n = window.orbital_dim
    block = m.data[b * n:(b + 1) * n, a * n:(a + 1) * n]
    return np.exp(-1j * (s @ theta.entries @ x)) * block


def op_norm_estimate(m: LatticeOperator | np.ndarray) -> float:
    """Return the largest singular value."""
    data = m.data if isinstance(m, LatticeOperator) else np.asarray(m)
    if data.size == 0:
        return 0.0
    return float(scipy.linalg.svdvals(data, check_finite=False)[0])


def _orbital_indices(site_idx: np.ndarray, n: int) -> np.ndarray:
    return (site_idx[:, None] * n + np.arange(n)[None, :]).ravel()


def covariance_residual(
        model: ModelSpec,
        omega: Optional[DisorderConfig],
        y: ArrayLike,
        window: Window,
        margin: int = 0,
) -> float:
    """Return ‖V^y H_ω V^y† - H_{ϱ(-y)ω}‖.

    The direct translations V^y are used: they commute with the algebra
    representation, so the identity holds for any flux. On open windows the
    comparison is restricted to sites z with z and z - y in the interior.

    """
    # Import here to avoid circular import.
    from .models import build_hamiltonian

    h_poly = build_hamiltonian(model)
    theta = h_poly.twist
    y = int_vector(y, window.dim, 'translation')
    omega_shifted = shift(omega, -y) if omega is not None else None
    h = materialize(h_poly, omega, window)
    h_shifted = materialize(h_poly, omega_shifted, window)
    if window.is_periodic:
        v = direct_translation(y, window, theta)
        return op_norm_estimate(v @ h @ v.dagger() - h_shifted)

    # (V H V†)_{z', z} = exp(i z'ᵀΘy) H_{z'-y, z-y} exp(-i zᵀΘy).
    sizes = np.array(window.sizes)
    sites = window.sites
    src = sites - y
    inside = interior_mask(window, margin) & np.all(
        (src >= margin) & (src <= sizes - 1 - margin), axis=1,
    )
    idx = np.nonzero(inside)[0]
    if not idx.size:
        raise ValueError(
            f'Translation {tuple(y)} leaves no common interior in {window.sizes}',
        )
    n = window.orbital_dim
    rows = _orbital_indices(idx, n)
    src_rows = _orbital_indices(
        np.ravel_multi_index(tuple(src[idx].T), window.sizes), n,
    )
    phase = np.repeat(np.exp(1j * (sites[idx] @ (theta.entries @ y))), n)
    moved = phase[:, None] * h.data[np.ix_(src_rows, src_rows)] * phase.conj()[None, :]
    return op_norm_estimate(moved - h_shifted.data[np.ix_(rows, rows)])
