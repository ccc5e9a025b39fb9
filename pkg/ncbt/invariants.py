"""Even and odd Chern numbers, their predicted range and k-space oracles.

For an ordered multi-index I of length n,

    Ch_I(P) = Λ_n Σ_ρ (-1)^ρ T(P ∂_{ρ(1)}P ··· ∂_{ρ(n)}P)            (n even)
    Ch_I(U) = Λ_n Σ_ρ (-1)^ρ T(Π_l U†∂_{ρ(l)}U)                     (n odd)

where T is the per-volume trace and ∂_j = i[X_j, ·] on the lattice.

The overall sign matches the Berry-curvature convention of the oracles:
H(k) = Σ_s Φ_s exp(-ik·s), Chern number (1/2π)∫F with F = dA and
A = i⟨u|du⟩. With that convention the lowest Hofstadter band at flux 1/3
has Chern number -1.

"""

from __future__ import annotations

from dataclasses import asdict
from dataclasses import dataclass
from itertools import combinations
from itertools import product
import math
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike
import scipy.special

from .errors import DimensionError
from .errors import GaplessError
from .errors import NumericalError
from .lattice_rep import LatticeOperator
from .lattice_rep import position_commutator
from .lattice_rep import site_average
from .twist_core import TwistMatrix
from .utils import permutations_with_sign
from .utils import warn

PROJECTION_TOLERANCE = 1.0e-8
UNITARY_TOLERANCE = 1.0e-8

# Determinants below this make a winding ill-defined.
SINGULAR_TOLERANCE = 1.0e-10


@dataclass(frozen=True)
class MultiIndex:
    """An ordered tuple of distinct axes in 1..d (1-based)."""

    axes: tuple[int, ...]
    dim: int

    def __post_init__(self) -> None:
        axes = tuple(int(j) for j in self.axes)
        if len(set(axes)) != len(axes):
            raise DimensionError(f'Repeated axis in multi-index {axes}')
        for j in axes:
            if not (1 <= j <= self.dim):
                raise DimensionError(f'Axis {j} out of range 1..{self.dim}')
        object.__setattr__(self, 'axes', axes)

    @classmethod
    def of(cls, axes: MultiIndex | Sequence[int], dim: int) -> MultiIndex:
        if isinstance(axes, MultiIndex):
            if axes.dim != dim:
                raise DimensionError(
                    f'Multi-index of dimension {axes.dim} used in dimension {dim}',
                )
            return axes
        return cls(tuple(axes), dim)

    def __len__(self) -> int:
        return len(self.axes)

    @property
    def is_strong(self) -> bool:
        return sorted(self.axes) == list(range(1, self.dim + 1))


@dataclass(frozen=True)
class ChernResult:
    """A sample-averaged Chern number with its diagnostics."""

    value: float
    imag_residual: float
    per_sample: tuple[complex, ...]
    stderr: float
    axes: tuple[int, ...] = ()
    dim: int = 0
    window_sizes: tuple[int, ...] = ()
    boundary: str = ''
    margin: int = 0

    @property
    def nearest_integer(self) -> int:
        return int(round(self.value))

    @property
    def quantization_error(self) -> float:
        return abs(self.value - self.nearest_integer)

    @property
    def is_strong(self) -> bool:
        """Return True for I = {1, ..., d}, False for weak invariants."""
        return self.dim > 0 and sorted(self.axes) == list(range(1, self.dim + 1))

    def is_quantized(self, tol: float) -> bool:
        return self.quantization_error <= tol

    def to_dict(self) -> dict:
        out = asdict(self)
        out['per_sample'] = [[z.real, z.imag] for z in self.per_sample]
        out['axes'] = list(self.axes)
        out['window_sizes'] = list(self.window_sizes)
        out['nearest_integer'] = self.nearest_integer
        out['quantization_error'] = self.quantization_error
        out['is_strong'] = self.is_strong
        return out


@dataclass(frozen=True)
class RangeDescription:
    """The predicted value set Z + Σ_J c_J Z, offsets listed with c_I = 1 first."""

    offsets: tuple[float, ...]
    axes: tuple[int, ...]

    def label(self, value: float, tol: float = 1.0e-3, bound: int = 10):
        return gap_label(value, self.offsets, tol, bound)

    def contains(self, value: float, tol: float = 1.0e-3, bound: int = 10) -> bool:
        return self.label(value, tol, bound) is not None


@dataclass(frozen=True)
class OracleResult:
    """An integer invariant from a k-space computation."""

    value: int
    raw: float
    residual: float
    grid: int
    refined_raw: Optional[float] = None
    stable: bool = True


def lambda_const(n: int) -> complex:
    """Return Λ_n, (2πi)^{n/2}/(n/2)! for even n, i(iπ)^{(n-1)/2}/n!! for odd n."""
    if n < 1:
        raise ValueError(f'Λ_n needs n >= 1, got {n}')
    if n % 2 == 0:
        return complex((2j * math.pi) ** (n // 2) / math.factorial(n // 2))
    return complex(
        1j * (1j * math.pi) ** ((n - 1) // 2)
        / scipy.special.factorial2(n, exact=True),
    )


def _trace_of_product(
        mats: Sequence[np.ndarray],
        op: LatticeOperator,
        margin: int,
) -> complex:
    """Return the volume trace of mats[0] @ ... @ mats[-1]."""
    if len(mats) == 1:
        diag = np.diagonal(mats[0])
    else:
        head = mats[0]
        for m in mats[1:-1]:
            head = head @ m
        diag = np.einsum('ij,ji->i', head, mats[-1])
    window = op.window
    traces = diag.reshape(window.n_sites, window.orbital_dim).sum(axis=1)
    return site_average(window, traces, margin)


def _check_projection(p: LatticeOperator) -> None:
    idem = float(np.max(np.abs(p.data @ p.data - p.data), initial=0.0))
    herm = p.hermiticity_residual()
    if max(idem, herm) > PROJECTION_TOLERANCE:
        raise NumericalError(
            f'Operator is not an orthogonal projection: ‖P² - P‖ = {idem:.3e},'
            f' ‖P - P†‖ = {herm:.3e}',
        )


def _check_unitary(u: LatticeOperator) -> None:
    residual = float(np.max(
        np.abs(u.data.conj().T @ u.data - np.eye(u.window.size)), initial=0.0,
    ))
    if residual > UNITARY_TOLERANCE:
        raise NumericalError(f'Operator is not unitary, residual {residual:.3e}')


def chern_even(
        p: LatticeOperator,
        axes: MultiIndex | Sequence[int],
        margin: int = 0,
) -> complex:
    """Return Ch_I(P) for one configuration."""
    index = MultiIndex.of(axes, p.window.dim)
    n = len(index)
    if n == 0 or n % 2:
        raise ValueError(f'Even Chern number needs an even |I| > 0, got {index.axes}')
    _check_projection(p)
    derivs = {
        j: position_commutator(p, j, strict=False).data for j in set(index.axes)
    }
    total = 0.0j
    for perm, sign in permutations_with_sign(n):
        mats = [p.data] + [derivs[index.axes[k]] for k in perm]
        total += sign * _trace_of_product(mats, p, margin)
    return lambda_const(n) * total


def chern_odd(
        u: LatticeOperator,
        axes: MultiIndex | Sequence[int],
        margin: int = 0,
) -> complex:
    """Return Ch_I(U) for one configuration."""
    index = MultiIndex.of(axes, u.window.dim)
    n = len(index)
    if n % 2 == 0:
        raise ValueError(f'Odd Chern number needs an odd |I|, got {index.axes}')
    _check_unitary(u)
    u_dag = u.data.conj().T
    factors = {
        j: u_dag @ position_commutator(u, j, strict=False).data
        for j in set(index.axes)
    }
    total = 0.0j
    for perm, sign in permutations_with_sign(n):
        total += sign * _trace_of_product(
            [factors[index.axes[k]] for k in perm], u, margin,
        )
    return lambda_const(n) * total


def chern_odd_telescoped(
        u: LatticeOperator,
        axes: MultiIndex | Sequence[int],
        margin: int = 0,
) -> complex:
    """Return Λ_n Σ_ρ (-1)^ρ T((U† - 1)(∂U)(∂U†)···(∂U†)(∂U)).

    Equal to `chern_odd` in the infinite volume; for |I| = 1 the two agree
    on any periodic window since the diagonal of ∂U vanishes.

    """
    index = MultiIndex.of(axes, u.window.dim)
    n = len(index)
    if n % 2 == 0:
        raise ValueError(f'Odd Chern number needs an odd |I|, got {index.axes}')
    _check_unitary(u)
    d_u = {j: position_commutator(u, j, strict=False).data for j in set(index.axes)}
    head = u.data.conj().T - np.eye(u.window.size)
    total = 0.0j
    for perm, sign in permutations_with_sign(n):
        mats = [head]
        for pos, k in enumerate(perm):
            d = d_u[index.axes[k]]
            # ∂(U†) = (∂U)†.
            mats.append(d if pos % 2 == 0 else d.conj().T)
        total += sign * _trace_of_product(mats, u, margin)
    return lambda_const(n) * total


def hall_tensor(p: LatticeOperator, margin: int = 0) -> np.ndarray:
    """Return the antisymmetric table of Ch_{(i,j)}(P), real parts."""
    d = p.window.dim
    if d < 2:
        raise DimensionError('Hall tensor needs dimension >= 2')
    table = np.zeros((d, d))
    for i, j in combinations(range(1, d + 1), 2):
        value = chern_even(p, (i, j), margin).real
        table[i - 1, j - 1] = value
        table[j - 1, i - 1] = -value
    return table


def pfaffian(a: ArrayLike) -> float:
    """Return the Pfaffian of a real antisymmetric matrix, Pf of 0x0 being 1."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f'Pfaffian needs a square matrix, got shape {a.shape}')
    if np.max(np.abs(a + a.T), initial=0.0) > 1.0e-12:
        raise ValueError('Pfaffian needs an antisymmetric matrix')
    if a.shape[0] % 2:
        raise ValueError(f'Pfaffian needs an even dimension, got {a.shape[0]}')
    return _pfaffian(a)


def _pfaffian(a: np.ndarray) -> float:
    n = a.shape[0]
    if n == 0:
        return 1.0
    total = 0.0
    for j in range(1, n):
        if a[0, j] == 0.0:
            continue
        rest = [k for k in range(1, n) if k != j]
        total += (-1) ** (j + 1) * a[0, j] * _pfaffian(a[np.ix_(rest, rest)])
    return total


def chern_range(
        theta: TwistMatrix,
        axes: MultiIndex | Sequence[int] = (),
) -> RangeDescription:
    """Return the offsets c_J = (2π)^{-|J∖I|/2} Pf(Θ̃_{J∖I}).

    J runs over the supersets of I with |J∖I| even.

    Θ̃ = Θ - Θᵀ; zero and repeated offsets are dropped, c_I = 1 comes first.

    """
    index = MultiIndex.of(axes, theta.dim)
    rest = [j for j in range(1, theta.dim + 1) if j not in index.axes]
    tilde = theta.antisym()
    offsets: list[float] = []
    for size in range(0, len(rest) + 1, 2):
        for extra in combinations(rest, size):
            idx = [k - 1 for k in extra]
            c = (2.0 * math.pi) ** (-size / 2) * pfaffian(tilde[np.ix_(idx, idx)])
            if abs(c) < 1.0e-12 or any(abs(c - o) < 1.0e-12 for o in offsets):
                continue
            offsets.append(float(c))
    return RangeDescription(tuple(offsets), index.axes)


def gap_label(
        value: float,
        offsets: Sequence[float],
        tol: float = 1.0e-3,
        bound: int = 10,
) -> Optional[tuple[int, ...]]:
    """Return integers a_J with |value - Σ a_J c_J| <= tol, smallest first.

    The coefficients of all offsets but the first are searched in
    [-bound, bound]; the first one is then obtained by rounding.

    """
    if not offsets:
        return None
    first, others = offsets[0], offsets[1:]
    best = None
    for coeffs in product(range(-bound, bound + 1), repeat=len(others)):
        rest = value - sum(c * o for c, o in zip(coeffs, others))
        a0 = int(round(rest / first))
        if abs(rest - a0 * first) > tol:
            continue
        candidate = (a0,) + tuple(coeffs)
        key = (sum(abs(c) for c in candidate), candidate)
        if best is None or key < best[0]:
            best = (key, candidate)
    return None if best is None else best[1]


def _plaquette_chern(
        bloch: Callable[[ArrayLike], np.ndarray],
        band_count: int,
        grid: int,
) -> float:
    ks = 2.0 * math.pi * np.arange(grid) / grid
    h = np.array([[bloch((k1, k2)) for k2 in ks] for k1 in ks])
    size = h.shape[-1]
    if not (1 <= band_count <= size):
        raise ValueError(f'Band count {band_count} out of range 1..{size}')
    energies, vectors = np.linalg.eigh(h)
    if band_count < size:
        gap = float(np.min(energies[..., band_count] - energies[..., band_count - 1]))
        if gap <= 1.0e-8:
            raise GaplessError(f'Gap above band {band_count} closes on the k grid')
    frames = vectors[..., :band_count]

    def link(axis: int) -> np.ndarray:
        overlap = np.einsum(
            'abmi,abmj->abij', frames.conj(), np.roll(frames, -1, axis=axis),
        )
        return np.linalg.det(overlap)

    link1 = link(0)
    link2 = link(1)
    # Counterclockwise loop k → k + e1 → k + e1 + e2 → k + e2.
    loop = (
        link1 * np.roll(link2, -1, axis=0)
        * np.roll(link1, -1, axis=1).conj() * link2.conj()
    )
    # ⟨u(k)|u(k + δ)⟩ ≈ exp(-iA·δ), so the loop phases sum to minus the flux.
    return float(-np.sum(np.angle(loop)) / (2.0 * math.pi))


def kspace_chern_oracle(
        bloch: Callable[[ArrayLike], np.ndarray],
        band_count: int,
        grid: int = 64,
        refine: bool = True,
) -> OracleResult:
    """Return the Chern number of the lowest `band_count` bands of H(k).

    Plaquette Berry fluxes (link variables of the band frame) are summed on
    a grid×grid mesh of [0, 2π)²; with `refine`, the computation is repeated
    on a doubled grid and the refined value is reported.

    """
    raw = _plaquette_chern(bloch, band_count, grid)
    refined = _plaquette_chern(bloch, band_count, 2 * grid) if refine else None
    final = refined if refined is not None else raw
    value = int(round(final))
    stable = refined is None or int(round(raw)) == value
    if not stable:
        warn(
            f'k-space Chern number changed under grid refinement:'
            f' {raw:.4f} -> {refined:.4f}',
        )
    return OracleResult(value, raw, abs(final - value), grid, refined, stable)


def _winding(q: Callable[[float], ArrayLike], grid: int) -> float:
    ks = 2.0 * math.pi * np.arange(grid + 1) / grid
    dets = np.array([
        np.linalg.det(np.atleast_2d(np.asarray(q(k), dtype=complex))) for k in ks
    ])
    smallest = float(np.min(np.abs(dets)))
    if smallest < SINGULAR_TOLERANCE:
        raise GaplessError(f'Determinant nearly vanishes on the k grid ({smallest:.2e})')
    return float(np.sum(np.angle(dets[1:] / dets[:-1])) / (2.0 * math.pi))


def winding_oracle(
        q: Callable[[float], ArrayLike],
        grid: int = 256,
        refine: bool = True,
) -> OracleResult:
    """Return the winding number of det q(k) over k ∈ [0, 2π)."""
    raw = _winding(q, grid)
    refined = _winding(q, 2 * grid) if refine else None
    final = refined if refined is not None else raw
    value = int(round(final))
    stable = refined is None or int(round(raw)) == value
    if not stable:
        warn(f'Winding number changed under grid refinement: {raw:.4f} -> {refined:.4f}')
    return OracleResult(value, raw, abs(final - value), grid, refined, stable)


def disorder_average(
        per_sample: Sequence[complex],
        axes: Sequence[int] = (),
        dim: int = 0,
        window_sizes: Sequence[int] = (),
        boundary: str = '',
        margin: int = 0,
) -> ChernResult:
    """Return the mean of real parts with its standard error."""
    z = np.asarray(list(per_sample), dtype=complex)
    if not z.size:
        raise ValueError('Cannot average an empty list of samples')
    stderr = float(np.std(z.real, ddof=1) / math.sqrt(z.size)) if z.size > 1 else 0.0
    return ChernResult(
        value=float(np.mean(z.real)),
        imag_residual=float(np.max(np.abs(z.imag))),
        per_sample=tuple(complex(v) for v in z),
        stderr=stderr,
        axes=tuple(axes),
        dim=dim,
        window_sizes=tuple(window_sizes),
        boundary=boundary,
        margin=margin,
    )
