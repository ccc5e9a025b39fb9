"""Twisted crossed-product algebra on finitely supported Fourier coefficients.

An element p = Σ_s Φ_s u^s is stored as the finite map s ↦ Φ_s. Products
and adjoints follow the twisted convolution rules with the cocycle
ζ(x, y) = exp(i xᵀΘy) and the shift action α on coefficients:

    Φ_s(pq) = Σ_x ζ(x, s - x) Φ_x(p) α(x)(Φ_{s-x}(q))
    Φ_s(p*) = exp(i sᵀΘs) α(s)(Φ_{-s}(p)†)

Coefficients are either constant matrices or functions of a disorder
configuration. All objects are immutable.

"""

from __future__ import annotations

from dataclasses import dataclass
from dataclasses import field
from fractions import Fraction
from functools import partial
from itertools import product
import math
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike

from .disorder import DisorderConfig
from .disorder import DisorderSpec
from .disorder import probe_configs
from .disorder import shift
from .errors import DimensionError
from .errors import WindowExceededError
from .utils import debug
from .utils import int_key
from .utils import int_vector

TWO_PI = 2.0 * math.pi

# Coefficients with an operator norm below this value are dropped.
ZERO_TOLERANCE = 1.0e-14

# Allowed deviation from a strictly lower-triangular twist.
TWIST_TOLERANCE = 1.0e-12

CONSTANT = 'constant'
SITE_FUNCTION = 'site-function'

SEMINORM_BACKENDS = ('l1', 'operator-estimate')

# Typing hints.
Site = tuple[int, ...]
SiteFunction = Callable[[DisorderConfig], ArrayLike]


@dataclass(frozen=True, eq=False)
class TwistMatrix:
    """The lower-triangular phase matrix Θ, entries in radians in [0, 2π)."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        theta = np.array(self.entries, dtype=float)
        if theta.ndim != 2 or theta.shape[0] != theta.shape[1] or theta.size == 0:
            raise DimensionError(
                f'Twist matrix must be square and non-empty, got shape {theta.shape}',
            )
        if np.any(np.abs(np.triu(theta)) > TWIST_TOLERANCE):
            raise ValueError(
                'Twist matrix must be lower triangular with a zero diagonal',
            )
        theta = np.tril(np.mod(theta, TWO_PI), -1)
        # Tiny negative entries wrap to exactly 2π.
        theta[theta >= TWO_PI] = 0.0
        theta.flags.writeable = False
        object.__setattr__(self, 'entries', theta)

    @classmethod
    def zero(cls, dim: int) -> TwistMatrix:
        return cls(np.zeros((dim, dim)))

    @classmethod
    def from_fluxes(
            cls,
            dim: int,
            fluxes: Mapping[tuple[int, int], Fraction | float],
    ) -> TwistMatrix:
        """Return Θ with Θ[row, col] = 2π·flux, 1-based indices, row > col."""
        theta = np.zeros((dim, dim))
        for (row, col), flux in fluxes.items():
            if not (1 <= col < row <= dim):
                raise DimensionError(
                    f'Twist entry ({row}, {col}) is not below the diagonal of'
                    f' a {dim}x{dim} matrix',
                )
            theta[row - 1, col - 1] = TWO_PI * float(flux)
        return cls(theta)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def antisym(self) -> np.ndarray:
        """Return Θ̂ = Θ - Θᵀ."""
        return self.entries - self.entries.T

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TwistMatrix):
            return NotImplemented
        return (
            self.entries.shape == other.entries.shape
            and np.allclose(self.entries, other.entries, rtol=0.0, atol=1.0e-12)
        )

    def __hash__(self) -> int:
        return hash(self.dim)

    def __repr__(self) -> str:
        return f'TwistMatrix({self.entries.tolist()})'


def cocycle(theta: TwistMatrix, x: ArrayLike, y: ArrayLike) -> complex:
    """Return ζ(x, y) = exp(i xᵀΘy)."""
    x = int_vector(x, theta.dim, 'x')
    y = int_vector(y, theta.dim, 'y')
    return complex(np.exp(1j * (x @ theta.entries @ y)))


def antisym(theta: TwistMatrix) -> np.ndarray:
    """Return Θ̂ = Θ - Θᵀ."""
    return theta.antisym()


# Evaluation helpers for composite site functions, bound with `partial`.
# Coefficients must stay picklable.

def _eval_product(left: Coefficient, right: Coefficient, omega) -> np.ndarray:
    return left(omega) @ right(omega)


def _eval_sum(terms: tuple[Coefficient, ...], omega) -> np.ndarray:
    out = terms[0](omega).copy()
    for t in terms[1:]:
        out += t(omega)
    return out


def _eval_scaled(c: Coefficient, z: complex, omega) -> np.ndarray:
    return z * c(omega)


def _eval_dagger(c: Coefficient, omega) -> np.ndarray:
    return c(omega).conj().T


def _eval_shifted(c: Coefficient, s: Site, omega) -> np.ndarray:
    return c(shift(omega, tuple(-v for v in s)))


@dataclass(frozen=True, eq=False)
class Coefficient:
    """A Fourier coefficient, an n×n matrix possibly depending on ω."""

    orbital_dim: int
    kind: str = CONSTANT
    value: Optional[np.ndarray] = None
    func: Optional[SiteFunction] = None

    def __post_init__(self) -> None:
        n = self.orbital_dim
        if n < 1:
            raise DimensionError(f'Orbital dimension must be >= 1, got {n}')
        if self.kind == CONSTANT:
            value = np.array(self.value, dtype=complex)
            if value.ndim == 0:
                value = value.reshape(1, 1)
            if value.shape != (n, n):
                raise DimensionError(
                    f'Coefficient value must be {n}x{n}, got shape {value.shape}',
                )
            value.flags.writeable = False
            object.__setattr__(self, 'value', value)
        elif self.kind == SITE_FUNCTION:
            if not callable(self.func):
                raise ValueError('A site-function coefficient needs a callable')
        else:
            raise ValueError(f'Unknown coefficient kind "{self.kind}"')

    @classmethod
    def constant(cls, value: ArrayLike) -> Coefficient:
        value = np.array(value, dtype=complex)
        if value.ndim == 0:
            value = value.reshape(1, 1)
        return cls(orbital_dim=value.shape[0], kind=CONSTANT, value=value)

    @classmethod
    def site_function(cls, func: SiteFunction, orbital_dim: int = 1) -> Coefficient:
        return cls(orbital_dim=orbital_dim, kind=SITE_FUNCTION, func=func)

    @classmethod
    def zero(cls, orbital_dim: int = 1) -> Coefficient:
        return cls(orbital_dim, value=np.zeros((orbital_dim, orbital_dim)))

    @classmethod
    def identity(cls, orbital_dim: int = 1) -> Coefficient:
        return cls(orbital_dim, value=np.eye(orbital_dim))

    @classmethod
    def coerce(cls, value, orbital_dim: Optional[int] = None) -> Coefficient:
        """Return a Coefficient from a Coefficient, a callable or an array."""
        if isinstance(value, Coefficient):
            c = value
        elif callable(value):
            c = cls.site_function(value, orbital_dim or 1)
        else:
            c = cls.constant(value)
        if orbital_dim is not None and c.orbital_dim != orbital_dim:
            raise DimensionError(
                f'Coefficient has orbital dimension {c.orbital_dim},'
                f' expected {orbital_dim}',
            )
        return c

    @property
    def is_constant(self) -> bool:
        return self.kind == CONSTANT

    def __call__(self, omega: Optional[DisorderConfig] = None) -> np.ndarray:
        """Return the matrix value at configuration ω."""
        if self.is_constant:
            return self.value
        if omega is None:
            raise ValueError(
                'A disorder configuration is needed to evaluate a site function',
            )
        out = np.asarray(self.func(omega), dtype=complex)
        if out.ndim == 0:
            out = out.reshape(1, 1)
        n = self.orbital_dim
        if out.shape != (n, n):
            raise DimensionError(
                f'Site function returned shape {out.shape}, expected ({n}, {n})',
            )
        return out

    def norm(self, samples: Sequence[DisorderConfig] = ()) -> float:
        """Return the operator norm, maximized over samples for site functions."""
        if self.is_constant:
            return float(np.linalg.norm(self.value, 2))
        if not samples:
            raise ValueError('Samples are needed to estimate a site-function norm')
        return max(float(np.linalg.norm(self(omega), 2)) for omega in samples)

    def is_negligible(self, spec: Optional[DisorderSpec] = None) -> bool:
        """Return True if the coefficient vanishes (on probe configurations)."""
        if self.is_constant:
            return float(np.linalg.norm(self.value, 2)) < ZERO_TOLERANCE
        if spec is None:
            return False
        for omega in probe_configs(spec):
            try:
                if float(np.linalg.norm(self(omega), 2)) >= ZERO_TOLERANCE:
                    return False
            except WindowExceededError as e:
                debug(f'Keeping coefficient that reads beyond the probe window: {e}')
                return False
        return True

    def matmul(self, other: Coefficient) -> Coefficient:
        if self.is_constant and other.is_constant:
            return Coefficient(self.orbital_dim, value=self.value @ other.value)
        return Coefficient.site_function(
            partial(_eval_product, self, other), self.orbital_dim,
        )

    def add(self, other: Coefficient) -> Coefficient:
        return sum_coefficients([self, other], self.orbital_dim)

    def scale(self, z: complex) -> Coefficient:
        z = complex(z)
        if self.is_constant:
            return Coefficient(self.orbital_dim, value=z * self.value)
        if z == 0.0:
            return Coefficient.zero(self.orbital_dim)
        if z == 1.0:
            return self
        return Coefficient.site_function(
            partial(_eval_scaled, self, z), self.orbital_dim,
        )

    def dagger(self) -> Coefficient:
        if self.is_constant:
            return Coefficient(self.orbital_dim, value=self.value.conj().T)
        if isinstance(self.func, partial) and self.func.func is _eval_dagger:
            return self.func.args[0]
        return Coefficient.site_function(partial(_eval_dagger, self), self.orbital_dim)

    def shifted(self, s: ArrayLike) -> Coefficient:
        """Return α(s)(self), i.e. ω ↦ self(ϱ(-s)ω)."""
        s = tuple(int(v) for v in np.ravel(s))
        if self.is_constant or not any(s):
            return self
        base = self
        if isinstance(self.func, partial) and self.func.func is _eval_shifted:
            # α(s)∘α(t) = α(s + t).
            base, t = self.func.args
            s = tuple(a + b for a, b in zip(s, t))
            if not any(s):
                return base
        return Coefficient.site_function(
            partial(_eval_shifted, base, s), self.orbital_dim,
        )


def sum_coefficients(terms: Iterable[Coefficient], orbital_dim: int) -> Coefficient:
    """Return the sum of coefficients, constant when all terms are."""
    const = np.zeros((orbital_dim, orbital_dim), dtype=complex)
    funcs: list[Coefficient] = []
    for c in terms:
        if c.orbital_dim != orbital_dim:
            raise DimensionError(
                f'Cannot add coefficients of orbital dimensions {c.orbital_dim}'
                f' and {orbital_dim}',
            )
        if c.is_constant:
            const += c.value
        else:
            funcs.append(c)
    if not funcs:
        return Coefficient(orbital_dim, value=const)
    if np.linalg.norm(const, 2) >= ZERO_TOLERANCE:
        funcs.append(Coefficient(orbital_dim, value=const))
    if len(funcs) == 1:
        return funcs[0]
    return Coefficient.site_function(partial(_eval_sum, tuple(funcs)), orbital_dim)


@dataclass(frozen=True)
class Seminorm:
    order: int
    backend: str
    value: float


@dataclass(frozen=True, eq=False)
class NcPoly:
    """A generalized trigonometric polynomial Σ_s Φ_s u^s.

    Coefficients whose norm is below `ZERO_TOLERANCE` are dropped at
    construction; site functions are probed on a few configurations of
    `disorder` for that purpose.

    """

    twist: TwistMatrix
    orbital_dim: int = 1
    coeffs: Mapping[Site, Coefficient] = field(default_factory=dict)
    disorder: Optional[DisorderSpec] = None

    def __post_init__(self) -> None:
        d = self.twist.dim
        if self.disorder is not None and self.disorder.dim != d:
            raise DimensionError(
                f'Disorder dimension {self.disorder.dim} does not match the twist'
                f' dimension {d}',
            )
        grouped: dict[Site, list[Coefficient]] = {}
        for key, c in dict(self.coeffs).items():
            s = int_key(key, d, 'Fourier index')
            grouped.setdefault(s, []).append(Coefficient.coerce(c, self.orbital_dim))
        canonical = {}
        for s in sorted(grouped):
            c = sum_coefficients(grouped[s], self.orbital_dim)
            if not c.is_negligible(self.disorder):
                canonical[s] = c
        object.__setattr__(self, 'coeffs', MappingProxyType(canonical))

    @property
    def dim(self) -> int:
        return self.twist.dim

    @property
    def support(self) -> tuple[Site, ...]:
        return tuple(self.coeffs)

    @property
    def radius(self) -> int:
        """Return the largest |s_j| over the support, 0 when empty."""
        return max((max(abs(v) for v in s) for s in self.coeffs), default=0)

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def has_site_functions(self) -> bool:
        return any(not c.is_constant for c in self.coeffs.values())

    def coefficient(self, s: ArrayLike) -> Coefficient:
        """Return Φ_s, the zero matrix outside of the support."""
        s = int_key(s, self.dim, 'Fourier index')
        return self.coeffs.get(s, Coefficient.zero(self.orbital_dim))

    def with_coeffs(self, coeffs: Mapping[Site, Coefficient]) -> NcPoly:
        return NcPoly(self.twist, self.orbital_dim, coeffs, self.disorder)

    def allclose(
            self,
            other: NcPoly,
            samples: Sequence[DisorderConfig] = (),
            atol: float = 1.0e-12,
    ) -> bool:
        """Return True if all coefficients agree within `atol`.

        Site functions are compared on `samples`, or on the probe
        configurations of the disorder spec if no sample is given.

        """
        check_compatible(self, other)
        if not samples and self.disorder is not None:
            samples = probe_configs(self.disorder)
        for s in set(self.support) | set(other.support):
            diff = self.coefficient(s).add(other.coefficient(s).scale(-1.0))
            if diff.is_constant:
                if np.max(np.abs(diff.value)) > atol:
                    return False
                continue
            if not samples:
                raise ValueError('Samples are needed to compare site functions')
            if any(np.max(np.abs(diff(omega))) > atol for omega in samples):
                return False
        return True

    def __add__(self, other: NcPoly) -> NcPoly:
        return nc_lincomb([(1.0, self), (1.0, other)])

    def __sub__(self, other: NcPoly) -> NcPoly:
        return nc_lincomb([(1.0, self), (-1.0, other)])

    def __neg__(self) -> NcPoly:
        return nc_lincomb([(-1.0, self)])

    def __mul__(self, other):
        if isinstance(other, NcPoly):
            return nc_mul(self, other)
        return nc_lincomb([(complex(other), self)])

    def __rmul__(self, other):
        return nc_lincomb([(complex(other), self)])

    def __repr__(self) -> str:
        return (
            f'NcPoly(dim={self.dim}, orbital_dim={self.orbital_dim},'
            f' support={list(self.support)})'
        )


def monomial(
        twist: TwistMatrix,
        s: ArrayLike,
        value=None,
        disorder: Optional[DisorderSpec] = None,
        orbital_dim: Optional[int] = None,
) -> NcPoly:
    """Return value·u^s, value defaulting to the identity."""
    if value is None:
        value = np.eye(orbital_dim or 1)
    c = Coefficient.coerce(value, orbital_dim)
    return NcPoly(twist, c.orbital_dim, {int_key(s, twist.dim): c}, disorder)


def constant(
        twist: TwistMatrix,
        value,
        disorder: Optional[DisorderSpec] = None,
        orbital_dim: Optional[int] = None,
) -> NcPoly:
    """Return value·u^0."""
    return monomial(twist, (0,) * twist.dim, value, disorder, orbital_dim)


def check_compatible(p: NcPoly, q: NcPoly) -> None:
    if p.twist != q.twist:
        raise DimensionError(f'Twist mismatch: {p.twist} vs {q.twist}')
    if p.orbital_dim != q.orbital_dim:
        raise DimensionError(
            f'Orbital dimension mismatch: {p.orbital_dim} vs {q.orbital_dim}',
        )
    if p.disorder != q.disorder:
        raise DimensionError('Polynomials use different disorder models')


def nc_mul(p: NcPoly, q: NcPoly) -> NcPoly:
    """Return the twisted product pq."""
    check_compatible(p, q)
    theta = p.twist.entries
    terms: dict[Site, list[Coefficient]] = {}
    for x, a in p.coeffs.items():
        xt = np.array(x) @ theta
        for t, b in q.coeffs.items():
            s = tuple(i + j for i, j in zip(x, t))
            phase = np.exp(1j * (xt @ np.array(t)))
            terms.setdefault(s, []).append(a.matmul(b.shifted(x)).scale(phase))
    return p.with_coeffs({
        s: sum_coefficients(cs, p.orbital_dim) for s, cs in terms.items()
    })


def nc_lincomb(terms: Sequence[tuple[complex, NcPoly]]) -> NcPoly:
    """Return Σ z_k p_k."""
    if not terms:
        raise ValueError('nc_lincomb needs at least one term')
    first = terms[0][1]
    acc: dict[Site, list[Coefficient]] = {}
    for z, p in terms:
        check_compatible(first, p)
        for s, c in p.coeffs.items():
            acc.setdefault(s, []).append(c.scale(z))
    return first.with_coeffs({
        s: sum_coefficients(cs, first.orbital_dim) for s, cs in acc.items()
    })


def adjoint(p: NcPoly) -> NcPoly:
    """Return p*."""
    theta = p.twist.entries
    out = {}
    for t, c in p.coeffs.items():
        s = tuple(-v for v in t)
        sv = np.array(s)
        phase = np.exp(1j * (sv @ theta @ sv))
        out[s] = c.dagger().shifted(s).scale(phase)
    return p.with_coeffs(out)


def torus_act(lam: ArrayLike, p: NcPoly) -> NcPoly:
    """Return τ(λ)(p), multiplying Φ_s by Π_j λ_j^{s_j}."""
    lam = np.asarray(lam, dtype=complex).ravel()
    if lam.shape != (p.dim,):
        raise DimensionError(f'λ must have length {p.dim}, got {lam.shape}')
    if np.any(np.abs(np.abs(lam) - 1.0) > 1.0e-12):
        raise ValueError(f'λ must have unit-modulus entries, got {lam}')
    return p.with_coeffs({
        s: c.scale(np.prod(lam ** np.array(s))) for s, c in p.coeffs.items()
    })


def fejer(p: NcPoly, n: int) -> NcPoly:
    """Return the Fejér mean of order n, supported on [-n, n]^d."""
    if n < 0:
        raise ValueError(f'Fejér order must be >= 0, got {n}')
    out = {}
    for s, c in p.coeffs.items():
        if max(abs(v) for v in s) > n:
            continue
        out[s] = c.scale(math.prod(1.0 - abs(v) / (n + 1) for v in s))
    return p.with_coeffs(out)


def check_axis(j: int, dim: int) -> None:
    if not (1 <= j <= dim):
        raise DimensionError(f'Axis {j} out of range 1..{dim}')


def derive(p: NcPoly, j: int) -> NcPoly:
    """Return ∂_j p, multiplying Φ_s by i·s_j (axes are 1-based)."""
    check_axis(j, p.dim)
    return p.with_coeffs({
        s: c.scale(1j * s[j - 1]) for s, c in p.coeffs.items() if s[j - 1] != 0
    })


def l1_norm(p: NcPoly, samples: Sequence[DisorderConfig] = ()) -> float:
    """Return Σ_s max_ω ‖Φ_s(p)(ω)‖, an upper bound of the C* norm."""
    return float(sum(c.norm(samples) for c in p.coeffs.values()))


def smooth_seminorm(
        p: NcPoly,
        n: int,
        backend: str = 'l1',
        samples: Sequence[DisorderConfig] = (),
        window=None,
) -> Seminorm:
    """Return the smooth seminorm of order n.

    ‖p‖_n = ‖p‖_0 + Σ_{k=1}^n (1/k!) Σ_{i_1..i_k} ‖∂_{i_1}···∂_{i_k} p‖_0.

    The inner sum runs over all ordered k-tuples of axes. With the
    'operator-estimate' backend, ‖·‖_0 is the largest singular value of the
    materialization on `window`, maximized over `samples`.

    """
    if n < 0:
        raise ValueError(f'Seminorm order must be >= 0, got {n}')
    if backend == 'l1':
        def norm0(q: NcPoly) -> float:
            return l1_norm(q, samples)
    elif backend == 'operator-estimate':
        if window is None:
            raise ValueError('The operator-estimate backend needs a window')
        # Import here to avoid circular import.
        from .lattice_rep import materialize
        from .lattice_rep import op_norm_estimate
        configs = list(samples)
        if not configs:
            if p.has_site_functions:
                raise ValueError('Samples are needed to estimate a site-function norm')
            configs = [None]

        def norm0(q: NcPoly) -> float:
            return max(
                op_norm_estimate(materialize(q, omega, window)) for omega in configs
            )
    else:
        raise ValueError(
            f'Unknown seminorm backend "{backend}", expected one of {SEMINORM_BACKENDS}',
        )
    value = norm0(p)
    for k in range(1, n + 1):
        total = 0.0
        for axes in product(range(1, p.dim + 1), repeat=k):
            q = p
            for j in axes:
                q = derive(q, j)
            total += norm0(q)
        value += total / math.factorial(k)
    return Seminorm(order=n, backend=backend, value=float(value))


def decay_profile(
        p: NcPoly,
        x: ArrayLike,
        samples: Sequence[DisorderConfig] = (),
) -> float:
    """Return max_s |s|^x ‖Φ_s(p)‖ with |s|^x = Π_j |s_j|^{x_j} and 0^0 = 1."""
    x = int_vector(x, p.dim, 'multi-exponent')
    if np.any(x < 0):
        raise ValueError(f'Multi-exponent must be nonnegative, got {x}')
    profile = 0.0
    for s, c in p.coeffs.items():
        weight = float(np.prod(np.abs(np.array(s)) ** x))
        if weight == 0.0:
            continue
        profile = max(profile, weight * c.norm(samples))
    return profile


def gram0(p: NcPoly) -> Coefficient:
    """Return Σ_s Φ_s Φ_s†, which equals Φ_0(pp*)."""
    return sum_coefficients(
        (c.matmul(c.dagger()) for c in p.coeffs.values()), p.orbital_dim,
    )


def trace_coefficient(p: NcPoly, samples: Sequence[DisorderConfig] = ()) -> complex:
    """Return the sample average of tr Φ_0(p)(ω)."""
    c = p.coefficient((0,) * p.dim)
    if c.is_constant:
        return complex(np.trace(c.value))
    if not samples:
        raise ValueError('Samples are needed to average a site function')
    return complex(np.mean([np.trace(c(omega)) for omega in samples]))
