"""Disorder configurations: sampling, the shift action and the hull metric.

A configuration assigns a point of [0, 1]^m to every site of Z^d. Only the
sites of the window [-R, R]^d are stored; reading outside of it raises
`WindowExceededError` with the radius that would have been needed.

"""

from __future__ import annotations

from dataclasses import dataclass
from dataclasses import replace
from functools import lru_cache
from itertools import product
from typing import TYPE_CHECKING, Optional

import numpy as np
from numpy.typing import ArrayLike

from .errors import DimensionError
from .errors import WindowExceededError
from .utils import int_key

if TYPE_CHECKING:
    # Import here to avoid circular import.
    from .twist_core import Coefficient

DISTRIBUTIONS = ('uniform', 'bernoulli')

# Number of configurations used to decide whether a site function vanishes.
PROBE_SAMPLES = 3

# Extra entropy word for probe draws, so that they never coincide with
# `sample_config(spec, index)`.
PROBE_STREAM = 0x9E3779B9


@dataclass(frozen=True)
class DisorderSpec:
    """Description of the disorder space and of how to sample it."""

    dim: int

    # Dimension m of the per-site space [0, 1]^m, 0 for clean systems.
    per_site_dim: int = 0

    # Configurations are stored on [-R, R]^d.
    window_radius: int = 0

    distribution: str = 'uniform'
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise DimensionError(f'Lattice dimension must be >= 1, got {self.dim}')
        if self.per_site_dim < 0:
            raise DimensionError(
                f'Per-site dimension must be >= 0, got {self.per_site_dim}',
            )
        if self.window_radius < 0:
            raise ValueError(
                f'Window radius must be >= 0, got {self.window_radius}',
            )
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(
                f'Unknown distribution "{self.distribution}",'
                f' expected one of {DISTRIBUTIONS}',
            )
        if not (0 <= self.seed < 2**64):
            raise ValueError(f'Seed must be a 64-bit unsigned integer, got {self.seed}')

    @classmethod
    def clean(cls, dim: int) -> DisorderSpec:
        return cls(dim=dim)

    @property
    def is_clean(self) -> bool:
        return self.per_site_dim == 0

    @property
    def window_shape(self) -> tuple[int, ...]:
        return (2 * self.window_radius + 1,) * self.dim


@dataclass(frozen=True, eq=False)
class DisorderConfig:
    """One configuration ω, possibly shifted, restricted to a window."""

    spec: DisorderSpec

    # Shape `spec.window_shape + (m,)`, value at site x stored at x + R.
    values: np.ndarray

    # Lazily applied shift: `self(x)` is the stored value at x + offset.
    offset: tuple[int, ...]

    index: int = 0

    # When set, reads wrap modulo these sizes (torus view, see `periodized`).
    periods: Optional[tuple[int, ...]] = None

    @property
    def is_clean(self) -> bool:
        return self.spec.is_clean

    def read(self, sites: ArrayLike) -> np.ndarray:
        """Return ω(x) for each row x of `sites`, shape (k, m)."""
        sites = np.asarray(sites, dtype=np.int64).reshape(-1, self.spec.dim)
        if self.is_clean:
            return np.zeros((len(sites), 0))
        pos = sites + np.asarray(self.offset, dtype=np.int64)
        if self.periods is not None:
            pos = np.mod(pos, np.asarray(self.periods, dtype=np.int64))
        radius = self.spec.window_radius
        reach = int(np.abs(pos).max()) if pos.size else 0
        if reach > radius:
            raise WindowExceededError(
                f'Disorder read at distance {reach} exceeds the window radius'
                f' {radius}',
                required_radius=reach,
            )
        return self.values[tuple((pos + radius).T)]

    def __call__(self, x: ArrayLike) -> np.ndarray:
        """Return ω(x), an array of length m."""
        return self.read([int_key(x, self.spec.dim, 'site')])[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DisorderConfig):
            return NotImplemented
        return (
            self.spec == other.spec
            and self.offset == other.offset
            and self.periods == other.periods
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def _draw(spec: DisorderSpec, entropy: list[int]) -> np.ndarray:
    shape = spec.window_shape + (spec.per_site_dim,)
    if spec.is_clean:
        return np.zeros(shape)
    # Philox is counter based: the stream only depends on the entropy words.
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
    if spec.distribution == 'bernoulli':
        values = rng.integers(0, 2, size=shape).astype(float)
    else:
        values = rng.random(shape)
    values.flags.writeable = False
    return values


def sample_config(spec: DisorderSpec, index: int) -> DisorderConfig:
    """Return the configuration number `index` of the spec's sample sequence.

    The result only depends on `(spec.seed, index)`; values are i.i.d. per
    site and per coordinate.

    """
    if index < 0:
        raise ValueError(f'Sample index must be >= 0, got {index}')
    return DisorderConfig(
        spec=spec,
        values=_draw(spec, [spec.seed, index]),
        offset=(0,) * spec.dim,
        index=index,
    )


@lru_cache(maxsize=64)
def probe_configs(spec: DisorderSpec) -> tuple[DisorderConfig, ...]:
    """Return a few fixed configurations used to probe site functions."""
    return tuple(
        DisorderConfig(
            spec=spec,
            values=_draw(spec, [spec.seed, i, PROBE_STREAM]),
            offset=(0,) * spec.dim,
            index=-(i + 1),
        )
        for i in range(PROBE_SAMPLES)
    )


def shift(omega: DisorderConfig, s: ArrayLike) -> DisorderConfig:
    """Return ϱ(s)ω, i.e. the configuration x ↦ ω(x + s)."""
    s = int_key(s, omega.spec.dim, 'shift')
    if omega.is_clean:
        # Ω is a single point.
        return omega
    offset = tuple(o + v for o, v in zip(omega.offset, s))
    if omega.periods is None:
        reach = max((abs(o) for o in offset), default=0)
        if reach > omega.spec.window_radius:
            raise WindowExceededError(
                f'Shift to offset {offset} leaves the disorder window of radius'
                f' {omega.spec.window_radius}',
                required_radius=reach,
            )
    return replace(omega, offset=offset)


def periodized(omega: DisorderConfig, sizes: ArrayLike) -> DisorderConfig:
    """Return the torus view of `omega` with periods `sizes`.

    Reads at x return the stored value at (x + offset) mod N, so that the
    fundamental domain [0, N) of the window determines the configuration.

    """
    sizes = int_key(sizes, omega.spec.dim, 'sizes')
    if any(n < 1 for n in sizes):
        raise ValueError(f'Periods must be positive, got {sizes}')
    if omega.is_clean or omega.periods == sizes:
        return omega
    required = max(sizes) - 1
    if required > omega.spec.window_radius:
        raise WindowExceededError(
            f'Periodizing with sizes {sizes} needs a disorder window radius of'
            f' at least {required}, got {omega.spec.window_radius}',
            required_radius=required,
        )
    return replace(omega, periods=sizes)


def act(s: ArrayLike, c: Coefficient) -> Coefficient:
    """Return α(s)(c), the coefficient ω ↦ c(ϱ(-s)ω)."""
    return c.shifted(s)


@lru_cache(maxsize=32)
def spiral_sites(dim: int, radius: int) -> np.ndarray:
    """Return the sites of [-r, r]^d ordered by (max-norm, lexicographic)."""
    sites = sorted(
        product(range(-radius, radius + 1), repeat=dim),
        key=lambda x: (max((abs(v) for v in x), default=0), x),
    )
    arr = np.array(sites, dtype=np.int64).reshape(-1, dim)
    arr.flags.writeable = False
    return arr


def hull_metric(
        omega1: DisorderConfig,
        omega2: DisorderConfig,
        radius: Optional[int] = None,
) -> float:
    """Return the product metric between two configurations.

    Sites of [-r, r]^d are enumerated by `spiral_sites`; the n-th site
    (n starting at 1) contributes 2^-n d/(1 + d) with d the Euclidean distance
    between the two per-site values. `radius` defaults to half the window
    radius, so that moderately shifted configurations can still be compared.

    """
    if omega1.spec != omega2.spec:
        raise DimensionError('Configurations come from different disorder specs')
    spec = omega1.spec
    if spec.is_clean:
        return 0.0
    if radius is None:
        radius = spec.window_radius // 2
    sites = spiral_sites(spec.dim, radius)
    dist = np.linalg.norm(omega1.read(sites) - omega2.read(sites), axis=1)
    weights = 0.5 ** np.arange(1, len(sites) + 1)
    return float(np.sum(weights * dist / (1.0 + dist)))
