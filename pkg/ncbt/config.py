"""Run configuration: TOML (or JSON mirror) files into frozen sections.

A configuration has the sections `[model]`, `[window]`, `[spectral]`,
`[invariant]` and `[output]`, all optional except `[model]`. Unknown
sections and keys are rejected. Fluxes are strings "p/q" meaning 2πp/q.

"""

from __future__ import annotations

from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from fractions import Fraction
import json
import os
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11.
    import tomli as tomllib

from .disorder import DISTRIBUTIONS
from .disorder import DisorderSpec
from .errors import ConfigError
from .errors import DimensionError
from .errors import NcbtError
from .lattice_rep import BOUNDARIES
from .lattice_rep import OPEN
from .lattice_rep import Window
from .models import DEFAULT_WINDOW_RADIUS
from .models import ModelSpec
from .models import SiteTerm
from .models import from_hoppings
from .models import hofstadter
from .models import qwz
from .models import ssh
from .spectral import RULES
from .twist_core import Coefficient
from .twist_core import TwistMatrix
from .utils import parse_fraction

MODEL_KINDS = ('hofstadter', 'ssh', 'qwz', 'hoppings')
PROJECTORS = ('eigh', 'riesz')
FORMATS = ('csv', 'json')

JOBS_VARIABLE = 'NCBT_JOBS'

# Typing hints.
Table = Mapping[str, Any]


def get_param(
        section: Table,
        param: str,
        default=None,
        _type=None,
        where: str = '',
) -> Any:
    """Return a parameter with type checking and default."""
    type_map = {
        'Integer': int,
        'Float': float,
        'Boolean': bool,
        'String': str,
        'List': list,
        'Table': dict,
        int: int,
        float: float,
        bool: bool,
        str: str,
        list: list,
        dict: dict,
    }

    if (_type is not None) and (_type not in type_map):
        raise ValueError('Unknown type')

    if param not in section:
        return default

    value = section[param]
    if _type is None:
        return value
    expected = type_map[_type]
    name = f'{where}.{param}' if where else param
    if expected is float and isinstance(value, str):
        # Decimal strings are accepted for floats.
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f'Parameter "{name}" is not a number: "{value}"')
    if expected is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if expected is int and isinstance(value, bool):
        raise ConfigError(f'Parameter "{name}" found with wrong type: bool')
    if expected is list and isinstance(value, tuple):
        return list(value)
    if not isinstance(value, expected):
        raise ConfigError(
            f'Parameter "{name}" found with wrong type: {type(value).__name__},'
            f' expected {expected.__name__}',
        )
    return value


def _check_keys(section: Table, allowed: tuple[str, ...], where: str) -> None:
    if not isinstance(section, Mapping):
        raise ConfigError(f'Section "{where}" must be a table')
    for key in section:
        if key not in allowed:
            raise ConfigError(
                f'Unknown key "{key}" in [{where}], expected one of {allowed}',
            )


def _fraction(text: Any, where: str) -> Fraction:
    try:
        return parse_fraction(text)
    except ValueError as e:
        raise ConfigError(f'{where}: {e}') from e


def _int_list(values: list, where: str) -> tuple[int, ...]:
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in values):
        raise ConfigError(f'Parameter "{where}" must be a list of integers')
    return tuple(values)


@dataclass(frozen=True)
class TwistEntry:
    """Θ_{row,col} = 2π·flux, 1-based with row > col."""

    row: int
    col: int
    flux: str


@dataclass(frozen=True)
class HoppingEntry:
    """W_y = real + i·imag, an n×n matrix or a scalar."""

    offset: tuple[int, ...]
    real: Any = 0.0
    imag: Any = 0.0

    def matrix(self, orbital_dim: int) -> np.ndarray:
        try:
            real = np.asarray(self.real, dtype=float)
            imag = np.asarray(self.imag, dtype=float)
            value = real + 1j * imag
        except (TypeError, ValueError) as e:
            raise ConfigError(f'Hopping {self.offset}: {e}') from e
        if value.ndim == 0:
            return value * np.eye(orbital_dim)
        if value.shape != (orbital_dim, orbital_dim):
            raise ConfigError(
                f'Hopping {self.offset} has shape {value.shape}, expected'
                f' ({orbital_dim}, {orbital_dim})',
            )
        return value


@dataclass(frozen=True)
class ModelSection:
    kind: str = 'hofstadter'
    flux: str = '0/1'
    fluxes: tuple[str, ...] = ()
    disorder: float = 0.0
    t_intra: float = 0.5
    t_inter: float = 1.0
    mass: float = 1.0
    dim: int = 2
    orbital_dim: int = 1
    twist: tuple[TwistEntry, ...] = ()
    hoppings: tuple[HoppingEntry, ...] = ()
    chiral_split: Optional[tuple[int, int]] = None
    window_radius: int = DEFAULT_WINDOW_RADIUS
    distribution: str = 'uniform'


@dataclass(frozen=True)
class WindowSection:
    sizes: tuple[int, ...] = ()
    boundary: str = 'periodic'
    margin: int = 0


@dataclass(frozen=True)
class SpectralSection:
    fermi_level: Optional[float] = None
    gap_index: int = 0
    min_gap_width: float = 0.5
    contour_points: int = 64
    projector: str = 'eigh'
    rule: str = 'gauss'


@dataclass(frozen=True)
class InvariantSection:
    axes: tuple[int, ...] = ()
    samples: int = 8
    seed: int = 0
    oracle_grid: int = 64
    winding_grid: int = 256
    tolerance: float = 5.0e-2
    imag_tolerance: float = 1.0e-6


@dataclass(frozen=True)
class OutputSection:
    directory: str = 'ncbt-out'
    formats: tuple[str, ...] = FORMATS


@dataclass(frozen=True)
class RunConfig:
    model: ModelSection
    window: WindowSection = field(default_factory=WindowSection)
    spectral: SpectralSection = field(default_factory=SpectralSection)
    invariant: InvariantSection = field(default_factory=InvariantSection)
    output: OutputSection = field(default_factory=OutputSection)
    source: str = ''

    def with_overrides(
            self,
            seed: Optional[int] = None,
            directory: Optional[str] = None,
    ) -> RunConfig:
        """Return the configuration with command-line overrides applied."""
        config = self
        if seed is not None:
            config = replace(config, invariant=replace(config.invariant, seed=seed))
        if directory is not None:
            config = replace(config, output=replace(config.output, directory=directory))
        return config

    def to_dict(self) -> dict:
        return asdict(self)


def _model_section(table: Table) -> ModelSection:
    where = 'model'
    _check_keys(table, tuple(ModelSection.__dataclass_fields__), where)
    defaults = ModelSection()
    kind = get_param(table, 'kind', defaults.kind, str, where)
    if kind not in MODEL_KINDS:
        raise ConfigError(f'Unknown model kind "{kind}", expected one of {MODEL_KINDS}')
    flux = str(_fraction(get_param(table, 'flux', defaults.flux), 'model.flux'))
    fluxes = tuple(
        str(_fraction(f, 'model.fluxes'))
        for f in get_param(table, 'fluxes', [], list, where)
    )
    twist = []
    for entry in get_param(table, 'twist', [], list, where):
        _check_keys(entry, ('row', 'col', 'flux'), 'model.twist')
        twist.append(TwistEntry(
            row=get_param(entry, 'row', 0, int, 'model.twist'),
            col=get_param(entry, 'col', 0, int, 'model.twist'),
            flux=str(_fraction(get_param(entry, 'flux', '0'), 'model.twist.flux')),
        ))
    hoppings = []
    for entry in get_param(table, 'hoppings', [], list, where):
        _check_keys(entry, ('offset', 'real', 'imag'), 'model.hoppings')
        if 'offset' not in entry:
            raise ConfigError('Hopping entry without "offset"')
        hoppings.append(HoppingEntry(
            offset=_int_list(
                get_param(entry, 'offset', _type=list), 'model.hoppings.offset',
            ),
            real=entry.get('real', 0.0),
            imag=entry.get('imag', 0.0),
        ))
    split = get_param(table, 'chiral_split', None, list, where)
    if split is not None:
        split = _int_list(split, 'model.chiral_split')
        if len(split) != 2:
            raise ConfigError(f'model.chiral_split must have 2 entries, got {split}')
    distribution = get_param(table, 'distribution', defaults.distribution, str, where)
    if distribution not in DISTRIBUTIONS:
        raise ConfigError(
            f'Unknown distribution "{distribution}", expected one of {DISTRIBUTIONS}',
        )
    section = ModelSection(
        kind=kind,
        flux=flux,
        fluxes=fluxes,
        disorder=get_param(table, 'disorder', defaults.disorder, float, where),
        t_intra=get_param(table, 't_intra', defaults.t_intra, float, where),
        t_inter=get_param(table, 't_inter', defaults.t_inter, float, where),
        mass=get_param(table, 'mass', defaults.mass, float, where),
        dim=get_param(table, 'dim', defaults.dim, int, where),
        orbital_dim=get_param(table, 'orbital_dim', defaults.orbital_dim, int, where),
        twist=tuple(twist),
        hoppings=tuple(hoppings),
        chiral_split=split,
        window_radius=get_param(
            table, 'window_radius', defaults.window_radius, int, where,
        ),
        distribution=distribution,
    )
    if section.disorder < 0.0:
        raise ConfigError(f'model.disorder must be >= 0, got {section.disorder}')
    if kind == 'hoppings' and not hoppings:
        raise ConfigError('Model kind "hoppings" needs [[model.hoppings]] entries')
    return section


def _window_section(table: Table) -> WindowSection:
    where = 'window'
    _check_keys(table, tuple(WindowSection.__dataclass_fields__), where)
    sizes = _int_list(get_param(table, 'sizes', [], list, where), 'window.sizes')
    if any(n < 1 for n in sizes):
        raise ConfigError(f'window.sizes must be positive, got {sizes}')
    boundary = get_param(table, 'boundary', 'periodic', str, where)
    if boundary not in BOUNDARIES:
        raise ConfigError(f'Unknown boundary "{boundary}", expected one of {BOUNDARIES}')
    margin = get_param(table, 'margin', 0, int, where)
    if margin < 0:
        raise ConfigError(f'window.margin must be >= 0, got {margin}')
    return WindowSection(sizes, boundary, margin)


def _spectral_section(table: Table) -> SpectralSection:
    where = 'spectral'
    _check_keys(table, tuple(SpectralSection.__dataclass_fields__), where)
    defaults = SpectralSection()
    section = SpectralSection(
        fermi_level=get_param(table, 'fermi_level', None, float, where),
        gap_index=get_param(table, 'gap_index', defaults.gap_index, int, where),
        min_gap_width=get_param(
            table, 'min_gap_width', defaults.min_gap_width, float, where,
        ),
        contour_points=get_param(
            table, 'contour_points', defaults.contour_points, int, where,
        ),
        projector=get_param(table, 'projector', defaults.projector, str, where),
        rule=get_param(table, 'rule', defaults.rule, str, where),
    )
    if section.projector not in PROJECTORS:
        raise ConfigError(
            f'Unknown projector "{section.projector}", expected one of {PROJECTORS}',
        )
    if section.rule not in RULES:
        raise ConfigError(f'Unknown rule "{section.rule}", expected one of {RULES}')
    if section.min_gap_width <= 0.0:
        raise ConfigError('spectral.min_gap_width must be > 0')
    if section.contour_points < 1:
        raise ConfigError('spectral.contour_points must be >= 1')
    if section.gap_index < 0:
        raise ConfigError('spectral.gap_index must be >= 0')
    return section


def _invariant_section(table: Table) -> InvariantSection:
    where = 'invariant'
    _check_keys(table, tuple(InvariantSection.__dataclass_fields__), where)
    defaults = InvariantSection()
    section = InvariantSection(
        axes=_int_list(get_param(table, 'axes', [], list, where), 'invariant.axes'),
        samples=get_param(table, 'samples', defaults.samples, int, where),
        seed=get_param(table, 'seed', defaults.seed, int, where),
        oracle_grid=get_param(table, 'oracle_grid', defaults.oracle_grid, int, where),
        winding_grid=get_param(
            table, 'winding_grid', defaults.winding_grid, int, where,
        ),
        tolerance=get_param(table, 'tolerance', defaults.tolerance, float, where),
        imag_tolerance=get_param(
            table, 'imag_tolerance', defaults.imag_tolerance, float, where,
        ),
    )
    if section.samples < 1:
        raise ConfigError(f'invariant.samples must be >= 1, got {section.samples}')
    if section.seed < 0:
        raise ConfigError(f'invariant.seed must be >= 0, got {section.seed}')
    if min(section.oracle_grid, section.winding_grid) < 4:
        raise ConfigError('Oracle grids need at least 4 points')
    return section


def _output_section(table: Table) -> OutputSection:
    where = 'output'
    _check_keys(table, tuple(OutputSection.__dataclass_fields__), where)
    formats = tuple(get_param(table, 'formats', list(FORMATS), list, where))
    for f in formats:
        if f not in FORMATS:
            raise ConfigError(f'Unknown output format "{f}", expected one of {FORMATS}')
    return OutputSection(
        directory=get_param(table, 'directory', OutputSection.directory, str, where),
        formats=formats,
    )


def parse_config(data: Table, source: str = '') -> RunConfig:
    """Return the validated configuration of a parsed TOML/JSON document."""
    sections = ('model', 'window', 'spectral', 'invariant', 'output')
    _check_keys(data, sections, 'top level')
    if 'model' not in data:
        raise ConfigError('Missing [model] section')
    return RunConfig(
        model=_model_section(data['model']),
        window=_window_section(data.get('window', {})),
        spectral=_spectral_section(data.get('spectral', {})),
        invariant=_invariant_section(data.get('invariant', {})),
        output=_output_section(data.get('output', {})),
        source=source,
    )


def load_config(path: str | os.PathLike) -> RunConfig:
    """Return the configuration stored in a .toml or .json file."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in ('.toml', '.json'):
        raise ConfigError(f'Unsupported configuration format "{suffix}" ({path})')
    try:
        if suffix == '.toml':
            with open(path, 'rb') as f:
                data = tomllib.load(f)
        else:
            with open(path, encoding='utf-8') as f:
                data = json.load(f)
    except OSError as e:
        raise ConfigError(f'Cannot read configuration "{path}": {e}') from e
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f'Cannot parse configuration "{path}": {e}') from e
    return parse_config(data, str(path))


def get_jobs_from_env_or_default(default: int = 1) -> int:
    """Return the job count from `NCBT_JOBS` if defined, else `default`."""
    text = os.environ.get(JOBS_VARIABLE)
    if text is None or not text.strip():
        return default
    try:
        jobs = int(text)
    except ValueError:
        raise ConfigError(f'{JOBS_VARIABLE} must be an integer, got "{text}"')
    if jobs == 0:
        raise ConfigError(f'{JOBS_VARIABLE} must not be 0')
    return jobs


def twist_from_section(section: ModelSection) -> TwistMatrix:
    fluxes = {}
    for entry in section.twist:
        key = (entry.row, entry.col)
        if key in fluxes:
            raise ConfigError(f'Twist entry {key} is listed twice')
        fluxes[key] = parse_fraction(entry.flux)
    try:
        return TwistMatrix.from_fluxes(section.dim, fluxes)
    except ValueError as e:
        raise ConfigError(f'model.twist: {e}') from e


def model_from_section(
        section: ModelSection,
        seed: int = 0,
        flux: Optional[str] = None,
) -> ModelSpec:
    """Return the model described by a [model] section.

    `flux` replaces `section.flux` for Hofstadter models (butterfly sweeps).

    """
    kwargs = dict(
        seed=seed,
        window_radius=section.window_radius,
        distribution=section.distribution,
    )
    try:
        if section.kind == 'hofstadter':
            f = parse_fraction(flux if flux is not None else section.flux)
            return hofstadter(f.numerator, f.denominator, section.disorder, **kwargs)
        if section.kind == 'ssh':
            return ssh(section.t_intra, section.t_inter, section.disorder, **kwargs)
        if section.kind == 'qwz':
            return qwz(section.mass, section.disorder, **kwargs)
        return _hoppings_model(section, seed)
    except NcbtError as e:
        if isinstance(e, DimensionError):
            raise ConfigError(str(e)) from e
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _hoppings_model(section: ModelSection, seed: int) -> ModelSpec:
    """Return a model from explicit hoppings.

    A positive `disorder` adds the on-site term strength·(2ω(0) - 1)·1.

    """
    dim = section.dim
    n = section.orbital_dim
    pairs: list[tuple[tuple[int, ...], object]] = [
        (h.offset, h.matrix(n)) for h in section.hoppings
    ]
    if section.disorder > 0.0:
        disorder = DisorderSpec(
            dim, 1, section.window_radius, section.distribution, seed,
        )
        term = Coefficient.site_function(
            SiteTerm(np.eye(n), strength=section.disorder), n,
        )
        merged = []
        onsite = (0,) * dim
        for y, w in pairs:
            if tuple(y) == onsite:
                term = Coefficient.constant(w).add(term)
            else:
                merged.append((y, w))
        pairs = merged + [(onsite, term)]
    else:
        disorder = DisorderSpec.clean(dim)
    return from_hoppings(
        dim, n, twist_from_section(section), pairs, disorder,
        chiral_split=section.chiral_split, name='hoppings',
    )


def window_from_section(section: WindowSection, model: ModelSpec) -> Window:
    """Return the lattice window, 12 sites per axis by default."""
    sizes = section.sizes or (12,) * model.dim
    if len(sizes) != model.dim:
        raise ConfigError(
            f'window.sizes has {len(sizes)} entries, model dimension is {model.dim}',
        )
    if section.boundary == OPEN and any(n < 2 * section.margin + 1 for n in sizes):
        raise ConfigError(
            f'window.margin = {section.margin} leaves no interior site in a window'
            f' of sizes {tuple(sizes)}',
        )
    return Window(tuple(sizes), section.boundary, model.orbital_dim)
