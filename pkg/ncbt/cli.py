"""Command-line front end, `ncbt spectrum|butterfly|chern|winding|verify`.

Every command writes its results and a `run.json` manifest into the output
directory. Exit codes: 0 success, 1 verification or quantization failure,
2 configuration error, 3 numerical failure.

"""

from __future__ import annotations

import argparse
import csv
from fractions import Fraction
import json
from pathlib import Path
import sys
from typing import Any, Optional, Sequence

from joblib import Parallel
from joblib import delayed
import numpy as np

from .config import RunConfig
from .config import get_jobs_from_env_or_default
from .config import load_config
from .config import model_from_section
from .config import window_from_section
from .disorder import sample_config
from .errors import CommensurabilityError
from .errors import ConfigError
from .errors import DimensionError
from .errors import GaplessError
from .errors import HermiticityError
from .errors import NumericalError
from .errors import WindowExceededError
from .invariants import MultiIndex
from .invariants import OracleResult
from .invariants import chern_even
from .invariants import chern_odd
from .invariants import chern_range
from .invariants import disorder_average
from .invariants import gap_label
from .invariants import kspace_chern_oracle
from .invariants import winding_oracle
from .lattice_rep import LatticeOperator
from .lattice_rep import Window
from .lattice_rep import check_commensurate
from .lattice_rep import materialize
from .lattice_rep import volume_trace
from .models import ModelSpec
from .models import bloch_function
from .models import build_hamiltonian
from .models import chiral_bloch_function
from .spectral import chiral_unitary
from .spectral import default_contour
from .spectral import eigen_residuals
from .spectral import eigh
from .spectral import fermi_projection
from .spectral import find_gaps
from .spectral import riesz_projection
from .utils import error
from .utils import message
from .utils import setup_console_logging
from .utils import warn
from .verify import run_suites
from .version import __version__

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

COMMANDS = ('spectrum', 'butterfly', 'chern', 'winding', 'verify')


def sample_hamiltonian(model: ModelSpec, window: Window, index: int) -> LatticeOperator:
    """Return H_ω on the window for the disorder sample number `index`."""
    omega = None if model.disorder.is_clean else sample_config(model.disorder, index)
    return materialize(build_hamiltonian(model), omega, window)


def _build(config: RunConfig, flux: Optional[str] = None) -> tuple[ModelSpec, Window]:
    model = model_from_section(config.model, config.invariant.seed, flux)
    return model, window_from_section(config.window, model)


def _spectrum_task(config: RunConfig, index: int) -> tuple[np.ndarray, np.ndarray]:
    model, window = _build(config)
    h = sample_hamiltonian(model, window, index)
    spec = eigh(h)
    return spec.eigenvalues, eigen_residuals(h, spec)


def _projection(h: LatticeOperator, e_fermi: float, config: RunConfig) -> LatticeOperator:
    spec = eigh(h)
    if config.spectral.projector == 'riesz':
        contour = default_contour(
            spec.eigenvalues,
            e_fermi,
            config.spectral.contour_points,
            config.spectral.rule,
        )
        return riesz_projection(h, contour)
    return fermi_projection(spec, e_fermi)


def _chern_task(
        config: RunConfig,
        index: int,
        e_fermi: float,
        axes: tuple[int, ...],
) -> tuple[complex, complex]:
    model, window = _build(config)
    h = sample_hamiltonian(model, window, index)
    try:
        p = _projection(h, e_fermi, config)
    except GaplessError as e:
        raise GaplessError(e.text, sample_index=index) from e
    margin = config.window.margin
    return chern_even(p, axes, margin), volume_trace(p, margin)


def _winding_task(config: RunConfig, index: int, axes: tuple[int, ...]) -> complex:
    model, window = _build(config)
    h = sample_hamiltonian(model, window, index)
    try:
        u = chiral_unitary(h, model.chiral_split)
    except GaplessError as e:
        raise GaplessError(e.text, sample_index=index) from e
    return chern_odd(u, axes, config.window.margin)


def _butterfly_task(config: RunConfig, flux: str) -> tuple[str, Any, Any]:
    model, window = _build(config, flux)
    try:
        check_commensurate(model.twist, window)
    except CommensurabilityError as e:
        return flux, None, str(e)
    h = sample_hamiltonian(model, window, 0)
    spec = eigh(h)
    return flux, spec.eigenvalues, eigen_residuals(h, spec)


def _fmt(x: float) -> str:
    return repr(float(x))


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: Path, data: Any) -> None:
    with open(path, 'w', newline='\n', encoding='utf-8') as f:
        json.dump(_jsonable(data), f, indent=2, sort_keys=True)
        f.write('\n')


def _out_dir(directory: str) -> Path:
    path = Path(directory)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f'Cannot create the output directory "{path}": {e}') from e
    return path


def _write_manifest(
        out: Path,
        command: str,
        config: Optional[RunConfig],
        jobs: int,
        outputs: Sequence[str],
        **extra,
) -> None:
    manifest = {
        'command': command,
        'config': config.to_dict() if config is not None else None,
        'seed': config.invariant.seed if config is not None else None,
        'jobs': jobs,
        'version': __version__,
        'outputs': list(outputs),
    }
    manifest.update(extra)
    _write_json(out / 'run.json', manifest)


def _run_samples(jobs: int, task, config: RunConfig, *args) -> list:
    samples = config.invariant.samples
    return Parallel(n_jobs=jobs)(
        delayed(task)(config, index, *args) for index in range(samples)
    )


def _fermi_level(config: RunConfig, jobs: int) -> float:
    """Return the configured Fermi level or the midpoint of the selected gap.

    Gaps are those of the union of the sampled spectra.

    """
    if config.spectral.fermi_level is not None:
        return config.spectral.fermi_level
    spectra = _run_samples(jobs, _spectrum_task, config)
    union = np.concatenate([values for values, _ in spectra])
    gaps = find_gaps(union, config.spectral.min_gap_width)
    index = config.spectral.gap_index
    if index >= len(gaps):
        raise GaplessError(
            f'No gap number {index} of width >= {config.spectral.min_gap_width}'
            f' in the sampled spectrum ({len(gaps)} found)',
        )
    message(f'Fermi level {gaps[index].midpoint:.6g} in gap {gaps[index]}')
    return gaps[index].midpoint


def _axes(
        config: RunConfig,
        model: ModelSpec,
        default: tuple[int, ...],
) -> tuple[int, ...]:
    axes = config.invariant.axes or default
    try:
        return MultiIndex.of(axes, model.dim).axes
    except DimensionError as e:
        raise ConfigError(f'invariant.axes: {e}') from e


def cmd_spectrum(config: RunConfig, jobs: int = 1) -> int:
    """Write the eigenvalues of every sample and the gaps of their union."""
    spectra = _run_samples(jobs, _spectrum_task, config)
    out = _out_dir(config.output.directory)
    values = np.column_stack([v for v, _ in spectra])
    residuals = np.max(np.column_stack([r for _, r in spectra]), axis=1)
    union = np.concatenate([v for v, _ in spectra])
    gaps = find_gaps(union, config.spectral.min_gap_width)
    outputs = []
    if 'csv' in config.output.formats:
        _write_csv(
            out / 'spectrum.csv',
            ['index'] + [f'e_{k}' for k in range(values.shape[1])] + ['residual'],
            [
                [str(i)] + [_fmt(v) for v in row] + [_fmt(res)]
                for i, (row, res) in enumerate(zip(values, residuals))
            ],
        )
        _write_csv(
            out / 'gaps.csv',
            ['index', 'lower', 'upper', 'width', 'midpoint'],
            [
                [str(i), _fmt(g.lower), _fmt(g.upper), _fmt(g.width), _fmt(g.midpoint)]
                for i, g in enumerate(gaps)
            ],
        )
        outputs += ['spectrum.csv', 'gaps.csv']
    if 'json' in config.output.formats:
        _write_json(out / 'spectrum.json', {
            'eigenvalues': values.T,
            'residual': residuals,
            'gaps': [
                {'lower': g.lower, 'upper': g.upper, 'width': g.width} for g in gaps
            ],
            'min_gap_width': config.spectral.min_gap_width,
        })
        outputs.append('spectrum.json')
    _write_manifest(out, 'spectrum', config, jobs, outputs)
    message(
        f'{values.shape[0]} eigenvalues x {values.shape[1]} samples,'
        f' {len(gaps)} gaps',
    )
    return EXIT_OK


def cmd_butterfly(config: RunConfig, jobs: int = 1) -> int:
    """Write the spectrum of the Hofstadter model for each flux of the sweep."""
    if config.model.kind != 'hofstadter':
        raise ConfigError(
            f'The butterfly sweep needs a hofstadter model, got "{config.model.kind}"',
        )
    fluxes = config.model.fluxes or (config.model.flux,)
    results = Parallel(n_jobs=jobs)(
        delayed(_butterfly_task)(config, flux) for flux in fluxes
    )
    out = _out_dir(config.output.directory)
    rows = []
    skipped = []
    for flux, values, extra in results:
        if values is None:
            warn(f'Skipping flux {flux}: {extra}')
            skipped.append(flux)
            continue
        for value, residual in zip(values, extra):
            rows.append([flux, _fmt(float(Fraction(flux))), _fmt(value), _fmt(residual)])
    _write_csv(
        out / 'butterfly.csv', ['flux', 'flux_value', 'eigenvalue', 'residual'], rows,
    )
    _write_manifest(out, 'butterfly', config, jobs, ['butterfly.csv'], skipped=skipped)
    message(f'{len(rows)} rows for {len(fluxes) - len(skipped)} fluxes')
    return EXIT_OK


def _chern_oracle(
        model: ModelSpec,
        axes: tuple[int, ...],
        e_fermi: float,
        grid: int,
) -> Optional[OracleResult]:
    """Return the k-space Chern number of the occupied bands, if available."""
    if model.dim != 2 or not model.is_clean or sorted(axes) != [1, 2]:
        return None
    bloch = bloch_function(model)
    energies = np.linalg.eigvalsh(bloch(np.zeros(2)))
    band_count = int(np.sum(energies < e_fermi))
    if band_count in (0, len(energies)):
        return OracleResult(0, 0.0, 0.0, grid)
    oracle = kspace_chern_oracle(bloch, band_count, grid)
    if tuple(axes) == (2, 1):
        return OracleResult(
            -oracle.value, -oracle.raw, oracle.residual, grid,
            None if oracle.refined_raw is None else -oracle.refined_raw, oracle.stable,
        )
    return oracle


def cmd_chern(config: RunConfig, jobs: int = 1) -> int:
    """Write the sample-averaged even Chern number and its cross-checks."""
    model, window = _build(config)
    axes = _axes(config, model, tuple(range(1, model.dim + 1)))
    if len(axes) % 2:
        raise ConfigError(
            f'The even Chern number needs an even number of axes, got {axes}',
        )
    e_fermi = _fermi_level(config, jobs)
    per_sample = _run_samples(jobs, _chern_task, config, e_fermi, axes)
    margin = config.window.margin
    result = disorder_average(
        [value for value, _ in per_sample], axes, model.dim, window.sizes,
        window.boundary, margin,
    )
    idos = disorder_average([trace for _, trace in per_sample])
    tol = config.invariant.tolerance
    predicted = chern_range(model.twist, axes)
    labelling = chern_range(model.twist, ())
    oracle = _chern_oracle(model, axes, e_fermi, config.invariant.oracle_grid)
    quantized = (
        result.is_quantized(tol)
        and result.imag_residual <= config.invariant.imag_tolerance
    )
    matches = None if oracle is None else result.nearest_integer == oracle.value
    passed = quantized and matches is not False
    out = _out_dir(config.output.directory)
    outputs = ['chern.json']
    _write_json(out / 'chern.json', {
        'model': model.name,
        'e_fermi': e_fermi,
        'projector': config.spectral.projector,
        'chern': result.to_dict(),
        'tolerance': tol,
        'imag_tolerance': config.invariant.imag_tolerance,
        'range': {
            'offsets': predicted.offsets,
            'label': predicted.label(result.value, tol),
        },
        'idos': {
            'value': idos.value,
            'stderr': idos.stderr,
            'offsets': labelling.offsets,
            'label': gap_label(idos.value, labelling.offsets),
        },
        'oracle': None if oracle is None else {
            'value': oracle.value,
            'raw': oracle.raw,
            'refined_raw': oracle.refined_raw,
            'residual': oracle.residual,
            'grid': oracle.grid,
            'stable': oracle.stable,
        },
        'quantized': quantized,
        'matches_oracle': matches,
        'passed': passed,
    })
    if 'csv' in config.output.formats:
        _write_csv(
            out / 'chern.csv',
            ['sample', 'chern_real', 'chern_imag', 'idos'],
            [
                [str(i), _fmt(z.real), _fmt(z.imag), _fmt(t.real)]
                for i, (z, t) in enumerate(per_sample)
            ],
        )
        outputs.append('chern.csv')
    _write_manifest(out, 'chern', config, jobs, outputs)
    message(
        f'Chern number {result.value:.6f} ± {result.stderr:.2e}'
        f' (nearest integer {result.nearest_integer})',
    )
    if not passed:
        error('The Chern number is not quantized or disagrees with the k-space oracle')
        return EXIT_FAILED
    return EXIT_OK


def cmd_winding(config: RunConfig, jobs: int = 1) -> int:
    """Write the sample-averaged odd Chern number of a chiral model."""
    model, window = _build(config)
    if not model.is_chiral:
        raise ConfigError(f'Model "{model.name}" has no chiral split')
    axes = _axes(config, model, (1,))
    if len(axes) % 2 == 0:
        raise ConfigError(f'The odd Chern number needs an odd number of axes, got {axes}')
    per_sample = _run_samples(jobs, _winding_task, config, axes)
    result = disorder_average(
        per_sample, axes, model.dim, window.sizes, window.boundary, config.window.margin,
    )
    oracle = None
    if model.dim == 1 and model.is_clean:
        oracle = winding_oracle(
            chiral_bloch_function(model), config.invariant.winding_grid,
        )
    tol = config.invariant.tolerance
    quantized = (
        result.is_quantized(tol)
        and result.imag_residual <= config.invariant.imag_tolerance
    )
    matches = None if oracle is None else result.nearest_integer == oracle.value
    passed = quantized and matches is not False
    out = _out_dir(config.output.directory)
    outputs = ['winding.json']
    _write_json(out / 'winding.json', {
        'model': model.name,
        'chern': result.to_dict(),
        'tolerance': tol,
        'imag_tolerance': config.invariant.imag_tolerance,
        'oracle': None if oracle is None else {
            'value': oracle.value,
            'raw': oracle.raw,
            'refined_raw': oracle.refined_raw,
            'residual': oracle.residual,
            'grid': oracle.grid,
            'stable': oracle.stable,
        },
        'quantized': quantized,
        'matches_oracle': matches,
        'passed': passed,
    })
    if 'csv' in config.output.formats:
        _write_csv(
            out / 'winding.csv',
            ['sample', 'chern_real', 'chern_imag'],
            [[str(i), _fmt(z.real), _fmt(z.imag)] for i, z in enumerate(per_sample)],
        )
        outputs.append('winding.csv')
    _write_manifest(out, 'winding', config, jobs, outputs)
    message(
        f'Winding number {result.value:.6f} ± {result.stderr:.2e}'
        f' (nearest integer {result.nearest_integer})',
    )
    if not passed:
        error('The winding number is not quantized or disagrees with the oracle')
        return EXIT_FAILED
    return EXIT_OK


def cmd_verify(
        quick: bool = False,
        jobs: int = 1,
        directory: Optional[str] = None,
) -> int:
    """Run the self-check suites and print the report on the standard output."""
    report = run_suites(quick=quick, jobs=jobs)
    sys.stdout.write(report.render())
    if directory is not None:
        out = _out_dir(directory)
        _write_json(out / 'verify.json', report.to_dict())
        _write_manifest(out, 'verify', None, jobs, ['verify.json'], quick=quick)
    return EXIT_OK if report.passed else EXIT_FAILED


COMMAND_FUNCTIONS = {
    'spectrum': cmd_spectrum,
    'butterfly': cmd_butterfly,
    'chern': cmd_chern,
    'winding': cmd_winding,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '--jobs', type=int, default=None,
        help='number of parallel jobs (default: $NCBT_JOBS or 1)',
    )
    common.add_argument(
        '--seed', type=int, default=None, help='override [invariant].seed',
    )
    common.add_argument('--out', default=None, help='override [output].directory')
    common.add_argument('--verbose', action='store_true', help='print debug messages')

    parser = argparse.ArgumentParser(
        prog='ncbt',
        description=(
            'Spectra and Chern invariants of magnetic and disordered lattice models.'
        ),
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    subparsers = parser.add_subparsers(dest='command', required=True)
    helps = {
        'spectrum': 'eigenvalues per disorder sample and spectral gaps',
        'butterfly': 'Hofstadter spectrum over a sweep of fluxes',
        'chern': 'even Chern number of the Fermi projection',
        'winding': 'odd Chern number of a chiral model',
    }
    for name, text in helps.items():
        sub = subparsers.add_parser(name, parents=[common], help=text)
        sub.add_argument('--config', required=True, help='TOML or JSON run configuration')
    sub = subparsers.add_parser(
        'verify', parents=[common], help='run the self-check suites',
    )
    sub.add_argument('--quick', action='store_true', help='run the reduced-size suites')
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_console_logging(args.verbose)
    try:
        jobs = args.jobs if args.jobs is not None else get_jobs_from_env_or_default()
        if jobs == 0:
            raise ConfigError('--jobs must not be 0')
        if args.command == 'verify':
            return cmd_verify(args.quick, jobs, args.out)
        config = load_config(args.config).with_overrides(args.seed, args.out)
        return COMMAND_FUNCTIONS[args.command](config, jobs)
    except (ConfigError, DimensionError) as e:
        error(str(e))
        return EXIT_CONFIG
    except (
            NumericalError,
            HermiticityError,
            CommensurabilityError,
            WindowExceededError,
    ) as e:
        error(str(e))
        return EXIT_NUMERIC
    except ValueError as e:
        error(str(e))
        return EXIT_CONFIG


if __name__ == '__main__':
    sys.exit(main())
