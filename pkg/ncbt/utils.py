"""Console helpers and small parsers shared by all modules."""

from __future__ import annotations

from fractions import Fraction
import hashlib
from itertools import permutations
import logging
import re
import sys
from typing import Iterable, Iterator, Optional

import numpy as np
from numpy.typing import ArrayLike

from .errors import DimensionError

logger = logging.getLogger('ncbt')

FRACTION_PATTERN = re.compile(r'^\s*([+-]?\d+)\s*(?:/\s*(\d+))?\s*$')


def message(text: str) -> None:
    """Inform the user."""
    logger.info(text)


def warn(text: str) -> None:
    """Warn the user."""
    logger.warning(text)


def error(text: str) -> None:
    """Report an error to the user."""
    logger.error(text)


def debug(text: str) -> None:
    logger.debug(text)


def setup_console_logging(verbose: bool = False) -> None:
    """Send ncbt's log records to the standard error, once."""
    if not any(getattr(h, '_ncbt', False) for h in logger.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter('ncbt: %(levelname)s: %(message)s'))
        handler._ncbt = True
        logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)


def parse_fraction(text: str | int | Fraction) -> Fraction:
    """Return the exact fraction written as "p/q" or "p".

    >>> parse_fraction('1/3')
    Fraction(1, 3)
    >>> parse_fraction('-2/4')
    Fraction(-1, 2)
    >>> parse_fraction(0)
    Fraction(0, 1)

    """
    if isinstance(text, Fraction):
        return text
    if isinstance(text, bool):
        raise ValueError(f'Not a fraction: {text!r}')
    if isinstance(text, int):
        return Fraction(text)
    if not isinstance(text, str):
        raise ValueError(f'Not a fraction: {text!r}')
    match = FRACTION_PATTERN.match(text)
    if match is None:
        raise ValueError(f'Not a fraction: "{text}", expected "p/q"')
    num, den = match.groups()
    if den is not None and int(den) == 0:
        raise ValueError(f'Zero denominator in "{text}"')
    return Fraction(int(num), int(den) if den is not None else 1)


def str_to_fraction(
        text: str,
        default: Optional[Fraction] = None,
) -> Optional[Fraction]:
    """Return the parsed fraction or `default` if the text is not one."""
    try:
        return parse_fraction(text)
    except ValueError:
        return default


def int_vector(x: ArrayLike, dim: int, name: str = 'vector') -> np.ndarray:
    """Return `x` as an integer array of length `dim`."""
    arr = np.asarray(x)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape != (dim,):
        raise DimensionError(
            f'{name} must have length {dim}, got shape {arr.shape}',
        )
    if not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ValueError(f'{name} must have integer entries, got {arr}')
    return arr.astype(np.int64)


def int_key(x: ArrayLike, dim: int, name: str = 'offset') -> tuple[int, ...]:
    """Return `x` as a hashable lattice vector."""
    return tuple(int(v) for v in int_vector(x, dim, name))


def permutations_with_sign(n: int) -> Iterator[tuple[tuple[int, ...], int]]:
    """Yield all permutations of range(n) with their signature.

    >>> list(permutations_with_sign(2))
    [((0, 1), 1), ((1, 0), -1)]

    """
    for perm in permutations(range(n)):
        inversions = sum(
            1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j]
        )
        yield perm, -1 if inversions % 2 else 1


def array_digest(arrays: Iterable[np.ndarray]) -> str:
    """Return a sha256 hex digest of the arrays' contents."""
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()
