from __future__ import annotations

from fractions import Fraction
import logging

import numpy as np
import pytest

from ncbt.errors import DimensionError
from ncbt.utils import array_digest
from ncbt.utils import int_key
from ncbt.utils import int_vector
from ncbt.utils import logger
from ncbt.utils import parse_fraction
from ncbt.utils import permutations_with_sign
from ncbt.utils import setup_console_logging
from ncbt.utils import str_to_fraction


@pytest.mark.parametrize('text, expected', [
    ('1/3', Fraction(1, 3)),
    (' -2 / 4 ', Fraction(-1, 2)),
    ('5', Fraction(5)),
    (3, Fraction(3)),
    (Fraction(2, 7), Fraction(2, 7)),
])
def test_parse_fraction(text, expected):
    assert parse_fraction(text) == expected


@pytest.mark.parametrize('text', ['1/0', 'a/b', '1.5', '', True, 0.5])
def test_parse_fraction_rejects(text):
    with pytest.raises(ValueError):
        parse_fraction(text)


def test_str_to_fraction_default():
    assert str_to_fraction('one third') is None
    assert str_to_fraction('x', Fraction(1)) == Fraction(1)
    assert str_to_fraction('2/6') == Fraction(1, 3)


def test_int_vector():
    v = int_vector([1.0, -2.0], 2)
    assert v.dtype == np.int64
    assert v.tolist() == [1, -2]
    assert int_key(3, 1) == (3,)
    with pytest.raises(ValueError):
        int_vector([0.5, 1], 2)
    with pytest.raises(DimensionError):
        int_vector([1, 2, 3], 2)


def test_permutations_with_sign():
    perms = dict(permutations_with_sign(3))
    assert len(perms) == 6
    assert sum(perms.values()) == 0
    assert perms[(0, 1, 2)] == 1
    assert perms[(1, 0, 2)] == -1
    assert perms[(1, 2, 0)] == 1
    assert list(permutations_with_sign(1)) == [((0,), 1)]


def test_array_digest():
    a = np.arange(6.0).reshape(2, 3)
    assert array_digest([a]) == array_digest([a.copy()])
    assert array_digest([a]) != array_digest([a.reshape(3, 2)])
    b = a.copy()
    b[0, 0] = 1.0e-300
    assert array_digest([a]) != array_digest([b])


def test_setup_console_logging_once():
    setup_console_logging()
    setup_console_logging(verbose=True)
    ours = [h for h in logger.handlers if getattr(h, '_ncbt', False)]
    assert len(ours) == 1
    assert logger.level == logging.DEBUG
    setup_console_logging()
    assert logger.level == logging.INFO
