from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from ncbt.disorder import DisorderSpec
from ncbt.twist_core import TwistMatrix


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def quarter_twist() -> TwistMatrix:
    """Θ₂₁ = 2π/4."""
    return TwistMatrix.from_fluxes(2, {(2, 1): Fraction(1, 4)})


@pytest.fixture
def third_twist() -> TwistMatrix:
    """Θ₂₁ = 2π/3."""
    return TwistMatrix.from_fluxes(2, {(2, 1): Fraction(1, 3)})


@pytest.fixture
def disorder2d() -> DisorderSpec:
    return DisorderSpec(dim=2, per_site_dim=2, window_radius=16, seed=7)
