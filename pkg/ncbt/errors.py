"""Exceptions raised by ncbt.

Each exception also derives from the builtin that callers would expect
(`ValueError` for bad input, `RuntimeError` for numerical failures), so that
generic handlers keep working.

"""

from __future__ import annotations

from typing import Optional


class NcbtError(Exception):
    """Base class of all ncbt errors."""


class DimensionError(NcbtError, ValueError):
    """Mismatched lattice dimension, twist, orbital dimension or axis."""


class WindowExceededError(NcbtError, ValueError):
    """A disorder configuration was read outside of its sampled window."""

    def __init__(self, text: str, required_radius: int) -> None:
        super().__init__(text)
        self.required_radius = required_radius

    def __reduce__(self):
        return (self.__class__, (self.args[0], self.required_radius))


class CommensurabilityError(NcbtError, ValueError):
    """Flux, hopping range and window sizes are not compatible."""


class HermiticityError(NcbtError, ValueError):
    """An operator or model is not self-adjoint (or not chiral)."""

    def __init__(
            self,
            text: str,
            offset: Optional[tuple[int, ...]] = None,
    ) -> None:
        super().__init__(text)
        self.offset = offset

    def __reduce__(self):
        return (self.__class__, (self.args[0], self.offset))


class NumericalError(NcbtError, RuntimeError):
    """A numerical procedure did not produce a trustworthy result."""


class GaplessError(NumericalError):
    """The Fermi level is too close to the spectrum."""

    def __init__(
            self,
            text: str,
            sample_index: Optional[int] = None,
    ) -> None:
        self.text = text
        if sample_index is not None:
            text = f'{text} (sample {sample_index})'
        super().__init__(text)
        self.sample_index = sample_index

    def __reduce__(self):
        return (self.__class__, (self.text, self.sample_index))


class ConfigError(NcbtError, ValueError):
    """Invalid run configuration."""
