"""Non-commutative Brillouin torus: algebra, lattice models and Chern numbers."""

from .version import __version__  # noqa: F401
