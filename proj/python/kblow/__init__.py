"""Exact and numerical checks for extremal metrics on blowups.

Exact quantities come back as :class:`fractions.Fraction`; configs and reports are plain
dictionaries with the same layout as the command-line JSON files.
"""

from ._core import __version__, bs, futaki, git, gluing, moment, radial_scalar_curvature

__all__ = ["futaki", "git", "moment", "bs", "gluing", "radial_scalar_curvature", "__version__"]
