"""Numerical toolkit for five one-parameter families of genus-3 triply
periodic minimal surfaces: lattice shape curves, Jacobi spectra on the
branched double cover of the sphere, period lattices and surface patches."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .families import FamilyId, SurfaceSpec  # noqa: F401
