"""Weierstrass data of the five genus-3 families and the associate family of
the P surface.

Every surface is the real part of the integral of

    prefactor * (1 - z**2, i(1 + z**2), 2z) dz / w,        w**2 = p(z),

on the hyperelliptic curve defined by ``p``. The prefactor is ``i`` for the
H-family and ``exp(i*theta)`` otherwise (theta = 0 for tP, rPD, tCLP and
pi/2 for tD). The induced metric ``(1 + |z|^2)^2 / |w|^2 |dz|^2`` and the
Jacobi operator do not depend on the prefactor.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DomainError, PathTooCloseToBranchPoint, RootFindingFailure, WAtZero

__all__ = [
    "FamilyId",
    "SurfaceSpec",
    "CoverPoint",
    "BranchData",
    "GYROID_A",
    "GYROID_THETA_REFERENCE",
    "FAMILY_NAMES",
    "defining_polynomial",
    "branch_points",
    "continue_sqrt",
    "weierstrass_integrand",
    "weierstrass_form",
    "weierstrass_integrand_inverted",
    "inverted_polynomial",
    "gauss_map",
    "conformal_factor",
    "spherical_potential",
    "surface_area_density",
    "stereographic",
    "inverse_stereographic",
    "default_clearance",
]


class FamilyId(str, Enum):
    H = "H"
    rPD = "rPD"
    tP = "tP"
    tD = "tD"
    tCLP = "tCLP"

    def __str__(self):
        return self.value


_DOMAINS = {
    FamilyId.H: (0.0, 1.0),
    FamilyId.rPD: (0.0, math.inf),
    FamilyId.tP: (2.0, math.inf),
    FamilyId.tD: (2.0, math.inf),
    FamilyId.tCLP: (-2.0, 2.0),
}

_DEFAULT_THETA = {
    FamilyId.H: 0.0,
    FamilyId.rPD: 0.0,
    FamilyId.tP: 0.0,
    FamilyId.tD: math.pi / 2,
    FamilyId.tCLP: 0.0,
}

# The gyroid lives on the tP curve at a = 14 with an interior associate angle.
GYROID_A = 14.0
GYROID_THETA_REFERENCE = 0.907313

FAMILY_NAMES = ("H", "rPD", "tP", "tD", "tCLP", "gyroid")


def family_domain(family: FamilyId) -> tuple[float, float]:
    return _DOMAINS[FamilyId(family)]


@dataclass(frozen=True)
class SurfaceSpec:
    """Family, parameter ``a`` and associate angle ``theta`` (radians).

    ``theta`` defaults to the family's own angle. Only the tP/tD curve accepts
    an explicit angle, which is how the associate family (and the gyroid) is
    explored.
    """

    family: FamilyId
    a: float
    theta: float | None = field(default=None)

    def __post_init__(self):
        family = FamilyId(self.family)
        object.__setattr__(self, "family", family)
        a = float(self.a)
        object.__setattr__(self, "a", a)
        lo, hi = _DOMAINS[family]
        if not (lo < a < hi):
            raise DomainError(f"{family.value}: parameter a={a} outside ({lo}, {hi})")
        if self.theta is None:
            object.__setattr__(self, "theta", _DEFAULT_THETA[family])
        else:
            theta = float(self.theta)
            if not (0.0 <= theta <= math.pi / 2):
                raise DomainError(f"theta={theta} outside [0, pi/2]")
            if theta != _DEFAULT_THETA[family] and family not in (FamilyId.tP, FamilyId.tD):
                raise DomainError(f"{family.value} has a fixed associate angle")
            object.__setattr__(self, "theta", theta)

    @classmethod
    def gyroid(cls, theta: float = GYROID_THETA_REFERENCE) -> "SurfaceSpec":
        return cls(FamilyId.tP, GYROID_A, theta)

    @classmethod
    def from_name(cls, name: str, a: float | None = None, theta: float | None = None) -> "SurfaceSpec":
        """Build a spec from a catalog name, including the ``gyroid`` alias."""
        if name == "gyroid":
            if a is not None and float(a) != GYROID_A:
                raise DomainError("the gyroid lives on the curve a = 14")
            return cls.gyroid(GYROID_THETA_REFERENCE if theta is None else theta)
        try:
            family = FamilyId(name)
        except ValueError:
            raise DomainError(f"unknown family {name!r}; expected one of {FAMILY_NAMES}") from None
        if a is None:
            raise DomainError(f"{name} needs a parameter value")
        return cls(family, a, theta)

    @property
    def prefactor(self) -> complex:
        eps = 1j if self.family is FamilyId.H else 1.0
        return eps * cmath.exp(1j * self.theta)

    @property
    def curve_key(self) -> tuple:
        """Identifies the underlying curve; tP, tD and tCLP share ``w^2 = z^8 + a z^4 + 1``."""
        if self.family in (FamilyId.tP, FamilyId.tD, FamilyId.tCLP):
            return ("z8+az4+1", self.a)
        return (self.family.value, self.a)


@dataclass(frozen=True)
class CoverPoint:
    """A point ``(z, w)`` of the curve; ``sheet`` selects ``w = sheet * sqrt(p(z))``
    with the principal square root."""

    z: complex
    sheet: int = 1

    def __post_init__(self):
        if self.sheet not in (1, -1):
            raise DomainError("sheet must be +1 or -1")

    def w(self, spec: SurfaceSpec) -> complex:
        return self.sheet * cmath.sqrt(complex(np.polyval(defining_polynomial(spec), self.z)))


@dataclass(frozen=True)
class BranchData:
    finite_points: tuple
    branched_at_infinity: bool
    leading_coefficient: complex = 1.0

    def __post_init__(self):
        n = len(self.finite_points) + (1 if self.branched_at_infinity else 0)
        if n != 8:
            raise RootFindingFailure(f"expected 8 branch points for genus 3, got {n}")

    @property
    def count(self) -> int:
        return 8

    def min_distance(self) -> float:
        pts = np.asarray(self.finite_points, dtype=complex)
        d = np.abs(pts[:, None] - pts[None, :])
        d[np.diag_indices(len(pts))] = np.inf
        return float(d.min())

    def sphere_points(self) -> np.ndarray:
        """Branch points as unit vectors; infinity maps to the north pole."""
        pts = [stereographic(b) for b in self.finite_points]
        if self.branched_at_infinity:
            pts.append(np.array([0.0, 0.0, 1.0]))
        return np.array(pts)


def defining_polynomial(spec: SurfaceSpec) -> np.ndarray:
    """Coefficients of ``p`` (highest degree first) with ``w**2 = p(z)``."""
    a = spec.a
    if spec.family is FamilyId.H:
        # z (z^3 - a^3)(z^3 - a^-3)
        c = [1, 0, 0, -(a**3 + a**-3), 0, 0, 1, 0]
    elif spec.family is FamilyId.rPD:
        # z (z^3 - a^3)(z^3 + a^-3)
        c = [1, 0, 0, a**-3 - a**3, 0, 0, -1, 0]
    else:
        c = [1, 0, 0, 0, a, 0, 0, 0, 1]
    return np.array(c, dtype=complex)


def inverted_polynomial(spec: SurfaceSpec) -> np.ndarray:
    """Coefficients of ``zeta**8 * p(1/zeta)``, the curve in the chart at infinity."""
    c = defining_polynomial(spec)
    padded = np.concatenate([np.zeros(9 - len(c), dtype=complex), c])
    return padded[::-1]


def _polish(coeffs, roots, iterations=3):
    dcoeffs = np.polyder(coeffs)
    for _ in range(iterations):
        d = np.polyval(dcoeffs, roots)
        step = np.where(d != 0, np.polyval(coeffs, roots) / np.where(d != 0, d, 1), 0)
        roots = roots - step
    return roots


def branch_points(spec: SurfaceSpec) -> BranchData:
    """Zeros of the defining polynomial, plus infinity when the degree is 7.

    Roots are Newton-polished and ordered by argument then modulus.
    """
    coeffs = defining_polynomial(spec)
    roots = _polish(coeffs, np.roots(coeffs))
    roots = np.where(np.abs(roots) < 1e-15, 0.0, roots)
    scale = max(1.0, float(np.max(np.abs(roots))))
    resid = np.abs(np.polyval(coeffs, roots)) / np.polyval(np.abs(coeffs), np.maximum(np.abs(roots), 1.0))
    if np.any(resid > 1e-12):
        raise RootFindingFailure(f"root residual {resid.max():.3e} above 1e-12")
    angle = np.mod(np.angle(roots), 2 * np.pi)
    angle = np.where(np.abs(roots) == 0, 0.0, angle)
    order = np.lexsort((np.abs(roots), np.round(angle, 10)))
    roots = tuple(complex(r) for r in roots[order])
    data = BranchData(roots, branched_at_infinity=(len(coeffs) == 8),
                      leading_coefficient=complex(coeffs[0]))
    if data.min_distance() < 1e-8 * scale:
        raise RootFindingFailure("branch points are not distinct")
    return data


def default_clearance(spec: SurfaceSpec) -> float:
    return 1e-3 * branch_points(spec).min_distance()


def _segment_distance(z0, z1, pts):
    d = z1 - z0
    L2 = abs(d) ** 2
    if L2 == 0:
        return np.abs(pts - z0)
    t = np.clip(((pts - z0) * np.conj(d)).real / L2, 0.0, 1.0)
    return np.abs(z0 + t * d - pts)


def continue_sqrt(spec: SurfaceSpec, path, w_start: complex, clearance: float | None = None) -> complex:
    """Analytically continue ``w = sqrt(p(z))`` along a chart polyline.

    Steps are kept below a fifth of the distance to the nearest branch point
    and the sign at each step is the one closest to the previous value.
    """
    coeffs = defining_polynomial(spec)
    bp = np.asarray(branch_points(spec).finite_points, dtype=complex)
    if clearance is None:
        clearance = default_clearance(spec)
    path = [complex(z) for z in path]
    if not path:
        raise DomainError("empty path")
    p0 = complex(np.polyval(coeffs, path[0]))
    w = complex(w_start)
    if abs(w * w - p0) > 1e-8 * max(1.0, abs(p0)):
        raise DomainError("w_start**2 does not match p(path start)")
    for z0, z1 in zip(path[:-1], path[1:]):
        if np.any(_segment_distance(z0, z1, bp) < clearance):
            raise PathTooCloseToBranchPoint(f"segment {z0} -> {z1} within {clearance:g} of a branch point")
        w = _continue_segment(coeffs, bp, z0, z1, w)
    return w


def _continue_segment(coeffs, bp, z0, z1, w):
    length = abs(z1 - z0)
    s = 0.0
    while s < length:
        z = z0 + (z1 - z0) * (s / length)
        step = min(length - s, 0.2 * float(np.min(np.abs(bp - z))))
        s = length if length - s <= step else s + step
        zn = z0 + (z1 - z0) * (s / length)
        cand = cmath.sqrt(complex(np.polyval(coeffs, zn)))
        w = cand if abs(cand - w) <= abs(cand + w) else -cand
    return w


def weierstrass_form(spec: SurfaceSpec, z, w) -> np.ndarray:
    """Vectorized Weierstrass triple; returns shape ``(3,) + z.shape``."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if np.any(w == 0):
        raise WAtZero("Weierstrass form evaluated at a branch point")
    c = spec.prefactor
    return c * np.stack([1 - z * z, 1j * (1 + z * z), 2 * z]) / w


def weierstrass_integrand(spec: SurfaceSpec, point: CoverPoint, w: complex | None = None) -> np.ndarray:
    """Coefficient of ``dz`` in the Weierstrass form at ``point``."""
    p = complex(np.polyval(defining_polynomial(spec), point.z))
    bp = np.asarray(branch_points(spec).finite_points, dtype=complex)
    if len(bp) and np.min(np.abs(bp - point.z)) <= 1e-12 * max(1.0, abs(point.z)):
        raise WAtZero(f"z={point.z} is a branch point")
    if w is None:
        w = point.w(spec)
    w = complex(w)
    if w == 0 or p == 0:
        raise WAtZero(f"z={point.z} is a branch point")
    if abs(w * w - p) > 1e-8 * max(1.0, abs(p)):
        raise DomainError("w is not a square root of p(z)")
    return weierstrass_form(spec, point.z, w)


def weierstrass_integrand_inverted(spec: SurfaceSpec, zeta: complex, w_hat: complex) -> np.ndarray:
    """Coefficient of ``d zeta`` in the chart ``zeta = 1/z`` with ``w_hat = w * zeta**4``."""
    if w_hat == 0:
        raise WAtZero("chart-at-infinity form evaluated at a branch point")
    zeta = complex(zeta)
    return spec.prefactor * np.array([1 - zeta * zeta, -1j * (1 + zeta * zeta), -2 * zeta]) / w_hat


def stereographic(z) -> np.ndarray:
    """Unit normal ``(2 Re z, 2 Im z, |z|^2 - 1) / (1 + |z|^2)``; infinity -> north pole.

    Vectorized: returns shape ``z.shape + (3,)``.
    """
    z = np.asarray(z, dtype=complex)
    inf = np.isinf(z)
    zz = np.where(inf, 0.0, z)
    r2 = np.abs(zz) ** 2
    X = np.stack([2 * zz.real, 2 * zz.imag, r2 - 1], axis=-1) / (1 + r2)[..., None]
    X[inf] = (0.0, 0.0, 1.0)
    return X


def inverse_stereographic(X) -> np.ndarray:
    """Chart coordinate of unit vectors ``X`` (shape ``(..., 3)``); north pole -> inf."""
    X = np.asarray(X, dtype=float)
    den = 1.0 - X[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (X[..., 0] + 1j * X[..., 1]) / den
    return np.where(den <= 0, complex(np.inf, 0), z)


def gauss_map(z) -> np.ndarray:
    """Unit normal of the surface at chart point ``z`` (the Gauss map is ``g = z``)."""
    return stereographic(z)


def conformal_factor(spec: SurfaceSpec, point: CoverPoint, w: complex | None = None) -> float:
    """Metric factor ``rho = (1 + |z|^2)^2 / |w|^2`` of ``ds^2 = rho |dz|^2``."""
    if w is None:
        w = point.w(spec)
    if w == 0:
        raise WAtZero(f"z={point.z} is a branch point")
    return (1 + abs(point.z) ** 2) ** 2 / abs(w) ** 2


def spherical_potential(z) -> float:
    """``8 / (1 + |z|^2)^2``: the squared second fundamental form times the
    metric factor, i.e. twice the pulled-back spherical area density."""
    return 8.0 / (1 + abs(z) ** 2) ** 2


def surface_area_density(branch: BranchData, X) -> np.ndarray:
    """Surface area per unit sphere area at unit vectors ``X`` (shape ``(n, 3)``).

    Equals ``rho (1 + |z|^2)^2 / 4``, written with chordal distances to the
    eight branch points so the same formula holds in every chart::

        sigma(x) = 2**8 / (4 |c| prod_finite sqrt(1 + |b|^2) prod_all |x - x_b|)
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    B = branch.sphere_points()
    finite = np.asarray(branch.finite_points, dtype=complex)
    K = 2.0**8 / (4.0 * abs(branch.leading_coefficient) * np.prod(np.sqrt(1 + np.abs(finite) ** 2)))
    chords = np.linalg.norm(X[:, None, :] - B[None, :, :], axis=2)
    return K / np.prod(chords, axis=1)
