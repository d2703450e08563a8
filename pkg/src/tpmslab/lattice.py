"""Closed-form lattice integrals, ratio curves, their extrema, and lattice
bases with reduction and equivalence tests.

Generators are the *columns* of the 3x3 matrices; covolume, ratios and
lattice equivalence are unchanged under transposition of the printed
matrices, but the period cross-check only matches with columns.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import DomainError, NonDiscrete, RankDeficiency, SingularBasis, UnsupportedFamily
from .families import FamilyId, SurfaceSpec, family_domain
from .numerics import integrate_endpoint_singular, minimize_bracketed
from .parallel import ordered_map

__all__ = [
    "BasisSource",
    "LatticeBasis",
    "RatioCurve",
    "Method",
    "Parity",
    "Classification",
    "DegeneracyInstant",
    "rpd_A", "rpd_C", "h_B", "h_D", "tp_E", "tp_F",
    "lattice_basis_closed_form",
    "ratio",
    "ratio_curve",
    "scan_ratio_extrema",
    "classify_instant",
    "homothety_normalize",
    "lll_reduce",
    "basis_from_generators",
    "lattices_equivalent",
]

RATIO_TOL = 1e-10
SQRT3 = math.sqrt(3.0)


class BasisSource(str, Enum):
    ClosedForm = "ClosedForm"
    Periods = "Periods"


class Method(str, Enum):
    RatioExtremum = "RatioExtremum"
    SpectralScan = "SpectralScan"


class Parity(str, Enum):
    Odd = "Odd"
    Even = "Even"
    Unknown = "Unknown"


class Classification(str, Enum):
    Transcritical = "Transcritical"
    Genuine = "Genuine"
    Undecided = "Undecided"


@dataclass(frozen=True)
class LatticeBasis:
    generators: np.ndarray
    source: BasisSource
    scale: float = 1.0

    def __post_init__(self):
        g = np.array(self.generators, dtype=float)
        if g.shape != (3, 3):
            raise SingularBasis("lattice basis must be 3x3")
        object.__setattr__(self, "generators", g)
        if abs(np.linalg.det(g)) <= 1e-14 * max(1.0, np.abs(g).max()) ** 3:
            raise SingularBasis("generators are linearly dependent")

    @property
    def covolume(self) -> float:
        return float(abs(np.linalg.det(self.generators)))

    @property
    def gram(self) -> np.ndarray:
        return self.generators.T @ self.generators


@dataclass
class RatioCurve:
    family: FamilyId
    samples: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["a", "ratio"])
        for a, r in self.samples:
            writer.writerow([f"{a:.12g}", f"{r:.12g}"])
        return buf.getvalue()


@dataclass
class DegeneracyInstant:
    a_star: float
    method: Method
    index_jump: int = 0
    parity: Parity = Parity.Unknown
    classification: Classification = Classification.Undecided
    index_before: int | None = None
    index_after: int | None = None
    nullity_at_instant: int | None = None
    bracket: tuple | None = None
    ratio_value: float | None = None
    extremum_kind: str | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.index_jump < 0:
            raise DomainError("index_jump must be non-negative")
        if self.parity is not Parity.Unknown and self.method is Method.SpectralScan:
            expected = Parity.Odd if self.index_jump % 2 else Parity.Even
            if self.parity is not expected:
                raise DomainError("parity inconsistent with index jump")

    @property
    def is_bifurcation(self) -> bool:
        """An odd jump of the Morse index forces a bifurcation; an even one is undecided."""
        return self.parity is Parity.Odd

    def to_dict(self) -> dict:
        d = {
            "a_star": _sig(self.a_star),
            "method": self.method.value,
            "index_jump": self.index_jump,
            "parity": self.parity.value,
            "classification": self.classification.value,
            "bifurcation": self.is_bifurcation if self.method is Method.SpectralScan else None,
        }
        if self.index_before is not None:
            d["index_before"] = self.index_before
            d["index_after"] = self.index_after
        if self.nullity_at_instant is not None:
            d["nullity_at_instant"] = self.nullity_at_instant
        if self.bracket is not None:
            d["bracket"] = [_sig(x) for x in self.bracket]
        if self.ratio_value is not None:
            d["ratio"] = _sig(self.ratio_value)
            d["extremum"] = self.extremum_kind
        d.update(self.extras)
        return d


def _sig(x: float) -> float:
    return float(f"{x:.12g}")


def _quad(f, lo, hi, sl, su):
    return integrate_endpoint_singular(f, lo, hi, sl, su, rel_tol=RATIO_TOL).value


def _require(a, lo, hi, name):
    if not (lo < a < hi):
        raise DomainError(f"{name}: a={a} outside ({lo}, {hi})")


# rPD ------------------------------------------------------------------------

@lru_cache(maxsize=4096)
def rpd_A(a: float) -> float:
    """Edge-length integral of the rPD lattice."""
    _require(a, 0.0, math.inf, "rpd_A")
    a3 = a**3

    def f(t):
        return (1 + a * a * t * t) / np.sqrt(t * (1 - t) * (1 + t + t * t) * (a3 * t**3 + 1 / a3))

    return _quad(f, 0.0, 1.0, True, True) / (SQRT3 * a)


@lru_cache(maxsize=4096)
def rpd_C(a: float) -> float:
    """Height of the rPD lattice."""
    _require(a, 0.0, math.inf, "rpd_C")
    a3 = a**3

    def f(t):
        return t / np.sqrt(t * (1 - t) * (1 + t + t * t) * (a3 + t**3 / a3))

    return 4.0 * _quad(f, 0.0, 1.0, True, True)


# H --------------------------------------------------------------------------

@lru_cache(maxsize=4096)
def h_B(a: float) -> float:
    _require(a, 0.0, 1.0, "h_B")
    a3 = a**3

    def f1(t):
        return (1 - t * t) / np.sqrt(t * (t**3 + a3) * (t**3 + 1 / a3))

    def f2(x):
        return x / np.sqrt((a3 + 1 / a3 + 6 * x - 8 * x**3) * (1 - x) * (1 + x))

    return SQRT3 * _quad(f1, 0.0, 1.0, True, False) + 4.0 * _quad(f2, 0.5, 1.0, False, True)


@lru_cache(maxsize=4096)
def h_D(a: float) -> float:
    _require(a, 0.0, 1.0, "h_D")
    a3 = a**3

    def f(t):
        return t / np.sqrt(t * (t**3 + a3) * (t**3 + 1 / a3))

    return 8.0 * _quad(f, 0.0, 1.0, True, False)


# tP -------------------------------------------------------------------------

@lru_cache(maxsize=4096)
def tp_E(a: float) -> float:
    _require(a, 2.0, math.inf, "tp_E")

    def f1(t):
        return (1 - t * t) / np.sqrt(t**8 + a * t**4 + 1)

    def f2(t):
        # 16 t^4 - 16 t^2 + 2 + a >= a - 2 > 0
        return 1.0 / np.sqrt(16 * t**4 - 16 * t * t + 2 + a)

    return 2.0 * _quad(f1, 0.0, 1.0, False, False) + 4.0 * _quad(f2, 0.0, 1.0, False, False)


@lru_cache(maxsize=4096)
def tp_F(a: float) -> float:
    _require(a, 2.0, math.inf, "tp_F")
    return 8.0 * _quad(lambda t: t / np.sqrt(t**8 + a * t**4 + 1), 0.0, 1.0, False, False)


_RATIO_FAMILIES = (FamilyId.rPD, FamilyId.H, FamilyId.tP)


def _ratio_family(family) -> FamilyId:
    family = FamilyId(family)
    if family not in _RATIO_FAMILIES:
        raise UnsupportedFamily(f"no closed-form lattice for {family.value}")
    return family


def lattice_basis_closed_form(spec: SurfaceSpec) -> LatticeBasis:
    family = _ratio_family(spec.family)
    a = spec.a
    if family is FamilyId.rPD:
        A, C = rpd_A(a), rpd_C(a)
        g = np.array([[3 * A, 3 * A, 4 * A],
                      [SQRT3 * A, -SQRT3 * A, 0.0],
                      [0.0, 0.0, C]])
    elif family is FamilyId.H:
        B, D = h_B(a), h_D(a)
        g = np.array([[SQRT3 / 2 * B, 0.0, 0.0],
                      [B / 2, B, 0.0],
                      [0.0, 0.0, D]])
    else:
        E, F = tp_E(a), tp_F(a)
        g = np.diag([E, E, F])
    return LatticeBasis(g, BasisSource.ClosedForm)


def ratio(family, a: float) -> float:
    """Homothety-invariant shape ratio: A/C (rPD), B/D (H), E/F (tP)."""
    family = _ratio_family(family)
    a = float(a)
    if family is FamilyId.rPD:
        return rpd_A(a) / rpd_C(a)
    if family is FamilyId.H:
        return h_B(a) / h_D(a)
    return tp_E(a) / tp_F(a)


def _ratio_job(args):
    family, a = args
    return ratio(family, a)


def ratio_curve(family, lo: float, hi: float, steps: int, workers: int | None = 1) -> RatioCurve:
    family = _ratio_family(family)
    dlo, dhi = family_domain(family)
    if not (dlo < lo < hi < dhi):
        raise DomainError(f"range ({lo}, {hi}) not inside the domain of {family.value}")
    if steps < 2:
        raise DomainError("need at least two samples")
    grid = [float(x) for x in np.linspace(lo, hi, steps)]
    values = ordered_map(_ratio_job, [(family, a) for a in grid], workers)
    return RatioCurve(family, list(zip(grid, values)))


def _local_extrema(grid, values, family, x_tol):
    found = []
    for i in range(1, len(grid) - 1):
        left = values[i] - values[i - 1]
        right = values[i + 1] - values[i]
        if left < 0 < right or (left < 0 and right == 0):
            kind, sign = "minimum", 1.0
        elif left > 0 > right or (left > 0 and right == 0):
            kind, sign = "maximum", -1.0
        else:
            continue
        res = minimize_bracketed(lambda a: sign * ratio(family, a),
                                 (grid[i - 1], grid[i], grid[i + 1]), x_tol=x_tol)
        found.append((res.location, sign * res.value, kind))
    return found


def scan_ratio_extrema(family, lo: float, hi: float, coarse_steps: int = 64,
                       x_tol: float = 1e-6, workers: int | None = 1) -> list:
    """Locate interior extrema of the ratio curve on ``[lo, hi]``.

    Sign changes of the discrete slope on a coarse grid give brackets that are
    refined with Brent's method.
    """
    if coarse_steps < 8:
        raise DomainError("coarse_steps must be at least 8")
    curve = ratio_curve(family, lo, hi, coarse_steps + 1, workers)
    grid = [a for a, _ in curve.samples]
    values = [r for _, r in curve.samples]
    out = []
    for loc, val, kind in _local_extrema(grid, values, curve.family, x_tol):
        out.append(DegeneracyInstant(
            a_star=loc, method=Method.RatioExtremum,
            classification=Classification.Transcritical,
            ratio_value=val, extremum_kind=kind,
        ))
    return out


def classify_instant(family, a_star: float, window: float | None = None, samples: int = 11) -> Classification:
    """Transcritical if the ratio has a strict extremum within ``window`` of
    ``a_star``; Genuine if it is strictly monotone across the window."""
    family = _ratio_family(family)
    a_star = float(a_star)
    lo_d, hi_d = family_domain(family)
    if not (lo_d < a_star < hi_d):
        raise DomainError(f"a_star={a_star} outside the domain of {family.value}")
    if window is None:
        window = 0.05 * abs(a_star)
    if window <= 0:
        raise DomainError("window must be positive")
    lo = max(a_star - window, lo_d + 1e-9 * max(1.0, abs(lo_d)))
    hi = min(a_star + window, hi_d - 1e-9 * max(1.0, abs(hi_d)) if math.isfinite(hi_d) else math.inf)
    grid = np.linspace(lo, hi, samples)
    values = [ratio(family, a) for a in grid]
    diffs = np.diff(values)
    if np.all(diffs > 0) or np.all(diffs < 0):
        return Classification.Genuine
    signs = np.sign(diffs)
    changes = int(np.sum(signs[1:] != signs[:-1]))
    if changes == 1 and not np.any(diffs == 0):
        extrema = _local_extrema(list(grid), values, family, 1e-8)
        if len(extrema) == 1 and abs(extrema[0][0] - a_star) <= window:
            return Classification.Transcritical
    return Classification.Undecided


def homothety_normalize(basis: LatticeBasis) -> LatticeBasis:
    """Rescale to unit covolume; the applied factor is stored in ``scale``."""
    det = np.linalg.det(basis.generators)
    if not np.isfinite(det) or abs(det) < 1e-300:
        raise SingularBasis("cannot normalize a singular basis")
    s = abs(det) ** (-1.0 / 3.0)
    return LatticeBasis(basis.generators * s, basis.source, basis.scale * s)


# Lattice reduction -------------------------------------------------------------

def lll_reduce(B: np.ndarray, delta: float = 0.75) -> tuple[np.ndarray, np.ndarray]:
    """LLL-reduce the columns of ``B``; returns ``(B @ U, U)`` with ``U`` unimodular."""
    B = np.array(B, dtype=float)
    n = B.shape[1]
    U = np.eye(n, dtype=np.int64)

    def gso(B):
        Bs = np.zeros_like(B)
        mu = np.zeros((n, n))
        for i in range(n):
            v = B[:, i].copy()
            for j in range(i):
                mu[i, j] = B[:, i] @ Bs[:, j] / (Bs[:, j] @ Bs[:, j])
                v -= mu[i, j] * Bs[:, j]
            Bs[:, i] = v
        return Bs, mu

    k = 1
    Bs, mu = gso(B)
    guard = 0
    while k < n:
        guard += 1
        if guard > 10000:
            raise NonDiscrete("LLL failed to terminate")
        for j in range(k - 1, -1, -1):
            q = round(mu[k, j])
            if q:
                B[:, k] -= q * B[:, j]
                U[:, k] -= q * U[:, j]
                Bs, mu = gso(B)
        if Bs[:, k] @ Bs[:, k] >= (delta - mu[k, k - 1] ** 2) * (Bs[:, k - 1] @ Bs[:, k - 1]):
            k += 1
        else:
            B[:, [k - 1, k]] = B[:, [k, k - 1]]
            U[:, [k - 1, k]] = U[:, [k, k - 1]]
            Bs, mu = gso(B)
            k = max(k - 1, 1)
    return B, U


def _integer_row_basis(rows: list) -> list:
    """Hermite-style reduction of integer row vectors to a basis of their span."""
    rows = [list(r) for r in rows if any(r)]
    ncols = len(rows[0]) if rows else 0
    basis = []
    for col in range(ncols):
        pivots = [r for r in rows if r[col] != 0]
        rest = [r for r in rows if r[col] == 0]
        while len(pivots) > 1:
            pivots.sort(key=lambda r: abs(r[col]))
            p = pivots[0]
            nxt = [p]
            for r in pivots[1:]:
                q = r[col] // p[col]
                r = [x - q * y for x, y in zip(r, p)]
                (nxt if r[col] != 0 else rest).append(r)
            pivots = nxt
        if pivots:
            basis.append(pivots[0])
        rows = [r for r in rest if any(r)]
    return basis


def basis_from_generators(vectors, max_denominator: int = 24, rtol: float = 1e-7) -> np.ndarray:
    """Columns of a reduced basis of the group generated by ``vectors`` (rows).

    Coordinates relative to the best-conditioned triple must be rationals with
    small denominators; otherwise the vectors do not generate a lattice at the
    given tolerance.
    """
    V = np.asarray(vectors, dtype=float)
    if V.ndim != 2 or V.shape[1] != 3 or len(V) < 3:
        raise RankDeficiency("need at least three 3-vectors")
    norms = np.linalg.norm(V, axis=1)
    scale = norms.max()
    best, best_q = None, 0.0
    for c in itertools.combinations(range(len(V)), 3):
        q = abs(np.linalg.det(V[list(c)])) / max(np.prod(norms[list(c)]), 1e-300)
        if q > best_q + 1e-12:
            best, best_q = c, q
    if best is None or best_q < 1e-8:
        raise RankDeficiency("period vectors span fewer than three dimensions")
    T = V[list(best)].T
    coords = np.linalg.solve(T, V.T).T
    fracs = [[Fraction(float(x)).limit_denominator(max_denominator) for x in row] for row in coords]
    approx = np.array([[float(f) for f in row] for row in fracs])
    err = np.linalg.norm((T @ (approx - coords).T), axis=0).max() / scale
    if err > rtol:
        raise NonDiscrete(f"vectors are not rational combinations of a triple (residual {err:.2e})")
    den = 1
    for row in fracs:
        for f in row:
            den = den * f.denominator // math.gcd(den, f.denominator)
    int_rows = [[int(f * den) for f in row] for row in fracs]
    rows = _integer_row_basis(int_rows)
    if len(rows) != 3:
        raise RankDeficiency("integer span has rank below 3")
    G = T @ (np.array(rows, dtype=float).T / den)
    return lll_reduce(G)[0]


_UNIMODULAR_CACHE = {}


def _unimodular(bound: int) -> np.ndarray:
    if bound not in _UNIMODULAR_CACHE:
        vals = np.arange(-bound, bound + 1)
        M = np.array(list(itertools.product(vals, repeat=9)), dtype=np.int8).reshape(-1, 3, 3)
        det = np.round(np.linalg.det(M.astype(float))).astype(int)
        _UNIMODULAR_CACHE[bound] = M[np.abs(det) == 1].astype(float)
    return _UNIMODULAR_CACHE[bound]


def lattices_equivalent(B1, B2, rtol: float = 1e-6) -> tuple[bool, float]:
    """Whether the column lattices of ``B1`` and ``B2`` are congruent.

    Both bases are LLL-reduced; then the best unimodular change of basis with
    small entries is searched, and the relative Frobenius error between Gram
    matrices is returned alongside the verdict.
    """
    G1 = lll_reduce(np.asarray(B1, dtype=float))[0]
    G2 = lll_reduce(np.asarray(B2, dtype=float))[0]
    g1 = G1.T @ G1
    g2 = G2.T @ G2
    norm = np.linalg.norm(g2)
    best = math.inf
    for bound in (1, 2):
        T = _unimodular(bound)
        diff = np.einsum("kji,jl,klm->kim", T, g1, T) - g2
        err = np.sqrt((diff**2).sum(axis=(1, 2))).min() / norm
        best = min(best, float(err))
        if best <= rtol:
            break
    return best <= rtol, best
