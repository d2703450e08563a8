"""Weierstrass path integrals, period lattices, surface patches, and the
associate angle at which the periods close up again (the gyroid)."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import (DomainError, NonConvergence, NoCoherentAngle, PathTooCloseToBranchPoint, RankDeficiency,
                     WAtZero)
from .families import (GYROID_A, FamilyId, SurfaceSpec, branch_points, default_clearance,
                       defining_polynomial, weierstrass_form)
from .lattice import BasisSource, LatticeBasis, basis_from_generators
from .numerics import minimize_bracketed

__all__ = [
    "CoverPath", "PeriodSet", "SurfaceMesh",
    "integrate_form", "segment_period", "period_set", "period_lattice",
    "surface_patch", "mean_curvature_residual", "wrap_to_cell",
    "coherence_residual", "gyroid_angle",
]

_GL = {n: np.polynomial.legendre.leggauss(n) for n in (10, 20)}


@dataclass(frozen=True)
class CoverPath:
    """Polyline in the z chart, starting on ``sheet`` (w = sheet * principal sqrt)."""

    points: tuple
    sheet: int = 1
    clearance: float | None = None

    def __post_init__(self):
        pts = tuple(complex(p) for p in self.points)
        if len(pts) < 2:
            raise DomainError("a path needs at least two points")
        if self.sheet not in (1, -1):
            raise DomainError("sheet must be +1 or -1")
        object.__setattr__(self, "points", pts)

    def reversed(self, end_sheet: int) -> "CoverPath":
        return CoverPath(self.points[::-1], end_sheet, self.clearance)


def _dist_to_branch(z, bp):
    if len(bp) == 0:
        return np.full(np.shape(z), np.inf)
    return np.abs(np.asarray(z)[..., None] - bp[None, :]).min(axis=-1)


def _segment_clearance(z0, z1, bp):
    d = z1 - z0
    if d == 0:
        return float(_dist_to_branch(np.array([z0]), bp)[0])
    t = np.clip(((bp - z0) * np.conj(d)).real / abs(d) ** 2, 0.0, 1.0)
    return float(np.abs(z0 + t * d - bp).min()) if len(bp) else math.inf


def _follow(w_prev, w_principal):
    return np.where(np.abs(w_principal - w_prev) <= np.abs(w_principal + w_prev), w_principal, -w_principal)


def _piece(spec, coeffs, z0, z1, w0, n):
    x, wts = _GL[n]
    z = z0 + (x + 1) / 2 * (z1 - z0)
    w = np.sqrt(np.polyval(coeffs, z).astype(complex))
    out = np.empty_like(w)
    prev = w0
    for k in range(len(z)):
        prev = _follow(prev, w[k])
        out[k] = prev
    form = weierstrass_form(spec, z, out)
    val = form @ (wts / 2) * (z1 - z0)
    w_end = complex(_follow(prev, np.sqrt(complex(np.polyval(coeffs, z1)))))
    return val, w_end


def _integrate_segment(spec, coeffs, bp, z0, z1, w0, tol=1e-14, depth=0):
    """Composite Gauss-Legendre with pieces short against the branch distance,
    bisected while the 10- and 20-point rules disagree."""
    dist = min(float(_dist_to_branch(np.array([z0]), bp)[0]), float(_dist_to_branch(np.array([z1]), bp)[0]),
               _segment_clearance(z0, z1, bp))
    length = abs(z1 - z0)
    if length > 0.25 * dist and depth < 40:
        m = 0.5 * (z0 + z1)
        a, wm = _integrate_segment(spec, coeffs, bp, z0, m, w0, tol, depth + 1)
        b, w1 = _integrate_segment(spec, coeffs, bp, m, z1, wm, tol, depth + 1)
        return a + b, w1
    hi, w1 = _piece(spec, coeffs, z0, z1, w0, 20)
    lo, _ = _piece(spec, coeffs, z0, z1, w0, 10)
    scale = max(1.0, float(np.abs(hi).max()))
    if np.abs(hi - lo).max() > tol * scale and depth < 40:
        m = 0.5 * (z0 + z1)
        a, wm = _integrate_segment(spec, coeffs, bp, z0, m, w0, tol, depth + 1)
        b, w1 = _integrate_segment(spec, coeffs, bp, m, z1, wm, tol, depth + 1)
        return a + b, w1
    return hi, w1


def integrate_form_complex(spec: SurfaceSpec, path: CoverPath) -> tuple[np.ndarray, complex]:
    """Complex integral of the Weierstrass form along ``path``; also returns w at the end."""
    bd = branch_points(spec)
    bp = np.asarray(bd.finite_points, dtype=complex)
    clearance = path.clearance if path.clearance is not None else default_clearance(spec)
    coeffs = defining_polynomial(spec)
    pts = path.points
    for z0, z1 in zip(pts, pts[1:]):
        if _segment_clearance(z0, z1, bp) < clearance:
            raise PathTooCloseToBranchPoint(f"segment {z0} -> {z1} passes within {clearance:g} of a branch point")
    w = complex(np.sqrt(complex(np.polyval(coeffs, pts[0])))) * path.sheet
    if w == 0:
        raise WAtZero("path starts at a branch point")
    total = np.zeros(3, dtype=complex)
    for z0, z1 in zip(pts, pts[1:]):
        val, w = _integrate_segment(spec, coeffs, bp, z0, z1, w)
        total += val
    return total, w


def integrate_form(spec: SurfaceSpec, path: CoverPath) -> np.ndarray:
    """``Re`` of the Weierstrass form integrated along ``path``."""
    return integrate_form_complex(spec, path)[0].real


# Periods ---------------------------------------------------------------------------

_N_PHI = (64, 128, 256, 512, 1024, 2048)


def segment_period(spec: SurfaceSpec, i: int, j: int) -> np.ndarray:
    """Complex period of the cycle encircling finite branch points ``i`` and ``j``.

    Equals twice the integral along the straight segment. The square root is
    taken in product form, which is continuous along the open segment, and
    ``t = sin^2(phi)`` removes both endpoint singularities.
    """
    bd = branch_points(spec)
    roots = np.asarray(bd.finite_points, dtype=complex)
    bi, bj = roots[i], roots[j]
    d = bj - bi
    others = np.delete(roots, [i, j])
    lead = complex(bd.leading_coefficient)
    prev = None
    for n in _N_PHI:
        x, wts = np.polynomial.legendre.leggauss(n)
        phi = (x + 1) * np.pi / 4
        wphi = wts * np.pi / 4
        t = np.sin(phi) ** 2
        z = bi + t * d
        g = np.sqrt(lead) * np.sqrt(d) * np.sqrt(-d) * np.ones_like(z)
        for r in others:
            g = g * np.sqrt(bi - r) * np.sqrt(1 + t * d / (bi - r))
        # dz / w = d dt / (g sqrt(t(1-t))) and dt / sqrt(t(1-t)) = 2 dphi
        vec = spec.prefactor * np.array([1 - z * z, 1j * (1 + z * z), 2 * z])
        val = 2.0 * ((vec / g * d * 2) @ wphi)
        if prev is not None and np.abs(val - prev).max() <= 1e-13 * max(1.0, np.abs(val).max()):
            return val
        prev = val
    raise NonConvergence("segment period did not converge", value=prev)


@dataclass
class PeriodSet:
    cycles: list                     # (i, j, z_i, z_j) pairs of finite branch points
    complex_vectors: np.ndarray      # (n, 3) complex periods of the form without theta rotation
    theta: float = 0.0

    @property
    def vectors(self) -> np.ndarray:
        return self.complex_vectors.real

    def rotated(self, theta: float) -> np.ndarray:
        """Real periods of ``exp(i theta)`` times the form."""
        return (np.exp(1j * (theta - self.theta)) * self.complex_vectors).real

    def to_json(self) -> str:
        data = {
            "theta": float(f"{self.theta:.12g}"),
            "cycles": [{"from": i, "to": j,
                        "z_from": [float(f"{z0.real:.12g}"), float(f"{z0.imag:.12g}")],
                        "z_to": [float(f"{z1.real:.12g}"), float(f"{z1.imag:.12g}")],
                        "kind": "doubled-segment"} for i, j, z0, z1 in self.cycles],
            "vectors": [[float(f"{x:.12g}") for x in v] for v in self.vectors],
        }
        return json.dumps(data, indent=2)


def _clear_pairs(roots, margin=0.2):
    # the product-form root only fails when another branch point lies on the
    # segment; keep those well away relative to their distance to the ends
    out = []
    for i, j in itertools.combinations(range(len(roots)), 2):
        bi, bj = roots[i], roots[j]
        d = bj - bi
        ok = True
        for k, r in enumerate(roots):
            if k in (i, j):
                continue
            t = np.clip(((r - bi) * np.conj(d)).real / abs(d) ** 2, 0.0, 1.0)
            if abs(bi + t * d - r) < margin * min(abs(r - bi), abs(r - bj)):
                ok = False
                break
        if ok:
            out.append((i, j))
    return out


def period_set(spec: SurfaceSpec) -> PeriodSet:
    """Doubled-segment periods over every pair of finite branch points whose
    straight segment stays clear of the others."""
    roots = np.asarray(branch_points(spec).finite_points, dtype=complex)
    cycles, vecs = [], []
    for i, j in _clear_pairs(roots):
        try:
            v = segment_period(spec, i, j)
        except NonConvergence:
            continue  # the cycle system is redundant; skip ill-conditioned segments
        cycles.append((i, j, roots[i], roots[j]))
        vecs.append(v)
    if not vecs:
        raise RankDeficiency("no usable cycles")
    return PeriodSet(cycles, np.array(vecs), spec.theta)


def period_lattice(spec: SurfaceSpec, rtol: float = 1e-6) -> tuple[PeriodSet, LatticeBasis]:
    ps = period_set(spec)
    basis = basis_from_generators(ps.vectors, rtol=rtol)
    return ps, LatticeBasis(basis, BasisSource.Periods)


# Gyroid ----------------------------------------------------------------------------


@lru_cache(maxsize=4)
def _tp_periods(a: float) -> PeriodSet:
    return period_set(SurfaceSpec(FamilyId.tP, a, 0.0))


def coherence_residual(theta: float, a: float = GYROID_A, bound: int = 3) -> float:
    """How far the rotated periods are from an integer lattice.

    Over every well-conditioned triple of period vectors, the remaining
    vectors are rounded to integer combinations with coefficients bounded by
    ``bound``; the smallest worst-case misfit (relative to the longest
    vector) is returned.
    """
    R = _tp_periods(float(a)).rotated(theta)
    scale = np.linalg.norm(R, axis=1).max()
    combos = np.array(list(itertools.combinations(range(len(R)), 3)))
    Bs = np.transpose(R[combos], (0, 2, 1))                 # (c, 3, 3) columns
    dets = np.abs(np.linalg.det(Bs))
    good = dets > 1e-3 * scale**3
    if not good.any():
        return math.inf
    Bs = Bs[good]
    coef = np.linalg.solve(Bs, np.broadcast_to(R.T, (len(Bs),) + R.T.shape))
    k = np.round(coef)
    ok = np.abs(k).max(axis=(1, 2)) <= bound
    if not ok.any():
        return math.inf
    miss = np.linalg.norm(R.T[None] - Bs[ok] @ k[ok], axis=1).max(axis=1) / scale
    return float(miss.min())


def gyroid_angle(bracket: tuple = (0.1, math.pi / 2 - 0.1), tol: float = 1e-6,
                 coarse: int = 64, a: float = GYROID_A) -> tuple[float, float]:
    """Interior associate angle at which the tP periods close; returns ``(theta, residual)``."""
    lo, hi = map(float, bracket)
    guard = 0.05
    if not (guard <= lo < hi <= math.pi / 2 - guard):
        raise DomainError("bracket must stay away from 0 and pi/2, where the periods trivially close")
    grid = np.linspace(lo, hi, coarse + 1)
    vals = [coherence_residual(t, a) for t in grid]
    k = int(np.argmin(vals))
    if not math.isfinite(vals[k]):
        raise NoCoherentAngle("no coherent lattice anywhere in the bracket")
    k = min(max(k, 1), coarse - 1)
    res = minimize_bracketed(lambda t: coherence_residual(t, a), (grid[k - 1], grid[k], grid[k + 1]),
                             x_tol=1e-10)
    if res.value > tol:
        raise NoCoherentAngle(f"smallest residual {res.value:.3e} exceeds {tol:.1e}")
    return res.location, res.value


# Surface patches ---------------------------------------------------------------------


@dataclass
class SurfaceMesh:
    vertices: np.ndarray
    faces: np.ndarray
    spec: SurfaceSpec
    chart_points: np.ndarray = field(default=None, repr=False)
    boundary: np.ndarray = field(default=None, repr=False)

    def to_obj(self) -> str:
        lines = [f"v {x:.12g} {y:.12g} {z:.12g}" for x, y, z in self.vertices]
        lines += [f"f {i + 1} {j + 1} {k + 1}" for i, j, k in self.faces]
        return "\n".join(lines) + "\n"

    def edge_lengths(self) -> np.ndarray:
        E = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        E = np.unique(np.sort(E, axis=1), axis=0)
        return np.linalg.norm(self.vertices[E[:, 0]] - self.vertices[E[:, 1]], axis=1)


def _default_center(spec):
    bp = np.asarray(branch_points(spec).finite_points, dtype=complex)
    if _dist_to_branch(np.array([0j]), bp)[0] > 1e-9:
        return 0j
    return 0.1 + 0j


def _square_grid(n):
    u = np.linspace(-1.0, 1.0, n + 1)
    X, Y = np.meshgrid(u, u, indexing="ij")
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    faces = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
            faces += [(a, b, c), (a, c, d)]
    boundary = np.zeros((n + 1, n + 1), dtype=bool)
    boundary[[0, -1], :] = True
    boundary[:, [0, -1]] = True
    return (X + 1j * Y).ravel(), np.array(faces), boundary.ravel()


def _ring_grid(n):
    """Unit disk: ring k carries 6k equally spaced points, neighbouring rings
    are zipped into triangles by angle."""
    pts = [0j]
    start = [0]
    for k in range(1, n + 1):
        start.append(len(pts))
        pts += list(k / n * np.exp(2j * np.pi * np.arange(6 * k) / (6 * k)))
    faces = []
    for k in range(1, n + 1):
        inner = [0] if k == 1 else list(range(start[k - 1], start[k - 1] + 6 * (k - 1)))
        outer = list(range(start[k], start[k] + 6 * k))
        ia = np.angle(np.array(pts)[inner]) % (2 * np.pi)
        oa = np.angle(np.array(pts)[outer]) % (2 * np.pi)
        ni, no = len(inner), len(outer)
        if ni == 1:
            faces += [(inner[0], outer[o], outer[(o + 1) % no]) for o in range(no)]
            continue
        i = o = 0
        for _ in range(ni + no):
            # advance whichever ring lags in angle
            next_o = oa[o + 1] if o + 1 < no else oa[0] + 2 * np.pi
            next_i = ia[i + 1] if i + 1 < ni else ia[0] + 2 * np.pi
            if i >= ni or (o < no and next_o <= next_i):
                faces.append((inner[i % ni], outer[o % no], outer[(o + 1) % no]))
                o += 1
            else:
                faces.append((inner[i % ni], outer[o % no], inner[(i + 1) % ni]))
                i += 1
    boundary = np.zeros(len(pts), dtype=bool)
    boundary[start[n]:] = True
    F = np.array(faces)[:, [0, 2, 1]]  # counter-clockwise in the chart
    return np.array(pts), F, boundary


def _region_grid(region, n):
    """Chart points, triangles and boundary flags of a grid over the region."""
    kind = region[0]
    if kind == "disk":
        _, c, r = region
        W, F, bnd = _ring_grid(n)
        return complex(c) + r * W, F, bnd
    if kind == "rect":
        _, x0, x1, y0, y1 = region
        if not (x0 < x1 and y0 < y1):
            raise DomainError("empty rectangle")
        W, F, bnd = _square_grid(n)
        Z = (x0 + (W.real + 1) / 2 * (x1 - x0)) + 1j * (y0 + (W.imag + 1) / 2 * (y1 - y0))
        return Z, F, bnd
    raise DomainError(f"unknown region kind {kind!r}")


def default_region(spec: SurfaceSpec):
    """Square inscribed in half the branch-free disk around the base point."""
    bp = np.asarray(branch_points(spec).finite_points, dtype=complex)
    c = _default_center(spec)
    h = 0.5 * float(_dist_to_branch(np.array([c]), bp)[0]) / math.sqrt(2)
    return ("rect", c.real - h, c.real + h, c.imag - h, c.imag + h)


def surface_patch(spec: SurfaceSpec, region=None, level: int = 4) -> SurfaceMesh:
    """Immersed image of a chart region, integrated along a BFS spanning tree of the grid."""
    if level < 1:
        raise DomainError("level must be positive")
    if region is None:
        region = default_region(spec)
    n = 2**level
    Z, faces, boundary = _region_grid(region, n)
    bd = branch_points(spec)
    bp = np.asarray(bd.finite_points, dtype=complex)
    clearance = default_clearance(spec)
    if (_dist_to_branch(Z, bp) < clearance).any():
        raise PathTooCloseToBranchPoint("region contains a branch point")
    coeffs = defining_polynomial(spec)
    nbrs = [set() for _ in range(len(Z))]
    for a, b, c in faces:
        nbrs[a] |= {b, c}
        nbrs[b] |= {a, c}
        nbrs[c] |= {a, b}
    centre = np.mean(Z[boundary]) if boundary.any() else Z.mean()
    root = int(np.argmin(np.abs(Z - centre)))
    pos = np.zeros((len(Z), 3))
    wv = np.zeros(len(Z), dtype=complex)
    wv[root] = np.sqrt(complex(np.polyval(coeffs, Z[root])))
    seen = np.zeros(len(Z), dtype=bool)
    seen[root] = True
    order = [root]
    head = 0
    while head < len(order):
        v = order[head]
        head += 1
        for u in sorted(nbrs[v]):
            if seen[u]:
                continue
            if _segment_clearance(Z[v], Z[u], bp) < clearance:
                raise PathTooCloseToBranchPoint("grid edge passes a branch point")
            val, wu = _integrate_segment(spec, coeffs, bp, Z[v], Z[u], wv[v])
            pos[u] = pos[v] + val.real
            wv[u] = wu
            seen[u] = True
            order.append(u)
    return SurfaceMesh(pos, faces, spec, Z, boundary)


def _vertex_areas_and_laplacian(V, F):
    n = len(V)
    lap = np.zeros((n, 3))
    area = np.zeros(n)
    for k in range(3):
        i, j, l = F[:, k], F[:, (k + 1) % 3], F[:, (k + 2) % 3]
        u = V[j] - V[i]
        w = V[l] - V[i]
        cr = np.linalg.norm(np.cross(u, w), axis=1)
        cot = np.einsum("ij,ij->i", u, w) / cr
        # angle at i is opposite edge (j, l)
        np.add.at(lap, j, 0.5 * cot[:, None] * (V[l] - V[j]))
        np.add.at(lap, l, 0.5 * cot[:, None] * (V[j] - V[l]))
        np.add.at(area, i, cr / 6.0)
    return lap, area


def mean_curvature_residual(mesh: SurfaceMesh) -> float:
    """Area-weighted RMS of the cotangent mean-curvature vector over interior
    vertices, made scale-free by the square root of the patch area."""
    V, F = mesh.vertices, mesh.faces
    lap, area = _vertex_areas_and_laplacian(V, F)
    interior = ~mesh.boundary if mesh.boundary is not None else np.ones(len(V), dtype=bool)
    Hn = np.linalg.norm(lap[interior], axis=1) / area[interior]
    total = area.sum()
    return float(np.sqrt((area[interior] * Hn**2).sum() / total) * math.sqrt(total))


def wrap_to_cell(points, basis: np.ndarray) -> np.ndarray:
    """Reduce points modulo the lattice spanned by the columns of ``basis``."""
    B = np.asarray(basis, dtype=float)
    frac = np.linalg.solve(B, np.asarray(points, dtype=float).T)
    return (B @ (frac - np.floor(frac))).T
