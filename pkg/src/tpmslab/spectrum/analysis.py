"""Morse index and nullity from matrix inertia, and family scans for jumps."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import eigsh

from ..errors import CalibrationFailure, DomainError
from ..families import FamilyId, SurfaceSpec, family_domain
from ..lattice import DegeneracyInstant, Method, Parity
from ..numerics import count_in_band, inertia_of_pencil
from ..parallel import ordered_map
from .assembly import JacobiSystem, assemble_jacobi
from .mesh import GRADING_STRENGTH, CoverMesh, build_cover_mesh

__all__ = ["SpectrumReport", "killing_kernel_residual", "morse_index_nullity",
           "scan_index_jumps", "clear_cache"]

KILLING_BAND_FACTOR = 10.0
CALIBRATION_RATIO = 1e-2
N_REPORTED = 12


@dataclass(frozen=True)
class SpectrumReport:
    morse_index: int
    nullity: int
    zero_tolerance: float
    lowest_eigenvalues: tuple
    resolution: float
    family: str = ""
    a: float = float("nan")
    theta: float = 0.0
    level: int = 0
    dimension: int = 0
    killing_residuals: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "a": float(f"{self.a:.12g}"),
            "theta": float(f"{self.theta:.12g}"),
            "level": self.level,
            "index": self.morse_index,
            "nullity": self.nullity,
            "zero_tolerance": float(f"{self.zero_tolerance:.12g}"),
            "lowest_eigenvalues": [float(f"{x:.12g}") for x in self.lowest_eigenvalues],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _killing_fields(mesh: CoverMesh) -> np.ndarray:
    # Gauss map components are the coordinates of the sphere points; they are
    # the same on both sheets.
    return mesh.base_vertices[mesh.vertex_base]


def _rayleigh(system: JacobiSystem, u: np.ndarray) -> float:
    return float(u @ (system.Q @ u)) / float(u @ (system.M @ u))


def killing_kernel_residual(spec: SurfaceSpec, mesh: CoverMesh,
                            system: JacobiSystem | None = None) -> tuple:
    """``|Q(N_i, N_i)| / M(N_i, N_i)`` for the three Gauss-map components."""
    if system is None:
        system = assemble_jacobi(spec, mesh)
    N = _killing_fields(mesh)
    return tuple(abs(_rayleigh(system, N[:, i])) for i in range(3))


def killing_gram(mesh: CoverMesh, system: JacobiSystem) -> np.ndarray:
    N = _killing_fields(mesh)
    return N.T @ (system.M @ N)


def _spectrum_floor(system: JacobiSystem) -> float:
    """A shift strictly below the whole pencil spectrum, certified by inertia."""
    one = np.ones(system.dimension)
    sigma = 2.0 * min(_rayleigh(system, one), -1.0)
    while inertia_of_pencil(system.Q, system.M, shift=sigma, zero_tol=0.0).negative:
        sigma *= 2.0
    return sigma


def _lowest(system: JacobiSystem, k: int) -> tuple:
    k = min(k, system.dimension - 2)
    sigma = _spectrum_floor(system)
    vals = eigsh(system.Q.tocsc(), k=k, M=system.M.tocsc(), sigma=sigma, which="LM",
                 return_eigenvectors=False, tol=1e-10)
    return tuple(float(x) for x in np.sort(vals))


_CACHE: dict = {}


def clear_cache():
    _CACHE.clear()


def _counts(spec: SurfaceSpec, level: int, stages, strength, mass, with_eigs: bool):
    key = (spec.curve_key, level, stages, strength, mass, with_eigs)
    if key in _CACHE:
        return _CACHE[key]
    mesh = build_cover_mesh(spec, level, stages, strength)
    system = assemble_jacobi(spec, mesh, mass=mass)
    res = killing_kernel_residual(spec, mesh, system)
    one = np.ones(system.dimension)
    const_rq = abs(_rayleigh(system, one))
    if max(res) > CALIBRATION_RATIO * const_rq:
        raise CalibrationFailure(
            f"Killing Rayleigh quotients {max(res):.3e} not small against constant mode {const_rq:.3e}")
    tau = KILLING_BAND_FACTOR * max(res)
    band = count_in_band(system.Q, system.M, 0.0, tau)
    if band.zero < 3:
        raise CalibrationFailure(f"only {band.zero} eigenvalues in the Killing band +-{tau:.3e}")
    eigs = _lowest(system, N_REPORTED) if with_eigs else ()
    out = (band.negative, band.zero, tau, eigs, mesh.resolution, system.dimension, res)
    if len(_CACHE) > 512:
        _CACHE.clear()
    _CACHE[key] = out
    return out


def morse_index_nullity(spec: SurfaceSpec, level: int, stages: int | None = None,
                        strength: float = GRADING_STRENGTH, mass: str = "conformal",
                        eigenvalues: bool = True) -> SpectrumReport:
    """Morse index and nullity of the discretized Jacobi operator.

    The zero band is ``KILLING_BAND_FACTOR`` times the largest Rayleigh
    quotient of the Gauss-map fields (exact Jacobi fields in the continuum);
    counts come from two LDL^T inertias at the band edges.
    """
    if int(level) != level or level < 4:
        raise DomainError("level must be an integer >= 4")
    level = int(level)
    index, nullity, tau, eigs, h, dim, res = _counts(spec, level, stages, strength, mass, eigenvalues)
    return SpectrumReport(index, nullity, tau, eigs, h, spec.family.value, spec.a, spec.theta,
                          level, dim, res)


# Family scans -----------------------------------------------------------------------


def _index_job(args):
    family, a, level, stages, strength = args
    r = morse_index_nullity(SurfaceSpec(family, a), level, stages, strength, eigenvalues=False)
    return r.morse_index, r.nullity, r.dimension


def _changes(g, a0, g0, a1, g1, width):
    """Brackets ``[x0, x1]`` of width <= ``width`` across which the step
    function ``g`` changes, found by recursive bisection."""
    if g0 == g1:
        return []
    if a1 - a0 <= width:
        return [(a0, a1, g0, g1)]
    m = 0.5 * (a0 + a1)
    gm = g(m)
    return _changes(g, a0, g0, m, gm, width) + _changes(g, m, gm, a1, g1, width)


def _centre(brackets):
    """Step-size weighted mean location of a list of change brackets."""
    w = [abs(g1 - g0) for _, _, g0, g1 in brackets]
    return sum(wi * 0.5 * (x0 + x1) for wi, (x0, x1, _, _) in zip(w, brackets)) / sum(w)


class _Scan:
    def __init__(self, family, level, stages, strength):
        self.args = (family, level, stages, strength)
        self.memo = {}

    def __call__(self, a):
        if a not in self.memo:
            family, level, stages, strength = self.args
            self.memo[a] = _index_job((family, a, level, stages, strength))
        return self.memo[a]

    def index(self, a):
        return self(a)[0]

    def below_band_top(self, a):
        i, n, _ = self(a)
        return i + n


def _scan_level(family, lo, hi, steps, level, stages, strength, workers, merge_factor):
    width = (hi - lo) / 2**10
    fine = width / 2**3
    ev = _Scan(family, level, stages, strength)
    grid = [float(x) for x in np.linspace(lo, hi, steps + 1)]
    values = ordered_map(_index_job, [(family, a, level, stages, strength) for a in grid], workers)
    ev.memo.update(zip(grid, values))
    brackets = []
    for a0, a1 in zip(grid, grid[1:]):
        brackets += _changes(ev.index, a0, ev.index(a0), a1, ev.index(a1), width)
    merged = []
    for b in brackets:
        if merged and b[0] - merged[-1][-1][1] <= merge_factor * width:
            merged[-1].append(b)
        else:
            merged.append([b])
    found = []
    for parts in merged:
        a0, a1 = parts[0][0], parts[-1][1]
        i0, i1 = parts[0][2], parts[-1][3]
        if i0 == i1:
            continue
        # lower band edge: where the index itself changes
        low = []
        for x0, x1, g0, g1 in parts:
            low += _changes(ev.index, x0, g0, x1, g1, fine)
        # upper band edge: where index + nullity changes; widen until both
        # ends are back to nullity 3
        pad = width
        while True:
            L, R = max(lo, a0 - pad), min(hi, a1 + pad)
            nL, nR = ev(L)[1], ev(R)[1]
            if (nL == 3 and nR == 3) or (L == lo and R == hi) or pad > (hi - lo):
                break
            pad *= 2
        up = _changes(ev.below_band_top, L, ev.below_band_top(L), R, ev.below_band_top(R), fine)
        centre = 0.5 * (_centre(low) + _centre(up)) if up else _centre(low)
        lo_n, hi_n = min(a0, L), max(a1, R)
        nulls = [v[1] for x, v in ev.memo.items() if lo_n <= x <= hi_n]
        if max(nulls) <= 3:
            nulls.append(ev(centre)[1])
        found.append({"a_star": centre, "bracket": (a0, a1), "index_before": i0, "index_after": i1,
                      "nullity": max(nulls), "dimension": ev(centre)[2]})
    return found


def scan_index_jumps(family, lo: float, hi: float, steps: int = 16, level: int = 5,
                     stages: int | None = None, strength: float = GRADING_STRENGTH,
                     workers: int | None = 1, merge_factor: float = 2.0,
                     extrapolate_from: int | None = None) -> list:
    """Morse index on a grid, index changes localized by bisection.

    Brackets are refined to width ``(hi - lo) / 2**10``; changes closer than
    ``merge_factor`` bracket widths are merged into one jump (a discretized
    double eigenvalue splits slightly). The instant is placed midway between
    the parameters where the crossing eigenvalue leaves ``-tau`` and reaches
    ``+tau``, the edges of the calibrated zero band.

    With ``extrapolate_from`` set to a coarser level the scan is repeated
    there and the instants are extrapolated linearly in ``1/dimension``; the
    eigenvalue error of the graded meshes scales that way.
    """
    family = FamilyId(family)
    dlo, dhi = family_domain(family)
    if not (dlo < lo < hi < dhi):
        raise DomainError(f"range ({lo}, {hi}) not inside the domain of {family.value}")
    if steps < 16:
        raise DomainError("steps must be at least 16")
    found = _scan_level(family, lo, hi, steps, level, stages, strength, workers, merge_factor)
    coarse = None
    if extrapolate_from is not None:
        if extrapolate_from >= level:
            raise DomainError("extrapolate_from must be a coarser level")
        c_stages = None if stages is None else stages - (level - extrapolate_from)
        coarse = _scan_level(family, lo, hi, steps, extrapolate_from, c_stages, strength, workers, merge_factor)
        signature = [(f["index_before"], f["index_after"]) for f in found]
        if signature != [(c["index_before"], c["index_after"]) for c in coarse]:
            coarse = None
    instants = []
    for k, f in enumerate(found):
        jump = abs(f["index_after"] - f["index_before"])
        extras = {"family": family.value, "level": level}
        a_star = f["a_star"]
        if coarse is not None:
            c = coarse[k]
            nf, nc = f["dimension"], c["dimension"]
            a_star = f["a_star"] + (f["a_star"] - c["a_star"]) * nc / (nf - nc)
            extras["extrapolated_from"] = {str(extrapolate_from): float(f"{c['a_star']:.12g}"),
                                           str(level): float(f"{f['a_star']:.12g}")}
        instants.append(DegeneracyInstant(
            a_star=a_star, method=Method.SpectralScan, index_jump=jump,
            parity=Parity.Odd if jump % 2 else Parity.Even,
            index_before=f["index_before"], index_after=f["index_after"],
            nullity_at_instant=f["nullity"], bracket=f["bracket"], extras=extras,
        ))
    return instants
