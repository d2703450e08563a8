import json
import math

import numpy as np
import pytest

from tpmslab.errors import CalibrationFailure, DomainError
from tpmslab.families import SurfaceSpec
from tpmslab.spectrum import (assemble_jacobi, build_cover_mesh, killing_kernel_residual,
                              morse_index_nullity, octahedral_sphere, scan_index_jumps)
from tpmslab.spectrum import analysis
from tpmslab.spectrum.analysis import killing_gram
from tpmslab.numerics import count_in_band

SPECS = [("tP", 14.0), ("H", 0.5), ("rPD", 0.1), ("tCLP", 0.0)]


@pytest.fixture(scope="module")
def meshes():
    out = {}
    for name, a in SPECS:
        spec = SurfaceSpec.from_name(name, a)
        out[name] = (spec, build_cover_mesh(spec, 4))
    return out


def test_seed_subdivision_counts():
    for level in range(4):
        V, F = octahedral_sphere(level)
        V1, F1 = octahedral_sphere(level + 1)
        assert len(F1) == 4 * len(F)
        assert len(V) == 4 * 4**level + 2
        assert len(V1) - len(V) == len(F) * 3 // 2  # one new vertex per edge
        assert np.allclose(np.linalg.norm(V, axis=1), 1.0)


@pytest.mark.parametrize("name", [n for n, _ in SPECS])
def test_euler_characteristic_and_sheets(meshes, name):
    spec, mesh = meshes[name]
    assert mesh.euler_characteristic() == -4
    assert len(mesh.branch_vertices) == 8
    counts = mesh.sheet_count
    assert counts.sum() == mesh.vertex_count
    assert (counts[mesh.branch_vertices] == 1).all()
    assert len(mesh.cuts) == 4
    used = [v for path in mesh.cuts for v in path]
    assert len(used) == len(set(used))  # cuts are disjoint


def _link_cycle_length(mesh, b):
    """Number of cover edges in the link of the cover vertex over branch vertex b,
    provided the link is a single cycle (else -1)."""
    cb = mesh.cover_index(b, 0)
    edges = []
    for tri in mesh.triangles:
        if cb in tri:
            k = list(tri).index(cb)
            edges.append((tri[(k + 1) % 3], tri[(k + 2) % 3]))
    nxt = dict(edges)
    start = edges[0][0]
    cur, n = start, 0
    while True:
        cur = nxt[cur]
        n += 1
        if cur == start or n > len(edges):
            break
    return n if n == len(edges) else -1


@pytest.mark.parametrize("name", [n for n, _ in SPECS])
def test_monodromy_around_branch_vertices(meshes, name):
    spec, mesh = meshes[name]
    for b in mesh.branch_vertices:
        seq = mesh.link_sheets(int(b))
        assert seq[0][0] == seq[-1][0]
        assert seq[0][1] == -seq[-1][1]
        ring = len(seq) - 1
        assert _link_cycle_length(mesh, int(b)) == 2 * ring


def test_mesh_determinism_and_level_guard():
    spec = SurfaceSpec.from_name("H", 0.5)
    m1, m2 = build_cover_mesh(spec, 3), build_cover_mesh(spec, 3)
    assert np.array_equal(m1.triangles, m2.triangles)
    with pytest.raises(DomainError):
        build_cover_mesh(spec, 1)


def test_potential_mass_is_sixteen_pi(meshes):
    for name, (spec, mesh) in meshes.items():
        J = assemble_jacobi(spec, mesh)
        assert J.potential.sum() == pytest.approx(16 * math.pi, rel=1e-12)
        one = np.ones(J.dimension)
        assert one @ (J.Q @ one) < 0
        assert abs(J.stiffness @ one).max() < 1e-10
        assert abs(J.Q - J.Q.T).max() < 1e-12
        assert J.M.diagonal().min() > 0


def test_mass_matches_surface_area():
    # the weighted mass sums to the surface area, which converges under refinement
    spec = SurfaceSpec.from_name("tP", 14.0)
    areas = [assemble_jacobi(spec, build_cover_mesh(spec, L)).M.sum() for L in (3, 4, 5)]
    assert abs(areas[2] - areas[1]) < abs(areas[1] - areas[0])
    assert abs(areas[2] - areas[1]) / areas[2] < 1e-6


def test_sheet_relabelling_is_a_permutation(meshes):
    spec, mesh = meshes["H"]
    swapped, perm = mesh.swap_sheets()
    J = assemble_jacobi(spec, mesh)
    Js = assemble_jacobi(spec, swapped)
    # new index = perm[old index]
    assert abs(Js.Q[perm][:, perm] - J.Q).max() < 1e-12
    assert abs(Js.M[perm][:, perm] - J.M).max() < 1e-15 * abs(J.M).max()
    tau = 10 * max(killing_kernel_residual(spec, mesh, J))
    assert tau == pytest.approx(10 * max(killing_kernel_residual(spec, swapped, Js)), rel=1e-10)
    c0, c1 = (count_in_band(x.Q, x.M, 0.0, tau) for x in (J, Js))
    assert c0 == c1
    assert (c0.negative, c0.zero) == (1, 3)


def test_operator_independent_of_theta():
    level = 4
    tp, td, gy = SurfaceSpec.from_name("tP", 14), SurfaceSpec.from_name("tD", 14), SurfaceSpec.gyroid()
    systems = [assemble_jacobi(s, build_cover_mesh(s, level)) for s in (tp, td, gy)]
    for other in systems[1:]:
        assert (systems[0].Q != other.Q).nnz == 0
        assert (systems[0].M != other.M).nnz == 0
    meshes_ = [build_cover_mesh(s, level) for s in (tp, td, gy)]
    res = [killing_kernel_residual(s, m) for s, m in zip((tp, td, gy), meshes_)]
    assert res[0] == res[1] == res[2]


def test_killing_residuals_decrease():
    spec = SurfaceSpec.from_name("tCLP", 0.0)
    series = []
    for L in (3, 4, 5):
        mesh = build_cover_mesh(spec, L)
        J = assemble_jacobi(spec, mesh)
        series.append(max(killing_kernel_residual(spec, mesh, J)))
        assert np.linalg.det(killing_gram(mesh, J)) > 0
    assert series[0] > series[1] > series[2] > 0
    assert (series[2] / series[0]) ** 0.5 <= 0.5


@pytest.mark.parametrize("name, a, expected", [("tCLP", 0.0, (3, 3)), ("tP", 14.0, (1, 3)), ("H", 0.5, (1, 3)),
                                               ("rPD", 0.1, (2, 3))])
def test_counts_level4_and_mass_swap(name, a, expected):
    spec = SurfaceSpec.from_name(name, a)
    r = morse_index_nullity(spec, 4)
    assert (r.morse_index, r.nullity) == expected
    s = morse_index_nullity(spec, 4, mass="sphere", eigenvalues=False)
    assert (s.morse_index, s.nullity) == expected
    assert len(r.lowest_eigenvalues) == 12
    assert sum(x < 0 for x in r.lowest_eigenvalues) == expected[0]
    data = json.loads(r.to_json())
    assert set(data) == {"family", "a", "theta", "level", "index", "nullity", "zero_tolerance",
                         "lowest_eigenvalues"}


def test_level_guard_and_calibration(monkeypatch):
    spec = SurfaceSpec.from_name("tP", 12.0)
    with pytest.raises(DomainError):
        morse_index_nullity(spec, 3)
    monkeypatch.setattr(analysis, "CALIBRATION_RATIO", 0.0)
    analysis.clear_cache()
    with pytest.raises(CalibrationFailure):
        morse_index_nullity(spec, 4)
    analysis.clear_cache()


def test_scan_finds_single_odd_jump():
    out = scan_index_jumps("rPD", 0.3, 0.7, 16, 4)
    assert len(out) == 1
    inst = out[0]
    assert inst.index_jump == 1 and inst.is_bifurcation
    assert (inst.index_before, inst.index_after) == (2, 1)
    assert inst.nullity_at_instant >= 4
    assert abs(inst.a_star - 0.4947) < 0.02
    with pytest.raises(DomainError):
        scan_index_jumps("rPD", 0.3, 0.7, 8, 4)
    with pytest.raises(DomainError):
        scan_index_jumps("H", 0.3, 1.2, 16, 4)
