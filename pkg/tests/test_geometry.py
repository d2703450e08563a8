import json
import math

import numpy as np
import pytest

from tpmslab.errors import DomainError, NoCoherentAngle, NonDiscrete, PathTooCloseToBranchPoint
from tpmslab.families import SurfaceSpec, branch_points, defining_polynomial
from tpmslab.geometry import (CoverPath, coherence_residual, gyroid_angle, integrate_form,
                              integrate_form_complex, mean_curvature_residual, period_lattice,
                              period_set, segment_period, surface_patch, wrap_to_cell)
from tpmslab.lattice import homothety_normalize, lattice_basis_closed_form, lattices_equivalent

TP14 = SurfaceSpec.from_name("tP", 14.0)


def _ellipse(c, u, A, B, n=401):
    t = np.linspace(0.0, 2 * np.pi, n)
    return tuple(c + u * (A * np.cos(t) + 1j * B * np.sin(t)))


def test_reversal_antisymmetry():
    spec = SurfaceSpec.from_name("H", 0.5)
    path = CoverPath((0.1 + 0.1j, 0.3 + 0.6j, 1.0 + 0.2j), sheet=1)
    v, w_end = integrate_form_complex(spec, path)
    principal = np.sqrt(complex(np.polyval(defining_polynomial(spec), path.points[-1])))
    end_sheet = 1 if abs(w_end - principal) < abs(w_end + principal) else -1
    back = integrate_form(spec, path.reversed(end_sheet))
    assert np.abs(v.real + back).max() < 1e-9
    assert np.abs(v.real).max() > 1e-3


def test_small_closed_loop_vanishes():
    loop = _ellipse(0.05 + 0.05j, 1.0, 0.1, 0.1)
    assert np.abs(integrate_form(TP14, CoverPath(loop))).max() < 1e-9


def test_loop_around_one_branch_point_changes_sheet():
    b = complex(branch_points(TP14).finite_points[0])
    path = CoverPath(_ellipse(b, 1.0, 0.1, 0.1), clearance=0.05)
    w0 = np.sqrt(complex(np.polyval(defining_polynomial(TP14), path.points[0])))
    _, w1 = integrate_form_complex(TP14, path)
    assert abs(w1 + w0) < 1e-8 * abs(w0)


def test_loop_around_branch_pair_is_doubled_segment():
    bp = np.array(branch_points(TP14).finite_points)
    c, d = (bp[0] + bp[1]) / 2, bp[1] - bp[0]
    u = d / abs(d)
    period = segment_period(TP14, 0, 1)
    loops = [integrate_form_complex(TP14, CoverPath(_ellipse(c, u, A, B), clearance=0.05))[0]
             for A, B in ((0.9, 0.25), (1.0, 0.4))]
    assert np.abs(loops[0] - loops[1]).max() < 1e-9        # homotopy invariance
    assert min(np.abs(loops[0] - period).max(), np.abs(loops[0] + period).max()) < 1e-9
    # orientation reversal negates the period exactly
    assert np.array_equal(segment_period(TP14, 1, 0), -period) or \
        np.abs(segment_period(TP14, 1, 0) + period).max() < 1e-12


def test_tclp_adjacent_segment_stable_under_perturbation():
    spec = SurfaceSpec.from_name("tCLP", 0.0)
    bp = np.array(branch_points(spec).finite_points)
    v = 2 * integrate_form_complex(spec, CoverPath((bp[0] * 0.999 + bp[1] * 0.001, bp[1] * 0.999 + bp[0] * 0.001),
                                                   clearance=1e-4))[0]
    period = segment_period(spec, 0, 1)
    assert np.abs(period).max() > 0.1
    c, d = (bp[0] + bp[1]) / 2, bp[1] - bp[0]
    u = d / abs(d)
    for A, B in ((0.55 * abs(d), 0.1), (0.6 * abs(d), 0.15)):
        loop = integrate_form_complex(spec, CoverPath(_ellipse(c, u, A, B), clearance=0.02))[0]
        assert min(np.abs(loop - period).max(), np.abs(loop + period).max()) < 1e-8
    assert np.abs(np.abs(v) - np.abs(period)).max() < 0.05 * np.abs(period).max()


def test_path_vertex_perturbation():
    spec = SurfaceSpec.from_name("rPD", 1.0)
    base = (0.2 + 0.1j, 0.3 + 0.3j, 0.1 + 0.4j)
    moved = (0.2 + 0.1j, 0.31 + 0.29j, 0.1 + 0.4j)
    assert np.abs(integrate_form(spec, CoverPath(base)) - integrate_form(spec, CoverPath(moved))).max() < 1e-8


def test_clearance_enforced():
    bp = complex(branch_points(TP14).finite_points[0])
    with pytest.raises(PathTooCloseToBranchPoint):
        integrate_form(TP14, CoverPath((bp - 0.01, bp + 0.01)))


@pytest.mark.parametrize("family, params", [
    ("rPD", (0.3, 0.7, 1.0, math.sqrt(2), 2.5)),
    ("H", (0.2, 0.4, 0.5, 0.7, 0.9)),
    ("tP", (3.0, 7.4, 14.0, 28.8, 50.0)),
])
def test_periods_match_closed_form(family, params):
    for a in params:
        spec = SurfaceSpec.from_name(family, a)
        ps, basis = period_lattice(spec)
        assert len(ps.vectors) == len(ps.cycles)
        ok, err = lattices_equivalent(basis.generators, lattice_basis_closed_form(spec).generators)
        assert ok and err < 1e-6, (a, err)
        G = basis.generators
        assert abs(abs(np.linalg.det(G)) - abs(np.linalg.det(lattice_basis_closed_form(spec).generators))) \
            < 1e-6 * abs(np.linalg.det(G))


def test_rpd_sqrt2_is_the_p_surface():
    _, b1 = period_lattice(SurfaceSpec.from_name("rPD", math.sqrt(2)))
    _, b2 = period_lattice(TP14)
    ok, err = lattices_equivalent(homothety_normalize(b1).generators, homothety_normalize(b2).generators)
    assert ok and err < 1e-6


def test_td_and_tclp_lattices_from_periods():
    _, btd = period_lattice(SurfaceSpec.from_name("tD", 14.0))
    assert abs(np.linalg.det(btd.generators)) > 1e-3
    _, bcl = period_lattice(SurfaceSpec.from_name("tCLP", 0.0))
    assert abs(np.linalg.det(bcl.generators)) > 1e-3


def test_generic_associate_angle_is_not_periodic():
    with pytest.raises(NonDiscrete):
        period_lattice(SurfaceSpec.gyroid(0.3))


def test_period_set_json():
    ps = period_set(TP14)
    data = json.loads(ps.to_json())
    assert len(data["cycles"]) == len(data["vectors"]) == len(ps.cycles)
    assert all(c["kind"] == "doubled-segment" for c in data["cycles"])


def test_gyroid_angle():
    theta, res = gyroid_angle()
    assert abs(theta - 0.907313) < 1e-3
    assert res < 1e-9
    assert coherence_residual(theta - 0.05) > 1e3 * res
    assert coherence_residual(theta + 0.05) > 1e3 * res
    assert coherence_residual(0.0) < 1e-10      # tP itself closes up
    with pytest.raises(DomainError):
        gyroid_angle((0.0, 1.0))
    with pytest.raises(NoCoherentAngle):
        gyroid_angle((0.2, 0.6))


def test_mean_curvature_residual_converges():
    for name, a in (("tP", 14.0), ("H", 0.5)):
        r = [mean_curvature_residual(surface_patch(SurfaceSpec.from_name(name, a), level=L)) for L in (3, 4, 5)]
        assert r[0] / r[1] > 3.0 and r[1] / r[2] > 3.4
        assert r[0] / r[2] > 10.0


def test_disk_region_patch():
    mesh = surface_patch(TP14, ("disk", 0.0, 0.2), level=3)
    assert np.isfinite(mesh.vertices).all()
    V, F = mesh.vertices, mesh.faces
    areas = np.linalg.norm(np.cross(V[F[:, 1]] - V[F[:, 0]], V[F[:, 2]] - V[F[:, 0]]), axis=1)
    assert areas.min() > 0
    with pytest.raises(PathTooCloseToBranchPoint):
        surface_patch(TP14, ("disk", complex(branch_points(TP14).finite_points[0]), 0.2), level=2)
    with pytest.raises(DomainError):
        surface_patch(TP14, ("rect", 0.1, 0.0, 0.0, 0.1), level=2)


def test_patch_wraps_into_cell():
    mesh = surface_patch(TP14, level=3)
    B = lattice_basis_closed_form(TP14).generators
    W = wrap_to_cell(mesh.vertices, B)
    frac = np.linalg.solve(B, W.T)
    assert frac.min() >= -1e-12 and frac.max() < 1 + 1e-12


def test_conjugate_patch_is_isometric_not_congruent():
    # chords differ at third order in h; the intrinsic lengths agree
    td = SurfaceSpec.from_name("tD", 14.0)
    gaps = []
    for L in (3, 4, 5):
        p, d = surface_patch(TP14, level=L), surface_patch(td, level=L)
        gaps.append(np.abs(p.edge_lengths() - d.edge_lengths()).max())
    assert gaps[0] / gaps[1] > 7 and gaps[1] / gaps[2] > 7
    assert gaps[2] < 1e-4 * p.edge_lengths().max()
    assert np.abs(p.vertices - d.vertices).max() > 1e-2


def test_obj_round_trip():
    mesh = surface_patch(SurfaceSpec.from_name("H", 0.5), level=2)
    text = mesh.to_obj()
    vs = [list(map(float, l.split()[1:])) for l in text.splitlines() if l.startswith("v ")]
    fs = [list(map(int, l.split()[1:])) for l in text.splitlines() if l.startswith("f ")]
    assert np.abs(np.array(vs) - mesh.vertices).max() < 1e-11 * max(1, np.abs(mesh.vertices).max())
    assert (np.array(fs) - 1 == mesh.faces).all()
