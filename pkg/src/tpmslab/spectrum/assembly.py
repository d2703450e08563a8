"""Finite element form of the Jacobi operator on a cover mesh.

Everything is pulled back to the unit sphere through the Gauss map. The
Dirichlet energy is conformally invariant, so P1 cotangent stiffness on the
chord triangles represents it in any chart. The potential term ``|S|^2 dA``
is twice the round area element, and the surface area element is
``sigma dA_sphere`` with ``sigma = rho (1 + |z|^2)^2 / 4``, which has an
integrable ``1/r`` singularity at each branch vertex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import DomainError
from ..families import SurfaceSpec, branch_points, surface_area_density
from .mesh import CoverMesh

__all__ = ["JacobiSystem", "assemble_jacobi", "element_geometry"]


@dataclass
class JacobiSystem:
    Q: sp.csr_matrix          # stiffness - potential
    M: sp.csr_matrix          # mass weighted by the surface area element
    stiffness: sp.csr_matrix
    potential: sp.csr_matrix
    mass_kind: str = "conformal"

    @property
    def dimension(self) -> int:
        return self.Q.shape[0]


def _gauss_legendre01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1) / 2, w / 2


def element_geometry(P, T):
    """Edge vectors, flat and spherical areas of the chord triangles."""
    X = P[T]
    a, b, c = X[:, 0], X[:, 1], X[:, 2]
    edges = (c - b, a - c, b - a)
    flat = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    num = np.abs(np.einsum("ij,ij->i", a, np.cross(b, c)))
    den = 1 + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, c) + np.einsum("ij,ij->i", c, a)
    spherical = 2 * np.arctan2(num, den)
    return edges, flat, spherical


def _duffy_mass(P, T, density, order):
    """Element mass matrices ``int density phi_i phi_j dA_sphere`` over the
    radial projections of chord triangles, collapsed at corner 0."""
    u, wu = _gauss_legendre01(order)
    U, Vv = np.meshgrid(u, u, indexing="ij")
    W = np.outer(wu, wu).ravel()
    U, Vv = U.ravel(), Vv.ravel()
    lam = np.stack([1 - U, U * (1 - Vv), U * Vv], axis=1)           # (q, 3)
    jac = U * W                                                      # Duffy factor, times 2*area later
    X = P[T]
    pts = np.einsum("qk,tkd->tqd", lam, X)
    r = np.linalg.norm(pts, axis=2)
    n = np.cross(X[:, 1] - X[:, 0], X[:, 2] - X[:, 0])
    twice_area = np.linalg.norm(n, axis=1)
    dist = np.abs(np.einsum("td,td->t", n, X[:, 0])) / twice_area
    Y = pts / r[..., None]
    dens = density(Y.reshape(-1, 3)).reshape(Y.shape[:2])
    wt = dens * jac[None, :] * twice_area[:, None] * dist[:, None] / r**3
    return np.einsum("tq,qi,qj->tij", wt, lam, lam)


def _scatter(CT, local, n):
    rows = np.repeat(CT, 3, axis=1).ravel()
    cols = np.tile(CT, (1, 3)).ravel()
    A = sp.coo_matrix((local.reshape(len(CT), 9).ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def _lift_local(local, mesh):
    return local[mesh.triangle_base]


def assemble_jacobi(spec: SurfaceSpec, mesh: CoverMesh, mass: str = "conformal",
                    regular_order: int = 4, singular_order: int = 8) -> JacobiSystem:
    """Assemble ``Q = K - potential`` and the mass matrix on ``mesh``.

    ``mass="conformal"`` weights by the surface area element (the natural
    inner product of the Jacobi operator); ``mass="sphere"`` uses the round
    metric instead. Inertia counts do not depend on the choice.
    """
    if mesh.curve_key != spec.curve_key:
        raise DomainError("mesh was built for a different curve")
    bd = branch_points(spec)
    if mesh.branch_xyz is not None and not np.allclose(mesh.branch_xyz, bd.sphere_points(), atol=1e-12):
        raise DomainError("mesh branch points do not match the surface")
    P, T = mesh.base_vertices, mesh.base_triangles
    n = mesh.vertex_count
    edges, flat, spherical = element_geometry(P, T)

    K = np.empty((len(T), 3, 3))
    for i in range(3):
        for j in range(3):
            K[:, i, j] = np.einsum("ij,ij->i", edges[i], edges[j]) / (4 * flat)
    base_mass = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 12.0
    Ms = spherical[:, None, None] * base_mass[None]
    stiffness = _scatter(mesh.triangles, _lift_local(K, mesh), n)
    sphere_mass = _scatter(mesh.triangles, _lift_local(Ms, mesh), n)
    potential = 2.0 * sphere_mass

    if mass == "sphere":
        M = sphere_mass
    elif mass == "conformal":
        bset = set(int(b) for b in mesh.branch_vertices)
        has_branch = np.array([any(int(v) in bset for v in tri) for tri in T])
        Tr = T.copy()
        for t in np.nonzero(has_branch)[0]:
            k = next(i for i in range(3) if int(T[t, i]) in bset)
            Tr[t] = np.roll(T[t], -k)
        density = lambda Y: surface_area_density(bd, Y)  # noqa: E731
        local = np.empty((len(T), 3, 3))
        if (~has_branch).any():
            local[~has_branch] = _duffy_mass(P, T[~has_branch], density, regular_order)
        idx = np.nonzero(has_branch)[0]
        if len(idx):
            rolled = _duffy_mass(P, Tr[idx], density, singular_order)
            for row, t in enumerate(idx):
                # undo the corner rotation so local indices match T
                k = int(np.nonzero(T[t] == Tr[t, 0])[0][0])
                perm = (np.arange(3) - k) % 3
                local[t] = rolled[row][np.ix_(perm, perm)]
        M = _scatter(mesh.triangles, _lift_local(local, mesh), n)
    else:
        raise DomainError(f"unknown mass kind {mass!r}")
    Q = (stiffness - potential).tocsr()
    return JacobiSystem(Q, M.tocsr(), stiffness, potential, mass)
