"""Triangulations of the genus-3 double cover of the sphere.

The base is a spherical Delaunay triangulation (convex hull of unit vectors)
seeded by a subdivided octahedron, carrying one vertex at each branch point
and graded towards them. Sheets are glued along four disjoint edge paths
pairing the branch points; the gluing is recorded as a Z/2 cochain on base
edges (bit 1 = the sheet label flips across that edge).
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

from ..errors import CutConstructionFailure, DomainError
from ..families import SurfaceSpec, branch_points, inverse_stereographic

__all__ = ["CoverMesh", "octahedral_sphere", "graded_sphere", "build_cover_mesh",
           "GRADING_STRENGTH", "BRANCH_CLEARANCE"]

GRADING_STRENGTH = 1.0
BRANCH_CLEARANCE = 0.35  # seed vertices closer than this many h to a branch point are dropped

_OCT_V = np.array([(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)], dtype=float)
_OCT_F = np.array([(0, 2, 4), (2, 1, 4), (1, 3, 4), (3, 0, 4), (2, 0, 5), (1, 2, 5), (3, 1, 5), (0, 3, 5)])


def octahedral_sphere(level: int) -> tuple[np.ndarray, np.ndarray]:
    """Octahedron with ``level`` rounds of 4:1 midpoint subdivision, projected
    to the unit sphere: ``4 * 4**level + 2`` vertices, ``8 * 4**level`` faces."""
    V = [tuple(v) for v in _OCT_V]
    F = _OCT_F.tolist()
    for _ in range(level):
        cache = {}

        def mid(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in cache:
                m = np.add(V[i], V[j])
                cache[key] = len(V)
                V.append(tuple(m / np.linalg.norm(m)))
            return cache[key]

        nf = []
        for a, b, c in F:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        F = nf
    return np.array(V), np.array(F)


def _hull(P):
    T = ConvexHull(P).simplices.copy()
    n = np.cross(P[T[:, 1]] - P[T[:, 0]], P[T[:, 2]] - P[T[:, 0]])
    flip = np.einsum("ij,ij->i", n, P[T].mean(axis=1)) < 0
    T[flip] = T[flip][:, [0, 2, 1]]
    return T


def _angles(P, B):
    return np.arccos(np.clip(P @ B.T, -1.0, 1.0))


def _edges(T):
    E = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
    return np.unique(np.sort(E, axis=1), axis=0)


def graded_sphere(branch_xyz: np.ndarray, level: int, stages: int | None = None,
                  strength: float = GRADING_STRENGTH):
    """Sphere triangulation with vertices ``0..7`` at the branch points.

    Stage ``k`` splits every edge of triangles reaching within
    ``strength * 4**-k + h / 2**(k-1)`` of a branch point, so the local edge
    length near the branch points shrinks geometrically.
    """
    if stages is None:
        stages = level + 2
    V, _ = octahedral_sphere(level)
    h = math.pi / 2 / 2**level
    B = np.asarray(branch_xyz, dtype=float)
    P = np.vstack([B, V[_angles(V, B).min(axis=1) > BRANCH_CLEARANCE * h]])
    for k in range(1, stages + 1):
        T = _hull(P)
        reach = strength * 4.0**-k + h / 2 ** (k - 1)
        near = _angles(P, B).min(axis=1)[T].min(axis=1) < reach
        E = _edges(T[near])
        M = P[E[:, 0]] + P[E[:, 1]]
        P = np.vstack([P, M / np.linalg.norm(M, axis=1)[:, None]])
    nb = len(B)
    for _ in range(8):
        T = _hull(P)
        E = _edges(T)
        bad = E[(E[:, 0] < nb) & (E[:, 1] < nb)]
        if not len(bad):
            return P, T, h
        M = P[bad[:, 0]] + P[bad[:, 1]]
        P = np.vstack([P, M / np.linalg.norm(M, axis=1)[:, None]])
    raise CutConstructionFailure("branch vertices remain adjacent after splitting")


def _rings(nv, T):
    nxt = [dict() for _ in range(nv)]
    for a, b, c in T:
        nxt[a][b] = c
        nxt[b][c] = a
        nxt[c][a] = b
    rings = []
    for v in range(nv):
        start = min(nxt[v])
        r = [start]
        cur = nxt[v][start]
        while cur != start:
            r.append(cur)
            cur = nxt[v][cur]
        if len(r) != len(nxt[v]):
            raise DomainError("triangulation is not a closed manifold")
        rings.append(r)
    return rings


def _matchings(items):
    if not items:
        yield []
        return
    first = items[0]
    for k in range(1, len(items)):
        rest = items[1:k] + items[k + 1:]
        for m in _matchings(rest):
            yield [(first, items[k])] + m


def _greedy_pairs(P, branch_idx):
    order = sorted(branch_idx, key=lambda i: tuple(np.round(P[i], 12)))
    pairs = []
    while order:
        i = order.pop(0)
        j = min(order, key=lambda k: (np.linalg.norm(P[i] - P[k]), tuple(np.round(P[k], 12))))
        order.remove(j)
        pairs.append((i, j))
    return pairs


def _lay_cuts(P, rings, branch_idx, pairs):
    bset = set(branch_idx)
    used = set()
    bits = {}
    paths = []
    pairs = sorted(pairs, key=lambda p: np.linalg.norm(P[p[0]] - P[p[1]]))
    for s, t in pairs:
        blocked = (bset | used) - {s, t}
        prev = {s: None}
        dq = deque([s])
        while dq:
            x = dq.popleft()
            if x == t:
                break
            for y in rings[x]:
                if y not in prev and y not in blocked:
                    prev[y] = x
                    dq.append(y)
        if t not in prev:
            return None
        path = [t]
        while prev[path[-1]] is not None:
            path.append(prev[path[-1]])
        path.reverse()
        for k in range(1, len(path) - 1):
            v = path[k]
            r = rings[v]
            m = len(r)
            j = (r.index(path[k + 1]) + 1) % m
            while r[j] != path[k - 1]:
                e = (min(v, r[j]), max(v, r[j]))
                bits[e] = bits.get(e, 0) ^ 1
                j = (j + 1) % m
        used |= set(path)
        paths.append(path)
    return paths, {e for e, b in bits.items() if b}


@dataclass
class CoverMesh:
    base_vertices: np.ndarray        # (nv, 3) unit vectors
    base_z: np.ndarray               # chart coordinates, inf at the north pole
    base_triangles: np.ndarray       # (nt, 3), outward oriented
    branch_vertices: np.ndarray      # base indices of the 8 branch points
    cut_edges: frozenset             # base edges (i < j) where the sheet flips
    cuts: list                       # the four vertex paths
    vertex_base: np.ndarray          # cover vertex -> base vertex
    vertex_sheet: np.ndarray         # +1 / -1, 0 on branch vertices
    triangles: np.ndarray            # (2 nt, 3) cover triangles
    triangle_base: np.ndarray        # cover triangle -> base triangle
    triangle_sheet: np.ndarray       # sheet of the reference corner
    resolution: float
    level: int
    curve_key: tuple = ()
    branch_xyz: np.ndarray = field(default=None, repr=False)

    @property
    def vertex_count(self) -> int:
        return len(self.vertex_base)

    @property
    def sheet_count(self) -> np.ndarray:
        counts = np.full(len(self.base_vertices), 2)
        counts[self.branch_vertices] = 1
        return counts

    def edge_count(self) -> int:
        return len(_edges(self.triangles))

    def euler_characteristic(self) -> int:
        return self.vertex_count - self.edge_count() + len(self.triangles)

    def cover_index(self, v: int, sheet: int) -> int:
        return self._index[(int(v), 0 if v in self._branch_set else int(sheet))]

    def __post_init__(self):
        self._branch_set = set(int(b) for b in self.branch_vertices)
        self._index = {(int(b), int(s)): i for i, (b, s) in enumerate(zip(self.vertex_base, self.vertex_sheet))}

    def link_sheets(self, branch_vertex: int) -> list:
        """Sheets visited walking once around the link of a branch vertex.

        The walk starts on sheet +1 and crosses cut edges as it goes, so a
        correct gluing yields a sequence that ends on sheet -1.
        """
        if branch_vertex not in self._branch_set:
            raise DomainError("not a branch vertex")
        ring = _rings(len(self.base_vertices), self.base_triangles)[branch_vertex]
        sheet = 1
        seq = [(ring[0], sheet)]
        for a, b in zip(ring, ring[1:] + ring[:1]):
            if (min(a, b), max(a, b)) in self.cut_edges:
                sheet = -sheet
            seq.append((b, sheet))
        return seq

    def swap_sheets(self) -> tuple["CoverMesh", np.ndarray]:
        """Relabel sheet +1 <-> -1; returns the mesh and ``perm`` with
        ``new_index = perm[old_index]``."""
        perm = np.array([self._index[(int(b), -int(s))] for b, s in zip(self.vertex_base, self.vertex_sheet)])
        inv = np.argsort(perm)
        swapped = CoverMesh(
            self.base_vertices, self.base_z, self.base_triangles, self.branch_vertices,
            self.cut_edges, self.cuts, self.vertex_base[inv], -self.vertex_sheet[inv],
            perm[self.triangles], self.triangle_base, -self.triangle_sheet,
            self.resolution, self.level, self.curve_key, self.branch_xyz,
        )
        return swapped, perm


def _lift(P, T, branch_idx, cut_edges):
    nv = len(P)
    bset = set(int(b) for b in branch_idx)
    vb, vs = [], []
    index = {}
    for v in range(nv):
        for s in ((0,) if v in bset else (1, -1)):
            index[(v, s)] = len(vb)
            vb.append(v)
            vs.append(s)

    def bit(x, y):
        return (min(x, y), max(x, y)) in cut_edges

    tris, tb, ts = [], [], []
    for t, tri in enumerate(T):
        plain = [v for v in tri if v not in bset]
        if len(plain) == 3 and (bit(tri[0], tri[1]) + bit(tri[1], tri[2]) + bit(tri[2], tri[0])) % 2:
            raise CutConstructionFailure("cut cochain is not closed on a regular triangle")
        ref = plain[0]
        for s in (1, -1):
            corners = []
            for v in tri:
                if v in bset:
                    corners.append(index[(v, 0)])
                else:
                    sv = s if v == ref or not bit(ref, v) else -s
                    corners.append(index[(v, sv)])
            tris.append(corners)
            tb.append(t)
            ts.append(s)
    return np.array(vb), np.array(vs), np.array(tris), np.array(tb), np.array(ts)


def build_cover_mesh(spec: SurfaceSpec, level: int, stages: int | None = None,
                     strength: float = GRADING_STRENGTH) -> CoverMesh:
    """Graded triangulation of the double cover branched over the curve of ``spec``."""
    if int(level) != level or level < 2:
        raise DomainError("level must be an integer >= 2")
    level = int(level)
    bd = branch_points(spec)
    B = bd.sphere_points()
    P, T, h = graded_sphere(B, level, stages, strength)
    branch_idx = np.arange(len(B))
    rings = _rings(len(P), T)
    greedy = _greedy_pairs(P, list(branch_idx))
    others = sorted(_matchings(list(branch_idx)),
                    key=lambda m: sum(np.linalg.norm(P[i] - P[j]) for i, j in m))
    for pairs in itertools.chain([greedy], others):
        laid = _lay_cuts(P, rings, branch_idx, pairs)
        if laid is None:
            continue
        paths, cut_edges = laid
        try:
            vb, vs, tris, tb, ts = _lift(P, T, branch_idx, cut_edges)
        except CutConstructionFailure:
            continue
        mesh = CoverMesh(P, inverse_stereographic(P), T, branch_idx, frozenset(cut_edges), paths,
                         vb, vs, tris, tb, ts, h, level, spec.curve_key, B)
        chi = mesh.euler_characteristic()
        if chi != -4:
            raise CutConstructionFailure(f"cover has Euler characteristic {chi}, expected -4")
        return mesh
    raise CutConstructionFailure("no pairing of branch points admits disjoint cuts")
