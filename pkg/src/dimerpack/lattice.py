"""Lattice generators, exhaustions and contractions.

Patches of {p,q} tilings are generated geometrically: starting from a
regular p-gon at the origin, neighboring faces are produced by reflecting
across edge geodesics and deduplicated by metric vertex matching.  Growth
proceeds in vertex-sharing layers: depth 0 is the root face, depth k+1
adds every face sharing a vertex with the depth-k patch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .halfedge import Network, RotationPlanarGraph, from_faces

__all__ = [
    "build_pq_tiling",
    "square_grid",
    "dual_graph",
    "exhaustion",
    "ExhaustionStep",
    "contract_vertices",
    "subpatch_from_faces",
    "face_layers",
]


# ----------------------------------------------------------------------
# {p,q} tilings
# ----------------------------------------------------------------------
class _VertexStore:
    """Metric vertex registry with duplicate detection."""

    def __init__(self, geometry, match_tol):
        self.geometry = geometry
        self.match_tol = match_tol
        self.coords = []
        self._arr = np.zeros(0, dtype=complex)

    def lookup_or_add(self, z: complex) -> int:
        if len(self.coords):
            arr = self._arr
            if self.geometry == geo.EUCLIDEAN:
                d = np.abs(arr - z)
            else:
                d = np.abs((arr - z) / (1.0 - np.conj(arr) * z))
                d = 2.0 * np.arctanh(np.clip(d, 0.0, 1.0 - 1e-17))
            i = int(np.argmin(d))
            if d[i] < self.match_tol:
                return i
        self.coords.append(z)
        self._arr = np.asarray(self.coords, dtype=complex)
        return len(self.coords) - 1


def build_pq_tiling(p: int, q: int, depth: int) -> RotationPlanarGraph:
    """Patch of the {p,q} tiling (p-gon faces, q around each vertex).

    Requires 1/p + 1/q <= 1/2; the Euclidean boundary case uses unit
    edge length, the hyperbolic case the Poincare disk.  Vertices are
    numbered in breadth (layer creation) order; unit weights.
    """
    if p < 3 or q < 3:
        raise ValueError("p and q must be at least 3")
    if 2 * (p + q) > p * q:
        raise ValueError(f"{{{p},{q}}} is spherical (1/p + 1/q > 1/2), not supported")
    if depth < 0:
        raise ValueError("depth must be non-negative")
    geometry = geo.EUCLIDEAN if 2 * (p + q) == p * q else geo.HYPERBOLIC
    circ, edge_len, _ = geo.regular_pq_radii(p, q)

    store = _VertexStore(geometry, match_tol=edge_len / 8.0)
    root = []
    for k in range(p):
        ang = 2.0 * math.pi * k / p
        z = circ * complex(math.cos(ang), math.sin(ang))
        if geometry == geo.HYPERBOLIC:
            z = math.tanh(circ / 2.0) * complex(math.cos(ang), math.sin(ang))
        root.append(store.lookup_or_add(z))

    faces = [tuple(root)]
    face_keys = {frozenset(root)}
    face_depth = [0]

    def reflect_face(cyc, i):
        """Face across edge (cyc[i], cyc[i+1]); CCW tuple of vertex ids."""
        k = len(cyc)
        a, b = cyc[i], cyc[(i + 1) % k]
        za, zb = store.coords[a], store.coords[b]
        imgs = []
        for v in cyc:
            if v == a or v == b:
                imgs.append(v)
            else:
                w = geo.reflect_across(geometry, za, zb, store.coords[v])
                imgs.append(store.lookup_or_add(w))
        imgs.reverse()  # reflection flips orientation
        return tuple(imgs)

    for level in range(depth):
        level_vertices = set()
        for f in faces:
            level_vertices.update(f)
        # complete the q-fan of faces around every patch vertex
        frontier = list(range(len(faces)))
        while frontier:
            fi = frontier.pop(0)
            cyc = faces[fi]
            for i in range(len(cyc)):
                a, b = cyc[i], cyc[(i + 1) % len(cyc)]
                if a not in level_vertices and b not in level_vertices:
                    continue
                new = reflect_face(cyc, i)
                key = frozenset(new)
                if key in face_keys:
                    continue
                face_keys.add(key)
                faces.append(new)
                face_depth.append(level + 1)
                frontier.append(len(faces) - 1)

    positions = np.asarray(store.coords, dtype=complex)
    g = from_faces(
        len(store.coords), faces, positions=positions,
        meta={
            "family": "pq", "p": p, "q": q, "depth": depth,
            "geometry": geometry, "root_face_input": 0,
        },
    )
    order = g.meta["face_input_order"]
    fd = np.full(g.n_faces, -1, dtype=int)
    for i, f in enumerate(order):
        fd[f] = face_depth[i]
    g.meta["face_depth"] = fd
    g.meta["root_face"] = order[0]
    _check_pq(g, p, q)
    return g


def _check_pq(g: RotationPlanarGraph, p: int, q: int):
    for f in g.interior_faces():
        if g.face_degree(f) != p:
            raise AssertionError(f"face {f} has degree {g.face_degree(f)} != {p}")
    for v in g.interior_vertices():
        if g.degree(v) != q:
            raise AssertionError(f"interior vertex {v} has degree {g.degree(v)} != {q}")


def square_grid(n: int) -> RotationPlanarGraph:
    """n x n grid of unit squares: (n+1)^2 vertices, 2n(n+1) edges."""
    if n < 1:
        raise ValueError("n must be positive")
    def vid(i, j):
        return j * (n + 1) + i
    faces = []
    for j in range(n):
        for i in range(n):
            faces.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)))
    pos = np.array([complex(i, j) for j in range(n + 1) for i in range(n + 1)])
    g = from_faces((n + 1) ** 2, faces, positions=pos,
                   meta={"family": "grid", "n": n, "geometry": geo.EUCLIDEAN})
    order = g.meta["face_input_order"]
    c = (n - 1) // 2  # central face column/row (exact center for odd n)
    g.meta["root_face"] = order[c * n + c]
    g.meta["face_depth"] = _face_layers_from_root(g, g.meta["root_face"])
    return g


def dual_graph(g: RotationPlanarGraph) -> RotationPlanarGraph:
    """Planar dual with the outer face as an explicit dual vertex."""
    return g.dual_graph()


# ----------------------------------------------------------------------
# face layers and exhaustions
# ----------------------------------------------------------------------
def _face_layers_from_root(g: RotationPlanarGraph, root_face: int) -> np.ndarray:
    """Depth of each interior face: root 0, then vertex-sharing growth."""
    depth = np.full(g.n_faces, -1, dtype=int)
    depth[root_face] = 0
    vertex_faces = [[] for _ in range(g.n_vertices)]
    for f in range(g.n_faces):
        if f == g.outer_face:
            continue
        for v in g.face_vertices(f):
            vertex_faces[v].append(f)
    current = {root_face}
    level = 0
    while True:
        verts = set()
        for f in range(g.n_faces):
            if 0 <= depth[f] <= level:
                verts.update(g.face_vertices(f))
        added = False
        for v in verts:
            for f in vertex_faces[v]:
                if depth[f] < 0:
                    depth[f] = level + 1
                    added = True
        if not added:
            break
        level += 1
    return depth


def face_layers(g: RotationPlanarGraph, root_face: int | None = None) -> np.ndarray:
    if root_face is None:
        root_face = g.meta.get("root_face")
        if root_face is None:
            raise ValueError("graph has no recorded root face; pass one explicitly")
    fd = g.meta.get("face_depth")
    if fd is not None and root_face == g.meta.get("root_face"):
        return fd
    return _face_layers_from_root(g, root_face)


@dataclass
class SubPatch:
    """A relabeled induced face-union of a parent graph."""
    graph: RotationPlanarGraph
    parent_vertices: np.ndarray    # new id -> parent id
    parent_faces: list             # new interior face id (input order) -> parent face
    to_sub: dict = field(default_factory=dict)

    def __post_init__(self):
        self.to_sub = {int(p): i for i, p in enumerate(self.parent_vertices)}


def subpatch_from_faces(g: RotationPlanarGraph, face_ids) -> SubPatch:
    """Induced subgraph made of the given interior faces of g."""
    face_ids = [f for f in face_ids if f != g.outer_face]
    verts = []
    seen = {}
    cycles = []
    for f in face_ids:
        cyc = []
        for v in g.face_vertices(f):
            if v not in seen:
                seen[v] = len(verts)
                verts.append(v)
            cyc.append(seen[v])
        cycles.append(tuple(cyc))
    # weights follow the parent's edges
    nu = {}
    nud = {}
    for f in face_ids:
        for h in g.faces[f]:
            e = g.edge_of(h)
            u, v = g.edge_endpoints(e)
            key = (seen[u], seen[v]) if seen[u] < seen[v] else (seen[v], seen[u])
            nu[key] = g.nu[e]
            nud[key] = g.nu_dual[e]
    pos = None
    if g.positions is not None:
        pos = np.array([g.positions[v] for v in verts])
    sub = from_faces(len(verts), cycles, nu=nu, nu_dual=nud, positions=pos,
                     meta=dict(g.meta, parent=True))
    sub.meta.pop("face_depth", None)
    sub.meta["root_face"] = sub.meta["face_input_order"][0]
    return SubPatch(graph=sub, parent_vertices=np.array(verts, dtype=int),
                    parent_faces=list(face_ids))


@dataclass
class ExhaustionStep:
    radius: int
    vertices: np.ndarray          # parent vertex ids, sorted
    sub: SubPatch
    boundary_parent: np.ndarray   # parent ids of the step's outer-boundary vertices


def exhaustion(g: RotationPlanarGraph, schedule) -> list[ExhaustionStep]:
    """Nested face-layer balls around the root face.

    Any holes (bounded complement components in the dual) are filled so
    each step is simply connected.  Rejects non-increasing schedules and
    disconnected results.
    """
    schedule = list(schedule)
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule radii must be strictly increasing")
    depth = face_layers(g)
    steps = []
    prev = set()
    for r in schedule:
        faces = {f for f in range(g.n_faces)
                 if f != g.outer_face and 0 <= depth[f] <= r}
        faces |= _fill_holes(g, faces)
        if prev and not prev <= faces:
            raise ValueError("exhaustion steps are not nested")
        prev = faces
        face_list = sorted(faces)
        sub = subpatch_from_faces(g, face_list)
        if not Network.from_rotation_graph(sub.graph).is_connected():
            raise ValueError(f"radius {r} produces a disconnected patch")
        bnd = np.array(sorted({int(sub.parent_vertices[v])
                               for v in sub.graph.boundary_vertices()}), dtype=int)
        steps.append(ExhaustionStep(
            radius=r,
            vertices=np.array(sorted(sub.parent_vertices.tolist()), dtype=int),
            sub=sub,
            boundary_parent=bnd,
        ))
    return steps


def _fill_holes(g: RotationPlanarGraph, faces: set) -> set:
    """Interior faces in bounded components of the complement (dual BFS)."""
    comp = {}
    extra = set()
    for f0 in range(g.n_faces):
        if f0 in faces or f0 in comp:
            continue
        group = [f0]
        comp[f0] = f0
        reaches_outer = f0 == g.outer_face
        stack = [f0]
        while stack:
            f = stack.pop()
            for h in g.faces[f]:
                nb = int(g.face_of[h ^ 1])
                if nb in faces or nb in comp:
                    continue
                comp[nb] = f0
                group.append(nb)
                stack.append(nb)
                if nb == g.outer_face:
                    reaches_outer = True
        if not reaches_outer:
            extra.update(group)
    return extra


def is_simply_connected(g: RotationPlanarGraph, faces) -> bool:
    """True if the face union is connected with connected dual complement."""
    faces = set(faces) - {g.outer_face}
    if not faces:
        return False
    if _fill_holes(g, faces):
        return False
    start = next(iter(faces))
    seen = {start}
    stack = [start]
    while stack:
        f = stack.pop()
        for h in g.faces[f]:
            nb = int(g.face_of[h ^ 1])
            if nb in faces and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return seen == faces


# ----------------------------------------------------------------------
# contraction (wired graphs)
# ----------------------------------------------------------------------
def contract_vertices(g: RotationPlanarGraph | Network, s) -> tuple[Network, int]:
    """Contract the vertex set s to a single new vertex.

    Edges inside s are dropped, parallel edges to the outside kept with
    their conductances.  Returns the wired network and the id of the
    contracted vertex (the last one).
    """
    s = set(int(v) for v in s)
    if not s:
        raise ValueError("contraction set must be non-empty")
    if isinstance(g, RotationPlanarGraph):
        net = Network.from_rotation_graph(g)
    else:
        net = g
    if len(s) >= net.n:
        raise ValueError("cannot contract every vertex")
    keep = [v for v in range(net.n) if v not in s]
    remap = {v: i for i, v in enumerate(keep)}
    z = len(keep)
    edges = []
    for (u, v, c) in net.edges:
        uu = remap.get(u, z)
        vv = remap.get(v, z)
        if uu == vv:
            continue
        edges.append((uu, vv, c))
    out = Network(z + 1, edges, meta={"contracted_from": sorted(s), "kept": keep})
    return out, z
