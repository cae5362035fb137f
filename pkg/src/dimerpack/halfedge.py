"""Half-edge planar graphs with rotation systems.

A :class:`RotationPlanarGraph` stores a connected planar graph as paired
half-edges plus, for every half-edge, the next half-edge counterclockwise
around its origin vertex.  Faces are the orbits of ``h -> rot(twin(h))``
and carry the face to the *left* of each half-edge; exactly one face is
marked as the outer face.  Every edge carries a pair of strictly positive
weights ``(nu, nu_dual)`` for the edge and its dual partner.

Conventions
-----------
* half-edges are numbered ``0 .. 2E-1`` with ``twin(h) == h ^ 1``;
* edge ``e`` owns half-edges ``2e`` and ``2e+1``;
* faces listed counterclockwise (interior on the left of each half-edge).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RotationPlanarGraph",
    "Network",
    "from_faces",
    "rotation_isomorphic",
]


class GraphStructureError(ValueError):
    """Raised when half-edge data fails a structural invariant."""


@dataclass
class RotationPlanarGraph:
    n_vertices: int
    origin: np.ndarray          # origin[h] = origin vertex of half-edge h
    next_rot: np.ndarray        # next_rot[h] = next half-edge CCW around origin[h]
    nu: np.ndarray              # nu[e] > 0, weight of edge e
    nu_dual: np.ndarray         # nu_dual[e] > 0, weight of the dual partner of e
    outer_face: int = -1        # face id of the unbounded face
    positions: np.ndarray | None = None   # optional scaffold coordinates (complex)
    meta: dict = field(default_factory=dict)

    # -- derived (filled by _finalize) --
    faces: list = field(default_factory=list)       # face id -> list of half-edges
    face_of: np.ndarray | None = None               # face_of[h] = face left of h
    dual_partner: "RotationPlanarGraph | None" = None

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.int64)
        self.next_rot = np.asarray(self.next_rot, dtype=np.int64)
        self.nu = np.asarray(self.nu, dtype=float)
        self.nu_dual = np.asarray(self.nu_dual, dtype=float)
        if not self.faces:
            self._trace_faces()
        self.validate()

    # ------------------------------------------------------------------
    # basic accessors
    # ------------------------------------------------------------------
    @property
    def n_half_edges(self) -> int:
        return len(self.origin)

    @property
    def n_edges(self) -> int:
        return self.n_half_edges // 2

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def twin(self, h: int) -> int:
        return h ^ 1

    def target(self, h: int) -> int:
        return int(self.origin[h ^ 1])

    def edge_of(self, h: int) -> int:
        return h >> 1

    def edge_endpoints(self, e: int):
        return int(self.origin[2 * e]), int(self.origin[2 * e + 1])

    def half_edges_at(self, v: int):
        """Half-edges with origin v in CCW rotation order."""
        first = self._first_he[v]
        if first < 0:
            return []
        out = [first]
        h = int(self.next_rot[first])
        while h != first:
            out.append(h)
            h = int(self.next_rot[h])
        return out

    def neighbors(self, v: int):
        return [self.target(h) for h in self.half_edges_at(v)]

    def degree(self, v: int) -> int:
        return len(self.half_edges_at(v))

    def next_in_face(self, h: int) -> int:
        """Next half-edge of the face to the left of h."""
        return int(self.prev_rot[h ^ 1])

    def face_vertices(self, f: int):
        return [int(self.origin[h]) for h in self.faces[f]]

    def face_degree(self, f: int) -> int:
        return len(self.faces[f])

    def interior_faces(self):
        return [f for f in range(self.n_faces) if f != self.outer_face]

    def edge_faces(self, e: int):
        """(face left of 2e, face left of 2e+1)."""
        return int(self.face_of[2 * e]), int(self.face_of[2 * e + 1])

    def boundary_half_edges(self):
        """Half-edges of the outer face cycle (outer face on their left)."""
        return list(self.faces[self.outer_face])

    def boundary_vertices(self):
        """Vertices on the outer face, in cyclic order."""
        return [int(self.origin[h]) for h in self.faces[self.outer_face]]

    def is_boundary_vertex(self, v: int) -> bool:
        return v in self._boundary_set

    def interior_vertices(self):
        return [v for v in range(self.n_vertices) if v not in self._boundary_set]

    # ------------------------------------------------------------------
    # construction helpers
    # ------------------------------------------------------------------
    def _trace_faces(self):
        n_he = self.n_half_edges
        self.prev_rot = np.empty(n_he, dtype=np.int64)
        self.prev_rot[self.next_rot] = np.arange(n_he)
        self._first_he = np.full(self.n_vertices, -1, dtype=np.int64)
        for h in range(n_he):
            v = self.origin[h]
            if self._first_he[v] < 0:
                self._first_he[v] = h

        face_of = np.full(n_he, -1, dtype=np.int64)
        faces = []
        for h0 in range(n_he):
            if face_of[h0] >= 0:
                continue
            cyc = []
            h = h0
            while face_of[h] < 0:
                face_of[h] = len(faces)
                cyc.append(h)
                h = self.next_in_face(h)
            if h != h0:
                raise GraphStructureError("face tracing did not close")
            faces.append(cyc)
        self.faces = faces
        self.face_of = face_of
        if self.outer_face < 0:
            # the unbounded face is the unique face traversed clockwise;
            # with scaffold positions pick it by signed area, else by size.
            self.outer_face = self._guess_outer_face()
        self._boundary_set = {int(self.origin[h]) for h in self.faces[self.outer_face]}

    def _guess_outer_face(self) -> int:
        if self.positions is not None:
            areas = []
            for cyc in self.faces:
                pts = [self.positions[self.origin[h]] for h in cyc]
                a = 0.0
                for i in range(len(pts)):
                    z1, z2 = pts[i], pts[(i + 1) % len(pts)]
                    a += z1.real * z2.imag - z2.real * z1.imag
                areas.append(a)
            return int(np.argmin(areas))
        return int(np.argmax([len(c) for c in self.faces]))

    # ------------------------------------------------------------------
    # validation
    # ------------------------------------------------------------------
    def validate(self):
        n_he = self.n_half_edges
        if n_he % 2:
            raise GraphStructureError("odd number of half-edges")
        if np.any(self.nu <= 0) or np.any(self.nu_dual <= 0):
            raise GraphStructureError("edge weights must be strictly positive")
        if len(self.nu) != self.n_edges or len(self.nu_dual) != self.n_edges:
            raise GraphStructureError("weight arrays must have one entry per edge")
        # rotation closes into a single cycle at every vertex
        seen = np.zeros(n_he, dtype=bool)
        for v in range(self.n_vertices):
            hs = self.half_edges_at(v)
            if not hs:
                raise GraphStructureError(f"isolated vertex {v}")
            for h in hs:
                if self.origin[h] != v or seen[h]:
                    raise GraphStructureError(f"rotation at vertex {v} is not a single cycle")
                seen[h] = True
        if not seen.all():
            raise GraphStructureError("rotation cycles do not cover all half-edges")
        # Euler relation for connected planar graphs, outer face included
        euler = self.n_vertices - self.n_edges + self.n_faces
        if euler != 2:
            raise GraphStructureError(f"Euler relation violated: V-E+F = {euler}")

    # ------------------------------------------------------------------
    # dual graph
    # ------------------------------------------------------------------
    def dual_graph(self) -> "RotationPlanarGraph":
        """Planar dual; dual vertex ids are this graph's face ids.

        Dual half-edge h has origin ``face_of[h]``; the pairing h <-> h^1 is
        reused, so edge e of the dual is the dual partner of edge e here and
        the outer face becomes an explicit dual vertex.  Weights swap roles.
        """
        n_he = self.n_half_edges
        origin = np.array([self.face_of[h] for h in range(n_he)], dtype=np.int64)
        next_rot = np.empty(n_he, dtype=np.int64)
        for h in range(n_he):
            next_rot[h] = self.next_in_face(h)
        centers = None
        if self.positions is not None:
            centers = np.zeros(self.n_faces, dtype=complex)
            for f, cyc in enumerate(self.faces):
                pts = [self.positions[self.origin[hh]] for hh in cyc]
                centers[f] = sum(pts) / len(pts)
        dual = RotationPlanarGraph(
            n_vertices=self.n_faces,
            origin=origin,
            next_rot=next_rot,
            nu=self.nu_dual.copy(),
            nu_dual=self.nu.copy(),
            outer_face=-1,
            positions=centers,
            meta={"dual_of": self.meta.get("name", "graph")},
        )
        # dual faces are the primal vertex stars; no canonical unbounded
        # face exists on the sphere, so the traced guess stands
        dual.dual_partner = self
        self.dual_partner = dual
        return dual

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------
    def to_json_dict(self) -> dict:
        return {
            "vertices": list(range(self.n_vertices)),
            "half_edges": [
                {"id": h, "origin": int(self.origin[h]), "twin": h ^ 1,
                 "next": int(self.next_rot[h])}
                for h in range(self.n_half_edges)
            ],
            "edge_weights": [
                {"edge": e, "nu": float(self.nu[e]), "nu_dual": float(self.nu_dual[e])}
                for e in range(self.n_edges)
            ],
            "marked_outer_face": int(self.outer_face),
        }

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)

    @staticmethod
    def from_json_dict(data: dict) -> "RotationPlanarGraph":
        hes = sorted(data["half_edges"], key=lambda d: d["id"])
        n_he = len(hes)
        origin = np.empty(n_he, dtype=np.int64)
        next_rot = np.empty(n_he, dtype=np.int64)
        for d in hes:
            h = d["id"]
            if d["twin"] != (h ^ 1):
                raise GraphStructureError("twin pairing must be h^1")
            origin[h] = d["origin"]
            next_rot[h] = d["next"]
        nu = np.ones(n_he // 2)
        nu_dual = np.ones(n_he // 2)
        for d in data.get("edge_weights", []):
            nu[d["edge"]] = d["nu"]
            nu_dual[d["edge"]] = d["nu_dual"]
        g = RotationPlanarGraph(
            n_vertices=len(data["vertices"]),
            origin=origin,
            next_rot=next_rot,
            nu=nu,
            nu_dual=nu_dual,
            outer_face=int(data.get("marked_outer_face", -1)),
        )
        return g

    @staticmethod
    def load_json(path) -> "RotationPlanarGraph":
        with open(path) as fh:
            return RotationPlanarGraph.from_json_dict(json.load(fh))


# ----------------------------------------------------------------------
# build from CCW face lists
# ----------------------------------------------------------------------
def from_faces(n_vertices, face_tuples, nu=None, nu_dual=None, positions=None,
               meta=None) -> RotationPlanarGraph:
    """Assemble a patch from counterclockwise face vertex tuples.

    Every interior face is given as its vertex cycle in CCW order; the
    rotation system is recovered by chaining, around each vertex, the
    corner links contributed by the faces, closing boundary fans through
    the outer gap.  The input must describe a simply-connected union of
    faces of a simple planar graph.
    """
    directed = {}   # (u, v) -> face index, interior on the left
    edges = {}      # frozenset -> edge id
    edge_list = []
    for fi, cyc in enumerate(face_tuples):
        k = len(cyc)
        for i in range(k):
            u, v = cyc[i], cyc[(i + 1) % k]
            if u == v:
                raise GraphStructureError("degenerate face edge")
            if (u, v) in directed:
                raise GraphStructureError(f"directed edge {(u, v)} claimed twice")
            directed[(u, v)] = fi
            key = (u, v) if u < v else (v, u)
            if key not in edges:
                edges[key] = len(edge_list)
                edge_list.append(key)

    n_e = len(edge_list)
    origin = np.empty(2 * n_e, dtype=np.int64)
    he_of = {}
    for e, (u, v) in enumerate(edge_list):
        origin[2 * e] = u
        origin[2 * e + 1] = v
        he_of[(u, v)] = 2 * e
        he_of[(v, u)] = 2 * e + 1

    # corner links: in face (.., a, v, b, ..) CCW the CCW-next edge after
    # (v -> b) around v is (v -> a).
    succ = {}
    for cyc in face_tuples:
        k = len(cyc)
        for i in range(k):
            a, v, b = cyc[(i - 1) % k], cyc[i], cyc[(i + 1) % k]
            h_from = he_of[(v, b)]
            h_to = he_of[(v, a)]
            if h_from in succ:
                raise GraphStructureError("conflicting rotation link")
            succ[h_from] = h_to

    # close boundary fans: at each vertex the links form either a full cycle
    # (interior) or a single path; join path end to path start.
    at_vertex = {}
    for h in range(2 * n_e):
        at_vertex.setdefault(int(origin[h]), []).append(h)
    next_rot = np.full(2 * n_e, -1, dtype=np.int64)
    for v, hs in at_vertex.items():
        outgoing = {h: succ[h] for h in hs if h in succ}
        targets = set(outgoing.values())
        starts = [h for h in hs if h not in targets]
        if len(starts) == 0:
            # full cycle already
            for h in hs:
                next_rot[h] = succ[h]
            continue
        if len(starts) != 1:
            raise GraphStructureError(
                f"faces around vertex {v} do not form a single fan")
        start = starts[0]
        ends = [h for h in hs if h not in outgoing]
        if len(ends) != 1:
            raise GraphStructureError(
                f"faces around vertex {v} do not form a single fan")
        for h in hs:
            next_rot[h] = succ.get(h, start)

    nu_arr = np.ones(n_e) if nu is None else _weight_array(nu, edges, n_e)
    nud_arr = np.ones(n_e) if nu_dual is None else _weight_array(nu_dual, edges, n_e)
    pos_arr = None
    if positions is not None:
        pos_arr = np.asarray(positions, dtype=complex)

    g = RotationPlanarGraph(
        n_vertices=n_vertices,
        origin=origin,
        next_rot=next_rot,
        nu=nu_arr,
        nu_dual=nud_arr,
        outer_face=-1,
        positions=pos_arr,
        meta=meta or {},
    )
    if g.n_faces != len(face_tuples) + 1:
        raise GraphStructureError(
            f"expected {len(face_tuples)} interior faces + outer, traced {g.n_faces}")
    # identify the outer face as the one not matching any input tuple length/set
    interior = _match_faces(g, face_tuples)
    matched = set(interior.values())
    outer = [f for f in range(g.n_faces) if f not in matched]
    if len(outer) != 1:
        raise GraphStructureError("could not identify a unique outer face")
    g.outer_face = outer[0]
    g._boundary_set = {int(g.origin[h]) for h in g.faces[g.outer_face]}
    g.meta.setdefault("face_input_order", [interior[i] for i in range(len(face_tuples))])
    return g


def _weight_array(w, edges, n_e):
    arr = np.ones(n_e)
    if isinstance(w, dict):
        for key, val in w.items():
            u, v = tuple(key)
            k = (u, v) if u < v else (v, u)
            arr[edges[k]] = val
    else:
        arr[:] = np.asarray(w, dtype=float)
    return arr


def _match_faces(g: RotationPlanarGraph, face_tuples):
    """Map input face index -> traced face id (by vertex cycle match)."""
    by_key = {}
    for f in range(g.n_faces):
        vs = g.face_vertices(f)
        by_key.setdefault(frozenset(vs), []).append(f)
    out = {}
    used = set()
    for i, cyc in enumerate(face_tuples):
        cands = [f for f in by_key.get(frozenset(cyc), []) if f not in used]
        ok = None
        for f in cands:
            if len(g.faces[f]) == len(cyc) and _cyclic_equal(g.face_vertices(f), list(cyc)):
                ok = f
                break
        if ok is None:
            raise GraphStructureError(f"input face {i} not traced back")
        used.add(ok)
        out[i] = ok
    return out


def _cyclic_equal(a, b):
    if len(a) != len(b):
        return False
    n = len(a)
    for s in range(n):
        if all(a[(s + i) % n] == b[i] for i in range(n)):
            return True
    return False


# ----------------------------------------------------------------------
# weighted multigraphs (wired/contracted computations)
# ----------------------------------------------------------------------
class Network:
    """Plain weighted multigraph used for walks, trees and flow projections.

    Edges are (u, v, conductance) triples; parallel edges allowed, loops
    dropped.  ``full_weight`` optionally records each vertex's weighted
    degree in a larger ambient graph (for absorbing-walk Laplacians).
    """

    def __init__(self, n_vertices, edges, full_weight=None, meta=None):
        self.n = int(n_vertices)
        self.edges = [(int(u), int(v), float(c)) for (u, v, c) in edges if u != v]
        for u, v, c in self.edges:
            if c <= 0:
                raise ValueError("conductances must be positive")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError("edge endpoint out of range")
        self.adj = [[] for _ in range(self.n)]
        for ei, (u, v, c) in enumerate(self.edges):
            self.adj[u].append((v, ei, c))
            self.adj[v].append((u, ei, c))
        self.full_weight = None if full_weight is None else np.asarray(full_weight, float)
        self.meta = meta or {}

    @property
    def n_edges(self):
        return len(self.edges)

    def weighted_degree(self, v):
        return sum(c for (_, _, c) in self.adj[v])

    def conductances(self):
        return np.array([c for (_, _, c) in self.edges])

    def is_connected(self):
        if self.n == 0:
            return True
        seen = np.zeros(self.n, bool)
        stack = [0]
        seen[0] = True
        while stack:
            u = stack.pop()
            for (v, _, _) in self.adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        return bool(seen.all())

    @staticmethod
    def from_rotation_graph(g: RotationPlanarGraph, conductance="primal") -> "Network":
        """conductance 'primal' -> nu/nu_dual per edge; 'dual' builds the
        dual-graph network with conductance nu_dual/nu."""
        if conductance == "primal":
            edges = [(g.origin[2 * e], g.origin[2 * e + 1], g.nu[e] / g.nu_dual[e])
                     for e in range(g.n_edges)]
            return Network(g.n_vertices, edges)
        if conductance == "dual":
            dual = g.dual_partner or g.dual_graph()
            edges = [(dual.origin[2 * e], dual.origin[2 * e + 1],
                      dual.nu[e] / dual.nu_dual[e]) for e in range(dual.n_edges)]
            return Network(dual.n_vertices, edges)
        raise ValueError(conductance)


# ----------------------------------------------------------------------
# rotation-preserving isomorphism (test helper but generally useful)
# ----------------------------------------------------------------------
def rotation_isomorphic(g1: RotationPlanarGraph, g2: RotationPlanarGraph) -> bool:
    """True if the two embedded graphs are isomorphic as rotation systems
    (orientation-preserving), trying every root flag of g2."""
    if (g1.n_vertices, g1.n_edges, g1.n_faces) != (g2.n_vertices, g2.n_edges, g2.n_faces):
        return False
    if g1.n_half_edges == 0:
        return True
    h1 = 0
    for h2 in range(g2.n_half_edges):
        if _flag_map_ok(g1, g2, h1, h2):
            return True
    return False


def _flag_map_ok(g1, g2, h1, h2):
    m = {h1: h2}
    stack = [h1]
    while stack:
        a = stack.pop()
        b = m[a]
        for fa, fb in ((a ^ 1, b ^ 1), (int(g1.next_rot[a]), int(g2.next_rot[b]))):
            if fa in m:
                if m[fa] != fb:
                    return False
            else:
                m[fa] = fb
                stack.append(fa)
    if len(m) != g1.n_half_edges:
        return False
    # vertex map consistency
    vmap = {}
    for a, b in m.items():
        va, vb = int(g1.origin[a]), int(g2.origin[b])
        if vmap.setdefault(va, vb) != vb:
            return False
    return True
