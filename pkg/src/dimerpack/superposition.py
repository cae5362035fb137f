"""Superposition bipartite graphs and boundary constructions.

Black vertices are the patch's vertices plus its interior faces; white
vertices are its edges, placed at the circle tangency points.  Every face
of the superposition is a quadrilateral (vertex, white, face, white).

Two boundary conditions are provided: removing one boundary primal vertex
(after which matchings biject with spanning trees), and the two-convex-
corner regions obtained by superposing a sub-patch with its enlarged dual
ring and deleting a dual boundary arc.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .halfedge import RotationPlanarGraph
from .packing import DoubleCirclePacking

__all__ = [
    "SuperpositionGraph", "Region", "BoundaryProfile",
    "superpose", "temperley_trim", "two_corner_region", "classify_corners",
]


class RegionError(ValueError):
    pass


@dataclass
class SuperpositionGraph:
    graph: RotationPlanarGraph
    packing: DoubleCirclePacking
    n_primal: int
    face_black: dict            # interior face id -> black id
    black_face: dict            # black id -> interior face id
    black_pos: np.ndarray       # complex positions (Euclidean chart)
    white_pos: np.ndarray       # tangency points, one per edge
    quads: list                 # (w1, b_v, w2, b_f) per (vertex, face) incidence
    white_adj: list             # white -> list of adjacent black ids

    @property
    def n_black(self) -> int:
        return len(self.black_pos)

    @property
    def n_white(self) -> int:
        return len(self.white_pos)

    def primal_black(self, v: int) -> int:
        return v

    def is_primal(self, b: int) -> bool:
        return b < self.n_primal

    def white_endpoints(self, w: int):
        """(primal endpoints, interior dual endpoints) of white w."""
        g = self.graph
        u, v = g.edge_endpoints(w)
        f1, f2 = g.edge_faces(w)
        duals = [self.face_black[f] for f in (f1, f2) if f in self.face_black]
        return (u, v), duals

    def white_weights(self, w: int):
        """(nu, nu_dual) of the edge carried by white w."""
        return float(self.graph.nu[w]), float(self.graph.nu_dual[w])

    def quads_at_white(self, w: int):
        return [q for q in self.quads if q[0] == w or q[2] == w]

    def to_json_dict(self) -> dict:
        """Bipartite structure with embedded coordinates."""
        return {
            "n_primal": self.n_primal,
            "blacks": [
                {"id": b,
                 "kind": "vertex" if self.is_primal(b) else "face",
                 "ref": b if self.is_primal(b) else self.black_face[b],
                 "pos": [self.black_pos[b].real, self.black_pos[b].imag]}
                for b in range(self.n_black)
            ],
            "whites": [
                {"id": w, "edge": w, "adj": list(self.white_adj[w]),
                 "pos": [self.white_pos[w].real, self.white_pos[w].imag],
                 "nu": self.white_weights(w)[0], "nu_dual": self.white_weights(w)[1]}
                for w in range(self.n_white)
            ],
            "quads": [list(q) for q in self.quads],
        }


def superpose(g: RotationPlanarGraph, p: DoubleCirclePacking) -> SuperpositionGraph:
    """Build the superposition of a patch and its interior dual."""
    if p.graph is not g:
        raise RegionError("packing was computed for a different graph")
    rep = p.certified or p.certify()
    if not rep.passed:
        raise RegionError(
            f"packing does not certify at tol {rep.tol:.1e}: {rep.residuals}")
    n_v = g.n_vertices
    interior = [f for f in range(g.n_faces) if f != g.outer_face]
    face_black = {f: n_v + i for i, f in enumerate(interior)}
    black_face = {b: f for f, b in face_black.items()}
    black_pos = np.concatenate([p.vc_euclid, p.fc_euclid[interior]])
    white_pos = p.tangency.copy()

    quads = []
    for v in range(n_v):
        for h in g.half_edges_at(v):
            f = int(g.face_of[h])
            if f == g.outer_face:
                continue
            w1 = g.edge_of(h)
            w2 = g.edge_of(int(g.next_rot[h]))
            quads.append((w1, v, w2, face_black[f]))

    white_adj = []
    for w in range(g.n_edges):
        u, v = g.edge_endpoints(w)
        f1, f2 = g.edge_faces(w)
        adj = [u, v] + [face_black[f] for f in (f1, f2) if f in face_black]
        white_adj.append(adj)

    return SuperpositionGraph(
        graph=g, packing=p, n_primal=n_v, face_black=face_black,
        black_face=black_face, black_pos=black_pos, white_pos=white_pos,
        quads=quads, white_adj=white_adj,
    )


# ----------------------------------------------------------------------
# regions
# ----------------------------------------------------------------------
@dataclass
class Region:
    """An induced bipartite subgraph of a superposition graph."""
    sg: SuperpositionGraph
    whites: list
    blacks: list
    name: str = "region"
    removed_black: int | None = None     # the trimmed boundary vertex, if any
    meta: dict = field(default_factory=dict)
    _wi: dict = field(default_factory=dict)
    _bi: dict = field(default_factory=dict)

    def __post_init__(self):
        self.whites = sorted(int(w) for w in self.whites)
        self.blacks = sorted(int(b) for b in self.blacks)
        self._wi = {w: i for i, w in enumerate(self.whites)}
        self._bi = {b: i for i, b in enumerate(self.blacks)}

    @property
    def n_white(self):
        return len(self.whites)

    @property
    def n_black(self):
        return len(self.blacks)

    def is_balanced(self) -> bool:
        return self.n_white == self.n_black

    def white_index(self, w):
        return self._wi[w]

    def black_index(self, b):
        return self._bi[b]

    def has_white(self, w):
        return w in self._wi

    def has_black(self, b):
        return b in self._bi

    def white_neighbors(self, w):
        return [b for b in self.sg.white_adj[w] if b in self._bi]

    def edges(self):
        """All (white, black) adjacencies inside the region."""
        out = []
        for w in self.whites:
            for b in self.white_neighbors(w):
                out.append((w, b))
        return out

    def quads_inside(self):
        out = []
        for (w1, bv, w2, bf) in self.sg.quads:
            if (w1 in self._wi and w2 in self._wi and
                    bv in self._bi and bf in self._bi):
                out.append((w1, bv, w2, bf))
        return out

    def restrict(self, drop_whites=(), drop_blacks=(), name=None) -> "Region":
        dw, db = set(drop_whites), set(drop_blacks)
        return Region(
            sg=self.sg,
            whites=[w for w in self.whites if w not in dw],
            blacks=[b for b in self.blacks if b not in db],
            name=name or self.name + "-restricted",
            removed_black=self.removed_black,
            meta=dict(self.meta),
        )


@dataclass
class BoundaryProfile:
    labels: dict                      # white -> 'convex' | 'concave' | 'flat'
    removed_black: int | None = None
    corner_pair: tuple | None = None
    deleted_arc: list = field(default_factory=list)

    @property
    def convex(self):
        return sorted(w for w, s in self.labels.items() if s == "convex")

    @property
    def concave(self):
        return sorted(w for w, s in self.labels.items() if s == "concave")


def temperley_trim(sg: SuperpositionGraph, b0: int | None = None) -> Region:
    """Region with one boundary primal vertex removed.

    Defaults to the boundary vertex of largest id.  The result has as many
    whites as blacks; an imbalance signals a malformed patch.
    """
    g = sg.graph
    boundary = set(g.boundary_vertices())
    if b0 is None:
        b0 = max(boundary)
    b0 = int(b0)
    if b0 >= sg.n_primal or b0 not in boundary:
        raise RegionError(f"vertex {b0} is not a boundary primal vertex")
    blacks = [b for b in range(sg.n_black) if b != b0]
    region = Region(sg=sg, whites=list(range(sg.n_white)), blacks=blacks,
                    name=f"temperley-b{b0}", removed_black=b0)
    if not region.is_balanced():
        raise RegionError(
            f"trimmed region unbalanced: {region.n_white} whites, "
            f"{region.n_black} blacks")
    return region


def classify_corners(region: Region) -> BoundaryProfile:
    """Label every boundary white vertex of the region.

    A white with exactly one region quad is a convex corner; a concave
    corner has some quad with three of its four corners in the region,
    the opposite white missing.  Whites with all four quads present are
    interior and carry no label.
    """
    sg = region.sg
    labels = {}
    present_count = {w: 0 for w in region.whites}
    for (w1, bv, w2, bf) in region.quads_inside():
        present_count[w1] += 1
        present_count[w2] += 1
    for w in region.whites:
        cnt = present_count[w]
        concave = False
        for (w1, bv, w2, bf) in sg.quads_at_white(w):
            other = w2 if w1 == w else w1
            if (region.has_black(bv) and region.has_black(bf)
                    and not region.has_white(other)):
                concave = True
        if concave:
            labels[w] = "concave"
        elif cnt == 1:
            labels[w] = "convex"
        elif cnt < 4:
            labels[w] = "flat"
    return BoundaryProfile(labels=labels, removed_black=region.removed_black)


# ----------------------------------------------------------------------
# two-convex-corner construction
# ----------------------------------------------------------------------
def two_corner_region(sg: SuperpositionGraph, sub_faces, v1: int, v2: int,
                      side_vertex: int | None = None) -> tuple[Region, BoundaryProfile]:
    """Region with exactly two convex white corners and none concave.

    sub_faces: interior faces of the ambient graph forming a simply
    connected sub-patch; v1, v2: two vertices on its boundary cycle.  The
    region superposes the sub-patch with the ring of ambient faces
    touching it and deletes the maximal ring arc whose contact with the
    sub-patch lies inside the boundary arc from v1 to v2 (the side
    containing side_vertex; shorter side by default), keeping the two
    extreme faces of that arc as the corners' dual anchors.
    """
    g = sg.graph
    sub_faces = set(int(f) for f in sub_faces)
    if g.outer_face in sub_faces:
        raise RegionError("sub-patch cannot contain the outer face")
    v_sub = set()
    for f in sub_faces:
        v_sub.update(g.face_vertices(f))

    # enlarged dual: every interior face touching the sub-patch
    hat = set()
    for f in range(g.n_faces):
        if f == g.outer_face:
            continue
        if any(v in v_sub for v in g.face_vertices(f)):
            hat.add(f)
    ring = sorted(hat - sub_faces)
    # whites: edges interior to the union of hat faces
    whites = [e for e in range(g.n_edges)
              if g.edge_faces(e)[0] in hat and g.edge_faces(e)[1] in hat]
    # sanity: interior vertices of the hat union must be exactly v_sub,
    # otherwise the white/black counts cannot balance
    v_int = {v for v in range(g.n_vertices)
             if all(int(g.face_of[h]) in hat for h in g.half_edges_at(v))}
    if v_int != v_sub:
        raise RegionError("enlarged dual ring pinches; choose a rounder sub-patch")

    cycle = _boundary_cycle(g, sub_faces)
    if v1 == v2 or v1 not in cycle or v2 not in cycle:
        raise RegionError("corners must be two distinct sub-patch boundary vertices")
    arc1 = _arc_between(cycle, v1, v2, side_vertex)

    ring_order = _ring_cycle(g, ring)
    contact = {f: set(g.face_vertices(f)) & v_sub for f in ring}
    closed_arc = set(arc1) | {v1, v2}
    candidate = [f for f in ring_order if contact[f] <= closed_arc]
    run = _cyclic_run(ring_order, candidate)
    if len(run) < 3:
        raise RegionError("arc too short: need at least one removable ring face")
    if v1 in contact[run[0]] and v2 in contact[run[-1]]:
        pass
    elif v2 in contact[run[0]] and v1 in contact[run[-1]]:
        run = run[::-1]
    else:
        raise RegionError("arc extremes do not anchor at the chosen corners")
    removed = run[1:-1]

    # whites strictly inside the removed arc: edges between consecutive
    # removed ring faces
    removed_whites = []
    for fa, fb in zip(run[1:-2], run[2:-1]):
        shared = [e for e in whites if set(g.edge_faces(e)) == {fa, fb}]
        if len(shared) != 1:
            raise RegionError("consecutive ring faces must share one edge")
        removed_whites.append(shared[0])

    blacks = sorted(v_sub) + [sg.face_black[f] for f in sorted(hat - set(removed))]
    region = Region(
        sg=sg,
        whites=[w for w in whites if w not in set(removed_whites)],
        blacks=blacks,
        name=f"two-corner-{v1}-{v2}",
        meta={"v1": v1, "v2": v2, "v1_dual": run[0], "v2_dual": run[-1],
              "removed_faces": removed, "sub_faces": sorted(sub_faces)},
    )
    if not region.is_balanced():
        raise RegionError(
            f"two-corner region unbalanced: {region.n_white} whites, "
            f"{region.n_black} blacks")
    profile = classify_corners(region)
    profile.corner_pair = (v1, v2)
    profile.deleted_arc = removed
    if len(profile.convex) != 2 or profile.concave:
        raise RegionError(
            f"corner classification failed: convex={profile.convex}, "
            f"concave={profile.concave}")
    return region, profile


def _boundary_cycle(g: RotationPlanarGraph, faces: set):
    """Vertices of the face-union boundary, in cyclic order."""
    boundary_he = []
    for f in faces:
        for h in g.faces[f]:
            if int(g.face_of[h ^ 1]) not in faces:
                boundary_he.append(h)
    nxt = {}
    for h in boundary_he:
        nxt[int(g.origin[h])] = h
    cyc = []
    h = boundary_he[0]
    start = int(g.origin[h])
    v = start
    while True:
        cyc.append(v)
        v = g.target(nxt[v])
        if v == start:
            break
        if len(cyc) > len(boundary_he):
            raise RegionError("sub-patch boundary is not a simple cycle")
    return cyc


def _arc_between(cycle, v1, v2, side_vertex):
    i1, i2 = cycle.index(v1), cycle.index(v2)
    n = len(cycle)
    fwd = [cycle[(i1 + k) % n] for k in range(1, (i2 - i1) % n)]
    bwd = [cycle[(i2 + k) % n] for k in range(1, (i1 - i2) % n)]
    if side_vertex is not None:
        if side_vertex in fwd:
            return fwd
        if side_vertex in bwd:
            return bwd
        raise RegionError("side_vertex is not on either boundary arc")
    return fwd if len(fwd) <= len(bwd) else bwd


def _ring_cycle(g: RotationPlanarGraph, ring):
    ring_set = set(ring)
    adj = {f: [] for f in ring}
    for f in ring:
        for h in g.faces[f]:
            nb = int(g.face_of[h ^ 1])
            if nb in ring_set and nb != f:
                adj[f].append(nb)
    order = [ring[0]]
    if len(set(adj[ring[0]])) != 2:
        raise RegionError("dual ring is not a simple cycle")
    prev, cur = None, ring[0]
    while True:
        nbrs = [x for x in adj[cur] if x != prev]
        nxt = nbrs[0]
        if nxt == order[0]:
            break
        order.append(nxt)
        prev, cur = cur, nxt
        if len(order) > len(ring):
            raise RegionError("dual ring is not a simple cycle")
    if len(order) != len(ring):
        raise RegionError("dual ring is not a single cycle")
    return order


def _cyclic_run(order, members):
    """The members as one contiguous run of the cyclic order."""
    mem = set(members)
    n = len(order)
    in_run = [f in mem for f in order]
    if all(in_run):
        raise RegionError("arc removal would consume the entire dual ring")
    # rotate so the run does not wrap
    start = next(i for i in range(n) if not in_run[i])
    rot = order[start:] + order[:start]
    runs = []
    cur = []
    for f in rot:
        if f in mem:
            cur.append(f)
        elif cur:
            runs.append(cur)
            cur = []
    if cur:
        runs.append(cur)
    if len(runs) != 1:
        raise RegionError("candidate ring arc is not contiguous")
    return runs[0]
