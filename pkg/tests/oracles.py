"""Independent oracles used by the test suite.

Everything here is deliberately written with different algorithms from
the package: combinatorial layer-by-layer tiling counts, brute-force
matching/tree enumeration, absorbing-chain Green functions, and scalar
bisection for regular packing radii.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


# ----------------------------------------------------------------------
# combinatorial {p,q} layer growth (vertex-closure; valid for q >= 5)
# ----------------------------------------------------------------------
def pq_layer_counts(p: int, q: int, depth: int):
    """(n_vertices, n_edges, n_interior_faces) of the depth-d patch.

    Grows the patch combinatorially: every boundary vertex in turn is
    closed to q faces by attaching new p-gons in its outer gap, keeping
    the boundary cycle live; each new face shares its first edge with the
    previous one in the fan and the last face reuses the edge to the next
    boundary vertex.  Duplicate vertices cannot arise because every slot
    references explicit ids.
    """
    if q < 5:
        raise ValueError("closure oracle requires q >= 5")
    faces = [tuple(range(p))]
    edges = set()
    fc = {}
    boundary = list(range(p))
    nxt = p

    def add_face(cyc):
        faces.append(tuple(cyc))
        for i in range(len(cyc)):
            e = frozenset((cyc[i], cyc[(i + 1) % len(cyc)]))
            assert len(e) == 2
            edges.add(e)
        for v in cyc:
            fc[v] = fc.get(v, 0) + 1

    for i in range(p):
        edges.add(frozenset((i, (i + 1) % p)))
        fc[i] = 1

    for _layer in range(depth):
        old = list(boundary)
        for v in old:
            i = boundary.index(v)
            nb = len(boundary)
            s_prev = boundary[(i - 1) % nb]
            s_next = boundary[(i + 1) % nb]
            m = q - fc[v]
            assert m >= 1, "vertex pinched; oracle limited to q >= 5"
            new_arc = []
            attach = s_prev
            for k in range(m):
                last = (k == m - 1)
                n_mid = (p - 3) if last else (p - 2)
                cyc = [v, attach] + [nxt + j for j in range(n_mid)]
                nxt += n_mid
                if last:
                    cyc.append(s_next)
                add_face(cyc)
                new_mids = cyc[2:len(cyc) - (1 if last else 0)]
                new_arc.extend(new_mids)
                if not last:
                    attach = cyc[-1]
            boundary = boundary[:i] + new_arc + boundary[i + 1:]
    return len(fc), len(edges), len(faces)


# ----------------------------------------------------------------------
# brute-force perfect matchings (recursion over black vertices)
# ----------------------------------------------------------------------
def enumerate_matchings_by_blacks(region):
    """All perfect matchings as (pairs dict, weight); branches over black
    vertices, unlike the package routine which branches over whites."""
    sg = region.sg
    blacks = list(region.blacks)
    cands = {}
    for b in blacks:
        cands[b] = []
    wts = {}
    for w in region.whites:
        nu, nud = sg.white_weights(w)
        for b in region.white_neighbors(w):
            cands[b].append(w)
            wts[(w, b)] = nu if sg.is_primal(b) else nud
    out = []
    used_w = set()
    assign = {}

    def rec(k):
        if k == len(blacks):
            weight = 1.0
            for b, w in assign.items():
                weight *= wts[(w, b)]
            out.append(({w: b for b, w in assign.items()}, weight))
            return
        b = blacks[k]
        for w in cands[b]:
            if w in used_w:
                continue
            used_w.add(w)
            assign[b] = w
            rec(k + 1)
            del assign[b]
            used_w.discard(w)

    rec(0)
    return out


def matching_joint_probability(matchings, edges):
    """P(all (w,b) edges present) from an explicit matching list."""
    z = sum(wt for _, wt in matchings)
    tot = 0.0
    for pairs, wt in matchings:
        if all(pairs.get(w) == b for (w, b) in edges):
            tot += wt
    return tot / z


# ----------------------------------------------------------------------
# spanning trees by exhaustive search, and the matrix-tree determinant
# ----------------------------------------------------------------------
def spanning_trees(net):
    """All spanning trees as edge-id tuples (for small networks)."""
    n, m = net.n, net.n_edges
    if n > 12 or m > 24:
        raise ValueError("enumeration oracle limited to tiny graphs")
    trees = []
    for subset in itertools.combinations(range(m), n - 1):
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        ok = True
        for e in subset:
            u, v, _ = net.edges[e]
            ru, rv = find(u), find(v)
            if ru == rv:
                ok = False
                break
            parent[ru] = rv
        if ok:
            trees.append(subset)
    return trees


def tree_weight(net, tree):
    w = 1.0
    for e in tree:
        w *= net.edges[e][2]
    return w


def tree_event_probability(net, edges, trees=None):
    """P(all edges in the weighted spanning tree), by enumeration."""
    trees = spanning_trees(net) if trees is None else trees
    z = sum(tree_weight(net, t) for t in trees)
    s = sum(tree_weight(net, t) for t in trees if set(edges) <= set(t))
    return s / z


def matrix_tree_weighted_count(net, root=0):
    """Weighted spanning-tree count via the reduced Laplacian determinant."""
    n = net.n
    lap = np.zeros((n, n))
    for (u, v, c) in net.edges:
        lap[u, u] += c
        lap[v, v] += c
        lap[u, v] -= c
        lap[v, u] -= c
    keep = [v for v in range(n) if v != root]
    return float(np.linalg.det(lap[np.ix_(keep, keep)]))


# ----------------------------------------------------------------------
# absorbing-chain Green function
# ----------------------------------------------------------------------
def absorbing_green(transition_q):
    """Expected visit counts (I - Q)^-1 for the substochastic block Q."""
    q = np.asarray(transition_q, float)
    return np.linalg.inv(np.eye(q.shape[0]) - q)


def walk_green_dirichlet(lap_matrix, degrees):
    """Green table of the killed walk from its transition probabilities,
    independent of the Laplacian-inverse route."""
    n = lap_matrix.shape[0]
    q = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                q[i, j] = -lap_matrix[i, j] / degrees[i]
    return absorbing_green(q)


# ----------------------------------------------------------------------
# regular {p,q} right-kite radii by scalar bisection
# ----------------------------------------------------------------------
def regular_kite_radii_bisection(p, q, iters=200):
    """Solve the coupled regular angle conditions for the hyperbolic
    vertex/face radius pair by bisection on the vertex radius: the vertex
    kite half-angle must be pi/q and the face one pi/p.  The face radius
    exists only while sinh(rv) tan(pi/q) < 1, which brackets the root."""

    def face_radius_for(rv):
        return math.atanh(math.sinh(rv) * math.tan(math.pi / q))

    def mismatch(rv):
        return math.atan2(math.tanh(rv), math.sinh(face_radius_for(rv))) - math.pi / p

    a = 1e-12
    b = math.asinh(1.0 / math.tan(math.pi / q)) * (1.0 - 1e-12)
    fa = mismatch(a)
    assert fa > 0 > mismatch(b), "root not bracketed (is {p,q} hyperbolic?)"
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if (mismatch(mid) > 0) == (fa > 0):
            a = mid
        else:
            b = mid
    rv = 0.5 * (a + b)
    return rv, face_radius_for(rv)


# ----------------------------------------------------------------------
# misc
# ----------------------------------------------------------------------
def circumcircle_residual(pts):
    """Distance spread of four points from their best-fit circle through
    the first three; zero iff concyclic."""
    z1, z2, z3, z4 = pts
    ax, ay = z1.real, z1.imag
    bx, by = z2.real, z2.imag
    cx, cy = z3.real, z3.imag
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    ux = ((ax ** 2 + ay ** 2) * (by - cy) + (bx ** 2 + by ** 2) * (cy - ay)
          + (cx ** 2 + cy ** 2) * (ay - by)) / d
    uy = ((ax ** 2 + ay ** 2) * (cx - bx) + (bx ** 2 + by ** 2) * (ax - cx)
          + (cx ** 2 + cy ** 2) * (bx - ax)) / d
    c = complex(ux, uy)
    r = abs(z1 - c)
    return abs(abs(z4 - c) - r)


def grid_ball_vertex_count(r):
    """Vertices of the concentric face-ball of radius r in a large grid."""
    return (2 * r + 2) ** 2
