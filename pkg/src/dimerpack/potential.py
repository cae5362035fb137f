"""Discrete potential theory: Laplacians, Green functions, flow projections.

The central exact identity: for a trimmed region the normalized adjacency
matrix factors through two Laplacians, so its inverse can be recomputed
from random-walk Green functions; `inverse_dirac_via_green` rebuilds the
full inverse that way, entry for entry, for cross-checking against direct
factorization.

Antisymmetric edge functions are stored as one real value per network
edge in its stored orientation (u -> v for an edge triple (u, v, c)); the
reversed value is implied.  The inner product is sum R(e) a(e) b(e) with
R = 1/conductance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .halfedge import Network, RotationPlanarGraph
from .lattice import contract_vertices
from .superposition import Region

__all__ = [
    "LaplacianOperator", "GreenTable",
    "dual_dirichlet_laplacian", "primal_dirichlet_laplacian",
    "neumann_laplacian", "free_laplacian",
    "dirichlet_green", "neumann_green",
    "inverse_dirac_via_green",
    "incidence_matrix", "weighted_laplacian", "gradient", "divergence",
    "star_project", "cycle_project", "fundamental_cycles",
    "transfer_current", "tree_cylinder_prob", "mixed_boundary_forest",
    "added_edge_current", "harmonic_decompose",
    "spectral_radius_estimate", "isoperimetric_scan", "green_decay_fit",
    "projection_correlation_bound",
]


# ----------------------------------------------------------------------
# Laplacian flavors
# ----------------------------------------------------------------------
@dataclass
class LaplacianOperator:
    flavor: str                 # 'dirichlet' | 'neumann' | 'free'
    matrix: np.ndarray          # dense symmetric
    labels: list                # row labels (vertex or face ids)
    degree: np.ndarray          # the normalizing weighted degree per row
    root: int | None = None    # removed root label (neumann)
    _index: dict = field(default_factory=dict)

    def __post_init__(self):
        self._index = {lab: i for i, lab in enumerate(self.labels)}

    def index(self, label):
        return self._index[label]


def dual_dirichlet_laplacian(g: RotationPlanarGraph) -> LaplacianOperator:
    """Laplacian of the interior dual with absorption outside the patch.

    Row f: diagonal is the full dual weighted degree (over all bounding
    edges of the face), off-diagonal -nu_dual/nu for interior neighbors.
    Positive definite.
    """
    faces = [f for f in range(g.n_faces) if f != g.outer_face]
    idx = {f: i for i, f in enumerate(faces)}
    n = len(faces)
    m = np.zeros((n, n))
    deg = np.zeros(n)
    for f in faces:
        i = idx[f]
        for h in g.faces[f]:
            e = g.edge_of(h)
            c = g.nu_dual[e] / g.nu[e]
            deg[i] += c
            nb = int(g.face_of[h ^ 1])
            if nb in idx:
                m[i, idx[nb]] -= c
        m[i, i] = deg[i]
    return LaplacianOperator("dirichlet", m, faces, deg)


def primal_dirichlet_laplacian(parent: RotationPlanarGraph, vertex_subset,
                               full_degree=None) -> LaplacianOperator:
    """Laplacian of an induced vertex set with absorption in the rest of
    the parent graph: full parent degrees on the diagonal.

    When the subset reaches the parent's own boundary, the parent degree
    undercounts the ambient tiling; pass `full_degree` (a scalar or a map
    vertex -> weighted degree) to prescribe the intended diagonal, e.g.
    q * nu/nu_dual for a constant-weight {p,q} patch.
    """
    vs = sorted(int(v) for v in vertex_subset)
    idx = {v: i for i, v in enumerate(vs)}
    n = len(vs)
    m = np.zeros((n, n))
    deg = np.zeros(n)
    for v in vs:
        i = idx[v]
        within = 0.0
        for h in parent.half_edges_at(v):
            e = parent.edge_of(h)
            c = parent.nu[e] / parent.nu_dual[e]
            within += c
            u = parent.target(h)
            if u in idx:
                m[i, idx[u]] -= c
        if full_degree is None:
            deg[i] = within
        elif np.isscalar(full_degree):
            deg[i] = float(full_degree)
        else:
            deg[i] = float(full_degree[v])
        if deg[i] < within - 1e-12:
            raise ValueError(f"full degree at vertex {v} below its patch degree")
        m[i, i] = deg[i]
    return LaplacianOperator("dirichlet", m, vs, deg)


def neumann_laplacian(g: RotationPlanarGraph, root: int) -> LaplacianOperator:
    """Graph Laplacian of the patch with the root row/column removed;
    diagonal entries are within-patch weighted degrees."""
    vs = [v for v in range(g.n_vertices) if v != int(root)]
    idx = {v: i for i, v in enumerate(vs)}
    n = len(vs)
    m = np.zeros((n, n))
    deg = np.zeros(n)
    for v in vs:
        i = idx[v]
        for h in g.half_edges_at(v):
            e = g.edge_of(h)
            c = g.nu[e] / g.nu_dual[e]
            deg[i] += c
            u = g.target(h)
            if u in idx:
                m[i, idx[u]] -= c
        m[i, i] = deg[i]
    return LaplacianOperator("neumann", m, vs, deg, root=int(root))


def free_laplacian(net: Network) -> LaplacianOperator:
    m = weighted_laplacian(net)
    deg = np.array([net.weighted_degree(v) for v in range(net.n)])
    return LaplacianOperator("free", m, list(range(net.n)), deg)


# ----------------------------------------------------------------------
# Green functions
# ----------------------------------------------------------------------
@dataclass
class GreenTable:
    flavor: str
    labels: list
    values: np.ndarray        # G(u, v): expected visits to v started at u
    normalized: np.ndarray    # F^v(u) = G(u, v) / degree(v) = Laplacian inverse
    degree: np.ndarray
    root: int | None = None
    _index: dict = field(default_factory=dict)

    def __post_init__(self):
        self._index = {lab: i for i, lab in enumerate(self.labels)}

    def value(self, u, v) -> float:
        iu = self._index.get(u)
        iv = self._index.get(v)
        if iu is None or iv is None:
            return 0.0
        return float(self.values[iu, iv])

    def f_value(self, u, v) -> float:
        iu = self._index.get(u)
        iv = self._index.get(v)
        if iu is None or iv is None:
            return 0.0
        return float(self.normalized[iu, iv])

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("u,v,green,normalized\n")
            for i, u in enumerate(self.labels):
                for j, v in enumerate(self.labels):
                    fh.write(f"{u},{v},{self.values[i, j]!r},"
                             f"{self.normalized[i, j]!r}\n")


def dirichlet_green(lap: LaplacianOperator) -> GreenTable:
    """Expected-visit table of the absorbed walk: G = L^-1 diag(degree)."""
    if lap.flavor != "dirichlet":
        raise ValueError("need a dirichlet-flavor Laplacian")
    inv = _spd_inverse(lap.matrix)
    return GreenTable("dirichlet", lap.labels, inv * lap.degree[None, :],
                      inv, lap.degree)


def neumann_green(lap: LaplacianOperator) -> GreenTable:
    """Expected visits before hitting the root; zero at the root."""
    if lap.flavor != "neumann":
        raise ValueError("need a neumann-flavor Laplacian")
    inv = _spd_inverse(lap.matrix)
    return GreenTable("neumann", lap.labels, inv * lap.degree[None, :],
                      inv, lap.degree, root=lap.root)


def _spd_inverse(m):
    try:
        c, low = scipy.linalg.cho_factor(m)
        return scipy.linalg.cho_solve((c, low), np.eye(m.shape[0]))
    except scipy.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"Laplacian not positive definite: {exc}")


# ----------------------------------------------------------------------
# inverse adjacency matrix from Green functions
# ----------------------------------------------------------------------
def inverse_dirac_via_green(region: Region) -> np.ndarray:
    """The inverse of the region's normalized adjacency matrix, rebuilt
    from the primal rooted Green function and the dual absorbed Green
    function.  Rows follow region.blacks, columns region.whites.

    For a white on the edge (u, v) with dual pair (f1, f2): the column's
    primal entries are (F_N(b,u) - F_N(b,v)) / zeta * sqrt(nu/nu_dual)
    with zeta the unit chart vector from the white toward u, and dual
    entries (F_D(b,f1) - F_D(b,f2)) / xi * sqrt(nu_dual/nu) with xi
    pointing from the white toward f1; absent sources contribute zero.
    """
    sg = region.sg
    g = sg.graph
    b0 = region.removed_black
    if b0 is None or not sg.is_primal(b0):
        raise ValueError("green-function inversion needs a trimmed region")
    lap_n = neumann_laplacian(g, b0)
    gn = neumann_green(lap_n)
    lap_d = dual_dirichlet_laplacian(g)
    gd = dirichlet_green(lap_d)

    out = np.zeros((region.n_black, region.n_white), dtype=complex)
    for w in region.whites:
        wj = region.white_index(w)
        (u, v), duals = sg.white_endpoints(w)
        nu, nud = sg.white_weights(w)
        pw = sg.white_pos[w]
        # primal side
        zeta = sg.black_pos[u] - pw
        zeta /= abs(zeta)
        scale = math.sqrt(nu / nud) / zeta
        for b in region.blacks:
            if not sg.is_primal(b):
                continue
            if b == b0:
                continue
            val = gn.f_value(b, u) - gn.f_value(b, v)
            out[region.black_index(b), wj] = scale * val
        # dual side
        f1f2 = [sg.black_face[f] for f in duals]   # face ids
        if f1f2:
            f1 = f1f2[0]
            xi = sg.black_pos[duals[0]] - pw
            xi /= abs(xi)
            f2 = f1f2[1] if len(f1f2) > 1 else None
            scale_d = math.sqrt(nud / nu) / xi
            for b in region.blacks:
                if sg.is_primal(b):
                    continue
                fb = sg.black_face[b]
                val = gd.f_value(fb, f1) - (gd.f_value(fb, f2) if f2 is not None else 0.0)
                out[region.black_index(b), wj] = scale_d * val
    return out


# ----------------------------------------------------------------------
# antisymmetric edge functions on networks
# ----------------------------------------------------------------------
def incidence_matrix(net: Network) -> np.ndarray:
    """B[v, e] = +1 at the head, -1 at the tail of the stored orientation."""
    b = np.zeros((net.n, net.n_edges))
    for e, (u, v, _) in enumerate(net.edges):
        b[u, e] -= 1.0
        b[v, e] += 1.0
    return b


def weighted_laplacian(net: Network) -> np.ndarray:
    b = incidence_matrix(net)
    return (b * net.conductances()[None, :]) @ b.T


def gradient(net: Network, f) -> np.ndarray:
    """grad f(e) = C(e) (f(head) - f(tail))."""
    f = np.asarray(f, float)
    out = np.empty(net.n_edges)
    for e, (u, v, c) in enumerate(net.edges):
        out[e] = c * (f[v] - f[u])
    return out


def divergence(net: Network, theta) -> np.ndarray:
    """div theta(v) = (1/C_v) sum over edges leaving v of theta."""
    theta = np.asarray(theta, float)
    out = np.zeros(net.n)
    for e, (u, v, _) in enumerate(net.edges):
        out[u] += theta[e]
        out[v] -= theta[e]
    cv = np.array([net.weighted_degree(x) for x in range(net.n)])
    return out / cv


def _lap_solve(net: Network, rhs: np.ndarray) -> np.ndarray:
    """Solve L f = rhs with f[0] = 0 (grounded node), cached factorization."""
    fac = net.meta.get("_lap_chol")
    if fac is None:
        l = weighted_laplacian(net)
        fac = scipy.linalg.cho_factor(l[1:, 1:])
        net.meta["_lap_chol"] = fac
    f = np.zeros(net.n)
    f[1:] = scipy.linalg.cho_solve(fac, rhs[1:])
    return f


def star_project(net: Network, theta) -> np.ndarray:
    """R-orthogonal projection onto gradients of vertex functions."""
    theta = np.asarray(theta, float)
    b = incidence_matrix(net)
    f = _lap_solve(net, b @ theta)
    return gradient(net, f)


def fundamental_cycles(net: Network):
    """Cycle basis vectors from the deterministic breadth-first tree at 0."""
    parent_edge = np.full(net.n, -1, np.int64)
    parent_sign = np.zeros(net.n)
    order = []
    seen = np.zeros(net.n, bool)
    seen[0] = True
    queue = [0]
    tree_edges = set()
    while queue:
        u = queue.pop(0)
        order.append(u)
        for (v, ei, _) in net.adj[u]:
            if not seen[v]:
                seen[v] = True
                parent_edge[v] = ei
                eu, ev, _c = net.edges[ei]
                parent_sign[v] = 1.0 if ev == v else -1.0
                tree_edges.add(ei)
                queue.append(v)
    basis = []
    for ei, (u, v, _) in enumerate(net.edges):
        if ei in tree_edges:
            continue
        z = np.zeros(net.n_edges)
        z[ei] = 1.0
        # close with the tree path v -> root -> u
        path_u = _tree_path(net, parent_edge, parent_sign, u)
        path_v = _tree_path(net, parent_edge, parent_sign, v)
        z += path_u - path_v
        basis.append(z)
    return basis


def _tree_path(net, parent_edge, parent_sign, x):
    """Edge vector of the tree path from x to the root, oriented toward x."""
    z = np.zeros(net.n_edges)
    while parent_edge[x] >= 0:
        ei = int(parent_edge[x])
        z[ei] += parent_sign[x]
        u, v, _ = net.edges[ei]
        x = u if v == x else v
    return z


def cycle_project(net: Network, theta) -> np.ndarray:
    """R-orthogonal projection onto the span of oriented cycles, via
    normal equations over the fundamental cycle basis."""
    theta = np.asarray(theta, float)
    basis = net.meta.get("_cycle_basis")
    if basis is None:
        basis = fundamental_cycles(net)
        net.meta["_cycle_basis"] = basis
    if not basis:
        return np.zeros_like(theta)
    r = 1.0 / net.conductances()
    z = np.array(basis)
    gram = (z * r[None, :]) @ z.T
    rhs = z @ (r * theta)
    coef = np.linalg.solve(gram, rhs)
    return z.T @ coef


def chi(net: Network, e: int) -> np.ndarray:
    out = np.zeros(net.n_edges)
    out[int(e)] = 1.0
    return out


def flow_inner(net: Network, a, b) -> float:
    r = 1.0 / net.conductances()
    return float(np.sum(r * np.asarray(a) * np.asarray(b)))


# ----------------------------------------------------------------------
# transfer currents and spanning-forest marginals
# ----------------------------------------------------------------------
def transfer_current(net: Network, e: int, f: int | None = None):
    """Unit current of edge e (star projection of its indicator); the
    (e,f) value is the expected signed use of f by the e-current."""
    i_e = star_project(net, chi(net, e))
    if f is None:
        return i_e
    return float(i_e[int(f)])


def tree_cylinder_prob(net: Network, edge_ids) -> float:
    """P(all given edges in the weighted spanning tree) as the transfer
    current determinant; exactly 0 when the edges contain a cycle."""
    edge_ids = [int(e) for e in edge_ids]
    if len(set(edge_ids)) < len(edge_ids):
        raise ValueError("edges must be distinct")
    if _contains_cycle(net, edge_ids):
        return 0.0
    k = len(edge_ids)
    y = np.empty((k, k))
    for i, e in enumerate(edge_ids):
        i_e = star_project(net, chi(net, e))
        for j, f in enumerate(edge_ids):
            y[i, j] = i_e[f]
    return float(np.linalg.det(y))


def _contains_cycle(net, edge_ids) -> bool:
    parent = list(range(net.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in edge_ids:
        u, v, _ = net.edges[e]
        ru, rv = find(u), find(v)
        if ru == rv:
            return True
        parent[ru] = rv
    return False


def mixed_boundary_forest(g: RotationPlanarGraph | Network, wired_set) -> dict:
    """Edge marginals of the spanning-tree measure with the given vertex
    set contracted (wired); empty set = free boundary.  Keys are the
    original edge indices of surviving edges."""
    net = Network.from_rotation_graph(g) if isinstance(g, RotationPlanarGraph) else g
    wired_set = set(int(v) for v in wired_set)
    if wired_set:
        wired, _z = contract_vertices(net, wired_set)
        kept = [e for e, (u, v, _) in enumerate(net.edges)
                if not (u in wired_set and v in wired_set)]
    else:
        wired = net
        kept = list(range(net.n_edges))
    out = {}
    for new_e, orig_e in enumerate(kept):
        out[orig_e] = tree_cylinder_prob(wired, [new_e])
    return out


def added_edge_current(net: Network, b: int, b0: int):
    """Star projection of the unit flow along an extra edge (b, b0).

    Returns (augmented network, current array over its edges, index of the
    added edge, the current's value on the added edge).
    """
    if b == b0:
        raise ValueError("endpoints must differ")
    edges = list(net.edges) + [(int(b), int(b0), 1.0)]
    aug = Network(net.n, edges)
    ei = aug.n_edges - 1
    theta = star_project(aug, chi(aug, ei))
    return aug, theta, ei, float(theta[ei])


# ----------------------------------------------------------------------
# harmonic decomposition and diagnostics
# ----------------------------------------------------------------------
def harmonic_decompose(net: Network, boundary, f):
    """Split f = g + h with h harmonic in the interior matching f on the
    boundary and g vanishing on the boundary."""
    f = np.asarray(f, float)
    boundary = sorted(set(int(v) for v in boundary))
    interior = [v for v in range(net.n) if v not in set(boundary)]
    l = weighted_laplacian(net)
    h = f.copy().astype(float)
    if interior:
        lii = l[np.ix_(interior, interior)]
        lib = l[np.ix_(interior, boundary)]
        h[interior] = np.linalg.solve(lii, -lib @ f[boundary])
    g = f - h
    return g, h


def spectral_radius_estimate(net: Network, x0: int = 0, n_max: int = 40,
                             absorbing=None) -> float:
    """Return-probability growth rate p_2n(x0,x0)^(1/2n) at the largest
    even times up to n_max.

    On a finite patch the plain walk is recurrent, so the transient proxy
    kills the walk on the `absorbing` set (typically the patch boundary);
    the estimate is then biased low and grows toward the ambient value as
    the patch does.
    """
    trans = _transition_matrix(net)
    if absorbing is not None:
        dead = sorted(set(int(v) for v in absorbing))
        if x0 in dead:
            raise ValueError("start vertex cannot be absorbing")
        trans[dead, :] = 0.0
        trans[:, dead] = 0.0
    p = np.zeros(net.n)
    p[x0] = 1.0
    best = 0.0
    for n in range(1, n_max + 1):
        p = trans @ p
        if n % 2 == 0 and n >= n_max // 2 and p[x0] > 0:
            best = max(best, p[x0] ** (1.0 / n))
    return float(best)


def _transition_matrix(net: Network) -> np.ndarray:
    t = np.zeros((net.n, net.n))
    for v in range(net.n):
        cv = net.weighted_degree(v)
        for (u, _, c) in net.adj[v]:
            t[u, v] += c / cv
    return t


def isoperimetric_scan(net: Network, size_cap: int, seeds=None, allowed=None):
    """Greedy edge-isoperimetric scan over connected subsets.

    Sets grow from each seed by repeatedly adding the neighbor that
    minimizes the resulting edge boundary, restricted to `allowed`
    vertices (so truncated boundary degrees do not contaminate the scan).
    Returns best |boundary|/|K| per size 1..size_cap and the overall min.
    """
    allowed = set(range(net.n)) if allowed is None else set(int(v) for v in allowed)
    seeds = sorted(allowed) if seeds is None else [int(s) for s in seeds]
    best = np.full(size_cap, np.inf)
    deg = [len(net.adj[v]) for v in range(net.n)]
    for s in seeds:
        if s not in allowed:
            continue
        k = {s}
        boundary = deg[s]
        best[0] = min(best[0], boundary / 1.0)
        while len(k) < size_cap:
            cands = {}
            for x in k:
                for (y, _, _) in net.adj[x]:
                    if y in k or y not in allowed:
                        continue
                    if y not in cands:
                        inside = sum(1 for (z, _, _) in net.adj[y] if z in k)
                        cands[y] = boundary + deg[y] - 2 * inside
            if not cands:
                break
            y = min(cands, key=lambda t: (cands[t], t))
            boundary = cands[y]
            k.add(y)
            best[len(k) - 1] = min(best[len(k) - 1], boundary / len(k))
    return best, float(np.nanmin(best))


def green_decay_fit(values: np.ndarray, dists: np.ndarray, min_value: float = 1e-300):
    """Least-squares slope and R^2 of log(values) against distance."""
    mask = (values > min_value) & (dists > 0)
    x = dists[mask].astype(float)
    y = np.log(values[mask])
    if len(x) < 3:
        raise ValueError("not enough positive values for a fit")
    a = np.vstack([x, np.ones_like(x)]).T
    coef, res, _, _ = np.linalg.lstsq(a, y, rcond=None)
    slope = float(coef[0])
    pred = a @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return slope, r2


def projection_correlation_bound(net: Network, k_edges, f_edges) -> float:
    """Quantitative tail bound for spanning-tree events: the covariance of
    an event on K and an event on F is at most
    (2^(2|K|) |K| sum_{e in K} C(e) ||P_<chi_F> I_e||_R^2)^(1/2)."""
    k_edges = [int(e) for e in k_edges]
    f_edges = [int(e) for e in f_edges]
    if set(k_edges) & set(f_edges):
        raise ValueError("edge sets must be disjoint")
    r = 1.0 / net.conductances()
    total = 0.0
    for e in k_edges:
        i_e = star_project(net, chi(net, e))
        # distinct-edge indicators are R-orthogonal, so the projection
        # onto span{chi_f} keeps exactly the F-coordinates
        norm2 = float(np.sum(r[f_edges] * i_e[f_edges] ** 2))
        total += net.edges[e][2] * norm2
    kk = len(k_edges)
    return math.sqrt((2.0 ** (2 * kk)) * kk * total)
