"""Double circle packings of finite patches.

Each vertex carries a circle tangent to its neighbors' circles along
edges; each interior face carries a circle crossing all incident vertex
circles at right angles.  Around an edge the four circles share one
tangency point and the primal/dual center segments cross there
perpendicularly, so drawing segments between (chart) centers yields an
orthodiagonal embedding.

Radii are found by angle-sum relaxation: the incidence (v, f) forms a
right kite contributing angle 2*atan(t(r_f)/s(r_v)) at v and the mirrored
angle at f, where (s, t) = (id, id) in the Euclidean plane and
(sinh, tanh) in the hyperbolic plane.  Interior vertices and all interior
faces must have angle sum 2*pi; boundary vertex radii are prescribed.
Positions are then laid out breadth-first and converted to Euclidean
chart circles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .halfedge import RotationPlanarGraph

__all__ = ["solve_double_packing", "DoubleCirclePacking", "PackingReport",
           "PackingError", "edge_metric", "certify"]


class PackingError(RuntimeError):
    pass


@dataclass
class PackingReport:
    iterations: int
    max_angle_residual: float
    residual_history: np.ndarray
    tol: float

    def monotone_after_transient(self) -> bool:
        """Residual envelope non-increasing over the last half of the run.

        The two Jacobi half-updates alternate, so the raw residual is
        period-2; compare strided by 2 with a machine-noise floor.
        """
        h = self.residual_history
        if len(h) < 6:
            return True
        tail = h[len(h) // 2:]
        return bool(np.all(tail[2:] <= tail[:-2] + 1e-14))


@dataclass
class CertifyReport:
    geometry: str
    primal_tangency: float
    dual_tangency: float
    orthogonality: float
    tangency_point: float
    perpendicularity: float
    interiors_disjoint: bool | None
    tol: float

    @property
    def residuals(self) -> dict:
        return {
            "primal_tangency": self.primal_tangency,
            "dual_tangency": self.dual_tangency,
            "orthogonality": self.orthogonality,
            "tangency_point": self.tangency_point,
            "perpendicularity": self.perpendicularity,
        }

    @property
    def passed(self) -> bool:
        ok = all(r < self.tol for r in self.residuals.values())
        if self.interiors_disjoint is not None:
            ok = ok and self.interiors_disjoint
        return ok


@dataclass
class DoubleCirclePacking:
    geometry: str
    graph: RotationPlanarGraph
    vertex_radius: np.ndarray       # native radii
    face_radius: np.ndarray         # native radii, NaN at the outer face
    vertex_center: np.ndarray       # native chart position (disk point)
    face_center: np.ndarray         # native chart position, NaN at outer
    vc_euclid: np.ndarray           # Euclidean chart circle centers
    vr_euclid: np.ndarray
    fc_euclid: np.ndarray
    fr_euclid: np.ndarray
    tangency: np.ndarray            # Euclidean tangency point per edge
    report: PackingReport
    certified: CertifyReport | None = field(default=None)

    def edge_metric(self) -> np.ndarray:
        """m(e) = r_u + r_v in the geometry's native radii."""
        g = self.graph
        u = self.vertex_radius[g.origin[0::2]]
        v = self.vertex_radius[g.origin[1::2]]
        return u + v

    def certify(self, tol: float | None = None, check_disjoint: bool = False) -> CertifyReport:
        rep = certify(self, tol=tol, check_disjoint=check_disjoint)
        self.certified = rep
        return rep

    def to_json_dict(self) -> dict:
        g = self.graph
        return {
            "geometry": self.geometry,
            "vertices": [
                {"id": v, "center": [self.vc_euclid[v].real, self.vc_euclid[v].imag],
                 "radius": self.vr_euclid[v], "native_radius": self.vertex_radius[v]}
                for v in range(g.n_vertices)
            ],
            "faces": [
                {"id": f, "center": [self.fc_euclid[f].real, self.fc_euclid[f].imag],
                 "radius": self.fr_euclid[f], "native_radius": self.face_radius[f]}
                for f in range(g.n_faces) if f != g.outer_face
            ],
            "tangency": [[t.real, t.imag] for t in self.tangency],
        }

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)


# ----------------------------------------------------------------------
# radius relaxation
# ----------------------------------------------------------------------
def _s_of_r(geometry, r):
    return np.sinh(r) if geometry == geo.HYPERBOLIC else r


def _t_of_r(geometry, r):
    return np.tanh(r) if geometry == geo.HYPERBOLIC else r


def _r_of_s(geometry, s):
    return np.arcsinh(s) if geometry == geo.HYPERBOLIC else s


def _angle_sums(geometry, r_all, groups_flat, ptr, self_idx):
    """Sum of 2*atan(t(r_nbr)/s(r_self)) per group."""
    t = _t_of_r(geometry, r_all[groups_flat])
    s = _s_of_r(geometry, r_all[self_idx])
    s_rep = np.repeat(s, np.diff(ptr))
    ang = 2.0 * np.arctan2(t, s_rep)
    out = np.add.reduceat(ang, ptr[:-1]) if len(ang) else np.zeros(0)
    return out


def _solve_self(geometry, r_self, t_nbr, ptr):
    """Per group solve sum 2*atan(t_i/u) = 2*pi for u, Newton from current."""
    u = _s_of_r(geometry, r_self).astype(float)
    counts = np.diff(ptr)
    for _ in range(40):
        u_rep = np.repeat(u, counts)
        ang = 2.0 * np.arctan2(t_nbr, u_rep)
        f = np.add.reduceat(ang, ptr[:-1]) - 2.0 * math.pi
        d = -2.0 * t_nbr / (t_nbr ** 2 + u_rep ** 2)
        df = np.add.reduceat(d, ptr[:-1])
        step = f / df
        u_new = u - step
        bad = u_new <= 0
        u_new[bad] = u[bad] * 0.5
        if np.max(np.abs(u_new - u)) < 1e-16 * (1.0 + np.max(u)):
            u = u_new
            break
        u = u_new
    return _r_of_s(geometry, u)


def solve_double_packing(g: RotationPlanarGraph, boundary=None,
                         tol: float = 1e-12, max_iter: int = 20000,
                         geometry: str | None = None) -> DoubleCirclePacking:
    """Compute the double circle packing of a patch.

    boundary: prescribed boundary vertex radii -- a scalar, a map
    vertex->radius, or None for the default (the regular {p,q} vertex
    radius when the patch was generated as a tiling, else 0.5).
    """
    if geometry is None:
        geometry = g.meta.get("geometry", geo.EUCLIDEAN)
    n_v, n_f = g.n_vertices, g.n_faces
    outer = g.outer_face
    interior_v = np.array(g.interior_vertices(), dtype=int)
    interior_f = np.array([f for f in range(n_f) if f != outer], dtype=int)
    boundary_v = np.array(sorted(set(range(n_v)) - set(interior_v.tolist())), dtype=int)

    r_v0, r_f0 = _default_radii(g, geometry)
    r = np.empty(n_v + len(interior_f))
    fidx = {int(f): n_v + i for i, f in enumerate(interior_f)}
    r[:n_v] = r_v0
    r[n_v:] = r_f0

    if boundary is None:
        pass  # default radii already set on the boundary
    elif np.isscalar(boundary):
        r[boundary_v] = float(boundary)
    else:
        for v, val in dict(boundary).items():
            if int(v) not in set(boundary_v.tolist()):
                raise PackingError(f"vertex {v} is not on the boundary")
            r[int(v)] = float(val)
        missing = [v for v in boundary_v if int(v) not in {int(k) for k in dict(boundary)}]
        if missing:
            raise PackingError(f"boundary radii missing for vertices {missing[:5]}...")

    # incidence in CSR form: faces -> incident vertices, interior vertices -> faces
    f_flat, f_ptr = _csr([g.face_vertices(int(f)) for f in interior_f])
    v_groups = []
    for v in interior_v:
        fs = [fidx[int(g.face_of[h])] for h in g.half_edges_at(int(v))]
        v_groups.append(fs)
    v_flat, v_ptr = _csr(v_groups)

    history = []
    it = 0
    for it in range(1, max_iter + 1):
        res_f = np.abs(_angle_sums(geometry, r, f_flat, f_ptr, _unknown_face_rows(fidx, interior_f)) - 2 * math.pi)
        if len(interior_v):
            res_v = np.abs(_angle_sums(geometry, r, v_flat, v_ptr, interior_v) - 2 * math.pi)
            res = max(res_f.max() if len(res_f) else 0.0,
                      res_v.max() if len(res_v) else 0.0)
        else:
            res = res_f.max() if len(res_f) else 0.0
        history.append(res)
        if res < tol:
            break
        # Jacobi: faces from vertices, then interior vertices from faces
        t_fn = _t_of_r(geometry, r[f_flat])
        new_f = _solve_self(geometry, r[_unknown_face_rows(fidx, interior_f)], t_fn, f_ptr)
        if len(interior_v):
            t_vn = _t_of_r(geometry, r[v_flat])
            new_v = _solve_self(geometry, r[interior_v], t_vn, v_ptr)
            r[interior_v] = new_v
        r[n_v:] = new_f
        if np.any(r <= 0) or np.any(~np.isfinite(r)):
            bad = int(np.argmin(r))
            raise PackingError(f"radius underflow at unknown {bad}")
    else:
        raise PackingError(
            f"no convergence after {max_iter} sweeps; residual {history[-1]:.3e}")

    report = PackingReport(iterations=it, max_angle_residual=history[-1],
                           residual_history=np.array(history), tol=tol)

    r_v = r[:n_v].copy()
    r_f_full = np.full(n_f, np.nan)
    for f, i in fidx.items():
        r_f_full[f] = r[i]

    vc, fc = _layout(g, geometry, r_v, r_f_full)
    vce, vre, fce, fre, tang = _euclidean_view(g, geometry, r_v, r_f_full, vc, fc)

    return DoubleCirclePacking(
        geometry=geometry, graph=g,
        vertex_radius=r_v, face_radius=r_f_full,
        vertex_center=vc, face_center=fc,
        vc_euclid=vce, vr_euclid=vre, fc_euclid=fce, fr_euclid=fre,
        tangency=tang, report=report,
    )


def _unknown_face_rows(fidx, interior_f):
    return np.array([fidx[int(f)] for f in interior_f], dtype=int)


def _csr(groups):
    flat = np.array([x for grp in groups for x in grp], dtype=int)
    ptr = np.zeros(len(groups) + 1, dtype=int)
    for i, grp in enumerate(groups):
        ptr[i + 1] = ptr[i] + len(grp)
    return flat, ptr


def _default_radii(g, geometry):
    meta = g.meta
    if meta.get("family") == "pq" or ("p" in meta and "q" in meta):
        p, q = meta["p"], meta["q"]
        _, edge, inr = geo.regular_pq_radii(p, q)
        return edge / 2.0, inr
    return 0.5, 0.5


# ----------------------------------------------------------------------
# layout
# ----------------------------------------------------------------------
def _layout(g: RotationPlanarGraph, geometry, r_v, r_f):
    """Breadth-first placement of all circle centers (native chart)."""
    n_v, n_f = g.n_vertices, g.n_faces
    vc = np.full(n_v, np.nan + 0j, dtype=complex)
    fc = np.full(n_f, np.nan + 0j, dtype=complex)
    root = 0
    vc[root] = 0.0 + 0.0j
    hs0 = g.half_edges_at(root)
    known = {hs0[0]: 0.0}
    queue = [root]
    placed = np.zeros(n_v, dtype=bool)
    placed[root] = True
    outer = g.outer_face

    while queue:
        v = queue.pop(0)
        hs = g.half_edges_at(v)
        k0 = next(h for h in hs if h in known)
        ang = {k0: known[k0]}
        # CCW walk: angle increases by the kite angle of the crossed face
        h = k0
        while True:
            f = int(g.face_of[h])
            if f == outer:
                break
            nxt = int(g.next_rot[h])
            if nxt in ang:
                break
            ang[nxt] = ang[h] + 2.0 * geo.kite_half_angle(geometry, r_v[v], r_f[f])
            h = nxt
        # CW walk
        h = k0
        while True:
            prv = int(g.prev_rot[h])
            f = int(g.face_of[prv])
            if f == outer or prv in ang:
                break
            ang[prv] = ang[h] - 2.0 * geo.kite_half_angle(geometry, r_v[v], r_f[f])
            h = prv
        base = vc[v]
        for h, a in ang.items():
            u = g.target(h)
            if not placed[u]:
                d = r_v[v] + r_v[u]
                vc[u] = geo.point_at(geometry, base, a, d)
                placed[u] = True
                known[h ^ 1] = geo.direction(geometry, vc[u], base)
                queue.append(u)
            f = int(g.face_of[h])
            if f != outer and np.isnan(fc[f].real):
                half = geo.kite_half_angle(geometry, r_v[v], r_f[f])
                hyp = geo.kite_hypotenuse(geometry, r_v[v], r_f[f])
                fc[f] = geo.point_at(geometry, base, a + half, hyp)
    if not placed.all():
        raise PackingError("layout did not reach every vertex")
    return vc, fc


def _euclidean_view(g, geometry, r_v, r_f, vc, fc):
    n_v, n_f = g.n_vertices, g.n_faces
    vce = np.empty(n_v, dtype=complex)
    vre = np.empty(n_v)
    for v in range(n_v):
        c, rr = geo.circle_to_euclidean(geometry, vc[v], r_v[v])
        vce[v], vre[v] = c, rr
    fce = np.full(n_f, np.nan + 0j, dtype=complex)
    fre = np.full(n_f, np.nan)
    for f in range(n_f):
        if f == g.outer_face or np.isnan(fc[f].real):
            continue
        c, rr = geo.circle_to_euclidean(geometry, fc[f], r_f[f])
        fce[f], fre[f] = c, rr
    tang = np.empty(g.n_edges, dtype=complex)
    for e in range(g.n_edges):
        u, v = g.edge_endpoints(e)
        d = vce[v] - vce[u]
        tang[e] = vce[u] + vre[u] * d / abs(d)
    return vce, vre, fce, fre, tang


# ----------------------------------------------------------------------
# certification
# ----------------------------------------------------------------------
def edge_metric(p: DoubleCirclePacking) -> np.ndarray:
    return p.edge_metric()


def certify(p: DoubleCirclePacking, tol: float | None = None,
            check_disjoint: bool = False) -> CertifyReport:
    """Worst-case residuals of the four packing invariants.

    All measured in the Euclidean chart: primal/dual tangency gaps,
    orthogonality |c_v - c_f|^2 - r_v^2 - r_f^2, coincidence of the two
    tangency points on each interior edge, and perpendicularity of the
    primal and dual center segments (as |cos| of their angle).
    """
    g = p.graph
    if tol is None:
        tol = 1e-10 if p.geometry == geo.EUCLIDEAN else 1e-8
    outer = g.outer_face

    r_pt = 0.0
    for e in range(g.n_edges):
        u, v = g.edge_endpoints(e)
        gap = abs(abs(p.vc_euclid[u] - p.vc_euclid[v]) - (p.vr_euclid[u] + p.vr_euclid[v]))
        r_pt = max(r_pt, gap)

    r_dt = r_tp = r_pp = 0.0
    for e in range(g.n_edges):
        f1, f2 = g.edge_faces(e)
        if f1 == outer or f2 == outer:
            continue
        gap = abs(abs(p.fc_euclid[f1] - p.fc_euclid[f2]) - (p.fr_euclid[f1] + p.fr_euclid[f2]))
        r_dt = max(r_dt, gap)
        d = p.fc_euclid[f2] - p.fc_euclid[f1]
        t_dual = p.fc_euclid[f1] + p.fr_euclid[f1] * d / abs(d)
        r_tp = max(r_tp, abs(t_dual - p.tangency[e]))
        u, v = g.edge_endpoints(e)
        e1 = p.vc_euclid[v] - p.vc_euclid[u]
        cosang = abs((e1.real * d.real + e1.imag * d.imag) / (abs(e1) * abs(d)))
        r_pp = max(r_pp, cosang)

    r_orth = 0.0
    for f in range(g.n_faces):
        if f == outer:
            continue
        for v in g.face_vertices(f):
            lhs = abs(p.vc_euclid[v] - p.fc_euclid[f]) ** 2
            r_orth = max(r_orth, abs(lhs - p.vr_euclid[v] ** 2 - p.fr_euclid[f] ** 2))

    disjoint = None
    if check_disjoint:
        disjoint = (_interiors_disjoint(p.vc_euclid, p.vr_euclid, tol) and
                    _interiors_disjoint(p.fc_euclid[np.isfinite(p.fr_euclid)],
                                        p.fr_euclid[np.isfinite(p.fr_euclid)], tol))

    return CertifyReport(
        geometry=p.geometry,
        primal_tangency=r_pt, dual_tangency=r_dt, orthogonality=r_orth,
        tangency_point=r_tp, perpendicularity=r_pp,
        interiors_disjoint=disjoint, tol=tol,
    )


def _interiors_disjoint(centers, radii, tol) -> bool:
    n = len(centers)
    for i in range(n):
        d = np.abs(centers - centers[i])
        overlap = radii + radii[i] - d
        overlap[i] = 0.0
        if np.any(overlap > math.sqrt(tol)):
            return False
    return True
