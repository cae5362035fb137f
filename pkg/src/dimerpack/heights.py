"""Height functions of matchings and double-dimer loop statistics.

Faces of the superposition graph are its kites (one per vertex-face
incidence) plus the unbounded face.  A single matching has a real-valued
height on kites: crossing a bipartite edge changes the height by
1 - angle/2pi or -angle/2pi depending on matched status and on which side
the black vertex lies, where the angle is the one subtended at the black
vertex by the two kite diagonals around that edge.  The difference of two
matchings' heights is an integer field that changes only across the
symmetric difference, whose components are disjoint alternating cycles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .superposition import Region, SuperpositionGraph
from .sampler import Matching, stream_seed

__all__ = [
    "KiteComplex", "HeightField", "CycleDecomposition",
    "angle_flow", "dimer_height", "double_dimer_height",
    "cycle_decomposition", "enclosing_cycle_count", "level_clusters",
    "variance_experiment", "center_kite", "center_height",
    "exact_center_variance", "kite_complex",
]

OUTER = -1


# ----------------------------------------------------------------------
# the kite complex: faces of the superposition graph
# ----------------------------------------------------------------------
class KiteComplex:
    """Kites of a superposition graph with adjacency across bipartite edges."""

    def __init__(self, sg: SuperpositionGraph):
        self.sg = sg
        self.centroids = []
        for (w1, bv, w2, bf) in sg.quads:
            pts = [sg.white_pos[w1], sg.black_pos[bv], sg.white_pos[w2],
                   sg.black_pos[bf]]
            self.centroids.append(sum(pts) / 4.0)
        # bipartite edge (w, b) -> incident kites
        self.edge_kites = {}
        for k, (w1, bv, w2, bf) in enumerate(sg.quads):
            for pair in ((w1, bv), (w2, bv), (w1, bf), (w2, bf)):
                self.edge_kites.setdefault(pair, []).append(k)

    def n_kites(self):
        return len(self.sg.quads)

    def crossings(self):
        """(edge, kite_a, kite_b) per bipartite edge; OUTER when only one."""
        out = []
        for pair, ks in sorted(self.edge_kites.items()):
            if len(ks) == 2:
                out.append((pair, ks[0], ks[1]))
            elif len(ks) == 1:
                out.append((pair, ks[0], OUTER))
        return out

    def crossing_point(self, pair):
        w, b = pair
        return 0.5 * (self.sg.white_pos[w] + self.sg.black_pos[b])

    def centroid(self, k):
        return self.centroids[k]


def kite_complex(sg: SuperpositionGraph) -> KiteComplex:
    """The (cached) face complex of a superposition graph."""
    cached = getattr(sg, "_kite_complex", None)
    if cached is None:
        cached = KiteComplex(sg)
        sg._kite_complex = cached
    return cached


_kites = kite_complex


def _black_left_sign(kc: KiteComplex, pair, k_from, k_to) -> float:
    """+1 if the black vertex lies left of the crossing from k_from to k_to."""
    sg = kc.sg
    w, b = pair
    x = kc.crossing_point(pair)
    if k_from == OUTER:
        d = kc.centroid(k_to) - x
    elif k_to == OUTER:
        d = x - kc.centroid(k_from)
    else:
        d = kc.centroid(k_to) - kc.centroid(k_from)
    rel = sg.black_pos[b] - sg.white_pos[w]
    cross = d.real * rel.imag - d.imag * rel.real
    return 1.0 if cross > 0 else -1.0


# ----------------------------------------------------------------------
# angle flow
# ----------------------------------------------------------------------
def angle_flow(sg: SuperpositionGraph):
    """Fraction of the full turn at the black vertex assigned to each
    bipartite edge: the angle between the two kite diagonals around the
    edge, over 2*pi.  Sums to 1 around interior whites and blacks.

    Returns (flow dict (w,b) -> value, diagnostics dict with the worst
    interior closure defects and the flagged boundary vertices).
    """
    kc = _kites(sg)
    flow = {}
    for k, (w1, bv, w2, bf) in enumerate(sg.quads):
        pv, pf = sg.black_pos[bv], sg.black_pos[bf]
        for (w, b, other) in ((w1, bv, pf), (w2, bv, pf), (w1, bf, pv), (w2, bf, pv)):
            pw = sg.white_pos[w]
            pb = sg.black_pos[b]
            a1 = np.angle((pw - pb) / (other - pb))
            flow[(w, b)] = flow.get((w, b), 0.0) + abs(a1) / (2.0 * math.pi)

    g = sg.graph
    boundary = set(g.boundary_vertices())
    worst_w = worst_b = 0.0
    flagged = []
    # a white's four edges carry the full angle exactly when both its
    # faces are interior; a dual black always does; a primal black only
    # when the vertex is interior
    for w in range(sg.n_white):
        f1, f2 = g.edge_faces(w)
        s = sum(flow.get((w, b), 0.0) for b in sg.white_adj[w])
        if f1 != g.outer_face and f2 != g.outer_face:
            worst_w = max(worst_w, abs(s - 1.0))
        else:
            flagged.append(("white", w, s))
    by_black = {}
    for (w, b), val in flow.items():
        by_black[b] = by_black.get(b, 0.0) + val
    for b, s in by_black.items():
        if sg.is_primal(b) and b in boundary:
            flagged.append(("black", b, s))
        else:
            worst_b = max(worst_b, abs(s - 1.0))
    diag = {"worst_white_defect": worst_w, "worst_black_defect": worst_b,
            "flagged_boundary": flagged}
    return flow, diag


# ----------------------------------------------------------------------
# height fields
# ----------------------------------------------------------------------
@dataclass
class HeightField:
    sg: SuperpositionGraph
    flavor: str                  # 'preliminary' or 'double-dimer'
    values: dict                 # kite id (or OUTER) -> value
    base: int = OUTER
    closure_defect: float = 0.0

    def __getitem__(self, k):
        return self.values[k]


def _bfs_field(kc: KiteComplex, increment, include_outer: bool, base, tol=1e-9,
               zero=0):
    """Integrate per-crossing increments over the kite adjacency graph.

    increment(pair, k_from, k_to) -> height(k_to) - height(k_from).
    Returns (values, worst closure defect over non-tree adjacencies).
    """
    adj = {}
    for (pair, a, b) in kc.crossings():
        if not include_outer and (a == OUTER or b == OUTER):
            continue
        adj.setdefault(a, []).append((pair, b))
        adj.setdefault(b, []).append((pair, a))
    values = {base: zero}
    queue = [base]
    defect = 0.0
    while queue:
        x = queue.pop(0)
        for (pair, y) in adj.get(x, []):
            inc = increment(pair, x, y)
            val = values[x] + inc
            if y in values:
                d = abs(float(values[y] - val))
                defect = max(defect, d)
            else:
                values[y] = val
                queue.append(y)
    if defect > tol:
        raise ValueError(f"height increments are inconsistent (defect {defect:.2e})")
    return values, defect


def dimer_height(m: Matching, m0: Matching, sg: SuperpositionGraph, f0: int = 0,
                 exact: bool | None = None) -> HeightField:
    """Height of m relative to the reference matching m0, zero at kite f0.

    The underlying one-matching field changes by 1 - angle/2pi across a
    matched edge with the black vertex on the left (by -angle/2pi when
    unmatched); the difference of the two fields is integer-valued on the
    kite graph.  Values are exact rationals when all angle fractions are
    (as on the square grid), floats otherwise.
    """
    kc = _kites(sg)
    flow, _ = angle_flow(sg)
    if exact is None:
        exact = all(_near_rational(v) for v in flow.values())
    fl = {p: (_as_fraction(v) if exact else v) for p, v in flow.items()}
    one = Fraction(1) if exact else 1.0

    def inc_single(mm):
        pairs = mm.pairs

        def inc(pair, a, b):
            w, bk = pair
            s = _black_left_sign(kc, pair, a, b)
            base = (one - fl[pair]) if pairs.get(w) == bk else (-fl[pair])
            # base is h(from) - h(to) when black is on the left moving from->to
            return -base if s > 0 else base
        return inc

    def inc_diff(pair, a, b):
        return inc_single(m)(pair, a, b) - inc_single(m0)(pair, a, b)

    values, defect = _bfs_field(kc, inc_diff, include_outer=False, base=int(f0),
                                tol=1e-9, zero=Fraction(0) if exact else 0.0)
    return HeightField(sg=sg, flavor="preliminary", values=values, base=int(f0),
                       closure_defect=defect)


def _near_rational(v, max_den=64, tol=1e-12):
    fr = Fraction(v).limit_denominator(max_den)
    return abs(float(fr) - v) < tol


def _as_fraction(v, max_den=64):
    return Fraction(v).limit_denominator(max_den)


def double_dimer_height(m1: Matching, m2: Matching, sg: SuperpositionGraph,
                        f0: int | None = None) -> HeightField:
    """Integer height of the pair (m1, m2), anchored at 0 outside the
    region (f0 None) or at kite f0."""
    kc = _kites(sg)
    p1, p2 = m1.pairs, m2.pairs

    def inc(pair, a, b):
        w, bk = pair
        in1 = p1.get(w) == bk
        in2 = p2.get(w) == bk
        if in1 == in2:
            return 0
        s = _black_left_sign(kc, pair, a, b)
        # black left moving a->b means white right: h(a)-h(b) = -1 for
        # an m1-edge, +1 for an m2-edge
        hdiff = -1 if in1 else 1
        if s < 0:
            hdiff = -hdiff
        return -hdiff
    base = OUTER if f0 is None else int(f0)
    values, defect = _bfs_field(kc, inc, include_outer=True, base=base, tol=0.5)
    return HeightField(sg=sg, flavor="double-dimer", values=values, base=base,
                       closure_defect=defect)


# ----------------------------------------------------------------------
# symmetric-difference cycles
# ----------------------------------------------------------------------
@dataclass
class CycleDecomposition:
    components: list          # each: list of (w, b) edges in traversal order
    closed: list              # bool per component
    vertex_cycles: list = field(default_factory=list)   # polygon points

    def __len__(self):
        return len(self.components)


def cycle_decomposition(m1: Matching, m2: Matching) -> CycleDecomposition:
    """Components of the symmetric difference: alternating cycles (and, in
    degenerate situations, open paths)."""
    if m1.region is not m2.region:
        raise ValueError("matchings live on different regions")
    sg = m1.region.sg
    diff = m1.symmetric_difference(m2)
    by_white = {}
    by_black = {}
    for (w, b) in diff:
        by_white.setdefault(w, []).append(b)
        by_black.setdefault(b, []).append(w)
    unused = set(diff)
    comps, closed, polys = [], [], []
    while unused:
        e0 = min(unused)
        unused.discard(e0)
        comp, pts = [e0], [sg.white_pos[e0[0]], sg.black_pos[e0[1]]]
        cur, pivot = e0, "b"
        is_closed = False
        while True:
            w, b = cur
            if pivot == "b":
                cand = [w2 for w2 in by_black[b] if w2 != w]
                nxt = (cand[0], b) if cand else None
            else:
                cand = [b2 for b2 in by_white[w] if b2 != b]
                nxt = (w, cand[0]) if cand else None
            if nxt is None:
                break
            if nxt == e0:
                is_closed = True
                break
            comp.append(nxt)
            unused.discard(nxt)
            pts.append(sg.white_pos[nxt[0]] if pivot == "b" else sg.black_pos[nxt[1]])
            cur, pivot = nxt, ("w" if pivot == "b" else "b")
        comps.append(comp)
        closed.append(is_closed)
        polys.append(pts)
    return CycleDecomposition(components=comps, closed=closed, vertex_cycles=polys)


def enclosing_cycle_count(decomp: CycleDecomposition, point: complex) -> int:
    """Number of closed components whose polygon winds around the point."""
    count = 0
    for pts, cl in zip(decomp.vertex_cycles, decomp.closed):
        if cl and _winding(pts, point) != 0:
            count += 1
    return count


def _winding(pts, z) -> int:
    total = 0.0
    n = len(pts)
    for i in range(n):
        a = pts[i] - z
        b = pts[(i + 1) % n] - z
        total += math.atan2(a.real * b.imag - a.imag * b.real,
                            a.real * b.real + a.imag * b.imag)
    return int(round(total / (2.0 * math.pi)))


def level_clusters(field: HeightField):
    """Connected equal-height clusters of the kite graph (outer included
    for outer-anchored fields); returns kite -> cluster label."""
    kc = _kites(field.sg)
    labels = {}
    nxt = 0
    nodes = sorted(field.values, key=lambda k: (k == OUTER, k))
    adj = {}
    for (pair, a, b) in kc.crossings():
        if a in field.values and b in field.values:
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)
    for start in nodes:
        if start in labels:
            continue
        lab = nxt
        nxt += 1
        stack = [start]
        labels[start] = lab
        hval = field.values[start]
        while stack:
            x = stack.pop()
            for y in adj.get(x, []):
                if y not in labels and field.values[y] == hval:
                    labels[y] = lab
                    stack.append(y)
    return labels


# ----------------------------------------------------------------------
# experiments
# ----------------------------------------------------------------------
def center_kite(region: Region) -> int:
    """The canonical central kite: first quad of the patch's root face."""
    sg = region.sg
    root = sg.graph.meta.get("root_face")
    if root is None:
        root = sg.graph.interior_faces()[0]
    fb = sg.face_black[root]
    for k, (w1, bv, w2, bf) in enumerate(sg.quads):
        if bf == fb:
            return k
    raise ValueError("root face has no kites")


def _center_path(region: Region):
    """Crossing path from the unbounded face to the central kite."""
    kc = _kites(region.sg)
    target = center_kite(region)
    adj = {}
    for (pair, a, b) in kc.crossings():
        adj.setdefault(a, []).append((pair, b))
        adj.setdefault(b, []).append((pair, a))
    prev = {OUTER: None}
    queue = [OUTER]
    while queue:
        x = queue.pop(0)
        if x == target:
            break
        for (pair, y) in adj.get(x, []):
            if y not in prev:
                prev[y] = (x, pair)
                queue.append(y)
    path = []
    x = target
    while prev[x] is not None:
        frm, pair = prev[x]
        path.append((pair, frm, x))
        x = frm
    return list(reversed(path))


def center_height(region: Region, m1: Matching, m2: Matching, path=None) -> int:
    """Double-dimer height of the central kite with zero boundary value,
    via increments along a fixed crossing path from outside."""
    kc = _kites(region.sg)
    if path is None:
        path = _center_path(region)
    p1, p2 = m1.pairs, m2.pairs
    h = 0
    for (pair, a, b) in path:
        w, bk = pair
        in1 = p1.get(w) == bk
        in2 = p2.get(w) == bk
        if in1 == in2:
            continue
        s = _black_left_sign(kc, pair, a, b)
        hdiff = -1 if in1 else 1
        if s < 0:
            hdiff = -hdiff
        h -= hdiff
    return h


def variance_experiment(regions: dict, samples: int, seed: int,
                        stderr_target: float | None = None):
    """Double-dimer center-height statistics per labeled region.

    regions: label -> Region (e.g. radius -> trimmed patch); samples
    pairs are drawn per region.  Returns a list of row dicts with mean,
    variance and standard errors, plus a slope of variance against
    log(label) when labels are numeric.  Rows whose variance stderr
    misses `stderr_target` carry a warning note (and emit one).
    """
    import warnings
    from .sampler import sample_matching
    rows = []
    for label in sorted(regions):
        region = regions[label]
        path = _center_path(region)
        hs = np.empty(samples)
        base = stream_seed("variance", label, seed)
        for i in range(samples):
            m1 = sample_matching(region, base + 2 * i)
            m2 = sample_matching(region, base + 2 * i + 1)
            hs[i] = center_height(region, m1, m2, path)
        mean = float(np.mean(hs))
        var = float(np.var(hs, ddof=1))
        m4 = float(np.mean((hs - mean) ** 4))
        se_var = math.sqrt(max(m4 - var ** 2, 0.0) / samples)
        row = {
            "label": label, "n": samples, "mean": mean, "var": var,
            "stderr_mean": float(np.std(hs, ddof=1) / math.sqrt(samples)),
            "stderr_var": se_var,
        }
        if stderr_target is not None and se_var > stderr_target:
            row["warning"] = (f"stderr {se_var:.2e} misses target "
                              f"{stderr_target:.2e}; increase samples")
            warnings.warn(row["warning"])
        rows.append(row)
    labels = [r["label"] for r in rows]
    if len(rows) >= 2 and all(isinstance(l, (int, float)) for l in labels):
        x = np.log([float(l) for l in labels])
        y = np.array([r["var"] for r in rows])
        a = np.vstack([x, np.ones_like(x)]).T
        coef, *_ = np.linalg.lstsq(a, y, rcond=None)
        cov_diag = _slope_stderr(x, y, [r["stderr_var"] for r in rows])
        slope = {"slope": float(coef[0]), "stderr": cov_diag}
    else:
        slope = None
    return rows, slope


def _slope_stderr(x, y, se_y):
    """Propagated standard error of the LSQ slope given per-point errors."""
    x = np.asarray(x, float)
    w = x - np.mean(x)
    denom = float(np.sum(w ** 2))
    coeffs = w / denom
    return float(math.sqrt(np.sum((coeffs * np.asarray(se_y)) ** 2)))


def exact_center_variance(region: Region) -> float:
    """Noise-free double-dimer center-height variance via pair minors.

    The zero-boundary center height of one matching is, up to an additive
    constant, a signed sum of edge indicators along a fixed crossing path,
    so its variance is a quadratic form in exact one- and two-edge
    cylinder probabilities; the pair variance is twice that.
    """
    from .kasteleyn import build_dirac, local_stats
    sg = region.sg
    kc = _kites(sg)
    path = _center_path(region)
    coef = {}
    for (pair, a, b) in path:
        s = _black_left_sign(kc, pair, a, b)
        # crossing a->b adds -(1_e - angle) with the black on the left
        c = -1.0 if s > 0 else 1.0
        coef[pair] = coef.get(pair, 0.0) + c
    d = build_dirac(region)
    pairs = [p for p in coef
             if region.has_white(p[0]) and p[1] in region.white_neighbors(p[0])]
    probs = {p: local_stats(d, [p]) for p in pairs}
    var = 0.0
    for p1 in pairs:
        for p2 in pairs:
            if p1 == p2:
                cov = probs[p1] * (1.0 - probs[p1])
            else:
                if p1[0] == p2[0] or p1[1] == p2[1]:
                    joint = 0.0
                else:
                    joint = local_stats(d, [p1, p2])
                cov = joint - probs[p1] * probs[p2]
            var += coef[p1] * coef[p2] * cov
    return 2.0 * var
