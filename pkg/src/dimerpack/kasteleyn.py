"""Complex weighted adjacency (Dirac) matrices and local statistics.

The raw matrix has one row per white vertex and one column per black
vertex; an incident entry is the complex number of modulus nu(f) pointing
from the white to the black, where f is the primal or dual edge the pair
lies on.  Around every quadrilateral face the alternating entry product
is negative-real, which makes every nonzero determinant expansion term
share one argument: |det| is then the weighted matching count, and minors
of the inverse give cylinder probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .superposition import Region

__all__ = [
    "DiracMatrix", "build_dirac", "partition_function", "log_partition_function",
    "local_stats", "conditional_local_stats", "invert_dirac", "block_structure",
    "SingularDiracError",
]


class SingularDiracError(RuntimeError):
    pass


@dataclass
class DiracMatrix:
    region: Region
    variant: str                    # 'raw' or 'normalized'
    mat: np.ndarray                 # n_white x n_black complex
    scaling: np.ndarray             # per-white 1/sqrt(nu * nu_dual)
    _inv: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_white(self):
        return self.mat.shape[0]

    @property
    def n_black(self):
        return self.mat.shape[1]

    def entry(self, w: int, b: int) -> complex:
        r = self.region
        return self.mat[r.white_index(w), r.black_index(b)]

    def inverse(self) -> np.ndarray:
        """Dense inverse, cached; rows are black, columns white."""
        if self._inv is None:
            self._inv = invert_dirac(self)
        return self._inv

    def face_sign_residual(self) -> float:
        """Worst deviation of quad products from the negative real axis."""
        r = self.region
        worst = 0.0
        for (w1, b1, w2, b2) in r.quads_inside():
            prod = (self.entry(w1, b1) * self.entry(w2, b2) /
                    (self.entry(w2, b1) * self.entry(w1, b2)))
            val = -prod
            worst = max(worst, abs(val.imag), max(0.0, -val.real))
        return worst


def build_dirac(region: Region, variant: str = "raw",
                rotation: complex = 1.0) -> DiracMatrix:
    """Assemble the matrix for a region; verifies incidence moduli and the
    face-sign condition at build time.

    rotation: unit complex multiplying all embedded directions (used by
    the rotation-invariance checks).
    """
    if variant not in ("raw", "normalized"):
        raise ValueError(variant)
    sg = region.sg
    n_w, n_b = region.n_white, region.n_black
    mat = np.zeros((n_w, n_b), dtype=complex)
    scaling = np.ones(n_w)
    for w in region.whites:
        wi = region.white_index(w)
        nu, nud = sg.white_weights(w)
        scaling[wi] = 1.0 / math.sqrt(nu * nud)
        pw = sg.white_pos[w]
        for b in region.white_neighbors(w):
            pb = sg.black_pos[b]
            d = (pb - pw) * rotation
            if abs(d) == 0.0:
                raise ValueError(f"zero-length embedded edge at white {w}, black {b}")
            weight = nu if sg.is_primal(b) else nud
            mat[wi, region.black_index(b)] = weight * d / abs(d)
    dm = DiracMatrix(region=region, variant="raw", mat=mat, scaling=scaling)
    res = dm.face_sign_residual()
    if res > 1e-8:
        raise ValueError(f"face-sign condition fails with residual {res:.2e}")
    if variant == "normalized":
        dm.mat = mat * scaling[:, None]
        dm.variant = "normalized"
    return dm


def partition_function(d: DiracMatrix) -> float:
    """|det| of the white-by-black matrix = weighted matching sum."""
    if d.n_white != d.n_black:
        raise ValueError(f"region not balanced: {d.n_white} x {d.n_black}")
    sign, logabs = np.linalg.slogdet(d.mat)
    if sign == 0:
        return 0.0
    return math.exp(logabs)


def log_partition_function(d: DiracMatrix) -> float:
    if d.n_white != d.n_black:
        raise ValueError(f"region not balanced: {d.n_white} x {d.n_black}")
    sign, logabs = np.linalg.slogdet(d.mat)
    if sign == 0:
        return -math.inf
    return float(logabs)


def invert_dirac(d: DiracMatrix, method: str = "lu"):
    """Dense inverse (black rows, white columns) with a condition estimate.

    method 'lu' uses partial-pivot LU; 'qr' solves by Householder QR, an
    independent factorization path for cross-checks.
    """
    a = d.mat
    if a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    n = a.shape[0]
    if method == "lu":
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")   # zero pivots raised below
            lu, piv = scipy.linalg.lu_factor(a)
        if np.any(np.abs(np.diag(lu)) < 1e-300):
            raise SingularDiracError("LU pivot underflow: singular matrix")
        inv = scipy.linalg.lu_solve((lu, piv), np.eye(n, dtype=complex))
    elif method == "qr":
        q, r = np.linalg.qr(a)
        if np.any(np.abs(np.diag(r)) < 1e-300):
            raise SingularDiracError("QR diagonal underflow: singular matrix")
        inv = scipy.linalg.solve_triangular(r, q.conj().T)
    else:
        raise ValueError(method)
    cond1 = np.linalg.norm(a, 1) * np.linalg.norm(inv, 1)
    if not np.isfinite(cond1) or cond1 > 1e14:
        raise SingularDiracError(f"matrix numerically singular (cond ~ {cond1:.1e})")
    return inv


def local_stats(d: DiracMatrix, edges) -> float:
    """Probability that the given (white, black) edges all belong to a
    random perfect matching; edges sharing a vertex give exactly 0."""
    edges = [(int(w), int(b)) for (w, b) in edges]
    if len(edges) < 1:
        raise ValueError("need at least one edge")
    ws = [w for w, _ in edges]
    bs = [b for _, b in edges]
    if len(set(ws)) < len(ws) or len(set(bs)) < len(bs):
        return 0.0
    r = d.region
    for w, b in edges:
        if not (r.has_white(w) and r.has_black(b)):
            raise ValueError(f"edge ({w},{b}) not inside the region")
        if d.entry(w, b) == 0:
            return 0.0
    inv = d.inverse()
    pref = 1.0
    for w, b in edges:
        pref *= abs(d.entry(w, b))
    minor = np.empty((len(edges), len(edges)), dtype=complex)
    for i, (_, b) in enumerate(edges):
        for j, (w, _) in enumerate(edges):
            minor[i, j] = inv[r.black_index(b), r.white_index(w)]
    return pref * abs(np.linalg.det(minor))


def conditional_local_stats(d: DiracMatrix, f_edges, conditioning) -> float | None:
    """P(F in M | the matched partner of each white in K).

    conditioning: map white -> black recording the conditioned matching S
    on the whites K.  Implemented by deleting the matched vertices and
    taking F's minor in the reduced region.  Returns None when the
    conditioning context itself has probability zero (singular reduction);
    returns exactly 0.0 when F conflicts with S.
    """
    cond = {int(w): int(b) for w, b in dict(conditioning).items()}
    if not cond:
        return local_stats(d, f_edges)
    r = d.region
    for w, b in cond.items():
        if b not in r.white_neighbors(w):
            raise ValueError(f"conditioned pair ({w},{b}) is not an edge")
    if len(set(cond.values())) < len(cond):
        return None
    drop_w, drop_b = set(cond), set(cond.values())
    for w, b in f_edges:
        if w in drop_w or b in drop_b:
            return 0.0
    reduced = r.restrict(drop_whites=drop_w, drop_blacks=drop_b)
    if not reduced.is_balanced():
        raise ValueError("conditioning leaves an unbalanced region")
    d2 = build_dirac(reduced, variant=d.variant)
    try:
        return local_stats(d2, f_edges)
    except SingularDiracError:
        return None


def edge_probability_rows(d: DiracMatrix):
    """(white, black, probability) per incident pair, for CSV emission."""
    rows = []
    for w in d.region.whites:
        for b in d.region.white_neighbors(w):
            rows.append((w, b, local_stats(d, [(w, b)])))
    return rows


def minors_baseline(d: DiracMatrix, events) -> dict:
    """Minor values for a list of edge tuples, as a regression baseline."""
    inv = d.inverse()
    r = d.region
    out = {}
    for ev in events:
        key = ";".join(f"{w}-{b}" for (w, b) in ev)
        minor = [[complex(inv[r.black_index(b), r.white_index(w)])
                  for (w, _) in ev] for (_, b) in ev]
        out[key] = {"probability": local_stats(d, ev),
                    "minor": [[{"re": z.real, "im": z.imag} for z in row]
                              for row in minor]}
    return out


def enumerate_matchings(region: Region):
    """All perfect matchings of a region with their weights.

    Branches on the white vertex with fewest remaining partners; intended
    for regions with at most a couple dozen whites.  Returns a list of
    (pairs dict, weight) with weight the product of incident edge weights.
    """
    sg = region.sg
    whites = list(region.whites)
    nbrs = {w: list(region.white_neighbors(w)) for w in whites}
    wts = {}
    for w in whites:
        nu, nud = sg.white_weights(w)
        for b in nbrs[w]:
            wts[(w, b)] = nu if sg.is_primal(b) else nud
    out = []
    used_b = set()
    pairs = {}

    def rec(remaining):
        if not remaining:
            weight = 1.0
            for w, b in pairs.items():
                weight *= wts[(w, b)]
            out.append((dict(pairs), weight))
            return
        w = min(remaining, key=lambda x: sum(1 for b in nbrs[x] if b not in used_b))
        rest = [x for x in remaining if x != w]
        for b in nbrs[w]:
            if b in used_b:
                continue
            used_b.add(b)
            pairs[w] = b
            rec(rest)
            del pairs[w]
            used_b.discard(b)

    rec(whites)
    return out


def block_structure(d: DiracMatrix, tol: float = 1e-12):
    """Blocks of mat^H mat split by primal/dual black vertices.

    Returns (delta_primal, delta_dual, coupling, k_count): the coupling is
    the primal-by-dual block whose nonzero entries (there are k_count of
    them, all +-i times a weight ratio) mark deficient quadrilaterals.
    """
    r = d.region
    sg = r.sg
    big = d.mat.conj().T @ d.mat
    primal_idx = [i for i, b in enumerate(r.blacks) if sg.is_primal(b)]
    dual_idx = [i for i, b in enumerate(r.blacks) if not sg.is_primal(b)]
    dp = big[np.ix_(primal_idx, primal_idx)]
    dd = big[np.ix_(dual_idx, dual_idx)]
    a = big[np.ix_(primal_idx, dual_idx)]
    k_count = int(np.count_nonzero(np.abs(a) > tol))
    return dp, dd, a, k_count
