"""Spanning-tree and perfect-matching samplers.

Wilson's loop-erased-walk algorithm samples weighted spanning trees; the
constructive correspondence with perfect matchings then yields exact
dimer samples for trimmed and two-corner regions: every primal vertex is
matched to the white of its outgoing tree edge, and the leftover whites
orient the complementary dual forest toward the dual root.

The walk core uses an explicit xorshift64* generator over uint64 state so
results are bit-identical with or without the optional numba jit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .halfedge import Network
from .superposition import Region

__all__ = [
    "DirectedTree", "Matching", "wilson_ust", "stream_seed",
    "tree_bijection_network", "temperley_forward", "temperley_inverse",
    "sample_matching", "pair_sampler",
]

_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_MULT = np.uint64(0x2545F4914F6CDD1D)
_DOUBLE_SCALE = 1.0 / 9007199254740992.0   # 2^-53


def stream_seed(*parts) -> int:
    """Deterministic 64-bit stream seed from arbitrary labels."""
    h = hashlib.blake2b(repr(parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little") or 1


def _wilson_core(ptr, nbr, edge, cumw, totw, root, seed):
    """Loop-erased-walk spanning tree; returns (parent_slot, steps).

    parent_slot[v] indexes into the CSR row of v.  Last-exit bookkeeping:
    after the walk from a start vertex hits the tree, the surviving choice
    at each visited vertex is the final one made there.  The xorshift64*
    stream is written in uint64 arithmetic for the optional jit; the pure
    fallback below reproduces it bit for bit with masked Python ints.
    """
    n = len(ptr) - 1
    in_tree = np.zeros(n, np.bool_)
    choice = np.full(n, -1, np.int64)
    parent = np.full(n, -1, np.int64)
    in_tree[root] = True
    state = np.uint64(seed)
    steps = 0
    for start in range(n):
        if in_tree[start]:
            continue
        u = start
        while not in_tree[u]:
            state ^= state >> np.uint64(12)
            state ^= (state << np.uint64(25)) & _M64
            state ^= state >> np.uint64(27)
            bits = ((state * _MULT) & _M64) >> np.uint64(11)
            r = float(bits) * _DOUBLE_SCALE * totw[u]
            k = ptr[u]
            last = ptr[u + 1] - 1
            while k < last and cumw[k] < r:
                k += 1
            choice[u] = k
            u = nbr[k]
            steps += 1
        u = start
        while not in_tree[u]:
            k = choice[u]
            parent[u] = k
            in_tree[u] = True
            u = nbr[k]
    return parent, steps


def _wilson_core_pure(ptr, nbr, edge, cumw, totw, root, seed):
    """Masked-int replica of :func:`_wilson_core` (no numpy overflow noise)."""
    mask = 0xFFFFFFFFFFFFFFFF
    mult = 0x2545F4914F6CDD1D
    n = len(ptr) - 1
    in_tree = np.zeros(n, np.bool_)
    choice = np.full(n, -1, np.int64)
    parent = np.full(n, -1, np.int64)
    in_tree[root] = True
    state = int(seed) & mask
    steps = 0
    for start in range(n):
        if in_tree[start]:
            continue
        u = start
        while not in_tree[u]:
            state ^= state >> 12
            state ^= (state << 25) & mask
            state ^= state >> 27
            bits = ((state * mult) & mask) >> 11
            r = bits * _DOUBLE_SCALE * totw[u]
            k = ptr[u]
            last = ptr[u + 1] - 1
            while k < last and cumw[k] < r:
                k += 1
            choice[u] = k
            u = nbr[k]
            steps += 1
        u = start
        while not in_tree[u]:
            k = choice[u]
            parent[u] = k
            in_tree[u] = True
            u = nbr[k]
    return parent, steps


try:  # optional jit; the fallback stream is bit-identical
    import numba

    _wilson_core_fast = numba.njit(cache=True)(_wilson_core)
except Exception:  # pragma: no cover - numba simply absent
    _wilson_core_fast = _wilson_core_pure


@dataclass
class DirectedTree:
    root: int
    parent_vertex: np.ndarray
    parent_edge: np.ndarray
    steps: int = 0

    def edges(self):
        return [int(e) for e in self.parent_edge if e >= 0]


@dataclass
class Matching:
    region: Region
    pairs: dict    # white -> black
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.pairs = {int(w): int(b) for w, b in self.pairs.items()}
        r = self.region
        if len(self.pairs) != r.n_white:
            raise ValueError("matching does not cover every white exactly once")
        hit = np.zeros(r.n_black, dtype=bool)
        for w, b in self.pairs.items():
            if not r.has_white(w) or not r.has_black(b):
                raise ValueError(f"pair ({w},{b}) outside the region")
            bi = r.black_index(b)
            if hit[bi]:
                raise ValueError(f"black {b} covered twice")
            hit[bi] = True
        if not hit.all():
            raise ValueError("matching does not cover every black exactly once")

    def edge_set(self):
        return sorted(self.pairs.items())

    def to_json(self) -> str:
        import json
        return json.dumps({"pairs": self.edge_set(), "region": self.region.name})

    def __eq__(self, other):
        return isinstance(other, Matching) and self.pairs == other.pairs

    def symmetric_difference(self, other: "Matching"):
        a, b = self.pairs, other.pairs
        return sorted({(w, a[w]) for w in a if a[w] != b[w]} |
                      {(w, b[w]) for w in b if a[w] != b[w]})


class _CSRNet:
    def __init__(self, net: Network):
        n = net.n
        deg = [len(net.adj[v]) for v in range(n)]
        self.ptr = np.zeros(n + 1, np.int64)
        self.ptr[1:] = np.cumsum(deg)
        m = self.ptr[-1]
        self.nbr = np.zeros(m, np.int64)
        self.edge = np.zeros(m, np.int64)
        self.cumw = np.zeros(m, float)
        self.totw = np.zeros(n, float)
        for v in range(n):
            c = 0.0
            for i, (u, ei, w) in enumerate(net.adj[v]):
                k = self.ptr[v] + i
                self.nbr[k] = u
                self.edge[k] = ei
                c += w
                self.cumw[k] = c
            self.totw[v] = c


def wilson_ust(net: Network, root: int, seed: int) -> DirectedTree:
    """Weighted uniform spanning tree (probability prop. to the product of
    conductances) as parent pointers toward the root; deterministic in seed."""
    if "_connected" not in net.meta:
        net.meta["_connected"] = net.is_connected()
    if not net.meta["_connected"]:
        raise ValueError("network must be connected")
    csr = net.meta.get("_csr")
    if csr is None:
        csr = _CSRNet(net)
        net.meta["_csr"] = csr
    parent_slot, steps = _wilson_core_fast(
        csr.ptr, csr.nbr, csr.edge, csr.cumw, csr.totw,
        int(root), np.uint64(stream_seed("wilson", int(seed))))
    pv = np.full(net.n, -1, np.int64)
    pe = np.full(net.n, -1, np.int64)
    for v in range(net.n):
        k = parent_slot[v]
        if k >= 0:
            pv[v] = csr.nbr[k]
            pe[v] = csr.edge[k]
    return DirectedTree(root=int(root), parent_vertex=pv, parent_edge=pe,
                        steps=int(steps))


# ----------------------------------------------------------------------
# tree <-> matching correspondence
# ----------------------------------------------------------------------
def tree_bijection_network(region: Region):
    """The weighted graph whose rooted spanning trees index the region's
    matchings: active primal vertices plus one root absorbing the trimmed
    vertex / wired exterior; one network edge per white with a primal side.

    Returns (network, root id, white id per network edge, active vertices).
    """
    sg = region.sg
    act = [b for b in region.blacks if sg.is_primal(b)]
    idx = {v: i for i, v in enumerate(act)}
    root = len(act)
    edges = []
    white_of = []
    for w in region.whites:
        (u, v), _ = sg.white_endpoints(w)
        nu, nud = sg.white_weights(w)
        iu, iv = idx.get(u), idx.get(v)
        if iu is None and iv is None:
            continue
        edges.append((iu if iu is not None else root,
                      iv if iv is not None else root, nu / nud))
        white_of.append(w)
    net = Network(root + 1, edges)
    return net, root, white_of, act


def _dual_sides(region: Region):
    """Per white: the two dual-side nodes, as dense dual indexes or -1
    for the exterior root; cached on the region."""
    cached = region.meta.get("_dual_sides")
    if cached is not None:
        return cached
    sg = region.sg
    dual_blacks = [b for b in region.blacks if not sg.is_primal(b)]
    didx = {b: i for i, b in enumerate(dual_blacks)}
    sides = np.full((region.n_white, 2), -1, dtype=np.int64)
    for wi, w in enumerate(region.whites):
        _, duals = sg.white_endpoints(w)
        kept = [didx[f] for f in duals if f in didx]
        for j, f in enumerate(kept):
            sides[wi, j] = f
    cached = (sides, dual_blacks)
    region.meta["_dual_sides"] = cached
    return cached


def temperley_forward(tree: DirectedTree, region: Region) -> Matching:
    """Matching from a rooted directed spanning tree of the bijection
    network: tree edges match their primal child's white; the remaining
    whites are oriented as the dual forest toward the dual root."""
    net, root, white_of, act = _bij(region)
    if tree.root != root or len(tree.parent_vertex) != net.n:
        raise ValueError("tree does not belong to this region's network")
    pairs = {}
    used = np.zeros(region.n_white, dtype=bool)
    wi_of = region._wi
    for i, v in enumerate(act):
        ei = int(tree.parent_edge[i])
        if ei < 0:
            raise ValueError("non-root vertex without outgoing tree edge")
        w = white_of[ei]
        pairs[w] = v
        used[wi_of[w]] = True

    # dual forest: the leftover whites form a spanning tree of the kept
    # dual vertices plus one exterior root; orient each toward the root.
    sides, dual_blacks = _dual_sides(region)
    n_d = len(dual_blacks)
    adj = [[] for _ in range(n_d + 1)]   # node n_d is the exterior root
    for wi in np.nonzero(~used)[0]:
        a, b = int(sides[wi, 0]), int(sides[wi, 1])
        if a < 0 and b < 0:
            raise ValueError(
                f"white {region.whites[wi]} cannot be matched on either side")
        a = a if a >= 0 else n_d
        b = b if b >= 0 else n_d
        adj[a].append((wi, b))
        adj[b].append((wi, a))
    assigned = np.full(n_d, -1, dtype=np.int64)
    queue = [n_d]
    seen = np.zeros(n_d + 1, dtype=bool)
    seen[n_d] = True
    while queue:
        x = queue.pop()
        for (wi, y) in adj[x]:
            if seen[y]:
                continue
            seen[y] = True
            assigned[y] = wi
            queue.append(y)
    if not seen.all():
        raise ValueError("dual forest does not cover every kept dual vertex")
    for f, wi in enumerate(assigned):
        pairs[region.whites[wi]] = dual_blacks[f]
    return Matching(region=region, pairs=pairs)


def temperley_inverse(m: Matching, region: Region):
    """Directed tree and dual forest back from a matching; exact inverse
    of :func:`temperley_forward`."""
    sg = region.sg
    net, root, white_of, act = _bij(region)
    idx = {v: i for i, v in enumerate(act)}
    ei_of_white = {w: i for i, w in enumerate(white_of)}
    pv = np.full(net.n, -1, np.int64)
    pe = np.full(net.n, -1, np.int64)
    matched_white_of_black = {b: w for w, b in m.pairs.items()}
    for i, v in enumerate(act):
        w = matched_white_of_black.get(v)
        if w is None:
            raise ValueError("matching misses a primal vertex")
        ei = ei_of_white[w]
        (a, b, _) = net.edges[ei]
        pv[i] = b if a == i else a
        pe[i] = ei
    # acyclicity: walk each vertex to the root
    for i in range(len(act)):
        u, hops = i, 0
        while u != root:
            u = int(pv[u])
            hops += 1
            if hops > net.n:
                raise ValueError("matching is not of tree type (cycle found)")
    tree = DirectedTree(root=root, parent_vertex=pv, parent_edge=pe)
    dual_parent = {b: w for w, b in m.pairs.items() if not sg.is_primal(b)}
    return tree, dual_parent


def _bij(region: Region):
    cache = region.meta.get("_bijection")
    if cache is None:
        cache = tree_bijection_network(region)
        region.meta["_bijection"] = cache
    return cache


def sample_matching(region: Region, seed: int) -> Matching:
    """Exact dimer sample via Wilson on the bijection network."""
    net, root, white_of, act = _bij(region)
    tree = wilson_ust(net, root, stream_seed(region.name, int(seed)))
    m = temperley_forward(tree, region)
    m.meta["seed"] = int(seed)
    return m


def pair_sampler(region: Region, seed1: int, seed2: int) -> tuple[Matching, Matching]:
    """Two independent samples (distinct derived streams)."""
    if seed1 == seed2:
        raise ValueError("pair seeds must differ")
    return (sample_matching(region, seed1), sample_matching(region, seed2))


def write_sample_archive(region: Region, seeds, path):
    """Newline-delimited JSON records, one sampled matching per line."""
    with open(path, "w") as fh:
        for s in seeds:
            fh.write(sample_matching(region, int(s)).to_json() + "\n")
