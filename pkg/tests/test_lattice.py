import numpy as np
import pytest

from oracles import grid_ball_vertex_count, pq_layer_counts

from dimerpack.halfedge import Network, rotation_isomorphic
from dimerpack.lattice import (build_pq_tiling, contract_vertices, exhaustion,
                               face_layers, is_simply_connected, square_grid,
                               subpatch_from_faces)


def test_pq_440_single_square():
    g = build_pq_tiling(4, 4, 0)
    assert (g.n_vertices, g.n_edges, g.n_faces) == (4, 4, 2)


@pytest.mark.parametrize("d", range(7))
def test_pq_44_euler_all_depths(d):
    g = build_pq_tiling(4, 4, d)
    assert g.n_vertices - g.n_edges + g.n_faces == 2
    # closed forms for the square tiling ball
    assert g.n_vertices == (2 * d + 2) ** 2
    assert g.n_faces - 1 == (2 * d + 1) ** 2


@pytest.mark.parametrize("pq,depth", [((3, 7), 1), ((3, 7), 2), ((3, 7), 3),
                                      ((4, 5), 2), ((3, 8), 2), ((5, 5), 2)])
def test_pq_counts_match_layering_oracle(pq, depth):
    p, q = pq
    g = build_pq_tiling(p, q, depth)
    assert (g.n_vertices, g.n_edges, g.n_faces - 1) == pq_layer_counts(p, q, depth)


def test_pq_372_interior_degrees():
    g = build_pq_tiling(3, 7, 2)
    assert all(g.degree(v) == 7 for v in g.interior_vertices())
    assert all(g.face_degree(f) == 3 for f in g.interior_faces())


def test_pq_rejects_spherical():
    with pytest.raises(ValueError):
        build_pq_tiling(3, 5, 1)


def test_pq_deterministic_ids():
    g1 = build_pq_tiling(3, 7, 2)
    g2 = build_pq_tiling(3, 7, 2)
    assert np.array_equal(g1.origin, g2.origin)
    assert np.array_equal(g1.next_rot, g2.next_rot)


def test_square_grid_counts():
    g = square_grid(1)
    assert (g.n_vertices, g.n_edges, g.n_faces) == (4, 4, 2)
    g = square_grid(2)
    assert (g.n_vertices, g.n_edges, g.n_faces) == (9, 12, 5)
    g = square_grid(3)
    assert g.n_vertices - g.n_edges + g.n_faces == 2
    assert (g.n_vertices, g.n_edges, g.n_faces) == (16, 24, 10)


def test_dual_interior_count_matches_faces():
    g = build_pq_tiling(3, 7, 1)
    d = g.dual_graph()
    # one dual vertex per face, outer included and filterable
    assert d.n_vertices == g.n_faces
    interior = [f for f in range(g.n_faces) if f != g.outer_face]
    assert len(interior) == pq_layer_counts(3, 7, 1)[2]


def test_exhaustion_nested_and_counts():
    g = square_grid(8)
    steps = exhaustion(g, [1, 2, 3])
    for a, b in zip(steps, steps[1:]):
        assert set(a.vertices) <= set(b.vertices)
    for r, step in zip([1, 2, 3], steps):
        assert len(step.vertices) == grid_ball_vertex_count(r)


def test_exhaustion_simply_connected_steps():
    g = build_pq_tiling(3, 7, 3)
    steps = exhaustion(g, [1, 2])
    fl = face_layers(g)
    for step in steps:
        faces = set(step.sub.parent_faces)
        assert is_simply_connected(g, faces)


def test_exhaustion_depth_zero_is_root_face():
    g = build_pq_tiling(3, 7, 2)
    steps = exhaustion(g, [0])
    assert len(steps[0].vertices) == 3


def test_exhaustion_rejects_bad_schedule():
    g = square_grid(4)
    with pytest.raises(ValueError):
        exhaustion(g, [2, 2])


def test_contract_single_vertex_is_relabel():
    g = square_grid(2)
    net = Network.from_rotation_graph(g)
    wired, z = contract_vertices(g, {0})
    assert wired.n == net.n
    assert wired.n_edges == net.n_edges
    # degree of the contracted node equals the original degree of vertex 0
    assert len(wired.adj[z]) == len(net.adj[0])


def test_contract_boundary_degree_counts_incident_edges():
    g = square_grid(2)
    bnd = set(g.boundary_vertices())
    inner_outer_edges = sum(
        1 for e in range(g.n_edges)
        if len(set(g.edge_endpoints(e)) & bnd) == 1)
    wired, z = contract_vertices(g, bnd)
    assert len(wired.adj[z]) == inner_outer_edges


def test_contract_preserves_external_edge_count():
    g = square_grid(3)
    bnd = set(g.boundary_vertices())
    internal = sum(1 for e in range(g.n_edges)
                   if set(g.edge_endpoints(e)) <= bnd)
    wired, _ = contract_vertices(g, bnd)
    assert wired.n_edges == g.n_edges - internal


def test_contract_rejects_everything():
    g = square_grid(1)
    with pytest.raises(ValueError):
        contract_vertices(g, set(range(g.n_vertices)))


def test_subpatch_preserves_weights():
    g = square_grid(3)
    g.nu[:] = np.linspace(1.0, 2.0, g.n_edges)
    sub = subpatch_from_faces(g, g.interior_faces()[:4])
    for e in range(sub.graph.n_edges):
        u, v = sub.graph.edge_endpoints(e)
        pu, pv = sub.parent_vertices[u], sub.parent_vertices[v]
        pe = next(k for k in range(g.n_edges)
                  if set(g.edge_endpoints(k)) == {pu, pv})
        assert sub.graph.nu[e] == g.nu[pe]
