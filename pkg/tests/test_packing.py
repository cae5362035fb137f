import numpy as np
import pytest

from oracles import regular_kite_radii_bisection

from dimerpack.geometry import EUCLIDEAN, HYPERBOLIC
from dimerpack.lattice import build_pq_tiling, square_grid
from dimerpack.packing import PackingError, solve_double_packing

# regular {3,7} vertex radius from the 1-variable bisection oracle,
# frozen; recomputed below to guard the frozen value itself
REG_37_RV = 0.5452748317535436
REG_37_RF = 0.2831281533676574


def test_frozen_oracle_values():
    rv, rf = regular_kite_radii_bisection(3, 7)
    assert abs(rv - REG_37_RV) < 1e-12
    assert abs(rf - REG_37_RF) < 1e-12


def test_grid_full_symmetry(sq3):
    g, p, sg, region = sq3
    assert len(set(p.vertex_radius.tolist())) == 1
    finite = p.face_radius[np.isfinite(p.face_radius)]
    assert len(set(finite.tolist())) == 1


def test_grid_orthogonality_residual(sq3):
    _, p, _, _ = sq3
    rep = p.certify(tol=1e-10)
    assert rep.passed
    assert rep.orthogonality < 1e-10


def test_perpendicularity_identity_all_incidences(sq4):
    g, p, _, _ = sq4
    for f in g.interior_faces():
        for v in g.face_vertices(f):
            lhs = abs(p.vc_euclid[v] - p.fc_euclid[f]) ** 2
            rhs = p.vr_euclid[v] ** 2 + p.fr_euclid[f] ** 2
            assert abs(lhs - rhs) < 1e-10


def test_hyperbolic_center_radius_matches_oracle(pq372):
    g, p, _, _ = pq372
    assert p.geometry == HYPERBOLIC
    assert abs(p.vertex_radius[0] - REG_37_RV) < 1e-10
    rep = p.certify(tol=1e-8)
    assert rep.passed


def test_hyperbolic_certify_373():
    g = build_pq_tiling(3, 7, 3)
    p = solve_double_packing(g)
    rep = p.certify(tol=1e-8, check_disjoint=True)
    assert rep.passed
    assert rep.interiors_disjoint


def test_solver_iterates_under_perturbed_boundary():
    g = build_pq_tiling(3, 7, 2)
    p = solve_double_packing(g, boundary=0.7)
    assert p.report.iterations > 5
    assert p.report.max_angle_residual < 1e-12
    assert p.report.monotone_after_transient()
    assert p.certify(tol=1e-8).passed


def test_solver_nonconvergence_error():
    g = build_pq_tiling(3, 7, 2)
    with pytest.raises(PackingError):
        solve_double_packing(g, boundary=0.7, max_iter=3)


def test_certify_detects_radius_perturbation(sq3):
    g, p0, _, _ = sq3
    p = solve_double_packing(g)
    p.vr_euclid = p.vr_euclid.copy()
    p.vr_euclid[0] += 1e-3
    rep = p.certify(tol=1e-10)
    assert not rep.passed
    assert rep.orthogonality >= 1e-4 or rep.primal_tangency >= 1e-4


def test_certify_reports_all_residuals(sq3):
    _, p, _, _ = sq3
    rep = p.certify()
    keys = set(rep.residuals)
    assert keys == {"primal_tangency", "dual_tangency", "orthogonality",
                    "tangency_point", "perpendicularity"}


def test_edge_metric_values(sq3):
    g, p, _, _ = sq3
    m = p.edge_metric()
    assert np.all(m > 0)
    # all grid radii are 1/2, so every edge has metric 1
    assert np.allclose(m, 1.0)


def test_edge_metric_l2_bound(pq372):
    g, p, _, _ = pq372
    m = p.edge_metric()
    u = p.vertex_radius[g.origin[0::2]]
    v = p.vertex_radius[g.origin[1::2]]
    assert np.sum(m ** 2) <= 2.0 * np.sum(u ** 2 + v ** 2) + 1e-12


def test_dual_perpendicular_crossing(sq3):
    _, p, _, _ = sq3
    rep = p.certify()
    assert rep.perpendicularity < 1e-10  # |cos angle| at the crossing


def test_interiors_disjoint_grid(sq4):
    _, p, _, _ = sq4
    rep = p.certify(check_disjoint=True)
    assert rep.interiors_disjoint


def test_euclidean_geometry_tag(sq3):
    _, p, _, _ = sq3
    assert p.geometry == EUCLIDEAN
