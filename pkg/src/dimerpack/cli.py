"""Command-line driver: verification suites, experiments, rendering.

Exit codes: 0 pass, 1 invariant failure, 2 configuration error,
3 missing input.  All artifacts embed the resolved configuration hash and
package version; reruns with the same hash are byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from . import geometry as geo
from .halfedge import Network
from .heights import variance_experiment, cycle_decomposition
from .kasteleyn import (build_dirac, block_structure, conditional_local_stats,
                        enumerate_matchings, invert_dirac, local_stats,
                        partition_function)
from .lattice import build_pq_tiling, face_layers, square_grid, subpatch_from_faces
from .packing import solve_double_packing
from .potential import (dual_dirichlet_laplacian, dirichlet_green, green_decay_fit,
                        inverse_dirac_via_green, isoperimetric_scan,
                        neumann_laplacian, primal_dirichlet_laplacian,
                        spectral_radius_estimate)
from .render import loops_svg, packing_svg, superposition_svg
from .sampler import pair_sampler
from .superposition import superpose, temperley_trim, two_corner_region


DEFAULT_CONFIG = {
    "seed": 1,
    "jobs": 1,
    "tol": 1e-8,
    "out": "out",
    "grid_radii": [8, 16, 32],
    "pq": [3, 7],
    "pq_depths": [2, 3, 4, 5],
    "samples": 20000,
    "render_family": "grid",
    "render_size": 3,
    "render_input": None,
    "weights": 1.0,
}


class ConfigError(ValueError):
    pass


def load_config(path=None, overrides=None) -> dict:
    cfg = dict(DEFAULT_CONFIG)
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path) as fh:
                user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}")
        unknown = set(user) - set(DEFAULT_CONFIG)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(user)
    for k, v in (overrides or {}).items():
        if v is not None:
            cfg[k] = v
    _validate_config(cfg)
    return cfg


def _validate_config(cfg):
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    if not isinstance(cfg["jobs"], int) or cfg["jobs"] < 1:
        raise ConfigError("jobs must be a positive integer")
    if not (isinstance(cfg["tol"], (int, float)) and cfg["tol"] > 0):
        raise ConfigError("tol must be positive")
    if not (isinstance(cfg["pq"], (list, tuple)) and len(cfg["pq"]) == 2):
        raise ConfigError("pq must be a [p, q] pair")
    p, q = cfg["pq"]
    if 2 * (p + q) > p * q:
        raise ConfigError(f"{{{p},{q}}} is spherical; need 1/p + 1/q <= 1/2")
    if not all(isinstance(r, int) and r >= 1 for r in cfg["grid_radii"]):
        raise ConfigError("grid_radii must be positive integers")
    if not all(isinstance(r, int) and r >= 0 for r in cfg["pq_depths"]):
        raise ConfigError("pq_depths must be non-negative integers")
    if not isinstance(cfg["samples"], int) or cfg["samples"] < 2:
        raise ConfigError("samples must be an integer >= 2")
    if not (isinstance(cfg["weights"], (int, float)) and cfg["weights"] > 0):
        raise ConfigError("weights must be a positive scalar")


def config_hash(cfg: dict) -> str:
    """Hash of the numerics-affecting configuration (output location and
    parallelism do not change any computed value)."""
    material = {k: v for k, v in cfg.items() if k not in ("out", "jobs")}
    blob = json.dumps(material, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _provenance(cfg):
    return {"config_hash": config_hash(cfg), "version": __version__, "config": cfg}


def _write_csv(path, header, rows, cfg):
    def fmt(x):
        if isinstance(x, (float, np.floating)):
            return repr(float(x))
        return str(x)
    with open(path, "w") as fh:
        fh.write(f"# dimerpack {__version__} config_hash={config_hash(cfg)}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(x) for x in row) + "\n")


# ----------------------------------------------------------------------
# verify
# ----------------------------------------------------------------------
def _trimmed(builder, **kw):
    g = builder()
    p = solve_double_packing(g, **kw)
    sg = superpose(g, p)
    return g, p, sg, temperley_trim(sg)


def run_verify(cfg) -> dict:
    suites = []

    g3 = square_grid(3)
    p3 = solve_double_packing(g3)
    rep3 = p3.certify(tol=1e-10)
    suites.append({"name": "packing_euclidean_grid3", "passed": rep3.passed,
                   "residuals": rep3.residuals})

    gp = build_pq_tiling(3, 7, 2)
    pp = solve_double_packing(gp)
    repp = pp.certify(tol=1e-8)
    suites.append({"name": "packing_hyperbolic_372", "passed": repp.passed,
                   "residuals": repp.residuals})

    worst_sign = 0.0
    regions = {}
    for label, (g, p) in {"grid3": (g3, p3), "pq372": (gp, pp)}.items():
        sg = superpose(g, p)
        r = temperley_trim(sg)
        d = build_dirac(r)
        worst_sign = max(worst_sign, d.face_sign_residual())
        regions[label] = (g, sg, r)
    suites.append({"name": "face_sign_condition", "passed": worst_sign < 1e-10,
                   "residuals": {"worst": worst_sign}})

    worst_lap = 0.0
    for label, (g, sg, r) in regions.items():
        d = build_dirac(r, variant="normalized")
        dp, dd, a, k = block_structure(d)
        lapn = neumann_laplacian(g, r.removed_black).matrix
        lapd = dual_dirichlet_laplacian(g).matrix
        worst_lap = max(worst_lap,
                        float(np.max(np.abs(dp - lapn))),
                        float(np.max(np.abs(dd - lapd))),
                        float(np.max(np.abs(a))))
    suites.append({"name": "laplacian_factorization", "passed": worst_lap < 1e-12,
                   "residuals": {"worst": worst_lap}})

    g1 = square_grid(1)
    p1 = solve_double_packing(g1)
    sg1 = superpose(g1, p1)
    r1 = temperley_trim(sg1)
    d1 = build_dirac(r1)
    z_det = partition_function(d1)
    ms = enumerate_matchings(r1)
    z_enum = sum(wt for _, wt in ms)
    rel = abs(z_det - z_enum) / z_enum
    suites.append({"name": "determinant_vs_enumeration",
                   "passed": rel < 1e-9 and len(ms) == 4,
                   "residuals": {"relative_error": rel, "matchings": len(ms)}})

    worst_inv = 0.0
    for label, (g, sg, r) in regions.items():
        dn = build_dirac(r, variant="normalized")
        direct = invert_dirac(dn)
        via_green = inverse_dirac_via_green(r)
        worst_inv = max(worst_inv, float(np.max(np.abs(direct - via_green))))
    suites.append({"name": "inverse_green_crosscheck", "passed": worst_inv < 1e-8,
                   "residuals": {"worst": worst_inv}})

    report = {"suites": suites, "passed": all(s["passed"] for s in suites)}
    return report


def cmd_verify(cfg) -> int:
    os.makedirs(cfg["out"], exist_ok=True)
    report = run_verify(cfg)
    report.update(_provenance(cfg))
    path = os.path.join(cfg["out"], "report.json")
    with open(path, "w") as fh:
        json.dump(report, fh, indent=1, default=float)
    if report["passed"]:
        print(f"verify: all {len(report['suites'])} suites passed -> {path}")
        return 0
    first = next(s["name"] for s in report["suites"] if not s["passed"])
    print(f"verify: FAILED at suite '{first}' -> {path}", file=sys.stderr)
    return 1


# ----------------------------------------------------------------------
# experiment
# ----------------------------------------------------------------------
def pq_two_corner_region(p: int, q: int, depth: int, weights: float = 1.0):
    """Two-convex-corner region around the depth-d ball of the {p,q}
    tiling, carved from a depth-(d+1) ambient patch with the two corners
    taken antipodal on the sub-patch boundary."""
    from .superposition import _boundary_cycle
    amb = build_pq_tiling(p, q, depth + 1)
    amb.nu[:] = weights
    amb.nu_dual[:] = weights
    pk = solve_double_packing(amb)
    sg = superpose(amb, pk)
    fd = face_layers(amb)
    sub = [f for f in amb.interior_faces() if 0 <= fd[f] <= depth]
    cyc = _boundary_cycle(amb, set(sub))
    region, _ = two_corner_region(sg, sub, cyc[0], cyc[len(cyc) // 2])
    return region


def _variance_label(args):
    family, size, pq, samples, seed, weights = args
    if family == "grid":
        g = square_grid(size)
        g.nu[:] = weights
        g.nu_dual[:] = weights
        p = solve_double_packing(g)
        sg = superpose(g, p)
        region = temperley_trim(sg)
    else:
        # hyperbolic plateau is cleanest under the two-corner boundary:
        # trimmed face-layer patches carry a layer-parity boundary effect
        region = pq_two_corner_region(pq[0], pq[1], size, weights)
    rows, _ = variance_experiment({size: region}, samples, seed)
    return rows[0]


def run_variance(cfg, family: str):
    sizes = cfg["grid_radii"] if family == "grid" else cfg["pq_depths"]
    tasks = [(family, s, tuple(cfg["pq"]), cfg["samples"], cfg["seed"],
              float(cfg["weights"])) for s in sizes]
    if cfg["jobs"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["jobs"]) as pool:
            rows = list(pool.map(_variance_label, tasks))
    else:
        rows = [_variance_label(t) for t in tasks]
    xs = np.log([float(r["label"]) for r in rows]) if len(rows) > 1 else None
    slope = None
    if xs is not None:
        y = np.array([r["var"] for r in rows])
        a = np.vstack([xs, np.ones_like(xs)]).T
        coef, *_ = np.linalg.lstsq(a, y, rcond=None)
        w = xs - xs.mean()
        se = float(np.sqrt(np.sum((w / np.sum(w ** 2)) ** 2 *
                                  np.array([r["stderr_var"] for r in rows]) ** 2)))
        slope = {"slope": float(coef[0]), "stderr": se}
    return rows, slope


def run_correlation_scan(cfg, depth: int = 3, max_sep: int | None = None):
    """Worst single-edge covariance |P(e1,e2) - P(e1)P(e2)| at each
    separation from a central test edge, on a hyperbolic trimmed patch.

    The extremal edge per separation is located with two-edge minors; its
    covariance is then recomputed through the vertex-deleted conditional
    (P(e1) * P(e2 | e1)), and the two routes are required to agree.
    """
    p, q = cfg["pq"]
    g = build_pq_tiling(p, q, depth)
    pk = solve_double_packing(g)
    sg = superpose(g, pk)
    region = temperley_trim(sg)
    d = build_dirac(region)
    net = Network.from_rotation_graph(g)
    dist = _bfs_dist(net, 0)

    base_w = min(w for w in region.whites if 0 in g.edge_endpoints(w))
    e1 = (base_w, 0)
    p1 = local_stats(d, [e1])
    excluded = set(g.edge_endpoints(base_w))

    best = {}
    for w in region.whites:
        if w == base_w:
            continue
        u, v = g.edge_endpoints(w)
        sep = int(min(dist[u], dist[v]))
        if max_sep is not None and sep > max_sep:
            continue
        for b in (u, v):
            if not region.has_black(b) or b in excluded:
                continue
            p2 = local_stats(d, [(w, b)])
            joint = local_stats(d, [e1, (w, b)])
            cov = abs(joint - p1 * p2)
            if sep not in best or cov > best[sep][0]:
                best[sep] = (cov, (w, b), p2, joint)

    rows = []
    for sep in sorted(best):
        cov, e2, p2, joint = best[sep]
        cond = conditional_local_stats(d, [e2], {e1[0]: e1[1]})
        joint_cond = p1 * cond if cond is not None else 0.0
        if abs(joint_cond - joint) > 1e-9:
            raise RuntimeError(
                f"conditional route disagrees with the joint minor at {e2}")
        rows.append((sep, abs(joint_cond - p1 * p2)))
    return rows


def _bfs_dist(net: Network, x0: int):
    dist = np.full(net.n, -1, int)
    dist[x0] = 0
    queue = [x0]
    while queue:
        u = queue.pop(0)
        for (v, _, _) in net.adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def run_green_decay(cfg, depth: int = 3):
    p, q = cfg["pq"]
    g = build_pq_tiling(p, q, depth)
    # walk on the infinite tiling killed outside the patch: with uniform
    # weights the conductances are 1, so every full degree is q
    lap = primal_dirichlet_laplacian(g, range(g.n_vertices), full_degree=float(q))
    gt = dirichlet_green(lap)
    net = Network.from_rotation_graph(g)
    dist = _bfs_dist(net, 0)
    i0 = gt._index[0]
    vals = gt.values[i0, :]
    slope, r2 = green_decay_fit(np.asarray(vals), dist.astype(float))
    return [(int(dist[i]), float(vals[gt._index[i]])) for i in range(g.n_vertices)], \
        {"slope": slope, "r2": r2}


def run_diagnostics(cfg, depth: int = 3) -> dict:
    """{rho_hat, cheeger_scan, decay_slope} for the configured tiling."""
    p, q = cfg["pq"]
    g = build_pq_tiling(p, q, depth)
    net = Network.from_rotation_graph(g)
    rho = spectral_radius_estimate(net, 0, 30, absorbing=g.boundary_vertices())
    _, cheeger = isoperimetric_scan(net, 12, seeds=[0],
                                    allowed=g.interior_vertices())
    _, fit = run_green_decay(cfg, depth)
    return {"rho_hat": rho, "cheeger_scan": cheeger,
            "decay_slope": fit["slope"], "decay_r2": fit["r2"]}


def cmd_experiment(cfg) -> int:
    os.makedirs(cfg["out"], exist_ok=True)
    summary = {"provenance": _provenance(cfg)}

    rows_g, slope_g = run_variance(cfg, "grid")
    _write_csv(os.path.join(cfg["out"], "variance_grid.csv"),
               ["radius", "n", "mean", "var", "stderr_mean", "stderr_var"],
               [(r["label"], r["n"], r["mean"], r["var"], r["stderr_mean"],
                 r["stderr_var"]) for r in rows_g], cfg)
    summary["grid_variance_slope_vs_log"] = slope_g

    rows_p, slope_p = run_variance(cfg, "pq")
    _write_csv(os.path.join(cfg["out"], "variance_pq.csv"),
               ["depth", "n", "mean", "var", "stderr_mean", "stderr_var"],
               [(r["label"], r["n"], r["mean"], r["var"], r["stderr_mean"],
                 r["stderr_var"]) for r in rows_p], cfg)
    summary["pq_variance_slope_vs_log"] = slope_p

    corr = run_correlation_scan(cfg)
    _write_csv(os.path.join(cfg["out"], "correlation_decay.csv"),
               ["separation", "abs_cov"], corr, cfg)
    summary["correlation_monotone"] = bool(
        all(b[1] < a[1] for a, b in zip(corr, corr[1:])))

    decay_rows, fit = run_green_decay(cfg)
    _write_csv(os.path.join(cfg["out"], "green_decay.csv"),
               ["distance", "green"], decay_rows, cfg)
    summary["green_decay_fit"] = fit
    summary["diagnostics"] = run_diagnostics(cfg)

    # edge-probability table of a small trimmed patch, for regressions
    from .kasteleyn import edge_probability_rows
    g = square_grid(3)
    g.nu[:] = cfg["weights"]
    g.nu_dual[:] = cfg["weights"]
    p = solve_double_packing(g)
    region = temperley_trim(superpose(g, p))
    d = build_dirac(region)
    _write_csv(os.path.join(cfg["out"], "edge_probabilities.csv"),
               ["white", "black", "probability"],
               edge_probability_rows(d), cfg)

    with open(os.path.join(cfg["out"], "experiment_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1, default=float)
    print(f"experiment: artifacts in {cfg['out']}")
    return 0


# ----------------------------------------------------------------------
# render
# ----------------------------------------------------------------------
def cmd_render(cfg) -> int:
    os.makedirs(cfg["out"], exist_ok=True)
    fam = cfg["render_family"]
    size = cfg["render_size"]
    if cfg.get("render_input"):
        path = cfg["render_input"]
        if not os.path.exists(path):
            print(f"render: input graph not found: {path}", file=sys.stderr)
            return 3
        from .halfedge import GraphStructureError, RotationPlanarGraph
        try:
            g = RotationPlanarGraph.load_json(path)
        except (GraphStructureError, KeyError, ValueError) as exc:
            print(f"render: invalid input graph: {exc}", file=sys.stderr)
            return 2
        g.meta.setdefault("geometry", "euclidean")
    elif fam == "grid":
        g = square_grid(size)
    elif fam == "pq":
        g = build_pq_tiling(cfg["pq"][0], cfg["pq"][1], size)
    else:
        print(f"render: unknown family {fam!r}", file=sys.stderr)
        return 2
    p = solve_double_packing(g)
    sg = superpose(g, p)
    packing_svg(p, os.path.join(cfg["out"], "packing.svg"))
    superposition_svg(sg, os.path.join(cfg["out"], "superposition.svg"))
    region = temperley_trim(sg)
    m1, m2 = pair_sampler(region, cfg["seed"], cfg["seed"] + 1)
    dec = cycle_decomposition(m1, m2)
    loops_svg(sg, dec, os.path.join(cfg["out"], "loops.svg"))
    print(f"render: packing.svg superposition.svg loops.svg in {cfg['out']}")
    return 0


# ----------------------------------------------------------------------
def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="dimerpack",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=["verify", "experiment", "render"])
    ap.add_argument("--config", default=None, help="JSON config file")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--jobs", type=int, default=None)
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--tol", type=float, default=None)
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config, {"seed": args.seed, "jobs": args.jobs,
                                        "out": args.out, "tol": args.tol})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.command == "verify":
        return cmd_verify(cfg)
    if args.command == "experiment":
        return cmd_experiment(cfg)
    if args.command == "render":
        return cmd_render(cfg)
    return 2


if __name__ == "__main__":
    sys.exit(main())
