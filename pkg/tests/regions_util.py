"""Randomized small-region builders shared by exactness tests."""

import numpy as np

from dimerpack.lattice import build_pq_tiling, face_layers, square_grid, subpatch_from_faces
from dimerpack.packing import solve_double_packing
from dimerpack.superposition import (RegionError, superpose, temperley_trim,
                                     two_corner_region)


def random_face_union(g, rng, n_faces):
    """A random connected union of interior faces (holes possible; the
    caller filters those by checking the traced face count)."""
    interior = g.interior_faces()
    faces = [int(rng.choice(interior))]
    while len(faces) < n_faces:
        nbrs = set()
        for f in faces:
            for h in g.faces[f]:
                nb = int(g.face_of[h ^ 1])
                if nb != g.outer_face and nb not in faces:
                    nbrs.add(nb)
        if not nbrs:
            break
        faces.append(int(rng.choice(sorted(nbrs))))
    return faces


def random_trimmed_region(rng, family="grid", max_whites=14, weights="random"):
    """A trimmed region with at most max_whites whites, random weights."""
    parent = square_grid(5) if family == "grid" else build_pq_tiling(3, 7, 2)
    for _ in range(50):
        n_faces = int(rng.integers(1, 5 if family == "grid" else 7))
        faces = random_face_union(parent, rng, n_faces)
        sub = subpatch_from_faces(parent, faces)
        if len(sub.graph.interior_faces()) != len(faces):
            continue   # hole got traced as a face; resample
        if sub.graph.n_edges > max_whites:
            continue
        g = sub.graph
        if weights == "random":
            g.nu[:] = rng.uniform(0.5, 2.0, g.n_edges)
            g.nu_dual[:] = rng.uniform(0.5, 2.0, g.n_edges)
        p = solve_double_packing(g)
        sg = superpose(g, p)
        bnd = sorted(g.boundary_vertices())
        b0 = int(bnd[int(rng.integers(0, len(bnd)))])
        return temperley_trim(sg, b0)
    raise RuntimeError("could not build a random region")


def random_two_corner_region(rng, weights="random"):
    """A two-corner region around the center face of a 3x3 grid."""
    g = square_grid(3)
    if weights == "random":
        g.nu[:] = rng.uniform(0.5, 2.0, g.n_edges)
        g.nu_dual[:] = rng.uniform(0.5, 2.0, g.n_edges)
    p = solve_double_packing(g)
    sg = superpose(g, p)
    fl = face_layers(g)
    center = [f for f in range(g.n_faces) if fl[f] == 0][0]
    cv = g.face_vertices(center)
    for _ in range(10):
        i = int(rng.integers(0, 4))
        j = (i + 1 + int(rng.integers(0, 2))) % 4
        try:
            region, _ = two_corner_region(sg, [center], cv[i], cv[j])
            return region
        except RegionError:
            continue
    raise RuntimeError("could not build a two-corner region")
