"""Euclidean-plane and Poincare-disk geometric primitives.

All hyperbolic points live in the open unit disk as complex numbers.
Directions at a point are Euclidean chart angles; the chart is conformal,
so rotating by an intrinsic angle equals rotating the chart angle.
"""

from __future__ import annotations

import cmath
import math

EUCLIDEAN = "euclidean"
HYPERBOLIC = "hyperbolic-poincare"


def mobius_to_origin(base: complex, z: complex) -> complex:
    """Disk automorphism sending base -> 0."""
    return (z - base) / (1.0 - base.conjugate() * z)


def mobius_from_origin(base: complex, z: complex) -> complex:
    """Inverse of :func:`mobius_to_origin`."""
    return (z + base) / (1.0 + base.conjugate() * z)


def distance(geometry: str, z1: complex, z2: complex) -> float:
    if geometry == EUCLIDEAN:
        return abs(z2 - z1)
    t = abs(mobius_to_origin(z1, z2))
    return 2.0 * math.atanh(min(t, 1.0 - 1e-17))


def point_at(geometry: str, base: complex, angle: float, dist: float) -> complex:
    """Point at given distance from base along the geodesic with chart angle."""
    if geometry == EUCLIDEAN:
        return base + dist * cmath.exp(1j * angle)
    step = math.tanh(dist / 2.0) * cmath.exp(1j * angle)
    return mobius_from_origin(base, step)


def direction(geometry: str, base: complex, target: complex) -> float:
    """Chart angle at base of the geodesic toward target."""
    if geometry == EUCLIDEAN:
        return cmath.phase(target - base)
    return cmath.phase(mobius_to_origin(base, target))


def kite_half_angle(geometry: str, r_self: float, r_other: float) -> float:
    """Half of the kite angle at a circle of radius r_self whose incident
    orthogonal circle has radius r_other (right triangle with legs
    r_self, r_other; angle at the r_self corner)."""
    if geometry == EUCLIDEAN:
        return math.atan2(r_other, r_self)
    return math.atan2(math.tanh(r_other), math.sinh(r_self))


def kite_hypotenuse(geometry: str, r1: float, r2: float) -> float:
    """Distance between centers of two orthogonally intersecting circles."""
    if geometry == EUCLIDEAN:
        return math.hypot(r1, r2)
    return math.acosh(math.cosh(r1) * math.cosh(r2))


def circle_to_euclidean(geometry: str, center: complex, radius: float):
    """Euclidean (center, radius) of the drawn circle.

    A hyperbolic circle in the Poincare disk is a Euclidean circle whose
    Euclidean center lies on the diameter line through the hyperbolic
    center; it is recovered from the two diametric points on that line.
    """
    if geometry == EUCLIDEAN:
        return center, radius
    phi = cmath.phase(center) if center != 0 else 0.0
    p1 = point_at(HYPERBOLIC, center, phi, radius)
    p2 = point_at(HYPERBOLIC, center, phi + math.pi, radius)
    return (p1 + p2) / 2.0, abs(p1 - p2) / 2.0


def reflect_across(geometry: str, z1: complex, z2: complex, w: complex) -> complex:
    """Reflect w across the geodesic through z1, z2.

    Euclidean: mirror across the straight line.  Hyperbolic: map z1 to the
    origin (geodesic becomes a diameter), mirror, map back.
    """
    if geometry == EUCLIDEAN:
        d = (z2 - z1) / abs(z2 - z1)
        return z1 + d * d * (w - z1).conjugate()
    a = mobius_to_origin(z1, z2)
    u = a / abs(a)
    wz = mobius_to_origin(z1, w)
    return mobius_from_origin(z1, u * u * wz.conjugate())


def regular_pq_radii(p: int, q: int):
    """(circumradius, edge length, in-radius) of the regular {p,q} face.

    Euclidean when 1/p + 1/q == 1/2 (unit edge), hyperbolic when < 1/2.
    """
    if 4 * (p + q) > 2 * p * q:
        raise ValueError("spherical {p,q} not supported")
    if 4 * (p + q) == 2 * p * q:
        edge = 1.0
        circ = 0.5 / math.sin(math.pi / p)
        inr = 0.5 / math.tan(math.pi / p)
        return circ, edge, inr
    # right triangle: angle pi/p at the face center, pi/q at the vertex,
    # right angle at the edge midpoint
    cp, cq = math.cos(math.pi / p), math.cos(math.pi / q)
    sp, sq = math.sin(math.pi / p), math.sin(math.pi / q)
    circ = math.acosh(cp * cq / (sp * sq))  # center-to-vertex
    half_edge = math.acosh(cp / sq)         # vertex-to-edge-midpoint
    inr = math.acosh(cq / sp)               # center-to-edge-midpoint
    return circ, 2.0 * half_edge, inr
