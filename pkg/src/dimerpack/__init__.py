"""Dimer-model and spanning-forest statistics on circle-packed planar graphs.

The package computes exact finite-graph quantities (weighted matching
counts via complex adjacency determinants, cylinder probabilities,
Green functions, transfer currents) and Monte-Carlo estimates (Wilson
sampling, double-dimer height experiments) for square grids and
hyperbolic {p,q} tilings embedded by double circle packings.
"""

__version__ = "0.1.0"
