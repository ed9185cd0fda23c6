"""Geodesic offset curves on analytic parametric surfaces."""
