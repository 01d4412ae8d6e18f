"""Staggered space-time discontinuous Galerkin solver for 2D linear elastic
wave propagation in velocity-stress form.

Velocity unknowns live on a primal triangular mesh, stress unknowns on the
edge-based quadrilateral dual mesh; each implicit slab solve reduces to a
matrix-free Krylov solve for the velocity alone via the Schur complement.
"""

__version__ = "0.1.0"
