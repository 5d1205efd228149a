"""Numerical laboratory for two-interface Allen-Cahn constructions over
O(m) x O(n)-invariant minimal hypersurfaces asymptotic to Lawson cones.

Modules
-------
kernels      scalar kernels: heteroclinic profile, Lambert W, interaction
             constant, one-dimensional correction kernels
profile      generating-curve ODE of the minimal hypersurface, curvatures,
             geometric coefficients, cone-asymptotic fits
jacobi       Emden-Fowler frame, invariant Jacobi fields, weighted-norm
             linear solver for the Jacobi operator
jacobi_toda  Lambert-W recursive approximation, linearized potential and
             regime diagnostics, Newton solve of the interaction equation
field        Fermi-coordinate assembly of the two-interface approximate
             solution, residual measurement, energy on balls
cli          command-line front end and pipeline orchestration
"""

__version__ = "0.1.0"
