"""Simplex component analysis: maximum-likelihood vertex estimation.

Observations are modelled as y_t = A0 s_t + v_t with s_t uniform on the unit
simplex and v_t isotropic Gaussian noise.  The package provides synthesis and
evaluation of that model, two likelihood-based solvers (a Monte Carlo EM
scheme built on rejection sampling and a variational scheme with a Dirichlet
family), convex-geometry objective evaluators that connect the likelihood to
simplex-volume minimisation, and metrics plus a CLI for experiments.
"""

__version__ = "0.1.0"
