"""Numerical laboratory for the repulsive 2D drift-diffusion-Poisson system

    u_t = Laplace u + div(u grad phi),   Laplace phi = -u,

covering self-similar profiles, a radial integrated-density solver, a periodic
pseudo-spectral mild-solution integrator and the associated diagnostics.
"""

__version__ = "0.1.0"
