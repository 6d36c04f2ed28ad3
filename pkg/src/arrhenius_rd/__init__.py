"""Exact separable solutions of Arrhenius reaction-diffusion equations.

Modules
-------
specfun    special functions (Ei, E1, Bessel, Airy, 1F1, Bessel zeros)
construct  Kirchhoff transform, R from D, kappa = 0 closed forms
dsolve     D from R: contraction map, small-theta series, Taylor chain
spatial    radial profiles Phi(r) and boundary fitting
scenario   assembled space-time solutions and the worked presets
verify     PDE residuals, method-of-lines oracle, stability
cli        command-line front end
"""
__version__ = "0.1.0"
