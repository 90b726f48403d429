"""Radial Lane-Emden equations on rotationally symmetric model manifolds.

Modules
-------
model_manifold  profile families, critical exponents, structural conditions
shooting        radial Cauchy problem with first-zero detection
diagnostics     Pohozaev function and tail amplitudes
sobolev         weighted embeddings and truncated Rayleigh quotients
dirichlet       first-zero branch and ball Dirichlet problems
constructions   supersolutions and the glued profile with a global solution
io, cli         file formats and command-line front end
"""
__version__ = "0.1.0"
