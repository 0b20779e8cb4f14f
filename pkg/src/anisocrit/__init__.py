"""Variational toolkit for critical-exponent problems driven by the
anisotropic p-Laplacian: norm families and duals, Sobolev extremal
profiles and their truncation asymptotics, discrete energies, the first
Dirichlet eigenvalue, mountain-pass solves, and boundary-flux audits."""

__version__ = "0.1.0"
