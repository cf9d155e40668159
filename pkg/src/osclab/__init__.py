"""Semiclassical toolkit for damped harmonic oscillators.

Exact symbol calculus in complex phase-space coordinates, Fock-space Weyl
quantization and numerical experiments on the spectra of nonselfadjoint
perturbations of the harmonic oscillator.
"""

__version__ = "0.1.0"
