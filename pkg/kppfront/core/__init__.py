"""Numerical core: coefficients, eigenvalues, speeds, simulations."""
