"""Simulation and potential-well analysis of a damped viscoelastic wave equation with a
Bessel operator, a weighted-mean-zero constraint and a power-law source."""

from .kernels import (ConstantXi, ExponentialKernel, LogMixedKernel, LogMixedXi, PolynomialKernel,
                      PowerLawXi, TabulatedKernel, ZeroKernel, make_kernel, xi_for_kernel)
from .solver import ProblemParams, Termination, make_initial_data, run
from .weighted_space import Grid

__all__ = [
    "ConstantXi", "ExponentialKernel", "Grid", "LogMixedKernel", "LogMixedXi", "PolynomialKernel",
    "PowerLawXi", "ProblemParams", "TabulatedKernel", "Termination", "ZeroKernel", "make_initial_data",
    "make_kernel", "run", "xi_for_kernel",
]
