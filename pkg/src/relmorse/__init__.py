"""Relative Morse index, spectral flow and saddle point reduction for periodic wave equations."""

__version__ = "0.1.0"

from .fourier import FourierField, TruncationSpec, analyze, synthesize
from .index import projection_index, relative_morse_index, spectral_flow
from .operators import TruncatedOperator, multiplication_operator, spectral_split, wave_operator
from .reduction import (NonlinearMap, ReducedProblem, find_critical_points, fixed_point_z,
                        homotopy_solve, reduced_gradient, reduced_value, regularized_solve)
from .wave import WaveProblem, check_hypotheses, example_nonlinearity, solve_wave

__all__ = [
    "FourierField", "TruncationSpec", "analyze", "synthesize",
    "projection_index", "relative_morse_index", "spectral_flow",
    "TruncatedOperator", "multiplication_operator", "spectral_split", "wave_operator",
    "NonlinearMap", "ReducedProblem", "find_critical_points", "fixed_point_z", "homotopy_solve",
    "reduced_gradient", "reduced_value", "regularized_solve",
    "WaveProblem", "check_hypotheses", "example_nonlinearity", "solve_wave",
]
