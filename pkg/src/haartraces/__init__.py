"""Traces of powers of Haar-random matrices from the classical compact groups.

Exact power-sum algebra (Laplacian, Haar moments), matrix samplers and
Brownian increments, exchangeable-pair Wasserstein bounds, empirical
optimal transport, and reproducible Monte Carlo studies.
"""
from .psalgebra import (
    BelowThresholdError,
    GroupKind,
    GroupMismatchError,
    InexactExpectationWarning,
    PowerSumMonomial,
    PowerSumPolynomial,
    UnsupportedShapeError,
    conjugate,
    haar_expectation,
    laplacian,
    p,
    parse_polynomial,
    pbar,
)
from .groups import (
    GroupElement,
    brownian_step,
    group_diagnostics,
    haar_sample,
    lie_basis,
    trace_vector,
)
from .stein import (
    build_regression,
    build_remainders,
    rate_formula,
    second_moments,
    wasserstein_bound,
)
from .transport import gaussian_reference, realify, w1_1d, w1_exact, w1_sliced

__version__ = "0.1.0"

__all__ = [
    "BelowThresholdError",
    "GroupKind",
    "GroupMismatchError",
    "InexactExpectationWarning",
    "PowerSumMonomial",
    "PowerSumPolynomial",
    "UnsupportedShapeError",
    "conjugate",
    "haar_expectation",
    "laplacian",
    "p",
    "parse_polynomial",
    "pbar",
    "GroupElement",
    "brownian_step",
    "group_diagnostics",
    "haar_sample",
    "lie_basis",
    "trace_vector",
    "build_regression",
    "build_remainders",
    "rate_formula",
    "second_moments",
    "wasserstein_bound",
    "gaussian_reference",
    "realify",
    "w1_1d",
    "w1_exact",
    "w1_sliced",
]
