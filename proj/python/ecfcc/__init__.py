"""Chance-constrained open-loop control of LTI systems from disturbance samples."""

from ._core import (
    ConfigError,
    DomainError,
    Error,
    PreconditionError,
    RestrictionError,
    ToleranceError,
    Distribution,
    dkw_margin,
    estimate_cdf,
    gamma,
    gaussian,
    gaussian_cdf,
    mixture,
    run_scenario,
    sample,
    solve_qp,
    under_approximate,
    uniform,
    weibull,
)

__version__ = "0.1.0"


def evaluate_pwa(pwa, x):
    """min over segments of slope * x + intercept; x must not lie left of x_lb."""
    if x < pwa["x_lb"]:
        raise ValueError(f"x = {x} lies left of x_lb = {pwa['x_lb']}")
    return min(a * x + c for a, c in pwa["segments"])
