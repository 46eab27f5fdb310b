"""Special functions and quadrature primitives."""

from .quadrature import (
    QuadratureError,
    QuadratureResult,
    fourier_halfline,
    integrate_breakpoints,
    integrate_interval,
    integrate_semi_infinite,
    wynn_epsilon,
)
from .special import (
    EULER_GAMMA,
    PoleError,
    bessel_j0,
    digamma,
    harmonic_number,
    hurwitz_zeta,
    polygamma,
)

__all__ = [
    "EULER_GAMMA",
    "PoleError",
    "QuadratureError",
    "QuadratureResult",
    "bessel_j0",
    "digamma",
    "fourier_halfline",
    "harmonic_number",
    "hurwitz_zeta",
    "integrate_breakpoints",
    "integrate_interval",
    "integrate_semi_infinite",
    "polygamma",
    "wynn_epsilon",
]
