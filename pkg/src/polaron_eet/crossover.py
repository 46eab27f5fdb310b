"""Coherent/incoherent classification and the crossover temperature at zero bias."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .bath import (
    BathModel,
    ThermalState,
    renormalization_B_factored,
    saddle_coefficients,
    saddle_parameters,
)
from .bloch import PolaronQuantities, SystemModel, build_resonant
from .correlations import DEFAULT_TOL
from .dynamics import resonant_xi_squared

__all__ = [
    "CrossoverResult",
    "Classification",
    "NoCrossoverError",
    "DEFAULT_BRACKET",
    "xi_squared",
    "classify",
    "solve_Tc_full",
    "solve_Tc_approx",
    "temperature_scales",
]

DEFAULT_BRACKET = (0.2, 100.0)
SCAN_POINTS = 32
BOUNDARY_TOL = 1e-10


class NoCrossoverError(ValueError):
    """No sign change of the crossover criterion on the bracket."""

    def __init__(self, state: str, bracket: tuple[float, float]):
        super().__init__(f"{state} everywhere on bracket [{bracket[0]:g}, {bracket[1]:g}]")
        self.state = state
        self.bracket = bracket


@dataclass(frozen=True)
class CrossoverResult:
    T_c: float
    method: str
    bracket: tuple[float, float]
    residual: float
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Classification:
    label: str
    xi_squared: float | None
    amplitude: float
    message: str = ""


def _require_resonant(system):
    if system.epsilon != 0.0:
        raise ValueError("the crossover criterion is defined at epsilon = 0 only")


def temperature_scales(bath: BathModel) -> dict[str, float]:
    """T0 = 1/(sqrt(2 alpha) pi), Tx = mu/pi, Ty = omega_c."""
    t0 = math.inf if bath.alpha == 0 else 1.0 / (math.sqrt(2.0 * bath.alpha) * math.pi)
    return {"T0": t0, "Tx": bath.mu / math.pi, "Ty": bath.omega_c}


def xi_squared(system: SystemModel, bath: BathModel, temperature: float, tol: float = DEFAULT_TOL) -> float:
    """Sign-preserving square of the resonant oscillation frequency."""
    _require_resonant(system)
    return resonant_xi_squared(build_resonant(system, bath, ThermalState(temperature), tol))


def classify(system: SystemModel, bath: BathModel, thermal: ThermalState, tol: float = DEFAULT_TOL) -> Classification:
    pq = PolaronQuantities.evaluate(system, bath, thermal)
    amplitude = 4.0 * pq.V_R**2 / pq.eta**2 if pq.eta > 0 else 0.0
    if system.epsilon != 0.0:
        return Classification(
            "undefined",
            None,
            amplitude,
            "no strict crossover criterion off resonance; oscillation amplitude 4 V_R^2/eta^2 reported instead",
        )
    xi2 = resonant_xi_squared(build_resonant(system, bath, thermal, tol))
    if abs(xi2) < BOUNDARY_TOL:
        label = "boundary"
    else:
        label = "coherent" if xi2 > 0 else "incoherent"
    return Classification(label, xi2, amplitude)


def _diagnostics(bath, t_c):
    phi0, x, y = saddle_parameters(bath, ThermalState(t_c))
    out = temperature_scales(bath)
    out.update(phi0=phi0, x=x, y=y)
    return out


def _scan(f, bracket):
    lo, hi = bracket
    if not 0 < lo < hi:
        raise ValueError(f"invalid bracket {bracket}")
    grid = np.geomspace(lo, hi, SCAN_POINTS)
    vals = [f(t) for t in grid]
    for i in range(SCAN_POINTS - 1):
        if vals[i] > 0 and vals[i + 1] <= 0:
            return grid[i], grid[i + 1], vals[i], vals[i + 1]
    state = "coherent" if vals[-1] > 0 else "incoherent"
    raise NoCrossoverError(state, (lo, hi))


def solve_Tc_full(
    system: SystemModel,
    bath: BathModel,
    bracket: tuple[float, float] = DEFAULT_BRACKET,
    tol: float = DEFAULT_TOL,
    rtol: float = 1e-9,
) -> CrossoverResult:
    """Lowest temperature on ``bracket`` where the resonant oscillation frequency vanishes.

    A log-spaced pre-scan locates the first sign change of xi_R^2(T) and
    Brent's method (bisection with secant/inverse-quadratic steps) refines it.
    """
    _require_resonant(system)
    if bath.decoupled:
        raise NoCrossoverError("coherent", tuple(bracket))

    def f(t):
        return xi_squared(system, bath, t, tol)

    t_lo, t_hi, _, _ = _scan(f, bracket)
    if f(t_hi) == 0.0:
        t_c = t_hi
    else:
        t_c = brentq(f, t_lo, t_hi, xtol=1e-14, rtol=rtol, maxiter=200)
    gen = build_resonant(system, bath, ThermalState(t_c), tol)
    residual = resonant_xi_squared(gen)
    v_r = gen.polaron.V_R
    scale = 8.0 * v_r * (2.0 * v_r + abs(gen.rates.lambda_3)) + (gen.rates.Gamma_z - gen.rates.Gamma_y) ** 2
    diag = _diagnostics(bath, t_c)
    diag["residual_scale"] = scale
    return CrossoverResult(float(t_c), "full", (float(t_lo), float(t_hi)), float(residual), diag)


def approx_residual(system: SystemModel, bath: BathModel, temperature: float) -> float:
    """2 ln T - [lnV + lnB + phi0 C0 - ln(4 sqrt(2 pi^3 alpha C2))].

    Positive on the coherent side. At low temperature the saddle-point rates
    are not valid and the expression turns negative again; the physical root
    is the coherent-to-incoherent crossing.
    """
    thermal = ThermalState(temperature)
    sc = saddle_coefficients(bath, thermal)
    b0, bth = renormalization_B_factored(bath, thermal)
    if sc.C2 <= 0.0:
        return math.inf
    rhs = (
        math.log(system.V)
        + math.log(b0)
        + math.log(bth)
        + sc.phi0 * sc.C0
        - math.log(4.0 * math.sqrt(2.0 * math.pi**3 * bath.alpha * sc.C2))
    )
    return 2.0 * math.log(temperature) - rhs


def solve_Tc_approx(
    system: SystemModel,
    bath: BathModel,
    bracket: tuple[float, float] = DEFAULT_BRACKET,
    rtol: float = 1e-12,
) -> CrossoverResult:
    """Crossover temperature from the saddle-point rates with lambda_3 neglected.

    Solves ``T^2 = V B exp(phi0 C0) / (4 sqrt(2 pi^3 alpha C2))`` by bisection
    in log T.
    """
    _require_resonant(system)
    if bath.dimension != 3:
        raise ValueError("approximate crossover requires D = 3")
    if bath.decoupled:
        raise NoCrossoverError("coherent", tuple(bracket))

    def f(t):
        return approx_residual(system, bath, t)

    t_lo, t_hi, _, _ = _scan(f, bracket)
    lo, hi = math.log(t_lo), math.log(t_hi)
    while hi - lo > rtol:
        mid = 0.5 * (lo + hi)
        if f(math.exp(mid)) > 0:
            lo = mid
        else:
            hi = mid
    t_c = math.exp(0.5 * (lo + hi))
    return CrossoverResult(t_c, "approx", (float(t_lo), float(t_hi)), float(f(t_c)), _diagnostics(bath, t_c))
