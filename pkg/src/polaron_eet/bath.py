"""Bath model: spectral density, spatial correlation kernels and phonon propagators.

Units throughout are hbar = k_B = omega_0 = 1, so frequencies are in units of
omega_0, times in 1/omega_0 and temperatures are k_B T / omega_0. The donor
separation enters only through ``mu = c / (omega_0 d)``; ``mu = 0`` is the
uncorrelated limit (d -> inf) and ``mu = inf`` the fully correlated one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mathkit import (
    bessel_j0,
    fourier_halfline,
    harmonic_number,
    integrate_breakpoints,
    hurwitz_zeta,
    integrate_semi_infinite,
    polygamma,
)
from .mathkit.special import _polygamma_core

__all__ = [
    "BathModel",
    "ThermalState",
    "DimensionError",
    "SaddleCoefficients",
    "spectral_density",
    "spatial_kernel",
    "renormalization_B",
    "renormalization_B_factored",
    "propagator_phi",
    "propagator_phi_tilde",
    "propagator_phi_fast",
    "reduced_density",
    "omega_coth",
    "saddle_coefficients",
    "saddle_parameters",
]

_SMALL_X = 1e-4
_WIDE_SEPARATION = 1e3


class DimensionError(ValueError):
    """Operation only available for three-dimensional coupling."""


@dataclass(frozen=True)
class BathModel:
    """Super-Ohmic bath ``J(w) = alpha w^3 exp(-w/omega_c)`` with spatial correlations."""

    alpha: float
    omega_c: float
    dimension: int = 3
    mu: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "omega_c", float(self.omega_c))
        object.__setattr__(self, "mu", float(self.mu))
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")
        if not (self.omega_c > 0 and math.isfinite(self.omega_c)):
            raise ValueError(f"omega_c must be finite and > 0, got {self.omega_c}")
        if self.dimension not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if not self.mu >= 0:
            raise ValueError(f"mu must be >= 0 or inf, got {self.mu}")

    @property
    def fully_correlated(self) -> bool:
        return math.isinf(self.mu)

    @property
    def uncorrelated(self) -> bool:
        # also true when d = 1/mu overflows
        return self.mu == 0.0 or math.isinf(1.0 / self.mu)

    @property
    def separation(self) -> float:
        """d/c in units of 1/omega_0."""
        if self.uncorrelated:
            return math.inf
        return 0.0 if self.fully_correlated else 1.0 / self.mu

    @property
    def decoupled(self) -> bool:
        """True when no dissipation reaches the donor-acceptor pair."""
        return self.fully_correlated or self.alpha == 0.0


@dataclass(frozen=True)
class ThermalState:
    temperature: float

    def __post_init__(self):
        object.__setattr__(self, "temperature", float(self.temperature))
        if not (self.temperature > 0 and math.isfinite(self.temperature)):
            raise ValueError(f"temperature must be finite and > 0, got {self.temperature}")

    @property
    def beta(self) -> float:
        return 1.0 / self.temperature


def spectral_density(omega, bath: BathModel):
    """J(omega) = alpha omega^3 exp(-omega/omega_c)."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValueError("spectral density is defined for omega >= 0")
    out = bath.alpha * w**3 * np.exp(-w / bath.omega_c)
    return float(out) if w.ndim == 0 else out


def _kernel_argument(w, bath):
    return w * bath.separation


def spatial_kernel(omega, bath: BathModel):
    """Spatial correlation kernel F_D(omega, d) in [-1, 1]."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValueError("spatial kernel is defined for omega >= 0")
    if bath.fully_correlated:
        out = np.ones_like(w)
    elif bath.uncorrelated:
        out = np.where(w == 0, 1.0, 0.0)
    else:
        u = _kernel_argument(w, bath)
        if bath.dimension == 1:
            out = np.cos(u)
        elif bath.dimension == 2:
            out = bessel_j0(u)
        else:
            small = u < 1e-4
            safe = np.where(small, 1.0, u)
            out = np.where(small, 1.0 - u * u / 6.0, np.sin(safe) / safe)
    return float(out) if w.ndim == 0 else out


def _one_minus_kernel(w, bath):
    # accurate 1 - F_D for small arguments, where the kernel is close to one
    if bath.fully_correlated:
        return np.zeros_like(w)
    if bath.uncorrelated:
        return np.where(w == 0, 0.0, 1.0)
    u = _kernel_argument(w, bath)
    if bath.dimension == 1:
        return 2.0 * np.sin(0.5 * u) ** 2
    u2 = u * u
    small = u < 0.1
    if bath.dimension == 2:
        series = u2 / 4.0 * (1.0 - u2 / 16.0 * (1.0 - u2 / 36.0 * (1.0 - u2 / 64.0)))
        return np.where(small, series, 1.0 - bessel_j0(u))
    series = u2 / 6.0 * (1.0 - u2 / 20.0 * (1.0 - u2 / 42.0 * (1.0 - u2 / 72.0)))
    safe = np.where(small, 1.0, u)
    return np.where(small, series, 1.0 - np.sin(safe) / safe)


def reduced_density(omega, bath: BathModel):
    """J(omega) (1 - F_D(omega)) / omega^2, regular at omega = 0."""
    w = np.asarray(omega, dtype=float)
    return bath.alpha * w * np.exp(-w / bath.omega_c) * _one_minus_kernel(w, bath)


def omega_coth(omega, beta):
    """omega * coth(beta omega / 2), equal to 2/beta at omega = 0."""
    w = np.asarray(omega, dtype=float)
    x = beta * w
    em = -np.expm1(-np.where(x == 0, 1.0, x))
    out = w * (2.0 - em) / em
    return np.where(x == 0, 2.0 / beta, out)


def omega_csch(omega, beta):
    """omega / sinh(beta omega / 2), equal to 2/beta at omega = 0."""
    w = np.asarray(omega, dtype=float)
    x = beta * w
    em = -np.expm1(-np.where(x == 0, 1.0, x))
    out = 2.0 * w * np.exp(-0.5 * x) / em
    return np.where(x == 0, 2.0 / beta, out)


@lru_cache(maxsize=4096)
def _log_B(bath: BathModel, thermal: ThermalState, tol: float) -> float:
    if bath.decoupled:
        return 0.0
    if not bath.uncorrelated and bath.separation * bath.omega_c > _WIDE_SEPARATION:
        # kernel oscillates far faster than the bath decays; use the shift form instead
        return -0.5 * complex(propagator_phi_fast(0.0, bath, thermal, min(tol, 1e-13))).real
    beta = thermal.beta
    res = integrate_semi_infinite(
        lambda w: bath.alpha * np.exp(-w / bath.omega_c) * _one_minus_kernel(w, bath) * omega_coth(w, beta),
        tol,
        bath.omega_c,
    )
    return -float(res.value)


def renormalization_B(bath: BathModel, thermal: ThermalState, tol: float = 1e-12) -> float:
    """Renormalisation factor B of the coherent coupling, from its frequency integral."""
    if bath.decoupled:
        return 1.0
    return math.exp(_log_B(bath, thermal, float(tol)))


def saddle_parameters(bath: BathModel, thermal: ThermalState) -> tuple[float, float, float]:
    """(phi0, x, y) = (2 pi^2 alpha T^2, pi T / mu, omega_c / T)."""
    t = thermal.temperature
    phi0 = 2.0 * math.pi**2 * bath.alpha * t * t
    if bath.uncorrelated:
        x = math.inf
    elif bath.fully_correlated:
        x = 0.0
    else:
        x = math.pi * t / bath.mu
    return phi0, x, bath.omega_c / t


def _require_3d(bath, what):
    if bath.dimension != 3:
        raise DimensionError(f"{what} is only available for D = 3 (got D = {bath.dimension})")


def renormalization_B_factored(bath: BathModel, thermal: ThermalState) -> tuple[float, float]:
    """Vacuum and thermal factors (B0, Bth) of B in closed form, D = 3 only."""
    _require_3d(bath, "factored renormalisation")
    if bath.decoupled:
        return 1.0, 1.0
    a, wc = bath.alpha, bath.omega_c
    phi0, x, y = saddle_parameters(bath, thermal)
    if bath.uncorrelated:
        log_b0 = -a * wc * wc
        inv_y = 1.0 / y
        zsum = hurwitz_zeta(2.0, 1.0 + inv_y) + hurwitz_zeta(2.0, inv_y)
        log_bth = a * wc * wc * (1.0 - inv_y * inv_y * zsum)
        return math.exp(log_b0), math.exp(log_bth)
    r = (bath.separation * wc) ** 2
    log_b0 = -a * wc * wc * r / (1.0 + r)
    inv_y = 1.0 / y
    h_minus = harmonic_number(complex(inv_y, -x / math.pi))
    h_plus = harmonic_number(complex(inv_y, x / math.pi))
    bracket = (1j * math.pi / x) * (h_minus - h_plus) - 2.0 * polygamma(1, 1.0 + inv_y)
    log_bth = phi0 / (2.0 * math.pi**2) * bracket.real
    return math.exp(log_b0), math.exp(log_bth)


def _c_function(x: float, y: float, tp):
    """C(x, y, tau') with tau' = pi tau / beta; tau' may be complex."""
    tp = np.asarray(tp, dtype=complex)
    c = 0.5 + 1.0 / y
    up = c + 1j * tp / np.pi
    dn = c - 1j * tp / np.pi
    if x == 0.0:
        return np.zeros_like(tp)
    if x < _SMALL_X:
        return x * x / (6.0 * np.pi**4) * (_polygamma_core(3, up) + _polygamma_core(3, dn))
    trig = (_polygamma_core(1, dn) + _polygamma_core(1, up)) / np.pi**2
    if math.isinf(x):
        return trig
    s = 1j * x / np.pi
    psi = (
        _polygamma_core(0, up + s)
        - _polygamma_core(0, dn - s)
        + _polygamma_core(0, dn + s)
        - _polygamma_core(0, up - s)
    )
    return 1j / (2.0 * np.pi * x) * psi + trig


def _phi_analytic(tau, bath, thermal):
    tau = np.asarray(tau, dtype=float)
    if bath.decoupled:
        return np.zeros(tau.shape, dtype=complex)
    phi0, x, y = saddle_parameters(bath, thermal)
    tp = np.pi * tau / thermal.beta + 0.5j * np.pi
    return phi0 * _c_function(x, y, tp)


def _phi_uncorrelated(tau, bath, thermal):
    phi0, _, y = saddle_parameters(bath, thermal)
    tp = np.pi * np.asarray(tau, dtype=float) / thermal.beta
    w = 1j * tp / np.pi
    return phi0 / np.pi**2 * (_polygamma_core(1, 1.0 + 1.0 / y - w) + _polygamma_core(1, 1.0 / y + w))


def propagator_phi_fast(tau, bath: BathModel, thermal: ThermalState, tol: float = 1e-13):
    """phi(tau) from the closed form of the uncorrelated propagator, for any D.

    The kernel factor is written as an average of ``cos(omega u)`` over shifts
    ``u``, so phi(tau) is the uncorrelated propagator minus its average over
    ``tau + u``: two points for D = 1, a cos-theta average for D = 2 and a
    uniform average (the digamma form) for D = 3.
    """
    t = np.asarray(tau, dtype=float)
    if bath.decoupled:
        out = np.zeros(t.shape, dtype=complex)
    elif bath.uncorrelated:
        out = _phi_uncorrelated(t, bath, thermal)
    elif bath.dimension == 3:
        out = _phi_analytic(t, bath, thermal)
    else:
        s = bath.separation
        base = _phi_uncorrelated(t, bath, thermal)
        if bath.dimension == 1:
            out = base - 0.5 * (_phi_uncorrelated(t + s, bath, thermal) + _phi_uncorrelated(t - s, bath, thermal))
        else:
            avg = np.array([_theta_average(float(v), s, bath, thermal, tol) for v in t.ravel()])
            out = base - avg.reshape(t.shape)
    return complex(out) if t.ndim == 0 else out


def _theta_average(t, s, bath, thermal, tol):
    # phi_u(t + s cos theta) peaks where s cos theta = -t with angular width ~ 1/(s omega_c)
    c = min(1.0, max(-1.0, -t / s))
    centre = math.acos(c)
    width = 1.0 / (s * bath.omega_c)
    points = {0.0, math.pi, centre}
    step = width
    while step < math.pi:
        points.update(p for p in (centre - step, centre + step) if 0.0 < p < math.pi)
        step *= 4.0
    edges = sorted(points)

    def shifted(theta):
        return _phi_uncorrelated(t + s * np.cos(theta), bath, thermal)

    return complex(integrate_breakpoints(shifted, edges, tol).value) / math.pi


def _phi_tilde_analytic(tau, bath, thermal):
    tau = np.asarray(tau, dtype=float)
    if bath.decoupled:
        return np.zeros(tau.shape)
    phi0, x, y = saddle_parameters(bath, thermal)
    return phi0 * _c_function(x, y, np.pi * np.abs(tau) / thermal.beta).real


def _phi_numeric_point(t, bath, thermal, tol):
    beta = thermal.beta

    def integrand(w):
        g = bath.alpha * np.exp(-w / bath.omega_c) * _one_minus_kernel(w, bath)
        return np.stack([g * omega_coth(w, beta), g * w])

    res = fourier_halfline(integrand, abs(t), tol, bath.omega_c)
    kc, ks = res.value
    return 2.0 * complex(kc.real, -math.copysign(1.0, t) * ks.imag)


def propagator_phi(tau, bath: BathModel, thermal: ThermalState, method: str = "numeric", tol: float = 1e-10):
    """Phonon propagator phi(tau).

    ``method="numeric"`` evaluates the frequency integral directly (any D);
    ``method="analytic"`` uses the digamma closed form continued to
    ``tau - i beta/2 -> tau`` (D = 3 only).
    """
    t = np.asarray(tau, dtype=float)
    if method == "analytic":
        _require_3d(bath, "analytic propagator")
        out = _phi_analytic(t, bath, thermal)
    elif method == "numeric":
        if bath.decoupled:
            out = np.zeros(t.shape, dtype=complex)
        else:
            flat = [_phi_numeric_point(float(v), bath, thermal, tol) for v in t.ravel()]
            out = np.array(flat, dtype=complex).reshape(t.shape)
    else:
        raise ValueError(f"unknown method {method!r}")
    return complex(out) if t.ndim == 0 else out


def propagator_phi_tilde(
    tau, bath: BathModel, thermal: ThermalState, method: str | None = None, tol: float = 1e-10
):
    """Shifted propagator phi(tau - i beta/2), real and even in tau.

    Defaults to the closed form for D = 3 and to the frequency integral
    otherwise.
    """
    t = np.asarray(tau, dtype=float)
    if method is None:
        method = "analytic" if bath.dimension == 3 else "numeric"
    if method == "analytic":
        _require_3d(bath, "analytic propagator")
        out = _phi_tilde_analytic(t, bath, thermal)
    elif method == "numeric":
        if bath.decoupled:
            out = np.zeros(t.shape)
        else:
            beta = thermal.beta

            def integrand(w):
                return bath.alpha * np.exp(-w / bath.omega_c) * _one_minus_kernel(w, bath) * omega_csch(w, beta)

            flat = [2.0 * fourier_halfline(integrand, abs(float(v)), tol, bath.omega_c).value.real for v in t.ravel()]
            out = np.array(flat).reshape(t.shape)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(out) if t.ndim == 0 else out


@dataclass(frozen=True)
class SaddleCoefficients:
    phi0: float
    x: float
    y: float
    C0: float
    C2: float


def _real_checked(value, what):
    value = complex(value)
    if abs(value.imag) > 1e-12 * max(1.0, abs(value.real)):
        raise FloatingPointError(f"{what} has imaginary residue {value.imag:.3e}")
    return value.real


def saddle_coefficients(bath: BathModel, thermal: ThermalState) -> SaddleCoefficients:
    """Second-order expansion coefficients of phi_tilde about tau = 0 (D = 3).

    ``phi_tilde(tau) ~ phi0 (C0 - tau'^2 C2)`` with ``tau' = pi tau / beta``.
    """
    _require_3d(bath, "saddle-point expansion")
    phi0, x, y = saddle_parameters(bath, thermal)
    c = 0.5 + 1.0 / y
    if x == 0.0:
        return SaddleCoefficients(phi0, x, y, 0.0, 0.0)
    if math.isinf(x):
        c0 = 2.0 / math.pi**2 * polygamma(1, c)
        c2 = polygamma(3, c) / math.pi**4
    elif x < _SMALL_X:
        c0 = x * x * polygamma(3, c) / (3.0 * math.pi**4)
        c2 = x * x * polygamma(5, c) / (6.0 * math.pi**6)
    else:
        zp = complex(c, x / math.pi)
        zm = complex(c, -x / math.pi)
        c0 = _real_checked(
            1j / (math.pi * x) * (polygamma(0, zp) - polygamma(0, zm)) + 2.0 / math.pi**2 * polygamma(1, c),
            "C0",
        )
        c2 = _real_checked(
            1j / (2.0 * math.pi**3 * x) * (polygamma(2, zp) - polygamma(2, zm)) + polygamma(3, c) / math.pi**4,
            "C2",
        )
    return SaddleCoefficients(phi0, x, y, float(c0), float(c2))
