"""Polaron-frame bath correlation functions and their one-sided Fourier transforms.

``K_ii(omega) = int_0^inf exp(i omega tau) Lambda_ii(tau) dtau = gamma_ii/2 + i S_ii``.

The one-phonon part ``B^2 phi(tau)`` of ``Lambda_yy`` decays only like
``1/tau^2`` in the uncorrelated case, so its transform is taken in the
frequency domain (a delta function plus a principal value) and only the
fast-decaying multiphonon remainder is transformed numerically.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bath import (
    BathModel,
    ThermalState,
    _log_B,
    _one_minus_kernel,
    omega_coth,
    propagator_phi_fast,
    reduced_density,
    saddle_coefficients,
)
from .mathkit import fourier_halfline, integrate_breakpoints, integrate_interval, integrate_semi_infinite

__all__ = [
    "ResponseSample",
    "SaddleRate",
    "lambda_xx",
    "lambda_yy",
    "linear_response",
    "response",
    "response_pair",
    "response_sample",
    "gamma_saddle",
    "clear_response_cache",
]

DEFAULT_TOL = 1e-10

_WHICH = ("xx", "yy")


def _log_b2(bath, thermal):
    return 2.0 * _log_B(bath, thermal, 1e-13)


def _sinh_minus_linear(phi):
    # sinh(phi) - phi without cancellation for small |phi|
    phi = np.asarray(phi, dtype=complex)
    small = np.abs(phi) < 0.5
    p2 = phi * phi
    series = np.zeros_like(phi)
    term = phi.copy()
    for k in range(1, 8):
        term = term * p2 / ((2 * k) * (2 * k + 1))
        series = series + term
    return np.where(small, series, np.sinh(phi) - phi)


def lambda_xx(tau, bath: BathModel, thermal: ThermalState):
    """Lambda_xx(tau) = (B^2/2)(exp(phi) + exp(-phi) - 2)."""
    t = np.asarray(tau, dtype=float)
    if bath.decoupled:
        out = np.zeros(t.shape, dtype=complex)
    else:
        phi = propagator_phi_fast(t, bath, thermal)
        out = 2.0 * np.exp(_log_b2(bath, thermal)) * np.sinh(0.5 * phi) ** 2
    return complex(out) if t.ndim == 0 else out


def lambda_yy(tau, bath: BathModel, thermal: ThermalState):
    """Lambda_yy(tau) = (B^2/2)(exp(phi) - exp(-phi))."""
    t = np.asarray(tau, dtype=float)
    if bath.decoupled:
        out = np.zeros(t.shape, dtype=complex)
    else:
        phi = propagator_phi_fast(t, bath, thermal)
        out = np.exp(_log_b2(bath, thermal)) * np.sinh(phi)
    return complex(out) if t.ndim == 0 else out


def _multiphonon(tau, bath, thermal, lb2):
    phi = propagator_phi_fast(tau, bath, thermal)
    b2 = math.exp(lb2)
    small = np.abs(phi) < 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        return _multiphonon_branches(phi, b2, lb2, small)


def _multiphonon_branches(phi, b2, lb2, small):
    # large |phi|: fold B^2 into the exponent so neither factor overflows
    big_xx = 0.5 * (np.exp(phi + lb2) + np.exp(-phi + lb2)) - b2
    big_yy = 0.5 * (np.exp(phi + lb2) - np.exp(-phi + lb2)) - b2 * phi
    xx = np.where(small, 2.0 * b2 * np.sinh(0.5 * phi) ** 2, big_xx)
    yy = np.where(small, b2 * _sinh_minus_linear(phi), big_yy)
    return np.stack([xx, yy])


def _emit(v, bath, beta):
    # g(v) (n(v) + 1)
    v = np.asarray(v, dtype=float)
    return 0.5 * reduced_density(v, bath) * (omega_coth(v, beta) / np.where(v == 0, 1.0, v) + 1.0)


def _absorb(v, bath, beta):
    # g(v) n(v)
    v = np.asarray(v, dtype=float)
    return 0.5 * reduced_density(v, bath) * (omega_coth(v, beta) / np.where(v == 0, 1.0, v) - 1.0)


def _shift_integral(omega, bath, beta, tol):
    """2 [PV int g n / (v + omega) - PV int g (n + 1) / (v - omega)] over v > 0."""
    if omega == 0.0:
        res = integrate_semi_infinite(lambda v: -2.0 * bath.alpha * np.exp(-v / bath.omega_c) * _one_minus_kernel(v, bath),
                                      tol, bath.omega_c)
        return float(res.value)
    w = abs(omega)
    # the factor with the pole at v = w, and the regular one at v = -w
    polar, regular = (_emit, _absorb) if omega > 0 else (_absorb, _emit)
    sign = -1.0 if omega > 0 else 1.0

    def near(u):
        # symmetric pairing removes the pole on [0, 2w]
        pv = (polar(w + u, bath, beta) - polar(w - u, bath, beta)) / u
        reg = (regular(w + u, bath, beta) / (2.0 * w + u) + regular(w - u, bath, beta) / (2.0 * w - u))
        return sign * pv - sign * reg

    def far(v):
        return sign * polar(v, bath, beta) / (v - w) - sign * regular(v, bath, beta) / (v + w)

    head = integrate_interval(near, 0.0, w, tol / 4).value
    top = 2.0 * w + 60.0 * bath.omega_c
    edges = [2.0 * w]
    while edges[-1] < bath.omega_c:
        edges.append(min(4.0 * edges[-1], bath.omega_c))
    edges.extend(np.linspace(edges[-1], top, 31)[1:].tolist())
    tail = integrate_breakpoints(far, edges, tol / 4).value
    return 2.0 * (head + tail)


@lru_cache(maxsize=8192)
def _linear_cached(omega: float, bath: BathModel, thermal: ThermalState, tol: float) -> complex:
    beta = thermal.beta
    w = abs(omega)
    if w == 0.0:
        # limit of g coth is 2 alpha (1 - F(0+)) / beta: nonzero only without correlations
        re = 2.0 * math.pi * bath.alpha / beta if bath.uncorrelated else 0.0
    else:
        g = float(reduced_density(w, bath))
        re = math.pi * g * (float(omega_coth(w, beta)) / w + math.copysign(1.0, omega))
    return complex(re, _shift_integral(omega, bath, beta, tol))


def linear_response(omega: float, bath: BathModel, thermal: ThermalState, tol: float = DEFAULT_TOL) -> complex:
    """One-sided transform of the propagator, ``int_0^inf exp(i omega tau) phi(tau) dtau``."""
    if bath.decoupled:
        return 0j
    return _linear_cached(float(omega), bath, thermal, float(tol))


@lru_cache(maxsize=8192)
def _pair_cached(omega: float, bath: BathModel, thermal: ThermalState, tol: float) -> tuple[complex, complex]:
    lb2 = _log_b2(bath, thermal)
    scale = min(thermal.beta, 1.0 / bath.omega_c) + 1.0 / bath.omega_c

    def integrand(t):
        return _multiphonon(t, bath, thermal, lb2)

    if omega == 0.0:
        res = integrate_semi_infinite(integrand, tol, scale)
    else:
        res = fourier_halfline(integrand, omega, tol, scale)
    k_xx, k_yy = (complex(v) for v in res.value)
    k_yy += math.exp(lb2) * _linear_cached(omega, bath, thermal, tol)
    return k_xx, k_yy


def _check_gamma(gamma, which, omega, tol):
    if gamma >= 0.0:
        return gamma
    if gamma > -tol:
        return 0.0
    warnings.warn(
        f"negative rate gamma_{which}({omega:g}) = {gamma:.3e}; the Markovian generator may not be positive",
        RuntimeWarning,
        stacklevel=3,
    )
    return gamma


def response_pair(omega: float, bath: BathModel, thermal: ThermalState, tol: float = DEFAULT_TOL):
    """(K_xx(omega), K_yy(omega)) as complex numbers, cached per argument tuple."""
    if bath.decoupled:
        return 0j, 0j
    return _pair_cached(float(omega), bath, thermal, float(tol))


def response(omega: float, which: str, bath: BathModel, thermal: ThermalState, tol: float = DEFAULT_TOL):
    """(gamma_ii(omega), S_ii(omega)) with gamma = 2 Re K and S = Im K."""
    if which not in _WHICH:
        raise ValueError(f"which must be 'xx' or 'yy', got {which!r}")
    k = response_pair(omega, bath, thermal, tol)[_WHICH.index(which)]
    return _check_gamma(2.0 * k.real, which, omega, tol), k.imag


@dataclass(frozen=True)
class ResponseSample:
    omega: float
    gamma_xx: float
    gamma_yy: float
    S_xx: float
    S_yy: float


def response_sample(omega: float, bath: BathModel, thermal: ThermalState, tol: float = DEFAULT_TOL) -> ResponseSample:
    g_xx, s_xx = response(omega, "xx", bath, thermal, tol)
    g_yy, s_yy = response(omega, "yy", bath, thermal, tol)
    return ResponseSample(float(omega), g_xx, g_yy, s_xx, s_yy)


def clear_response_cache() -> None:
    _pair_cached.cache_clear()
    _linear_cached.cache_clear()
    _log_B.cache_clear()


@dataclass(frozen=True)
class SaddleRate:
    """Gaussian saddle-point estimate of gamma_xx and gamma_yy.

    ``value`` is the rate at ``eta``; ``value_at_zero`` drops the eta
    dependence. ``valid`` applies the regime conditions on phi0, x and y.
    """

    eta: float
    value: float
    value_at_zero: float
    phi0: float
    x: float
    y: float
    valid: bool


def _saddle_valid(phi0, x, y, threshold=3.0):
    if y >= 1.0:
        if math.isinf(x) or x >= 1.0:
            return phi0 >= threshold
        return phi0 * x * x >= threshold
    if math.isinf(x):
        return phi0 * y >= threshold
    return phi0 * x * x * y**3 / math.pi**4 >= threshold


def gamma_saddle(eta: float, bath: BathModel, thermal: ThermalState) -> SaddleRate:
    sc = saddle_coefficients(bath, thermal)
    beta = thermal.beta
    if sc.C2 <= 0.0 or sc.phi0 == 0.0:
        return SaddleRate(float(eta), 0.0, 0.0, sc.phi0, sc.x, sc.y, False)
    width = sc.C2 * sc.phi0
    log_zero = math.log(beta) + 2.0 * _log_B(bath, thermal, 1e-13) + sc.phi0 * sc.C0 - math.log(2.0 * math.sqrt(math.pi * width))
    log_eta = log_zero + beta * eta / 2.0 - (beta * eta) ** 2 / (4.0 * math.pi**2 * width)
    return SaddleRate(
        float(eta), math.exp(log_eta), math.exp(log_zero), sc.phi0, sc.x, sc.y, _saddle_valid(sc.phi0, sc.x, sc.y)
    )
