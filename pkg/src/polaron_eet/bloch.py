"""Bloch-equation generators ``d alpha/dt = M alpha + b`` for the donor-acceptor pair.

Generators are stored in the polaron frame, where the coherent entries are
``+-2 V_R`` and no factors of B appear. The lab-frame pair is obtained with
``L = diag(B, B, 1)``: ``M_lab = L M L^-1`` and ``b_lab = L b``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import correlations as _corr
from .bath import (
    BathModel,
    ThermalState,
    _one_minus_kernel,
    omega_coth,
    renormalization_B,
    saddle_parameters,
    spectral_density,
)

__all__ = [
    "SystemModel",
    "PolaronQuantities",
    "RateSet",
    "Telemetry",
    "Generator",
    "REGIMES",
    "build_resonant",
    "build_full",
    "build_weak",
    "build_high_temperature",
    "build_generator",
]

REGIMES = ("resonant", "full", "weak", "high_temperature")

_HT_WARN = 0.3


@dataclass(frozen=True)
class SystemModel:
    """Bias ``epsilon = eps_1 - eps_2`` and bare coherent coupling ``V``."""

    epsilon: float = 0.0
    V: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "V", float(self.V))
        if not math.isfinite(self.epsilon):
            raise ValueError("epsilon must be finite")
        if not (self.V > 0 and math.isfinite(self.V)):
            raise ValueError(f"V must be finite and > 0, got {self.V}")


@dataclass(frozen=True)
class PolaronQuantities:
    B: float
    V_R: float
    eta: float

    @classmethod
    def evaluate(cls, system: SystemModel, bath: BathModel, thermal: ThermalState) -> "PolaronQuantities":
        B = renormalization_B(bath, thermal)
        v_r = B * system.V
        return cls(B, v_r, math.hypot(system.epsilon, 2.0 * v_r))


@dataclass(frozen=True)
class RateSet:
    Gamma_x: float = 0.0
    Gamma_y: float = 0.0
    Gamma_z: float = 0.0
    lambda_1: float = 0.0
    lambda_2: float = 0.0
    lambda_3: float = 0.0
    zeta_rate: float = 0.0
    kappa_x: float = 0.0
    kappa_y: float = 0.0
    kappa_z: float = 0.0

    def as_dict(self) -> dict[str, float]:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Telemetry:
    """Regime-validity scalars carried by every generator."""

    V_over_omega_c: float
    beta_V_R: float
    V_R_over_epsilon: float | None
    phi0: float
    x: float
    y: float
    renormalization_check: float

    def as_dict(self) -> dict[str, float | None]:
        return dict(self.__dict__)

    def warnings(self) -> list[str]:
        out = []
        if self.V_over_omega_c >= 1.0:
            out.append(f"V/omega_c = {self.V_over_omega_c:.3g} is not below 1")
        if self.renormalization_check > 0.1:
            out.append(f"(V/omega_c)^2 (1 - B^4) = {self.renormalization_check:.3g} is not small")
        return out


@dataclass(frozen=True, eq=False)
class Generator:
    """Polaron-frame drift matrix ``M`` and drive ``b`` with their provenance."""

    M: np.ndarray
    b: np.ndarray
    regime: str
    rates: RateSet
    polaron: PolaronQuantities
    system: SystemModel
    bath: BathModel
    thermal: ThermalState
    telemetry: Telemetry
    frame: str = field(default="polaron")

    def __post_init__(self):
        m = np.array(self.M, dtype=float)
        b = np.array(self.b, dtype=float)
        if m.shape != (3, 3) or b.shape != (3,):
            raise ValueError("M must be 3x3 and b a 3-vector")
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(b))):
            raise FloatingPointError(f"non-finite generator entries in regime {self.regime}")
        m.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "M", m)
        object.__setattr__(self, "b", b)

    def lab_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """(M_lab, b_lab) with the B factors placed as in the lab-frame equations."""
        B = self.polaron.B
        scale = np.array([B, B, 1.0])
        return self.M * scale[:, None] / scale[None, :], self.b * scale


def _telemetry(system, bath, thermal, pq):
    phi0, x, y = saddle_parameters(bath, thermal)
    return Telemetry(
        V_over_omega_c=system.V / bath.omega_c,
        beta_V_R=thermal.beta * pq.V_R,
        V_R_over_epsilon=(pq.V_R / system.epsilon) if system.epsilon != 0.0 else None,
        phi0=phi0,
        x=x,
        y=y,
        renormalization_check=(system.V / bath.omega_c) ** 2 * (1.0 - pq.B**4),
    )


def _check_cutoff(system, bath):
    if system.V >= bath.omega_c:
        warnings.warn(f"V = {system.V} is not below omega_c = {bath.omega_c}", RuntimeWarning, stacklevel=3)


class _Responses:
    """gamma and S at the few frequencies one builder needs."""

    def __init__(self, bath, thermal, tol):
        self.bath, self.thermal, self.tol = bath, thermal, tol

    def __call__(self, omega, which):
        return _corr.response(omega, which, self.bath, self.thermal, self.tol)

    def gamma(self, omega, which):
        return self(omega, which)[0]

    def shift(self, omega, which):
        return self(omega, which)[1]


def build_resonant(
    system: SystemModel, bath: BathModel, thermal: ThermalState, tol: float = _corr.DEFAULT_TOL
) -> Generator:
    if system.epsilon != 0.0:
        raise ValueError("resonant generator requires epsilon = 0")
    _check_cutoff(system, bath)
    pq = PolaronQuantities.evaluate(system, bath, thermal)
    r = _Responses(bath, thermal, tol)
    V2, v_r = system.V**2, pq.V_R
    w = 2.0 * v_r
    g_xx0 = r.gamma(0.0, "xx")
    g_p, s_p = r(w, "yy")
    g_m, s_m = r(-w, "yy")
    gamma_y = 2.0 * V2 * g_xx0
    gamma_z = V2 * (g_p + g_m) + 2.0 * V2 * g_xx0
    lam3 = 2.0 * V2 * (s_p - s_m)
    kappa_x = V2 * (g_p - g_m)
    M = [
        [-(gamma_z - gamma_y), 0.0, 0.0],
        [0.0, -gamma_y, -2.0 * v_r],
        [0.0, 2.0 * v_r + lam3, -gamma_z],
    ]
    rates = RateSet(
        Gamma_x=gamma_z - gamma_y, Gamma_y=gamma_y, Gamma_z=gamma_z, lambda_3=lam3, kappa_x=kappa_x
    )
    return Generator(M, [-kappa_x, 0.0, 0.0], "resonant", rates, pq, system, bath, thermal,
                     _telemetry(system, bath, thermal, pq))


def build_full(
    system: SystemModel, bath: BathModel, thermal: ThermalState, tol: float = _corr.DEFAULT_TOL
) -> Generator:
    _check_cutoff(system, bath)
    pq = PolaronQuantities.evaluate(system, bath, thermal)
    r = _Responses(bath, thermal, tol)
    V2, v_r, eta, eps = system.V**2, pq.V_R, pq.eta, system.epsilon
    g_xx0, s_xx0 = r(0.0, "xx")
    gxp, sxp = r(eta, "xx")
    gxm, sxm = r(-eta, "xx")
    gyp, syp = r(eta, "yy")
    gym, sym = r(-eta, "yy")
    if eta == 0.0:
        raise ValueError("eigenstate splitting vanishes (epsilon = 0 and V_R = 0)")
    gamma_x = V2 * (gyp + gym)
    gamma_y = 2.0 * V2 * (4.0 * v_r**2 / eta**2 * g_xx0 + eps**2 / (2.0 * eta**2) * (gxp + gxm))
    gamma_z = gamma_x + gamma_y
    lam1 = 2.0 * V2 * eps / eta * (syp - sym)
    lam2 = 2.0 * V2 * eps / eta * (sxp - sxm)
    lam3 = 4.0 * V2 * v_r / eta * (syp - sym)
    zeta = 4.0 * V2 * v_r * eps / eta**2 * (g_xx0 - 0.5 * (gxp + gxm))
    kappa_x = 2.0 * V2 * v_r / eta * (gyp - gym)
    kappa_y = 8.0 * V2 * v_r * eps / eta**2 * (s_xx0 - 0.5 * (sxp + sxm))
    kappa_z = V2 * eps / eta * ((gxp - gxm) + (gyp - gym))
    M = [
        [-gamma_x, -(eps + lam1), 0.0],
        [eps + lam2, -gamma_y, -2.0 * v_r],
        [zeta, 2.0 * v_r + lam3, -gamma_z],
    ]
    rates = RateSet(gamma_x, gamma_y, gamma_z, lam1, lam2, lam3, zeta, kappa_x, kappa_y, kappa_z)
    return Generator(M, [-kappa_x, -kappa_y, -kappa_z], "full", rates, pq, system, bath, thermal,
                     _telemetry(system, bath, thermal, pq))


def weak_rate(system: SystemModel, bath: BathModel, thermal: ThermalState) -> float:
    """One-phonon relaxation rate 4 pi (V_R/eta)^2 J(eta) (1 - F_D(eta)) coth(beta eta / 2)."""
    pq = PolaronQuantities.evaluate(system, bath, thermal)
    eta = pq.eta
    if bath.decoupled or eta == 0.0:
        return 0.0
    j = spectral_density(eta, bath) * float(_one_minus_kernel(np.asarray(eta), bath))
    return 4.0 * math.pi * (pq.V_R / eta) ** 2 * j * float(omega_coth(eta, thermal.beta)) / eta


def build_weak(
    system: SystemModel, bath: BathModel, thermal: ThermalState, tol: float = _corr.DEFAULT_TOL
) -> Generator:
    """First order in the spectral density: one-phonon rates and shifts only."""
    _check_cutoff(system, bath)
    pq = PolaronQuantities.evaluate(system, bath, thermal)
    V2, v_r, eta, eps = system.V**2, pq.V_R, pq.eta, system.epsilon
    b2 = pq.B**2
    k_p = _corr.linear_response(eta, bath, thermal, tol)
    k_m = _corr.linear_response(-eta, bath, thermal, tol)
    gamma_w = weak_rate(system, bath, thermal)
    lam = 2.0 * V2 * b2 * (k_p.imag - k_m.imag)
    lam1 = eps / eta * lam
    lam3 = 2.0 * v_r / eta * lam
    # gamma_yy to first order is 2 B^2 Re K_lin
    kappa_x = 2.0 * V2 * v_r / eta * 2.0 * b2 * (k_p.real - k_m.real)
    kappa_z = eps / (2.0 * v_r) * kappa_x if v_r != 0.0 else 0.0
    M = [
        [-gamma_w, -(eps + lam1), 0.0],
        [eps, 0.0, -2.0 * v_r],
        [0.0, 2.0 * v_r + lam3, -gamma_w],
    ]
    rates = RateSet(
        Gamma_x=gamma_w, Gamma_z=gamma_w, lambda_1=lam1, lambda_3=lam3, kappa_x=kappa_x, kappa_z=kappa_z
    )
    return Generator(M, [-kappa_x, 0.0, -kappa_z], "weak", rates, pq, system, bath, thermal,
                     _telemetry(system, bath, thermal, pq))


def build_high_temperature(
    system: SystemModel, bath: BathModel, thermal: ThermalState, tol: float = _corr.DEFAULT_TOL
) -> Generator:
    """Generator truncated at second order in V_R / epsilon."""
    if system.epsilon == 0.0:
        raise ValueError("high-temperature generator requires epsilon != 0")
    _check_cutoff(system, bath)
    pq = PolaronQuantities.evaluate(system, bath, thermal)
    ratio = abs(pq.V_R / system.epsilon)
    if ratio >= 1.0:
        raise ValueError(f"|V_R/epsilon| = {ratio:.3g} >= 1: outside the high-temperature expansion")
    if ratio > _HT_WARN:
        warnings.warn(f"|V_R/epsilon| = {ratio:.3g} is not small", RuntimeWarning, stacklevel=2)
    r = _Responses(bath, thermal, tol)
    V2, v_r, eta, eps = system.V**2, pq.V_R, pq.eta, system.epsilon
    gxp, sxp = r(eta, "xx")
    gxm, sxm = r(-eta, "xx")
    gyp, syp = r(eta, "yy")
    gym, sym = r(-eta, "yy")
    gamma_y = V2 * (gxp + gxm)
    gamma_z = V2 * (gxp + gxm + gyp + gym)
    lam1 = 2.0 * V2 * (syp - sym)
    lam2 = 2.0 * V2 * (sxp - sxm)
    kappa_z = V2 * (gxp - gxm + gyp - gym)
    M = [
        [-(gamma_z - gamma_y), -(eps + lam1), 0.0],
        [eps + lam2, -gamma_y, -2.0 * v_r],
        [0.0, 2.0 * v_r, -gamma_z],
    ]
    rates = RateSet(
        Gamma_x=gamma_z - gamma_y, Gamma_y=gamma_y, Gamma_z=gamma_z, lambda_1=lam1, lambda_2=lam2, kappa_z=kappa_z
    )
    return Generator(M, [0.0, 0.0, -kappa_z], "high_temperature", rates, pq, system, bath, thermal,
                     _telemetry(system, bath, thermal, pq))


_BUILDERS = {
    "resonant": build_resonant,
    "full": build_full,
    "weak": build_weak,
    "high_temperature": build_high_temperature,
}


def build_generator(
    regime: str, system: SystemModel, bath: BathModel, thermal: ThermalState, tol: float = _corr.DEFAULT_TOL
) -> Generator:
    """Dispatch on ``regime``; ``"auto"`` picks resonant at epsilon = 0 and full otherwise."""
    if regime == "auto":
        regime = "resonant" if system.epsilon == 0.0 else "full"
    try:
        builder = _BUILDERS[regime]
    except KeyError:
        raise ValueError(f"unknown regime {regime!r}; expected one of {('auto',) + REGIMES}") from None
    return builder(system, bath, thermal, tol)
