"""Solutions of the Bloch equations: steady states, propagation and closed forms."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .bath import BathModel, ThermalState
from .bloch import Generator, SystemModel, build_high_temperature, build_weak

__all__ = [
    "BlochVector",
    "BlochTrajectory",
    "SingularGeneratorError",
    "RegimeError",
    "DONOR",
    "steady_state",
    "evolve",
    "closed_form_resonant",
    "resonant_xi_squared",
    "weak_xi_squared",
    "high_T_shifted_bias",
    "closed_form_weak",
    "closed_form_high_T",
    "to_lab_frame",
    "to_polaron_frame",
    "count_turning_points",
    "count_zero_crossings",
]

log = logging.getLogger(__name__)

CONDITION_LIMIT = 1e6
ODE_TOL = 1e-10
POSITIVITY_TOL = 1e-6


class SingularGeneratorError(ValueError):
    """The drift matrix has no unique steady state."""


class RegimeError(ValueError):
    """A closed form was requested outside the regime where it applies."""


@dataclass(frozen=True)
class BlochVector:
    ax: float
    ay: float
    az: float
    frame: str = "polaron"

    def __post_init__(self):
        if self.frame not in ("polaron", "lab"):
            raise ValueError(f"frame must be 'polaron' or 'lab', got {self.frame!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.ax, self.ay, self.az])


DONOR = BlochVector(0.0, 0.0, 1.0)


def to_lab_frame(v: BlochVector, B: float) -> BlochVector:
    """Apply L = diag(B, B, 1) to a polaron-frame vector."""
    if v.frame != "polaron":
        raise ValueError("vector is already in the lab frame")
    return BlochVector(B * v.ax, B * v.ay, v.az, "lab")


def to_polaron_frame(v: BlochVector, B: float) -> BlochVector:
    if v.frame != "lab":
        raise ValueError("vector is already in the polaron frame")
    if B == 0.0:
        raise ValueError("cannot invert the frame map at B = 0")
    return BlochVector(v.ax / B, v.ay / B, v.az, "polaron")


@dataclass(frozen=True, eq=False)
class BlochTrajectory:
    """Bloch vectors on a time grid; ``values`` has shape (n, 3)."""

    times: np.ndarray
    values: np.ndarray
    frame: str
    B: float
    steady: BlochVector | None = None
    eigenvalues: np.ndarray | None = None
    method: str = "eigen"
    info: dict = field(default_factory=dict)

    @property
    def ax(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def ay(self) -> np.ndarray:
        return self.values[:, 1]

    @property
    def az(self) -> np.ndarray:
        return self.values[:, 2]

    @property
    def states(self) -> list[BlochVector]:
        return [BlochVector(*row, frame=self.frame) for row in self.values.tolist()]

    def to_lab(self) -> "BlochTrajectory":
        if self.frame == "lab":
            return self
        scale = np.array([self.B, self.B, 1.0])
        steady = to_lab_frame(self.steady, self.B) if self.steady is not None else None
        return BlochTrajectory(self.times, self.values * scale, "lab", self.B, steady, self.eigenvalues,
                               self.method, dict(self.info))


def _times(times):
    t = np.asarray(times, dtype=float).ravel()
    if t.size == 0:
        raise ValueError("empty time grid")
    if np.any(t < 0) or np.any(np.diff(t) < 0):
        raise ValueError("times must be non-negative and non-decreasing")
    return t


def steady_state(gen: Generator) -> BlochVector:
    """Solve M alpha = -b in the polaron frame."""
    M, b = gen.M, gen.b
    norm = np.linalg.norm(M, 2)
    det = np.linalg.det(M)
    if norm == 0.0 or abs(det) <= 1e-14 * norm**3:
        raise SingularGeneratorError(f"singular generator (det = {det:.3e}) in regime {gen.regime}")
    return BlochVector(*np.linalg.solve(M, -b), frame="polaron")


def _phi1(q, t):
    # (exp(q t) - 1) / q, equal to t at q = 0
    z = q * t
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, t * (1.0 + 0.5 * z), t * np.expm1(safe) / safe)


def _monitor(values, label):
    excess = float(np.max(np.abs(values[:, 2])) - 1.0) if values.size else 0.0
    if excess > POSITIVITY_TOL:
        log.warning("population difference leaves [-1, 1] by %.3e (%s)", excess, label)
    return max(excess, 0.0)


def evolve(gen: Generator, a0: BlochVector = DONOR, times=None) -> BlochTrajectory:
    """Propagate ``a0`` (polaron frame) under ``gen``.

    Uses the eigendecomposition of M; if its eigenvector matrix is
    ill-conditioned (near the coherent/incoherent crossover M is close to
    defective) the linear ODE is integrated instead.
    """
    if a0.frame != "polaron":
        raise ValueError("initial state must be given in the polaron frame")
    t = _times(times if times is not None else np.linspace(0.0, 30.0, 301))
    M, b = gen.M, gen.b
    x0 = a0.as_array()
    q, vecs = np.linalg.eig(M)
    cond = np.linalg.cond(vecs)
    try:
        steady = steady_state(gen)
    except SingularGeneratorError:
        steady = None
    if np.isfinite(cond) and cond <= CONDITION_LIMIT:
        c = np.linalg.solve(vecs, x0.astype(complex))
        d = np.linalg.solve(vecs, b.astype(complex))
        modes = np.exp(np.outer(t, q)) * c[None, :] + _phi1(q[None, :], t[:, None]) * d[None, :]
        values = (modes @ vecs.T).real
        method = "eigen"
    else:
        sol = solve_ivp(
            lambda _, y: M @ y + b,
            (0.0, float(t[-1])),
            x0,
            method="DOP853",
            t_eval=t,
            rtol=ODE_TOL,
            atol=ODE_TOL,
        )
        if not sol.success:
            raise FloatingPointError(f"ODE integration failed: {sol.message}")
        values = sol.y.T
        method = "ode"
    excess = _monitor(values, gen.regime)
    return BlochTrajectory(t, values, "polaron", gen.polaron.B, steady, q, method,
                           {"regime": gen.regime, "condition": float(cond), "positivity_excess": excess})


def _cos_sinc(xi2, t):
    """(cos(xi t/2), sin(xi t/2)/xi) continued to imaginary xi through xi2 = xi^2."""
    t = np.asarray(t, dtype=float)
    z = xi2 * t * t
    if xi2 > 0:
        xi = math.sqrt(xi2)
        cos_part, sinc_part = np.cos(0.5 * xi * t), np.sin(0.5 * xi * t) / xi
    elif xi2 < 0:
        k = math.sqrt(-xi2)
        cos_part, sinc_part = np.cosh(0.5 * k * t), np.sinh(0.5 * k * t) / k
    else:
        cos_part, sinc_part = np.ones_like(t), 0.5 * t
    small = np.abs(z) < 1e-3
    if np.any(small):
        zs = z[small]
        cos_part = np.where(small, 0.0, cos_part)
        sinc_part = np.where(small, 0.0, sinc_part)
        cos_part[small] = 1.0 - zs / 8.0 + zs * zs / 384.0 - zs**3 / 46080.0
        sinc_part[small] = 0.5 * t[small] * (1.0 - zs / 24.0 + zs * zs / 1920.0 - zs**3 / 322560.0)
    return cos_part, sinc_part


def resonant_xi_squared(gen: Generator) -> float:
    """8 V_R (2 V_R + lambda_3) - (Gamma_z - Gamma_y)^2, sign preserved."""
    r = gen.rates
    v_r = gen.polaron.V_R
    return 8.0 * v_r * (2.0 * v_r + r.lambda_3) - (r.Gamma_z - r.Gamma_y) ** 2


def closed_form_resonant(gen: Generator, times) -> BlochTrajectory:
    """Lab-frame trajectory from the donor state at zero bias.

    Imaginary oscillation frequencies continue to hyperbolic functions and
    the crossover point itself is handled by series, so the result is
    continuous in the rates.
    """
    if gen.system.epsilon != 0.0:
        raise RegimeError("closed-form resonant dynamics requires epsilon = 0")
    t = _times(times)
    r, B, v_r = gen.rates, gen.polaron.B, gen.polaron.V_R
    beta = gen.thermal.beta
    gz, gy = r.Gamma_z, r.Gamma_y
    xi2 = resonant_xi_squared(gen)
    cos_part, sinc_part = _cos_sinc(xi2, t)
    damp = np.exp(-0.5 * (gy + gz) * t)
    ax = -B * math.tanh(beta * v_r) * -np.expm1(-(gz - gy) * t)
    ay = -4.0 * B * v_r * damp * sinc_part
    az = damp * (cos_part + (gy - gz) * sinc_part)
    steady = BlochVector(-B * math.tanh(beta * v_r), 0.0, 0.0, "lab")
    eig = np.array([gy - gz, -0.5 * (gy + gz) - 0.5j * np.sqrt(complex(xi2)), -0.5 * (gy + gz) + 0.5j * np.sqrt(complex(xi2))])
    return BlochTrajectory(t, np.column_stack([ax, ay, az]), "lab", B, steady, eig, "closed_form",
                           {"regime": "resonant", "xi_squared": xi2})


def weak_xi_squared(gen: Generator) -> float:
    """4 eta (eta + Lambda) - Gamma_W^2 for a weak-coupling generator."""
    eta = gen.polaron.eta
    v_r = gen.polaron.V_R
    lam = gen.rates.lambda_3 * eta / (2.0 * v_r) if v_r != 0.0 else 0.0
    return 4.0 * eta * (eta + lam) - gen.rates.Gamma_x**2


def closed_form_weak(system: SystemModel, bath: BathModel, thermal: ThermalState, times) -> np.ndarray:
    """Population difference from the donor state at first order in the spectral density."""
    t = _times(times)
    gen = build_weak(system, bath, thermal)
    eta, v_r, eps = gen.polaron.eta, gen.polaron.V_R, system.epsilon
    gamma = gen.rates.Gamma_x
    xi2 = weak_xi_squared(gen)
    if xi2 <= 0.0:
        raise RegimeError(f"weak-coupling oscillation frequency is not real (xi^2 = {xi2:.3e})")
    xi = math.sqrt(xi2)
    th = math.tanh(0.5 * thermal.beta * eta)
    decay = np.exp(-gamma * t)
    relax = (eps / eta) * ((eps / eta) * decay - (1.0 - decay) * th)
    osc = (4.0 * v_r**2 / eta**2) * np.exp(-0.5 * gamma * t) * (np.cos(0.5 * xi * t) - gamma / xi * np.sin(0.5 * xi * t))
    return relax + osc


def high_T_shifted_bias(gen: Generator) -> float:
    eps = gen.system.epsilon
    v_r = gen.polaron.V_R
    return eps + 0.5 * (gen.rates.lambda_1 + gen.rates.lambda_2) + 2.0 * v_r**2 / eps


def closed_form_high_T(
    system: SystemModel, bath: BathModel, thermal: ThermalState, times, order: int = 2
) -> tuple[np.ndarray, np.ndarray]:
    """(az, ay) from the donor state, expanded in V_R/epsilon; ay is lab frame."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if system.epsilon == 0.0:
        raise RegimeError("high-temperature closed form requires epsilon != 0")
    t = _times(times)
    gen = build_high_temperature(system, bath, thermal)
    r, B, v_r, eta = gen.rates, gen.polaron.B, gen.polaron.V_R, gen.polaron.eta
    eps = system.epsilon
    th = math.tanh(0.5 * thermal.beta * eta)
    decay = np.exp(-r.Gamma_z * t)
    eps_bar = high_T_shifted_bias(gen)
    ay = -(2.0 * B * v_r / eps) * np.exp(-0.5 * r.Gamma_z * t) * np.sin(eps_bar * t)
    if order == 1:
        return decay - (1.0 - decay) * th, ay
    amp = 4.0 * v_r**2 / eps**2
    ratio = r.Gamma_y / r.Gamma_z if r.Gamma_z != 0.0 else 1.0
    az = (
        decay * (1.0 - amp)
        + amp * np.exp(-0.5 * r.Gamma_z * t) * np.cos(eps_bar * t)
        - (1.0 - decay) * th * (1.0 + amp * (ratio - 1.0))
    )
    return az, ay


def count_turning_points(values, times, t_min: float = 1.0, deadband: float = 1e-4) -> int:
    """Direction reversals of a sampled signal after ``t_min``.

    A reversal counts once the signal has retreated from its running extremum
    by more than ``deadband``, so numerical jitter and the flat tail of a
    relaxing curve are ignored.
    """
    v = np.asarray(values, dtype=float)[np.asarray(times, dtype=float) > t_min]
    if v.size < 3:
        return 0
    count = 0
    direction = 0
    extreme = v[0]
    for val in v[1:]:
        if direction == 0:
            if abs(val - extreme) > deadband:
                direction = 1 if val > extreme else -1
                extreme = val
        elif direction * (val - extreme) > 0:
            extreme = val
        elif direction * (extreme - val) > deadband:
            count += 1
            direction = -direction
            extreme = val
    return count


def count_zero_crossings(values, times=None, t_min: float = 0.0, deadband: float = 1e-4) -> int:
    """Sign changes of a signal, ignoring samples within ``deadband`` of zero."""
    v = np.asarray(values, dtype=float)
    if times is not None:
        v = v[np.asarray(times, dtype=float) > t_min]
    signs = np.sign(v[np.abs(v) > deadband])
    return int(np.count_nonzero(signs[1:] != signs[:-1]))
