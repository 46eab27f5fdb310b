"""Special functions of complex argument used by the bath and rate formulas.

The digamma family is evaluated by upward recurrence into the region
``|z| >= 15, Re z >= 0`` followed by the standard asymptotic series, which
gives uniform accuracy along the vertical lines ``1/2 + 1/y + i t`` that
appear in the phonon propagator. All functions broadcast over numpy arrays.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as _sp

__all__ = [
    "PoleError",
    "EULER_GAMMA",
    "digamma",
    "polygamma",
    "harmonic_number",
    "hurwitz_zeta",
    "bessel_j0",
]

EULER_GAMMA = float(np.euler_gamma)

# B_2, B_4, ..., B_20
_BERNOULLI = np.array(
    [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
        -3617.0 / 510.0,
        43867.0 / 798.0,
        -174611.0 / 330.0,
    ]
)

_ASYMPTOTIC_RADIUS = 15.0
_MAX_ORDER = 8


class PoleError(ValueError):
    """Raised when a function is evaluated at one of its poles."""


def _prepare(z):
    arr = np.asarray(z)
    is_complex = np.iscomplexobj(arr)
    zc = arr.astype(np.complex128)
    if not np.all(np.isfinite(zc)):
        raise ValueError("argument must be finite")
    poles = (zc.imag == 0) & (zc.real <= 0) & (zc.real == np.round(zc.real))
    if np.any(poles):
        raise PoleError(f"pole at non-positive integer argument: {zc[poles].real.tolist()}")
    return zc, is_complex, arr.ndim == 0


def _finish(w, is_complex, scalar):
    if not is_complex:
        w = w.real
    if scalar:
        return complex(w) if is_complex else float(w)
    return w


def _shift_count(z):
    # smallest N >= 0 with Re(z+N) >= 0 and |z+N| >= radius
    need_re = np.maximum(0.0, np.ceil(-z.real))
    im = np.minimum(np.abs(z.imag), _ASYMPTOTIC_RADIUS)
    reach = np.sqrt(_ASYMPTOTIC_RADIUS**2 - im * im)
    need_abs = np.maximum(0.0, np.ceil(reach - z.real))
    return np.maximum(need_re, need_abs).astype(np.int64)


def _asymptotic(n: int, z):
    inv = 1.0 / z
    inv2 = inv * inv
    if n == 0:
        out = np.log(z) - 0.5 * inv
        term = np.ones_like(z)
        for k, b in enumerate(_BERNOULLI, start=1):
            term = term * inv2
            out = out - b / (2 * k) * term
        return out
    sign = (-1.0) ** (n + 1)
    zn = inv**n
    out = math.factorial(n - 1) * zn + 0.5 * math.factorial(n) * zn * inv
    term = zn
    for k, b in enumerate(_BERNOULLI, start=1):
        term = term * inv2
        coef = b * math.factorial(2 * k + n - 1) / math.factorial(2 * k)
        out = out + coef * term
    return sign * out


def _polygamma_core(n: int, z):
    z = np.asarray(z, dtype=np.complex128)
    shifts = _shift_count(z)
    top = int(shifts.max()) if shifts.size else 0
    acc = np.zeros_like(z)
    w = z.copy()
    scale = (-1.0) ** n * math.factorial(n)
    for k in range(top):
        active = shifts > k
        if not np.any(active):
            break
        acc = acc + np.where(active, scale / np.where(active, w, 1.0) ** (n + 1), 0.0)
        w = np.where(active, w + 1.0, w)
    return _asymptotic(n, w) - acc


def digamma(z):
    """Digamma function psi(z) for real or complex ``z``.

    Raises :class:`PoleError` at non-positive integers.
    """
    zc, is_complex, scalar = _prepare(z)
    return _finish(_polygamma_core(0, zc), is_complex, scalar)


def polygamma(n: int, z):
    """Polygamma function of order ``n`` (``n = 0`` is digamma).

    Orders up to 8 are supported; the bath formulas need 1 to 3 and the
    small-separation limit of the saddle coefficients needs 5.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or not 0 <= n <= _MAX_ORDER:
        raise ValueError(f"unsupported polygamma order {n!r}; expected integer in [0, {_MAX_ORDER}]")
    zc, is_complex, scalar = _prepare(z)
    return _finish(_polygamma_core(int(n), zc), is_complex, scalar)


def harmonic_number(m):
    """Analytic continuation H(m) = psi(m + 1) + gamma_E of the harmonic numbers."""
    arr = np.asarray(m)
    w = digamma(arr + 1) + EULER_GAMMA
    return w


def hurwitz_zeta(s: float, a):
    """Hurwitz zeta function sum_{k>=0} (k + a)^(-s) for s > 1, a > 0."""
    a_arr = np.asarray(a, dtype=float)
    if not s > 1 or np.any(a_arr <= 0):
        raise ValueError("hurwitz_zeta requires s > 1 and a > 0")
    out = _sp.zeta(float(s), a_arr)
    return float(out) if a_arr.ndim == 0 else out


def bessel_j0(x):
    """Bessel function of the first kind of order zero."""
    arr = np.asarray(x, dtype=float)
    out = _sp.j0(arr)
    return float(out) if arr.ndim == 0 else out
