"""Closed-form kernels: regularized Newtonian potential, mollifier, velocity cutoff."""
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn

from .exceptions import InvalidParameterError


def _check_eps(eps):
    if not (np.isfinite(eps) and eps > 0):
        raise InvalidParameterError(f"eps must be finite and > 0, got {eps!r}")


def _check_dim(d, minimum=3):
    if int(d) != d or d < minimum:
        raise InvalidParameterError(f"dimension must be an integer >= {minimum}, got {d!r}")


def unit_ball_volume(d):
    return math.pi ** (d / 2) / gamma_fn(d / 2 + 1)


def newton_constant(d):
    """C_d = 1 / ((d - 2) |B(0, 1)|)."""
    _check_dim(d)
    return 1.0 / ((d - 2) * unit_ball_volume(d))


def newtonian_reg_potential(x, eps, d=None):
    """Regularized Newtonian potential ``C_d (eps + |x|^2)^(-(d-2)/2)``.

    ``x`` may be a single point of shape ``(d,)`` or a stack ``(..., d)``.
    """
    _check_eps(eps)
    x = np.asarray(x, dtype=float)
    d = x.shape[-1] if d is None else d
    _check_dim(d)
    r2 = np.sum(x * x, axis=-1)
    return newton_constant(d) * (eps + r2) ** (-(d - 2) / 2)


def newtonian_reg_force(x, eps, d=None):
    """Gradient of :func:`newtonian_reg_potential`; odd in ``x``, zero at the origin."""
    _check_eps(eps)
    x = np.asarray(x, dtype=float)
    d = x.shape[-1] if d is None else d
    _check_dim(d)
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    return -(d - 2) * newton_constant(d) * x * (eps + r2) ** (-d / 2)


def max_force_magnitude(eps, d):
    """Analytic max of |grad W_eps|, attained at |x|^2 = eps / (d - 1)."""
    _check_eps(eps)
    _check_dim(d)
    return (newton_constant(d) * (d - 2) * (d - 1) ** ((d - 1) / 2)
            * d ** (-d / 2) * eps ** (-(d - 1) / 2))


@dataclass(frozen=True)
class KernelBoundReport:
    eps: float
    d: int
    numeric_max: float
    analytic_max: float
    argmax_radius: float
    relative_error: float
    # numeric_max * eps^(d/2): the constant in the eps^(-d/2) sup bound
    ratio_to_bound_scale: float


def verify_kernel_bounds(eps, d, grid=4096):
    """Grid-search max |grad W_eps| over a logarithmic radial grid.

    The grid spans four decades on either side of the critical radius
    ``sqrt(eps / (d - 1))``, so the search does not depend on knowing it
    exactly.
    """
    _check_eps(eps)
    _check_dim(d)
    if grid < 1000:
        raise InvalidParameterError(f"grid must be >= 1000, got {grid}")
    scale = math.sqrt(eps)
    radii = scale * np.logspace(-4, 4, int(grid))
    pts = np.zeros((radii.size, d))
    pts[:, 0] = radii
    mags = np.linalg.norm(newtonian_reg_force(pts, eps, d), axis=-1)
    k = int(np.argmax(mags))
    numeric = float(mags[k])
    analytic = max_force_magnitude(eps, d)
    return KernelBoundReport(
        eps=float(eps), d=int(d), numeric_max=numeric, analytic_max=analytic,
        argmax_radius=float(radii[k]),
        relative_error=abs(numeric - analytic) / analytic,
        ratio_to_bound_scale=numeric * eps ** (d / 2),
    )


def _bump(r2):
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


@lru_cache(maxsize=None)
def mollifier_normalization(d):
    """Z_d = integral of exp(-1/(1-|x|^2)) over the unit ball in R^d."""
    if int(d) != d or d < 1:
        raise InvalidParameterError(f"dimension must be a positive integer, got {d!r}")
    d = int(d)
    if d == 1:
        val, _ = quad(lambda s: math.exp(-1.0 / (1.0 - s * s)), -1.0, 1.0,
                      epsabs=1e-13, epsrel=1e-10, limit=200)
        return val
    sphere = d * unit_ball_volume(d)
    val, _ = quad(lambda r: r ** (d - 1) * math.exp(-1.0 / (1.0 - r * r)), 0.0, 1.0,
                  epsabs=1e-13, epsrel=1e-10, limit=200)
    return sphere * val


def mollifier_peak(eps, d):
    """phi_1^eps(0)."""
    _check_eps(eps)
    return math.exp(-1.0) / (mollifier_normalization(d) * eps ** d)


def mollifier(x, eps, d=None):
    """Standard bump mollifier scaled to B(0, eps), unit mass."""
    _check_eps(eps)
    x = np.asarray(x, dtype=float)
    d = x.shape[-1] if d is None else d
    r2 = np.sum(x * x, axis=-1) / (eps * eps)
    val = _bump(np.atleast_1d(r2)) / (mollifier_normalization(d) * eps ** d)
    return val.reshape(np.shape(r2)) if np.ndim(r2) else float(val[0])


def cutoff_profile(s):
    """phi_2 on [0, inf): 1 below 1, 0 above 2, quintic smoothstep between."""
    s = np.asarray(s, dtype=float)
    t = np.clip(s - 1.0, 0.0, 1.0)
    return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)


def velocity_cutoff(v, delta):
    """phi_2(delta |v|) for ``v`` of shape ``(d,)`` or ``(..., d)``."""
    if not (np.isfinite(delta) and delta > 0):
        raise InvalidParameterError(f"delta must be finite and > 0, got {delta!r}")
    v = np.asarray(v, dtype=float)
    out = cutoff_profile(delta * np.linalg.norm(v, axis=-1))
    return out if out.ndim else float(out)


def confinement_gradient(x):
    return np.array(x, dtype=float, copy=True)
