"""Shared-noise coupling of the particle system with the intermediate system.

Particle ``i`` of both systems starts from the same initial point and consumes
the same Brownian increments, so the pathwise gap isolates the mean-field
discrepancy. Sweeps over N estimate the decay rate of the worst-particle
squared gap.
"""
from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .exceptions import InvalidParameterError
from .initial import InitialLaw, sample_initial
from .mckean_vlasov import FrozenFlow, field_alignment, picard_solve, run_against_flow
from .noise import NoisePlan
from .particles import Xi, alignment_field, simulate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Schedule:
    alpha: float
    n: int
    d: int
    xi: Xi
    budget: float
    eps_max: float = None
    delta_max: float = None

    @property
    def identity_residual(self):
        """|delta^2 nu^4 eps^(4d+2) * alpha ln N - 1|."""
        xi = self.xi
        return abs(xi.delta ** 2 * xi.nu ** 4 * xi.eps ** (4 * self.d + 2) * self.budget - 1.0)

    def as_dict(self):
        return {"alpha": self.alpha, "n": self.n, "d": self.d, "budget": self.budget,
                "eps_max": self.eps_max, "delta_max": self.delta_max,
                "identity_residual": self.identity_residual, **self.xi.as_dict()}


def xi_schedule(n, alpha, d, eps_max=None, delta_max=None):
    """Regularization parameters tied to N through L = alpha ln N.

    The budget 1/L is split in equal thirds (in log space) among delta^2,
    nu^4 and eps^(4d+2). Capped eps/delta are clamped first, then nu is
    re-solved so that delta^2 nu^4 eps^(4d+2) = 1/L still holds.
    """
    if int(n) != n or n < 2:
        raise InvalidParameterError(f"N must be an integer >= 2, got {n!r}")
    if not 0 < alpha <= 1:
        raise InvalidParameterError(f"alpha must satisfy 0 < alpha <= 1, got {alpha!r}")
    if int(d) != d or d < 3:
        raise InvalidParameterError(f"d must be an integer >= 3, got {d!r}")
    budget = alpha * math.log(n)
    log_l = math.log(budget)
    eps = math.exp(-log_l / (3 * (4 * d + 2)))
    delta = math.exp(-log_l / 6)
    if eps_max is not None:
        eps = min(eps, eps_max)
    if delta_max is not None:
        delta = min(delta, delta_max)
    nu = math.exp(-(log_l + 2 * math.log(delta) + (4 * d + 2) * math.log(eps)) / 4)
    return Schedule(alpha=alpha, n=int(n), d=int(d), xi=Xi(eps, delta, nu),
                    budget=budget, eps_max=eps_max, delta_max=delta_max)


@dataclass
class CoupledPaths:
    """One seed of a coupled run."""

    seed: int
    particles: object
    reference: object
    flow: FrozenFlow
    picard: object

    def squared_gaps(self):
        """Per-time, per-particle squared gaps ``(gx, gv)``, each ``(S, N)``."""
        gx = np.sum((self.particles.positions - self.reference.positions) ** 2, axis=-1)
        gv = np.sum((self.particles.velocities - self.reference.velocities) ** 2, axis=-1)
        return gx, gv


def coupled_paths(n, m, p, T, dt, seed, initial=None, max_iters=50, tol=1e-12,
                  warm_start=True):
    """Simulate both systems for one seed.

    The frozen flow uses M samples; the first N share initial data and noise
    with the N particles, the rest have their own streams. With
    ``warm_start`` the Picard iteration starts from the M-particle Euler
    trajectory, which is the exact fixed point of the discrete iteration.
    """
    if m < n:
        raise InvalidParameterError(f"M must be >= N, got M={m}, N={n}")
    if n < 1:
        raise InvalidParameterError(f"N must be >= 1, got {n}")
    initial = initial or InitialLaw()
    init_all = sample_initial(initial, m, p.d, seed)
    init_n = init_all.subset(n)
    noise = NoisePlan(seed, p.d, dt)
    particles = simulate(init_n, p, T, dt, noise)
    start = None
    if warm_start and m >= 2:
        start = FrozenFlow.from_trajectory(simulate(init_all, p, T, dt, noise))
    if m >= 2:
        flow, report = picard_solve(init_all, p, T, dt, noise, max_iters=max_iters,
                                    tol=tol, initial_flow=start)
    else:
        flow, report = FrozenFlow.from_trajectory(particles), None
    if len(flow) != len(particles):
        raise InvalidParameterError("flow grid does not match the particle grid")
    reference = run_against_flow(init_n, p, flow, noise)
    return CoupledPaths(seed=seed, particles=particles, reference=reference, flow=flow,
                        picard=report)


@dataclass
class CouplingReport:
    """Worst-particle squared gaps over time, averaged over seeds.

    For each seed the max over particles is taken at every time, then the
    per-seed curves are averaged; this stands in for sup_i E[...].
    """

    n: int
    m: int
    times: np.ndarray
    err_x: np.ndarray
    err_v: np.ndarray
    err: np.ndarray
    per_seed_err: np.ndarray  # (reps, S) worst-particle combined gap
    seeds: list
    params: object
    schedule: object = None
    picard: list = field(default_factory=list)

    @property
    def sup_error(self):
        return float(np.max(self.err))

    @property
    def half_width(self):
        """95% normal half-width of the sup-error across seeds."""
        sups = self.per_seed_err.max(axis=1)
        if len(sups) < 2:
            return float("nan")
        return float(1.96 * sups.std(ddof=1) / math.sqrt(len(sups)))

    def as_dict(self):
        out = {
            "n": self.n, "m": self.m, "times": self.times.tolist(),
            "err_x": self.err_x.tolist(), "err_v": self.err_v.tolist(),
            "err": self.err.tolist(), "sup_error": self.sup_error,
            "half_width": self.half_width, "seeds": list(self.seeds),
            "params": self.params.as_dict(),
            "picard": [r.as_dict() if r is not None else None for r in self.picard],
        }
        if self.schedule is not None:
            out["schedule"] = self.schedule.as_dict()
        return out


def worst_particle_curves(paths):
    gx, gv = paths.squared_gaps()
    return gx.max(axis=1), gv.max(axis=1), (gx + gv).max(axis=1)


def coupled_run(n, m, p, T, dt, seeds, initial=None, schedule=None, max_iters=50,
                tol=1e-12, warm_start=True, keep_paths=False, callback=None):
    """Coupled run averaged over ``seeds`` (an int means a single seed).

    Returns a CouplingReport, plus the per-seed CoupledPaths when
    ``keep_paths`` is set. ``callback(paths)`` is invoked for every seed
    before its paths are dropped.
    """
    seeds = [seeds] if np.isscalar(seeds) else list(seeds)
    if not seeds:
        raise InvalidParameterError("need at least one seed")
    ex, ev, ec, kept, picard = [], [], [], [], []
    for s in seeds:
        paths = coupled_paths(n, m, p, T, dt, s, initial=initial, max_iters=max_iters,
                              tol=tol, warm_start=warm_start)
        cx, cv, cc = worst_particle_curves(paths)
        ex.append(cx)
        ev.append(cv)
        ec.append(cc)
        picard.append(paths.picard)
        if callback is not None:
            callback(paths)
        if keep_paths:
            kept.append(paths)
    report = CouplingReport(
        n=n, m=m, times=paths.particles.times.copy(),
        err_x=np.mean(ex, axis=0), err_v=np.mean(ev, axis=0), err=np.mean(ec, axis=0),
        per_seed_err=np.array(ec), seeds=seeds, params=p, schedule=schedule,
        picard=picard)
    return (report, kept) if keep_paths else report


def alignment_gap(paths, xi):
    """Time-integrated squared gap between empirical and field alignments.

    Returns ``(per_particle, worst)``; the integral is a trapezoid rule on the
    snapshot grid.
    """
    part, ref, flow = paths.particles, paths.reference, paths.flow
    if not (len(part) == len(ref) == len(flow)) or not np.allclose(part.times, ref.times):
        raise InvalidParameterError("trajectories are not on a common grid")
    integrand = np.empty((len(part), part.positions.shape[1]))
    for k in range(len(part)):
        u = alignment_field(part[k], xi)
        ubar = field_alignment(ref.positions[k], flow[k], xi)
        integrand[k] = np.sum((u - ubar) ** 2, axis=-1)
    per_particle = np.trapezoid(integrand, dx=part.dt, axis=0)
    return per_particle, float(per_particle.max())


def alignment_gap_bound(paths, xi, d):
    """Per-particle combination of position/velocity gaps bounding the alignment gap.

    (1/(delta^2 nu^4 eps^(4d+2))) int|dX|^2 + (1/(nu^4 eps^(4d))) int|dV|^2
    + T / (N delta^2 nu^4 eps^(4d)), without the unknown constant.
    """
    gx, gv = paths.squared_gaps()
    dt = paths.particles.dt
    n = gx.shape[1]
    T = paths.particles.times[-1] - paths.particles.times[0]
    ix = np.trapezoid(gx, dx=dt, axis=0)
    iv = np.trapezoid(gv, dx=dt, axis=0)
    e, dl, nu = xi.eps, xi.delta, xi.nu
    return (ix / (dl ** 2 * nu ** 4 * e ** (4 * d + 2))
            + iv / (nu ** 4 * e ** (4 * d))
            + T / (n * dl ** 2 * nu ** 4 * e ** (4 * d)))


def fit_rate(points, n_boot=1000, seed=0):
    """OLS fit of log-error against log-N.

    ``points`` is a sequence of ``(log N, log error)`` pairs. The half-width
    is half the central 95% range of slopes refitted on residual-bootstrap
    resamples.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise InvalidParameterError("fit_rate needs at least 3 points")
    x, y = pts[:, 0], pts[:, 1]
    if np.unique(x).size < 2 or np.ptp(x) == 0:
        raise InvalidParameterError("fit_rate needs distinct abscissae")
    if n_boot < 200:
        raise InvalidParameterError("n_boot must be >= 200")
    if not np.isfinite(pts).all():
        raise InvalidParameterError("fit_rate needs finite points")
    slope, intercept = np.polyfit(x, y, 1)
    fitted = intercept + slope * x
    resid = y - fitted
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(x), size=(n_boot, len(x)))
    yb = fitted[None, :] + resid[idx]
    xc = x - x.mean()
    slopes = (yb - yb.mean(axis=1, keepdims=True)) @ xc / (xc @ xc)
    lo, hi = np.percentile(slopes, [2.5, 97.5])
    return float(slope), float(intercept), float((hi - lo) / 2)


def bootstrap_rate(n_values, per_seed, n_boot=1000, seed=0):
    """Bootstrap half-width of the log-log slope by resampling seeds.

    ``per_seed[k]`` holds the per-seed error curves for ``n_values[k]``,
    shape ``(reps, S)`` or ``(reps,)``. Each resample redraws the seeds of
    every N, recomputes the sup over time of the seed-mean, and refits.
    """
    logn = np.log(np.asarray(n_values, dtype=float))
    xc = logn - logn.mean()
    rng = np.random.default_rng(seed)
    sups = np.empty((n_boot, len(n_values)))
    for k, arr in enumerate(per_seed):
        arr = np.asarray(arr, dtype=float)
        arr = arr[:, None] if arr.ndim == 1 else arr
        idx = rng.integers(0, arr.shape[0], size=(n_boot, arr.shape[0]))
        sups[:, k] = arr[idx].mean(axis=1).max(axis=-1)
    with np.errstate(divide="ignore"):
        ly = np.log(sups)
    ok = np.isfinite(ly).all(axis=1)
    slopes = (ly[ok] - ly[ok].mean(axis=1, keepdims=True)) @ xc / (xc @ xc)
    if slopes.size < 2:
        return float("nan")
    lo, hi = np.percentile(slopes, [2.5, 97.5])
    return float((hi - lo) / 2)


@dataclass
class SweepReport:
    n_values: list
    cells: list  # CouplingReport per N
    slope: float
    intercept: float
    half_width: float
    fit_half_width: float
    degenerate: bool
    alpha: float
    T: float
    dt: float

    def as_dict(self):
        return {
            "n_values": list(self.n_values), "slope": self.slope,
            "intercept": self.intercept, "half_width": self.half_width,
            "fit_half_width": self.fit_half_width, "degenerate": self.degenerate,
            "alpha": self.alpha, "T": self.T, "dt": self.dt,
            # the N^(T^3 alpha) amplification in the error bound, at the largest N
            "amplification": max(self.n_values) ** (self.T ** 3 * self.alpha),
            "cells": [c.as_dict() for c in self.cells],
        }


def sweep(n_list, alpha, reps, p_base, T, dt, m_multiplier=8, eps_max=None,
          delta_max=None, seed=0, initial=None, max_iters=50, tol=1e-12, n_boot=1000,
          warm_start=True, progress=None):
    """Convergence study over particle counts with the logarithmic schedule.

    Seeds ``seed, seed + 1, ..., seed + reps - 1`` are used for every N.
    """
    n_list = sorted(int(n) for n in n_list)
    if len(set(n_list)) < 3:
        raise InvalidParameterError("sweep needs at least 3 distinct N values")
    if min(n_list) < 64:
        raise InvalidParameterError("every N in a sweep must be >= 64")
    if reps < 5:
        raise InvalidParameterError(f"sweep needs reps >= 5, got {reps}")
    seeds = [seed + r for r in range(reps)]
    cells = []
    for n in n_list:
        sched = xi_schedule(n, alpha, p_base.d, eps_max=eps_max, delta_max=delta_max)
        p = p_base.replace(xi=sched.xi)
        cell = coupled_run(n, m_multiplier * n, p, T, dt, seeds, initial=initial,
                           schedule=sched, max_iters=max_iters, tol=tol,
                           warm_start=warm_start)
        log.info("N=%d M=%d sup-error %.4e", n, cell.m, cell.sup_error)
        if progress is not None:
            progress(cell)
        cells.append(cell)
    sups = np.array([c.sup_error for c in cells])
    if np.any(sups <= 0):
        nan = float("nan")
        return SweepReport(n_list, cells, nan, nan, nan, nan, True, alpha, T, dt)
    points = np.column_stack([np.log(n_list), np.log(sups)])
    slope, intercept, fit_hw = fit_rate(points, n_boot=max(n_boot, 200))
    hw = bootstrap_rate(n_list, [c.per_seed_err for c in cells], n_boot=n_boot)
    return SweepReport(n_list, cells, slope, intercept, hw, fit_hw, False, alpha, T, dt)
