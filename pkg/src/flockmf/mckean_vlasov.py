"""Intermediate (law-dependent) system approximated by an M-sample frozen flow.

The law of the McKean-Vlasov process is represented by the empirical measure
of M sample paths. :func:`picard_solve` iterates: simulate the samples against
the previous flow, freeze the result, repeat, reusing the same Brownian
increments each round so successive flows can be compared pathwise.
"""
from dataclasses import dataclass, field
import logging
import math

import numpy as np

from ._pairwise import pair_sums
from .exceptions import BlowupError, InvalidParameterError
from .particles import Trajectory, Xi, mean_field_terms, step_count, velocity_drift

log = logging.getLogger(__name__)


@dataclass
class FrozenFlow(Trajectory):
    """Time-indexed sample ensembles standing in for the law f_xi.

    Lookup is piecewise constant: step ``k`` of a consumer reads ``self[k]``.
    """

    @property
    def m(self):
        return self.positions.shape[1]

    @property
    def ensembles(self):
        return self.snapshots

    @classmethod
    def constant(cls, init, p, n_steps, dt):
        reps = (n_steps + 1, 1, 1)
        return cls(params=p, dt=dt, times=init.time + dt * np.arange(n_steps + 1),
                   positions=np.tile(init.positions, reps),
                   velocities=np.tile(init.velocities, reps))

    @classmethod
    def from_trajectory(cls, traj):
        return cls(params=traj.params, dt=traj.dt, times=traj.times,
                   positions=traj.positions, velocities=traj.velocities)


@dataclass
class PicardReport:
    iterations: int = 0
    gaps: list = field(default_factory=list)
    converged: bool = False

    def as_dict(self):
        return {"iterations": self.iterations, "gaps": list(self.gaps),
                "converged": self.converged}


def _as_points(x):
    x = np.asarray(x, dtype=float)
    return x[None, :] if x.ndim == 1 else x, x.ndim == 1


def mollified_density(x, ens, eps):
    """(1/M) sum_j phi_1^eps(x - X^j) at one point or a stack of points."""
    if not eps > 0:
        raise InvalidParameterError(f"eps must be > 0, got {eps!r}")
    pts, single = _as_points(x)
    _, _, den = pair_sums(pts, ens.positions, np.zeros_like(ens.velocities), eps,
                          want_force=False, want_align=True)
    den /= ens.n
    return float(den[0]) if single else den


def field_alignment(x, ens, xi):
    """Field form of the local alignment velocity against the sample ensemble."""
    pts, single = _as_points(x)
    _, u = mean_field_terms(pts, ens.positions, ens.velocities, xi, want_force=False)
    return u[0] if single else u


def field_interaction(x, ens, eps):
    """(1/M) sum_j grad W_eps(x - X^j), i.e. grad W_eps convolved with the sample law."""
    pts, single = _as_points(x)
    f, _ = mean_field_terms(pts, ens.positions, ens.velocities, Xi(eps, 1.0, 1.0),
                            want_align=False)
    return f[0] if single else f


def reference_drift(x, v, flow_step, p):
    """Drift of the intermediate system with fields frozen at ``flow_step``."""
    pts, single = _as_points(x)
    vel, _ = _as_points(v)
    dv = velocity_drift(pts, vel, flow_step.positions, flow_step.velocities, p)
    if single:
        return vel[0].copy(), dv[0]
    return vel.copy(), dv


def run_against_flow(init, p, flow, noise, n_steps=None):
    """Simulate ``init`` with the intermediate drift, fields read from ``flow``.

    Sample ``i`` consumes noise row ``i`` so paths can be coupled to any other
    system sharing ``noise``.
    """
    n_steps = len(flow) - 1 if n_steps is None else n_steps
    dt = flow.dt
    n = init.n
    xs = np.empty((n_steps + 1, n, init.d))
    vs = np.empty_like(xs)
    x, v = init.positions.copy(), init.velocities.copy()
    xs[0], vs[0] = x, v
    amp = math.sqrt(2.0 * p.sigma)
    for k in range(n_steps):
        with np.errstate(over="ignore", invalid="ignore"):
            dv = velocity_drift(x, v, flow.positions[k], flow.velocities[k], p)
            x = x + dt * v
            v = v + dt * dv
            if p.sigma > 0:
                v = v + amp * noise.block(k, n)
        if not (np.isfinite(x).all() and np.isfinite(v).all()):
            raise BlowupError(k, f"non-finite reference state after step {k}")
        xs[k + 1], vs[k + 1] = x, v
    times = init.time + dt * np.arange(n_steps + 1)
    return Trajectory(params=p, dt=dt, times=times, positions=xs, velocities=vs)


def flow_gap(a, b):
    """Max over time of the sample-mean squared phase-space distance."""
    dx = np.sum((a.positions - b.positions) ** 2, axis=-1)
    dv = np.sum((a.velocities - b.velocities) ** 2, axis=-1)
    return float(np.max(np.mean(dx + dv, axis=1)))


def picard_solve(init, p, T, dt, noise, max_iters=50, tol=1e-12, initial_flow=None):
    """Fixed-point iteration for the frozen flow.

    Parameters
    ----------
    init : PhaseEnsemble
        M >= 2 initial samples.
    p : Params
    T, dt : float
        Horizon and step; ``dt`` must divide ``T``.
    noise : NoisePlan
        Shared by every iteration.
    max_iters : int
        Number of simulate-and-freeze rounds allowed.
    tol : float
        Stop once the gap between successive flows drops below this.
    initial_flow : FrozenFlow, optional
        Iteration-0 flow. Defaults to ``init`` held constant in time.

    Returns
    -------
    (FrozenFlow, PicardReport)
        Non-convergence is reported through ``converged=False``.
    """
    if init.n < 2:
        raise InvalidParameterError(f"picard_solve needs M >= 2 samples, got {init.n}")
    if max_iters < 1:
        raise InvalidParameterError(f"max_iters must be >= 1, got {max_iters}")
    if not tol > 0:
        raise InvalidParameterError(f"tol must be > 0, got {tol}")
    n_steps = step_count(T, dt)
    if initial_flow is None:
        flow = FrozenFlow.constant(init, p, n_steps, dt)
    else:
        if len(initial_flow) != n_steps + 1 or initial_flow.m != init.n:
            raise InvalidParameterError("initial_flow does not match the grid or sample count")
        flow = initial_flow
    report = PicardReport()
    for it in range(1, max_iters + 1):
        new = FrozenFlow.from_trajectory(run_against_flow(init, p, flow, noise, n_steps))
        gap = flow_gap(new, flow)
        report.iterations = it
        report.gaps.append(gap)
        log.debug("picard iteration %d gap %.3e", it, gap)
        flow = new
        if gap < tol:
            report.converged = True
            break
    return flow, report
