"""N-particle moderately interacting flocking system and its Euler-Maruyama integrator."""
from dataclasses import dataclass, field
import math

import numpy as np

from ._pairwise import pair_sums
from .exceptions import BlowupError, InvalidParameterError, InvalidStateError
from .kernels import velocity_cutoff


@dataclass(frozen=True)
class Xi:
    """Regularization triple: mollifier radius, inverse velocity cutoff, density floor."""

    eps: float
    delta: float
    nu: float

    def __post_init__(self):
        for name in ("eps", "delta", "nu"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise InvalidParameterError(f"{name} must be finite and > 0, got {val!r}")

    def as_dict(self):
        return {"eps": self.eps, "delta": self.delta, "nu": self.nu}


@dataclass(frozen=True)
class Params:
    gamma: float = 1.0
    lam: float = 1.0
    beta: float = 1.0
    sigma: float = 1.0
    xi: Xi = field(default_factory=lambda: Xi(0.5, 0.5, 1.0))
    d: int = 3

    def __post_init__(self):
        for name in ("gamma", "lam", "beta", "sigma"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val >= 0):
                raise InvalidParameterError(f"{name} must be finite and >= 0, got {val!r}")
        if int(self.d) != self.d or self.d < 3:
            raise InvalidParameterError(f"d must be an integer >= 3, got {self.d!r}")

    def replace(self, **changes):
        kw = {"gamma": self.gamma, "lam": self.lam, "beta": self.beta,
              "sigma": self.sigma, "xi": self.xi, "d": self.d}
        kw.update(changes)
        return Params(**kw)

    def as_dict(self):
        return {"gamma": self.gamma, "lambda": self.lam, "beta": self.beta,
                "sigma": self.sigma, "d": self.d, **self.xi.as_dict()}


@dataclass
class PhaseEnsemble:
    positions: np.ndarray
    velocities: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.velocities = np.asarray(self.velocities, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape != self.velocities.shape:
            raise InvalidStateError(
                f"positions {self.positions.shape} and velocities "
                f"{self.velocities.shape} must be matching (N, d) arrays")
        if self.positions.shape[0] < 1:
            raise InvalidStateError("ensemble needs at least one particle")
        if self.time < 0:
            raise InvalidStateError(f"time must be >= 0, got {self.time}")

    @property
    def n(self):
        return self.positions.shape[0]

    @property
    def d(self):
        return self.positions.shape[1]

    def is_finite(self):
        return bool(np.isfinite(self.positions).all() and np.isfinite(self.velocities).all())

    def permuted(self, perm):
        return PhaseEnsemble(self.positions[perm], self.velocities[perm], self.time)

    def subset(self, n):
        return PhaseEnsemble(self.positions[:n].copy(), self.velocities[:n].copy(), self.time)


@dataclass
class Trajectory:
    """Snapshots on a uniform grid, stored as ``(S, N, d)`` arrays."""

    params: Params
    dt: float
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k):
        return PhaseEnsemble(self.positions[k], self.velocities[k], float(self.times[k]))

    @property
    def snapshots(self):
        return [self[k] for k in range(len(self))]

    @property
    def final(self):
        return self[-1]


def weighted_velocities(velocities, delta):
    """v phi_2^delta(v), row-wise."""
    return velocities * velocity_cutoff(velocities, delta)[:, None]


def mean_field_terms(targets, src_x, src_v, xi, want_force=True, want_align=True):
    """Normalized interaction force and local alignment at ``targets``.

    Both are empirical averages over the source ensemble; the alignment keeps
    the source at the target's own location, the force term from it is zero
    because grad W_eps vanishes at the origin.
    """
    n_src = src_x.shape[0]
    force, num, den = pair_sums(
        targets, src_x,
        weighted_velocities(src_v, xi.delta) if want_align else None,
        xi.eps, xi.delta, want_force=want_force, want_align=want_align)
    force /= n_src
    align = (num / n_src) / (den / n_src + xi.nu)[:, None]
    return force, align


def _check_index(i, n):
    if not 0 <= i < n:
        raise IndexError(f"particle index {i} out of range for N={n}")


def alignment_field(ens, xi):
    """u_xi at every particle of ``ens``."""
    _, u = mean_field_terms(ens.positions, ens.positions, ens.velocities, xi, want_force=False)
    return u


def empirical_alignment(i, ens, xi):
    """Local alignment velocity u_xi(X^i); the sum runs over all j, self included."""
    _check_index(i, ens.n)
    _, u = mean_field_terms(ens.positions[i:i + 1], ens.positions, ens.velocities, xi,
                            want_force=False)
    return u[0]


def interaction_forces(ens, eps):
    """(1/N) sum_{j != i} grad W_eps(X^i - X^j) for every i."""
    f, _ = mean_field_terms(ens.positions, ens.positions, ens.velocities, Xi(eps, 1.0, 1.0),
                            want_align=False)
    return f


def interaction_force(i, ens, eps):
    _check_index(i, ens.n)
    f, _ = mean_field_terms(ens.positions[i:i + 1], ens.positions, ens.velocities,
                            Xi(eps, 1.0, 1.0), want_align=False)
    return f[0]


def velocity_drift(x, v, src_x, src_v, p):
    """-gamma v - beta (v - u) - lambda (x + F), with fields taken from the sources."""
    want_force = p.lam != 0.0
    want_align = p.beta != 0.0
    dv = -p.gamma * v
    if want_force or want_align:
        force, align = mean_field_terms(x, src_x, src_v, p.xi, want_force, want_align)
        if want_align:
            dv = dv - p.beta * (v - align)
        if want_force:
            dv = dv - p.lam * (x + force)
    return dv


def drift(ens, p):
    """Drift of the interacting system: ``(dX, dV)``, each ``(N, d)``."""
    if not ens.is_finite():
        raise InvalidStateError("ensemble contains non-finite entries")
    x, v = ens.positions, ens.velocities
    return v.copy(), velocity_drift(x, v, x, v, p)


def em_step(ens, p, dt, step_index, noise):
    """One explicit Euler-Maruyama step driven by ``noise`` at ``step_index``."""
    if not dt > 0:
        raise InvalidParameterError(f"dt must be > 0, got {dt!r}")
    dx, dv = drift(ens, p)
    x = ens.positions + dt * dx
    v = ens.velocities + dt * dv
    if p.sigma > 0:
        v = v + math.sqrt(2.0 * p.sigma) * noise.block(step_index, ens.n)
    return PhaseEnsemble(x, v, ens.time + dt)


def step_count(T, dt):
    if not (T > 0 and dt > 0):
        raise InvalidParameterError(f"T and dt must be > 0, got T={T!r}, dt={dt!r}")
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(T, 1.0):
        raise InvalidParameterError(f"dt={dt} does not divide T={T}")
    return n


def simulate(init, p, T, dt, noise, save_every=1):
    """Integrate from ``init`` to ``T``; snapshots every ``save_every`` steps.

    Raises BlowupError naming the first step that produced a non-finite state.
    """
    n_steps = step_count(T, dt)
    if save_every < 1 or n_steps % save_every:
        raise InvalidParameterError(f"save_every={save_every} must divide {n_steps} steps")
    n_saved = n_steps // save_every + 1
    xs = np.empty((n_saved,) + init.positions.shape)
    vs = np.empty_like(xs)
    times = np.empty(n_saved)
    ens = PhaseEnsemble(init.positions.copy(), init.velocities.copy(), init.time)
    xs[0], vs[0], times[0] = ens.positions, ens.velocities, ens.time
    for k in range(n_steps):
        with np.errstate(over="ignore", invalid="ignore"):
            ens = em_step(ens, p, dt, k, noise)
        ens.time = init.time + (k + 1) * dt
        if not ens.is_finite():
            raise BlowupError(k, f"non-finite state after step {k} (t={ens.time:.6g})")
        if (k + 1) % save_every == 0:
            s = (k + 1) // save_every
            xs[s], vs[s], times[s] = ens.positions, ens.velocities, ens.time
    return Trajectory(params=p, dt=dt, times=times, positions=xs, velocities=vs)
