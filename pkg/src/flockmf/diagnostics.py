"""Observers of ensemble state: moments, energies, entropy, alignment order, OU check.

Nothing here feeds back into the dynamics.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from .exceptions import DegenerateSampleError, InvalidParameterError
from .kernels import newtonian_reg_potential, unit_ball_volume
from .noise import NoisePlan
from .particles import PhaseEnsemble, simulate, step_count


def moments(ens):
    """(mean |X|^2, mean |V|^2, mean V)."""
    x2 = float(np.mean(np.sum(ens.positions ** 2, axis=1)))
    v2 = float(np.mean(np.sum(ens.velocities ** 2, axis=1)))
    return x2, v2, ens.velocities.mean(axis=0)


def interaction_energy(ens, eps):
    """(1 / (2 N^2)) sum_i sum_{j != i} W_eps(X^i - X^j)."""
    x = ens.positions
    n = ens.n
    block = max(1, 2 ** 21 // n)
    total = 0.0
    for start in range(0, n, block):
        xb = x[start:start + block]
        w = newtonian_reg_potential(xb[:, None, :] - x[None, :, :], eps)
        rows = np.arange(xb.shape[0])
        w[rows, start + rows] = 0.0
        total += w.sum()
    return total / (2.0 * n * n)


def log_density_knn(ens, k=4):
    """Kozachenko-Leonenko log-density estimate at each sample in phase space (dim 2d)."""
    n = ens.n
    if not 1 <= k < n:
        raise InvalidParameterError(f"need 1 <= k < N, got k={k}, N={n}")
    z = np.hstack([ens.positions, ens.velocities])
    dim = z.shape[1]
    dist, _ = cKDTree(z).query(z, k=k + 1)
    rho = dist[:, k]
    if np.any(rho <= 0):
        raise DegenerateSampleError(
            f"{int(np.sum(rho <= 0))} samples have a zero {k}-NN distance (duplicate points)")
    return digamma(k) - digamma(n) - math.log(unit_ball_volume(dim)) - dim * np.log(rho)


def entropy_estimate(ens, k=4):
    """Sample mean of |log f| with f estimated by k-nearest neighbours."""
    return float(np.mean(np.abs(log_density_knn(ens, k))))


def entropy_functional(ens, p, k=4):
    """Kinetic + |x|^2/2 + confinement + sigma E|log f| + interaction energy.

    The confinement potential is |x|^2/2 itself, so that average enters twice.
    """
    x2, v2, _ = moments(ens)
    value = v2 / 2 + x2 / 2 + x2 / 2 + interaction_energy(ens, p.xi.eps)
    if p.sigma:
        value += p.sigma * entropy_estimate(ens, k)
    return value


def flocking_order(ens, floor=1e-12):
    """1 - (velocity variance about the mean) / (mean squared speed + floor), in [0, 1]."""
    if ens.n < 2:
        raise InvalidParameterError("flocking_order needs N >= 2")
    v = ens.velocities
    mean_sq = np.mean(np.sum(v * v, axis=1))
    var = np.mean(np.sum((v - v.mean(axis=0)) ** 2, axis=1))
    return float(np.clip(1.0 - var / (mean_sq + floor), 0.0, 1.0))


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    kinetic: float
    confinement: float
    interaction: float
    entropy: float
    order: float

    @property
    def functional(self):
        return self.kinetic + 2 * self.confinement + self.interaction + self.entropy


def record(ens, p, k=4):
    x2, v2, _ = moments(ens)
    ent = p.sigma * entropy_estimate(ens, k) if p.sigma else 0.0
    return DiagnosticsRecord(
        time=ens.time, kinetic=v2 / 2, confinement=x2 / 2,
        interaction=interaction_energy(ens, p.xi.eps), entropy=ent,
        order=flocking_order(ens) if ens.n >= 2 else 1.0)


def ou_second_moment(gamma, sigma, d, T, v0_sq):
    """E|V(T)|^2 for dV = -gamma V dt + sqrt(2 sigma) dB."""
    decay = math.exp(-2.0 * gamma * T)
    return decay * v0_sq + (d * sigma / gamma) * (1.0 - decay)


@dataclass(frozen=True)
class OUReport:
    target: float
    sample_mean: float
    standard_error: float
    z: float

    @property
    def passed(self):
        return abs(self.z) <= 3.0


def ou_oracle_check(p, T, dt, n, seed, v0_scale=0.0):
    """Compare the sampled E|V(T)|^2 against the Ornstein-Uhlenbeck value.

    Positions start standard normal; velocities ``v0_scale`` times standard
    normal (zero by default).
    """
    if p.lam != 0 or p.beta != 0:
        raise InvalidParameterError("OU check requires lambda = beta = 0")
    if not (p.gamma > 0 and p.sigma > 0):
        raise InvalidParameterError("OU check requires gamma > 0 and sigma > 0")
    n_steps = step_count(T, dt)
    rng = np.random.default_rng(seed)
    init = PhaseEnsemble(rng.standard_normal((n, p.d)),
                         v0_scale * rng.standard_normal((n, p.d)))
    traj = simulate(init, p, T, dt, NoisePlan(seed, p.d, dt), save_every=n_steps)
    v2 = np.sum(traj.velocities[-1] ** 2, axis=1)
    target = ou_second_moment(p.gamma, p.sigma, p.d, T, p.d * v0_scale ** 2)
    se = float(v2.std(ddof=1) / math.sqrt(n))
    mean = float(v2.mean())
    return OUReport(target=target, sample_mean=mean, standard_error=se, z=(mean - target) / se)
