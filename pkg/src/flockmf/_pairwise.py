"""Direct-summation pair kernels shared by the particle system and the field evaluators.

Sources are put in a canonical (lexicographic) order before summation and
every target accumulates sequentially over them, so results depend neither
on particle labels nor on the number of threads.
"""
import math

import numba
import numpy as np

from .kernels import mollifier_normalization, newton_constant

# TBB on this platform is often too old and numba warns on every import.
numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]


@numba.njit(parallel=True, cache=True)
def _pair_sums(tx, sx, w, eps, force_coef, mol_scale, want_force, want_align):
    nt, d = tx.shape
    ns = sx.shape[0]
    half = d // 2
    odd = d % 2 == 1
    eps2 = eps * eps
    force = np.zeros((nt, d))
    num = np.zeros((nt, d))
    den = np.zeros(nt)
    for i in numba.prange(nt):
        diff = np.empty(d)
        for j in range(ns):
            r2 = 0.0
            for k in range(d):
                diff[k] = tx[i, k] - sx[j, k]
                r2 += diff[k] * diff[k]
            if want_force:
                inv = 1.0 / (eps + r2)
                p = 1.0
                for _ in range(half):
                    p *= inv
                if odd:
                    p *= math.sqrt(inv)
                c = force_coef * p
                for k in range(d):
                    force[i, k] += c * diff[k]
            if want_align and r2 < eps2:
                phi = mol_scale * math.exp(-1.0 / (1.0 - r2 / eps2))
                den[i] += phi
                for k in range(d):
                    num[i, k] += phi * w[j, k]
    return force, num, den


def pair_sums(targets, sources, weighted_velocities, eps, delta=None,
              want_force=True, want_align=True):
    """Unnormalized sums over sources for every target.

    Returns ``(force, numerator, density)`` where
    ``force[i] = sum_j grad W_eps(t_i - s_j)``,
    ``numerator[i] = sum_j w_j phi_1^eps(t_i - s_j)`` and
    ``density[i] = sum_j phi_1^eps(t_i - s_j)``.
    Disabled parts come back as zeros.
    """
    targets = np.ascontiguousarray(targets, dtype=float)
    sources = np.asarray(sources, dtype=float)
    d = targets.shape[1]
    keys = sources if not want_align else np.hstack([sources, weighted_velocities])
    order = np.lexsort(keys.T[::-1])
    sources = np.ascontiguousarray(sources[order])
    if want_align:
        w = np.ascontiguousarray(np.asarray(weighted_velocities, dtype=float)[order])
        mol_scale = 1.0 / (mollifier_normalization(d) * eps ** d)
    else:
        w = np.zeros((1, d))
        mol_scale = 0.0
    force_coef = -(d - 2) * newton_constant(d) if want_force else 0.0
    return _pair_sums(targets, sources, w, float(eps), force_coef, mol_scale,
                      bool(want_force), bool(want_align))
