import math

import numpy as np
import pytest

from flockmf.diagnostics import (entropy_estimate, entropy_functional, flocking_order,
                                 interaction_energy, log_density_knn, moments,
                                 ou_oracle_check, ou_second_moment, record)
from flockmf.exceptions import DegenerateSampleError, InvalidParameterError
from flockmf.kernels import newtonian_reg_potential
from flockmf.particles import Params, PhaseEnsemble, Xi

# entropy of the standard Gaussian in 6 dimensions, 3 (1 + log 2 pi)
GAUSS6_ENTROPY = 8.51363119922803645


def gaussian(seed, n, scale=1.0):
    rng = np.random.default_rng(seed)
    return PhaseEnsemble(scale * rng.standard_normal((n, 3)), scale * rng.standard_normal((n, 3)))


def test_moments_small_example():
    ens = PhaseEnsemble(np.array([[1.0, 0, 0], [0, 2.0, 0]]), np.array([[0, 0, 3.0], [1.0, 0, 0]]))
    x2, v2, vbar = moments(ens)
    assert x2 == 2.5 and v2 == 5.0
    np.testing.assert_array_equal(vbar, [0.5, 0, 1.5])


def test_interaction_energy_pair_and_single():
    a = np.array([0.3, 0.4, 0.0])
    ens = PhaseEnsemble(np.stack([a, -a]), np.zeros((2, 3)))
    w = newtonian_reg_potential(2 * a, 0.5)
    assert interaction_energy(ens, 0.5) == pytest.approx(w / 4, rel=1e-15)
    assert interaction_energy(gaussian(0, 1), 0.5) == 0.0


def test_interaction_energy_blocked_matches_dense():
    ens = gaussian(1, 300)
    x = ens.positions
    w = newtonian_reg_potential(x[:, None] - x[None], 0.4)
    np.fill_diagonal(w, 0.0)
    assert interaction_energy(ens, 0.4) == pytest.approx(w.sum() / (2 * 300 ** 2), rel=1e-12)


def test_entropy_of_gaussian():
    est = entropy_estimate(gaussian(2, 10 ** 4), k=4)
    assert abs(est - GAUSS6_ENTROPY) <= 0.1 * GAUSS6_ENTROPY


def test_log_density_scaling_and_translation():
    ens = gaussian(3, 2000)
    base = log_density_knn(ens)
    c = 2.5
    scaled = PhaseEnsemble(c * ens.positions, c * ens.velocities)
    np.testing.assert_allclose(log_density_knn(scaled), base - 6 * math.log(c), rtol=1e-12)
    shifted = PhaseEnsemble(ens.positions + 7.0, ens.velocities - 3.0)
    np.testing.assert_allclose(log_density_knn(shifted), base, rtol=1e-9)


def test_log_density_preconditions():
    ens = gaussian(4, 5)
    with pytest.raises(InvalidParameterError):
        log_density_knn(ens, k=5)
    dup = PhaseEnsemble(np.zeros((6, 3)), np.zeros((6, 3)))
    with pytest.raises(DegenerateSampleError):
        log_density_knn(dup, k=2)


def test_functional_linear_in_sigma():
    ens = gaussian(5, 500)
    xi = Xi(0.5, 0.5, 1.0)
    f = [entropy_functional(ens, Params(sigma=s, xi=xi)) for s in (0.0, 1.0, 2.0)]
    assert f[2] - f[1] == pytest.approx(f[1] - f[0], rel=1e-12)
    assert f[1] - f[0] == pytest.approx(entropy_estimate(ens), rel=1e-12)


def test_record_functional_matches():
    ens = gaussian(6, 400)
    p = Params(sigma=0.7, xi=Xi(0.5, 0.5, 1.0))
    assert record(ens, p).functional == pytest.approx(entropy_functional(ens, p), rel=1e-12)


def test_flocking_order_extremes():
    n = 50
    aligned = PhaseEnsemble(np.zeros((n, 3)) + np.arange(n)[:, None], np.tile([1.0, 2.0, -1.0], (n, 1)))
    assert flocking_order(aligned) == pytest.approx(1.0, abs=1e-12)
    v = np.random.default_rng(0).standard_normal((n // 2, 3))
    opposed = PhaseEnsemble(np.zeros((n, 3)), np.vstack([v, -v]))
    assert flocking_order(opposed) == pytest.approx(0.0, abs=1e-12)
    still = PhaseEnsemble(np.zeros((n, 3)), np.zeros((n, 3)))
    assert 0.0 <= flocking_order(still) <= 1.0
    with pytest.raises(InvalidParameterError):
        flocking_order(gaussian(0, 1))


def test_ou_second_moment_limits():
    assert ou_second_moment(1.0, 1.0, 3, 0.0, 5.0) == 5.0
    assert ou_second_moment(2.0, 0.5, 3, 50.0, 5.0) == pytest.approx(0.75)
    assert ou_second_moment(1.0, 1.0, 3, 1.0, 0.0) == pytest.approx(3 * (1 - math.exp(-2)))


def test_ou_oracle_small():
    rep = ou_oracle_check(Params(lam=0.0, beta=0.0), 0.5, 1e-3, 2000, seed=0)
    assert rep.passed and rep.standard_error > 0


def test_ou_oracle_requires_free_system():
    with pytest.raises(InvalidParameterError):
        ou_oracle_check(Params(), 0.5, 1e-2, 100, 0)
