"""Seed-keyed Brownian increments, replayable per (particle, step)."""
import numpy as np

from .exceptions import InvalidParameterError


class NoisePlan:
    """Deterministic Brownian increments indexed by particle and step.

    Step ``k`` owns an independent Philox stream keyed by ``(seed, k)``;
    particle ``i`` reads row ``i`` of that stream. Rows are drawn in order, so
    the increment of particle ``i`` does not depend on how many particles are
    requested. Two systems sharing a plan therefore see identical noise on
    their common particle labels.
    """

    def __init__(self, seed, d, dt):
        if dt <= 0:
            raise InvalidParameterError(f"dt must be > 0, got {dt!r}")
        self.seed = int(seed)
        self.d = int(d)
        self.dt = float(dt)
        self._sqrt_dt = np.sqrt(self.dt)

    def __repr__(self):
        return f"NoisePlan(seed={self.seed}, d={self.d}, dt={self.dt})"

    def _generator(self, step):
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(int(step),))
        return np.random.Generator(np.random.Philox(ss))

    def standard_normals(self, step, n):
        if step < 0 or n < 0:
            raise InvalidParameterError("step and n must be nonnegative")
        return self._generator(step).standard_normal((n, self.d))

    def block(self, step, n):
        """Increments for particles ``0..n-1`` at ``step``, shape ``(n, d)``."""
        return self._sqrt_dt * self.standard_normals(step, n)

    def increment(self, particle, step):
        return self.block(step, particle + 1)[particle]
