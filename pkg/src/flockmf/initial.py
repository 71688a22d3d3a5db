"""Initial-law samplers.

Every sampler draws one row of standard normals per particle and transforms
it, so the first ``n`` particles of an ``m``-particle draw coincide with an
``n``-particle draw under the same seed.
"""
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import ndtr

from .exceptions import InvalidParameterError
from .particles import PhaseEnsemble

KINDS = ("gaussian", "uniform-ball", "two-cluster")


@dataclass(frozen=True)
class InitialLaw:
    """Descriptor of the common initial distribution f_0.

    ``gaussian`` uses ``mean``/``scale`` for positions; ``uniform-ball`` fills
    the ball of ``radius``; ``two-cluster`` puts unit Gaussians at
    ``+-sep/2`` along the first axis. Velocities are Gaussian with
    ``velocity_mean`` (along the first axis) and ``velocity_scale`` for every kind.
    """

    kind: str = "gaussian"
    mean: float = 0.0
    scale: float = 1.0
    radius: float = 1.0
    sep: float = 4.0
    velocity_mean: float = 0.0
    velocity_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown initial law {self.kind!r}; expected one of {KINDS}")
        for name in ("scale", "radius", "velocity_scale"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be > 0")
        if self.sep < 0:
            raise InvalidParameterError("sep must be >= 0")

    def as_dict(self):
        return asdict(self)


def sample_initial(law, n, d, seed):
    """Draw ``n`` i.i.d. phase-space points from ``law``."""
    if isinstance(law, str):
        law = InitialLaw(kind=law)
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, 2 * d + 1))
    zx, zaux, zv = z[:, :d], z[:, d], z[:, d + 1:]
    if law.kind == "gaussian":
        x = law.mean + law.scale * zx
    elif law.kind == "uniform-ball":
        direction = zx / np.linalg.norm(zx, axis=1, keepdims=True)
        radius = law.radius * ndtr(zaux) ** (1.0 / d)
        x = direction * radius[:, None]
    else:
        x = zx.copy()
        x[:, 0] += np.where(zaux < 0, -0.5, 0.5) * law.sep
    v = law.velocity_scale * zv
    v[:, 0] += law.velocity_mean
    return PhaseEnsemble(x, v, 0.0)
