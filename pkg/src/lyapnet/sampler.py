"""Sampling states from the ball ``{x : r_in <= |x| <= r}``.

All randomness in the package comes from numpy's PCG64 generator. A run's
root seed is expanded with :class:`numpy.random.SeedSequence`; each consumer
gets its own child stream (see :func:`rng_streams`), so changing e.g. the
evaluation-set size never perturbs the training batches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SCHEMES = ("uniform", "center_concentrated")
MAX_BUDGET = 2 ** 48

# child stream index per consumer; order is part of the reproducibility contract
STREAMS = ("init", "train", "eval", "verify")


def rng_streams(root_seed: int) -> dict[str, np.random.Generator]:
    """Independent PCG64 generators for each consumer, derived from one seed."""
    children = np.random.SeedSequence(int(root_seed)).spawn(len(STREAMS))
    return {name: np.random.Generator(np.random.PCG64(ss)) for name, ss in zip(STREAMS, children)}


@dataclass(frozen=True)
class SamplingDomain:
    dim: int
    radius: float = 1.0
    delta: float = 0.02
    scheme: str = "uniform"
    inner_radius: float = 0.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.delta > 2 * self.radius:
            raise ValueError(f"delta={self.delta} exceeds the ball diameter {2 * self.radius}")
        if not 0 <= self.inner_radius < self.radius:
            raise ValueError(f"inner_radius must lie in [0, radius), got {self.inner_radius}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if self.scheme == "uniform":
            return sample_uniform(self, count, rng)
        return sample_polar(self, count, rng)


def sample_budget(domain: SamplingDomain) -> int:
    """Number of samples ``ceil((2r/delta)^d)`` needed for resolution delta."""
    log_n = domain.dim * math.log2(2 * domain.radius / domain.delta)
    if log_n > 48:
        raise OverflowError(
            f"sample budget (2r/delta)^d = 2^{log_n:.1f} exceeds 2^48; increase delta"
        )
    n = (2 * domain.radius / domain.delta) ** domain.dim
    # guard against 16.000000000000004 -> 17
    rounded = round(n)
    if abs(n - rounded) <= 1e-9 * max(1.0, n):
        return max(1, int(rounded))
    return max(1, math.ceil(n))


def sample_uniform(domain: SamplingDomain, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` points i.i.d. uniform on the shell ``r_in <= |x| <= r``."""
    d, r = domain.dim, domain.radius
    directions = rng.standard_normal((count, d))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    directions = directions / norms
    q = (domain.inner_radius / r) ** d
    u = rng.random(count)
    radii = r * (u * (1.0 - q) + q) ** (1.0 / d)
    return directions * radii[:, None]


def polar_to_cartesian(radius, angles) -> np.ndarray:
    """Hyperspherical to Euclidean coordinates.

    ``angles`` has shape ``(..., d-1)``; the first ``d-2`` angles are polar
    (in ``[0, pi]``) and the last one azimuthal (in ``[0, 2 pi)``)::

        x1 = r cos(p1)
        x2 = r sin(p1) cos(p2)
        ...
        xd = r sin(p1) ... sin(p_{d-1})
    """
    radius = np.asarray(radius, dtype=float)
    angles = np.asarray(angles, dtype=float)
    k = angles.shape[-1]
    out = np.empty(angles.shape[:-1] + (k + 1,))
    sin_prod = np.ones(angles.shape[:-1])
    for i in range(k):
        out[..., i] = radius * sin_prod * np.cos(angles[..., i])
        sin_prod = sin_prod * np.sin(angles[..., i])
    out[..., k] = radius * sin_prod
    return out


def sample_polar(domain: SamplingDomain, count: int, rng: np.random.Generator) -> np.ndarray:
    """Center-concentrated samples: radius and every angle drawn uniformly."""
    d = domain.dim
    radii = rng.uniform(domain.inner_radius, domain.radius, count)
    if d == 1:
        signs = np.where(rng.random(count) < 0.5, -1.0, 1.0)
        return (signs * radii)[:, None]
    angles = np.empty((count, d - 1))
    if d > 2:
        angles[:, : d - 2] = rng.uniform(0.0, np.pi, (count, d - 2))
    angles[:, d - 2] = rng.uniform(0.0, 2 * np.pi, count)
    return polar_to_cartesian(radii, angles)
