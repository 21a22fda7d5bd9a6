"""The toy data model: one flip-noised feature plus d-1 Gaussian ones.

``y`` is uniform on {-1, +1}; ``x_1 = y`` with probability ``p`` and ``-y``
otherwise; ``x_2 .. x_d`` are i.i.d. ``N(lambda * y, sigma2)`` (``sigma2`` is a
variance). Labels are stored as {0, 1} in the returned :class:`Dataset`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import ConfigError
from .nn import make_rng


@dataclass
class ToySpec:
    n: int = 50_000
    d: int = 3
    p: float = 0.95
    lam: float = 0.0
    sigma2: float | None = None  # None -> d - 1
    seed: int = 0

    def __post_init__(self):
        if self.sigma2 is None:
            self.sigma2 = float(self.d - 1)
        if self.n < 1:
            raise ConfigError(f"n must be positive, got {self.n}")
        if self.d < 2:
            raise ConfigError(f"d must be >= 2, got {self.d}")
        if not 0.5 < self.p <= 1:
            raise ConfigError(f"p must be in (0.5, 1], got {self.p}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be non-negative, got {self.lam}")
        if not self.sigma2 > 0:
            raise ConfigError(f"sigma2 must be positive, got {self.sigma2}")


def case_one(n: int = 50_000, seed: int = 0) -> ToySpec:
    """Single informative feature (lambda = 0)."""
    return ToySpec(n=n, d=3, p=0.95, lam=0.0, seed=seed)


def case_two(n: int = 50_000, seed: int = 0) -> ToySpec:
    """Several informative features (lambda = 3)."""
    return ToySpec(n=n, d=3, p=0.95, lam=3.0, seed=seed)


def gen_toy(spec: ToySpec) -> Dataset:
    rng = make_rng(spec.seed)
    y = rng.choice(np.array([-1.0, 1.0]), size=spec.n)
    flip = rng.random(spec.n) >= spec.p
    X = np.empty((spec.n, spec.d))
    X[:, 0] = np.where(flip, -y, y)
    X[:, 1:] = spec.lam * y[:, None] + np.sqrt(spec.sigma2) * rng.standard_normal((spec.n, spec.d - 1))
    return Dataset(X, (y + 1.0) / 2.0, "classification", [f"x{i + 1}" for i in range(spec.d)])
