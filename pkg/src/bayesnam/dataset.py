from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

TASKS = ("classification", "regression")


@dataclass
class Dataset:
    """Feature matrix plus targets.

    Classification targets are stored as {0, 1}; :attr:`signs` gives the
    {-1, +1} view used by the toy model.
    """

    X: np.ndarray
    y: np.ndarray
    task: str = "classification"
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.X.ndim != 2:
            raise ConfigError(f"X must be 2-D, got shape {self.X.shape}")
        n, d = self.X.shape
        if n < 1:
            raise ConfigError("dataset is empty")
        if self.y.shape != (n,):
            raise ConfigError(f"y must have shape ({n},), got {self.y.shape}")
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if not (np.isfinite(self.X).all() and np.isfinite(self.y).all()):
            raise ConfigError("dataset contains NaN or Inf")
        if self.task == "classification" and not np.isin(self.y, (0.0, 1.0)).all():
            raise ConfigError("classification targets must be 0 or 1")
        if not self.feature_names:
            self.feature_names = [f"x{i + 1}" for i in range(d)]
        if len(self.feature_names) != d:
            raise ConfigError(f"{len(self.feature_names)} feature names for {d} columns")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def signs(self) -> np.ndarray:
        return 2.0 * self.y - 1.0

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.task, list(self.feature_names))
