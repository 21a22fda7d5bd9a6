"""Mapping functions, feature contributions and their spread.

Every quantity is computed over a list of *realizations*: deterministic
models obtained by drawing posterior weight samples from a BayesNAM, or the
members of an ensemble. A single deterministic model repeated S times is a
valid (degenerate) realization list, which is why it always reports zero
spread.

Each realization is centered by its own training-set mean of ``f_i``, so
centered curves average to zero over the training data sample by sample.
Standard deviations use the population convention (divide by S).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .dataset import Dataset
from .errors import ConfigError, ShapeError
from .model import NamModel, members, nam_forward


def _mean_std(a: np.ndarray):
    """Mean and population std along axis 0, taken relative to the first row so
    identical rows give exactly their value and exactly zero spread."""
    dev = a - a[0]
    mean = a[0] + dev.mean(axis=0)
    return mean, np.sqrt(np.mean((a - mean) ** 2, axis=0))


def _sampled_model(model: NamModel, rng) -> NamModel:
    draws = [nn.bayes_sample(net, rng).params for net in model.terms]
    d = model.n_features
    det = model.mean_model()
    det.subnets, det.interaction_nets = draws[:d], draws[d:]
    return det


def realize(model_or_ensemble, n_samples: int, rng=None) -> list[NamModel]:
    """Deterministic realizations: ``n_samples`` posterior draws per Bayesian member,
    one per deterministic ensemble member, or ``n_samples`` copies of a lone
    deterministic model."""
    if n_samples < 1:
        raise ConfigError(f"n_samples must be >= 1, got {n_samples}")
    ms = members(model_or_ensemble)
    if len(ms) == 1 and not ms[0].bayesian:
        return [ms[0]] * n_samples
    out = []
    for m in ms:
        if m.bayesian:
            if rng is None:
                raise ConfigError("an rng is required to sample a Bayesian model")
            out += [_sampled_model(m, rng) for _ in range(n_samples)]
        else:
            out.append(m)
    return out


@dataclass
class Centers:
    """Per-realization training means: ``values[s, t]`` for term ``t``."""

    realizations: list[NamModel]
    values: np.ndarray
    term_names: list[str]


def _term_outputs(model: NamModel, X: np.ndarray) -> np.ndarray:
    _, parts, _ = nam_forward(model, X, "eval")
    return parts


def train_means(model_or_ensemble, train_set: Dataset, n_samples: int = 1, rng=None) -> Centers:
    if train_set.n == 0:
        raise ConfigError("empty training set")
    reals = realize(model_or_ensemble, n_samples, rng)
    values = np.stack([_mean_std(_term_outputs(r, train_set.X))[0] for r in reals])
    return Centers(reals, values, reals[0].term_names)


@dataclass
class MappingGrid:
    feature: int
    x: np.ndarray  # (G,)
    samples: np.ndarray  # (S, G), centered
    mean: np.ndarray
    std: np.ndarray

    @property
    def lo(self) -> np.ndarray:
        return self.mean - 2.0 * self.std

    @property
    def hi(self) -> np.ndarray:
        return self.mean + 2.0 * self.std

    @property
    def mean_range(self) -> float:
        return float(np.ptp(self.mean))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "mean", "lo", "hi"] + [f"sample_{s}" for s in range(self.samples.shape[0])])
            for g in range(self.x.size):
                row = [self.x[g], self.mean[g], self.lo[g], self.hi[g], *self.samples[:, g]]
                w.writerow([repr(float(v)) for v in row])


def mapping_grid(
    model_or_ensemble,
    feature: int,
    lo: float,
    hi: float,
    n_points: int = 101,
    n_samples: int = 1,
    rng=None,
    centers: Centers | None = None,
) -> MappingGrid:
    """Centered ``f_feature`` on ``n_points`` evenly spaced values in ``[lo, hi]``.

    With ``centers`` the realizations behind them are reused (``n_samples``
    and ``rng`` are then ignored); without, rows are left uncentered.
    """
    ms = members(model_or_ensemble)
    d = ms[0].n_features
    if not 0 <= feature < d:
        raise ConfigError(f"feature {feature} out of range for d={d}")
    if not lo < hi or n_points < 2:
        raise ConfigError(f"need lo < hi and n_points >= 2, got [{lo}, {hi}] x {n_points}")
    reals = centers.realizations if centers is not None else realize(model_or_ensemble, n_samples, rng)
    x = np.linspace(lo, hi, n_points)
    rows = np.stack([nn.mlp_forward(r.subnets[feature], x[:, None])[0][:, 0] for r in reals])
    if centers is not None:
        rows = rows - centers.values[:, feature][:, None]
    return MappingGrid(feature, x, rows, *_mean_std(rows))


def feature_contribution(model_or_ensemble, x, centers: Centers, n_samples: int = 1, rng=None):
    """Per-term ``(mean, std)`` of ``f_t(x) - center_t`` across realizations.

    Returned as a dict keyed by term name; interaction terms appear as extra keys.
    ``n_samples``/``rng`` are unused because the realizations come from ``centers``.
    """
    x = np.asarray(x, dtype=np.float64)
    d = centers.realizations[0].n_features
    if x.shape != (d,):
        raise ShapeError(f"expected a {d}-vector, got shape {x.shape}")
    contrib = np.stack([_term_outputs(r, x[None, :])[0] for r in centers.realizations]) - centers.values
    mean, std = _mean_std(contrib)
    return {name: (float(m), float(s)) for name, m, s in zip(centers.term_names, mean, std)}


def inconsistency_score(samples) -> float:
    """Mean over grid points of the across-row (population) standard deviation."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise ConfigError(f"need an S x G matrix with S >= 2, got shape {samples.shape}")
    return float(_mean_std(samples)[1].mean())


@dataclass
class ExplanationReport:
    feature_names: list[str]
    grids: list[MappingGrid]
    centers: Centers
    inconsistency: list[float]
    point: list[float] | None = None
    contributions: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format_version": "1",
            "feature_names": self.feature_names,
            "term_names": self.centers.term_names,
            "n_realizations": len(self.centers.realizations),
            "centers": self.centers.values.tolist(),
            "inconsistency": dict(zip(self.feature_names, self.inconsistency)),
            "mean_range": {n: g.mean_range for n, g in zip(self.feature_names, self.grids)},
            "point": self.point,
            "contributions": {k: {"mean": m, "std": s} for k, (m, s) in self.contributions.items()},
        }

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, grid in zip(self.feature_names, self.grids):
            grid.to_csv(out / f"grid_{name}.csv")
        (out / "report.json").write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def explain(
    model_or_ensemble,
    train_set: Dataset,
    n_samples: int = 30,
    rng=None,
    point=None,
    n_points: int = 101,
) -> ExplanationReport:
    """Full report; grids span each feature's training range."""
    centers = train_means(model_or_ensemble, train_set, n_samples, rng)
    grids = []
    for i in range(train_set.d):
        lo, hi = float(train_set.X[:, i].min()), float(train_set.X[:, i].max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        grids.append(mapping_grid(model_or_ensemble, i, lo, hi, n_points, centers=centers))
    if len(centers.realizations) >= 2:
        scores = [inconsistency_score(g.samples) for g in grids]
    else:
        scores = [0.0] * len(grids)
    report = ExplanationReport(list(train_set.feature_names), grids, centers, scores)
    if point is not None:
        report.point = [float(v) for v in point]
        report.contributions = feature_contribution(model_or_ensemble, np.asarray(point, float), centers)
    return report
