"""CSV ingestion, normalization, splitting, and model persistence.

Models are stored as JSON. Floats go through ``repr`` (shortest round-trip
form), so a save/load cycle reproduces every parameter bit for bit. See
``docs/model_format.md`` for the schema.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .dataset import TASKS, Dataset
from .errors import ConfigError, FormatError
from .model import NamConfig, NamModel

FORMAT_VERSION = "1"


@dataclass
class CsvSchema:
    target_column: str
    feature_columns: list[str] | None = None  # None: every other column
    task: str = "classification"
    delimiter: str = ","

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.feature_columns is not None and self.target_column in self.feature_columns:
            raise ConfigError(f"target {self.target_column!r} listed among features")


def load_csv(path, schema: CsvSchema) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        header = next(reader, None)
        if not header:
            raise FormatError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if schema.target_column not in header:
            raise FormatError(f"{path}: missing column {schema.target_column!r}")
        features = schema.feature_columns or [h for h in header if h != schema.target_column]
        for name in features:
            if name not in header:
                raise FormatError(f"{path}: missing column {name!r}")
        cols = [header.index(n) for n in features]
        tcol = header.index(schema.target_column)
        X, y = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                X.append([float(row[c]) for c in cols])
                y.append(float(row[tcol]))
            except (ValueError, IndexError):
                bad = next(
                    (header[c] for c in cols + [tcol] if c >= len(row) or not _is_float(row[c])),
                    "?",
                )
                raise FormatError(f"{path}: row {lineno}, column {bad!r}: cannot parse a number") from None
    if not X:
        raise FormatError(f"{path}: no data rows")
    return Dataset(np.array(X), np.array(y), schema.task, list(features))


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def dump_csv(data: Dataset, path, target_column: str = "y") -> None:
    """Header plus one row per example, values at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(data.feature_names) + [target_column])
        for xi, yi in zip(data.X, data.y):
            w.writerow([format(v, ".17g") for v in xi] + [format(yi, ".17g")])


@dataclass
class NormStats:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, data: Dataset) -> Dataset:
        return Dataset((data.X - self.mean) / self.std, data.y.copy(), data.task, list(data.feature_names))

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(np.array(d["mean"], dtype=float), np.array(d["std"], dtype=float))


def fit_norm(train: Dataset, floor: float = 1e-12) -> NormStats:
    return NormStats(train.X.mean(axis=0), np.maximum(train.X.std(axis=0), floor))


def normalize_fit_apply(train: Dataset, test: Dataset):
    """Z-score both splits with statistics from ``train`` only.

    Not idempotent: applying the returned stats to already-normalized data
    shifts and rescales it again.
    """
    if train.d != test.d:
        raise ConfigError(f"train has {train.d} features, test has {test.d}")
    stats = fit_norm(train)
    return stats.apply(train), stats.apply(test), stats


def split(data: Dataset, mode: str = "holdout", *, ratio: float = 0.8, k: int = 5, seed: int = 0):
    """Shuffled split.

    ``holdout`` returns ``(train, test)`` with ``round(ratio * n)`` training
    rows. ``kfold`` returns a list of ``k`` ``(train, test)`` pairs whose test
    folds are disjoint, cover every row, and differ in size by at most one.
    """
    perm = nn.make_rng(seed).permutation(data.n)
    if mode == "holdout":
        if not 0 < ratio < 1:
            raise ConfigError(f"holdout ratio must be in (0, 1), got {ratio}")
        n_train = int(round(ratio * data.n))
        return data.subset(np.sort(perm[:n_train])), data.subset(np.sort(perm[n_train:]))
    if mode == "kfold":
        if k < 2:
            raise ConfigError(f"k must be >= 2, got {k}")
        if k > data.n:
            raise ConfigError(f"k={k} folds exceed n={data.n} rows")
        folds = np.array_split(perm, k)
        out = []
        for i, test_idx in enumerate(folds):
            train_idx = np.concatenate([f for j, f in enumerate(folds) if j != i])
            out.append((data.subset(np.sort(train_idx)), data.subset(np.sort(test_idx))))
        return out
    raise ConfigError(f"unknown split mode {mode!r}")


# ---------------------------------------------------------------------------
# Model persistence
# ---------------------------------------------------------------------------


def _arr(a: np.ndarray):
    return {"shape": list(a.shape), "data": [float(v) for v in a.ravel()]}


def _unarr(d) -> np.ndarray:
    return np.array(d["data"], dtype=np.float64).reshape(d["shape"])


def _net_to_dict(net) -> dict:
    if isinstance(net, nn.BayesMlpParams):
        return {
            "kind": "bayes",
            "layers": [
                {"w_mu": _arr(l.w_mu), "w_rho": _arr(l.w_rho), "b_mu": _arr(l.b_mu), "b_rho": _arr(l.b_rho), "s0": l.s0}
                for l in net.layers
            ],
        }
    return {"kind": "mlp", "layers": [{"w": _arr(w), "b": _arr(b)} for w, b in net.layers]}


def _net_from_dict(d: dict):
    if d["kind"] == "bayes":
        return nn.BayesMlpParams(
            [
                nn.BayesLinearParams(_unarr(l["w_mu"]), _unarr(l["w_rho"]), _unarr(l["b_mu"]), _unarr(l["b_rho"]), float(l["s0"]))
                for l in d["layers"]
            ]
        )
    if d["kind"] == "mlp":
        return nn.MlpParams([(_unarr(l["w"]), _unarr(l["b"])) for l in d["layers"]])
    raise FormatError(f"unknown subnet kind {d['kind']!r}")


def model_to_dict(model: NamModel) -> dict:
    cfg = asdict(model.config)
    cfg["interactions"] = [list(p) for p in model.config.interactions]
    return {
        "config": cfg,
        "n_features": model.n_features,
        "beta": float(model.beta[0]),
        "subnets": [_net_to_dict(n) for n in model.subnets],
        "interaction_nets": [_net_to_dict(n) for n in model.interaction_nets],
    }


def model_from_dict(d: dict) -> NamModel:
    try:
        cfg = NamConfig(**d["config"])
        return NamModel(
            cfg,
            int(d["n_features"]),
            [_net_from_dict(n) for n in d["subnets"]],
            [_net_from_dict(n) for n in d["interaction_nets"]],
            np.array([float(d["beta"])]),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed model record: {exc}") from exc


@dataclass
class ModelFile:
    """Everything a model file holds besides the parameters themselves."""

    models: list[NamModel]
    ensemble: bool = False
    meta: dict = field(default_factory=dict)


def save_model(model_or_ensemble, path, meta: dict | None = None) -> None:
    ensemble = not isinstance(model_or_ensemble, NamModel)
    models = list(model_or_ensemble) if ensemble else [model_or_ensemble]
    doc = {
        "format_version": FORMAT_VERSION,
        "ensemble": ensemble,
        "members": [model_to_dict(m) for m in models],
        "meta": meta or {},
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def read_model_file(path) -> ModelFile:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: expected a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format_version {version!r}, expected {FORMAT_VERSION!r}")
    if "members" not in doc or not doc["members"]:
        raise FormatError(f"{path}: no model members")
    models = [model_from_dict(m) for m in doc["members"]]
    return ModelFile(models, bool(doc.get("ensemble", False)), doc.get("meta", {}))


def load_model(path):
    """A :class:`NamModel`, or a list of them if an ensemble was saved."""
    mf = read_model_file(path)
    return mf.models if mf.ensemble else mf.models[0]
