"""Neural additive models, optionally Bayesian, with feature dropout.

A model is ``out = sum_i f_i(x_i) + sum_(i,j) f_ij(x_i, x_j) + beta``. Each
``f`` is a small ReLU MLP (or its mean-field Gaussian counterpart). During
training every additive term is kept with probability ``1 - tau`` per
example and rescaled by ``1 / (1 - tau)``; the bias is never dropped.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .dataset import TASKS, Dataset
from .errors import ConfigError, ShapeError, TrainingError
from .metrics import accuracy, rmse

log = logging.getLogger(__name__)


@dataclass
class NamConfig:
    """Architecture and regularization of a (Bayes)NAM.

    ``s0`` is the initial posterior spread. ``prior_std`` is the prior
    standard deviation used by the KL term; ``None`` means "same as s0".
    """

    hidden_sizes: list[int] = field(default_factory=lambda: [10])
    bayesian: bool = False
    s0: float = 1e-4
    prior_std: float | None = 1.0
    tau: float = 0.0
    input_dropout: float = 0.0
    interactions: list[tuple[int, int]] = field(default_factory=list)
    kl_weight_mode: str = "per_batch"
    task: str = "classification"
    seed: int = 0

    def __post_init__(self):
        self.hidden_sizes = [int(h) for h in self.hidden_sizes]
        self.interactions = [tuple(int(i) for i in pair) for pair in self.interactions]
        if any(h <= 0 for h in self.hidden_sizes):
            raise ConfigError(f"hidden sizes must be positive, got {self.hidden_sizes}")
        if not 0 <= self.tau < 1:
            raise ConfigError(f"feature dropout tau must be in [0, 1), got {self.tau}")
        if not 0 <= self.input_dropout < 1:
            raise ConfigError(f"input dropout must be in [0, 1), got {self.input_dropout}")
        if not self.s0 > 0:
            raise ConfigError(f"s0 must be positive, got {self.s0}")
        if self.prior_std is not None and not self.prior_std > 0:
            raise ConfigError(f"prior_std must be positive, got {self.prior_std}")
        if self.kl_weight_mode != "per_batch":
            raise ConfigError(f"unsupported kl_weight_mode {self.kl_weight_mode!r}")
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        for pair in self.interactions:
            if len(pair) != 2 or pair[0] == pair[1] or min(pair) < 0:
                raise ConfigError(f"bad interaction pair {pair}")

    @property
    def effective_prior_std(self) -> float:
        return self.s0 if self.prior_std is None else self.prior_std


@dataclass
class NamModel:
    config: NamConfig
    n_features: int
    subnets: list  # MlpParams or BayesMlpParams, one per feature
    interaction_nets: list
    beta: np.ndarray  # shape (1,), kept as an array so SGD can update it in place

    @property
    def terms(self) -> list:
        return self.subnets + self.interaction_nets

    @property
    def term_inputs(self) -> list[tuple[int, ...]]:
        return [(i,) for i in range(self.n_features)] + list(self.config.interactions)

    @property
    def term_names(self) -> list[str]:
        return [f"f{i}" for i in range(self.n_features)] + [
            f"f{i}x{j}" for i, j in self.config.interactions
        ]

    @property
    def bayesian(self) -> bool:
        return self.config.bayesian

    def parameters(self) -> list[np.ndarray]:
        out = []
        for net in self.terms:
            out += net.arrays()
        return out + [self.beta]

    def decay_mask(self) -> list[bool]:
        """Weight decay applies to everything except the spread parameters."""
        mask = []
        for net in self.terms:
            if isinstance(net, nn.BayesMlpParams):
                mask += [True, True, False, False] * len(net.layers)
            else:
                mask += [True] * len(net.arrays())
        return mask + [True]

    def mean_model(self) -> "NamModel":
        """Deterministic copy with the posterior means as weights."""
        if not self.bayesian:
            return self.copy()
        cfg = replace(self.config, bayesian=False)
        return NamModel(
            cfg,
            self.n_features,
            [net.mean() for net in self.subnets],
            [net.mean() for net in self.interaction_nets],
            self.beta.copy(),
        )

    def copy(self) -> "NamModel":
        return NamModel(
            replace(self.config),
            self.n_features,
            [net.copy() for net in self.subnets],
            [net.copy() for net in self.interaction_nets],
            self.beta.copy(),
        )


def _term_seed(seed: int, term: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), 0, term])


def training_seed(seed: int) -> np.random.SeedSequence:
    """Seed of the training stream (shuffling, masks, weight noise) for a model seed."""
    return np.random.SeedSequence([int(seed), 1])


def build_model(d: int, config: NamConfig | None = None) -> NamModel:
    config = config or NamConfig()
    if d < 1:
        raise ConfigError(f"need at least one feature, got d={d}")
    for i, j in config.interactions:
        if i >= d or j >= d:
            raise ConfigError(f"interaction ({i}, {j}) out of range for d={d}")

    def make(n_in: int, term: int):
        sizes = [n_in, *config.hidden_sizes, 1]
        seed = _term_seed(config.seed, term)
        if config.bayesian:
            return nn.init_bayes_mlp(sizes, seed, config.s0, config.effective_prior_std)
        return nn.init_mlp(sizes, seed)

    subnets = [make(1, i) for i in range(d)]
    pairs = [make(2, d + k) for k in range(len(config.interactions))]
    return NamModel(config, d, subnets, pairs, np.zeros(1))


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------


@dataclass
class Noise:
    """All randomness consumed by one forward pass; pass it back in to replay."""

    samples: list | None = None  # BayesSample per term (Bayesian models)
    feature_mask: np.ndarray | None = None  # (n, terms), already scaled by 1/(1-tau)
    hidden_masks: list | None = None  # per term, (n, width) scaled multipliers


@dataclass
class _Trace:
    weights: list
    caches: list
    noise: Noise


def _as_matrix(model: NamModel, X) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=np.float64)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeError(f"expected {model.n_features} features, got shape {X.shape}")
    return X, squeeze


def _draw_noise(model: NamModel, n: int, mode: str, rng) -> Noise:
    cfg = model.config
    noise = Noise()
    if model.bayesian:
        noise.samples = [nn.bayes_sample(net, rng) for net in model.terms]
    if mode == "train":
        if cfg.tau > 0:
            keep = rng.random((n, len(model.terms))) >= cfg.tau
            noise.feature_mask = keep / (1.0 - cfg.tau)
        if cfg.input_dropout > 0 and len(cfg.hidden_sizes) > 0:
            width = cfg.hidden_sizes[0]
            psi = cfg.input_dropout
            noise.hidden_masks = [
                (rng.random((n, width)) >= psi) / (1.0 - psi) for _ in model.terms
            ]
    return noise


def _forward(model: NamModel, X: np.ndarray, mode: str, rng, noise: Noise | None):
    if mode not in ("train", "eval"):
        raise ConfigError(f"mode must be 'train' or 'eval', got {mode!r}")
    n = X.shape[0]
    if noise is None:
        noise = _draw_noise(model, n, mode, rng)
    if model.bayesian:
        if noise.samples is None:
            raise ConfigError("Bayesian forward needs weight samples")
        weights = [s.params for s in noise.samples]
    else:
        weights = model.terms
    parts = np.empty((n, len(weights)))
    caches = []
    for t, (net, cols) in enumerate(zip(weights, model.term_inputs)):
        hm = None
        if mode == "train" and noise.hidden_masks is not None:
            hm = {0: noise.hidden_masks[t]}
        out, cache = nn.mlp_forward(net, X[:, cols], hm)
        parts[:, t] = out[:, 0]
        caches.append(cache)
    if mode == "train" and noise.feature_mask is not None:
        total = (parts * noise.feature_mask).sum(axis=1)
    else:
        total = parts.sum(axis=1)
    return total + model.beta[0], parts, _Trace(weights, caches, noise)


def nam_forward(model: NamModel, x, mode: str = "eval", rng=None, noise: Noise | None = None):
    """Evaluate the model; returns ``(output, parts, noise)``.

    ``parts[:, t]`` is the raw (unmasked) output of term ``t``. In eval mode a
    Bayesian model draws one weight sample for the whole batch unless
    ``noise.samples`` supplies a frozen one.
    """
    X, squeeze = _as_matrix(model, x)
    if noise is None and rng is None and (model.bayesian or mode == "train"):
        raise ConfigError("an rng is required for sampling or dropout")
    out, parts, trace = _forward(model, X, mode, rng, noise)
    if squeeze:
        return out[0], parts[0], trace.noise
    return out, parts, trace.noise


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------


def data_loss(task: str, out: np.ndarray, y: np.ndarray):
    """Mean loss and its gradient w.r.t. ``out``."""
    n = out.shape[0]
    if task == "classification":
        # logistic loss on the logit, targets in {0, 1}
        loss = np.logaddexp(0.0, out) - y * out
        return float(loss.mean()), (nn.sigmoid(out) - y) / n
    resid = out - y
    return float(np.mean(resid * resid)), 2.0 * resid / n


@dataclass
class LossInfo:
    objective: float
    data_loss: float
    kl: float
    noise: Noise


def loss_and_grad(model: NamModel, X, y, rng=None, *, kl_weight: float = 1.0, noise: Noise | None = None):
    """Objective ``mean data loss + kl_weight * sum KL`` and its gradient.

    Gradients come back aligned with :meth:`NamModel.parameters`. Supplying
    ``noise`` (from a previous call) freezes weight samples and dropout masks.
    """
    X, _ = _as_matrix(model, X)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] == 0:
        raise ConfigError("empty batch")
    if y.shape[0] != X.shape[0]:
        raise ShapeError(f"{X.shape[0]} rows but {y.shape[0]} targets")
    out, _, trace = _forward(model, X, "train", rng, noise)
    loss, g_out = data_loss(model.config.task, out, y)

    grads: list[np.ndarray] = []
    fmask = trace.noise.feature_mask
    kl_total = 0.0
    for t, (net, w, cache) in enumerate(zip(model.terms, trace.weights, trace.caches)):
        g_t = g_out if fmask is None else g_out * fmask[:, t]
        layer_grads, _ = nn.mlp_backward(w, cache, g_t[:, None])
        if model.bayesian:
            g = nn.bayes_grads(net, trace.noise.samples[t], layer_grads)
            kl, g_kl = nn.kl_gaussian_and_grad(net)
            kl_total += kl
            if kl_weight:
                g = [a + kl_weight * b for a, b in zip(g, g_kl)]
            grads += g
        else:
            grads += [a for pair in layer_grads for a in pair]
    grads.append(np.array([g_out.sum()]))
    objective = loss + kl_weight * kl_total
    return objective, grads, LossInfo(objective, loss, kl_total, trace.noise)


def total_kl(model: NamModel) -> float:
    if not model.bayesian:
        return 0.0
    return sum(nn.kl_gaussian(net) for net in model.terms)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    kl: list[float] = field(default_factory=list)
    metric: list[float] = field(default_factory=list)
    metric_name: str = ""


def _train_metric(model: NamModel, data: Dataset) -> float:
    # posterior means keep the history free of extra rng draws
    out, _, _ = nam_forward(model.mean_model(), data.X, "eval")
    if data.task == "classification":
        return accuracy(out, data.y, threshold=0.0)
    return rmse(out, data.y)


def train(model: NamModel, data: Dataset, sgd: nn.SgdConfig, rng) -> tuple[NamModel, TrainHistory]:
    """Minibatch SGD over ``sgd.epochs`` passes, reshuffling every epoch.

    Parameters are updated in place; the model is also returned.
    """
    if data.task != model.config.task:
        raise ConfigError(f"model task {model.config.task!r} but data task {data.task!r}")
    if data.d != model.n_features:
        raise ShapeError(f"model has {model.n_features} features, data has {data.d}")
    B = sgd.batch_size
    if B > data.n:
        raise ConfigError(f"batch size {B} exceeds dataset size {data.n}")
    n_batches = math.ceil(data.n / B)
    total_steps = sgd.epochs * n_batches
    kl_weight = 1.0 / n_batches
    params = model.parameters()
    opt = nn.Sgd(sgd, model.decay_mask())
    history = TrainHistory(metric_name="accuracy" if data.task == "classification" else "rmse")
    step = 0
    for epoch in range(sgd.epochs):
        perm = rng.permutation(data.n)
        loss_sum = 0.0
        for b in range(n_batches):
            idx = perm[b * B:(b + 1) * B]
            obj, grads, info = loss_and_grad(model, data.X[idx], data.y[idx], rng, kl_weight=kl_weight)
            if not math.isfinite(obj):
                lr = nn.learning_rate(sgd, step, total_steps)
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}, lr {lr:g}")
            opt.step(params, grads, step, total_steps)
            loss_sum += info.data_loss * len(idx)
            step += 1
        history.loss.append(loss_sum / data.n)
        history.kl.append(total_kl(model))
        history.metric.append(_train_metric(model, data))
        log.info(
            "epoch %d: loss %.5f kl %.3f %s %.5f",
            epoch, history.loss[-1], history.kl[-1], history.metric_name, history.metric[-1],
        )
    return model, history


def fit(d: int, config: NamConfig, data: Dataset, sgd: nn.SgdConfig, seed: int | None = None):
    """Build and train one model; ``seed`` overrides ``config.seed``."""
    if seed is not None:
        config = replace(config, seed=seed)
    model = build_model(d, config)
    return train(model, data, sgd, nn.make_rng(training_seed(config.seed)))


def train_ensemble(d: int, config: NamConfig, n_models: int, data: Dataset, sgd: nn.SgdConfig, base_seed: int):
    """Independent models seeded ``base_seed .. base_seed + n_models - 1``."""
    if n_models < 1:
        raise ConfigError(f"n_models must be >= 1, got {n_models}")
    models, histories = [], []
    for k in range(n_models):
        m, h = fit(d, config, data, sgd, seed=base_seed + k)
        models.append(m)
        histories.append(h)
    return models, histories


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------


def members(model_or_ensemble) -> list[NamModel]:
    if isinstance(model_or_ensemble, NamModel):
        return [model_or_ensemble]
    models = list(model_or_ensemble)
    if not models:
        raise ConfigError("empty ensemble")
    return models


def predict(model_or_ensemble, X, n_samples: int = 1, rng=None) -> np.ndarray:
    """Soft voting: mean probability (classification) or value over members and draws."""
    if n_samples < 1:
        raise ConfigError(f"n_samples must be >= 1, got {n_samples}")
    models = members(model_or_ensemble)
    total, count = 0.0, 0
    for m in models:
        draws = n_samples if m.bayesian else 1
        for _ in range(draws):
            out, _, _ = nam_forward(m, X, "eval", rng)
            total = total + (nn.sigmoid(out) if m.config.task == "classification" else out)
            count += 1
    return total / count
