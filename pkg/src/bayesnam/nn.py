"""Dense numerics for small per-feature networks.

Everything here is plain numpy with hand-written gradients: a ReLU MLP,
a Gaussian mean-field ("Bayes by Backprop") variant of it, the closed-form
KL to an isotropic Gaussian prior, and SGD with momentum and a cosine
learning-rate schedule.

Inputs to the MLP are batched as ``(n, in_dim)`` arrays; a 1-D vector is
treated as a single example and the output is returned 1-D as well.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ConfigError, ShapeError


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """PCG64 generator. Same seed, same stream."""
    return np.random.Generator(np.random.PCG64(seed))


def softplus(x):
    return np.logaddexp(0.0, x)


def inverse_softplus(y: float) -> float:
    if y <= 0:
        raise ConfigError(f"softplus target must be positive, got {y}")
    # log(expm1(y)) underflows for tiny y, where expm1(y) ~ y
    return float(np.log(np.expm1(y))) if y > 1e-8 else float(np.log(y))


sigmoid = expit


# ---------------------------------------------------------------------------
# Deterministic MLP
# ---------------------------------------------------------------------------


@dataclass
class MlpParams:
    """Layers as ``(W, b)`` pairs with ``W`` of shape ``(out, in)``.

    ReLU between layers, identity on the output.
    """

    layers: list[tuple[np.ndarray, np.ndarray]]

    @property
    def in_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    @property
    def sizes(self) -> list[int]:
        return [self.in_dim] + [w.shape[0] for w, _ in self.layers]

    def arrays(self) -> list[np.ndarray]:
        return [a for layer in self.layers for a in layer]

    def copy(self) -> "MlpParams":
        return MlpParams([(w.copy(), b.copy()) for w, b in self.layers])


@dataclass
class MlpCache:
    inputs: list[np.ndarray]  # input to each layer, (n, in_t)
    preacts: list[np.ndarray]  # pre-activation of each hidden layer
    masks: list[np.ndarray | None]  # dropout multipliers per hidden layer
    squeeze: bool
    sizes: list[int] = field(default_factory=list)


def _check_sizes(layer_sizes) -> list[int]:
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or any(s <= 0 for s in sizes):
        raise ConfigError(f"layer sizes must be >= 2 positive ints, got {list(layer_sizes)}")
    return sizes


def init_mlp(layer_sizes, seed) -> MlpParams:
    """Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) weights, zero biases."""
    sizes = _check_sizes(layer_sizes)
    rng = make_rng(seed)
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(1.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        layers.append((w, np.zeros(fan_out)))
    return MlpParams(layers)


def mlp_forward(params: MlpParams, x, hidden_masks=None):
    """Run the network; returns ``(y, cache)``.

    ``hidden_masks`` optionally maps hidden-layer index to a multiplier array
    of shape ``(n, width)`` applied after the ReLU (used for inverted dropout).
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.ndim != 2 or h.shape[1] != params.in_dim:
        raise ShapeError(f"expected input width {params.in_dim}, got shape {x.shape}")
    hidden_masks = hidden_masks or {}
    inputs, preacts, masks = [], [], []
    n_layers = len(params.layers)
    for t, (w, b) in enumerate(params.layers):
        inputs.append(h)
        z = h @ w.T + b
        if t == n_layers - 1:
            h = z
            break
        preacts.append(z)
        h = np.maximum(z, 0.0)
        m = hidden_masks.get(t)
        if m is not None:
            h = h * m
        masks.append(m)
    cache = MlpCache(inputs, preacts, masks, squeeze, params.sizes)
    return (h[0] if squeeze else h), cache


def mlp_backward(params: MlpParams, cache: MlpCache, grad_out):
    """Reverse pass. Returns ``(grads, grad_x)`` with ``grads`` as ``(dW, db)`` pairs.

    ReLU uses subgradient 0 at exactly 0.
    """
    if cache.sizes != params.sizes:
        raise ShapeError(f"cache built for sizes {cache.sizes}, params are {params.sizes}")
    g = np.asarray(grad_out, dtype=np.float64)
    if cache.squeeze:
        g = g[None, :]
    n = cache.inputs[0].shape[0]
    if g.shape != (n, params.out_dim):
        raise ShapeError(f"grad_out shape {g.shape} does not match output ({n}, {params.out_dim})")
    grads = [None] * len(params.layers)
    for t in range(len(params.layers) - 1, -1, -1):
        w, _ = params.layers[t]
        grads[t] = (g.T @ cache.inputs[t], g.sum(axis=0))
        g = g @ w
        if t > 0:
            m = cache.masks[t - 1]
            if m is not None:
                g = g * m
            g = g * (cache.preacts[t - 1] > 0)
    return grads, (g[0] if cache.squeeze else g)


# ---------------------------------------------------------------------------
# Bayesian (mean-field Gaussian) layers
# ---------------------------------------------------------------------------


@dataclass
class BayesLinearParams:
    """Variational posterior of one affine layer.

    Spread is ``s = softplus(rho)``; ``s0`` is the prior standard deviation.
    """

    w_mu: np.ndarray
    w_rho: np.ndarray
    b_mu: np.ndarray
    b_rho: np.ndarray
    s0: float

    def spreads(self) -> tuple[np.ndarray, np.ndarray]:
        return softplus(self.w_rho), softplus(self.b_rho)


@dataclass
class BayesMlpParams:
    layers: list[BayesLinearParams]

    @property
    def in_dim(self) -> int:
        return self.layers[0].w_mu.shape[1]

    @property
    def sizes(self) -> list[int]:
        return [self.in_dim] + [lay.w_mu.shape[0] for lay in self.layers]

    def mean(self) -> MlpParams:
        return MlpParams([(lay.w_mu.copy(), lay.b_mu.copy()) for lay in self.layers])

    def arrays(self) -> list[np.ndarray]:
        out = []
        for lay in self.layers:
            out += [lay.w_mu, lay.b_mu, lay.w_rho, lay.b_rho]
        return out

    def copy(self) -> "BayesMlpParams":
        return BayesMlpParams(
            [
                BayesLinearParams(l.w_mu.copy(), l.w_rho.copy(), l.b_mu.copy(), l.b_rho.copy(), l.s0)
                for l in self.layers
            ]
        )


def init_bayes_mlp(layer_sizes, seed, init_spread: float, prior_std: float) -> BayesMlpParams:
    """Means as in :func:`init_mlp`; rho set so that softplus(rho) == init_spread."""
    if prior_std <= 0:
        raise ConfigError(f"prior std must be positive, got {prior_std}")
    rho0 = inverse_softplus(init_spread)
    base = init_mlp(layer_sizes, seed)
    layers = [
        BayesLinearParams(w, np.full_like(w, rho0), b, np.full_like(b, rho0), float(prior_std))
        for w, b in base.layers
    ]
    return BayesMlpParams(layers)


@dataclass
class BayesSample:
    """One reparameterized draw: the sampled network plus the noise used."""

    params: MlpParams
    eps: list[tuple[np.ndarray, np.ndarray]]


def bayes_sample(params: BayesMlpParams, rng: np.random.Generator) -> BayesSample:
    """Draw ``w = mu + softplus(rho) * eps`` for every layer, fresh ``eps`` per call."""
    layers, eps = [], []
    for lay in params.layers:
        ew = rng.standard_normal(lay.w_mu.shape)
        eb = rng.standard_normal(lay.b_mu.shape)
        sw, sb = lay.spreads()
        layers.append((lay.w_mu + sw * ew, lay.b_mu + sb * eb))
        eps.append((ew, eb))
    return BayesSample(MlpParams(layers), eps)


def bayes_grads(params: BayesMlpParams, sample: BayesSample, grads) -> list[np.ndarray]:
    """Chain sampled-weight gradients back to (mu, rho).

    Returned in the order of :meth:`BayesMlpParams.arrays`.
    """
    out = []
    for lay, (ew, eb), (gw, gb) in zip(params.layers, sample.eps, grads):
        out += [gw, gb, gw * ew * sigmoid(lay.w_rho), gb * eb * sigmoid(lay.b_rho)]
    return out


def _kl_terms(mu, rho, s0):
    s = softplus(rho)
    kl = np.log(s0 / s) + (s * s + mu * mu) / (2.0 * s0 * s0) - 0.5
    dmu = mu / (s0 * s0)
    ds = -1.0 / s + s / (s0 * s0)
    return kl.sum(), dmu, ds * sigmoid(rho)


def kl_gaussian(params: BayesLinearParams | BayesMlpParams) -> float:
    """KL(N(mu, s^2) || N(0, s0^2)) summed over all weights and biases."""
    return kl_gaussian_and_grad(params)[0]


def kl_gaussian_and_grad(params: BayesLinearParams | BayesMlpParams):
    """KL value and its gradient w.r.t. (w_mu, b_mu, w_rho, b_rho) per layer."""
    layers = params.layers if isinstance(params, BayesMlpParams) else [params]
    total, grads = 0.0, []
    for lay in layers:
        if not lay.s0 > 0:
            raise ConfigError(f"prior std s0 must be positive, got {lay.s0}")
        kw, gmw, grw = _kl_terms(lay.w_mu, lay.w_rho, lay.s0)
        kb, gmb, grb = _kl_terms(lay.b_mu, lay.b_rho, lay.s0)
        total += kw + kb
        grads += [gmw, gmb, grw, grb]
    return float(total), grads


# ---------------------------------------------------------------------------
# SGD
# ---------------------------------------------------------------------------


@dataclass
class SgdConfig:
    lr: float = 0.01
    momentum: float = 0.0
    weight_decay: float = 0.0
    epochs: int = 1
    batch_size: int = 1
    schedule: str = "constant"

    def __post_init__(self):
        if not self.lr >= 0:
            raise ConfigError(f"lr must be non-negative, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if self.schedule not in ("constant", "cosine"):
            raise ConfigError(f"unknown schedule {self.schedule!r}")


def learning_rate(cfg: SgdConfig, step: int, total_steps: int) -> float:
    if cfg.schedule == "cosine":
        return cfg.lr * 0.5 * (1.0 + np.cos(np.pi * step / total_steps))
    return cfg.lr


class Sgd:
    """Heavy-ball SGD (``v = m*v + g + wd*w; w -= lr*v``), updating arrays in place.

    ``decay_mask`` flags which parameters receive weight decay.
    """

    def __init__(self, cfg: SgdConfig, decay_mask=None):
        self.cfg = cfg
        self.decay_mask = decay_mask
        self.velocity: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], step: int, total_steps: int) -> float:
        cfg = self.cfg
        lr = learning_rate(cfg, step, total_steps)
        mask = self.decay_mask or [True] * len(params)
        if cfg.momentum and self.velocity is None:
            self.velocity = [np.zeros_like(p) for p in params]
        for i, (p, g) in enumerate(zip(params, grads)):
            if cfg.weight_decay and mask[i]:
                g = g + cfg.weight_decay * p
            if cfg.momentum:
                v = self.velocity[i]
                v *= cfg.momentum
                v += g
                g = v
            p -= lr * g
        return lr


def sgd_step(params, grads, cfg: SgdConfig, step: int, total_steps: int, state: Sgd | None = None):
    """Functional wrapper around :class:`Sgd`; returns the (in-place) updated params."""
    if step >= total_steps:
        raise ConfigError(f"step {step} out of range for {total_steps} total steps")
    opt = state if state is not None else Sgd(cfg)
    opt.step(params, grads, step, total_steps)
    return params
