"""Closed-form accuracy of equal-weight classifiers under feature dropout.

With ``k`` features ``x_i ~ N(lambda*y, sigma^2)`` each kept with probability
``1 - tau``, the classifier ``sign(sum u_i x_i)`` is right with probability

    P(k, tau) = sum_{j=1..k} q_j C(k, j) (1 - tau)^j tau^(k - j),
    q_j = Phi(lambda * sqrt(j) / sigma).

The all-dropped event (j = 0) scores zero because the sum is exactly 0 and
the comparison is strict. Binomial weights are built in log space so k in the
hundreds is fine.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, xlogy

from .errors import ConfigError
from .nn import make_rng

SQRT2 = math.sqrt(2.0)


def std_normal_cdf(z):
    """Phi(z) via erf/erfc, using erfc on the tails to keep relative accuracy."""
    if np.ndim(z) == 0:
        z = float(z)
        if z < -1.0:
            return 0.5 * math.erfc(-z / SQRT2)
        if z > 1.0:
            return 1.0 - 0.5 * math.erfc(z / SQRT2)
        return 0.5 * (1.0 + math.erf(z / SQRT2))
    return np.vectorize(std_normal_cdf, otypes=[float])(z)


def q_value(j: int, lam: float, sigma: float) -> float:
    if j < 1:
        raise ConfigError(f"j must be >= 1, got {j}")
    return std_normal_cdf(lam * math.sqrt(j) / sigma)


def q_values(k: int, lam: float, sigma: float) -> np.ndarray:
    """``q_1 .. q_k``."""
    return np.array([q_value(j, lam, sigma) for j in range(1, k + 1)])


def lemma1_accuracy(lam: float, sigma2: float, d: int) -> float:
    """Accuracy of ``sign(mean(x_2..x_d))``: Phi(lambda * sqrt(d-1) / sigma)."""
    if d < 2:
        raise ConfigError(f"d must be >= 2, got {d}")
    if not sigma2 > 0:
        raise ConfigError(f"sigma2 must be positive, got {sigma2}")
    return std_normal_cdf(lam * math.sqrt(d - 1) / math.sqrt(sigma2))


def _check(k: int, tau: float):
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if not 0.0 <= tau <= 1.0:
        raise ConfigError(f"tau must be in [0, 1], got {tau}")


def _log_binom(k: int) -> np.ndarray:
    j = np.arange(1, k + 1)
    return gammaln(k + 1) - gammaln(j + 1) - gammaln(k - j + 1)


def _weights(k: int, tau: float, shift_keep: int = 0, shift_drop: int = 0) -> np.ndarray:
    """``C(k,j) (1-tau)^(j - shift_keep) tau^(k - j - shift_drop)`` for j = 1..k.

    Terms whose exponent goes negative are returned as 0 (their coefficient
    in the derivative is 0 anyway).
    """
    j = np.arange(1, k + 1)
    e_keep = j - shift_keep
    e_drop = k - j - shift_drop
    with np.errstate(divide="ignore"):
        logw = _log_binom(k) + xlogy(e_keep, 1.0 - tau) + xlogy(e_drop, tau)
    w = np.exp(logw)
    w[(e_keep < 0) | (e_drop < 0)] = 0.0
    return w


def p_acc(k: int, tau: float, lam: float, sigma: float) -> float:
    _check(k, tau)
    # weights can sum past 1 by a few ulps
    return min(1.0, float(np.dot(q_values(k, lam, sigma), _weights(k, tau))))


def dp_acc_dtau(k: int, tau: float, lam: float, sigma: float) -> float:
    """Exact tau-derivative of :func:`p_acc`, differentiated term by term."""
    _check(k, tau)
    j = np.arange(1, k + 1)
    q = q_values(k, lam, sigma)
    dkeep = -j * _weights(k, tau, shift_keep=1)
    ddrop = (k - j) * _weights(k, tau, shift_drop=1)
    return float(np.dot(q, dkeep + ddrop))


def delta_p(k: int, tau: float, lam: float, sigma: float) -> tuple[float, float]:
    """``(P(k,tau) - P(1,tau), d/dtau of the same)``."""
    _check(k, tau)
    q1 = q_value(1, lam, sigma)
    delta = p_acc(k, tau, lam, sigma) - q1 * (1.0 - tau)
    deriv = dp_acc_dtau(k, tau, lam, sigma) + q1
    if k == 1:
        return 0.0, 0.0
    return delta, deriv


def mc_oracle(k: int, tau: float, lam: float, sigma: float, n_draws: int, seed: int = 0, chunk: int = 200_000):
    """Brute-force estimate of P(k, tau) by simulating labels, features and masks.

    Returns ``(estimate, stderr)`` with the binomial standard error.
    """
    _check(k, tau)
    if n_draws < 1:
        raise ConfigError(f"n_draws must be >= 1, got {n_draws}")
    rng = make_rng(seed)
    hits = 0
    done = 0
    while done < n_draws:
        m = min(chunk, n_draws - done)
        y = rng.choice(np.array([-1.0, 1.0]), size=m)
        x = lam * y[:, None] + sigma * rng.standard_normal((m, k))
        u = rng.random((m, k)) >= tau
        hits += int(np.count_nonzero(y * (u * x).sum(axis=1) > 0))
        done += m
    p = hits / n_draws
    return p, math.sqrt(p * (1.0 - p) / n_draws)


def adjacent_gap_bound(j: int) -> float:
    """Upper bound on ``q_{j+1} - q_j`` over all lambda/sigma.

    The gap Phi(a sqrt(j+1)) - Phi(a sqrt(j)) peaks at a = sqrt(ln((j+1)/j)).
    """
    if j < 1:
        raise ConfigError(f"j must be >= 1, got {j}")
    c = math.log((j + 1) / j)
    return std_normal_cdf(math.sqrt((j + 1) * c)) - std_normal_cdf(math.sqrt(j * c))


def lemma2_bound(j: int) -> float:
    """``(j+1) * adjacent_gap_bound(j)``, the cap on ``(j+1)(q_{j+1} - q_j)``."""
    return (j + 1) * adjacent_gap_bound(j)


# ---------------------------------------------------------------------------
# Grid sweeps
# ---------------------------------------------------------------------------


@dataclass
class TheoryPoint:
    k: int
    tau: float
    lam: float
    sigma: float
    q: list[float]
    p_acc: float
    delta_p: float
    ddelta_dtau: float


def theory_point(k: int, tau: float, lam: float, sigma: float) -> TheoryPoint:
    delta, deriv = delta_p(k, tau, lam, sigma)
    return TheoryPoint(
        k, tau, lam, sigma, q_values(k, lam, sigma).tolist(), p_acc(k, tau, lam, sigma), delta, deriv
    )


@dataclass
class TheoremReport:
    lam: float
    sigma: float
    rows: list[dict] = field(default_factory=list)  # k, tau, delta, ddelta_dtau, positive
    tau_star: dict[int, float | None] = field(default_factory=dict)
    mc: dict | None = None

    def to_csv(self, path) -> None:
        cols = ["k", "tau", "delta", "ddelta_dtau"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in self.rows:
                w.writerow([r["k"], repr(r["tau"]), repr(r["delta"]), repr(r["ddelta_dtau"])])

    def to_dict(self) -> dict:
        return {
            "format_version": "1",
            "lambda": self.lam,
            "sigma": self.sigma,
            "tau_star": {str(k): v for k, v in self.tau_star.items()},
            "rows": self.rows,
            "mc": self.mc,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def theorem1_report(k_list, tau_grid, lam: float, sigma: float) -> TheoremReport:
    """Gap and slope on a (k, tau) grid.

    ``tau_star[k]`` is the last grid tau reached while the slope stays positive
    from the start of the grid (``None`` if it is not positive at the first point).
    """
    k_list = list(k_list)
    tau_grid = [float(t) for t in tau_grid]
    if not k_list or not tau_grid:
        raise ConfigError("k_list and tau_grid must be non-empty")
    report = TheoremReport(lam, sigma)
    for k in k_list:
        star, running = None, True
        for tau in tau_grid:
            delta, deriv = delta_p(k, tau, lam, sigma)
            report.rows.append(
                {"k": k, "tau": tau, "delta": delta, "ddelta_dtau": deriv, "positive": delta > 0}
            )
            if running and deriv > 0:
                star = tau
            else:
                running = False
        report.tau_star[k] = star
    return report


def mc_crosscheck(report: TheoremReport, n_draws: int, seed: int = 0) -> dict:
    """Compare P(k, tau) with the simulation at every report row.

    Stored on ``report.mc`` and returned: max absolute gap and max gap in stderr units.
    """
    worst_abs, worst_z = 0.0, 0.0
    for i, r in enumerate(report.rows):
        exact = p_acc(r["k"], r["tau"], report.lam, report.sigma)
        est, se = mc_oracle(r["k"], r["tau"], report.lam, report.sigma, n_draws, seed=seed + i)
        gap = abs(est - exact)
        worst_abs = max(worst_abs, gap)
        if se > 0:
            worst_z = max(worst_z, gap / se)
    report.mc = {"n_draws": n_draws, "max_abs_dev": worst_abs, "max_dev_in_stderr": worst_z}
    return report.mc
