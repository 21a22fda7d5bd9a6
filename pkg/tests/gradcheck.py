import numpy as np


def rel_close(a, b, rtol=1e-5, floor=1e-8):
    a, b = np.asarray(a), np.asarray(b)
    return np.all(np.abs(a - b) <= rtol * np.maximum(np.abs(a), np.abs(b)) + floor)


def numeric_grad(f, arrays, h=1e-6):
    """Central differences of scalar ``f()`` w.r.t. every entry of every array (in place)."""
    out = []
    for a in arrays:
        g = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            old = a[idx]
            a[idx] = old + h
            fp = f()
            a[idx] = old - h
            fm = f()
            a[idx] = old
            g[idx] = (fp - fm) / (2 * h)
        out.append(g)
    return out


def frozen_objective(model, X, y, noise, kl_weight):
    """Objective as a function of the model's current parameters with all
    randomness (dropout masks and, for Bayesian models, eps) held fixed."""
    from bayesnam import nn
    from bayesnam.model import loss_and_grad

    def objective():
        if model.bayesian:
            for net, s in zip(model.terms, noise.samples):
                s.params = nn.MlpParams(
                    [
                        (lay.w_mu + nn.softplus(lay.w_rho) * ew, lay.b_mu + nn.softplus(lay.b_rho) * eb)
                        for lay, (ew, eb) in zip(net.layers, s.eps)
                    ]
                )
        return loss_and_grad(model, X, y, kl_weight=kl_weight, noise=noise)[0]

    return objective
