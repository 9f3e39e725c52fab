"""Pure NumPy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable or when
``RANKNORM_PURE_PYTHON=1`` is set. Signatures match ``_kernels.pyx``.
"""
import numpy as np
from scipy.special import expit

from .errors import SinkhornDivergence

NAME = "numpy"


def logistic(z):
    return expit(np.asarray(z, dtype=np.float64))


def qnorm_map(X, mu, sigma, eps_out):
    z = (np.asarray(X, dtype=np.float64) - mu) / sigma
    return expit(z) * (1.0 - 2.0 * eps_out) + eps_out


def softsort_column(x, v, tau, want_matrix):
    diff = x[:, None] - x[None, :]
    logits = -(diff * diff) / tau
    logits -= logits.max(axis=1, keepdims=True)
    W = np.exp(logits)
    W /= W.sum(axis=1, keepdims=True)
    return W @ v, (W if want_matrix else None)


def sinkhorn_column(x, lin, eps, iters, floor, want_matrix):
    K = np.maximum(np.exp(-np.abs(x[:, None] - x[None, :]) / eps), floor)
    v = np.ones(x.shape[0])
    for it in range(1, iters + 1):
        u = 1.0 / (K @ v)
        v = 1.0 / (K.T @ u)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise SinkhornDivergence(it)
    P = u[:, None] * K * v[None, :]
    return P @ lin, (P if want_matrix else None)
