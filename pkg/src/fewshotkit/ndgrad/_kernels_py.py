"""Pure numpy implementations of the hot row-wise kernels.

Every function here has a twin with the same signature in ``_kernels.pyx``.
Inputs are 2-D C-contiguous float64 arrays; rows are independent samples.
"""
import numpy as np


def softmax_fwd(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def log_softmax_fwd(z):
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax_bwd(p, g):
    return p * (g - (g * p).sum(axis=1, keepdims=True))


def log_softmax_bwd(lp, g):
    return g - np.exp(lp) * g.sum(axis=1, keepdims=True)


def l2norm_fwd(x, eps):
    norms = np.sqrt((x * x).sum(axis=1) + eps)
    return x / norms[:, None], norms


def l2norm_bwd(y, norms, g):
    return (g - y * (g * y).sum(axis=1, keepdims=True)) / norms[:, None]


def batchnorm_fwd(x, gamma, beta, eps):
    mean = x.mean(axis=0)
    var = ((x - mean) ** 2).mean(axis=0)
    xhat = (x - mean) / np.sqrt(var + eps)
    return xhat * gamma + beta, xhat, mean, var


def batchnorm_bwd(g, xhat, var, gamma, eps):
    n = g.shape[0]
    inv_std = 1.0 / np.sqrt(var + eps)
    dgamma = (g * xhat).sum(axis=0)
    dbeta = g.sum(axis=0)
    dxhat = g * gamma
    dx = inv_std / n * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    return dx, dgamma, dbeta


def adam_update(p, g, m, v, lr, beta1, beta2, eps, t, weight_decay):
    # p, m, v are updated in place; t is the 1-based step count.
    d = g + weight_decay * p if weight_decay else g
    m *= beta1
    m += (1.0 - beta1) * d
    v *= beta2
    v += (1.0 - beta2) * d * d
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    p -= lr * m_hat / (np.sqrt(v_hat) + eps)


def sgd_update(p, g, buf, lr, momentum, weight_decay, nesterov):
    d = g + weight_decay * p if weight_decay else g.copy()
    if momentum:
        buf *= momentum
        buf += d
        if nesterov:
            d = d + momentum * buf
        else:
            d = buf.copy()
    p -= lr * d
