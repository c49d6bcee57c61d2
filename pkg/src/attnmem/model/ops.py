"""Primitive layers with explicit forward caches and backward passes.

Linear weights are stored (out, in). Everything is smooth (tanh GELU,
softmax, LayerNorm), which keeps finite-difference gradient checks clean.
"""

import math

import numpy as np

LN_EPS = 1e-5
_GELU_C = math.sqrt(2.0 / math.pi)


def linear_fwd(x, w, b):
    return x @ w.T + b, x


def linear_bwd(dy, x, w):
    return dy @ w, dy.T @ x, dy.sum(axis=0)


def layernorm_fwd(x, g, b, eps=LN_EPS):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    return g * xhat + b, (xhat, inv, g)


def layernorm_bwd(dy, cache):
    xhat, inv, g = cache
    dg = (dy * xhat).sum(axis=0)
    db = dy.sum(axis=0)
    dxhat = dy * g
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


def gelu_fwd(x):
    u = _GELU_C * (x + 0.044715 * x ** 3)
    t = np.tanh(u)
    return 0.5 * x * (1.0 + t), (x, t)


def gelu_bwd(dy, cache):
    x, t = cache
    du = _GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def softmax_rows(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def mha_fwd(x, wq, bq, wk, bk, wv, bv, wo, bo, n_heads):
    """Multi-head self-attention over an (S, d) sequence."""
    s, d = x.shape
    dh = d // n_heads
    scale = 1.0 / math.sqrt(dh)
    q = x @ wq.T + bq
    k = x @ wk.T + bk
    v = x @ wv.T + bv
    qh = q.reshape(s, n_heads, dh).transpose(1, 0, 2)
    kh = k.reshape(s, n_heads, dh).transpose(1, 0, 2)
    vh = v.reshape(s, n_heads, dh).transpose(1, 0, 2)
    logits = (qh @ kh.transpose(0, 2, 1)) * scale
    probs = softmax_rows(logits)
    ctx = (probs @ vh).transpose(1, 0, 2).reshape(s, d)
    y = ctx @ wo.T + bo
    cache = {
        "x": x, "qh": qh, "kh": kh, "vh": vh,
        "logits": logits, "probs": probs, "ctx": ctx,
        "scale": scale, "n_heads": n_heads,
    }
    return y, cache


def mha_bwd(dy, cache, wq, wk, wv, wo):
    x = cache["x"]
    probs = cache["probs"]
    scale = cache["scale"]
    n_heads = cache["n_heads"]
    s, d = x.shape
    dh = d // n_heads

    dctx = dy @ wo
    dwo = dy.T @ cache["ctx"]
    dbo = dy.sum(axis=0)

    dctx_h = dctx.reshape(s, n_heads, dh).transpose(1, 0, 2)
    dprobs = dctx_h @ cache["vh"].transpose(0, 2, 1)
    dvh = probs.transpose(0, 2, 1) @ dctx_h
    dlogits = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))
    dqh = (dlogits @ cache["kh"]) * scale
    dkh = (dlogits.transpose(0, 2, 1) @ cache["qh"]) * scale

    dq = dqh.transpose(1, 0, 2).reshape(s, d)
    dk = dkh.transpose(1, 0, 2).reshape(s, d)
    dv = dvh.transpose(1, 0, 2).reshape(s, d)

    dx = dq @ wq + dk @ wk + dv @ wv
    grads = {
        "wq": dq.T @ x, "bq": dq.sum(axis=0),
        "wk": dk.T @ x, "bk": dk.sum(axis=0),
        "wv": dv.T @ x, "bv": dv.sum(axis=0),
        "wo": dwo, "bo": dbo,
    }
    return dx, grads
