"""Forward pass, attention extraction, and analytic gradients.

The token sequence is [CLS, THW visual tokens, optional text tokens]; a
LayerNorm is applied to the embedded sequence before L pre-LN encoder
blocks, with a final LayerNorm ahead of the prediction MLP.
"""

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import (
    MissingCache,
    NonFiniteLoss,
    OddDim,
    ShapeMismatch,
    TooFewFrames,
)
from .config import FrameSamplerMode, ModelConfig
from .ops import (
    gelu_bwd,
    gelu_fwd,
    layernorm_bwd,
    layernorm_fwd,
    linear_bwd,
    linear_fwd,
    mha_bwd,
    mha_fwd,
)

MAP_SIZE = 224


@dataclass
class AttentionResult:
    alpha: np.ndarray        # (T*H*W,), nonnegative, sums to 1
    frame_maps: np.ndarray   # (T, 224, 224)
    temporal: np.ndarray     # (T,), per-frame sums of alpha


# --- segment sampling --------------------------------------------------------

def sample_segments(n_frames, T, mode, rng=None):
    """Pick one frame index from each of T uniform segments.

    Segment i covers [floor(i*n/T), floor((i+1)*n/T)); the returned indices
    are strictly increasing.
    """
    if isinstance(mode, str):
        mode = FrameSamplerMode(mode)
    if T < 1 or n_frames < T:
        raise TooFewFrames(f"cannot pick {T} segments from {n_frames} frames")
    if rng is None:
        rng = np.random.default_rng(mode.rng_seed)
    picks = []
    for i in range(T):
        lo = (i * n_frames) // T
        hi = ((i + 1) * n_frames) // T
        if mode.mode == "middle_of_segment":
            picks.append((lo + hi) // 2)
        else:
            picks.append(int(rng.integers(lo, hi)))
    return picks


# --- embeddings --------------------------------------------------------------

def fourier_temporal_embeddings(T, d):
    """Sinusoidal table: row i has sin/cos pairs at geometric frequencies."""
    if d % 2 != 0:
        raise OddDim(f"fourier embeddings need even d, got {d}")
    table = np.zeros((T, d), dtype=np.float64)
    positions = np.arange(T, dtype=np.float64)[:, None]
    freqs = 1.0 / (10000.0 ** (np.arange(0, d, 2, dtype=np.float64) / d))
    table[:, 0::2] = np.sin(positions * freqs)
    table[:, 1::2] = np.cos(positions * freqs)
    return table


# --- parameters ----------------------------------------------------------------

def _param_spec(config):
    """Ordered (name, shape, kind) list; kind picks the initializer."""
    c = config
    spec = [("proj.w", (c.d, c.D), "weight"), ("proj.b", (c.d,), "zero")]
    spec.append(("embed.temporal", (c.T, c.d), "embed"))
    if c.spatial_embedding == "learned_1d":
        spec.append(("embed.spatial", (c.H * c.W, c.d), "embed"))
    elif c.spatial_embedding == "learned_2d":
        spec.append(("embed.spatial_row", (c.H, c.d), "embed"))
        spec.append(("embed.spatial_col", (c.W, c.d), "embed"))
    if c.use_text:
        spec.append(("embed.caption", (c.N_text, c.d), "embed"))
        spec.append(("embed.modality", (2, c.d), "embed"))
    spec.append(("cls", (c.d,), "embed"))
    spec.append(("ln_in.g", (c.d,), "one"))
    spec.append(("ln_in.b", (c.d,), "zero"))
    for i in range(c.L):
        p = f"enc{i}"
        spec.append((f"{p}.ln1.g", (c.d,), "one"))
        spec.append((f"{p}.ln1.b", (c.d,), "zero"))
        for w in ("wq", "wk", "wv", "wo"):
            spec.append((f"{p}.attn.{w}", (c.d, c.d), "weight"))
            spec.append((f"{p}.attn.b{w[1]}", (c.d,), "zero"))
        spec.append((f"{p}.ln2.g", (c.d,), "one"))
        spec.append((f"{p}.ln2.b", (c.d,), "zero"))
        spec.append((f"{p}.mlp.w1", (4 * c.d, c.d), "weight"))
        spec.append((f"{p}.mlp.b1", (4 * c.d,), "zero"))
        spec.append((f"{p}.mlp.w2", (c.d, 4 * c.d), "weight"))
        spec.append((f"{p}.mlp.b2", (c.d,), "zero"))
    spec.append(("ln_f.g", (c.d,), "one"))
    spec.append(("ln_f.b", (c.d,), "zero"))
    spec.append(("head.w1", (c.d, c.d), "weight"))
    spec.append(("head.b1", (c.d,), "zero"))
    spec.append(("head.w2", (1, c.d), "weight"))
    spec.append(("head.b2", (1,), "zero"))
    return spec


def init_params(config):
    """Seeded init: uniform(+-1/sqrt(fan_in)) weights, N(0, 0.02) embeddings."""
    rng = np.random.default_rng(config.seed)
    dtype = np.dtype(config.dtype)
    params = {}
    for name, shape, kind in _param_spec(config):
        if kind == "weight":
            bound = 1.0 / np.sqrt(shape[-1])
            arr = rng.uniform(-bound, bound, size=shape)
        elif kind == "embed":
            arr = rng.normal(0.0, 0.02, size=shape)
        elif kind == "one":
            arr = np.ones(shape)
        else:
            arr = np.zeros(shape)
        params[name] = arr.astype(dtype)
    if config.temporal_embedding == "fourier":
        params["embed.temporal"] = fourier_temporal_embeddings(
            config.T, config.d
        ).astype(dtype)
    return params


def trainable_names(config):
    names = [name for name, _, _ in _param_spec(config)]
    if config.temporal_embedding == "fourier":
        names.remove("embed.temporal")
    return names


def zeroed_position_embeddings(params):
    """Copy of params with temporal and spatial position embeddings zeroed."""
    out = dict(params)
    for name in params:
        if name.startswith(("embed.temporal", "embed.spatial")):
            out[name] = np.zeros_like(params[name])
    return out


def _position_matrix(params, config):
    c = config
    hw = c.H * c.W
    pos = np.repeat(params["embed.temporal"], hw, axis=0)
    if c.spatial_embedding == "learned_1d":
        pos = pos + np.tile(params["embed.spatial"], (c.T, 1))
    elif c.spatial_embedding == "learned_2d":
        grid = (
            params["embed.spatial_row"][:, None, :]
            + params["embed.spatial_col"][None, :, :]
        ).reshape(hw, c.d)
        pos = pos + np.tile(grid, (c.T, 1))
    return pos


# --- forward / backward --------------------------------------------------------

def forward(params, config, features, text_tokens=None):
    """Run the predictor; returns (m_hat, cache) with everything backward needs."""
    c = config
    dtype = np.dtype(c.dtype)
    features = np.asarray(features, dtype=dtype)
    if features.shape != (c.T, c.H, c.W, c.D):
        raise ShapeMismatch((c.T, c.H, c.W, c.D), features.shape)
    n_text = 0
    if c.use_text and text_tokens is not None:
        text_tokens = np.asarray(text_tokens, dtype=dtype)
        if text_tokens.ndim != 2 or text_tokens.shape[1] != c.d:
            raise ShapeMismatch(("N", c.d), text_tokens.shape)
        if text_tokens.shape[0] > c.N_text:
            raise ShapeMismatch((c.N_text, c.d), text_tokens.shape)
        n_text = text_tokens.shape[0]
    elif text_tokens is not None:
        raise ShapeMismatch("no text tokens (use_text disabled)", text_tokens.shape)

    tokens = features.reshape(c.n_tokens, c.D)
    x, _ = linear_fwd(tokens, params["proj.w"], params["proj.b"])
    x = x + _position_matrix(params, config).astype(dtype)
    if c.use_text:
        x = x + params["embed.modality"][0]
    rows = [params["cls"][None, :], x]
    if n_text:
        rows.append(
            text_tokens + params["embed.caption"][:n_text] + params["embed.modality"][1]
        )
    seq, ln_in_cache = layernorm_fwd(
        np.concatenate(rows, axis=0), params["ln_in.g"], params["ln_in.b"]
    )

    layers = []
    for i in range(c.L):
        p = f"enc{i}"
        a_in, c_ln1 = layernorm_fwd(seq, params[f"{p}.ln1.g"], params[f"{p}.ln1.b"])
        attn_out, c_mha = mha_fwd(
            a_in,
            params[f"{p}.attn.wq"], params[f"{p}.attn.bq"],
            params[f"{p}.attn.wk"], params[f"{p}.attn.bk"],
            params[f"{p}.attn.wv"], params[f"{p}.attn.bv"],
            params[f"{p}.attn.wo"], params[f"{p}.attn.bo"],
            c.n_heads,
        )
        seq1 = seq + attn_out
        m_in, c_ln2 = layernorm_fwd(seq1, params[f"{p}.ln2.g"], params[f"{p}.ln2.b"])
        h1, c_fc1 = linear_fwd(m_in, params[f"{p}.mlp.w1"], params[f"{p}.mlp.b1"])
        hg, c_act = gelu_fwd(h1)
        mo, c_fc2 = linear_fwd(hg, params[f"{p}.mlp.w2"], params[f"{p}.mlp.b2"])
        layers.append(
            {"ln1": c_ln1, "mha": c_mha, "ln2": c_ln2,
             "fc1": c_fc1, "act": c_act, "fc2": c_fc2}
        )
        seq = seq1 + mo

    seq_f, ln_f_cache = layernorm_fwd(seq, params["ln_f.g"], params["ln_f.b"])
    h0 = seq_f[0:1]
    hh, c_h1 = linear_fwd(h0, params["head.w1"], params["head.b1"])
    hg, c_hact = gelu_fwd(hh)
    out, c_h2 = linear_fwd(hg, params["head.w2"], params["head.b2"])
    m_hat = float(out[0, 0])

    cache = {
        "tokens": tokens,
        "text_tokens": text_tokens if n_text else None,
        "n_text": n_text,
        "h_cls": seq_f[0].copy(),  # pre-classifier representation
        "seq_len": seq.shape[0],
        "ln_in": ln_in_cache,
        "layers": layers,
        "ln_f": ln_f_cache,
        "head": (c_h1, c_hact, c_h2),
        "attn_probs": layers[-1]["mha"]["probs"],
        "attn_logits": layers[-1]["mha"]["logits"],
    }
    return m_hat, cache


def _backward(params, config, cache, d_mhat, grads):
    """Accumulate parameter gradients for one video into `grads`."""
    c = config
    c_h1, c_hact, c_h2 = cache["head"]
    dout = np.array([[d_mhat]], dtype=np.dtype(c.dtype))
    dhg, dw2, db2 = linear_bwd(dout, c_h2, params["head.w2"])
    grads["head.w2"] += dw2
    grads["head.b2"] += db2
    dhh = gelu_bwd(dhg, c_hact)
    dh0, dw1, db1 = linear_bwd(dhh, c_h1, params["head.w1"])
    grads["head.w1"] += dw1
    grads["head.b1"] += db1

    dseq_f = np.zeros((cache["seq_len"], c.d), dtype=np.dtype(c.dtype))
    dseq_f[0] = dh0[0]
    dseq, dgf, dbf = layernorm_bwd(dseq_f, cache["ln_f"])
    grads["ln_f.g"] += dgf
    grads["ln_f.b"] += dbf

    for i in reversed(range(c.L)):
        p = f"enc{i}"
        lay = cache["layers"][i]
        dhg_m, dw2m, db2m = linear_bwd(dseq, lay["fc2"], params[f"{p}.mlp.w2"])
        grads[f"{p}.mlp.w2"] += dw2m
        grads[f"{p}.mlp.b2"] += db2m
        dh1 = gelu_bwd(dhg_m, lay["act"])
        dm_in, dw1m, db1m = linear_bwd(dh1, lay["fc1"], params[f"{p}.mlp.w1"])
        grads[f"{p}.mlp.w1"] += dw1m
        grads[f"{p}.mlp.b1"] += db1m
        dseq1, dg2, db2_ = layernorm_bwd(dm_in, lay["ln2"])
        dseq1 = dseq1 + dseq

        da_in, attn_grads = mha_bwd(
            dseq1, lay["mha"],
            params[f"{p}.attn.wq"], params[f"{p}.attn.wk"],
            params[f"{p}.attn.wv"], params[f"{p}.attn.wo"],
        )
        for k, v in attn_grads.items():
            grads[f"{p}.attn.{k}"] += v
        dseq_pre, dg1, db1_ = layernorm_bwd(da_in, lay["ln1"])
        grads[f"{p}.ln2.g"] += dg2
        grads[f"{p}.ln2.b"] += db2_
        grads[f"{p}.ln1.g"] += dg1
        grads[f"{p}.ln1.b"] += db1_
        dseq = dseq_pre + dseq1

    dseq0, dg_in, db_in = layernorm_bwd(dseq, cache["ln_in"])
    grads["ln_in.g"] += dg_in
    grads["ln_in.b"] += db_in

    grads["cls"] += dseq0[0]
    n_text = cache["n_text"]
    dx = dseq0[1 : 1 + c.n_tokens]
    if n_text:
        dtxt = dseq0[1 + c.n_tokens :]
        grads["embed.caption"][:n_text] += dtxt
        grads["embed.modality"][1] += dtxt.sum(axis=0)
        grads["embed.modality"][0] += dx.sum(axis=0)

    hw = c.H * c.W
    if config.temporal_embedding == "learnable":
        grads["embed.temporal"] += dx.reshape(c.T, hw, c.d).sum(axis=1)
    if c.spatial_embedding == "learned_1d":
        grads["embed.spatial"] += dx.reshape(c.T, hw, c.d).sum(axis=0)
    elif c.spatial_embedding == "learned_2d":
        dgrid = dx.reshape(c.T, c.H, c.W, c.d)
        grads["embed.spatial_row"] += dgrid.sum(axis=(0, 2))
        grads["embed.spatial_col"] += dgrid.sum(axis=(0, 1))

    _, dwp, dbp = linear_bwd(dx, cache["tokens"], params["proj.w"])
    grads["proj.w"] += dwp
    grads["proj.b"] += dbp


def loss_and_grads(params, config, batch):
    """Mean squared error over a batch plus analytic parameter gradients.

    batch items are (features, score) or (features, score, text_tokens).
    """
    if not batch:
        raise ValueError("empty batch")
    dtype = np.dtype(config.dtype)
    grads = {name: np.zeros_like(params[name], dtype=dtype)
             for name in trainable_names(config)}
    loss = 0.0
    n = len(batch)
    for item in batch:
        features, m = item[0], item[1]
        text = item[2] if len(item) > 2 else None
        m_hat, cache = forward(params, config, features, text)
        err = m_hat - float(m)
        loss += err * err / n
        _backward(params, config, cache, 2.0 * err / n, grads)
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"loss = {loss}")
    return loss, grads


# --- attention extraction ------------------------------------------------------

def extract_attention(cache, config):
    """CLS attention of the last layer: head-averaged, self entry dropped.

    Text entries (when present) are excluded before renormalizing, so alpha
    always covers exactly the T*H*W visual tokens.
    """
    if not isinstance(cache, dict) or "attn_probs" not in cache:
        raise MissingCache("forward cache with attention probabilities required")
    c = config
    row = cache["attn_probs"][:, 0, :].mean(axis=0)
    alpha = row[1 : 1 + c.n_tokens].astype(np.float64)
    alpha = alpha / alpha.sum()
    frames = alpha.reshape(c.T, c.H, c.W)
    maps = np.stack(
        [kernels.pyramid_expand_to(frames[t], MAP_SIZE, MAP_SIZE) for t in range(c.T)]
    )
    return AttentionResult(alpha, maps, frames.sum(axis=(1, 2)))


def predict(params, config, features, text_tokens=None):
    """Score one video, sampling the middle frame of each segment if needed."""
    features = np.asarray(features)
    if features.ndim != 4:
        raise ShapeMismatch(("n_frames", config.H, config.W, config.D), features.shape)
    if features.shape[0] != config.T:
        idx = sample_segments(features.shape[0], config.T, "middle_of_segment")
        features = features[idx]
    m_hat, _ = forward(params, config, features, text_tokens)
    return m_hat


# --- checkpoints ---------------------------------------------------------------

def save_checkpoint(params, config, path):
    from ..io import dump_json, write_archive

    write_archive(params, path)
    dump_json({"model_config": config.to_dict()}, str(path) + ".json")


def load_checkpoint(path):
    import json

    from ..io import read_archive

    tensors = read_archive(path)
    with open(str(path) + ".json") as fp:
        config = ModelConfig.from_dict(json.load(fp)["model_config"])
    dtype = np.dtype(config.dtype)
    params = {k: v.astype(dtype) for k, v in tensors.items()}
    return params, config
