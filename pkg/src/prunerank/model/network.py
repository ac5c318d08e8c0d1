"""The encoder: forward pass, joint loss, and exact analytic gradients.

A small bidirectional transformer (pre-norm blocks, GELU feed-forward, learned
absolute positions) with two linear heads: a per-token pruning head and a
scalar ranking head read at the BOS position. Both heads emit sigmoid
probabilities. Everything is plain numpy in float64; the backward pass is
hand-derived and is validated against central finite differences in the test
suite, so any change here must keep forward and backward in lockstep.

The joint objective for one example is

    loss = sum_{k in mask} BCE(y_k, p_k) + lam * (s - z0)^2

where p_k are pruning probabilities at labeled positions, y_k the sentence
labels broadcast to those positions, s the teacher score and z0 the ranking
probability. Batch loss is the mean of per-example losses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..segmentation import TokenizedExample
from .config import ModelConfig

LN_EPS = 1e-5
PROB_CLAMP = 1e-7
_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_K = 0.044715

Params = dict[str, np.ndarray]


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

def param_shapes(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Canonical tensor order; checkpoints and Adam state follow it."""
    d, f = cfg.d_model, cfg.d_ffn
    shapes: list[tuple[str, tuple[int, ...]]] = [
        ("tok_emb", (cfg.vocab_size, d)),
        ("pos_emb", (cfg.max_len, d)),
    ]
    for i in range(cfg.n_layers):
        prefix = f"layers.{i}"
        shapes += [
            (f"{prefix}.attn.wq", (d, d)), (f"{prefix}.attn.bq", (d,)),
            (f"{prefix}.attn.wk", (d, d)), (f"{prefix}.attn.bk", (d,)),
            (f"{prefix}.attn.wv", (d, d)), (f"{prefix}.attn.bv", (d,)),
            (f"{prefix}.attn.wo", (d, d)), (f"{prefix}.attn.bo", (d,)),
            (f"{prefix}.ln1.g", (d,)), (f"{prefix}.ln1.b", (d,)),
            (f"{prefix}.ffn.w1", (d, f)), (f"{prefix}.ffn.b1", (f,)),
            (f"{prefix}.ffn.w2", (f, d)), (f"{prefix}.ffn.b2", (d,)),
            (f"{prefix}.ln2.g", (d,)), (f"{prefix}.ln2.b", (d,)),
        ]
    shapes += [
        ("ln_f.g", (d,)), ("ln_f.b", (d,)),
        ("prune_head.w", (d,)), ("prune_head.b", (1,)),
        ("rank_head.w", (d,)), ("rank_head.b", (1,)),
    ]
    return shapes


def init_params(cfg: ModelConfig, seed: int) -> Params:
    """Seeded init: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) for embeddings
    and weight matrices, zeros for biases, ones for layer-norm gains.

    Two choices matter for trainability from scratch at this scale. Position
    embeddings start at zero so token-identity geometry is not masked by
    position noise (they are still learned). Each layer's key projection
    starts as a copy of its query projection, which biases initial attention
    toward same-content matching; both matrices train independently
    afterwards."""
    rng = np.random.default_rng(seed)
    params: Params = {}
    for name, shape in param_shapes(cfg):
        leaf = name.rsplit(".", 1)[-1]
        if leaf == "g":
            params[name] = np.ones(shape)
        elif leaf in ("b", "bq", "bk", "bv", "bo", "b1", "b2"):
            params[name] = np.zeros(shape)
        elif name == "pos_emb":
            params[name] = np.zeros(shape)
        else:
            fan_in = shape[1] if name == "tok_emb" else shape[0]
            bound = 1.0 / math.sqrt(fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape)
    for i in range(cfg.n_layers):
        params[f"layers.{i}.attn.wk"] = params[f"layers.{i}.attn.wq"].copy()
    return params


def clone_params(params: Params) -> Params:
    return {name: tensor.copy() for name, tensor in params.items()}


def zeros_like_params(params: Params) -> Params:
    return {name: np.zeros_like(tensor) for name, tensor in params.items()}


# ---------------------------------------------------------------------------
# Forward
# ---------------------------------------------------------------------------

@dataclass
class ForwardOutput:
    token_probs: np.ndarray  # (L,) pruning probabilities
    rank_score: float        # ranking probability read at BOS


def _layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = centered * inv
    return g * xhat + b, (xhat, inv)


def _layer_norm_backward(dy: np.ndarray, g: np.ndarray, cache) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xhat, inv = cache
    dg = (dy * xhat).sum(axis=0)
    db = dy.sum(axis=0)
    dxhat = dy * g
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dg, db


def _gelu(x: np.ndarray):
    u = _GELU_C * (x + _GELU_K * x ** 3)
    t = np.tanh(u)
    return 0.5 * x * (1.0 + t), t


def _gelu_backward(dy: np.ndarray, x: np.ndarray, t: np.ndarray) -> np.ndarray:
    du = _GELU_C * (1.0 + 3.0 * _GELU_K * x ** 2)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * du)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def forward(params: Params, cfg: ModelConfig, example: TokenizedExample,
            want_cache: bool = False):
    """Run the encoder over one example.

    Returns ForwardOutput, or (ForwardOutput, cache) when `want_cache` is set;
    the cache holds every intermediate `backward` needs."""
    ids = np.asarray(example.token_ids, dtype=np.int64)
    L = ids.shape[0]
    if L > cfg.max_len:
        raise ValueError(f"sequence length {L} exceeds max_len {cfg.max_len}")
    if ids.min(initial=0) < 0 or ids.max(initial=0) >= cfg.vocab_size:
        raise ValueError("token id out of vocabulary range")

    h = cfg.n_heads
    dh = cfg.d_model // h
    scale = 1.0 / math.sqrt(dh)

    x = params["tok_emb"][ids] + params["pos_emb"][:L]
    cache: dict = {"ids": ids, "L": L}
    layer_caches = []

    for i in range(cfg.n_layers):
        p = f"layers.{i}"
        lc: dict = {"x_in": x}
        a_in, ln1_cache = _layer_norm(x, params[f"{p}.ln1.g"], params[f"{p}.ln1.b"])
        q = a_in @ params[f"{p}.attn.wq"] + params[f"{p}.attn.bq"]
        k = a_in @ params[f"{p}.attn.wk"] + params[f"{p}.attn.bk"]
        v = a_in @ params[f"{p}.attn.wv"] + params[f"{p}.attn.bv"]
        qh = q.reshape(L, h, dh).transpose(1, 0, 2)
        kh = k.reshape(L, h, dh).transpose(1, 0, 2)
        vh = v.reshape(L, h, dh).transpose(1, 0, 2)
        scores = (qh @ kh.transpose(0, 2, 1)) * scale
        scores -= scores.max(axis=-1, keepdims=True)
        exps = np.exp(scores)
        attn = exps / exps.sum(axis=-1, keepdims=True)
        ctx = attn @ vh
        merged = ctx.transpose(1, 0, 2).reshape(L, cfg.d_model)
        attn_out = merged @ params[f"{p}.attn.wo"] + params[f"{p}.attn.bo"]
        x = x + attn_out

        lc.update(a_in=a_in, ln1_cache=ln1_cache, qh=qh, kh=kh, vh=vh,
                  attn=attn, merged=merged, x_mid=x)
        f_in, ln2_cache = _layer_norm(x, params[f"{p}.ln2.g"], params[f"{p}.ln2.b"])
        pre = f_in @ params[f"{p}.ffn.w1"] + params[f"{p}.ffn.b1"]
        act, tanh_cache = _gelu(pre)
        ffn_out = act @ params[f"{p}.ffn.w2"] + params[f"{p}.ffn.b2"]
        x = x + ffn_out
        lc.update(f_in=f_in, ln2_cache=ln2_cache, pre=pre, act=act,
                  tanh_cache=tanh_cache)
        layer_caches.append(lc)

    final, lnf_cache = _layer_norm(x, params["ln_f.g"], params["ln_f.b"])
    token_logits = final @ params["prune_head.w"] + params["prune_head.b"][0]
    rank_logit = float(final[0] @ params["rank_head.w"] + params["rank_head.b"][0])
    token_probs = _sigmoid(token_logits)
    rank_score = float(_sigmoid(rank_logit))

    output = ForwardOutput(token_probs=token_probs, rank_score=rank_score)
    if not want_cache:
        return output
    cache.update(layers=layer_caches, final=final, lnf_cache=lnf_cache,
                 token_probs=token_probs, rank_score=rank_score)
    return output, cache


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------

def position_labels(example: TokenizedExample, sentence_labels: list[bool]) -> np.ndarray:
    """Per-position target vector: the sentence label broadcast over its span
    (token-level) or placed at its SENT marker (sentence-marker). Positions
    outside the label mask carry zeros that the loss never reads. Labels for
    sentences dropped by truncation are ignored."""
    y = np.zeros(len(example.token_ids))
    for idx, (start, end) in enumerate(example.sentence_spans):
        if idx >= len(sentence_labels):
            break
        value = 1.0 if sentence_labels[idx] else 0.0
        if example.mode == "sentence-marker":
            y[start] = value
        else:
            y[start:end] = value
    return y


def joint_loss(token_probs: np.ndarray, rank_score: float, y: np.ndarray,
               mask: np.ndarray, teacher: float, lam: float) -> tuple[float, float, float]:
    """Return (label_loss, rank_loss, total). Probabilities are clamped to
    [1e-7, 1-1e-7] inside the BCE only."""
    p = np.clip(token_probs[mask], PROB_CLAMP, 1.0 - PROB_CLAMP)
    ym = y[mask]
    label_loss = float(-(ym * np.log(p) + (1.0 - ym) * np.log(1.0 - p)).sum())
    rank_loss = float((teacher - rank_score) ** 2)
    return label_loss, rank_loss, label_loss + lam * rank_loss


# ---------------------------------------------------------------------------
# Backward
# ---------------------------------------------------------------------------

def backward(params: Params, cfg: ModelConfig, example: TokenizedExample,
             cache: dict, y: np.ndarray, mask: np.ndarray, teacher: float,
             loss_scale: float = 1.0) -> Params:
    """Exact gradients of `loss_scale * joint_loss` for one example."""
    L = cache["L"]
    h = cfg.n_heads
    dh = cfg.d_model // h
    scale = 1.0 / math.sqrt(dh)
    grads: Params = {}

    probs = cache["token_probs"]
    # BCE w.r.t. the logit is (p - y) wherever the clamp is inactive; inside
    # the clamp the loss is locally constant, so the gradient is exactly zero.
    active = mask & (probs > PROB_CLAMP) & (probs < 1.0 - PROB_CLAMP)
    d_token_logits = np.where(active, probs - y, 0.0) * loss_scale

    z0 = cache["rank_score"]
    d_rank_logit = loss_scale * cfg.lam * 2.0 * (z0 - teacher) * z0 * (1.0 - z0)

    final = cache["final"]
    grads["prune_head.w"] = final.T @ d_token_logits
    grads["prune_head.b"] = np.array([d_token_logits.sum()])
    grads["rank_head.w"] = d_rank_logit * final[0]
    grads["rank_head.b"] = np.array([d_rank_logit])

    d_final = np.outer(d_token_logits, params["prune_head.w"])
    d_final[0] += d_rank_logit * params["rank_head.w"]

    dx, grads["ln_f.g"], grads["ln_f.b"] = _layer_norm_backward(
        d_final, params["ln_f.g"], cache["lnf_cache"])

    for i in reversed(range(cfg.n_layers)):
        p = f"layers.{i}"
        lc = cache["layers"][i]

        # FFN sublayer: x = x_mid + ffn(LN2(x_mid))
        d_ffn_out = dx
        grads[f"{p}.ffn.w2"] = lc["act"].T @ d_ffn_out
        grads[f"{p}.ffn.b2"] = d_ffn_out.sum(axis=0)
        d_act = d_ffn_out @ params[f"{p}.ffn.w2"].T
        d_pre = _gelu_backward(d_act, lc["pre"], lc["tanh_cache"])
        grads[f"{p}.ffn.w1"] = lc["f_in"].T @ d_pre
        grads[f"{p}.ffn.b1"] = d_pre.sum(axis=0)
        d_f_in = d_pre @ params[f"{p}.ffn.w1"].T
        d_x_mid, grads[f"{p}.ln2.g"], grads[f"{p}.ln2.b"] = _layer_norm_backward(
            d_f_in, params[f"{p}.ln2.g"], lc["ln2_cache"])
        dx = dx + d_x_mid

        # Attention sublayer: x_mid = x_in + attn(LN1(x_in))
        d_attn_out = dx
        grads[f"{p}.attn.wo"] = lc["merged"].T @ d_attn_out
        grads[f"{p}.attn.bo"] = d_attn_out.sum(axis=0)
        d_merged = d_attn_out @ params[f"{p}.attn.wo"].T
        d_ctx = d_merged.reshape(L, h, dh).transpose(1, 0, 2)

        attn, vh, qh, kh = lc["attn"], lc["vh"], lc["qh"], lc["kh"]
        d_attn = d_ctx @ vh.transpose(0, 2, 1)
        d_vh = attn.transpose(0, 2, 1) @ d_ctx
        inner = (d_attn * attn).sum(axis=-1, keepdims=True)
        d_scores = attn * (d_attn - inner)
        d_qh = (d_scores @ kh) * scale
        d_kh = (d_scores.transpose(0, 2, 1) @ qh) * scale

        d_q = d_qh.transpose(1, 0, 2).reshape(L, cfg.d_model)
        d_k = d_kh.transpose(1, 0, 2).reshape(L, cfg.d_model)
        d_v = d_vh.transpose(1, 0, 2).reshape(L, cfg.d_model)

        a_in = lc["a_in"]
        grads[f"{p}.attn.wq"] = a_in.T @ d_q
        grads[f"{p}.attn.bq"] = d_q.sum(axis=0)
        grads[f"{p}.attn.wk"] = a_in.T @ d_k
        grads[f"{p}.attn.bk"] = d_k.sum(axis=0)
        grads[f"{p}.attn.wv"] = a_in.T @ d_v
        grads[f"{p}.attn.bv"] = d_v.sum(axis=0)
        d_a_in = (d_q @ params[f"{p}.attn.wq"].T
                  + d_k @ params[f"{p}.attn.wk"].T
                  + d_v @ params[f"{p}.attn.wv"].T)
        d_x_in, grads[f"{p}.ln1.g"], grads[f"{p}.ln1.b"] = _layer_norm_backward(
            d_a_in, params[f"{p}.ln1.g"], lc["ln1_cache"])
        dx = dx + d_x_in

    grads["tok_emb"] = np.zeros_like(params["tok_emb"])
    np.add.at(grads["tok_emb"], cache["ids"], dx)
    grads["pos_emb"] = np.zeros_like(params["pos_emb"])
    grads["pos_emb"][:L] = dx
    return grads


# ---------------------------------------------------------------------------
# Batch API
# ---------------------------------------------------------------------------

@dataclass
class TrainItem:
    """One encodable training example with aligned targets."""

    tokens: TokenizedExample
    y: np.ndarray
    mask: np.ndarray
    teacher: float


def make_train_item(tokens: TokenizedExample, sentence_labels: list[bool],
                    teacher: float) -> TrainItem:
    return TrainItem(
        tokens=tokens,
        y=position_labels(tokens, sentence_labels),
        mask=np.asarray(tokens.label_mask, dtype=bool),
        teacher=teacher,
    )


def batch_gradients(params: Params, cfg: ModelConfig,
                    batch: list[TrainItem]) -> tuple[Params, float, float, float]:
    """Gradients of the mean per-example joint loss over `batch`.

    Returns (grads, mean label loss, mean rank loss, mean total)."""
    if not batch:
        raise ValueError("batch must be non-empty")
    inv = 1.0 / len(batch)
    total_grads: Params | None = None
    sum_label = sum_rank = sum_total = 0.0
    for item in batch:
        _, cache = forward(params, cfg, item.tokens, want_cache=True)
        label_loss, rank_loss, total = joint_loss(
            cache["token_probs"], cache["rank_score"], item.y, item.mask,
            item.teacher, cfg.lam)
        sum_label += label_loss
        sum_rank += rank_loss
        sum_total += total
        grads = backward(params, cfg, item.tokens, cache, item.y, item.mask,
                         item.teacher, loss_scale=inv)
        if total_grads is None:
            total_grads = grads
        else:
            for name, g in grads.items():
                total_grads[name] += g
    assert total_grads is not None
    return total_grads, sum_label * inv, sum_rank * inv, sum_total * inv
