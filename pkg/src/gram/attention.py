"""Multi-head attention over graphs with shortest-path-indexed bias terms.

Scores between query i and key j add learned bias vectors picked by the
(clipped) graph distance of the underlying node pair:

    s_ij = d_K^(-1/2) * (Wq q_i + bq[d_ij])^T (Wk k_j + bk[d_ij])
    o_i  = sum_j softmax(s_i)_j * (Wv v_j + bv[d_ij])

With all bias tables zero this reduces to ordinary multi-head attention.
Works both as self-attention (feature extraction) and source-target
attention (edge estimation); the caller supplies the per-pair distance
indices and the attend mask through an AttentionContext.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor


class AttentionError(ValueError):
    """Contract violation in an attention call."""


@dataclass
class AttentionContext:
    """Per-(query, key) distance bucket indices and attend mask."""
    dist_idx: np.ndarray   # (nq, nk) int, values in [0, cap + 1]
    allowed: np.ndarray    # (nq, nk) bool

    def additive_mask(self) -> np.ndarray:
        return np.where(self.allowed, 0.0, T.MASK_NEG)


def context_from_distances(dist_idx: np.ndarray, max_attend: int | None = None) -> AttentionContext:
    """Self-attention context: attend where the distance bucket does not
    exceed max_attend (everything when None)."""
    dist_idx = np.asarray(dist_idx, dtype=np.int64)
    if max_attend is None:
        allowed = np.ones(dist_idx.shape, dtype=bool)
    else:
        allowed = dist_idx <= max_attend
    return AttentionContext(dist_idx, allowed)


@dataclass
class GraphAttentionParams:
    """Per-head projections (d_S x d_in), per-head bias tables
    ((cap + 2) x d_S) indexed by distance bucket, and the shared output
    projection (H * d_S x d_O)."""
    wq: list
    wk: list
    wv: list
    bq: list
    bk: list
    bv: list
    wo: Tensor
    use_bias: bool = True

    @property
    def heads(self) -> int:
        return len(self.wq)

    @property
    def cap(self) -> int:
        return self.bq[0].data.shape[0] - 2


def bias_lookup(table: Tensor, dist_index) -> Tensor:
    """Rows of a bias table for the given distance bucket indices; distances
    beyond the table's cap must already be clipped to the final bucket."""
    idx = np.asarray(dist_index, dtype=np.int64).reshape(-1)
    n_rows = table.data.shape[0]
    if len(idx) and idx.max() >= n_rows:
        raise AttentionError(f"distance index {int(idx.max())} exceeds bucket count {n_rows}")
    if len(idx) and idx.min() < 0:
        raise AttentionError("negative distance index")
    return T.rows(table, idx)


def _head(q: Tensor, k: Tensor, v: Tensor, h: int, ctx: AttentionContext,
          p: GraphAttentionParams, addmask: np.ndarray, scale: float) -> Tensor:
    nq, nk = ctx.dist_idx.shape
    d_s = p.wq[h].data.shape[0]
    qh = T.matmul(q, T.transpose(p.wq[h]))
    kh = T.matmul(k, T.transpose(p.wk[h]))
    vh = T.matmul(v, T.transpose(p.wv[h]))
    scores = T.matmul(qh, T.transpose(kh))
    if p.use_bias:
        flat = ctx.dist_idx.reshape(-1)
        bq = T.reshape(bias_lookup(p.bq[h], flat), (nq, nk, d_s))
        bk = T.reshape(bias_lookup(p.bk[h], flat), (nq, nk, d_s))
        bv = T.reshape(bias_lookup(p.bv[h], flat), (nq, nk, d_s))
        s2 = T.sum_along(T.mul(T.reshape(qh, (nq, 1, d_s)), bk), 2)
        s3 = T.sum_along(T.mul(bq, T.reshape(kh, (1, nk, d_s))), 2)
        s4 = T.sum_along(T.mul(bq, bk), 2)
        scores = T.add(T.add(scores, s2), T.add(s3, s4))
    scores = T.mul(scores, T.const(scale))
    weights = T.softmax(scores, additive_mask=addmask)
    out = T.matmul(weights, vh)
    if p.use_bias:
        out = T.add(out, T.sum_along(T.mul(T.reshape(weights, (nq, nk, 1)), bv), 1))
    return out


def g_multi_head(q: Tensor, k: Tensor, v: Tensor, ctx: AttentionContext,
                 p: GraphAttentionParams, on_empty: str = "error") -> Tensor:
    """Multi-head graph attention; heads are concatenated and projected.

    The scale factor is d_K^(-1/2) with d_K the key input width, applied
    exactly once per score.  Query rows whose mask admits no key raise an
    AttentionError unless on_empty="zero", in which case those output rows
    are exactly zero (the edge estimator's empty-history convention).
    """
    if k.data.shape[0] != v.data.shape[0]:
        raise AttentionError(f"key rows {k.data.shape[0]} != value rows {v.data.shape[0]}")
    nq, nk = q.data.shape[0], k.data.shape[0]
    if ctx.dist_idx.shape != (nq, nk) or ctx.allowed.shape != (nq, nk):
        raise AttentionError(f"context shape {ctx.dist_idx.shape} does not match ({nq}, {nk})")
    has_key = ctx.allowed.any(axis=1)
    zero_rows = None
    if not has_key.all():
        if on_empty != "zero":
            raise AttentionError("query row with no attendable key")
        # give empty rows a placeholder key for a well-defined softmax, then
        # zero their outputs below
        allowed = ctx.allowed.copy()
        allowed[~has_key, 0] = True
        ctx = AttentionContext(ctx.dist_idx, allowed)
        zero_rows = has_key.astype(np.float64)[:, None]
    addmask = ctx.additive_mask()
    scale = 1.0 / np.sqrt(k.data.shape[1])
    heads = [_head(q, k, v, h, ctx, p, addmask, scale) for h in range(p.heads)]
    out = T.matmul(T.concat(heads, axis=-1), p.wo)
    if zero_rows is not None:
        out = T.mul(out, T.const(zero_rows))
    return out


@dataclass
class SublayerParams:
    """Self-attention sublayer: attention and feedforward, each wrapped in a
    residual connection followed by layer normalization."""
    attn: GraphAttentionParams
    fnn_w1: Tensor
    fnn_b1: Tensor
    fnn_w2: Tensor
    fnn_b2: Tensor
    ln1_gain: Tensor
    ln1_bias: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor


def attention_sublayer(h_in: Tensor, ctx: AttentionContext, p: SublayerParams) -> Tensor:
    """LayerNorm(x + SelfAttention(x)) followed by LayerNorm(y + FNN(y))."""
    att = g_multi_head(h_in, h_in, h_in, ctx, p.attn)
    x = T.layer_norm(T.add(h_in, att), p.ln1_gain, p.ln1_bias)
    hidden = T.relu(T.add(T.matmul(x, p.fnn_w1), p.fnn_b1))
    fnn = T.add(T.matmul(hidden, p.fnn_w2), p.fnn_b2)
    return T.layer_norm(T.add(x, fnn), p.ln2_gain, p.ln2_bias)
