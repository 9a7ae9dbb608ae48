"""Independent reference implementations used as test oracles.

Everything here is written with explicit loops and scalar math, on purpose,
so that a bug in the package cannot cancel against the same bug here. Tests
compare package outputs against these.
"""

from __future__ import annotations

import math

import numpy as np

from dppselect import ArticleRecord, DppLabels, ImageRecord, unit_normalize


# ---------------------------------------------------------------- linalg

def cofactor_det(a) -> float:
    """Determinant by recursive cofactor expansion (small matrices only)."""
    a = [list(map(float, row)) for row in np.asarray(a)]
    n = len(a)
    if n == 0:
        return 1.0
    if n == 1:
        return a[0][0]
    total = 0.0
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in a[1:]]
        total += (-1.0) ** j * a[0][j] * cofactor_det(minor)
    return total


# ---------------------------------------------------------------- student

def erf_gelu(x: float) -> float:
    return 0.5 * x * (1.0 + math.erf(x / math.sqrt(2.0)))


def mlp_logits_loops(model, rows) -> list:
    """Eval-mode student logits via explicit scalar loops."""
    out = []
    for row in np.asarray(rows, dtype=np.float64):
        hidden = []
        for h in range(model.hidden_dim):
            acc = float(model.b1[h])
            for j in range(row.size):
                acc += float(model.W1[h, j]) * float(row[j])
            hidden.append(erf_gelu(acc))
        z = float(model.b2)
        for h in range(model.hidden_dim):
            z += float(model.W2[h]) * hidden[h]
        out.append(z)
    return out


def logistic_corpus(n_articles: int, k_images: int, dim: int, mu: float,
                    seed: int, sum_tol: float = 0.1):
    """Articles whose target marginals follow one fixed logistic score.

    pi_i = sigmoid(scale * (u . v_i)) for a fixed unit direction u, so a
    scorer of the embeddings alone can realize the targets exactly. Target
    vectors are drawn and embeddings constructed to hit them; articles are
    rejected until the per-article sum lands within ``sum_tol`` of ``mu``,
    keeping the cardinality penalty consistent with the targets.
    """
    rng = np.random.default_rng(seed)
    scale = 4.0
    u = unit_normalize(rng.normal(size=dim))
    dataset = []
    for a in range(n_articles):
        while True:
            targets = rng.uniform(0.2, 0.9, size=k_images)
            if abs(targets.sum() - mu) <= sum_tol:
                break
        images = []
        for k, pi_k in enumerate(targets):
            c = math.log(pi_k / (1.0 - pi_k)) / scale
            noise = rng.normal(size=dim)
            noise -= (noise @ u) * u
            w = unit_normalize(noise)
            v = c * u + math.sqrt(1.0 - c * c) * w
            images.append(ImageRecord(id=f"s{a}-i{k}", embedding=v))
        article = ArticleRecord(
            id=f"s{a}",
            text_embedding=unit_normalize(rng.normal(size=dim)),
            images=tuple(images),
        )
        dataset.append((article, DppLabels(t_star=1.0, pi=targets)))
    return dataset, (u, scale)


# ---------------------------------------------------------------- fusion

def layer_norm_loops(x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    out = np.zeros_like(x)
    for i, row in enumerate(x):
        mean = sum(row) / row.size
        var = sum((v - mean) ** 2 for v in row) / row.size
        for j, v in enumerate(row):
            out[i, j] = (v - mean) / math.sqrt(var + eps)
    return out


def softmax_row(scores: list) -> list:
    m = max(s for s in scores if s != -math.inf)
    exps = [0.0 if s == -math.inf else math.exp(s - m) for s in scores]
    z = sum(exps)
    return [e / z for e in exps]


def attention_loops(q_rows, k_rows, v_rows, n_heads: int,
                    causal: bool = False) -> np.ndarray:
    """Multi-head scaled dot-product attention, one scalar at a time."""
    q_rows = np.asarray(q_rows, dtype=np.float64)
    k_rows = np.asarray(k_rows, dtype=np.float64)
    v_rows = np.asarray(v_rows, dtype=np.float64)
    t_q, d = q_rows.shape
    t_k = k_rows.shape[0]
    dk = d // n_heads
    out = np.zeros((t_q, d))
    for head in range(n_heads):
        sl = slice(head * dk, (head + 1) * dk)
        for i in range(t_q):
            scores = []
            for j in range(t_k):
                if causal and j > i:
                    scores.append(-math.inf)
                else:
                    dot = sum(q_rows[i, sl][m] * k_rows[j, sl][m] for m in range(dk))
                    scores.append(dot / math.sqrt(dk))
            weights = softmax_row(scores)
            for j in range(t_k):
                for m in range(dk):
                    out[i, head * dk + m] += weights[j] * v_rows[j, sl][m]
    return out


def mha_loops(x_q, x_kv, w, n_heads: int, causal: bool = False) -> np.ndarray:
    q = np.asarray(x_q) @ np.asarray(w.wq).T
    k = np.asarray(x_kv) @ np.asarray(w.wk).T
    v = np.asarray(x_kv) @ np.asarray(w.wv).T
    return attention_loops(q, k, v, n_heads, causal) @ np.asarray(w.wo).T


def mlp_loops(x, w) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    pre = x @ np.asarray(w.w1).T + np.asarray(w.b1)
    act = np.vectorize(erf_gelu)(pre)
    return act @ np.asarray(w.w2).T + np.asarray(w.b2)


def decoder_block_loops(h, blk, n_heads: int) -> np.ndarray:
    normed = layer_norm_loops(h)
    h = h + mha_loops(normed, normed, blk.self_attn, n_heads, causal=True)
    h = h + mlp_loops(layer_norm_loops(h), blk.mlp)
    return h


def gated_xattn_loops(h, v_hat, w, gate: float, n_heads: int) -> np.ndarray:
    q = np.asarray(h) @ np.asarray(w.wq).T
    k = np.asarray(v_hat) @ np.asarray(w.wk).T
    v = np.asarray(v_hat) @ np.asarray(w.wv).T
    return h + math.tanh(gate) * attention_loops(q, k, v, n_heads)


def fused_forward_loops(text, visuals, stack, config) -> np.ndarray:
    """Step-by-step trace of the fused decoder, independent of the package."""
    h = np.asarray(text, dtype=np.float64)
    for layer in range(1, config.n_layers + 1):
        if layer in config.inject_layers:
            h = gated_xattn_loops(h, visuals[layer], stack.xattn[layer],
                                  stack.gates[layer], config.n_heads)
        h = decoder_block_loops(h, stack.decoder_blocks[layer - 1], config.n_heads)
    return h


# ---------------------------------------------------------------- records

def random_unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    return unit_normalize(rng.normal(size=dim))


def make_article(rng: np.random.Generator, n_images: int, dim: int,
                 art_id: str = "a0", gold: bool = False) -> ArticleRecord:
    images = []
    for k in range(n_images):
        flag = bool(rng.random() < 0.5) if gold else None
        images.append(ImageRecord(id=f"{art_id}-i{k}",
                                  embedding=random_unit(rng, dim), gold=flag))
    return ArticleRecord(id=art_id, text_embedding=random_unit(rng, dim),
                         images=tuple(images))
