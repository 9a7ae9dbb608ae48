"""Toy-scale forward passes for the visual fusion path.

A linear projector lifts patch features into the decoder width, a latent
resampler compresses a variable number of patches into a fixed latent
array, a per-layer visual stack refines those latents once per decoder
layer, and tanh-gated cross-attention injects them into a small causal
decoder. Forward passes only; the single learnable scalar of interest is
the raw gate, initialized to exactly zero so the fused stack starts out
bitwise identical to the text-only stack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from .errors import InvalidInput
from .student import gelu

_LN_EPS = 1e-5


@dataclass(frozen=True)
class FusionConfig:
    """Dimensions and depths of the fusion path.

    ``inject_layers`` uses 1-based decoder layer indices and must stay
    within [1, n_layers]; the decoder runs one block per visual layer.
    """

    d_v: int
    d: int
    n_latents: int = 32
    sampler_depth: int = 4
    ff_mult: int = 4
    n_layers: int = 24
    inject_layers: tuple = (8, 16, 24)
    n_heads: int = 4

    def __post_init__(self):
        for name in ("d_v", "d", "n_latents", "sampler_depth", "ff_mult",
                     "n_layers", "n_heads"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise InvalidInput(f"{name} must be a positive integer")
        if self.d % self.n_heads != 0:
            raise InvalidInput("d must be divisible by n_heads")
        inject = tuple(int(l) for l in self.inject_layers)
        if len(set(inject)) != len(inject):
            raise InvalidInput("inject_layers must be distinct")
        if any(not 1 <= l <= self.n_layers for l in inject):
            raise InvalidInput("inject_layers must lie in [1, n_layers]")
        object.__setattr__(self, "inject_layers", inject)


@dataclass(frozen=True)
class AttentionWeights:
    """Projection matrices of one multi-head attention: wq/wk/wv map into
    the model width, wo mixes the concatenated heads back."""

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray


@dataclass(frozen=True)
class GateXAttnWeights:
    """Query/key/value maps of a gated cross-attention (no output mix)."""

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray


@dataclass(frozen=True)
class MlpWeights:
    """Two-layer feed-forward weights with a GELU in between."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray


@dataclass(frozen=True)
class SamplerBlock:
    """One resampler step: cross-attention over patches, self-attention
    over latents, then the MLP, each residual."""

    cross_attn: AttentionWeights
    self_attn: AttentionWeights
    mlp: MlpWeights


@dataclass(frozen=True)
class TransformerBlock:
    """Self-attention plus MLP, used by the visual stack and the decoder."""

    self_attn: AttentionWeights
    mlp: MlpWeights


@dataclass(frozen=True)
class FusionStack:
    """All weights of the fusion path for one configuration.

    ``gates`` stores the raw gate scalar per inject layer (the tanh is
    applied at use time), ``xattn`` the matching cross-attention weights,
    and ``decoder_blocks`` the toy causal decoder that consumes the fused
    states.
    """

    projector: np.ndarray
    latents: np.ndarray
    sampler_blocks: tuple
    visual_blocks: tuple
    decoder_blocks: tuple
    gates: Dict[int, float]
    xattn: Dict[int, GateXAttnWeights]


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Shift-stabilized softmax; rows of all -inf are rejected upstream."""
    m = np.max(x, axis=axis, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=axis, keepdims=True)


def layer_norm(x: np.ndarray) -> np.ndarray:
    """Parameter-free layer normalization over the last axis."""
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + _LN_EPS)


def _split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    t, d = x.shape
    return x.reshape(t, n_heads, d // n_heads).transpose(1, 0, 2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    h, t, dk = x.shape
    return x.transpose(1, 0, 2).reshape(t, h * dk)


def _attend(q: np.ndarray, k: np.ndarray, v: np.ndarray, n_heads: int,
            causal: bool) -> np.ndarray:
    qh = _split_heads(q, n_heads)
    kh = _split_heads(k, n_heads)
    vh = _split_heads(v, n_heads)
    dk = qh.shape[-1]
    scores = qh @ kh.transpose(0, 2, 1) / math.sqrt(dk)
    if causal:
        t_q, t_k = scores.shape[1], scores.shape[2]
        mask = np.triu(np.ones((t_q, t_k), dtype=bool), 1)
        scores = np.where(mask, -np.inf, scores)
    return _merge_heads(softmax(scores, axis=-1) @ vh)


def multi_head_attention(x_q: np.ndarray, x_kv: np.ndarray, w: AttentionWeights,
                         n_heads: int, causal: bool = False) -> np.ndarray:
    """Standard multi-head attention with an output projection."""
    out = _attend(x_q @ w.wq.T, x_kv @ w.wk.T, x_kv @ w.wv.T, n_heads, causal)
    return out @ w.wo.T


def _mlp(x: np.ndarray, w: MlpWeights) -> np.ndarray:
    return gelu(x @ w.w1.T + w.b1) @ w.w2.T + w.b2


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    """Fixed sine/cosine position encodings, shape (length, dim)."""
    if length < 1 or dim < 1:
        raise InvalidInput("length and dim must be positive")
    pos = np.arange(length)[:, None]
    idx = np.arange(dim)[None, :]
    angles = pos / np.power(10000.0, 2.0 * (idx // 2) / dim)
    enc = np.where(idx % 2 == 0, np.sin(angles), np.cos(angles))
    return enc


def project(patch_features, projector) -> np.ndarray:
    """Row-wise linear map of patch features into the decoder width."""
    x = np.asarray(patch_features, dtype=np.float64)
    p = np.asarray(projector, dtype=np.float64)
    if x.ndim != 2 or p.ndim != 2 or x.shape[1] != p.shape[1]:
        raise InvalidInput("patch features and projector disagree on d_v")
    return x @ p.T


def perceiver_sample(patch_features, pos_enc, stack: FusionStack,
                     config: FusionConfig) -> np.ndarray:
    """Compress any number of patches into a fixed (n_latents, d) array.

    Each depth step cross-attends the latents over the position-encoded
    patches, self-attends the latents, and applies the MLP, all residual,
    so zeroed weights leave the initial latents untouched.
    """
    x = np.asarray(patch_features, dtype=np.float64)
    pe = np.asarray(pos_enc, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != config.d_v:
        raise InvalidInput(f"patch features must be (t_v, {config.d_v})")
    if pe.shape != x.shape:
        raise InvalidInput("position encodings must match the patch features")
    if len(stack.sampler_blocks) != config.sampler_depth:
        raise InvalidInput("stack depth disagrees with the configuration")
    keys = x + pe
    lat = stack.latents.copy()
    for blk in stack.sampler_blocks:
        lat = lat + multi_head_attention(lat, keys, blk.cross_attn, config.n_heads)
        lat = lat + multi_head_attention(lat, lat, blk.self_attn, config.n_heads)
        lat = lat + _mlp(lat, blk.mlp)
    return lat


def visual_stack_forward(latents, stack: FusionStack, config: FusionConfig) -> list:
    """Per-decoder-layer visual states.

    Returns a list of n_layers arrays; entry l-1 is the visual state
    offered to decoder layer l. Each block is residual self-attention
    followed by a residual MLP.
    """
    v = np.asarray(latents, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != config.d:
        raise InvalidInput(f"latents must be (n_latents, {config.d})")
    if len(stack.visual_blocks) != config.n_layers:
        raise InvalidInput("visual stack depth disagrees with the configuration")
    states = []
    for blk in stack.visual_blocks:
        v = v + multi_head_attention(v, v, blk.self_attn, config.n_heads)
        v = v + _mlp(v, blk.mlp)
        states.append(v)
    return states


def gated_xattn(h, v_hat, weights: GateXAttnWeights, gate: float,
                n_heads: int) -> np.ndarray:
    """Tanh-gated cross-attention of text states over visual states.

    h_tilde = h + tanh(gate) * softmax(Q h (K v)^T / sqrt(d_k)) V v.
    The gate is stored raw; at gate == 0 the update is exactly zero and the
    text states pass through unchanged.
    """
    h = np.asarray(h, dtype=np.float64)
    v_hat = np.asarray(v_hat, dtype=np.float64)
    if h.ndim != 2 or v_hat.ndim != 2 or h.shape[1] != v_hat.shape[1]:
        raise InvalidInput("text and visual states must share the model width")
    out = _attend(h @ weights.wq.T, v_hat @ weights.wk.T, v_hat @ weights.wv.T,
                  n_heads, causal=False)
    return h + math.tanh(gate) * out


def decoder_block(h: np.ndarray, blk: TransformerBlock, n_heads: int) -> np.ndarray:
    """Pre-norm causal self-attention plus a pre-norm MLP, both residual."""
    normed = layer_norm(h)
    h = h + multi_head_attention(normed, normed, blk.self_attn, n_heads, causal=True)
    h = h + _mlp(layer_norm(h), blk.mlp)
    return h


def text_only_forward(text_states, stack: FusionStack,
                      config: FusionConfig) -> np.ndarray:
    """The decoder alone, with every injection skipped."""
    h = np.asarray(text_states, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != config.d:
        raise InvalidInput(f"text states must be (t, {config.d})")
    if len(stack.decoder_blocks) != config.n_layers:
        raise InvalidInput("decoder depth disagrees with the configuration")
    for blk in stack.decoder_blocks:
        h = decoder_block(h, blk, config.n_heads)
    return h


def fused_stack_forward(text_states, visuals: Mapping[int, np.ndarray],
                        stack: FusionStack, config: FusionConfig) -> np.ndarray:
    """Run the decoder with gated visual injections.

    ``visuals`` maps 1-based decoder layer indices to (n_latents, d) visual
    states; an entry must exist for every configured inject layer. At each
    inject layer the text states are updated by gated cross-attention
    before the decoder block runs. With no inject layers this reduces to
    the plain decoder.
    """
    h = np.asarray(text_states, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != config.d:
        raise InvalidInput(f"text states must be (t, {config.d})")
    if len(stack.decoder_blocks) != config.n_layers:
        raise InvalidInput("decoder depth disagrees with the configuration")
    for layer in config.inject_layers:
        if layer not in visuals:
            raise InvalidInput(f"no visual state provided for inject layer {layer}")
    for layer in range(1, config.n_layers + 1):
        if layer in config.inject_layers:
            v_hat = np.asarray(visuals[layer], dtype=np.float64)
            h = gated_xattn(h, v_hat, stack.xattn[layer], stack.gates[layer],
                            config.n_heads)
        h = decoder_block(h, stack.decoder_blocks[layer - 1], config.n_heads)
    return h


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    lim = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-lim, lim, size=(rows, cols))


def _init_attention(rng, d: int, d_kv: int) -> AttentionWeights:
    return AttentionWeights(
        wq=_glorot(rng, d, d),
        wk=_glorot(rng, d, d_kv),
        wv=_glorot(rng, d, d_kv),
        wo=_glorot(rng, d, d),
    )


def _init_mlp(rng, d: int, ff_mult: int) -> MlpWeights:
    hidden = ff_mult * d
    return MlpWeights(
        w1=_glorot(rng, hidden, d),
        b1=np.zeros(hidden),
        w2=_glorot(rng, d, hidden),
        b2=np.zeros(d),
    )


def _attention_arrays(prefix: str, w: AttentionWeights) -> list:
    return [(f"{prefix}.wq", w.wq), (f"{prefix}.wk", w.wk),
            (f"{prefix}.wv", w.wv), (f"{prefix}.wo", w.wo)]


def _mlp_arrays(prefix: str, w: MlpWeights) -> list:
    return [(f"{prefix}.w1", w.w1), (f"{prefix}.b1", w.b1),
            (f"{prefix}.w2", w.w2), (f"{prefix}.b2", w.b2)]


def save_fusion_stack(stack: FusionStack, config: FusionConfig, path: str) -> None:
    """Persist the whole fusion path in the shared versioned-array format."""
    from .io import save_arrays

    arrays = [("projector", stack.projector), ("latents", stack.latents)]
    for i, blk in enumerate(stack.sampler_blocks):
        arrays += _attention_arrays(f"sampler.{i}.cross", blk.cross_attn)
        arrays += _attention_arrays(f"sampler.{i}.self", blk.self_attn)
        arrays += _mlp_arrays(f"sampler.{i}.mlp", blk.mlp)
    for name, blocks in (("visual", stack.visual_blocks), ("decoder", stack.decoder_blocks)):
        for i, blk in enumerate(blocks):
            arrays += _attention_arrays(f"{name}.{i}.self", blk.self_attn)
            arrays += _mlp_arrays(f"{name}.{i}.mlp", blk.mlp)
    for layer in config.inject_layers:
        arrays.append((f"gate.{layer}", np.asarray(stack.gates[layer])))
        w = stack.xattn[layer]
        arrays += [(f"xattn.{layer}.wq", w.wq), (f"xattn.{layer}.wk", w.wk),
                   (f"xattn.{layer}.wv", w.wv)]
    meta = {
        "d_v": config.d_v, "d": config.d, "n_latents": config.n_latents,
        "sampler_depth": config.sampler_depth, "ff_mult": config.ff_mult,
        "n_layers": config.n_layers,
        "inject_layers": list(config.inject_layers), "n_heads": config.n_heads,
    }
    save_arrays(path, "fusion", meta, arrays)


def load_fusion_stack(path: str):
    """Read (stack, config) written by :func:`save_fusion_stack`."""
    from .io import load_arrays

    meta, arrays = load_arrays(path, "fusion")
    config = FusionConfig(
        d_v=int(meta["d_v"]), d=int(meta["d"]), n_latents=int(meta["n_latents"]),
        sampler_depth=int(meta["sampler_depth"]), ff_mult=int(meta["ff_mult"]),
        n_layers=int(meta["n_layers"]),
        inject_layers=tuple(meta["inject_layers"]), n_heads=int(meta["n_heads"]),
    )

    def attn(prefix):
        return AttentionWeights(wq=arrays[f"{prefix}.wq"], wk=arrays[f"{prefix}.wk"],
                                wv=arrays[f"{prefix}.wv"], wo=arrays[f"{prefix}.wo"])

    def mlp(prefix):
        return MlpWeights(w1=arrays[f"{prefix}.w1"], b1=arrays[f"{prefix}.b1"],
                          w2=arrays[f"{prefix}.w2"], b2=arrays[f"{prefix}.b2"])

    sampler = tuple(
        SamplerBlock(cross_attn=attn(f"sampler.{i}.cross"),
                     self_attn=attn(f"sampler.{i}.self"),
                     mlp=mlp(f"sampler.{i}.mlp"))
        for i in range(config.sampler_depth)
    )
    visual = tuple(
        TransformerBlock(self_attn=attn(f"visual.{i}.self"), mlp=mlp(f"visual.{i}.mlp"))
        for i in range(config.n_layers)
    )
    decoder = tuple(
        TransformerBlock(self_attn=attn(f"decoder.{i}.self"), mlp=mlp(f"decoder.{i}.mlp"))
        for i in range(config.n_layers)
    )
    gates = {layer: float(arrays[f"gate.{layer}"]) for layer in config.inject_layers}
    xattn = {
        layer: GateXAttnWeights(wq=arrays[f"xattn.{layer}.wq"],
                                wk=arrays[f"xattn.{layer}.wk"],
                                wv=arrays[f"xattn.{layer}.wv"])
        for layer in config.inject_layers
    }
    stack = FusionStack(projector=arrays["projector"], latents=arrays["latents"],
                        sampler_blocks=sampler, visual_blocks=visual,
                        decoder_blocks=decoder, gates=gates, xattn=xattn)
    return stack, config


def init_fusion_stack(config: FusionConfig, seed: int = 0) -> FusionStack:
    """Random weights for the whole fusion path.

    Matrices use uniform fan-in/fan-out limits, biases start at zero, the
    latent array is drawn at scale 1/sqrt(d), and every gate starts at
    exactly 0.0 so injections are initially invisible.
    """
    rng = np.random.default_rng(seed)
    projector = _glorot(rng, config.d, config.d_v)
    latents = rng.normal(0.0, 1.0 / math.sqrt(config.d),
                         size=(config.n_latents, config.d))
    sampler = tuple(
        SamplerBlock(
            cross_attn=_init_attention(rng, config.d, config.d_v),
            self_attn=_init_attention(rng, config.d, config.d),
            mlp=_init_mlp(rng, config.d, config.ff_mult),
        )
        for _ in range(config.sampler_depth)
    )
    visual = tuple(
        TransformerBlock(
            self_attn=_init_attention(rng, config.d, config.d),
            mlp=_init_mlp(rng, config.d, config.ff_mult),
        )
        for _ in range(config.n_layers)
    )
    decoder = tuple(
        TransformerBlock(
            self_attn=_init_attention(rng, config.d, config.d),
            mlp=_init_mlp(rng, config.d, config.ff_mult),
        )
        for _ in range(config.n_layers)
    )
    gates = {layer: 0.0 for layer in config.inject_layers}
    xattn = {
        layer: GateXAttnWeights(
            wq=_glorot(rng, config.d, config.d),
            wk=_glorot(rng, config.d, config.d),
            wv=_glorot(rng, config.d, config.d),
        )
        for layer in config.inject_layers
    }
    return FusionStack(
        projector=projector,
        latents=latents,
        sampler_blocks=sampler,
        visual_blocks=visual,
        decoder_blocks=decoder,
        gates=gates,
        xattn=xattn,
    )
