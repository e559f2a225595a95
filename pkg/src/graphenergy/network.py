"""Attention message-passing stacks with three norm placements.

One hidden layer is message passing plus a feed-forward block, wired in
one of three ways (``Norm`` is per-row layer normalization):

* ``post_ln``:  ``Y = Norm(X + MP(X))``, ``X' = Norm(Y + FFN(Y))``
* ``pre_ln``:   ``Y = X + MP(Norm(X))``, ``X' = Y + FFN(Norm(Y))``
* ``nonlocal_post_ln``: post_ln with MP replaced by its gated form, where
  each head's output is scaled by ``s = ||P X - X||_F^2 / n``

Message passing per head: score the edges on the current input, average
with the transpose, softmax over the closed neighborhood, aggregate, then
map through the head's value matrix; heads concatenate and pass through a
shared output matrix. The gating scalar is the squared distance of one
aggregation step per feature count, so it vanishes exactly when features
are constant and shrinks as smoothing proceeds; computing it costs O(nd)
on top of the plain head.

There is no training here. Parameters are drawn once from a seeded
generator so runs are reproducible bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from graphenergy.attention import (
    AttentionKind,
    AttentionParams,
    VARIANT_ADDITIVE,
    VARIANT_DOT,
    attention_scores,
    attention_weighted_graph,
    symmetrize_scores,
)
from graphenergy.graph import WeightedGraph

VARIANT_POST_LN = "post_ln"
VARIANT_PRE_LN = "pre_ln"
VARIANT_NONLOCAL = "nonlocal_post_ln"
MODEL_VARIANTS = (VARIANT_POST_LN, VARIANT_PRE_LN, VARIANT_NONLOCAL)

LAYER_NORM_EPS = 1e-5


class NonFiniteLayerError(RuntimeError):
    """A forward pass produced a non-finite value; carries the layer index."""

    def __init__(self, layer: int):
        super().__init__(f"non-finite values appeared at layer {layer}")
        self.layer = layer


@dataclass(frozen=True)
class ModelConfig:
    """Static architecture description; validation happens on construction."""

    input_dim: int
    output_dim: int
    depth: int
    hidden_dim: int = 32
    heads: int = 1
    variant: str = VARIANT_POST_LN
    attention: AttentionKind = field(default_factory=AttentionKind)
    ffn_expansion: int = 2
    dropout: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.variant not in MODEL_VARIANTS:
            raise ValueError(
                f"unknown variant {self.variant!r}; expected one of {MODEL_VARIANTS}"
            )
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")
        if self.hidden_dim < 2:
            raise ValueError("hidden_dim must be at least 2 for row normalization")
        if self.heads < 1 or self.hidden_dim % self.heads != 0:
            raise ValueError("heads must divide hidden_dim")
        if self.ffn_expansion < 1:
            raise ValueError("ffn_expansion must be at least 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be positive")

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.heads


@dataclass(frozen=True)
class LayerParams:
    attention: tuple[AttentionParams, ...]
    values: tuple[np.ndarray, ...]
    out_weight: np.ndarray
    ffn_w1: np.ndarray
    ffn_b1: np.ndarray
    ffn_w2: np.ndarray
    ffn_b2: np.ndarray
    norm1_gain: np.ndarray
    norm1_bias: np.ndarray
    norm2_gain: np.ndarray
    norm2_bias: np.ndarray


@dataclass(frozen=True)
class ModelParams:
    encoder_w1: np.ndarray
    encoder_b1: np.ndarray
    encoder_w2: np.ndarray
    encoder_b2: np.ndarray
    layers: tuple[LayerParams, ...]
    decoder_w: np.ndarray
    decoder_b: np.ndarray


@dataclass(frozen=True, eq=False)
class LayerTrajectory:
    """Recorded forward pass: X^0 .. X^L plus ends and per-layer scalars.

    ``multipliers[k]`` holds the gating scalars of layer k+1 (one per
    head) for the gated variant and None otherwise; pruned layers also
    record None.
    """

    states: tuple[np.ndarray, ...]
    encoder_input: np.ndarray
    decoder_output: np.ndarray
    multipliers: tuple[np.ndarray | None, ...]
    source: str

    @property
    def depth(self) -> int:
        return len(self.states) - 1


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_model(config: ModelConfig) -> ModelParams:
    """Draw all parameters from one seeded PCG64 stream.

    Weight matrices are variance-scaled uniform, biases zero, norm gains
    one. The draw order is fixed, so equal seeds give bitwise-equal
    parameters.
    """
    rng = np.random.default_rng(config.seed)
    d, dh, e = config.hidden_dim, config.head_dim, config.ffn_expansion

    enc_w1 = glorot_uniform(rng, config.input_dim, d, (config.input_dim, d))
    enc_w2 = glorot_uniform(rng, d, d, (d, d))

    layers = []
    for _ in range(config.depth):
        heads = []
        for _ in range(config.heads):
            if config.attention.variant == VARIANT_ADDITIVE:
                heads.append(AttentionParams(
                    weight=glorot_uniform(rng, d, dh, (d, dh)),
                    attn_vector=glorot_uniform(rng, 2 * dh, 1, (2 * dh,)),
                ))
            elif config.attention.variant == VARIANT_DOT:
                heads.append(AttentionParams(
                    key=glorot_uniform(rng, d, dh, (d, dh)),
                    query=glorot_uniform(rng, d, dh, (d, dh)),
                ))
            else:
                heads.append(AttentionParams())
        values = tuple(
            glorot_uniform(rng, d, dh, (d, dh)) for _ in range(config.heads)
        )
        layers.append(LayerParams(
            attention=tuple(heads),
            values=values,
            out_weight=glorot_uniform(rng, d, d, (d, d)),
            ffn_w1=glorot_uniform(rng, d, e * d, (d, e * d)),
            ffn_b1=np.zeros(e * d),
            ffn_w2=glorot_uniform(rng, e * d, d, (e * d, d)),
            ffn_b2=np.zeros(d),
            norm1_gain=np.ones(d),
            norm1_bias=np.zeros(d),
            norm2_gain=np.ones(d),
            norm2_bias=np.zeros(d),
        ))

    dec_w = glorot_uniform(rng, d, config.output_dim, (d, config.output_dim))
    return ModelParams(
        encoder_w1=enc_w1,
        encoder_b1=np.zeros(d),
        encoder_w2=enc_w2,
        encoder_b2=np.zeros(d),
        layers=tuple(layers),
        decoder_w=dec_w,
        decoder_b=np.zeros(config.output_dim),
    )


def layer_norm(X: np.ndarray, gain: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Row-wise normalization to zero mean and unit variance, then affine."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise ValueError("layer_norm expects (n, d) input with d >= 2")
    mean = X.mean(axis=1, keepdims=True)
    var = X.var(axis=1, keepdims=True)
    return (X - mean) / np.sqrt(var + LAYER_NORM_EPS) * gain + bias


def feed_forward(X: np.ndarray, layer: LayerParams) -> np.ndarray:
    """Position-wise expansion MLP with a single rectifier."""
    hidden = np.maximum(X @ layer.ffn_w1 + layer.ffn_b1, 0.0)
    return hidden @ layer.ffn_w2 + layer.ffn_b2


def _head_aggregations(X, layer, G, kind):
    for head_params in layer.attention:
        scores = symmetrize_scores(attention_scores(kind, head_params, G, X))
        yield attention_weighted_graph(scores, build_graph_view=False)


def message_passing(
    X: np.ndarray,
    layer: LayerParams,
    G: WeightedGraph,
    kind: AttentionKind,
) -> np.ndarray:
    """Multi-head softmax aggregation followed by the output map."""
    parts = [
        agg.apply(X) @ V
        for agg, V in zip(_head_aggregations(X, layer, G, kind), layer.values)
    ]
    return np.concatenate(parts, axis=1) @ layer.out_weight


def nonlocal_message_passing(
    X: np.ndarray,
    layer: LayerParams,
    G: WeightedGraph,
    kind: AttentionKind,
) -> tuple[np.ndarray, np.ndarray]:
    """Gated message passing; returns the output and per-head multipliers.

    Head h is scaled by ``s_h = ||P_h X - X||_F^2 / n``, which is O(nd)
    extra work per head on top of the aggregation itself.
    """
    n = X.shape[0]
    parts = []
    mults = np.empty(len(layer.values))
    for h, (agg, V) in enumerate(
        zip(_head_aggregations(X, layer, G, kind), layer.values)
    ):
        PX = agg.apply(X)
        s = float(((PX - X) ** 2).sum()) / n
        mults[h] = s
        parts.append(s * (PX @ V))
    return np.concatenate(parts, axis=1) @ layer.out_weight, mults


def forward_trajectory(
    params: ModelParams,
    config: ModelConfig,
    G: WeightedGraph,
    X_in: np.ndarray,
    skip_layer: int | None = None,
) -> LayerTrajectory:
    """Run the stack and record every hidden state.

    ``skip_layer`` (1-based) passes that layer's input through untouched,
    which is the pruning used by the depth diagnostics. Non-finite values
    raise :class:`NonFiniteLayerError` with the offending layer index.
    """
    X_in = np.asarray(X_in, dtype=float)
    if X_in.ndim != 2 or X_in.shape != (G.n, config.input_dim):
        raise ValueError(
            f"input of shape {X_in.shape} does not match "
            f"(n={G.n}, input_dim={config.input_dim})"
        )
    if skip_layer is not None and not 1 <= skip_layer <= config.depth:
        raise ValueError(
            f"skip_layer must lie in [1, {config.depth}], got {skip_layer}"
        )

    H = X_in
    if config.dropout > 0.0:
        keep = 1.0 - config.dropout
        mask = np.random.default_rng(config.seed ^ 0x5EED).random(H.shape) < keep
        H = H * mask / keep
    X = np.maximum(H @ params.encoder_w1 + params.encoder_b1, 0.0)
    X = X @ params.encoder_w2 + params.encoder_b2
    if not np.all(np.isfinite(X)):
        raise NonFiniteLayerError(0)

    states = [X]
    multipliers: list[np.ndarray | None] = []
    kind = config.attention
    for k, layer in enumerate(params.layers, start=1):
        if skip_layer == k:
            states.append(states[-1])
            multipliers.append(None)
            continue
        X = states[-1]
        mult = None
        if config.variant == VARIANT_PRE_LN:
            Y = X + message_passing(
                layer_norm(X, layer.norm1_gain, layer.norm1_bias), layer, G, kind
            )
            X = Y + feed_forward(
                layer_norm(Y, layer.norm2_gain, layer.norm2_bias), layer
            )
        else:
            if config.variant == VARIANT_NONLOCAL:
                mp, mult = nonlocal_message_passing(X, layer, G, kind)
            else:
                mp = message_passing(X, layer, G, kind)
            Y = layer_norm(X + mp, layer.norm1_gain, layer.norm1_bias)
            X = layer_norm(Y + feed_forward(Y, layer), layer.norm2_gain,
                           layer.norm2_bias)
        if not np.all(np.isfinite(X)):
            raise NonFiniteLayerError(k)
        states.append(X)
        multipliers.append(mult)

    decoded = states[-1] @ params.decoder_w + params.decoder_b
    return LayerTrajectory(
        states=tuple(states),
        encoder_input=X_in,
        decoder_output=decoded,
        multipliers=tuple(multipliers),
        source=config.variant,
    )


def config_to_text(config: ModelConfig) -> str:
    """Flat key-value serialization of a model config."""
    lines = [
        f"input_dim = {config.input_dim}",
        f"output_dim = {config.output_dim}",
        f"depth = {config.depth}",
        f"hidden_dim = {config.hidden_dim}",
        f"heads = {config.heads}",
        f"variant = {config.variant}",
        f"attention_variant = {config.attention.variant}",
        f"attention_leaky_slope = {config.attention.leaky_slope}",
        f"ffn_expansion = {config.ffn_expansion}",
        f"dropout = {config.dropout}",
        f"seed = {config.seed}",
    ]
    return "\n".join(lines) + "\n"


def config_from_text(text: str) -> ModelConfig:
    """Inverse of :func:`config_to_text`."""
    fields: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"bad config line {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        fields[key] = value
    kind = AttentionKind(
        variant=fields.get("attention_variant", "san"),
        leaky_slope=float(fields.get("attention_leaky_slope", 0.2)),
    )
    return ModelConfig(
        input_dim=int(fields["input_dim"]),
        output_dim=int(fields["output_dim"]),
        depth=int(fields["depth"]),
        hidden_dim=int(fields.get("hidden_dim", 32)),
        heads=int(fields.get("heads", 1)),
        variant=fields.get("variant", VARIANT_POST_LN),
        attention=kind,
        ffn_expansion=int(fields.get("ffn_expansion", 2)),
        dropout=float(fields.get("dropout", 0.0)),
        seed=int(fields.get("seed", 0)),
    )
