"""Layer-norm placements, message passing, and recorded forward passes."""

from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose

from graphenergy.attention import AttentionKind, AttentionParams
from graphenergy.graph import build_weighted_graph
from graphenergy.network import (
    LayerParams,
    ModelConfig,
    NonFiniteLayerError,
    config_from_text,
    config_to_text,
    feed_forward,
    forward_trajectory,
    init_model,
    layer_norm,
    message_passing,
    nonlocal_message_passing,
)

from conftest import random_graph


def identity_layer(d: int, heads: int = 1) -> LayerParams:
    """GCN attention, identity value/output maps, zeroed FFN, plain norms."""
    dh = d // heads
    blocks = []
    for h in range(heads):
        block = np.zeros((d, dh))
        block[h * dh:(h + 1) * dh] = np.eye(dh)
        blocks.append(block)
    return LayerParams(
        attention=tuple(AttentionParams() for _ in range(heads)),
        values=tuple(blocks),
        out_weight=np.eye(d),
        ffn_w1=np.zeros((d, 2 * d)),
        ffn_b1=np.zeros(2 * d),
        ffn_w2=np.zeros((2 * d, d)),
        ffn_b2=np.zeros(d),
        norm1_gain=np.ones(d),
        norm1_bias=np.zeros(d),
        norm2_gain=np.ones(d),
        norm2_bias=np.zeros(d),
    )


class TestConfig:
    def test_head_divisibility(self):
        with pytest.raises(ValueError, match="divide"):
            ModelConfig(input_dim=3, output_dim=2, depth=1, hidden_dim=6, heads=4)

    def test_depth_zero_allowed(self):
        cfg = ModelConfig(input_dim=3, output_dim=2, depth=0)
        assert cfg.depth == 0

    def test_negative_depth_rejected(self):
        with pytest.raises(ValueError, match="depth"):
            ModelConfig(input_dim=3, output_dim=2, depth=-1)

    def test_expansion_and_dropout_bounds(self):
        with pytest.raises(ValueError, match="expansion"):
            ModelConfig(input_dim=3, output_dim=2, depth=1, ffn_expansion=0)
        with pytest.raises(ValueError, match="dropout"):
            ModelConfig(input_dim=3, output_dim=2, depth=1, dropout=1.0)

    def test_unknown_variant(self):
        with pytest.raises(ValueError, match="variant"):
            ModelConfig(input_dim=3, output_dim=2, depth=1, variant="sandwich_ln")

    def test_text_round_trip(self):
        cfg = ModelConfig(input_dim=5, output_dim=3, depth=4, hidden_dim=8,
                          heads=2, variant="pre_ln",
                          attention=AttentionKind("gat", leaky_slope=0.1),
                          ffn_expansion=3, seed=11)
        assert config_from_text(config_to_text(cfg)) == cfg


class TestInit:
    def test_deterministic(self):
        cfg = ModelConfig(input_dim=4, output_dim=2, depth=3, hidden_dim=8,
                          attention=AttentionKind("san"), seed=5)
        a, b = init_model(cfg), init_model(cfg)
        assert np.array_equal(a.encoder_w1, b.encoder_w1)
        assert np.array_equal(a.layers[2].ffn_w1, b.layers[2].ffn_w1)
        c = init_model(ModelConfig(input_dim=4, output_dim=2, depth=3,
                                   hidden_dim=8, attention=AttentionKind("san"),
                                   seed=6))
        assert not np.array_equal(a.encoder_w1, c.encoder_w1)

    def test_shapes_and_defaults(self):
        cfg = ModelConfig(input_dim=4, output_dim=3, depth=2, hidden_dim=8,
                          heads=2, attention=AttentionKind("gat"))
        params = init_model(cfg)
        assert params.encoder_w1.shape == (4, 8)
        assert len(params.layers) == 2
        layer = params.layers[0]
        assert len(layer.attention) == 2
        assert layer.attention[0].weight.shape == (8, 4)
        assert layer.attention[0].attn_vector.shape == (8,)
        assert layer.values[0].shape == (8, 4)
        assert layer.ffn_w1.shape == (8, 16)
        assert np.all(layer.norm1_gain == 1.0)
        assert np.all(layer.ffn_b1 == 0.0)
        assert params.decoder_w.shape == (8, 3)

    def test_glorot_bound(self):
        cfg = ModelConfig(input_dim=100, output_dim=2, depth=1, hidden_dim=4)
        params = init_model(cfg)
        bound = np.sqrt(6.0 / (100 + 4))
        assert np.abs(params.encoder_w1).max() <= bound


class TestLayerNorm:
    def test_already_normalized_row(self):
        out = layer_norm(np.array([[1.0, -1.0]]), np.ones(2), np.zeros(2))
        assert_allclose(out, [[1.0, -1.0]], atol=1e-4)

    def test_affine_output(self):
        out = layer_norm(np.array([[0.0, 2.0]]), np.full(2, 2.0), np.ones(2))
        assert_allclose(out, [[-1.0, 3.0]], atol=1e-4)

    def test_constant_row_maps_to_bias(self):
        out = layer_norm(np.full((2, 3), 9.0), np.ones(3), np.full(3, 0.25))
        assert_allclose(out, 0.25, atol=1e-12)

    def test_needs_two_features(self):
        with pytest.raises(ValueError, match="d >= 2"):
            layer_norm(np.ones((3, 1)), np.ones(1), np.zeros(1))


class TestMessagePassing:
    def test_identity_maps_give_aggregation(self, p3):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        out = message_passing(X, identity_layer(2), p3, AttentionKind("gcn"))
        assert_allclose(out[:, 0], [0.5, 1.0, 1.5], rtol=1e-14)
        assert_allclose(out[:, 1], [0.5, 1.0, 1.5], rtol=1e-14)

    def test_two_heads_concatenate(self, p3):
        X = np.array([[0.0, 10.0], [1.0, 11.0], [2.0, 12.0]])
        out = message_passing(X, identity_layer(2, heads=2), p3,
                              AttentionKind("gcn"))
        assert_allclose(out[:, 0], [0.5, 1.0, 1.5], rtol=1e-14)
        assert_allclose(out[:, 1], [10.5, 11.0, 11.5], rtol=1e-14)

    def test_gated_multiplier_value(self, p3):
        # ramp features: ||PX - X||_F^2 = 0.5, so s = 1/6
        X = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        out, mults = nonlocal_message_passing(X, identity_layer(2), p3,
                                              AttentionKind("gcn"))
        assert_allclose(mults, [1.0 / 6.0], rtol=1e-12)
        assert_allclose(out[:, 0], np.array([0.5, 1.0, 1.5]) / 6.0, rtol=1e-12)

    def test_gated_cubic_homogeneity(self):
        rng = np.random.default_rng(3)
        G, _ = random_graph(rng, 11)
        layer = identity_layer(4)
        X = rng.normal(size=(11, 4))
        base, _ = nonlocal_message_passing(X, layer, G, AttentionKind("gcn"))
        scaled, _ = nonlocal_message_passing(3.0 * X, layer, G,
                                             AttentionKind("gcn"))
        assert_allclose(scaled, 27.0 * base, rtol=1e-10)

    def test_gate_vanishes_on_constants(self, p3):
        X = np.full((3, 2), 4.2)
        out, mults = nonlocal_message_passing(X, identity_layer(2), p3,
                                              AttentionKind("gcn"))
        assert mults[0] <= 1e-28
        assert_allclose(out, 0.0, atol=1e-13)


class TestForward:
    def _config(self, G, depth, variant="post_ln", seed=0, hidden=8):
        return ModelConfig(input_dim=3, output_dim=2, depth=depth,
                           hidden_dim=hidden, variant=variant,
                           attention=AttentionKind("san"), seed=seed)

    def test_shapes_and_lengths(self):
        rng = np.random.default_rng(14)
        G, _ = random_graph(rng, 9)
        cfg = self._config(G, depth=4)
        traj = forward_trajectory(init_model(cfg), cfg, G, rng.normal(size=(9, 3)))
        assert len(traj.states) == 5
        assert len(traj.multipliers) == 4
        assert traj.states[0].shape == (9, 8)
        assert traj.decoder_output.shape == (9, 2)
        assert traj.depth == 4

    def test_depth_zero(self):
        rng = np.random.default_rng(15)
        G, _ = random_graph(rng, 6)
        cfg = self._config(G, depth=0)
        traj = forward_trajectory(init_model(cfg), cfg, G, rng.normal(size=(6, 3)))
        assert len(traj.states) == 1
        assert traj.multipliers == ()
        assert traj.decoder_output.shape == (6, 2)

    def test_deterministic_repeat(self):
        rng = np.random.default_rng(16)
        G, _ = random_graph(rng, 8)
        cfg = self._config(G, depth=3, variant="nonlocal_post_ln", seed=2)
        X = rng.normal(size=(8, 3))
        t1 = forward_trajectory(init_model(cfg), cfg, G, X)
        t2 = forward_trajectory(init_model(cfg), cfg, G, X)
        for a, b in zip(t1.states, t2.states):
            assert np.array_equal(a, b)

    def test_post_ln_zero_weights_idempotent(self):
        rng = np.random.default_rng(17)
        G, _ = random_graph(rng, 7)
        cfg = self._config(G, depth=2)
        params = init_model(cfg)
        zeroed = _zero_branches(params)
        traj = forward_trajectory(zeroed, cfg, G, rng.normal(size=(7, 3)))
        X0 = traj.states[0]
        expected = layer_norm(X0, np.ones(8), np.zeros(8))
        # normalization is idempotent up to eps/(2 var) per row
        assert_allclose(traj.states[1], expected, atol=2e-3)
        assert_allclose(traj.states[2], expected, atol=2e-3)

    def test_pre_ln_zero_weights_exact_identity(self):
        rng = np.random.default_rng(18)
        G, _ = random_graph(rng, 7)
        cfg = self._config(G, depth=3, variant="pre_ln")
        zeroed = _zero_branches(init_model(cfg))
        traj = forward_trajectory(zeroed, cfg, G, rng.normal(size=(7, 3)))
        for state in traj.states[1:]:
            assert np.array_equal(state, traj.states[0])

    def test_gated_variant_records_multipliers(self):
        rng = np.random.default_rng(19)
        G, _ = random_graph(rng, 10)
        cfg = self._config(G, depth=3, variant="nonlocal_post_ln")
        traj = forward_trajectory(init_model(cfg), cfg, G, rng.normal(size=(10, 3)))
        assert all(m is not None and m.shape == (1,) for m in traj.multipliers)
        plain_cfg = self._config(G, depth=3)
        plain = forward_trajectory(init_model(plain_cfg), plain_cfg, G,
                                   rng.normal(size=(10, 3)))
        assert all(m is None for m in plain.multipliers)

    def test_gated_equals_plain_when_gate_closed(self, p3):
        # constant features close the gate; the layer then reduces to the
        # norm/FFN pipeline with a zero message branch
        layer = identity_layer(4)
        X = np.full((3, 4), 2.0)
        mp, mults = nonlocal_message_passing(X, layer, p3, AttentionKind("gcn"))
        assert mults.max() <= 1e-28
        Y = layer_norm(X + mp, layer.norm1_gain, layer.norm1_bias)
        manual = layer_norm(Y + feed_forward(Y, layer), layer.norm2_gain,
                            layer.norm2_bias)
        Y0 = layer_norm(X, layer.norm1_gain, layer.norm1_bias)
        plain = layer_norm(Y0 + feed_forward(Y0, layer), layer.norm2_gain,
                           layer.norm2_bias)
        assert_allclose(manual, plain, atol=1e-12)

    def test_skip_layer_passthrough(self):
        rng = np.random.default_rng(20)
        G, _ = random_graph(rng, 8)
        cfg = self._config(G, depth=3)
        params = init_model(cfg)
        X = rng.normal(size=(8, 3))
        pruned = forward_trajectory(params, cfg, G, X, skip_layer=2)
        assert np.array_equal(pruned.states[2], pruned.states[1])
        assert pruned.multipliers[1] is None

    def test_skip_layer_bounds(self):
        rng = np.random.default_rng(21)
        G, _ = random_graph(rng, 5)
        cfg = self._config(G, depth=3)
        params = init_model(cfg)
        X = rng.normal(size=(5, 3))
        with pytest.raises(ValueError, match="skip_layer"):
            forward_trajectory(params, cfg, G, X, skip_layer=0)
        with pytest.raises(ValueError, match="skip_layer"):
            forward_trajectory(params, cfg, G, X, skip_layer=4)

    def test_input_shape_checked(self):
        rng = np.random.default_rng(22)
        G, _ = random_graph(rng, 5)
        cfg = self._config(G, depth=1)
        with pytest.raises(ValueError, match="does not match"):
            forward_trajectory(init_model(cfg), cfg, G, rng.normal(size=(5, 4)))

    def test_nonfinite_reports_layer(self):
        rng = np.random.default_rng(23)
        G, _ = random_graph(rng, 6)
        cfg = self._config(G, depth=2)
        params = init_model(cfg)
        bad_layer = params.layers[1]
        poisoned = LayerParams(
            attention=bad_layer.attention,
            values=bad_layer.values,
            out_weight=bad_layer.out_weight * np.inf,
            ffn_w1=bad_layer.ffn_w1, ffn_b1=bad_layer.ffn_b1,
            ffn_w2=bad_layer.ffn_w2, ffn_b2=bad_layer.ffn_b2,
            norm1_gain=bad_layer.norm1_gain, norm1_bias=bad_layer.norm1_bias,
            norm2_gain=bad_layer.norm2_gain, norm2_bias=bad_layer.norm2_bias,
        )
        from dataclasses import replace
        broken = replace(params, layers=(params.layers[0], poisoned))
        with np.errstate(invalid="ignore"), pytest.raises(NonFiniteLayerError) as err:
            forward_trajectory(broken, cfg, G, rng.normal(size=(6, 3)))
        assert err.value.layer == 2

    def test_constant_input_rows_stay_equal(self, p3):
        cfg = ModelConfig(input_dim=3, output_dim=2, depth=2, hidden_dim=8,
                          attention=AttentionKind("san"), seed=1)
        X = np.tile([0.3, -1.2, 0.8], (3, 1))
        traj = forward_trajectory(init_model(cfg), cfg, p3, X)
        for state in traj.states:
            assert_allclose(state - state[0], 0.0, atol=1e-10)


def _zero_branches(params):
    """Zero every message-passing output map and FFN second map."""
    from dataclasses import replace

    new_layers = tuple(
        replace(layer, out_weight=np.zeros_like(layer.out_weight),
                ffn_w2=np.zeros_like(layer.ffn_w2))
        for layer in params.layers
    )
    return replace(params, layers=new_layers)
