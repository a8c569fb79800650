"""Convolution engine checks against brute-force references."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convprune import ConvLayer, DimensionError, Network, conv_forward, forward_all_layers
from convprune.nets import apply_activation, check_dataset, conv_forward_linear

from conftest import naive_conv, rand_layer, rand_net


def test_delta_kernel_is_identity(rng):
    x = rng.standard_normal((3, 6, 7))
    weights = np.zeros((3, 3, 3, 3))
    for j in range(3):
        weights[j, j, 1, 1] = 1.0
    layer = ConvLayer(weights, activation="identity")
    np.testing.assert_array_equal(conv_forward(layer, x), x)


def test_scalar_kernel_scales_input(rng):
    x = rng.standard_normal((1, 5, 5))
    layer = ConvLayer(np.full((1, 1, 1, 1), 2.5), activation="identity")
    np.testing.assert_allclose(conv_forward(layer, x), 2.5 * x, rtol=0, atol=0)


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("m,n", [(1, 1), (2, 3), (4, 2)])
def test_conv_matches_naive_loop(rng, m, n, k):
    x = rng.standard_normal((m, 6, 5))
    layer = ConvLayer(rng.standard_normal((n, m, k, k)), activation="identity")
    got = conv_forward(layer, x)
    want = naive_conv(layer.weights, x)
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


def test_comp_map_mixes_channels(rng):
    x = rng.standard_normal((2, 4, 4))
    weights = rng.standard_normal((3, 2, 3, 3))
    g = rng.standard_normal((3, 5))
    layer = ConvLayer(weights, comp=g, activation="identity")
    raw = conv_forward(ConvLayer(weights, activation="identity"), x)
    want = np.einsum("jhw,jk->khw", raw, g)
    np.testing.assert_allclose(conv_forward(layer, x), want, rtol=1e-12, atol=1e-12)
    assert layer.width == 5


def test_relu_clamps_negatives():
    layer = ConvLayer(np.full((1, 1, 1, 1), -1.0), activation="relu")
    x = np.ones((1, 3, 3))
    np.testing.assert_array_equal(conv_forward(layer, x), np.zeros((1, 3, 3)))
    lin = conv_forward_linear(layer, x)
    np.testing.assert_array_equal(lin, -np.ones((1, 3, 3)))


def test_forward_all_layers_equals_manual_chain(rng):
    net = rand_net(rng, [2, 4, 3, 2], k=3, activation="relu")
    x = rng.standard_normal((2, 5, 5))
    outs = forward_all_layers(net, x)
    y = x
    for layer, out in zip(net.layers, outs):
        y = conv_forward(layer, y)
        np.testing.assert_array_equal(out, y)
    assert len(outs) == 3


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_conv_is_linear_for_identity_activation(seed):
    rng = np.random.default_rng(seed)
    layer = rand_layer(rng, 2, 3, k=3, with_comp=True)
    x1 = rng.standard_normal((2, 4, 4))
    x2 = rng.standard_normal((2, 4, 4))
    a, b = rng.standard_normal(2)
    lhs = conv_forward(layer, a * x1 + b * x2)
    rhs = a * conv_forward(layer, x1) + b * conv_forward(layer, x2)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10)


def test_forward_is_deterministic(rng):
    layer = rand_layer(rng, 3, 4, k=3, with_comp=True, activation="relu")
    x = rng.standard_normal((3, 8, 8))
    first = conv_forward(layer, x)
    second = conv_forward(layer, x)
    np.testing.assert_array_equal(first, second)


def test_shape_mismatches_raise(rng):
    layer = rand_layer(rng, 3, 4)
    with pytest.raises(DimensionError):
        conv_forward(layer, rng.standard_normal((2, 5, 5)))
    with pytest.raises(DimensionError):
        conv_forward(layer, rng.standard_normal((3, 5)))
    with pytest.raises(DimensionError):
        ConvLayer(rng.standard_normal((4, 3, 3)))
    with pytest.raises(DimensionError):
        ConvLayer(rng.standard_normal((4, 3, 3, 2)))
    with pytest.raises(DimensionError):
        ConvLayer(rng.standard_normal((4, 3, 3, 3)), comp=rng.standard_normal((3, 4)))
    with pytest.raises(ValueError):
        ConvLayer(rng.standard_normal((4, 3, 3, 3)), activation="tanh")


def test_network_chain_validation(rng):
    good = Network([rand_layer(rng, 2, 3), rand_layer(rng, 3, 2)])
    assert good.in_channels == 2
    with pytest.raises(DimensionError):
        Network([rand_layer(rng, 2, 3), rand_layer(rng, 4, 2)])
    with pytest.raises(DimensionError):
        Network([])
    # a comp map sets the composite width downstream layers must match
    wide = rand_layer(rng, 2, 3, with_comp=True, width=5)
    Network([wide, rand_layer(rng, 5, 2)])
    with pytest.raises(DimensionError):
        Network([wide, rand_layer(rng, 3, 2)])


def test_check_dataset(rng):
    net = rand_net(rng, [3, 4])
    data = rng.standard_normal((5, 3, 6, 6))
    assert check_dataset(net, data).shape == (5, 3, 6, 6)
    with pytest.raises(DimensionError):
        check_dataset(net, rng.standard_normal((5, 2, 6, 6)))
    with pytest.raises(DimensionError):
        check_dataset(net, np.empty((0, 3, 6, 6)))
    with pytest.raises(DimensionError):
        check_dataset(net, rng.standard_normal((5, 3, 6)))


def test_activation_helper():
    x = np.array([-1.0, 0.0, 2.0])
    np.testing.assert_array_equal(apply_activation("relu", x), [0.0, 0.0, 2.0])
    np.testing.assert_array_equal(apply_activation("identity", x), x)


def test_outputs_finite_on_finite_inputs(rng):
    net = rand_net(rng, [2, 8, 8, 2], k=3, activation="relu")
    x = rng.standard_normal((2, 6, 6)) * 1e3
    for out in forward_all_layers(net, x):
        assert np.all(np.isfinite(out))
