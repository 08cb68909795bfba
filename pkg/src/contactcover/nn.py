"""Dense networks with explicit backward passes and Adam, float64 only.

No autograd: forward returns the activation cache, backward consumes it
and produces one gradient array per parameter array (weights and biases
interleaved, same order as DenseNet.params). Small by design; the
hashing autoencoder and the PPO nets are the only customers.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Array = np.ndarray


def _tanh(z):
    return np.tanh(z)


def _d_tanh(y):
    return 1.0 - y * y


def _relu(z):
    return np.maximum(z, 0.0)


def _d_relu(y):
    return (y > 0.0).astype(np.float64)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _d_sigmoid(y):
    return y * (1.0 - y)


def _identity(z):
    return z


def _d_identity(y):
    return np.ones_like(y)


# activation -> (f(z), f'(z) expressed through y = f(z))
ACTIVATIONS = {
    "tanh": (_tanh, _d_tanh),
    "relu": (_relu, _d_relu),
    "sigmoid": (_sigmoid, _d_sigmoid),
    "identity": (_identity, _d_identity),
}


@dataclass
class DenseNet:
    sizes: tuple
    activations: tuple
    weights: list
    biases: list

    @property
    def params(self) -> list:
        """Live parameter arrays, [W1, b1, W2, b2, ...]; mutate in place."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def init(sizes, activations, seed: int) -> DenseNet:
    """Fan-in scaled uniform init: W ~ U(+-sqrt(6/fan_in)), b = 0."""
    sizes = tuple(int(s) for s in sizes)
    activations = tuple(activations)
    if len(sizes) < 2:
        raise ValueError("need at least input and output layer sizes")
    if any(s < 1 for s in sizes):
        raise ValueError("layer sizes must be positive")
    if len(activations) != len(sizes) - 1:
        raise ValueError(
            f"need {len(sizes) - 1} activations for {len(sizes)} layers, "
            f"got {len(activations)}")
    for a in activations:
        if a not in ACTIVATIONS:
            raise ValueError(f"unknown activation {a!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-lim, lim, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return DenseNet(sizes, activations, weights, biases)


def forward(net: DenseNet, x: Array):
    """(output, cache) for a (batch, in) input. Cache feeds backward."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.sizes[0]:
        raise ValueError(f"input must be (batch, {net.sizes[0]}), got {x.shape}")
    acts = [x]
    h = x
    for w, b, name in zip(net.weights, net.biases, net.activations):
        h = ACTIVATIONS[name][0](h @ w.T + b)
        acts.append(h)
    return h, acts


def backward(net: DenseNet, cache: list, grad_output: Array):
    """Gradients of a scalar loss given dL/d(output).

    Returns (grads, grad_input); grads has one array per parameter in
    DenseNet.params order.
    """
    g = np.asarray(grad_output, dtype=np.float64)
    if g.shape != cache[-1].shape:
        raise ValueError(
            f"grad_output shape {g.shape} does not match forward output "
            f"{cache[-1].shape}; stale cache?")
    grads: list = [None] * (2 * len(net.weights))
    for l in range(len(net.weights) - 1, -1, -1):
        g = g * ACTIVATIONS[net.activations[l]][1](cache[l + 1])
        grads[2 * l] = g.T @ cache[l]
        grads[2 * l + 1] = g.sum(axis=0)
        g = g @ net.weights[l]
    return grads, g


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def for_params(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params],
                   [np.zeros_like(p) for p in params])


def adam_step(params: list, grads: list, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update, in place on the parameter arrays."""
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state


def params_to_npz_dict(prefix: str, net: DenseNet) -> dict:
    """Flatten parameters into npz-ready keys for checkpointing."""
    out = {}
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        out[f"{prefix}_w{i}"] = w
        out[f"{prefix}_b{i}"] = b
    return out


def net_from_npz(prefix: str, data, sizes, activations) -> DenseNet:
    """Rebuild a DenseNet from arrays saved by params_to_npz_dict."""
    sizes = tuple(int(s) for s in sizes)
    n_layers = len(sizes) - 1
    weights = [np.array(data[f"{prefix}_w{i}"], dtype=np.float64) for i in range(n_layers)]
    biases = [np.array(data[f"{prefix}_b{i}"], dtype=np.float64) for i in range(n_layers)]
    return DenseNet(sizes, tuple(activations), weights, biases)
