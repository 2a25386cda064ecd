"""Minimal dense neural network engine: float64 MLPs, hand backprop, Adam.

Hidden layers use tanh, final layers are linear. Weights follow the
x @ W + b row-batch convention with W of shape (fan_in, fan_out). No
general autodiff: callers backpropagate through cached forward passes.
"""

from __future__ import annotations

import numpy as np


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Mlp:
    """Fully connected stack defined by a width list [in, h1, ..., out]."""

    def __init__(self, widths, rng: np.random.Generator | None = None):
        widths = [int(w) for w in widths]
        if len(widths) < 2 or any(w < 1 for w in widths):
            raise ValueError(f"bad width list {widths}")
        self.widths = widths
        if rng is None:
            rng = np.random.default_rng(0)
        self.weights = [glorot_uniform(a, b, rng) for a, b in zip(widths[:-1], widths[1:])]
        self.biases = [np.zeros(b) for b in widths[1:]]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_cached(x)
        return y

    def forward_cached(self, x: np.ndarray):
        """Returns (output, cache); cache holds per-layer inputs for backward."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inputs = []
        h = x
        last = self.n_layers - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            h = h @ W + b
            if i != last:
                h = np.tanh(h)
        return h, inputs

    def backward(self, cache, dy: np.ndarray):
        """Backpropagate dL/dy through a cached forward pass.

        Returns (dx, dWs, dbs) with parameter gradients summed over the batch.
        """
        dWs = [None] * self.n_layers
        dbs = [None] * self.n_layers
        g = np.atleast_2d(np.asarray(dy, dtype=float))
        last = self.n_layers - 1
        for i in range(last, -1, -1):
            h_in = cache[i]
            if i != last:
                act = cache[i + 1]  # next layer's input is this layer's tanh output
                g = g * (1.0 - act * act)
            dWs[i] = h_in.T @ g
            dbs[i] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return g, dWs, dbs

    def params(self):
        return list(self.weights) + list(self.biases)

    def set_params(self, arrays):
        nw = self.n_layers
        self.weights = [np.asarray(a, dtype=float) for a in arrays[:nw]]
        self.biases = [np.asarray(a, dtype=float) for a in arrays[nw:]]


class Adam:
    """Adam with bias correction over a list of parameter arrays (updated in place)."""

    def __init__(self, params, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]

    def step(self, grads) -> None:
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match parameter list")
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def finite_diff_check(fn, params, h: float = 1e-5) -> float:
    """Compare analytic gradients against central differences.

    fn(params) must return (scalar value, gradient list matching params).
    Returns the max over all parameter entries of
        |analytic - fd| / (|analytic| + 1e-12).
    """
    _, grads = fn(params)
    worst = 0.0
    for k, p in enumerate(params):
        flat = p.reshape(-1)
        gflat = np.asarray(grads[k]).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up, _ = fn(params)
            flat[i] = orig - h
            dn, _ = fn(params)
            flat[i] = orig
            fd = (up - dn) / (2.0 * h)
            rel = abs(gflat[i] - fd) / (abs(gflat[i]) + 1e-12)
            worst = max(worst, rel)
    return worst
