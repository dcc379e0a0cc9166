"""Minimal dense network with exact reverse-mode gradients.

Parameters are float32 (the persistence precision); every forward/backward
pass upcasts to float64 so analytic gradients agree with central finite
differences to near machine precision.  Hidden activations are SiLU, the
output layer is linear.
"""

import math

import numpy as np

from .rng import make_rng


class NonFiniteError(FloatingPointError):
    """A forward or backward pass produced a non-finite value."""


def silu(x):
    return x / (1.0 + np.exp(-x))


def silu_grad(x):
    s = 1.0 / (1.0 + np.exp(-x))
    return s * (1.0 + x * (1.0 - s))


class Mlp:
    """Fully-connected SiLU network: in_dim -> hidden... -> out_dim.

    hidden may be empty, in which case the net is a single linear map.
    Hidden layers use fan-in-scaled uniform init; the output layer is
    zero-initialized when zero_init_last is set.
    """

    def __init__(self, in_dim, out_dim, hidden=(), seed=0, stream=0,
                 zero_init_last=False):
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self.hidden = tuple(int(h) for h in hidden)
        if self.in_dim < 1 or self.out_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValueError("layer widths must be >= 1")
        self.weights = []
        self.biases = []
        rng = make_rng(seed, stream)
        dims = (self.in_dim,) + self.hidden + (self.out_dim,)
        for i in range(len(dims) - 1):
            fan_in, fan_out = dims[i], dims[i + 1]
            if zero_init_last and i == len(dims) - 2:
                w = np.zeros((fan_in, fan_out), dtype=np.float32)
            else:
                bound = 1.0 / math.sqrt(fan_in)
                w = rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(np.float32)
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out, dtype=np.float32))

    @property
    def num_layers(self):
        return len(self.weights)

    def size(self):
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def param_arrays(self):
        """Parameters in a fixed flat order: w0, b0, w1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def set_param_arrays(self, arrays):
        expected = [a.shape for a in self.param_arrays()]
        got = [np.asarray(a).shape for a in arrays]
        if expected != got:
            raise ValueError(f"parameter shapes {got} != expected {expected}")
        it = iter(arrays)
        for i in range(self.num_layers):
            self.weights[i] = np.asarray(next(it), dtype=np.float32)
            self.biases[i] = np.asarray(next(it), dtype=np.float32)

    def forward_cached(self, x):
        """Forward pass keeping intermediates for the backward pass."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(f"input shape {x.shape} != (batch, {self.in_dim})")
        acts = [x]
        pres = []
        h = x
        for i in range(self.num_layers - 1):
            pre = h @ self.weights[i].astype(np.float64) + self.biases[i].astype(np.float64)
            pres.append(pre)
            h = silu(pre)
            acts.append(h)
        out = h @ self.weights[-1].astype(np.float64) + self.biases[-1].astype(np.float64)
        return out, (pres, acts)

    def forward_batch(self, x):
        out, _ = self.forward_cached(x)
        return out

    def check_finite(self, out, cache):
        """Raise NonFiniteError naming the first layer that blew up."""
        pres, _ = cache
        for i, pre in enumerate(pres):
            if not np.all(np.isfinite(pre)):
                raise NonFiniteError(f"non-finite pre-activation in layer {i}")
        if not np.all(np.isfinite(out)):
            raise NonFiniteError(f"non-finite output in layer {self.num_layers - 1}")

    def vjp(self, cache, grad_out):
        """Vector-Jacobian product: gradients for params and for the input.

        grad_out is d loss / d output, shape (batch, out_dim).  Returns
        (grads in param_arrays order, d loss / d input).
        """
        pres, acts = cache
        grads_w = [None] * self.num_layers
        grads_b = [None] * self.num_layers
        g = np.asarray(grad_out, dtype=np.float64)
        for i in range(self.num_layers - 1, -1, -1):
            grads_w[i] = acts[i].T @ g
            grads_b[i] = g.sum(axis=0)
            g = g @ self.weights[i].astype(np.float64).T
            if i > 0:
                g = g * silu_grad(pres[i - 1])
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.append(gw)
            grads.append(gb)
        return grads, g

    def lipschitz_bound(self):
        """Product of spectral norms; SiLU derivative is bounded by 1.1."""
        prod = 1.0
        for i, w in enumerate(self.weights):
            sv = np.linalg.norm(w.astype(np.float64), 2)
            prod *= sv if i == self.num_layers - 1 else sv * 1.1
        return prod
