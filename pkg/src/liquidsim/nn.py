"""
Small dense networks with hand-written backprop and an Adam optimizer.

All parameters of a network live in one flat float64 vector; the per-layer
weight matrices and bias vectors are views into it. That keeps optimizer
steps and target-network updates to a handful of vector operations.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ShapeError, TrainingDivergenceError

ACTIVATIONS = ("relu", "sigmoid", "identity")


def _sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Mlp:
    """Feed-forward net: ReLU hidden layers, configurable output nonlinearity.

    ``output_activation`` is ``"sigmoid"`` for a (0, 1) actor head or
    ``"identity"`` for a critic. Weights are initialised uniform in
    +-1/sqrt(fan_in), biases likewise.
    """

    def __init__(
        self,
        layer_dims: Sequence[int],
        output_activation: str = "identity",
        rng: np.random.Generator | int | None = None,
        params: np.ndarray | None = None,
    ):
        dims = [int(d) for d in layer_dims]
        if len(dims) < 2 or min(dims) < 1:
            raise ShapeError(f"invalid layer_dims {layer_dims}")
        if output_activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {output_activation!r}")
        self.layer_dims = tuple(dims)
        self.output_activation = output_activation

        self._shapes = [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]
        size = sum(o * i + o for o, i in self._shapes)
        if params is not None:
            params = np.array(params, dtype=float)
            if params.shape != (size,):
                raise ShapeError(f"expected {size} parameters, got {params.shape}")
            self.params = params
        else:
            self.params = np.empty(size)
            rng = np.random.default_rng(rng)
            self._bind()
            for W, b in zip(self.weights, self.biases):
                bound = 1.0 / np.sqrt(W.shape[1])
                W[...] = rng.uniform(-bound, bound, size=W.shape)
                b[...] = rng.uniform(-bound, bound, size=b.shape)
        self._bind()

    def _bind(self):
        self.weights, self.biases = _views(self.params, self._shapes)

    @property
    def num_params(self) -> int:
        return self.params.size

    def copy(self) -> "Mlp":
        return Mlp(self.layer_dims, self.output_activation, params=self.params.copy())

    def same_architecture(self, other: "Mlp") -> bool:
        return self.layer_dims == other.layer_dims and self.output_activation == other.output_activation

    def _check_input(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.layer_dims[0]:
            raise ShapeError(f"input shape {x.shape} does not match input dim {self.layer_dims[0]}")
        return x, single

    def _forward(self, x: np.ndarray):
        acts = [x]
        n = len(self.weights)
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ W.T + b
            if i < n - 1:
                z = np.maximum(z, 0.0)
            elif self.output_activation == "sigmoid":
                z = _sigmoid(z)
            acts.append(z)
        return acts

    def forward(self, x) -> np.ndarray:
        """Evaluate on one input vector or a batch of row vectors."""
        x, single = self._check_input(x)
        y = self._forward(x)[-1]
        return y[0] if single else y

    __call__ = forward

    def forward_cached(self, x) -> tuple[np.ndarray, list]:
        """Batch forward pass that also returns the activations needed by :meth:`backward`."""
        x, _ = self._check_input(x)
        acts = self._forward(x)
        return acts[-1], acts

    def gradient(self, x, output_grad) -> tuple[np.ndarray, np.ndarray]:
        """Reverse-mode gradients of sum(output * output_grad).

        Returns ``(param_grad, input_grad)``; ``param_grad`` is laid out like
        ``self.params`` and sums over the batch rows.
        """
        x, single = self._check_input(x)
        g = np.asarray(output_grad, dtype=float)
        if single:
            g = g.reshape(1, -1)
        grad, in_grad = self.backward(self._forward(x), g)
        return grad, (in_grad[0] if single else in_grad)

    def backward(self, acts: list, output_grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        g = output_grad
        if g.shape != acts[-1].shape:
            raise ShapeError(f"output_grad shape {g.shape} does not match output {acts[-1].shape}")
        grad = np.empty_like(self.params)
        gW, gb = _views(grad, self._shapes)

        out = acts[-1]
        if self.output_activation == "sigmoid":
            delta = g * out * (1.0 - out)
        else:
            delta = g
        for i in range(len(self.weights) - 1, -1, -1):
            gW[i][...] = delta.T @ acts[i]
            gb[i][...] = delta.sum(axis=0)
            delta = delta @ self.weights[i]
            if i > 0:
                delta = delta * (acts[i] > 0)
        return grad, delta


def _views(flat: np.ndarray, shapes):
    weights, biases = [], []
    offset = 0
    for out_dim, in_dim in shapes:
        weights.append(flat[offset : offset + out_dim * in_dim].reshape(out_dim, in_dim))
        offset += out_dim * in_dim
        biases.append(flat[offset : offset + out_dim])
        offset += out_dim
    return weights, biases


class Adam:
    """Adaptive-moment optimizer bound to one network's flat parameter vector."""

    def __init__(self, num_params: int, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(num_params)
        self.v = np.zeros(num_params)
        self.t = 0

    def step(self, net: Mlp, grad: np.ndarray) -> None:
        """Descend along ``grad`` in place. Zero gradients leave parameters untouched."""
        if grad.shape != net.params.shape or grad.shape != self.m.shape:
            raise ShapeError(f"gradient shape {grad.shape} does not match parameters {net.params.shape}")
        if not np.all(np.isfinite(grad)):
            raise TrainingDivergenceError("non-finite gradient")
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        net.params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def soft_update(target: Mlp, source: Mlp, rate: float) -> None:
    """Move ``target`` parameters a fraction ``rate`` of the way toward ``source``."""
    if not target.same_architecture(source):
        raise ShapeError("soft_update needs identical architectures")
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must be in [0, 1], got {rate}")
    target.params *= 1.0 - rate
    target.params += rate * source.params
