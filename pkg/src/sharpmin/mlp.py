"""Small dense MLP with softmax cross-entropy, backprop written layer-wise.

Parameters live in one flat float64 vector (weights then bias per layer) so
the optimizer and sharpness machinery treat the network exactly like the
analytic objectives. No autodiff graph: forward and backward are explicit.
"""

from __future__ import annotations

import numpy as np

from .datasets import Dataset
from .errors import ConfigurationError, NumericError
from .objectives import FULL_BATCH, Array, Batch, Objective, check_vector

ACTIVATIONS = ("tanh", "relu")


class MlpClassifier(Objective):
    def __init__(self, layer_sizes: list[int], activation: str, dataset: Dataset):
        if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
            raise ConfigurationError(f"layer_sizes must be >=2 positive ints, got {layer_sizes}")
        if activation not in ACTIVATIONS:
            raise ConfigurationError(f"activation must be one of {ACTIVATIONS}, got {activation!r}")
        if layer_sizes[0] != dataset.d:
            raise ConfigurationError(
                f"input layer {layer_sizes[0]} != dataset feature dim {dataset.d}"
            )
        if layer_sizes[-1] != dataset.classes:
            raise ConfigurationError(
                f"output layer {layer_sizes[-1]} != dataset classes {dataset.classes}"
            )
        self.layer_sizes = list(layer_sizes)
        self.activation = activation
        self.dataset = dataset
        # Flat layout: [W1, b1, W2, b2, ...], W row-major with shape (fan_in, fan_out).
        self._shapes = [
            (layer_sizes[k], layer_sizes[k + 1]) for k in range(len(layer_sizes) - 1)
        ]
        self.dim = sum(n_in * n_out + n_out for n_in, n_out in self._shapes)

    def with_dataset(self, dataset: Dataset) -> "MlpClassifier":
        """Same architecture bound to another dataset (e.g. the test split)."""
        return MlpClassifier(self.layer_sizes, self.activation, dataset)

    def init_params(self, rng: np.random.Generator) -> Array:
        """Gaussian fan-in scaled weights, zero biases."""
        chunks = []
        for n_in, n_out in self._shapes:
            chunks.append(rng.normal(0.0, 1.0 / np.sqrt(n_in), size=n_in * n_out))
            chunks.append(np.zeros(n_out))
        return np.concatenate(chunks)

    def unpack(self, w: Array) -> list[tuple[Array, Array]]:
        layers = []
        offset = 0
        for n_in, n_out in self._shapes:
            W = w[offset : offset + n_in * n_out].reshape(n_in, n_out)
            offset += n_in * n_out
            b = w[offset : offset + n_out]
            offset += n_out
            layers.append((W, b))
        return layers

    def _select(self, batch: Batch) -> tuple[Array, Array]:
        if batch.is_full:
            return self.dataset.features, self.dataset.labels
        idx = np.asarray(batch.indices, dtype=np.int64)
        if idx.size == 0 or idx.min() < 0 or idx.max() >= self.dataset.n:
            raise ConfigurationError(f"batch indices out of range for n={self.dataset.n}")
        return self.dataset.features[idx], self.dataset.labels[idx]

    def _act(self, z: Array) -> Array:
        if self.activation == "tanh":
            return np.tanh(z)
        return np.maximum(0.0, z)

    def _forward(self, w: Array, X: Array) -> tuple[Array, list[Array]]:
        """Returns logits and the list of layer inputs (activations before each layer)."""
        inputs = [X]
        a = X
        for k, (W, b) in enumerate(self.unpack(w)):
            z = a @ W + b
            if k < len(self._shapes) - 1:
                a = self._act(z)
                inputs.append(a)
            else:
                a = z
        return a, inputs

    @staticmethod
    def _loss_from_logits(logits: Array, y: Array) -> tuple[float, Array]:
        """Mean cross-entropy and the softmax probabilities (stable)."""
        shifted = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        probs = exp / exp.sum(axis=1, keepdims=True)
        log_z = np.log(exp.sum(axis=1))
        losses = log_z - shifted[np.arange(y.size), y]
        return float(losses.mean()), probs

    def value(self, w: Array, batch: Batch = FULL_BATCH) -> float:
        w = check_vector(w, self.dim)
        X, y = self._select(batch)
        logits, _ = self._forward(w, X)
        loss, _ = self._loss_from_logits(logits, y)
        return self._finite(loss, "value")

    def gradient(self, w: Array, batch: Batch = FULL_BATCH) -> Array:
        return self.value_and_gradient(w, batch)[1]

    def value_and_gradient(self, w: Array, batch: Batch = FULL_BATCH) -> tuple[float, Array]:
        w = check_vector(w, self.dim)
        X, y = self._select(batch)
        logits, inputs = self._forward(w, X)
        loss, probs = self._loss_from_logits(logits, y)
        loss = self._finite(loss, "value")

        layers = self.unpack(w)
        delta = probs.copy()
        delta[np.arange(y.size), y] -= 1.0
        delta /= y.size
        grads: list[Array] = [None] * len(layers)
        for k in range(len(layers) - 1, -1, -1):
            W, _ = layers[k]
            a_in = inputs[k]
            dW = a_in.T @ delta
            db = delta.sum(axis=0)
            grads[k] = (dW, db)
            if k > 0:
                upstream = delta @ W.T
                if self.activation == "tanh":
                    delta = upstream * (1.0 - a_in * a_in)
                else:
                    delta = upstream * (a_in > 0.0)
        flat = np.concatenate([np.concatenate([dW.ravel(), db]) for dW, db in grads])
        if not np.all(np.isfinite(flat)):
            raise NumericError("gradient is non-finite", quantity="gradient")
        return loss, flat

    def logits(self, w: Array, dataset: Dataset | None = None) -> Array:
        data = dataset if dataset is not None else self.dataset
        w = check_vector(w, self.dim)
        out, _ = self._forward(w, data.features)
        return out

    def accuracy(self, w: Array, dataset: Dataset | None = None) -> float:
        data = dataset if dataset is not None else self.dataset
        pred = np.argmax(self.logits(w, data), axis=1)
        return float(np.mean(pred == data.labels))
