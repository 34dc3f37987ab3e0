"""LSTM + ReLU dense head + linear output, with inverted dropout and MSE."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lstm import LstmParams, glorot, init_lstm, lstm_backward, lstm_forward

RELU = "relu"
LINEAR = "linear"


class ShapeError(ValueError):
    pass


class ConfigError(ValueError):
    pass


@dataclass
class DenseParams:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str = RELU


@dataclass
class NetworkParams:
    lstm: LstmParams
    head: list[DenseParams]
    dropout: list[bool] = field(default_factory=list)
    dropout_rate: float = 0.0

    @property
    def n_features(self) -> int:
        return self.lstm.n_features

    @property
    def n_outputs(self) -> int:
        return self.head[-1].W.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        """Flat name -> array view of every trainable tensor (shared memory)."""
        out = {"lstm.W": self.lstm.W, "lstm.R": self.lstm.R, "lstm.b": self.lstm.b}
        for k, layer in enumerate(self.head):
            out[f"head{k}.W"] = layer.W
            out[f"head{k}.b"] = layer.b
        return out

    def with_tensors(self, tensors: dict[str, np.ndarray]) -> "NetworkParams":
        lstm = LstmParams(tensors["lstm.W"], tensors["lstm.R"], tensors["lstm.b"])
        head = [
            DenseParams(tensors[f"head{k}.W"], tensors[f"head{k}.b"], layer.activation)
            for k, layer in enumerate(self.head)
        ]
        return NetworkParams(lstm, head, list(self.dropout), self.dropout_rate)

    def copy(self) -> "NetworkParams":
        return self.with_tensors({k: v.copy() for k, v in self.tensors().items()})


def init_network(
    n_features: int,
    lstm_units: int,
    dense_units,
    n_outputs: int,
    rng: np.random.Generator,
    dropout=None,
    dropout_rate: float = 0.0,
) -> NetworkParams:
    dense_units = list(dense_units)
    dropout = list(dropout) if dropout is not None else [False] * len(dense_units)
    if len(dropout) != len(dense_units):
        raise ConfigError("one dropout flag per dense layer required")
    if any(dropout) and not 0 <= dropout_rate < 1:
        raise ConfigError(f"dropout rate must be in [0, 1), got {dropout_rate}")
    lstm = init_lstm(n_features, lstm_units, rng)
    head = []
    width = lstm_units
    for units in dense_units:
        head.append(DenseParams(glorot(rng, width, units, (units, width)), np.zeros(units), RELU))
        width = units
    head.append(DenseParams(glorot(rng, width, n_outputs, (n_outputs, width)), np.zeros(n_outputs), LINEAR))
    return NetworkParams(lstm, head, dropout, dropout_rate)


def dropout_apply(activations, rate: float, training: bool, rng: np.random.Generator | None = None):
    """Inverted dropout; returns (output, mask) where mask is None when nothing is dropped."""
    if not 0 <= rate < 1:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    activations = np.asarray(activations, dtype=float)
    if not training or rate == 0:
        return activations, None
    keep = rng.random(activations.shape) >= rate
    mask = keep / (1.0 - rate)
    return activations * mask, mask


def forward(params: NetworkParams, x: np.ndarray, training: bool = False, rng=None, return_cache: bool = False):
    """Batched forward pass; ``x`` is (B, T, F) or a single (T, F) window."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[2] != params.n_features:
        raise ShapeError(f"expected input (B, T, {params.n_features}), got {x.shape}")
    _, (h_last, _), lstm_cache = lstm_forward(x, params.lstm, return_cache=True)
    a = h_last
    layer_inputs, masks, preacts = [], [], []
    last = len(params.head) - 1
    for k, layer in enumerate(params.head):
        layer_inputs.append(a)
        z = a @ layer.W.T + layer.b
        preacts.append(z)
        if k == last:
            a = z
            break
        a = np.maximum(z, 0.0)
        mask = None
        if k < len(params.dropout) and params.dropout[k]:
            a, mask = dropout_apply(a, params.dropout_rate, training, rng)
        masks.append(mask)
    out = a[0] if single else a
    if return_cache:
        return out, {"lstm": lstm_cache, "inputs": layer_inputs, "preacts": preacts, "masks": masks}
    return out


def mse_loss(pred, target) -> float:
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ShapeError(f"shape mismatch {pred.shape} vs {target.shape}")
    return float(np.mean((pred - target) ** 2))


def backward(params: NetworkParams, cache: dict, pred: np.ndarray, target: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of the batch-mean MSE w.r.t. every tensor, keyed like ``params.tensors()``."""
    d = 2.0 * (pred - target) / pred.size
    grads = {}
    for k in range(len(params.head) - 1, -1, -1):
        layer = params.head[k]
        if k < len(params.head) - 1:
            mask = cache["masks"][k]
            if mask is not None:
                d = d * mask
            d = d * (cache["preacts"][k] > 0)
        grads[f"head{k}.W"] = d.T @ cache["inputs"][k]
        grads[f"head{k}.b"] = d.sum(axis=0)
        d = d @ layer.W
    lstm_grads, _ = lstm_backward(d, params.lstm, cache["lstm"])
    grads["lstm.W"] = lstm_grads.W
    grads["lstm.R"] = lstm_grads.R
    grads["lstm.b"] = lstm_grads.b
    return grads


def loss_and_grads(params: NetworkParams, x, y, training: bool = False, rng=None):
    pred, cache = forward(params, x, training=training, rng=rng, return_cache=True)
    return mse_loss(pred, y), backward(params, cache, pred, np.asarray(y, dtype=float))
