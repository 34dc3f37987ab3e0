"""Mini-batch Adam training with early stopping, and model (de)serialization."""
from __future__ import annotations

import io
import json
import logging
import zipfile
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .. import HORIZON, INPUT_WINDOW
from ..pipeline import MinMaxScaler, WindowSet
from .adam import AdamState, adam_step
from .network import NetworkParams, forward, init_network, loss_and_grads, mse_loss

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"training diverged (non-finite loss) at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class ModelConfig:
    lstm_units: int = 50
    dense_units: tuple[int, ...] = (50,)
    dropout_enabled: tuple[bool, ...] = (False,)
    dropout_rate: float = 0.1
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 70
    patience: int = 5
    input_window: int = INPUT_WINDOW
    horizon: int = HORIZON
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dense_units", tuple(int(u) for u in self.dense_units))
        object.__setattr__(self, "dropout_enabled", tuple(bool(d) for d in self.dropout_enabled))
        if len(self.dense_units) != len(self.dropout_enabled):
            raise ValueError("dense_units and dropout_enabled must have equal length")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError(f"dropout rate must be in [0, 1), got {self.dropout_rate}")

    @property
    def n_dense_layers(self) -> int:
        return len(self.dense_units)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dense_units"] = list(self.dense_units)
        d["dropout_enabled"] = list(self.dropout_enabled)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**{**d, "dense_units": tuple(d["dense_units"]), "dropout_enabled": tuple(d["dropout_enabled"])})


@dataclass
class TrainedModel:
    config: ModelConfig
    params: NetworkParams
    best_epoch: int
    history: list[tuple[int, float, float]]
    scalers: tuple[MinMaxScaler, ...] = ()
    feature_columns: tuple[str, ...] = ()
    series_keys: tuple[tuple[str, str], ...] = ()

    @property
    def scaler(self) -> Optional[MinMaxScaler]:
        return self.scalers[0] if self.scalers else None

    @property
    def epochs_run(self) -> int:
        return len(self.history)

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        return predict(self, inputs)


def predict(model: TrainedModel, inputs: np.ndarray, batch: int = 1024) -> np.ndarray:
    """Inference-mode outputs in scaled units; (N, T, F) -> (N, n_outputs)."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 2:
        return forward(model.params, inputs)
    if len(inputs) == 0:
        return np.empty((0, model.params.n_outputs))
    return np.concatenate([forward(model.params, inputs[i : i + batch]) for i in range(0, len(inputs), batch)])


def evaluate_loss(params: NetworkParams, samples: WindowSet) -> float:
    if len(samples) == 0:
        return float("nan")
    pred = np.concatenate(
        [forward(params, samples.inputs[i : i + 1024]) for i in range(0, len(samples), 1024)]
    )
    return mse_loss(pred, samples.targets)


ValidationHook = Callable[[int, NetworkParams], float]


def train(
    config: ModelConfig,
    train_set: WindowSet,
    validation_set: WindowSet,
    init_params: Optional[NetworkParams] = None,
    validation_loss: Optional[ValidationHook] = None,
) -> TrainedModel:
    """Train until validation MSE stalls for ``patience`` epochs or ``max_epochs`` is hit.

    ``validation_loss(epoch, params)`` replaces the validation MSE when given.
    The returned parameters are those of the best validation epoch; with
    ``init_params`` the starting weights compete as epoch 0.
    """
    if len(train_set) == 0:
        raise ValueError("empty training set")
    if len(validation_set) == 0 and validation_loss is None:
        raise ValueError("empty validation set")
    rng = np.random.default_rng(config.rng_seed)
    n_outputs = train_set.targets.shape[1]
    if init_params is None:
        params = init_network(
            train_set.inputs.shape[2], config.lstm_units, config.dense_units, n_outputs, rng,
            config.dropout_enabled, config.dropout_rate,
        )
    else:
        params = init_params.copy()
        params.dropout = list(config.dropout_enabled)
        params.dropout_rate = config.dropout_rate
    tensors = params.tensors()
    state = AdamState()
    best_loss, best_epoch, best = np.inf, 0, params.copy()
    if init_params is not None:
        # a warm start is itself a checkpoint (epoch 0): fine-tuning never returns worse weights
        best_loss = float(validation_loss(0, params) if validation_loss else evaluate_loss(params, validation_set))
    history = []
    since_best = 0
    n = len(train_set)
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = loss_and_grads(params, train_set.inputs[idx], train_set.targets[idx], True, rng)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            total += loss * len(idx)
            tensors, state = adam_step(tensors, grads, state, config.learning_rate)
            params = params.with_tensors(tensors)
        train_loss = total / n
        val = validation_loss(epoch, params) if validation_loss else evaluate_loss(params, validation_set)
        if not np.isfinite(val):
            raise TrainingDivergedError(epoch)
        history.append((epoch, train_loss, float(val)))
        log.debug("epoch %d train %.6f val %.6f", epoch, train_loss, val)
        if val < best_loss:
            best_loss, best_epoch, best = val, epoch, params.copy()
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break
    return TrainedModel(config, best, best_epoch, history)


# -- serialization -----------------------------------------------------------

_FIXED_TIME = (1980, 1, 1, 0, 0, 0)


def _write_npy(zf: zipfile.ZipFile, name: str, arr: np.ndarray) -> None:
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
    info = zipfile.ZipInfo(name + ".npy", date_time=_FIXED_TIME)
    info.compress_type = zipfile.ZIP_DEFLATED
    zf.writestr(info, buf.getvalue())


def save_model(path, model: TrainedModel) -> None:
    """Write a versioned ``.npz`` archive; byte-identical for identical models."""
    meta = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "best_epoch": model.best_epoch,
        "history": [list(h) for h in model.history],
        "scalers": [s.to_text() for s in model.scalers],
        "feature_columns": list(model.feature_columns),
        "series_keys": [list(k) for k in model.series_keys],
        "dropout": list(model.params.dropout),
        "dropout_rate": model.params.dropout_rate,
        "n_head": len(model.params.head),
    }
    with zipfile.ZipFile(path, "w") as zf:
        info = zipfile.ZipInfo("meta.json", date_time=_FIXED_TIME)
        zf.writestr(info, json.dumps(meta, sort_keys=True, indent=1))
        for name, arr in model.params.tensors().items():
            _write_npy(zf, name, arr)


def load_model(path) -> TrainedModel:
    from .lstm import LstmParams
    from .network import LINEAR, RELU, DenseParams

    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format {meta.get('format_version')}")
        arrays = {
            n[:-4]: np.lib.format.read_array(io.BytesIO(zf.read(n)), allow_pickle=False)
            for n in zf.namelist() if n.endswith(".npy")
        }
    n_head = meta["n_head"]
    head = [
        DenseParams(arrays[f"head{k}.W"], arrays[f"head{k}.b"], LINEAR if k == n_head - 1 else RELU)
        for k in range(n_head)
    ]
    params = NetworkParams(
        LstmParams(arrays["lstm.W"], arrays["lstm.R"], arrays["lstm.b"]), head,
        meta["dropout"], meta["dropout_rate"],
    )
    return TrainedModel(
        ModelConfig.from_dict(meta["config"]),
        params,
        meta["best_epoch"],
        [tuple(h) for h in meta["history"]],
        tuple(MinMaxScaler.from_text(t) for t in meta["scalers"]),
        tuple(meta["feature_columns"]),
        tuple(tuple(k) for k in meta["series_keys"]),
    )
