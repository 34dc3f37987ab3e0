"""Vanilla LSTM layer (no peepholes), batched forward pass and BPTT."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GATES = ("input", "forget", "candidate", "output")


class NumericError(ValueError):
    pass


def sigmoid(z):
    # tanh form avoids overflow warnings for large |z|
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class LstmParams:
    """Stacked gate weights, rows ordered input, forget, candidate, output.

    W: (4H, F) input weights, R: (4H, H) recurrent weights, b: (4H,) biases.
    """

    W: np.ndarray
    R: np.ndarray
    b: np.ndarray

    @property
    def hidden(self) -> int:
        return self.R.shape[1]

    @property
    def n_features(self) -> int:
        return self.W.shape[1]

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        k = GATES.index(name)
        H = self.hidden
        s = slice(k * H, (k + 1) * H)
        return self.W[s], self.R[s], self.b[s]

    @classmethod
    def from_gates(cls, gates: dict) -> "LstmParams":
        W = np.concatenate([gates[g][0] for g in GATES])
        R = np.concatenate([gates[g][1] for g in GATES])
        b = np.concatenate([gates[g][2] for g in GATES])
        return cls(W, R, b)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_lstm(n_features: int, hidden: int, rng: np.random.Generator) -> LstmParams:
    W = glorot(rng, n_features, 4 * hidden, (4 * hidden, n_features))
    R = glorot(rng, hidden, 4 * hidden, (4 * hidden, hidden))
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0
    return LstmParams(W, R, b)


def lstm_forward(x_seq: np.ndarray, params: LstmParams, return_cache: bool = False):
    """Run the recursion from zero initial state.

    ``x_seq`` is (T, F) or batched (B, T, F). Returns ``(h_seq, (h_T, c_T))``
    and, when ``return_cache`` is set, the per-step values needed by
    :func:`lstm_backward`.
    """
    x = np.asarray(x_seq, dtype=float)
    single = x.ndim == 2
    if single:
        x = x[None]
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite LSTM input")
    B, T, _ = x.shape
    H = params.hidden
    xw = x @ params.W.T + params.b  # (B, T, 4H)
    Rt = params.R.T
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    h_seq = np.empty((B, T, H))
    if return_cache:
        acts = np.empty((B, T, 4 * H))
        cs = np.empty((B, T, H))
        tcs = np.empty((B, T, H))
    for t in range(T):
        z = xw[:, t] + h @ Rt
        a = np.empty_like(z)
        a[:, : 2 * H] = sigmoid(z[:, : 2 * H])
        a[:, 2 * H : 3 * H] = np.tanh(z[:, 2 * H : 3 * H])
        a[:, 3 * H :] = sigmoid(z[:, 3 * H :])
        c = a[:, H : 2 * H] * c + a[:, :H] * a[:, 2 * H : 3 * H]
        tc = np.tanh(c)
        h = a[:, 3 * H :] * tc
        h_seq[:, t] = h
        if return_cache:
            acts[:, t] = a
            cs[:, t] = c
            tcs[:, t] = tc
    final = (h, c)
    if single:
        h_seq, final = h_seq[0], (h[0], c[0])
    if return_cache:
        return h_seq, final, {"x": x, "acts": acts, "c": cs, "tanh_c": tcs, "h": h_seq if not single else h_seq[None]}
    return h_seq, final


def lstm_backward(dh_last: np.ndarray, params: LstmParams, cache: dict) -> tuple[LstmParams, np.ndarray]:
    """Backpropagate a gradient on the final hidden state through all steps.

    Returns parameter gradients and the gradient w.r.t. the input sequence.
    """
    x, acts, cs, tcs, hs = cache["x"], cache["acts"], cache["c"], cache["tanh_c"], cache["h"]
    B, T, _ = x.shape
    H = params.hidden
    R = params.R
    dz_all = np.empty((B, T, 4 * H))
    dR = np.zeros_like(R)
    dh = dh_last.reshape(B, H).copy()
    dc = np.zeros((B, H))
    zeros = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        a = acts[:, t]
        i, f, g, o = a[:, :H], a[:, H : 2 * H], a[:, 2 * H : 3 * H], a[:, 3 * H :]
        tc = tcs[:, t]
        c_prev = cs[:, t - 1] if t > 0 else zeros
        h_prev = hs[:, t - 1] if t > 0 else zeros
        dc = dc + dh * o * (1.0 - tc * tc)
        dz = dz_all[:, t]
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H : 2 * H] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * H : 3 * H] = dc * i * (1.0 - g * g)
        dz[:, 3 * H :] = dh * tc * o * (1.0 - o)
        dR += dz.T @ h_prev
        dh = dz @ R
        dc = dc * f
    flat = dz_all.reshape(B * T, 4 * H)
    dW = flat.T @ x.reshape(B * T, -1)
    db = flat.sum(axis=0)
    dx = dz_all @ params.W
    return LstmParams(dW, dR, db), dx
