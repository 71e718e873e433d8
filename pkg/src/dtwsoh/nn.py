"""Two-layer LSTM sequence-to-one regressor with a dense ReLU head, trained by
backpropagation through time and Adam on the RMSE objective.

Gate blocks are stacked column-wise in the order forget, input, candidate,
output, so ``W[:, :H]`` is ``W_f`` and so on. Sequences are time-major inside
the kernels: ``(T, B, features)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numba import njit

from dtwsoh.errors import (
    CheckpointMismatch,
    EmptyInput,
    InvalidConfig,
    LengthMismatch,
    NonFiniteActivation,
    ShapeMismatch,
)

GATES = ("f", "i", "C", "o")
CHECKPOINT_FORMAT = "dtwsoh-lstm"
CHECKPOINT_VERSION = 1


def sigmoid(z):
    return 0.5 * (np.tanh(0.5 * z) + 1.0)


# --------------------------------------------------------------------------
# parameter containers

@dataclass(frozen=True)
class LstmLayerParams:
    """Views onto one layer's stacked weights (``W``: in x 4H, ``U``: H x 4H, ``b``: 4H)."""

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    @property
    def hidden_size(self) -> int:
        return int(self.U.shape[0])

    @property
    def input_size(self) -> int:
        return int(self.W.shape[0])

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        k = GATES.index(name)
        h = self.hidden_size
        sl = slice(k * h, (k + 1) * h)
        return self.W[:, sl], self.U[:, sl], self.b[sl]

    def check(self) -> None:
        h = self.hidden_size
        if self.U.shape != (h, 4 * h) or self.W.ndim != 2 or self.W.shape[1] != 4 * h or self.b.shape != (4 * h,):
            raise ShapeMismatch(f"inconsistent LSTM shapes W{self.W.shape} U{self.U.shape} b{self.b.shape}")


@dataclass(frozen=True)
class LstmState:
    h: np.ndarray
    C: np.ndarray

    @classmethod
    def zeros(cls, hidden_size: int) -> "LstmState":
        return cls(np.zeros(hidden_size), np.zeros(hidden_size))


@dataclass(frozen=True)
class Architecture:
    input_size: int = 3
    hidden1: int = 200
    hidden2: int = 300
    dense: int = 100

    def shapes(self) -> dict[str, tuple[int, ...]]:
        h1, h2 = self.hidden1, self.hidden2
        return {
            "l1.W": (self.input_size, 4 * h1), "l1.U": (h1, 4 * h1), "l1.b": (4 * h1,),
            "l2.W": (h1, 4 * h2), "l2.U": (h2, 4 * h2), "l2.b": (4 * h2,),
            "dense.W": (h2, self.dense), "dense.b": (self.dense,),
            "head.W": (self.dense, 1), "head.b": (1,),
        }


FULL_ARCH = Architecture(3, 200, 300, 100)
TINY_ARCH = Architecture(3, 8, 8, 8)


@dataclass
class LstmModel:
    arch: Architecture
    params: dict[str, np.ndarray]

    @property
    def layer1(self) -> LstmLayerParams:
        return LstmLayerParams(self.params["l1.W"], self.params["l1.U"], self.params["l1.b"])

    @property
    def layer2(self) -> LstmLayerParams:
        return LstmLayerParams(self.params["l2.W"], self.params["l2.U"], self.params["l2.b"])

    def copy(self) -> "LstmModel":
        return LstmModel(self.arch, {k: v.copy() for k, v in self.params.items()})

    def check(self) -> None:
        for name, shape in self.arch.shapes().items():
            got = self.params.get(name)
            if got is None or got.shape != shape:
                raise ShapeMismatch(f"parameter {name}: expected shape {shape}, got "
                                    f"{None if got is None else got.shape}")
            if not np.all(np.isfinite(got)):
                raise NonFiniteActivation(f"parameter {name} has non-finite entries")


def init_model(arch: Architecture = FULL_ARCH, seed: int = 42) -> LstmModel:
    """Glorot-uniform weights per gate block, forget-gate bias 1, other biases 0."""
    rng = np.random.default_rng(seed)

    def glorot(fan_in: int, fan_out: int, shape: tuple[int, ...]) -> np.ndarray:
        lim = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-lim, lim, size=shape)

    params: dict[str, np.ndarray] = {}
    for tag, n_in, h in (("l1", arch.input_size, arch.hidden1), ("l2", arch.hidden1, arch.hidden2)):
        params[f"{tag}.W"] = np.concatenate([glorot(n_in, h, (n_in, h)) for _ in GATES], axis=1)
        params[f"{tag}.U"] = np.concatenate([glorot(h, h, (h, h)) for _ in GATES], axis=1)
        b = np.zeros(4 * h)
        b[:h] = 1.0
        params[f"{tag}.b"] = b
    params["dense.W"] = glorot(arch.hidden2, arch.dense, (arch.hidden2, arch.dense))
    params["dense.b"] = np.zeros(arch.dense)
    params["head.W"] = glorot(arch.dense, 1, (arch.dense, 1))
    params["head.b"] = np.zeros(1)
    return LstmModel(arch, params)


# --------------------------------------------------------------------------
# single step (reference form of the gate equations)

def lstm_cell_forward(params: LstmLayerParams, x_t, prev: LstmState) -> LstmState:
    x_t = np.asarray(x_t, dtype=np.float64)
    h = params.hidden_size
    if x_t.shape != (params.input_size,) or prev.h.shape != (h,) or prev.C.shape != (h,):
        raise ShapeMismatch(f"x{x_t.shape} h{prev.h.shape} C{prev.C.shape} vs layer {params.input_size}->{h}")
    z = x_t @ params.W + prev.h @ params.U + params.b
    f = sigmoid(z[:h])
    i = sigmoid(z[h:2 * h])
    c_tilde = np.tanh(z[2 * h:3 * h])
    o = sigmoid(z[3 * h:])
    c = f * prev.C + i * c_tilde
    return LstmState(o * np.tanh(c), c)


# --------------------------------------------------------------------------
# sequence kernels

@njit(cache=True)
def _layer_forward(xw, u):
    # xw: (T, B, 4H) input projection incl. bias; returns hs/cs (T+1, B, H), acts (T, B, 4H)
    t_len, batch, four_h = xw.shape
    h = four_h // 4
    hs = np.zeros((t_len + 1, batch, h))
    cs = np.zeros((t_len + 1, batch, h))
    acts = np.empty((t_len, batch, four_h))
    for t in range(t_len):
        z = xw[t] + np.dot(hs[t], u)
        for b in range(batch):
            for k in range(h):
                f = 0.5 * (math.tanh(0.5 * z[b, k]) + 1.0)
                i = 0.5 * (math.tanh(0.5 * z[b, h + k]) + 1.0)
                g = math.tanh(z[b, 2 * h + k])
                o = 0.5 * (math.tanh(0.5 * z[b, 3 * h + k]) + 1.0)
                c = f * cs[t, b, k] + i * g
                cs[t + 1, b, k] = c
                hs[t + 1, b, k] = o * math.tanh(c)
                acts[t, b, k] = f
                acts[t, b, h + k] = i
                acts[t, b, 2 * h + k] = g
                acts[t, b, 3 * h + k] = o
    return hs, cs, acts


@njit(cache=True)
def _layer_backward(dh_out, hs, cs, acts, u):
    # dh_out: (T, B, H) loss gradient w.r.t. each emitted h_t; returns dz (T, B, 4H), dU
    t_len, batch, h = dh_out.shape
    dz = np.empty((t_len, batch, 4 * h))
    du = np.zeros(u.shape)
    ut = np.ascontiguousarray(u.T)
    dh_next = np.zeros((batch, h))
    dc_next = np.zeros((batch, h))
    for t in range(t_len - 1, -1, -1):
        for b in range(batch):
            for k in range(h):
                f = acts[t, b, k]
                i = acts[t, b, h + k]
                g = acts[t, b, 2 * h + k]
                o = acts[t, b, 3 * h + k]
                tc = math.tanh(cs[t + 1, b, k])
                dh = dh_out[t, b, k] + dh_next[b, k]
                do = dh * tc
                dc = dc_next[b, k] + dh * o * (1.0 - tc * tc)
                dz[t, b, k] = dc * cs[t, b, k] * f * (1.0 - f)
                dz[t, b, h + k] = dc * g * i * (1.0 - i)
                dz[t, b, 2 * h + k] = dc * i * (1.0 - g * g)
                dz[t, b, 3 * h + k] = do * o * (1.0 - o)
                dc_next[b, k] = dc * f
        du += np.dot(np.ascontiguousarray(hs[t].T), dz[t])
        dh_next = np.dot(dz[t], ut)
    return dz, du


def _as_batch(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3 or X.shape[1] < 1:
        raise ShapeMismatch(f"expected (M, features) or (B, M, features) input, got shape {X.shape}")
    return X


@dataclass
class _Trace:
    x: np.ndarray          # (T, B, in)
    l1: tuple
    l2: tuple
    dense_pre: np.ndarray  # (B, D)
    dense_out: np.ndarray  # (B, D)
    preds: np.ndarray      # (B,)


def _forward_trace(model: LstmModel, X) -> _Trace:
    X = _as_batch(X)
    p = model.params
    if X.shape[2] != model.arch.input_size:
        raise ShapeMismatch(f"input has {X.shape[2]} columns, model expects {model.arch.input_size}")
    x = np.ascontiguousarray(X.transpose(1, 0, 2))
    l1 = _layer_forward(np.ascontiguousarray(x @ p["l1.W"] + p["l1.b"]), p["l1.U"])
    h1 = l1[0][1:]
    l2 = _layer_forward(np.ascontiguousarray(h1 @ p["l2.W"] + p["l2.b"]), p["l2.U"])
    last = l2[0][-1]
    pre = last @ p["dense.W"] + p["dense.b"]
    act = np.maximum(pre, 0.0)
    preds = (act @ p["head.W"])[:, 0] + p["head.b"][0]
    return _Trace(x, l1, l2, pre, act, preds)


def forward(model: LstmModel, X) -> float | np.ndarray:
    """Predicted capacity for one ``(M, 3)`` matrix (float) or a ``(B, M, 3)`` batch (array)."""
    single = np.ndim(X) == 2
    preds = _forward_trace(model, X).preds
    if not np.all(np.isfinite(preds)):
        raise NonFiniteActivation("forward pass produced a non-finite prediction")
    return float(preds[0]) if single else preds


predict_matrix = forward


def loss_rmse(preds, targets) -> float:
    preds = np.asarray(preds, dtype=np.float64).ravel()
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if preds.shape != targets.shape:
        raise LengthMismatch(f"{preds.size} predictions vs {targets.size} targets")
    if preds.size == 0:
        raise EmptyInput("RMSE of an empty set")
    return float(np.sqrt(np.mean((preds - targets) ** 2)))


def backward(model: LstmModel, X, targets) -> tuple[float, dict[str, np.ndarray]]:
    """RMSE over the batch and its gradient for every parameter."""
    trace = _forward_trace(model, X)
    y = np.asarray(targets, dtype=np.float64).ravel()
    if y.shape != trace.preds.shape:
        raise LengthMismatch(f"{trace.preds.size} predictions vs {y.size} targets")
    p = model.params
    err = trace.preds - y
    loss = float(np.sqrt(np.mean(err ** 2)))
    if not math.isfinite(loss):
        raise NonFiniteActivation("loss is non-finite")
    batch = err.size
    dpred = err / (batch * loss) if loss > 0 else np.zeros_like(err)

    g: dict[str, np.ndarray] = {}
    g["head.b"] = np.array([dpred.sum()])
    g["head.W"] = trace.dense_out.T @ dpred[:, None]
    dact = dpred[:, None] * p["head.W"][:, 0][None, :]
    dpre = dact * (trace.dense_pre > 0)
    g["dense.b"] = dpre.sum(axis=0)
    hs2 = trace.l2[0]
    g["dense.W"] = hs2[-1].T @ dpre
    dh_last = dpre @ p["dense.W"].T

    t_len = trace.x.shape[0]
    dh2 = np.zeros((t_len, batch, model.arch.hidden2))
    dh2[-1] = dh_last
    dz2, du2 = _layer_backward(dh2, hs2, trace.l2[1], trace.l2[2], p["l2.U"])
    h1 = trace.l1[0][1:]
    g["l2.U"] = du2
    g["l2.W"] = h1.reshape(-1, h1.shape[-1]).T @ dz2.reshape(-1, dz2.shape[-1])
    g["l2.b"] = dz2.sum(axis=(0, 1))
    dh1 = np.ascontiguousarray(dz2 @ p["l2.W"].T)
    dz1, du1 = _layer_backward(dh1, trace.l1[0], trace.l1[1], trace.l1[2], p["l1.U"])
    g["l1.U"] = du1
    g["l1.W"] = trace.x.reshape(-1, trace.x.shape[-1]).T @ dz1.reshape(-1, dz1.shape[-1])
    g["l1.b"] = dz1.sum(axis=(0, 1))
    return loss, g


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float | None) -> float:
    """Scale ``grads`` in place so their global L2 norm is at most ``max_norm``; returns the pre-clip norm."""
    norm = math.sqrt(sum(float(np.sum(v * v)) for v in grads.values()))
    if max_norm is not None and norm > max_norm:
        scale = max_norm / norm
        for v in grads.values():
            v *= scale
    return norm


# --------------------------------------------------------------------------
# Adam

@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState) -> tuple[dict[str, np.ndarray], AdamState]:
    """Bias-corrected Adam update, applied to ``params`` in place."""
    for name, g in grads.items():
        if name not in params or params[name].shape != g.shape:
            raise ShapeMismatch(f"gradient {name} shape {g.shape} does not match parameter")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for name, g in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(params[name])
            state.v[name] = np.zeros_like(params[name])
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        params[name] -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


# --------------------------------------------------------------------------
# training

@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    lr: float = 1e-3
    seed: int = 42
    shuffle: bool = True
    clip_norm: float | None = 5.0
    batch_size: int = 1

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise InvalidConfig(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise InvalidConfig(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr < 0:
            raise InvalidConfig(f"lr must be >= 0, got {self.lr}")


@dataclass(frozen=True)
class Sample:
    """One training/evaluation example: an ``(M, 3)`` input and its capacity label."""

    cycle_id: int
    inputs: np.ndarray
    target: float
    provenance: str = ""


@dataclass
class TrainResult:
    model: LstmModel
    history: list[float]
    best_epoch: int
    optimizer: AdamState


def _stack(samples: Sequence[Sample]) -> tuple[np.ndarray, np.ndarray]:
    lengths = {s.inputs.shape for s in samples}
    if len(lengths) != 1:
        raise ShapeMismatch(f"samples have differing input shapes {sorted(lengths)}")
    return np.stack([s.inputs for s in samples]), np.array([s.target for s in samples])


def evaluate(model: LstmModel, samples: Sequence[Sample], chunk: int = 64) -> np.ndarray:
    """Predictions for equal-length samples, in order."""
    if not samples:
        return np.zeros(0)
    X, _ = _stack(samples)
    out = np.concatenate([np.atleast_1d(forward(model, X[k:k + chunk])) for k in range(0, len(X), chunk)])
    return out


def train(model: LstmModel, samples: Sequence[Sample], cfg: TrainConfig | None = None,
          progress: Callable[[int, float], None] | None = None) -> TrainResult:
    """Shuffled minibatch (default: per-sample) Adam training on the RMSE objective.

    ``history[e]`` is the training-set RMSE after epoch ``e``; the returned model
    holds the parameters from the epoch with the lowest such RMSE.
    """
    cfg = cfg or TrainConfig()
    if not samples:
        raise EmptyInput("training set is empty")
    X, y = _stack(samples)
    model = model.copy()
    model.check()
    rng = np.random.default_rng(cfg.seed)
    opt = AdamState(lr=cfg.lr)
    history: list[float] = []
    best = (math.inf, -1, model.copy())
    n = len(samples)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            try:
                _, grads = backward(model, X[idx], y[idx])
            except NonFiniteActivation as exc:
                ids = [samples[k].cycle_id for k in idx]
                raise NonFiniteActivation(f"epoch {epoch + 1}, cycle(s) {ids}: {exc}") from exc
            clip_gradients(grads, cfg.clip_norm)
            adam_step(model.params, grads, opt)
        try:
            rmse = loss_rmse(evaluate(model, samples), y)
        except NonFiniteActivation as exc:
            raise NonFiniteActivation(f"epoch {epoch + 1}: {exc}") from exc
        history.append(rmse)
        if progress is not None:
            progress(epoch + 1, rmse)
        if rmse < best[0]:
            best = (rmse, epoch, model.copy())
    return TrainResult(best[2], history, best[1] + 1, opt)


# --------------------------------------------------------------------------
# checkpoints

def save_checkpoint(model: LstmModel, path: str | Path, metadata: dict | None = None) -> Path:
    """JSON checkpoint: architecture, parameters with shape headers and free-form metadata
    (sync reference id, M, scaling flag, ...)."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "architecture": {"input_size": model.arch.input_size, "hidden1": model.arch.hidden1,
                         "hidden2": model.arch.hidden2, "dense": model.arch.dense},
        "metadata": metadata or {},
        "params": {name: {"shape": list(v.shape), "data": v.ravel().tolist()}
                   for name, v in sorted(model.params.items())},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    return path


def load_checkpoint(path: str | Path, expected_length: int | None = None) -> tuple[LstmModel, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointMismatch(f"{path}: not a {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION} checkpoint")
    arch = Architecture(**doc["architecture"])
    params = {name: np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
              for name, entry in doc["params"].items()}
    model = LstmModel(arch, params)
    model.check()
    meta = doc.get("metadata", {})
    if expected_length is not None and meta.get("M") is not None and int(meta["M"]) != int(expected_length):
        raise CheckpointMismatch(f"{path}: model trained on sequences of length {meta['M']}, got {expected_length}")
    return model, meta
