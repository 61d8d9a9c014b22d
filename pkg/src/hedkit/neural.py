"""Small fully connected network kit with manual backprop.

Everything is float64 and deterministic: seeded init, seeded batch order,
momentum SGD. backward_batch propagates an arbitrary upstream gradient and
also returns the gradient w.r.t. the input, so networks can be chained
(prediction heads, embedding tables) without an autograd framework.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimError, EmptyDataset, FormatError, InvalidInput

MODEL_FORMAT_VERSION = 1

ACTIVATIONS = ("tanh", "sigmoid", "identity", "relu")


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if name == "identity":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    raise ConfigError(f"unknown activation '{name}'")


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Derivative of the activation, from pre-activation z and output a."""
    if name == "tanh":
        return 1.0 - a * a
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "identity":
        return np.ones_like(z)
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    raise ConfigError(f"unknown activation '{name}'")


@dataclass
class Layer:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation '{self.activation}'")
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise DimError(f"layer shapes inconsistent: W {self.W.shape}, "
                           f"b {self.b.shape}")
        if not (np.all(np.isfinite(self.W)) and np.all(np.isfinite(self.b))):
            raise InvalidInput("layer parameters must be finite")


@dataclass
class MlpModel:
    layers: list = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("model needs at least one layer")
        for prev, cur in zip(self.layers, self.layers[1:]):
            if cur.W.shape[1] != prev.W.shape[0]:
                raise DimError(
                    f"layer dims do not chain: {prev.W.shape} -> {cur.W.shape}")

    @property
    def input_dim(self) -> int:
        return self.layers[0].W.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].W.shape[0]

    def copy(self) -> "MlpModel":
        return MlpModel(layers=[
            Layer(W=l.W.copy(), b=l.b.copy(), activation=l.activation)
            for l in self.layers])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 200
    batch_size: int = 16
    seed: int = 0
    momentum: float = 0.9

    def __post_init__(self):
        # learning_rate 0 is allowed and means "no updates"
        if self.learning_rate < 0:
            raise InvalidInput("learning_rate must be non-negative")
        if self.epochs < 1:
            raise InvalidInput("epochs must be at least 1")
        if self.batch_size < 1:
            raise InvalidInput("batch_size must be at least 1")


def init_mlp(dims, activations, seed: int = 0) -> MlpModel:
    """Uniform(-a, a) init with a = sqrt(6/(fan_in+fan_out)) per layer."""
    if len(activations) != len(dims) - 1:
        raise ConfigError(
            f"{len(dims)} dims need {len(dims) - 1} activations, "
            f"got {len(activations)}")
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out, act in zip(dims, dims[1:], activations):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        layers.append(Layer(W=rng.uniform(-a, a, size=(fan_out, fan_in)),
                            b=np.zeros(fan_out), activation=act))
    return MlpModel(layers=layers)


def forward_batch(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """(N, in) -> (N, out)."""
    a = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if a.shape[1] != model.input_dim:
        raise DimError(f"input dim {a.shape[1]} != model dim {model.input_dim}")
    for layer in model.layers:
        a = _act(layer.activation, a @ layer.W.T + layer.b)
    return a


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Single vector convenience wrapper."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimError(f"expected 1-D input, got shape {x.shape}")
    return forward_batch(model, x[None, :])[0]


def loss_mse(pred, target) -> float:
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise DimError(f"shape mismatch: {p.shape} vs {t.shape}")
    return float(np.mean((p - t) ** 2))


def backward_batch(model: MlpModel, x: np.ndarray, d_out: np.ndarray):
    """Backprop an upstream gradient d_out = dL/d(output), shape (N, out).

    Returns ([(dW, db) per layer], dL/dx of shape (N, in)). Gradients are
    exact sums over the batch, so the caller controls all scaling through
    d_out.
    """
    a = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if a.shape[1] != model.input_dim:
        raise DimError(f"input dim {a.shape[1]} != model dim {model.input_dim}")
    acts = [a]
    zs = []
    for layer in model.layers:
        z = acts[-1] @ layer.W.T + layer.b
        zs.append(z)
        acts.append(_act(layer.activation, z))
    delta = np.atleast_2d(np.asarray(d_out, dtype=np.float64))
    if delta.shape != acts[-1].shape:
        raise DimError(f"d_out shape {delta.shape} != output {acts[-1].shape}")
    grads = [None] * len(model.layers)
    for li in reversed(range(len(model.layers))):
        layer = model.layers[li]
        dz = delta * _act_grad(layer.activation, zs[li], acts[li + 1])
        grads[li] = (dz.T @ acts[li], dz.sum(axis=0))
        delta = dz @ layer.W
    return grads, delta


def backward(model: MlpModel, x: np.ndarray, target: np.ndarray):
    """Gradients of single-sample MSE w.r.t. parameters and input."""
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    pred = forward(model, x)
    if t.shape != pred.shape:
        raise DimError(f"target shape {t.shape} != output {pred.shape}")
    d_out = 2.0 * (pred - t) / len(pred)
    grads, d_x = backward_batch(model, x[None, :], d_out[None, :])
    return grads, d_x[0]


class Momentum:
    """Velocity buffers for one model, matched to its layer shapes."""

    def __init__(self, model: MlpModel, beta: float):
        self.beta = beta
        self.vel = [(np.zeros_like(l.W), np.zeros_like(l.b))
                    for l in model.layers]

    def step(self, model: MlpModel, grads, lr: float) -> None:
        for layer, (vW, vb), (dW, db) in zip(model.layers, self.vel, grads):
            vW *= self.beta
            vW -= lr * dW
            vb *= self.beta
            vb -= lr * db
            layer.W += vW
            layer.b += vb


def fit(model: MlpModel, inputs, targets, cfg: TrainConfig = TrainConfig()):
    """Momentum SGD on mean-squared error. Mutates model; returns history.

    History records the mean per-batch loss of each epoch, evaluated on the
    parameters in effect when that batch was visited.
    """
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    T = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if len(X) == 0:
        raise EmptyDataset("fit needs at least one sample")
    if len(X) != len(T):
        raise DimError(f"{len(X)} inputs vs {len(T)} targets")
    rng = np.random.default_rng(cfg.seed)
    opt = Momentum(model, cfg.momentum)
    n_out = model.output_dim
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(len(X))
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            xb, tb = X[idx], T[idx]
            pred = forward_batch(model, xb)
            epoch_loss += float(np.mean((pred - tb) ** 2))
            n_batches += 1
            d_out = 2.0 * (pred - tb) / (n_out * len(idx))
            grads, _ = backward_batch(model, xb, d_out)
            opt.step(model, grads, cfg.learning_rate)
        history.append(epoch_loss / n_batches)
    return model, history


def flatten_params(model: MlpModel) -> np.ndarray:
    return np.concatenate([np.concatenate([l.W.ravel(), l.b])
                           for l in model.layers])


def model_to_dict(model: MlpModel) -> dict:
    return {
        "version": MODEL_FORMAT_VERSION,
        "layers": [
            {
                "activation": l.activation,
                "rows": l.W.shape[0],
                "cols": l.W.shape[1],
                "w": [float(v) for v in l.W.ravel()],
                "b": [float(v) for v in l.b],
            }
            for l in model.layers
        ],
    }


def model_from_dict(doc: dict) -> MlpModel:
    try:
        if int(doc["version"]) > MODEL_FORMAT_VERSION:
            raise FormatError(f"unsupported model version {doc['version']}")
        layers = []
        for ld in doc["layers"]:
            rows, cols = int(ld["rows"]), int(ld["cols"])
            W = np.array(ld["w"], dtype=np.float64).reshape(rows, cols)
            layers.append(Layer(W=W, b=np.array(ld["b"], dtype=np.float64),
                                activation=str(ld["activation"])))
        return MlpModel(layers=layers)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed network model: {exc}") from None
