"""Temporal-convolution attribute estimator with exact backpropagation.

Each of the W input channels runs through the same stack of four valid
temporal convolutions (kernel length 5, no downsampling); the resulting
``W * F`` feature maps of length ``T - 16`` are flattened into two fully
connected layers and a sigmoid output of K attribute probabilities.

Activations inside the convolution stack are shaped ``(batch, W, maps, time)``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

KERNEL = 5
N_CONV = 4
BCE_DELTA = 1e-7
DIVERGENCE_LOSS = 1e6
FORMAT_NAME = "ctxhar-attrnet"
FORMAT_VERSION = 1
CONV_NAMES = tuple(f"conv{i}" for i in range(1, N_CONV + 1))
DENSE_NAMES = ("fc1", "fc2", "out")
PARAM_ORDER = tuple(f"{n}_{s}" for n in CONV_NAMES + DENSE_NAMES for s in ("w", "b"))


@dataclass(frozen=True)
class NetShape:
    length: int  # T
    channels: int  # W
    k: int
    filters: int = 64
    hidden: int = 128
    nonlinearity: str = "relu"

    def __post_init__(self):
        if min(self.length, self.channels, self.k, self.filters, self.hidden) < 1:
            raise ValueError("all network dimensions must be positive")
        if self.conv_out_length < 1:
            raise ValueError(
                f"T={self.length} leaves no frames after {N_CONV} valid convolutions of length {KERNEL}"
            )
        if self.nonlinearity not in _ACTIVATIONS:
            raise ValueError(f"unknown nonlinearity {self.nonlinearity!r}")

    @property
    def conv_out_length(self) -> int:
        return self.length - N_CONV * (KERNEL - 1)

    @property
    def fc_input(self) -> int:
        return self.conv_out_length * self.channels * self.filters

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        f, h = self.filters, self.hidden
        shapes: dict[str, tuple[int, ...]] = {"conv1_w": (f, 1, KERNEL), "conv1_b": (f,)}
        for name in CONV_NAMES[1:]:
            shapes[f"{name}_w"] = (f, f, KERNEL)
            shapes[f"{name}_b"] = (f,)
        shapes.update({
            "fc1_w": (self.fc_input, h), "fc1_b": (h,),
            "fc2_w": (h, h), "fc2_b": (h,),
            "out_w": (h, self.k), "out_b": (self.k,),
        })
        return shapes


def _relu(x):
    return np.maximum(x, 0.0)


def _relu_grad(y):
    return (y > 0).astype(y.dtype)


def _tanh_grad(y):
    return 1.0 - y * y


# derivatives are expressed in terms of the activation output
_ACTIVATIONS = {"relu": (_relu, _relu_grad), "tanh": (np.tanh, _tanh_grad)}

DESK_SHAPE = NetShape(length=64, channels=6, k=6, filters=16, hidden=32)


class Network:
    """Parameters plus shape; ``params`` maps names in ``PARAM_ORDER`` to arrays."""

    def __init__(self, shape: NetShape, params: dict[str, np.ndarray]):
        expected = shape.param_shapes()
        if set(params) != set(expected):
            raise ValueError(f"parameter names {sorted(params)} do not match {sorted(expected)}")
        for name, shp in expected.items():
            if params[name].shape != shp:
                raise ValueError(f"{name} has shape {params[name].shape}, expected {shp}")
        self.shape = shape
        self.params = {n: np.asarray(params[n], dtype=np.float64) for n in PARAM_ORDER}

    def copy(self) -> "Network":
        return Network(self.shape, {n: v.copy() for n, v in self.params.items()})

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {n: np.zeros_like(v) for n, v in self.params.items()}

    def n_params(self) -> int:
        return sum(v.size for v in self.params.values())


def init_network(shape: NetShape, seed: int = 0) -> Network:
    """Uniform weights in ``±1/sqrt(fan_in)``, zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shp in shape.param_shapes().items():
        if name.endswith("_b"):
            params[name] = np.zeros(shp)
            continue
        fan_in = shp[1] * shp[2] if name.startswith("conv") else shp[0]
        bound = 1.0 / np.sqrt(fan_in)
        params[name] = rng.uniform(-bound, bound, size=shp)
    return Network(shape, params)


def _as_batch(net: Network, windows) -> tuple[np.ndarray, bool]:
    x = np.asarray(windows, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    t, w = net.shape.length, net.shape.channels
    if x.ndim != 3 or x.shape[1:] != (t, w):
        raise ValueError(f"window shape {x.shape[-2:] if x.ndim >= 2 else x.shape} does not match (T, W) = ({t}, {w})")
    if not np.all(np.isfinite(x)):
        raise ValueError("window contains non-finite values")
    return x, single


def _conv(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    # x (B, W, C, T) ; w (F, C, 5) -> (B, W, F, T-4)
    win = sliding_window_view(x, KERNEL, axis=-1)
    return np.einsum("bwctj,fcj->bwft", win, w, optimize=True) + b[:, None]


def _conv_backward(x: np.ndarray, w: np.ndarray, delta: np.ndarray):
    win = sliding_window_view(x, KERNEL, axis=-1)
    gw = np.einsum("bwft,bwctj->fcj", delta, win, optimize=True)
    gb = delta.sum(axis=(0, 1, 3))
    padded = np.pad(delta, [(0, 0)] * 3 + [(KERNEL - 1, KERNEL - 1)])
    pwin = sliding_window_view(padded, KERNEL, axis=-1)
    gx = np.einsum("bwftj,fcj->bwct", pwin, w[:, :, ::-1], optimize=True)
    return gx, gw, gb


def _forward(net: Network, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    act, _ = _ACTIVATIONS[net.shape.nonlinearity]
    p = net.params
    h = np.transpose(x, (0, 2, 1))[:, :, None, :]  # (B, W, 1, T)
    cache = [h]
    for name in CONV_NAMES:
        h = act(_conv(h, p[f"{name}_w"], p[f"{name}_b"]))
        cache.append(h)
    h = h.reshape(h.shape[0], -1)
    for name in ("fc1", "fc2"):
        h = act(h @ p[f"{name}_w"] + p[f"{name}_b"])
        cache.append(h)
    z = h @ p["out_w"] + p["out_b"]
    return z, cache


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def forward(net: Network, windows) -> np.ndarray:
    """Attribute posteriors for one ``(T, W)`` window or a ``(B, T, W)`` batch."""
    x, single = _as_batch(net, windows)
    pi = _sigmoid(_forward(net, x)[0])
    return pi[0] if single else pi


def bce_loss(pi, target) -> float:
    """Summed binary cross-entropy with posteriors clamped to ``[delta, 1 - delta]``."""
    pi = np.asarray(pi, dtype=np.float64)
    a = np.asarray(target, dtype=np.float64)
    if pi.shape != a.shape:
        raise ValueError(f"shape mismatch: {pi.shape} vs {a.shape}")
    q = np.clip(pi, BCE_DELTA, 1.0 - BCE_DELTA)
    return float(-np.sum(a * np.log(q) + (1.0 - a) * np.log1p(-q)))


def loss_and_gradient(net: Network, windows, targets) -> tuple[float, dict[str, np.ndarray]]:
    """Mean per-window BCE over the batch and its exact gradient."""
    x, single = _as_batch(net, windows)
    a = np.asarray(targets, dtype=np.float64)
    if single:
        a = a[None]
    if a.shape != (x.shape[0], net.shape.k):
        raise ValueError(f"targets shape {a.shape} does not match batch of {x.shape[0]} x K={net.shape.k}")
    _, act_grad = _ACTIVATIONS[net.shape.nonlinearity]
    p = net.params
    n = x.shape[0]
    z, cache = _forward(net, x)
    pi = _sigmoid(z)
    loss = bce_loss(pi, a) / n

    # d/dz of -[a log q + (1-a) log(1-q)] with q = clip(sigmoid(z)); zero where the clamp is active
    live = (pi > BCE_DELTA) & (pi < 1.0 - BCE_DELTA)
    dz = np.where(live, pi - a, 0.0) / n
    grads: dict[str, np.ndarray] = {}
    h2 = cache[-1]
    grads["out_w"] = h2.T @ dz
    grads["out_b"] = dz.sum(axis=0)
    d = dz @ p["out_w"].T
    for name, i in (("fc2", -1), ("fc1", -2)):
        d = d * act_grad(cache[i])
        prev = cache[i - 1]
        if prev.ndim == 4:
            prev = prev.reshape(n, -1)
        grads[f"{name}_w"] = prev.T @ d
        grads[f"{name}_b"] = d.sum(axis=0)
        d = d @ p[f"{name}_w"].T
    d = d.reshape(cache[N_CONV].shape)
    for layer in range(N_CONV, 0, -1):
        name = CONV_NAMES[layer - 1]
        d = d * act_grad(cache[layer])
        d, gw, gb = _conv_backward(cache[layer - 1], p[f"{name}_w"], d)
        grads[f"{name}_w"] = gw
        grads[f"{name}_b"] = gb
    return loss, {k: grads[k] for k in PARAM_ORDER}


def backward(net: Network, window, target) -> dict[str, np.ndarray]:
    """Gradient of ``bce_loss(forward(net, window), target)`` for every parameter."""
    return loss_and_gradient(net, window, target)[1]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 16
    epochs: int = 50
    seed: int = 0
    optimizer: str = "momentum"  # or "sgd"
    momentum: float = 0.9
    filters: int = 64
    hidden: int = 128
    nonlinearity: str = "relu"

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning rate must be non-negative")
        if min(self.batch_size, self.epochs, self.filters, self.hidden) < 1:
            raise ValueError("batch size, epochs, filters and hidden width must be positive")
        if self.optimizer not in ("momentum", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def shape_for(self, length: int, channels: int, k: int) -> NetShape:
        return NetShape(length, channels, k, self.filters, self.hidden, self.nonlinearity)


DESK_CONFIG = TrainConfig(filters=DESK_SHAPE.filters, hidden=DESK_SHAPE.hidden)


class DivergenceError(RuntimeError):
    pass


def train(config: TrainConfig, windows, targets, net: Network | None = None) -> tuple[Network, list[float]]:
    """Minibatch training; returns the network and the per-epoch mean loss.

    The reported epoch loss is the mean BCE over the epoch's minibatches,
    weighted by batch size, evaluated before each update.
    """
    x = np.asarray(windows, dtype=np.float64)
    a = np.asarray(targets, dtype=np.float64)
    if x.ndim != 3 or len(x) == 0:
        raise ValueError("training needs a nonempty (N, T, W) window array")
    if a.shape[0] != x.shape[0]:
        raise ValueError("one target vector per window required")
    rng = np.random.default_rng(config.seed)
    if net is None:
        net = init_network(config.shape_for(x.shape[1], x.shape[2], a.shape[1]), int(rng.integers(2**63)))
    else:
        net = net.copy()
        rng.integers(2**63)  # keep the shuffle stream independent of who initialised the net
    velocity = net.zeros_like()
    mu = config.momentum if config.optimizer == "momentum" else 0.0
    history: list[float] = []
    n = len(x)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = loss_and_gradient(net, x[idx], a[idx])
            total += loss * len(idx)
            for name, g in grads.items():
                v = velocity[name]
                v *= mu
                v -= config.learning_rate * g
                net.params[name] += v
        mean = total / n
        if not np.isfinite(mean) or mean > DIVERGENCE_LOSS:
            raise DivergenceError(f"training diverged at epoch {epoch} (mean loss {mean})")
        if not all(np.all(np.isfinite(v)) for v in net.params.values()):
            raise DivergenceError(f"training diverged at epoch {epoch} (non-finite parameters)")
        history.append(mean)
    return net, history


def save_network(net: Network, path, config: TrainConfig | None = None) -> None:
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "shape": asdict(net.shape),
        "params": {n: list(net.params[n].shape) for n in PARAM_ORDER},
        "train_config": asdict(config) if config is not None else None,
    }
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)),
                 **{n: np.ascontiguousarray(net.params[n]) for n in PARAM_ORDER})


def load_network(path) -> Network:
    with np.load(Path(path), allow_pickle=False) as data:
        header = json.loads(str(data["header"][()]))
        if header.get("format") != FORMAT_NAME:
            raise ValueError(f"{path} is not a {FORMAT_NAME} checkpoint")
        if header.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header.get('version')}")
        params = {n: data[n] for n in PARAM_ORDER}
    return Network(NetShape(**header["shape"]), params)


def loss_history_csv(history) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "mean_bce"])
    for i, v in enumerate(history, start=1):
        w.writerow([i, repr(float(v))])
    return buf.getvalue()
