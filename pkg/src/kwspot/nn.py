"""Tiny neural-network engine with manual reverse-mode gradients.

Just enough machinery for the keyword classifier: reshape, 1D (and, for
architecture comparison, 2D) valid convolution with ReLU, max pooling,
inverted dropout, flatten, dense, and softmax cross-entropy, trained with
mini-batch Adam. Arithmetic is float64 throughout; float32 only appears
at export time.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import selection

NUM_CLASSES = 8


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during fit()."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # reshape | conv1d | conv2d | maxpool1d | maxpool2d | dropout | flatten | dense
    filters: int = 0
    kernel: int = 0
    stride: int = 1
    activation: str = "relu"  # conv: relu|none; dense: none|softmax
    pool: int = 2
    rate: float = 0.0
    units: int = 0

    def __post_init__(self):
        if self.kind in ("conv1d", "conv2d"):
            if self.filters < 1 or self.kernel < 1 or self.stride < 1:
                raise ValueError(f"bad conv layer: {self}")
        elif self.kind in ("maxpool1d", "maxpool2d"):
            if self.pool < 1:
                raise ValueError(f"bad pool layer: {self}")
        elif self.kind == "dropout":
            if not 0.0 <= self.rate < 1.0:
                raise ValueError(f"dropout rate must be in [0, 1), got {self.rate}")
        elif self.kind == "dense":
            if self.units < 1:
                raise ValueError(f"dense units must be >= 1, got {self.units}")
            if self.activation not in ("none", "softmax"):
                raise ValueError(f"dense activation must be none|softmax: {self}")
        elif self.kind not in ("reshape", "flatten"):
            raise ValueError(f"unknown layer kind {self.kind!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind in ("conv1d", "conv2d"):
            d.update(filters=self.filters, kernel=self.kernel, stride=self.stride,
                     activation=self.activation)
        elif self.kind in ("maxpool1d", "maxpool2d"):
            d.update(pool=self.pool)
        elif self.kind == "dropout":
            d.update(rate=self.rate)
        elif self.kind == "dense":
            d.update(units=self.units, activation=self.activation)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(**d)


def reshape() -> LayerSpec:
    return LayerSpec(kind="reshape")


def conv1d(filters: int, kernel: int, stride: int = 1, activation: str = "relu") -> LayerSpec:
    return LayerSpec(kind="conv1d", filters=filters, kernel=kernel, stride=stride,
                     activation=activation)


def conv2d(filters: int, kernel: int, activation: str = "relu") -> LayerSpec:
    return LayerSpec(kind="conv2d", filters=filters, kernel=kernel, activation=activation)


def maxpool1d(size: int = 2) -> LayerSpec:
    return LayerSpec(kind="maxpool1d", pool=size)


def maxpool2d(size: int = 2) -> LayerSpec:
    return LayerSpec(kind="maxpool2d", pool=size)


def dropout(rate: float) -> LayerSpec:
    return LayerSpec(kind="dropout", rate=rate)


def flatten() -> LayerSpec:
    return LayerSpec(kind="flatten")


def dense(units: int, activation: str = "none") -> LayerSpec:
    return LayerSpec(kind="dense", units=units, activation=activation)


@dataclass(frozen=True)
class ModelSpec:
    """Ordered layers plus the (frames, coeffs) input shape."""

    layers: tuple[LayerSpec, ...]
    input_shape: tuple[int, int]
    num_classes: int = NUM_CLASSES

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        if not self.layers:
            raise ValueError("model needs at least one layer")
        last = self.layers[-1]
        if last.kind != "dense" or last.units != self.num_classes or last.activation != "softmax":
            raise ValueError(
                f"final layer must be dense({self.num_classes}, softmax), got {last}"
            )
        propagate_shapes(self)  # raises on any inconsistency

    def to_dict(self) -> dict:
        return {
            "layers": [l.to_dict() for l in self.layers],
            "input_shape": list(self.input_shape),
            "num_classes": self.num_classes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(
            layers=tuple(LayerSpec.from_dict(l) for l in d["layers"]),
            input_shape=tuple(d["input_shape"]),
            num_classes=d.get("num_classes", NUM_CLASSES),
        )


def default_model_spec(
    input_shape: tuple[int, int],
    filters: Sequence[int] = (32, 32),
    kernel: int = 3,
    dropout_rate: float = 0.25,
    dense_width: int = 0,
    conv_dim: int = 1,
    num_classes: int = NUM_CLASSES,
) -> ModelSpec:
    """reshape -> [conv -> pool -> dropout]*n -> flatten [-> dense] -> dense(softmax)."""
    layers: list[LayerSpec] = [reshape()]
    for f in filters:
        if conv_dim == 1:
            layers += [conv1d(f, kernel), maxpool1d(2)]
        elif conv_dim == 2:
            layers += [conv2d(f, kernel), maxpool2d(2)]
        else:
            raise ValueError(f"conv_dim must be 1 or 2, got {conv_dim}")
        if dropout_rate > 0:
            layers.append(dropout(dropout_rate))
    layers.append(flatten())
    if dense_width > 0:
        layers.append(dense(dense_width, activation="none"))
    layers.append(dense(num_classes, activation="softmax"))
    return ModelSpec(tuple(layers), tuple(input_shape), num_classes)


def propagate_shapes(spec: ModelSpec) -> list[tuple[int, ...]]:
    """Per-layer output shapes (batch axis omitted); raises if any layer misfits."""
    has_2d = any(l.kind in ("conv2d", "maxpool2d") for l in spec.layers)
    frames, coeffs = spec.input_shape
    shape: tuple[int, ...] = (frames, coeffs)
    shapes = []
    for layer in spec.layers:
        if layer.kind == "reshape":
            shape = (frames, coeffs, 1) if has_2d else (frames, coeffs)
        elif layer.kind == "conv1d":
            if len(shape) != 2:
                raise ValueError(f"conv1d needs (length, channels) input, got {shape}")
            length, _ = shape
            if layer.kernel > length:
                raise ValueError(f"kernel {layer.kernel} exceeds sequence length {length}")
            shape = ((length - layer.kernel) // layer.stride + 1, layer.filters)
        elif layer.kind == "conv2d":
            if len(shape) != 3:
                raise ValueError(f"conv2d needs (h, w, channels) input, got {shape}")
            h, w, _ = shape
            if layer.kernel > h or layer.kernel > w:
                raise ValueError(f"kernel {layer.kernel} exceeds image {h}x{w}")
            shape = (h - layer.kernel + 1, w - layer.kernel + 1, layer.filters)
        elif layer.kind == "maxpool1d":
            if len(shape) != 2 or shape[0] // layer.pool < 1:
                raise ValueError(f"cannot maxpool1d({layer.pool}) over shape {shape}")
            shape = (shape[0] // layer.pool, shape[1])
        elif layer.kind == "maxpool2d":
            if len(shape) != 3 or shape[0] // layer.pool < 1 or shape[1] // layer.pool < 1:
                raise ValueError(f"cannot maxpool2d({layer.pool}) over shape {shape}")
            shape = (shape[0] // layer.pool, shape[1] // layer.pool, shape[2])
        elif layer.kind == "dropout":
            pass
        elif layer.kind == "flatten":
            shape = (int(np.prod(shape)),)
        elif layer.kind == "dense":
            if len(shape) != 1:
                raise ValueError(f"dense needs flat input, got {shape}")
            shape = (layer.units,)
        shapes.append(shape)
    return shapes


ModelWeights = list  # one dict per layer: {"W": ..., "b": ...} or {}


def parameter_count(spec: ModelSpec) -> int:
    total = 0
    shape: tuple[int, ...] = spec.input_shape
    for layer, out_shape in zip(spec.layers, propagate_shapes(spec)):
        if layer.kind == "conv1d":
            total += layer.filters * shape[-1] * layer.kernel + layer.filters
        elif layer.kind == "conv2d":
            total += layer.filters * shape[-1] * layer.kernel**2 + layer.filters
        elif layer.kind == "dense":
            total += layer.units * shape[0] + layer.units
        shape = out_shape
    return total


def mac_count(spec: ModelSpec) -> int:
    """Multiply-accumulates for one forward pass of one window."""
    total = 0
    shape: tuple[int, ...] = spec.input_shape
    for layer, out_shape in zip(spec.layers, propagate_shapes(spec)):
        if layer.kind == "conv1d":
            total += out_shape[0] * layer.filters * shape[-1] * layer.kernel
        elif layer.kind == "conv2d":
            total += out_shape[0] * out_shape[1] * layer.filters * shape[-1] * layer.kernel**2
        elif layer.kind == "dense":
            total += layer.units * shape[0]
        shape = out_shape
    return total


def init_model(spec: ModelSpec, seed: int) -> ModelWeights:
    """He-uniform kernels (bound sqrt(6/fan_in)), zero biases, deterministic."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    weights: ModelWeights = []
    shape: tuple[int, ...] = spec.input_shape
    for layer, out_shape in zip(spec.layers, propagate_shapes(spec)):
        if layer.kind == "conv1d":
            fan_in = shape[-1] * layer.kernel
            bound = np.sqrt(6.0 / fan_in)
            weights.append({
                "W": rng.uniform(-bound, bound, (layer.filters, shape[-1], layer.kernel)),
                "b": np.zeros(layer.filters),
            })
        elif layer.kind == "conv2d":
            fan_in = shape[-1] * layer.kernel**2
            bound = np.sqrt(6.0 / fan_in)
            weights.append({
                "W": rng.uniform(
                    -bound, bound, (layer.filters, shape[-1], layer.kernel, layer.kernel)
                ),
                "b": np.zeros(layer.filters),
            })
        elif layer.kind == "dense":
            fan_in = shape[0]
            bound = np.sqrt(6.0 / fan_in)
            weights.append({
                "W": rng.uniform(-bound, bound, (layer.units, fan_in)),
                "b": np.zeros(layer.units),
            })
        else:
            weights.append({})
        shape = out_shape
    return weights


def _forward(spec, weights, x, train, rng):
    """Returns (logits, caches). x is (B, frames, coeffs)."""
    has_2d = any(l.kind in ("conv2d", "maxpool2d") for l in spec.layers)
    caches = []
    out = x
    for layer, params in zip(spec.layers, weights):
        if layer.kind == "reshape":
            cache = out.shape
            out = out[..., None] if has_2d else out
            caches.append(cache)
        elif layer.kind == "conv1d":
            windows = sliding_window_view(out, layer.kernel, axis=1)[:, :: layer.stride]
            pre = np.einsum("blck,fck->blf", windows, params["W"]) + params["b"]
            if layer.activation == "relu":
                mask = pre > 0
                caches.append((windows, out.shape, mask))
                out = pre * mask
            else:
                caches.append((windows, out.shape, None))
                out = pre
        elif layer.kind == "conv2d":
            windows = sliding_window_view(out, (layer.kernel, layer.kernel), axis=(1, 2))
            pre = np.einsum("bhwcij,fcij->bhwf", windows, params["W"]) + params["b"]
            if layer.activation == "relu":
                mask = pre > 0
                caches.append((windows, out.shape, mask))
                out = pre * mask
            else:
                caches.append((windows, out.shape, None))
                out = pre
        elif layer.kind == "maxpool1d":
            b, length, ch = out.shape
            lp = length // layer.pool
            blocks = out[:, : lp * layer.pool].reshape(b, lp, layer.pool, ch)
            am = blocks.argmax(axis=2)
            caches.append((am, out.shape))
            out = np.take_along_axis(blocks, am[:, :, None, :], axis=2)[:, :, 0, :]
        elif layer.kind == "maxpool2d":
            b, h, w, ch = out.shape
            hp, wp = h // layer.pool, w // layer.pool
            blocks = (
                out[:, : hp * layer.pool, : wp * layer.pool]
                .reshape(b, hp, layer.pool, wp, layer.pool, ch)
                .transpose(0, 1, 3, 2, 4, 5)
                .reshape(b, hp, wp, layer.pool**2, ch)
            )
            am = blocks.argmax(axis=3)
            caches.append((am, out.shape))
            out = np.take_along_axis(blocks, am[:, :, :, None, :], axis=3)[:, :, :, 0, :]
        elif layer.kind == "dropout":
            if train and rng is not None and layer.rate > 0:
                mask = (rng.random(out.shape) >= layer.rate) / (1.0 - layer.rate)
                caches.append(mask)
                out = out * mask
            else:
                caches.append(None)
        elif layer.kind == "flatten":
            caches.append(out.shape)
            out = out.reshape(out.shape[0], -1)
        elif layer.kind == "dense":
            caches.append(out)
            out = out @ params["W"].T + params["b"]
            # softmax (if any) is applied by the caller; logits flow onward
    return out, caches


def _softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _backward(spec, weights, caches, dout):
    grads: ModelWeights = [dict() for _ in spec.layers]
    for i in range(len(spec.layers) - 1, -1, -1):
        layer, params, cache = spec.layers[i], weights[i], caches[i]
        if layer.kind == "dense":
            x = cache
            grads[i]["W"] = dout.T @ x
            grads[i]["b"] = dout.sum(axis=0)
            dout = dout @ params["W"]
        elif layer.kind == "flatten":
            dout = dout.reshape(cache)
        elif layer.kind == "dropout":
            if cache is not None:
                dout = dout * cache
        elif layer.kind == "maxpool1d":
            am, in_shape = cache
            b, lp, ch = dout.shape
            blocks = np.zeros((b, lp, layer.pool, ch))
            np.put_along_axis(blocks, am[:, :, None, :], dout[:, :, None, :], axis=2)
            dx = np.zeros(in_shape)
            dx[:, : lp * layer.pool] = blocks.reshape(b, lp * layer.pool, ch)
            dout = dx
        elif layer.kind == "maxpool2d":
            am, in_shape = cache
            b, hp, wp, ch = dout.shape
            p = layer.pool
            blocks = np.zeros((b, hp, wp, p * p, ch))
            np.put_along_axis(blocks, am[:, :, :, None, :], dout[:, :, :, None, :], axis=3)
            blocks = blocks.reshape(b, hp, wp, p, p, ch).transpose(0, 1, 3, 2, 4, 5)
            dx = np.zeros(in_shape)
            dx[:, : hp * p, : wp * p] = blocks.reshape(b, hp * p, wp * p, ch)
            dout = dx
        elif layer.kind == "conv1d":
            windows, in_shape, mask = cache
            if mask is not None:
                dout = dout * mask
            grads[i]["W"] = np.einsum("blf,blck->fck", dout, windows)
            grads[i]["b"] = dout.sum(axis=(0, 1))
            dx = np.zeros(in_shape)
            l_out = dout.shape[1]
            idx = layer.stride * np.arange(l_out)
            for j in range(layer.kernel):
                dx[:, idx + j, :] += np.einsum("blf,fc->blc", dout, params["W"][:, :, j])
            dout = dx
        elif layer.kind == "conv2d":
            windows, in_shape, mask = cache
            if mask is not None:
                dout = dout * mask
            grads[i]["W"] = np.einsum("bhwf,bhwcij->fcij", dout, windows)
            grads[i]["b"] = dout.sum(axis=(0, 1, 2))
            dx = np.zeros(in_shape)
            h_out, w_out = dout.shape[1], dout.shape[2]
            for a in range(layer.kernel):
                for c in range(layer.kernel):
                    dx[:, a : a + h_out, c : c + w_out, :] += np.einsum(
                        "bhwf,fc->bhwc", dout, params["W"][:, :, a, c]
                    )
            dout = dx
        elif layer.kind == "reshape":
            dout = dout.reshape(cache)
    return grads


def forward(
    spec: ModelSpec,
    weights: ModelWeights,
    features: np.ndarray,
    mode: str = "infer",
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Class probabilities; (8,) for a single window, (B, 8) for a batch.

    mode="infer" disables dropout (inverted scaling means no rescale is
    needed here); mode="train" needs an rng for the masks.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be train|infer, got {mode!r}")
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.shape[1:] != spec.input_shape:
        raise ValueError(f"input shape {x.shape[1:]} != spec {spec.input_shape}")
    logits, _ = _forward(spec, weights, x, mode == "train", rng)
    probs = _softmax(logits)
    return probs[0] if single else probs


def loss_and_grads(
    spec: ModelSpec,
    weights: ModelWeights,
    features: np.ndarray,
    labels_onehot: np.ndarray,
    rng: np.random.Generator | None = None,
) -> tuple[float, ModelWeights]:
    """Mean cross-entropy over the batch plus gradients for every tensor.

    rng drives the dropout masks (fixed for the duration of the call);
    rng=None runs with dropout disabled, which is what finite-difference
    checking needs.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels_onehot, dtype=np.float64)
    if x.ndim != 3 or len(x) == 0:
        raise ValueError("expected a non-empty (batch, frames, coeffs) array")
    if y.shape != (len(x), spec.num_classes):
        raise ValueError(f"labels shape {y.shape} != ({len(x)}, {spec.num_classes})")
    logits, caches = _forward(spec, weights, x, True, rng)
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = float(-(y * logp).sum() / len(x))
    dlogits = (np.exp(logp) - y) / len(x)
    grads = _backward(spec, weights, caches, dlogits)
    return loss, grads


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    patience: int = 15  # epochs without a new best validation F1

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError(f"bad training hyperparameters: {self}")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs, "batch_size": self.batch_size,
            "learning_rate": self.learning_rate, "beta1": self.beta1,
            "beta2": self.beta2, "eps": self.eps, "seed": self.seed,
            "patience": self.patience,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


def _onehot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    out = np.zeros((len(labels), num_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def _val_parent_f1(spec, weights, x_val, y_val) -> float:
    probs = forward(spec, weights, x_val, mode="infer")
    cm8 = selection.confusion_from_predictions(probs, y_val)
    return selection.f1_name(selection.collapse_to_parent(cm8))


def fit(
    spec: ModelSpec,
    train: tuple[np.ndarray, np.ndarray],
    validation: tuple[np.ndarray, np.ndarray],
    config: TrainConfig,
) -> tuple[ModelWeights, list[dict]]:
    """Mini-batch Adam; returns the weights from the epoch with the best
    validation parent-class F1 (ties keep the earlier epoch).

    train/validation are (features, subclass-index labels), already
    normalized with training-set stats. Deterministic under config.seed.
    """
    x_tr, y_tr = np.asarray(train[0], dtype=np.float64), np.asarray(train[1])
    x_va, y_va = np.asarray(validation[0], dtype=np.float64), np.asarray(validation[1])
    if len(x_tr) == 0 or len(x_va) == 0:
        raise ValueError("train and validation sets must be non-empty")
    if config.batch_size > len(x_tr):
        raise ValueError(f"batch_size {config.batch_size} exceeds train size {len(x_tr)}")

    weights = init_model(spec, config.seed)
    if config.epochs == 0:
        return weights, []

    y_onehot = _onehot(y_tr, spec.num_classes)
    root = np.random.SeedSequence(config.seed)
    shuffle_rng = np.random.default_rng(root.spawn(1)[0])
    dropout_rng = np.random.default_rng(root.spawn(1)[0])

    m = [{k: np.zeros_like(v) for k, v in lw.items()} for lw in weights]
    v = [{k: np.zeros_like(p) for k, p in lw.items()} for lw in weights]
    step = 0
    best_f1 = -1.0
    best_weights = copy.deepcopy(weights)
    best_epoch = -1
    history: list[dict] = []

    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(x_tr))
        losses = []
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo : lo + config.batch_size]
            loss, grads = loss_and_grads(
                spec, weights, x_tr[batch], y_onehot[batch], rng=dropout_rng
            )
            if not np.isfinite(loss):
                raise TrainingDiverged(f"loss became {loss} at epoch {epoch}")
            losses.append(loss)
            step += 1
            for lw, lm, lv, lg in zip(weights, m, v, grads):
                for key in lw:
                    g = lg[key]
                    lm[key] = config.beta1 * lm[key] + (1 - config.beta1) * g
                    lv[key] = config.beta2 * lv[key] + (1 - config.beta2) * g * g
                    m_hat = lm[key] / (1 - config.beta1**step)
                    v_hat = lv[key] / (1 - config.beta2**step)
                    lw[key] = lw[key] - config.learning_rate * m_hat / (
                        np.sqrt(v_hat) + config.eps
                    )
        val_f1 = _val_parent_f1(spec, weights, x_va, y_va)
        train_preds = forward(spec, weights, x_tr, mode="infer").argmax(axis=1)
        history.append(
            {
                "epoch": epoch,
                "train_loss": float(np.mean(losses)),
                "train_accuracy": float(np.mean(train_preds == y_tr)),
                "val_f1": val_f1,
            }
        )
        if val_f1 > best_f1:
            best_f1 = val_f1
            best_weights = copy.deepcopy(weights)
            best_epoch = epoch
        elif epoch - best_epoch >= config.patience:
            break
    return best_weights, history


def gradient_check(spec: ModelSpec, seed: int, eps: float = 1e-4) -> float:
    """Max relative error between analytic and central-difference gradients.

    Random 2-sample batch, dropout off. Specs are capped at 20k parameters
    to keep the finite-difference sweep fast.
    """
    if parameter_count(spec) >= 20_000:
        raise ValueError("spec too large for finite differences (>= 20k parameters)")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    x = rng.normal(0.0, 1.0, (2, *spec.input_shape))
    labels = rng.integers(0, spec.num_classes, 2)
    y = _onehot(labels, spec.num_classes)
    weights = init_model(spec, seed)
    _, grads = loss_and_grads(spec, weights, x, y, rng=None)

    worst = 0.0
    for lw, lg in zip(weights, grads):
        for key, tensor in lw.items():
            flat = tensor.reshape(-1)
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + eps
                up, _ = loss_and_grads(spec, weights, x, y, rng=None)
                flat[idx] = orig - eps
                down, _ = loss_and_grads(spec, weights, x, y, rng=None)
                flat[idx] = orig
                numeric = (up - down) / (2 * eps)
                analytic = lg[key].reshape(-1)[idx]
                denom = max(abs(numeric), abs(analytic), 1e-6)
                worst = max(worst, abs(numeric - analytic) / denom)
    return worst
