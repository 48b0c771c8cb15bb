"""Minimal convolutional network stack with exact, checkable gradients.

Layers operate on float64 NCHW arrays. Every backward pass is the exact
gradient of its forward map, verified against central finite differences
by :func:`grad_check`. Momentum SGD and a step learning-rate schedule
drive training; checkpoints serialize to a small versioned binary
container with bitwise save/load identity.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .rng import substream

LAYER_KINDS = ("conv3x3", "relu", "maxpool2", "flatten", "dense", "softmax_xent")

CHECKPOINT_MAGIC = b"RDNNCKPT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    """One layer: kind plus its size parameter where applicable.

    size = out_channels for conv3x3, out_features for dense; None for
    the parameterless kinds.
    """

    kind: str
    size: int | None = None

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        needs_size = self.kind in ("conv3x3", "dense")
        if needs_size and (self.size is None or self.size < 1):
            raise ValueError(f"{self.kind} requires a positive size")
        if not needs_size and self.size is not None:
            raise ValueError(f"{self.kind} takes no size")


@dataclass(frozen=True)
class ModelSpec:
    """Ordered layer chain from a 1-channel square input to class logits."""

    layers: tuple[LayerSpec, ...]
    input_side: int
    input_channels: int = 1
    n_classes: int = 2

    def __post_init__(self):
        self.shape_chain()  # reject inconsistent chains at construction

    def shape_chain(self) -> list[tuple[int, ...]]:
        """Shape after each layer (excluding batch); raises on mismatch."""
        if self.input_side < 1 or self.input_channels < 1:
            raise ValueError("input_side and input_channels must be positive")
        if not self.layers or self.layers[-1].kind != "softmax_xent":
            raise ValueError("layer chain must end with softmax_xent")
        shape: tuple[int, ...] = (self.input_channels, self.input_side, self.input_side)
        chain = []
        for idx, layer in enumerate(self.layers):
            last = idx == len(self.layers) - 1
            if layer.kind == "softmax_xent" and not last:
                raise ValueError("softmax_xent only allowed as the final layer")
            if layer.kind == "conv3x3":
                if len(shape) != 3:
                    raise ValueError(f"layer {idx}: conv3x3 needs a CHW input")
                shape = (layer.size, shape[1], shape[2])
            elif layer.kind == "relu":
                pass
            elif layer.kind == "maxpool2":
                if len(shape) != 3:
                    raise ValueError(f"layer {idx}: maxpool2 needs a CHW input")
                if shape[1] % 2 or shape[2] % 2:
                    raise ValueError(
                        f"layer {idx}: maxpool2 needs even spatial dims, got {shape}"
                    )
                shape = (shape[0], shape[1] // 2, shape[2] // 2)
            elif layer.kind == "flatten":
                shape = (int(np.prod(shape)),)
            elif layer.kind == "dense":
                if len(shape) != 1:
                    raise ValueError(f"layer {idx}: dense needs a flat input")
                shape = (layer.size,)
            elif layer.kind == "softmax_xent":
                if shape != (self.n_classes,):
                    raise ValueError(
                        f"softmax_xent expects ({self.n_classes},) logits, got {shape}"
                    )
            chain.append(shape)
        return chain

    def param_shapes(self) -> list[tuple[int, dict[str, tuple[int, ...]]]]:
        """(layer_index, {name: shape}) for every parameterized layer."""
        out = []
        shape: tuple[int, ...] = (self.input_channels, self.input_side, self.input_side)
        chain = self.shape_chain()
        for idx, layer in enumerate(self.layers):
            if layer.kind == "conv3x3":
                out.append(
                    (idx, {"w": (layer.size, shape[0], 3, 3), "b": (layer.size,)})
                )
            elif layer.kind == "dense":
                out.append((idx, {"w": (layer.size, shape[0]), "b": (layer.size,)}))
            shape = chain[idx]
        return out


def minivgg(side: int = 64) -> ModelSpec:
    """Three conv-conv-pool blocks (widths 8, 16, 32), then dense head."""
    if side % 8:
        raise ValueError(f"input side must be divisible by 8, got {side}")
    layers: list[LayerSpec] = []
    for width in (8, 16, 32):
        layers += [
            LayerSpec("conv3x3", width),
            LayerSpec("relu"),
            LayerSpec("conv3x3", width),
            LayerSpec("relu"),
            LayerSpec("maxpool2"),
        ]
    layers += [
        LayerSpec("flatten"),
        LayerSpec("dense", 64),
        LayerSpec("relu"),
        LayerSpec("dense", 2),
        LayerSpec("softmax_xent"),
    ]
    return ModelSpec(layers=tuple(layers), input_side=side)


def linear_model(side: int = 8) -> ModelSpec:
    """Dense-only probe model: flatten, two dense layers, softmax head."""
    return ModelSpec(
        layers=(
            LayerSpec("flatten"),
            LayerSpec("dense", 16),
            LayerSpec("dense", 2),
            LayerSpec("softmax_xent"),
        ),
        input_side=side,
    )


ARCHITECTURES = {"minivgg": minivgg, "linear": linear_model}


# ---------------------------------------------------------------------------
# Layer forward/backward

def relu_forward(x):
    return np.maximum(x, 0.0)


def relu_backward(gy, x):
    # gradient at exactly 0 defined as 0
    return gy * (x > 0)


def dense_forward(x, w, b):
    return x @ w.T + b


def dense_backward(gy, x, w):
    return gy @ w, gy.T @ x, gy.sum(axis=0)


def softmax_xent(logits: np.ndarray, labels: np.ndarray):
    """Mean negative log-likelihood and its logits gradient.

    Stabilized by max subtraction; grad = (softmax - onehot) / N.
    """
    n = logits.shape[0]
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match batch {n}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    loss = -logp[np.arange(n), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad


@dataclass
class Model:
    """A ModelSpec plus its parameter arrays, aligned per layer."""

    spec: ModelSpec
    params: list[dict[str, np.ndarray]]

    def forward(self, x: np.ndarray, want_caches: bool = False):
        """Logits for a batch; optionally the per-layer backward caches."""
        caches = []
        for idx, layer in enumerate(self.spec.layers):
            if layer.kind == "conv3x3":
                caches.append(x)
                x = kernels.conv3x3_fwd(
                    x, self.params[idx]["w"], self.params[idx]["b"]
                )
            elif layer.kind == "relu":
                caches.append(x)
                x = relu_forward(x)
            elif layer.kind == "maxpool2":
                y, arg = kernels.maxpool2_fwd(x)
                caches.append((x.shape, arg))
                x = y
            elif layer.kind == "flatten":
                caches.append(x.shape)
                x = x.reshape(x.shape[0], -1)
            elif layer.kind == "dense":
                caches.append(x)
                x = dense_forward(x, self.params[idx]["w"], self.params[idx]["b"])
            elif layer.kind == "softmax_xent":
                caches.append(None)  # loss handled by loss_and_grads
        return (x, caches) if want_caches else x

    def loss(self, x: np.ndarray, labels: np.ndarray) -> float:
        logits = self.forward(x)
        value, _ = softmax_xent(logits, labels)
        return float(value)

    def loss_and_grads(self, x: np.ndarray, labels: np.ndarray):
        """(loss, per-layer grad dicts aligned with params)."""
        logits, caches = self.forward(x, want_caches=True)
        value, gy = softmax_xent(logits, labels)
        grads: list[dict[str, np.ndarray]] = [{} for _ in self.spec.layers]
        for idx in range(len(self.spec.layers) - 1, -1, -1):
            layer = self.spec.layers[idx]
            if layer.kind == "softmax_xent":
                continue
            if layer.kind == "conv3x3":
                gy, gw, gb = kernels.conv3x3_bwd(
                    caches[idx], self.params[idx]["w"], gy
                )
                grads[idx] = {"w": gw, "b": gb}
            elif layer.kind == "relu":
                gy = relu_backward(gy, caches[idx])
            elif layer.kind == "maxpool2":
                shape, arg = caches[idx]
                gy = kernels.maxpool2_bwd(arg, gy, shape[2], shape[3])
            elif layer.kind == "flatten":
                gy = gy.reshape(caches[idx])
            elif layer.kind == "dense":
                gy, gw, gb = dense_backward(gy, caches[idx], self.params[idx]["w"])
                grads[idx] = {"w": gw, "b": gb}
        return float(value), grads

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x).argmax(axis=1)


def init_model(spec: ModelSpec, seed: int) -> Model:
    """Kaiming fan-in init: w ~ N(0, 2/fan_in), biases 0."""
    params: list[dict[str, np.ndarray]] = [{} for _ in spec.layers]
    for idx, shapes in spec.param_shapes():
        rng = substream(seed, "init", idx)
        wshape = shapes["w"]
        fan_in = int(np.prod(wshape[1:]))
        params[idx] = {
            "w": rng.normal(0.0, np.sqrt(2.0 / fan_in), size=wshape),
            "b": np.zeros(shapes["b"]),
        }
    return Model(spec=spec, params=params)


# ---------------------------------------------------------------------------
# Optimization

@dataclass
class TrainConfig:
    """Optimizer and sampling constants for one training run."""

    lr0: float = 0.01
    momentum: float = 0.9
    decay_factor: float = 0.25
    decay_every: int = 50
    batch: int = 32
    ratio: tuple[int, int] = (1, 1)  # (different_parts, same_parts)
    iterations: int = 300
    seed: int = 7
    val_every: int | None = None  # None follows decay_every

    def __post_init__(self):
        if not (self.lr0 > 0):
            raise ValueError("lr0 must be positive")
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError("momentum must be in [0, 1)")
        if not (0.0 < self.decay_factor <= 1.0):
            raise ValueError("decay_factor must be in (0, 1]")
        if self.decay_every < 1:
            raise ValueError("decay_every must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        parts = self.ratio[0] + self.ratio[1]
        if min(self.ratio) < 1:
            raise ValueError("ratio parts must be positive")
        if self.batch % parts:
            raise ValueError(f"batch {self.batch} not divisible by ratio sum {parts}")
        if self.val_every is not None and self.val_every < 1:
            raise ValueError("val_every must be >= 1 when set")

    @property
    def effective_val_every(self) -> int:
        return self.decay_every if self.val_every is None else self.val_every


def lr_schedule(iteration: int, cfg: TrainConfig) -> float:
    """Step decay: lr0 * decay^floor(iteration / decay_every), from 0."""
    return cfg.lr0 * cfg.decay_factor ** (iteration // cfg.decay_every)


def zero_velocity(model: Model) -> list[dict[str, np.ndarray]]:
    return [
        {name: np.zeros_like(arr) for name, arr in layer.items()}
        for layer in model.params
    ]


def sgd_momentum_step(params, grads, velocity, lr: float, momentum: float) -> None:
    """In place: v = momentum*v + g; p = p - lr*v."""
    for layer, glayer, vlayer in zip(params, grads, velocity):
        for name in layer:
            vlayer[name] = momentum * vlayer[name] + glayer[name]
            layer[name] -= lr * vlayer[name]


# ---------------------------------------------------------------------------
# Gradient checking

def _mixed_error(a: float, n: float) -> float:
    scale = max(abs(a), abs(n))
    return abs(a - n) if scale < 1e-8 else abs(a - n) / scale


def _loss_and_branch_signature(model: Model, x, labels):
    """Loss plus the discrete branch choices taken by the forward pass.

    The signature captures every ReLU activation mask and maxpool argmax.
    A finite-difference probe is only a valid derivative estimate when
    both evaluations take identical branches; relu-at-zero and pool ties
    are kinks where the loss is not differentiable.
    """
    logits, caches = model.forward(x, want_caches=True)
    value, _ = softmax_xent(logits, labels)
    sig = []
    for idx, layer in enumerate(model.spec.layers):
        if layer.kind == "relu":
            sig.append(caches[idx] > 0)
        elif layer.kind == "maxpool2":
            sig.append(caches[idx][1])
    return float(value), sig


def grad_check(
    spec: ModelSpec,
    eps: float = 1e-5,
    seed: int = 0,
    batch: int = 2,
) -> float:
    """Max mixed relative/absolute error of analytic vs central-difference
    parameter gradients on a small random instance.

    Probes that cross a ReLU zero or flip a maxpool argmax between the
    two evaluations are skipped; the loss is non-differentiable at those
    measure-zero points, so no finite-difference estimate exists there.
    """
    model = init_model(spec, seed)
    rng = substream(seed, "grad-check")
    x = rng.random((batch, spec.input_channels, spec.input_side, spec.input_side))
    labels = rng.integers(spec.n_classes, size=batch)
    _, grads = model.loss_and_grads(x, labels)
    worst = 0.0
    checked = 0
    for idx, layer in enumerate(model.params):
        for name, arr in layer.items():
            flat = arr.reshape(-1)
            gflat = grads[idx][name].reshape(-1)
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + eps
                up, sig_up = _loss_and_branch_signature(model, x, labels)
                flat[k] = orig - eps
                down, sig_down = _loss_and_branch_signature(model, x, labels)
                flat[k] = orig
                if any(
                    not np.array_equal(a, b) for a, b in zip(sig_up, sig_down)
                ):
                    continue
                checked += 1
                numeric = (up - down) / (2.0 * eps)
                worst = max(worst, _mixed_error(float(gflat[k]), numeric))
    if checked == 0:
        raise RuntimeError("every probe crossed a kink; no gradient was checked")
    return worst


# ---------------------------------------------------------------------------
# Checkpoints

def save_checkpoint(model: Model) -> bytes:
    """Binary container: magic, u32 version, u32 spec length, spec JSON,
    then raw little-endian float64 arrays (w then b per layer, in layer
    order)."""
    spec_obj = {
        "layers": [
            {"kind": l.kind, **({"size": l.size} if l.size is not None else {})}
            for l in model.spec.layers
        ],
        "input_side": model.spec.input_side,
        "input_channels": model.spec.input_channels,
        "n_classes": model.spec.n_classes,
    }
    spec_json = json.dumps(spec_obj, sort_keys=True, separators=(",", ":")).encode()
    parts = [
        CHECKPOINT_MAGIC,
        struct.pack("<II", CHECKPOINT_VERSION, len(spec_json)),
        spec_json,
    ]
    for idx, _ in model.spec.param_shapes():
        for name in ("w", "b"):
            parts.append(np.ascontiguousarray(model.params[idx][name], dtype="<f8").tobytes())
    return b"".join(parts)


def load_checkpoint(data: bytes) -> Model:
    if data[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError("not a checkpoint stream (bad magic)")
    off = len(CHECKPOINT_MAGIC)
    version, spec_len = struct.unpack_from("<II", data, off)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off += 8
    spec_obj = json.loads(data[off : off + spec_len].decode())
    off += spec_len
    spec = ModelSpec(
        layers=tuple(
            LayerSpec(kind=l["kind"], size=l.get("size")) for l in spec_obj["layers"]
        ),
        input_side=spec_obj["input_side"],
        input_channels=spec_obj["input_channels"],
        n_classes=spec_obj["n_classes"],
    )
    params: list[dict[str, np.ndarray]] = [{} for _ in spec.layers]
    for idx, shapes in spec.param_shapes():
        layer = {}
        for name in ("w", "b"):
            shape = shapes[name]
            count = int(np.prod(shape))
            arr = np.frombuffer(data, dtype="<f8", count=count, offset=off)
            layer[name] = arr.reshape(shape).astype(np.float64)
            off += count * 8
        params[idx] = layer
    if off != len(data):
        raise ValueError(f"checkpoint has {len(data) - off} trailing bytes")
    return Model(spec=spec, params=params)
