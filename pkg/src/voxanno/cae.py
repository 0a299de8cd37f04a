"""Convolutional autoencoder for per-pixel classification of scan slices.

The encoder stacks ``num_layers`` blocks of (same-padded correlation ->
ReLU -> non-overlapping p x p max pooling); each pooling records the
argmax position inside its window ("switches"). The decoder mirrors the
encoder: every stage scatters its input back to the recorded switch
positions (zeros elsewhere), applies another same-padded correlation,
and a ReLU between decoder stages; the final stage adds one bias per
class and a pixelwise softmax, so the class distribution comes out at
the input resolution.

Extents that are not multiples of the pool size are padded on the right
and bottom by edge replication before pooling and cropped back after the
matching unpooling. The ReLU subgradient at 0 is taken as 0, and no
gradient flows through switch indices, only through the pooled values.

Training on partial annotations uses the mean cross-entropy over the
labeled pixels only; unlabeled pixels contribute nothing to the loss or
its gradients. All gradients are exact backpropagation through this
graph; the acceptance suite checks every parameter against central
finite differences.

Default training math is float64; pass dtype=np.float32 for the faster
interactive path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._fftconv import CorrCache, corr2d, corr2d_grads
from .errors import (
    BadConfig,
    BadHeader,
    NoLabeledPixels,
    NonFiniteActivation,
    NonFiniteUpdate,
    ShapeMismatch,
)
from .volume import Volume, normalize_intensity


@dataclass(frozen=True)
class ArchConfig:
    """Architecture hyperparameters exposed in the model panel."""

    num_layers: int = 1
    filters_per_layer: tuple[int, ...] = (10,)
    filter_size: int = 15
    pool_dim: int = 2
    num_classes: int = 3

    def __post_init__(self):
        object.__setattr__(self, "filters_per_layer", tuple(int(n) for n in self.filters_per_layer))
        if self.num_layers < 1:
            raise BadConfig("num_layers must be >= 1")
        if len(self.filters_per_layer) != self.num_layers:
            raise BadConfig(
                f"filters_per_layer has {len(self.filters_per_layer)} entries "
                f"for {self.num_layers} layers"
            )
        if any(n < 1 for n in self.filters_per_layer):
            raise BadConfig("every layer needs at least one filter")
        if self.filter_size < 1 or self.filter_size % 2 == 0:
            raise BadConfig(f"filter_size must be odd and positive, got {self.filter_size}")
        if self.pool_dim < 1:
            raise BadConfig(f"pool_dim must be >= 1, got {self.pool_dim}")
        if self.num_classes < 2:
            raise BadConfig(f"num_classes must be >= 2, got {self.num_classes}")

    @property
    def channels(self) -> tuple[int, ...]:
        """Channel counts entering each layer: (1, n_1, ..., n_L)."""
        return (1,) + self.filters_per_layer

    def with_layers(self, num_layers: int) -> "ArchConfig":
        base = self.filters_per_layer[0]
        return ArchConfig(
            num_layers=num_layers,
            filters_per_layer=(base,) * num_layers,
            filter_size=self.filter_size,
            pool_dim=self.pool_dim,
            num_classes=self.num_classes,
        )

    def to_dict(self) -> dict:
        return {
            "num_layers": self.num_layers,
            "filters_per_layer": list(self.filters_per_layer),
            "filter_size": self.filter_size,
            "pool_dim": self.pool_dim,
            "num_classes": self.num_classes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchConfig":
        try:
            return cls(
                num_layers=int(d["num_layers"]),
                filters_per_layer=tuple(d["filters_per_layer"]),
                filter_size=int(d["filter_size"]),
                pool_dim=int(d["pool_dim"]),
                num_classes=int(d["num_classes"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise BadConfig(f"bad architecture dict: {d}") from exc


DEFAULT_CONFIG = ArchConfig()


@dataclass
class CaeParameters:
    """Filter banks and biases; encoder per layer, decoder mirrored.

    ``w_dec[k]`` is the decoder filter used after unpooling encoder layer
    k's switches; it maps that layer's filters back toward the input
    side (to the class logits for k = 0). ``c`` is one bias per output
    class; intermediate decoder stages are bias-free.
    """

    w_enc: list[np.ndarray]  # (n_k, n_{k-1}, f, f)
    b_enc: list[np.ndarray]  # (n_k,)
    w_dec: list[np.ndarray]  # (n_{k-1} or C, n_k, f, f)
    c: np.ndarray            # (C,)

    def copy(self) -> "CaeParameters":
        return CaeParameters(
            [w.copy() for w in self.w_enc],
            [b.copy() for b in self.b_enc],
            [w.copy() for w in self.w_dec],
            self.c.copy(),
        )

    def astype(self, dtype) -> "CaeParameters":
        return CaeParameters(
            [w.astype(dtype) for w in self.w_enc],
            [b.astype(dtype) for b in self.b_enc],
            [w.astype(dtype) for w in self.w_dec],
            self.c.astype(dtype),
        )

    def tensors(self) -> list[tuple[str, np.ndarray]]:
        """Named tensors in the documented serialization order."""
        out = []
        for k, (w, b) in enumerate(zip(self.w_enc, self.b_enc)):
            out.append((f"w_enc[{k}]", w))
            out.append((f"b_enc[{k}]", b))
        for k, w in enumerate(self.w_dec):
            out.append((f"w_dec[{k}]", w))
        out.append(("c", self.c))
        return out

    def to_vector(self) -> np.ndarray:
        return np.concatenate([t.ravel() for _, t in self.tensors()])

    @classmethod
    def from_vector(cls, config: ArchConfig, vector: np.ndarray) -> "CaeParameters":
        shapes = parameter_shapes(config)
        vector = np.asarray(vector)
        arrays, pos = [], 0
        for _, shape in shapes:
            n = int(np.prod(shape))
            arrays.append(vector[pos:pos + n].reshape(shape).copy())
            pos += n
        if pos != vector.size:
            raise ShapeMismatch(f"vector has {vector.size} entries, expected {pos}")
        L = config.num_layers
        return cls(
            w_enc=arrays[0:2 * L:2],
            b_enc=arrays[1:2 * L:2],
            w_dec=arrays[2 * L:3 * L],
            c=arrays[-1],
        )

    def all_finite(self) -> bool:
        return all(np.isfinite(t).all() for _, t in self.tensors())


def parameter_shapes(config: ArchConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Tensor names and shapes in serialization order."""
    n = config.channels
    f = config.filter_size
    shapes: list[tuple[str, tuple[int, ...]]] = []
    for k in range(config.num_layers):
        shapes.append((f"w_enc[{k}]", (n[k + 1], n[k], f, f)))
        shapes.append((f"b_enc[{k}]", (n[k + 1],)))
    for k in range(config.num_layers):
        out_ch = config.num_classes if k == 0 else n[k]
        shapes.append((f"w_dec[{k}]", (out_ch, n[k + 1], f, f)))
    shapes.append(("c", (config.num_classes,)))
    return shapes


def init_params(config: ArchConfig, seed: int, dtype=np.float64) -> CaeParameters:
    """Uniform weights in [-s, s] with s = 1/sqrt(fan-in); zero biases."""
    rng = np.random.default_rng(seed)
    f = config.filter_size
    n = config.channels
    w_enc, b_enc = [], []
    for k in range(config.num_layers):
        s = 1.0 / np.sqrt(n[k] * f * f)
        w_enc.append(rng.uniform(-s, s, size=(n[k + 1], n[k], f, f)).astype(dtype))
        b_enc.append(np.zeros(n[k + 1], dtype=dtype))
    w_dec = []
    for k in range(config.num_layers):
        out_ch = config.num_classes if k == 0 else n[k]
        s = 1.0 / np.sqrt(n[k + 1] * f * f)
        w_dec.append(rng.uniform(-s, s, size=(out_ch, n[k + 1], f, f)).astype(dtype))
    c = np.zeros(config.num_classes, dtype=dtype)
    return CaeParameters(w_enc, b_enc, w_dec, c)


@dataclass
class PredictionMap:
    """Per-pixel class distribution for one slice."""

    probs: np.ndarray        # (C, H, W), each pixel sums to 1
    class_map: np.ndarray    # (H, W) uint8, predicted class ids 1..C
    confidence: np.ndarray   # (H, W), max probability
    version: int = 0

    def __post_init__(self):
        tol = 1e-9 if self.probs.dtype == np.float64 else 1e-4
        sums = self.probs.sum(axis=0)
        if not np.all(np.abs(sums - 1.0) <= tol):
            raise NonFiniteActivation("per-pixel probabilities do not sum to 1")

    @classmethod
    def from_probs(cls, probs: np.ndarray, version: int = 0) -> "PredictionMap":
        class_map = (probs.argmax(axis=0) + 1).astype(np.uint8)
        confidence = probs.max(axis=0)
        return cls(probs=probs, class_map=class_map, confidence=confidence, version=version)

    @property
    def num_classes(self) -> int:
        return self.probs.shape[0]

    def hidden_mask(self, threshold: float) -> np.ndarray:
        """True where the display should hide the prediction.

        The distribution itself is unaffected by the threshold.
        """
        return self.confidence < threshold


@dataclass
class TrainingBatch:
    """(normalized image, label slice) pairs; labels 0 mean unlabeled."""

    slices: tuple[tuple[np.ndarray, np.ndarray], ...]

    def __post_init__(self):
        self.slices = tuple((np.asarray(img), np.asarray(lab)) for img, lab in self.slices)
        for img, lab in self.slices:
            if img.shape != lab.shape:
                raise ShapeMismatch(f"image {img.shape} vs labels {lab.shape}")
        if self.labeled_pixels == 0:
            raise NoLabeledPixels("batch contains no labeled pixels")

    @property
    def labeled_pixels(self) -> int:
        return int(sum(np.count_nonzero(lab) for _, lab in self.slices))


@dataclass
class _EncCache:
    conv: CorrCache
    relu_mask: np.ndarray       # bool, pre-pad extents
    prepad_hw: tuple[int, int]
    padded_hw: tuple[int, int]
    switches: np.ndarray        # (n_k, Hp/p, Wp/p) argmax within each window


@dataclass
class _DecCache:
    conv: CorrCache
    relu_mask: np.ndarray | None  # None on the final (softmax) stage


@dataclass
class FeatureMaps:
    """Forward-pass activations plus everything backprop needs."""

    activations: list[np.ndarray]   # encoder post-ReLU maps h^k
    switches: list[np.ndarray]      # pooling argmax indices per layer
    logits: np.ndarray              # (C, H, W) pre-softmax
    enc: list[_EncCache] = field(default_factory=list, repr=False)
    dec: list[_DecCache] = field(default_factory=list, repr=False)


def _pad_to_multiple(x: np.ndarray, p: int) -> np.ndarray:
    ph = (-x.shape[1]) % p
    pw = (-x.shape[2]) % p
    if ph or pw:
        x = np.pad(x, ((0, 0), (0, ph), (0, pw)), mode="edge")
    return x


def _fold_pad_grad(d: np.ndarray, hw: tuple[int, int]) -> np.ndarray:
    """Adjoint of right/bottom edge replication."""
    h, w = hw
    if d.shape[1] > h:
        rows = d[:, :h, :].copy()
        rows[:, h - 1, :] += d[:, h:, :].sum(axis=1)
        d = rows
    if d.shape[2] > w:
        cols = d[:, :, :w].copy()
        cols[:, :, w - 1] += d[:, :, w:].sum(axis=2)
        d = cols
    return d


def _windowed(x: np.ndarray, p: int) -> np.ndarray:
    c, h, w = x.shape
    return (
        x.reshape(c, h // p, p, w // p, p)
        .transpose(0, 1, 3, 2, 4)
        .reshape(c, h // p, w // p, p * p)
    )


def _pool(x: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Max of each non-overlapping p x p block plus the argmax switches.

    Ties resolve to the first (row-major) position inside the window.
    """
    if p == 2:
        v = x.reshape(x.shape[0], x.shape[1] // 2, 2, x.shape[2] // 2, 2)
        a00, a01 = v[:, :, 0, :, 0], v[:, :, 0, :, 1]
        a10, a11 = v[:, :, 1, :, 0], v[:, :, 1, :, 1]
        m0 = np.maximum(a00, a01)
        m1 = np.maximum(a10, a11)
        pooled = np.maximum(m0, m1)
        # strict > keeps the first maximum, matching argmax on ties
        s0 = (a01 > a00).astype(np.int8)
        s1 = (a11 > a10).astype(np.int8) + 2
        switches = np.where(m1 > m0, s1, s0)
        return pooled, switches
    win = _windowed(x, p)
    switches = win.argmax(axis=-1)
    pooled = np.take_along_axis(win, switches[..., None], axis=-1)[..., 0]
    return pooled, switches


def _gather(x: np.ndarray, switches: np.ndarray, p: int) -> np.ndarray:
    if p == 2:
        v = x.reshape(x.shape[0], x.shape[1] // 2, 2, x.shape[2] // 2, 2)
        out = np.where(switches < 2,
                       np.where(switches == 0, v[:, :, 0, :, 0], v[:, :, 0, :, 1]),
                       np.where(switches == 2, v[:, :, 1, :, 0], v[:, :, 1, :, 1]))
        return out
    win = _windowed(x, p)
    return np.take_along_axis(win, switches[..., None], axis=-1)[..., 0]


def _scatter(z: np.ndarray, switches: np.ndarray, p: int) -> np.ndarray:
    c, hp, wp = z.shape
    if p == 2:
        out = np.zeros((c, hp * 2, wp * 2), dtype=z.dtype)
        v = out.reshape(c, hp, 2, wp, 2)
        for pos in range(4):
            v[:, :, pos // 2, :, pos % 2] = np.where(switches == pos, z, 0)
        return out
    buf = np.zeros((c, hp, wp, p * p), dtype=z.dtype)
    np.put_along_axis(buf, switches[..., None], z[..., None], axis=-1)
    return buf.reshape(c, hp, wp, p, p).transpose(0, 1, 3, 2, 4).reshape(c, hp * p, wp * p)


def unpool(z: np.ndarray, switches: np.ndarray, p: int) -> np.ndarray:
    """Scatter each pooled value back to its recorded window position."""
    return _scatter(z, switches, p)


def _as_single_channel(image: np.ndarray) -> np.ndarray:
    x = np.asarray(image)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[0] != 1:
        raise ShapeMismatch(f"expected one grayscale slice, got shape {np.asarray(image).shape}")
    return x


def forward(params: CaeParameters, config: ArchConfig,
            image: np.ndarray, version: int = 0) -> tuple[FeatureMaps, PredictionMap]:
    """Full encoder/decoder pass on one normalized slice.

    Output extents always equal the input extents.
    """
    fm, probs = _forward_internal(params, config, image)
    return fm, PredictionMap.from_probs(probs, version=version)


def _forward_internal(params: CaeParameters, config: ArchConfig,
                      image: np.ndarray) -> tuple[FeatureMaps, np.ndarray]:
    x = _as_single_channel(image).astype(params.c.dtype, copy=False)
    p = config.pool_dim

    activations: list[np.ndarray] = []
    all_switches: list[np.ndarray] = []
    enc_caches: list[_EncCache] = []
    for k in range(config.num_layers):
        pre, cache = corr2d(x, params.w_enc[k])
        pre += params.b_enc[k][:, None, None]
        h = np.maximum(pre, 0.0)
        prepad_hw = h.shape[1:]
        hp = _pad_to_multiple(h, p)
        pooled, switches = _pool(hp, p)
        activations.append(h)
        all_switches.append(switches)
        enc_caches.append(_EncCache(cache, h > 0, prepad_hw, hp.shape[1:], switches))
        x = pooled

    dec_caches: list[_DecCache] = [None] * config.num_layers  # type: ignore[list-item]
    for k in range(config.num_layers - 1, -1, -1):
        ec = enc_caches[k]
        up = _scatter(x, ec.switches, p)
        uc = up[:, :ec.prepad_hw[0], :ec.prepad_hw[1]]
        t, cache = corr2d(np.ascontiguousarray(uc), params.w_dec[k])
        if k > 0:
            x = np.maximum(t, 0.0)
            dec_caches[k] = _DecCache(cache, t > 0)
        else:
            logits = t + params.c[:, None, None]
            dec_caches[k] = _DecCache(cache, None)

    if not np.isfinite(logits).all():
        raise NonFiniteActivation("non-finite logits in forward pass")
    shifted = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=0, keepdims=True)

    fm = FeatureMaps(
        activations=activations,
        switches=all_switches,
        logits=logits,
        enc=enc_caches,
        dec=dec_caches,
    )
    return fm, probs


def _masked_nll(probs: np.ndarray, labels: np.ndarray) -> tuple[float, int]:
    """Sum of -log p(true class) over labeled pixels, and their count."""
    labels = np.asarray(labels)
    if labels.shape != probs.shape[1:]:
        raise ShapeMismatch(f"labels {labels.shape} vs prediction {probs.shape[1:]}")
    mask = labels != 0
    m = int(np.count_nonzero(mask))
    if m == 0:
        raise NoLabeledPixels("no labeled pixels in slice")
    idx = labels[mask].astype(np.intp) - 1
    p_true = probs[:, mask][idx, np.arange(m)]
    with np.errstate(divide="ignore"):
        return float(-np.log(p_true).sum()), m


def masked_loss(pred: PredictionMap, labels: np.ndarray) -> float:
    """Mean cross-entropy over labeled pixels (label != 0) only."""
    total, m = _masked_nll(pred.probs, labels)
    return total / m


def _slice_backward(params: CaeParameters, config: ArchConfig, fm: FeatureMaps,
                    probs: np.ndarray, labels: np.ndarray, total_labeled: int,
                    grads: CaeParameters) -> None:
    """Accumulate exact gradients for one slice into ``grads``."""
    p = config.pool_dim
    mask = labels != 0
    dlogits = probs.copy()
    flat = dlogits.reshape(dlogits.shape[0], -1)
    mflat = mask.ravel()
    idx = labels.ravel()[mflat].astype(np.intp) - 1
    cols = np.flatnonzero(mflat)
    flat[idx, cols] -= 1.0
    dlogits *= mask / total_labeled

    # decoder stages, shallow (softmax side) to deep
    d = dlogits
    for k in range(config.num_layers):
        dc_cache = fm.dec[k]
        if k == 0:
            grads.c += d.sum(axis=(1, 2))
            dt = d
        else:
            dt = d * dc_cache.relu_mask
        dw, duc = corr2d_grads(dt, dc_cache.conv, need_dx=True)
        grads.w_dec[k] += dw
        ec = fm.enc[k]
        dup = np.zeros((duc.shape[0],) + ec.padded_hw, dtype=duc.dtype)
        dup[:, :ec.prepad_hw[0], :ec.prepad_hw[1]] = duc
        d = _gather(dup, ec.switches, p)

    # encoder layers, deep to shallow
    for k in range(config.num_layers - 1, -1, -1):
        ec = fm.enc[k]
        dhp = _scatter(d, ec.switches, p)
        dh = _fold_pad_grad(dhp, ec.prepad_hw)
        da = dh * ec.relu_mask
        grads.b_enc[k] += da.sum(axis=(1, 2))
        dw, dx = corr2d_grads(da, ec.conv, need_dx=k > 0)
        grads.w_enc[k] += dw
        if k > 0:
            d = dx


def _zero_grads(config: ArchConfig, dtype) -> CaeParameters:
    return CaeParameters(
        w_enc=[np.zeros(s, dtype=dtype) for n, s in parameter_shapes(config) if n.startswith("w_enc")],
        b_enc=[np.zeros(s, dtype=dtype) for n, s in parameter_shapes(config) if n.startswith("b_enc")],
        w_dec=[np.zeros(s, dtype=dtype) for n, s in parameter_shapes(config) if n.startswith("w_dec")],
        c=np.zeros(config.num_classes, dtype=dtype),
    )


def backward(params: CaeParameters, config: ArchConfig,
             batch: TrainingBatch) -> tuple[CaeParameters, float]:
    """Gradients of the masked loss for every parameter, plus the loss.

    The loss is the mean cross-entropy over all labeled pixels in the
    batch, evaluated at the current parameters.
    """
    total = batch.labeled_pixels
    grads = _zero_grads(config, params.c.dtype)
    loss_sum = 0.0
    for image, labels in batch.slices:
        labels = np.asarray(labels)
        if not np.count_nonzero(labels):
            continue
        fm, probs = _forward_internal(params, config, image)
        nll, _ = _masked_nll(probs, labels)
        loss_sum += nll
        _slice_backward(params, config, fm, probs, labels, total, grads)
    return grads, loss_sum / total


def batch_loss(params: CaeParameters, config: ArchConfig, batch: TrainingBatch) -> float:
    """Masked cross-entropy over the batch without computing gradients."""
    total = batch.labeled_pixels
    loss_sum = 0.0
    for image, labels in batch.slices:
        labels = np.asarray(labels)
        if np.count_nonzero(labels):
            _, probs = _forward_internal(params, config, image)
            nll, _ = _masked_nll(probs, labels)
            loss_sum += nll
    return loss_sum / total


class SgdMomentum:
    """Classic momentum update: v <- momentum*v - lr*g; theta <- theta + v."""

    def __init__(self, learning_rate: float = 0.01, momentum: float = 0.9):
        self.learning_rate = float(learning_rate)
        self.momentum = float(momentum)
        self._velocity: list[np.ndarray] | None = None

    def step(self, params: CaeParameters, grads: CaeParameters) -> CaeParameters:
        tensors = [t for _, t in params.tensors()]
        gtensors = [t for _, t in grads.tensors()]
        if len(tensors) != len(gtensors) or any(
            a.shape != b.shape for a, b in zip(tensors, gtensors)
        ):
            raise ShapeMismatch("gradient shapes do not match parameters")
        if self._velocity is None:
            self._velocity = [np.zeros_like(t) for t in tensors]
        for theta, g, v in zip(tensors, gtensors, self._velocity):
            v *= self.momentum
            v -= self.learning_rate * g
            theta += v
        if not params.all_finite():
            raise NonFiniteUpdate("parameters became non-finite")
        return params


def sgd_step(params: CaeParameters, grads: CaeParameters,
             learning_rate: float, momentum: float,
             optimizer: SgdMomentum | None = None) -> tuple[CaeParameters, SgdMomentum]:
    """One momentum-SGD update; pass the returned optimizer back in to
    keep the velocity state across steps."""
    if optimizer is None:
        optimizer = SgdMomentum(learning_rate, momentum)
    else:
        optimizer.learning_rate = learning_rate
        optimizer.momentum = momentum
    return optimizer.step(params, grads), optimizer


def predict_slice(params: CaeParameters, config: ArchConfig,
                  image: np.ndarray, version: int = 0) -> PredictionMap:
    _, pred = forward(params, config, image, version=version)
    return pred


def predict_volume(params: CaeParameters, config: ArchConfig, volume: Volume,
                   threshold: float = 0.0, version: int = 0,
                   dtype=np.float64) -> list[tuple[PredictionMap, np.ndarray]]:
    """Per-slice predictions with sub-threshold pixels flagged hidden.

    The threshold only controls the hidden flags, never the distribution.
    """
    out = []
    cast = params.astype(dtype) if params.c.dtype != dtype else params
    for k in range(volume.depth):
        image = normalize_intensity(volume.voxels[k], dtype=dtype)
        pred = predict_slice(cast, config, image, version=version)
        out.append((pred, pred.hidden_mask(threshold)))
    return out


CHECKPOINT_MAGIC = "voxanno-cae-checkpoint"


def save_checkpoint(params: CaeParameters, config: ArchConfig, path) -> None:
    """Header line of JSON, then the little-endian float64 blob."""
    header = {
        "format": CHECKPOINT_MAGIC,
        "version": 1,
        "config": config.to_dict(),
        "dtype": "float64",
        "order": [name for name, _ in parameter_shapes(config)],
    }
    blob = params.to_vector().astype("<f8").tobytes()
    with Path(path).open("wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        fh.write(blob)


def load_checkpoint(path) -> tuple[CaeParameters, ArchConfig]:
    with Path(path).open("rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(header_line)
    except ValueError as exc:
        raise BadHeader(f"{path}: not a checkpoint") from exc
    if header.get("format") != CHECKPOINT_MAGIC:
        raise BadHeader(f"{path}: unexpected format {header.get('format')!r}")
    config = ArchConfig.from_dict(header["config"])
    vector = np.frombuffer(blob, dtype="<f8")
    return CaeParameters.from_vector(config, vector), config
