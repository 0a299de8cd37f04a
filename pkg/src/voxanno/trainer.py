"""Background incremental training over label snapshots.

The trainer is a plain synchronous object: callers (a worker thread in
the service, or a scripted scheduler in tests) drive it by submitting
snapshots and running epochs. Snapshots are immutable copies of the
labels, queued latest-wins with depth one; an epoch picks up the newest
snapshot, makes one pass over its labeled slices (one momentum-SGD step
per slice, in ascending slice order), and publishes a fresh parameter
snapshot under a strictly increasing version number.

Resets reinitialize the parameters and move the validity watermark so
predictions produced before the reset are rejected downstream; the
version number itself keeps increasing so consumers can order
predictions across resets.

Wall-clock accounting uses an injectable clock so scripted schedules
replay deterministically. Training math defaults to float32 (the
interactive path); pass dtype=np.float64 for test-grade numerics.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from threading import Lock

import numpy as np

from . import cae
from .annotate import InteractionLog, InteractionEvent
from .errors import NoLabeledPixels, VoxannoError
from .volume import LabelMap, Volume, normalize_intensity

PHASE_IDLE = "idle"
PHASE_TRAINING = "training"
PHASE_PAUSED = "paused"


@dataclass(frozen=True)
class LabelSnapshot:
    """Immutable copy of the labeled slices of one volume."""

    volume_id: str
    snapshot_id: int
    created_at: float
    slices: tuple[tuple[int, np.ndarray, np.ndarray], ...]  # (k, image, labels)
    labeled_pixels: int

    @property
    def empty(self) -> bool:
        return self.labeled_pixels == 0


def snapshot_from(volume: Volume, label_map: LabelMap, snapshot_id: int,
                  created_at: float = 0.0) -> LabelSnapshot:
    """Copy every slice that has at least one labeled pixel."""
    slices = []
    total = 0
    for k in range(volume.depth):
        labels = label_map.labels[k]
        count = int(np.count_nonzero(labels))
        if count:
            image = normalize_intensity(volume.voxels[k])
            slices.append((k, image, labels.copy()))
            total += count
    return LabelSnapshot(
        volume_id=volume.volume_id,
        snapshot_id=snapshot_id,
        created_at=created_at,
        slices=tuple(slices),
        labeled_pixels=total,
    )


@dataclass(frozen=True)
class EpochResult:
    epoch: int
    loss: float
    version: int


class Trainer:
    """One model, one training actor; see the module docstring."""

    def __init__(self, config: cae.ArchConfig, seed: int,
                 learning_rate: float = 0.01, momentum: float = 0.9,
                 clock=time.monotonic, dtype=np.float32,
                 log: InteractionLog | None = None):
        self.config = config
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.clock = clock
        self.dtype = dtype
        self.log = log
        self._lock = Lock()
        self._pending: LabelSnapshot | None = None
        self._active: LabelSnapshot | None = None
        self._active_images: list[tuple[int, np.ndarray, np.ndarray]] = []
        self._paused = False
        self.diagnostic: str | None = None
        self.epochs_completed = 0
        self.version = 0
        self.min_valid_version = 0
        self._durations: dict[str, float] = {}
        self._seed_model(seed)

    # -- lifecycle --------------------------------------------------------

    def _seed_model(self, seed: int) -> None:
        self.seed = seed
        self.params = cae.init_params(self.config, seed, dtype=self.dtype)
        self._optimizer = cae.SgdMomentum(self.learning_rate, self.momentum)
        with self._lock:
            self._published = (self.params.copy(), self.version)

    def reset_for_new_user(self, seed: int) -> None:
        """Fresh parameters, cleared queue and counters, bumped watermark."""
        with self._lock:
            self._pending = None
        self._active = None
        self._active_images = []
        self._paused = False
        self.diagnostic = None
        self.epochs_completed = 0
        self.version += 1
        self.min_valid_version = self.version
        self._durations = {}
        self._seed_model(seed)

    def apply_config(self, config: cae.ArchConfig, seed: int) -> None:
        """Architecture change; implies a model reset but keeps the queue."""
        pending = self._pending
        active = self._active
        self.config = config
        self.reset_for_new_user(seed)
        with self._lock:
            self._pending = pending if pending is not None else active

    def pause(self) -> None:
        self._paused = True

    def resume(self) -> None:
        self._paused = False
        self.diagnostic = None

    # -- snapshots ---------------------------------------------------------

    def submit_snapshot(self, snapshot: LabelSnapshot) -> None:
        """Queue depth is one: a newer snapshot replaces any queued one."""
        with self._lock:
            self._pending = snapshot

    def _take_pending(self) -> None:
        with self._lock:
            pending, self._pending = self._pending, None
        if pending is not None:
            self._active = pending
            self._active_images = [
                (k, img.astype(self.dtype, copy=False), lab)
                for k, img, lab in pending.slices
            ]

    @property
    def phase(self) -> str:
        if self._paused:
            return PHASE_PAUSED
        snap = self._active or self._pending
        if snap is None or snap.empty:
            return PHASE_IDLE
        return PHASE_TRAINING

    # -- training ----------------------------------------------------------

    def run_epoch(self) -> EpochResult | None:
        """One pass over the active snapshot's labeled slices.

        Returns None (and leaves the version untouched) when there is
        nothing to train on. The reported loss is the masked
        cross-entropy of the snapshot recomputed after the epoch's
        updates.
        """
        self._take_pending()
        if self.phase != PHASE_TRAINING:
            return None
        assert self._active is not None
        started = self.clock()
        try:
            for k, image, labels in self._active_images:
                batch = cae.TrainingBatch(((image, labels),))
                grads, _ = cae.backward(self.params, self.config, batch)
                self._optimizer.step(self.params, grads)
            full = cae.TrainingBatch(tuple(
                (img, lab) for _, img, lab in self._active_images
            ))
            loss = cae.batch_loss(self.params, self.config, full)
        except VoxannoError as exc:
            self._paused = True
            self.diagnostic = str(exc)
            raise
        elapsed = self.clock() - started
        self._durations[self._active.volume_id] = (
            self._durations.get(self._active.volume_id, 0.0) + elapsed
        )
        self.epochs_completed += 1
        self.version += 1
        with self._lock:
            self._published = (self.params.copy(), self.version)
        result = EpochResult(epoch=self.epochs_completed, loss=loss, version=self.version)
        if self.log is not None:
            self.log.append(InteractionEvent(
                kind="train_epoch",
                timestamp=time.time() if self.clock is time.monotonic else self.clock(),
                source="model",
                payload={"epoch": result.epoch, "loss": result.loss,
                         "version": result.version},
            ))
        return result

    def training_time_report(self) -> dict[str, float]:
        """Seconds spent training, per stack whose snapshot was active."""
        return dict(self._durations)

    # -- prediction --------------------------------------------------------

    def published(self) -> tuple[cae.CaeParameters, int]:
        with self._lock:
            return self._published

    def predict(self, image: np.ndarray, threshold: float = 0.0) -> tuple[cae.PredictionMap, np.ndarray]:
        """Forward pass on the latest published parameter snapshot."""
        params, version = self.published()
        pred = cae.predict_slice(
            params, self.config, np.asarray(image, dtype=self.dtype), version=version
        )
        return pred, pred.hidden_mask(threshold)
