"""Label edits (brush, polygon, accepted predictions) and the event log.

Every edit mutates a LabelMap through this module and appends one event
to the session's InteractionLog. Events carry enough payload that
replaying a log against an empty map reproduces the final labels
bit-exactly: strokes and polygons replay from their parameters, accepted
predictions record the exact pixel delta they applied.

Per-pixel provenance is tracked alongside the labels (unlabeled / user /
model); accepted predictions only ever fill unlabeled pixels, so a pixel
labeled by the user is never overwritten by the model. The eraser is the
class-0 brush and clears provenance.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .cae import PredictionMap
from .errors import (
    DegeneratePolygon,
    DimensionMismatch,
    MalformedLog,
    OutOfBounds,
    UnknownClass,
    VersionMismatch,
)
from .volume import DEFAULT_CLASS_NAMES, LabelMap

SOURCE_NONE = 0
SOURCE_USER = 1
SOURCE_MODEL = 2

EVENT_KINDS = (
    "session_start",
    "session_end",
    "stroke",
    "polygon",
    "accept_predictions",
    "slice_change",
    "threshold_change",
    "model_config_change",
    "train_epoch",
    "pause",
    "resume",
)


@dataclass(frozen=True)
class BrushStroke:
    """Disc stamp along a path of pixel coordinates; class 0 erases."""

    slice_index: int
    class_id: int
    radius: int
    path: tuple[tuple[int, int], ...]
    session_id: str = ""
    timestamp: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "path", tuple((int(round(x)), int(round(y))) for x, y in self.path)
        )
        if not self.path:
            raise OutOfBounds("stroke path is empty")
        if self.radius < 1:
            raise OutOfBounds(f"brush radius must be >= 1, got {self.radius}")


@dataclass(frozen=True)
class PolygonFill:
    """Polygon applied to every slice in an inclusive range.

    A single-slice range is the 2D fill; a wider range extrudes the same
    polygon through the slab.
    """

    class_id: int
    vertices: tuple[tuple[float, float], ...]
    slice_range: tuple[int, int]
    session_id: str = ""
    timestamp: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "vertices", tuple((float(x), float(y)) for x, y in self.vertices)
        )
        if len(self.vertices) < 3:
            raise DegeneratePolygon(f"need >= 3 vertices, got {len(self.vertices)}")
        if _shoelace_area(self.vertices) == 0.0:
            raise DegeneratePolygon("polygon has zero area")
        k0, k1 = self.slice_range
        if k0 > k1:
            raise OutOfBounds(f"slice range [{k0}, {k1}] is inverted")


@dataclass(frozen=True)
class EditSummary:
    newly_labeled: int
    overwritten: int

    @property
    def pixels_changed(self) -> int:
        return self.newly_labeled + self.overwritten


@dataclass(frozen=True)
class InteractionEvent:
    kind: str
    timestamp: float
    source: str = "user"  # "user" or "model"
    pixels_affected: int = 0
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise MalformedLog(f"unknown event kind {self.kind!r}")
        if self.pixels_affected < 0:
            raise MalformedLog("pixels_affected must be >= 0")

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "t": self.timestamp,
                "source": self.source,
                "pixels_affected": self.pixels_affected,
                "payload": self.payload,
            }
        )

    @classmethod
    def from_json(cls, line: str) -> "InteractionEvent":
        try:
            d = json.loads(line)
            return cls(
                kind=d["kind"],
                timestamp=float(d["t"]),
                source=d.get("source", "user"),
                pixels_affected=int(d.get("pixels_affected", 0)),
                payload=d.get("payload", {}),
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedLog(f"bad event line: {line!r}") from exc


class InteractionLog:
    """Ordered event list for one session, serializable as JSON lines.

    Must begin with session_start; nothing may follow session_end.
    Timestamps appended out of order are clamped up to the latest seen;
    logs loaded from disk are validated instead.
    """

    def __init__(self, session_id: str, reader_id: str,
                 events: Iterable[InteractionEvent] = ()):
        self.session_id = session_id
        self.reader_id = reader_id
        self.events: list[InteractionEvent] = list(events)

    def append(self, event: InteractionEvent) -> InteractionEvent:
        if not self.events and event.kind != "session_start":
            raise MalformedLog("log must begin with session_start")
        if self.events:
            if self.events[-1].kind == "session_end":
                raise MalformedLog("no events allowed after session_end")
            last_t = self.events[-1].timestamp
            if event.timestamp < last_t:
                event = InteractionEvent(
                    kind=event.kind,
                    timestamp=last_t,
                    source=event.source,
                    pixels_affected=event.pixels_affected,
                    payload=event.payload,
                )
        self.events.append(event)
        return event

    @property
    def closed(self) -> bool:
        return bool(self.events) and self.events[-1].kind == "session_end"

    def validate(self) -> None:
        if not self.events or self.events[0].kind != "session_start":
            raise MalformedLog("log must begin with session_start")
        ends = [e for e in self.events if e.kind == "session_end"]
        if len(ends) > 1:
            raise MalformedLog("more than one session_end")
        if ends and self.events[-1].kind != "session_end":
            raise MalformedLog("events after session_end")
        times = [e.timestamp for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise MalformedLog("timestamps decrease within the session")

    def to_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)

    def save(self, path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "InteractionLog":
        events = [InteractionEvent.from_json(line) for line in text.splitlines() if line.strip()]
        if not events:
            raise MalformedLog("empty log")
        head = events[0].payload
        log = cls(head.get("session_id", ""), head.get("reader_id", ""), events)
        log.validate()
        return log

    @classmethod
    def load(cls, path) -> "InteractionLog":
        return cls.from_jsonl(Path(path).read_text())


# --- rasterization ---------------------------------------------------------

def _shoelace_area(vertices: Sequence[tuple[float, float]]) -> float:
    area = 0.0
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        area += x1 * y2 - x2 * y1
    return abs(area) / 2.0


def stroke_mask(stroke: BrushStroke, width: int, height: int) -> np.ndarray:
    """Pixels within Euclidean distance <= radius of any path point.

    Path points must lie inside the slice; the disc itself is clipped at
    the edges.
    """
    for x, y in stroke.path:
        if not (0 <= x < width and 0 <= y < height):
            raise OutOfBounds(f"stroke point ({x}, {y}) outside {width}x{height} slice")
    r = stroke.radius
    dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
    disc = dy * dy + dx * dx <= r * r
    offs_y = dy[disc]
    offs_x = dx[disc]
    pts = np.asarray(stroke.path)
    ys = (pts[:, 1][:, None] + offs_y[None, :]).ravel()
    xs = (pts[:, 0][:, None] + offs_x[None, :]).ravel()
    keep = (ys >= 0) & (ys < height) & (xs >= 0) & (xs < width)
    mask = np.zeros((height, width), dtype=bool)
    mask[ys[keep], xs[keep]] = True
    return mask


def polygon_mask(vertices: Sequence[tuple[float, float]],
                 width: int, height: int) -> np.ndarray:
    """Even-odd interior at pixel centers, plus boundary pixels."""
    xs = np.arange(width, dtype=np.float64)[None, :]
    ys = np.arange(height, dtype=np.float64)[:, None]
    inside = np.zeros((height, width), dtype=bool)
    boundary = np.zeros((height, width), dtype=bool)
    n = len(vertices)
    eps = 1e-9
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        crosses = (y1 > ys) != (y2 > ys)
        if crosses.any():
            denom = y2 - y1
            x_cross = x1 + (ys - y1) * (x2 - x1) / (denom if denom != 0 else 1.0)
            inside ^= crosses & (xs < x_cross)
        cross_prod = (x2 - x1) * (ys - y1) - (y2 - y1) * (xs - x1)
        on_line = np.abs(cross_prod) < eps
        in_box = (
            (xs >= min(x1, x2) - eps) & (xs <= max(x1, x2) + eps)
            & (ys >= min(y1, y2) - eps) & (ys <= max(y1, y2) + eps)
        )
        boundary |= on_line & in_box
    return inside | boundary


# --- edits -----------------------------------------------------------------

def _check_class(label_map: LabelMap, class_id: int) -> None:
    if not 0 <= class_id <= label_map.num_classes:
        raise UnknownClass(
            f"class {class_id} outside 0..{label_map.num_classes}"
        )


def _apply_mask(label_map: LabelMap, sources: np.ndarray | None,
                k: int, mask: np.ndarray, class_id: int) -> EditSummary:
    plane = label_map.labels[k]
    changed = mask & (plane != class_id)
    newly = int(np.count_nonzero(changed & (plane == 0)))
    overwritten = int(np.count_nonzero(changed & (plane != 0)))
    plane[mask] = class_id
    if sources is not None:
        sources[k][mask] = SOURCE_USER if class_id != 0 else SOURCE_NONE
    return EditSummary(newly_labeled=newly, overwritten=overwritten)


def apply_stroke(label_map: LabelMap, stroke: BrushStroke,
                 sources: np.ndarray | None = None,
                 log: InteractionLog | None = None) -> EditSummary:
    """Stamp the stroke's disc along its path onto one slice."""
    _check_class(label_map, stroke.class_id)
    if not 0 <= stroke.slice_index < label_map.depth:
        raise OutOfBounds(f"slice {stroke.slice_index} outside volume")
    mask = stroke_mask(stroke, label_map.width, label_map.height)
    summary = _apply_mask(label_map, sources, stroke.slice_index, mask, stroke.class_id)
    if log is not None:
        log.append(InteractionEvent(
            kind="stroke",
            timestamp=stroke.timestamp,
            source="user",
            pixels_affected=summary.pixels_changed,
            payload={
                "slice": stroke.slice_index,
                "class_id": stroke.class_id,
                "radius": stroke.radius,
                "path": [list(p) for p in stroke.path],
            },
        ))
    return summary


def apply_polygon(label_map: LabelMap, fill: PolygonFill,
                  sources: np.ndarray | None = None,
                  log: InteractionLog | None = None) -> EditSummary:
    """Fill the polygon on every slice of its inclusive range."""
    _check_class(label_map, fill.class_id)
    k0, k1 = fill.slice_range
    if not (0 <= k0 <= k1 < label_map.depth):
        raise OutOfBounds(f"slice range [{k0}, {k1}] outside volume")
    w, h = label_map.width, label_map.height
    for x, y in fill.vertices:
        if not (0 <= x <= w - 1 and 0 <= y <= h - 1):
            raise OutOfBounds(f"vertex ({x}, {y}) outside {w}x{h} slice")
    mask = polygon_mask(fill.vertices, w, h)
    newly = overwritten = 0
    for k in range(k0, k1 + 1):
        s = _apply_mask(label_map, sources, k, mask, fill.class_id)
        newly += s.newly_labeled
        overwritten += s.overwritten
    summary = EditSummary(newly, overwritten)
    if log is not None:
        log.append(InteractionEvent(
            kind="polygon",
            timestamp=fill.timestamp,
            source="user",
            pixels_affected=summary.pixels_changed,
            payload={
                "class_id": fill.class_id,
                "vertices": [list(v) for v in fill.vertices],
                "k0": k0,
                "k1": k1,
            },
        ))
    return summary


def accept_predictions(label_map: LabelMap,
                       predictions: Mapping[int, PredictionMap],
                       threshold: float,
                       slice_range: tuple[int, int],
                       sources: np.ndarray | None = None,
                       log: InteractionLog | None = None,
                       min_version: int | None = None,
                       timestamp: float = 0.0) -> EditSummary:
    """Fill unlabeled pixels from confident predictions.

    Only pixels with no label take the predicted argmax class (where the
    max probability reaches the threshold); user- or model-labeled
    pixels are never overwritten. Slices in the range without a
    prediction are skipped. Predictions older than the newest model
    reset are rejected.
    """
    if not 0.0 <= threshold <= 1.0:
        raise OutOfBounds(f"threshold {threshold} outside [0, 1]")
    k0, k1 = slice_range
    if not (0 <= k0 <= k1 < label_map.depth):
        raise OutOfBounds(f"slice range [{k0}, {k1}] outside volume")
    newly = 0
    delta: list[dict] = []
    version = None
    for k in range(k0, k1 + 1):
        pred = predictions.get(k)
        if pred is None:
            continue
        if pred.probs.shape[1:] != (label_map.height, label_map.width):
            raise DimensionMismatch(
                f"prediction {pred.probs.shape[1:]} vs slice "
                f"{(label_map.height, label_map.width)}"
            )
        if min_version is not None and pred.version < min_version:
            raise VersionMismatch(
                f"prediction version {pred.version} predates model reset ({min_version})"
            )
        version = pred.version if version is None else max(version, pred.version)
        plane = label_map.labels[k]
        sel = (plane == 0) & (pred.confidence >= threshold)
        count = int(np.count_nonzero(sel))
        if count:
            ys, xs = np.nonzero(sel)
            classes = pred.class_map[sel]
            plane[sel] = classes
            if sources is not None:
                sources[k][sel] = SOURCE_MODEL
            delta.append({
                "k": k,
                "xs": xs.tolist(),
                "ys": ys.tolist(),
                "classes": classes.tolist(),
            })
            newly += count
    summary = EditSummary(newly_labeled=newly, overwritten=0)
    if log is not None:
        log.append(InteractionEvent(
            kind="accept_predictions",
            timestamp=timestamp,
            source="model",
            pixels_affected=newly,
            payload={
                "threshold": threshold,
                "k0": k0,
                "k1": k1,
                "version": version,
                "delta": delta,
            },
        ))
    return summary


# --- session wrapper -------------------------------------------------------

class Annotator:
    """Owns one LabelMap, its provenance plane, and the session log.

    Not thread-safe by itself; the service serializes access (single
    writer per map).
    """

    def __init__(self, dims: tuple[int, int, int],
                 class_names: Sequence[str] = DEFAULT_CLASS_NAMES,
                 session_id: str = "", reader_id: str = "",
                 volume_id: str = "", clock=time.time):
        width, height, depth = dims
        self.label_map = LabelMap(
            np.zeros((depth, height, width), dtype=np.uint8), tuple(class_names)
        )
        self.sources = np.zeros((depth, height, width), dtype=np.uint8)
        self.clock = clock
        self.log = InteractionLog(session_id, reader_id)
        self.log.append(InteractionEvent(
            kind="session_start",
            timestamp=self.clock(),
            payload={
                "session_id": session_id,
                "reader_id": reader_id,
                "volume_id": volume_id,
                "dims": list(dims),
                "class_names": list(class_names),
            },
        ))

    def apply_stroke(self, stroke: BrushStroke) -> EditSummary:
        stamped = BrushStroke(
            slice_index=stroke.slice_index, class_id=stroke.class_id,
            radius=stroke.radius, path=stroke.path,
            session_id=stroke.session_id or self.log.session_id,
            timestamp=self.clock(),
        )
        return apply_stroke(self.label_map, stamped, self.sources, self.log)

    def apply_polygon(self, fill: PolygonFill) -> EditSummary:
        stamped = PolygonFill(
            class_id=fill.class_id, vertices=fill.vertices,
            slice_range=fill.slice_range,
            session_id=fill.session_id or self.log.session_id,
            timestamp=self.clock(),
        )
        return apply_polygon(self.label_map, stamped, self.sources, self.log)

    def accept_predictions(self, predictions: Mapping[int, PredictionMap],
                           threshold: float, slice_range: tuple[int, int],
                           min_version: int | None = None) -> EditSummary:
        return accept_predictions(
            self.label_map, predictions, threshold, slice_range,
            self.sources, self.log, min_version, timestamp=self.clock(),
        )

    def record(self, kind: str, payload: dict | None = None,
               source: str = "user", pixels_affected: int = 0) -> None:
        self.log.append(InteractionEvent(
            kind=kind, timestamp=self.clock(), source=source,
            pixels_affected=pixels_affected, payload=payload or {},
        ))

    def end_session(self) -> None:
        if not self.log.closed:
            self.record("session_end")

    def labeled_mask(self) -> np.ndarray:
        return self.label_map.labels != 0


# --- replay and analytics --------------------------------------------------

def replay_log(log: InteractionLog) -> tuple[LabelMap, np.ndarray]:
    """Rebuild the final LabelMap and provenance from an event log."""
    log.validate()
    head = log.events[0].payload
    try:
        width, height, depth = head["dims"]
        class_names = tuple(head.get("class_names", DEFAULT_CLASS_NAMES))
    except (KeyError, ValueError) as exc:
        raise MalformedLog("session_start payload lacks dims") from exc
    label_map = LabelMap(np.zeros((depth, height, width), dtype=np.uint8), class_names)
    sources = np.zeros((depth, height, width), dtype=np.uint8)
    for event in log.events:
        p = event.payload
        if event.kind == "stroke":
            stroke = BrushStroke(
                slice_index=p["slice"], class_id=p["class_id"],
                radius=p["radius"], path=tuple(map(tuple, p["path"])),
                timestamp=event.timestamp,
            )
            apply_stroke(label_map, stroke, sources)
        elif event.kind == "polygon":
            fill = PolygonFill(
                class_id=p["class_id"], vertices=tuple(map(tuple, p["vertices"])),
                slice_range=(p["k0"], p["k1"]), timestamp=event.timestamp,
            )
            apply_polygon(label_map, fill, sources)
        elif event.kind == "accept_predictions":
            for d in p.get("delta", []):
                plane = label_map.labels[d["k"]]
                ys = np.asarray(d["ys"], dtype=np.intp)
                xs = np.asarray(d["xs"], dtype=np.intp)
                plane[ys, xs] = np.asarray(d["classes"], dtype=np.uint8)
                sources[d["k"]][ys, xs] = SOURCE_MODEL
    return label_map, sources


@dataclass(frozen=True)
class AnalyticsReport:
    labeling_duration: dict  # stack (volume id) -> active seconds
    brush_strokes_per_class: dict  # class id -> stroke count
    percent_user_labeled: float  # user pixels / all labeled pixels, in %


def analytics(log: InteractionLog, label_map: LabelMap | None = None) -> AnalyticsReport:
    """Fold a session log into the per-user interaction statistics."""
    log.validate()
    head = log.events[0].payload
    stack = head.get("volume_id", "")

    start = log.events[0].timestamp
    end = log.events[-1].timestamp
    paused = 0.0
    pause_started = None
    for event in log.events:
        if event.kind == "pause":
            if pause_started is not None:
                raise MalformedLog("nested pause")
            pause_started = event.timestamp
        elif event.kind == "resume":
            if pause_started is None:
                raise MalformedLog("resume without pause")
            paused += event.timestamp - pause_started
            pause_started = None
    if pause_started is not None:
        paused += end - pause_started
    duration = (end - start) - paused

    num_classes = len(head.get("class_names", DEFAULT_CLASS_NAMES))
    strokes = {c: 0 for c in range(num_classes + 1)}
    for event in log.events:
        if event.kind == "stroke":
            cid = int(event.payload.get("class_id", 0))
            strokes[cid] = strokes.get(cid, 0) + 1

    replayed, sources = replay_log(log)
    labeled = replayed.labels != 0
    total = int(np.count_nonzero(labeled))
    user = int(np.count_nonzero(labeled & (sources == SOURCE_USER)))
    percent = 100.0 * user / total if total else 0.0
    if label_map is not None and label_map.labels.shape != replayed.labels.shape:
        raise DimensionMismatch("label map extents disagree with the log")

    return AnalyticsReport(
        labeling_duration={stack: duration},
        brush_strokes_per_class=strokes,
        percent_user_labeled=percent,
    )
