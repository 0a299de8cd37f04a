"""Pixelwise reader-agreement statistics.

Agreement between two label maps is always computed on the pixels both
readers actually labeled (class id != 0). Cohen's kappa corrects observed
agreement for chance:

                p_o - p_e
    kappa  =  -------------
                1  - p_e

with p_o the diagonal fraction and p_e the product of the marginals. The
Jaccard index of a class is intersection over union of the two readers'
pixel sets for that class. F1 balances precision and recall,
F1 = 2 * precision * recall / (precision + recall).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import DimensionMismatch, EmptyMatrix, EmptyOverlap, TooFewValues
from .volume import LabelMap


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (C, C) int64, rows = reader a, cols = reader b
    class_names: tuple[str, ...]

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise DimensionMismatch(f"confusion matrix must be square, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _as_labels(m) -> np.ndarray:
    if isinstance(m, LabelMap):
        return m.labels
    return np.asarray(m)


def confusion(a, b, pixel_filter: np.ndarray | None = None,
              num_classes: int = 3,
              class_names: Sequence[str] | None = None) -> ConfusionMatrix:
    """Count class co-occurrences over the filtered pixels.

    The default filter keeps pixels labeled (!= 0) by both readers.
    """
    la, lb = _as_labels(a), _as_labels(b)
    if la.shape != lb.shape:
        raise DimensionMismatch(f"{la.shape} vs {lb.shape}")
    if isinstance(a, LabelMap):
        num_classes = a.num_classes
        class_names = a.class_names
    if class_names is None:
        class_names = tuple(f"class {i}" for i in range(1, num_classes + 1))
    if pixel_filter is None:
        pixel_filter = (la != 0) & (lb != 0)
    va = la[pixel_filter].astype(np.int64)
    vb = lb[pixel_filter].astype(np.int64)
    if va.size == 0:
        raise EmptyOverlap("no pixels labeled by both readers")
    if (va < 1).any() or (vb < 1).any() or (va > num_classes).any() or (vb > num_classes).any():
        raise ValueError("filtered pixels must carry class ids in 1..C")
    flat = (va - 1) * num_classes + (vb - 1)
    counts = np.bincount(flat, minlength=num_classes * num_classes)
    return ConfusionMatrix(counts.reshape(num_classes, num_classes), tuple(class_names))


def cohens_kappa(m: ConfusionMatrix | np.ndarray) -> float:
    """Chance-corrected agreement from a confusion matrix.

    Defined as 1.0 for the degenerate perfectly-diagonal single-class
    case where p_e would be 1.
    """
    counts = m.counts if isinstance(m, ConfusionMatrix) else np.asarray(m, dtype=np.int64)
    total = counts.sum()
    if total <= 0:
        raise EmptyMatrix("confusion matrix has no counts")
    p_o = counts.trace() / total
    p_e = float(counts.sum(axis=1) @ counts.sum(axis=0)) / (total * total)
    if p_e >= 1.0:
        # both marginals concentrated on one class; diagonal by construction
        return 1.0
    return float((p_o - p_e) / (1.0 - p_e))


def two_class_restrict(a, b) -> tuple[np.ndarray, np.ndarray]:
    """Keep only the pixels both readers put in classes {1, 2}.

    Drops every pixel either reader marked non-pulmonary (class 3) or
    left unlabeled. Returns flat arrays of the surviving labels.
    """
    la, lb = _as_labels(a), _as_labels(b)
    if la.shape != lb.shape:
        raise DimensionMismatch(f"{la.shape} vs {lb.shape}")
    keep = np.isin(la, (1, 2)) & np.isin(lb, (1, 2))
    if not keep.any():
        raise EmptyOverlap("no pixels with both labels in {1, 2}")
    return la[keep], lb[keep]


def jaccard(a, b, class_id: int) -> float:
    """Intersection over union of one class's pixel sets; 1.0 if both empty."""
    la, lb = _as_labels(a), _as_labels(b)
    if la.shape != lb.shape:
        raise DimensionMismatch(f"{la.shape} vs {lb.shape}")
    in_a = la == class_id
    in_b = lb == class_id
    union = int(np.count_nonzero(in_a | in_b))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(in_a & in_b)) / union


@dataclass(frozen=True)
class ClassScore:
    f1: float
    precision: float
    recall: float
    accuracy: float  # overall, over truth-labeled pixels


def f1_per_class(truth, pred, class_id: int) -> ClassScore:
    """F1 / precision / recall for one class plus overall accuracy.

    All counts are restricted to pixels the truth actually labels
    (truth != 0); F1 is 0 by convention when precision + recall == 0.
    """
    lt, lp = _as_labels(truth), _as_labels(pred)
    if lt.shape != lp.shape:
        raise DimensionMismatch(f"{lt.shape} vs {lp.shape}")
    scored = lt != 0
    t = lt[scored]
    p = lp[scored]
    tp = int(np.count_nonzero((t == class_id) & (p == class_id)))
    fp = int(np.count_nonzero((t != class_id) & (p == class_id)))
    fn = int(np.count_nonzero((t == class_id) & (p != class_id)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    accuracy = float(np.count_nonzero(t == p)) / t.size if t.size else 0.0
    return ClassScore(f1=f1, precision=precision, recall=recall, accuracy=accuracy)


def consensus_mode(maps: Sequence[LabelMap | np.ndarray]) -> LabelMap:
    """Per-pixel most frequent nonzero label across readers.

    Ties break toward the smallest class id; a pixel stays unlabeled only
    if every reader left it unlabeled.
    """
    if len(maps) < 2:
        raise TooFewValues("consensus needs at least two label maps")
    arrays = [_as_labels(m) for m in maps]
    shape = arrays[0].shape
    if any(a.shape != shape for a in arrays):
        raise DimensionMismatch("label maps disagree on extents")
    num_classes = max(
        (m.num_classes for m in maps if isinstance(m, LabelMap)),
        default=int(max(a.max(initial=0) for a in arrays)),
    )
    num_classes = max(num_classes, 1)
    votes = np.zeros((num_classes,) + shape, dtype=np.int32)
    for arr in arrays:
        for c in range(1, num_classes + 1):
            votes[c - 1] += arr == c
    # argmax returns the first (smallest class id) maximum
    winner = votes.argmax(axis=0).astype(np.uint8) + 1
    winner[votes.sum(axis=0) == 0] = 0
    class_names = next(
        (m.class_names for m in maps if isinstance(m, LabelMap)),
        tuple(f"class {i}" for i in range(1, num_classes + 1)),
    )
    return LabelMap(winner, class_names)


@dataclass(frozen=True)
class Aggregate:
    mean: float
    ci_low: float
    ci_high: float
    minimum: float
    maximum: float
    n: int

    def fmt(self, digits: int = 2) -> str:
        """Render as ``mean (95%CI)[Range]``."""
        d = digits
        return (
            f"{self.mean:.{d}f} ({self.ci_low:.{d}f}-{self.ci_high:.{d}f})"
            f"[{self.minimum:.{d}f}-{self.maximum:.{d}f}]"
        )


def aggregate(values: Iterable[float]) -> Aggregate:
    """Mean, 95% t-interval (mean +/- t_{0.975,n-1} s/sqrt(n)) and range."""
    vals = np.asarray(list(values), dtype=np.float64)
    n = vals.size
    if n < 2:
        raise TooFewValues(f"need at least two values, got {n}")
    mean = float(vals.mean())
    s = float(vals.std(ddof=1))
    half = float(stats.t.ppf(0.975, n - 1)) * s / np.sqrt(n)
    return Aggregate(
        mean=mean,
        ci_low=mean - half,
        ci_high=mean + half,
        minimum=float(vals.min()),
        maximum=float(vals.max()),
        n=n,
    )


@dataclass
class AgreementReport:
    """Pairwise metric values together with their cross-pair aggregates.

    ``rows`` hold one record per (pair, metric, class); aggregates are
    computed lazily per (metric, class) over all pairs.
    """

    rows: list[dict] = field(default_factory=list)

    def add(self, pair: str, metric: str, value: float, class_name: str = "") -> None:
        self.rows.append(
            {"pair": pair, "metric": metric, "class": class_name, "value": float(value)}
        )

    def metrics(self) -> list[tuple[str, str]]:
        seen: list[tuple[str, str]] = []
        for row in self.rows:
            key = (row["metric"], row["class"])
            if key not in seen:
                seen.append(key)
        return seen

    def values_for(self, metric: str, class_name: str = "") -> list[float]:
        return [
            r["value"]
            for r in self.rows
            if r["metric"] == metric and r["class"] == class_name
        ]

    def aggregates(self) -> list[dict]:
        out = []
        for metric, class_name in self.metrics():
            vals = self.values_for(metric, class_name)
            if len(vals) < 2:
                continue
            agg = aggregate(vals)
            out.append(
                {
                    "metric": metric,
                    "class": class_name,
                    "mean": agg.mean,
                    "ci_low": agg.ci_low,
                    "ci_high": agg.ci_high,
                    "min": agg.minimum,
                    "max": agg.maximum,
                    "n": agg.n,
                }
            )
        return out

    COLUMNS = ("pair", "metric", "class", "value", "ci_low", "ci_high", "min", "max")

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=self.COLUMNS)
            writer.writeheader()
            for row in self.rows:
                writer.writerow({**{c: "" for c in self.COLUMNS}, **row})
            for agg in self.aggregates():
                writer.writerow(
                    {
                        "pair": "aggregate",
                        "metric": agg["metric"],
                        "class": agg["class"],
                        "value": agg["mean"],
                        "ci_low": agg["ci_low"],
                        "ci_high": agg["ci_high"],
                        "min": agg["min"],
                        "max": agg["max"],
                    }
                )

    def to_json(self, path) -> None:
        Path(path).write_text(
            json.dumps({"pairs": self.rows, "aggregates": self.aggregates()}, indent=2)
            + "\n"
        )


def pairwise_report(named_maps: Sequence[tuple[str, LabelMap]], mode: str = "3-class") -> AgreementReport:
    """Kappa and per-class Jaccard for every reader pair.

    ``mode`` selects the three-class analysis or the two-class variant
    that drops non-pulmonary pixels before computing kappa.
    """
    if len(named_maps) < 2:
        raise TooFewValues("need at least two readers")
    if mode not in ("2-class", "3-class"):
        raise ValueError(f"unknown mode {mode!r}")
    report = AgreementReport()
    for i in range(len(named_maps)):
        for j in range(i + 1, len(named_maps)):
            name_a, map_a = named_maps[i]
            name_b, map_b = named_maps[j]
            pair = f"{name_a}|{name_b}"
            if mode == "3-class":
                kappa = cohens_kappa(confusion(map_a, map_b))
                report.add(pair, "kappa_3class", kappa)
                for c, cname in enumerate(map_a.class_names, start=1):
                    report.add(pair, "jaccard", jaccard(map_a, map_b, c), cname)
            else:
                ra, rb = two_class_restrict(map_a, map_b)
                m = confusion(ra, rb, pixel_filter=np.ones(ra.shape, dtype=bool), num_classes=2)
                report.add(pair, "kappa_2class", cohens_kappa(m))
    return report
