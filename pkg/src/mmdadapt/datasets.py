"""Synthetic domain-shift data and CSV ingestion.

The generators draw source and target from the same class-conditional base
distributions, then rotate (first two dimensions), translate and renoise
the target copy — a desk-scale stand-in for feature drift between data
collection sites. Source and target use disjoint random substreams, so
changing one domain's sample count never perturbs the other's draws.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import CsvParseError, InputError
from .validation import as_features, as_labels

logger = logging.getLogger(__name__)

GAUSSIAN_MIXTURE = "gaussian-mixture"
TWO_ARCS = "two-arcs"

#: Distance of the two gaussian-mixture class centers from the origin.
_GAUSSIAN_CLASS_RADIUS = 2.0
#: The two-arcs pattern is shifted by this offset so it is centered at the
#: origin, making rotation a pure in-place shift.
_ARC_CENTER = (0.5, 0.25)


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix plus dense integer class labels."""

    features: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        feats = as_features(self.features, name="features", allow_empty=True)
        if len(self.class_names) < 2:
            raise InputError("a labeled dataset needs at least two classes")
        labels = as_labels(self.labels, len(self.class_names), n_rows=feats.shape[0])
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", tuple(str(c) for c in self.class_names))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True)
class ShiftSpec:
    """Recipe for a two-class synthetic covariate-shift pair.

    ``rotation_degrees`` rotates the target's first two dimensions about
    the origin; ``translation`` (length d, or empty for none) is added to
    every target row; ``class_imbalance`` r in (0, 1) shrinks class 1 to a
    fraction r of the released total, mimicking skewed cohorts.
    """

    generator: str = TWO_ARCS
    n_per_class: int = 500
    d: int = 2
    rotation_degrees: float = 0.0
    translation: tuple[float, ...] = ()
    noise_scale: float = 0.15
    class_imbalance: float | None = None

    def __post_init__(self):
        if self.generator not in (GAUSSIAN_MIXTURE, TWO_ARCS):
            raise InputError(f"unknown generator {self.generator!r}")
        if self.d < 2:
            raise InputError("d must be >= 2 (rotation acts on the first two dimensions)")
        if self.n_per_class < 1:
            raise InputError("n_per_class must be >= 1")
        if not (math.isfinite(self.noise_scale) and self.noise_scale > 0):
            raise InputError("noise_scale must be finite and > 0")
        trans = tuple(float(t) for t in self.translation)
        if trans and len(trans) != self.d:
            raise InputError(f"translation has {len(trans)} entries for d={self.d}")
        object.__setattr__(self, "translation", trans)
        if self.class_imbalance is not None:
            r = float(self.class_imbalance)
            if not (0.0 < r < 1.0):
                raise InputError("class_imbalance must lie strictly between 0 and 1")
            object.__setattr__(self, "class_imbalance", r)

    def class_counts(self) -> tuple[int, int]:
        if self.class_imbalance is None:
            return (self.n_per_class, self.n_per_class)
        r = self.class_imbalance
        minority = max(1, round(self.n_per_class * r / (1.0 - r)))
        return (self.n_per_class, minority)


def _draw_class(generator: str, label: int, count: int, d: int, noise: float, rng) -> np.ndarray:
    points = np.zeros((count, d))
    if generator == GAUSSIAN_MIXTURE:
        sign = 1.0 if label == 0 else -1.0
        points[:, 0] = sign * _GAUSSIAN_CLASS_RADIUS
    else:
        t = rng.uniform(0.0, np.pi, size=count)
        if label == 0:
            points[:, 0] = np.cos(t) - _ARC_CENTER[0]
            points[:, 1] = np.sin(t) - _ARC_CENTER[1]
        else:
            points[:, 0] = _ARC_CENTER[0] - np.cos(t)
            points[:, 1] = _ARC_CENTER[1] - np.sin(t)
    return points + noise * rng.standard_normal((count, d))


def _draw_domain(spec: ShiftSpec, rng) -> LabeledDataset:
    counts = spec.class_counts()
    blocks, labels = [], []
    for label, count in enumerate(counts):
        blocks.append(_draw_class(spec.generator, label, count, spec.d, spec.noise_scale, rng))
        labels.append(np.full(count, label, dtype=np.int64))
    return LabeledDataset(np.vstack(blocks), np.concatenate(labels), ("0", "1"))


def _apply_shift(spec: ShiftSpec, X: np.ndarray) -> np.ndarray:
    out = X.copy()
    theta = math.radians(spec.rotation_degrees)
    if theta != 0.0:
        rot = np.array(
            [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
        )
        out[:, :2] = out[:, :2] @ rot.T
    if spec.translation:
        out = out + np.asarray(spec.translation)
    return out


def generate(spec: ShiftSpec, seed: int) -> tuple[LabeledDataset, LabeledDataset]:
    """Draw a (source, target) pair; deterministic per seed.

    Target labels are returned for evaluation only; an adaptation training
    loop must never read them.
    """
    source_ss, target_ss = np.random.SeedSequence(seed).spawn(2)
    source = _draw_domain(spec, np.random.default_rng(source_ss))
    target_base = _draw_domain(spec, np.random.default_rng(target_ss))
    shifted = _apply_shift(spec, target_base.features)
    target = LabeledDataset(shifted, target_base.labels, target_base.class_names)
    return source, target


# ---------------------------------------------------------------------------
# CSV ingestion / emission
# ---------------------------------------------------------------------------


def _parse_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}: file is empty; a header row is required") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvParseError(
                    f"{path}: line {lineno} has {len(row)} fields, header has {len(header)}"
                )
            rows.append(row)
    return header, rows


def load_csv(path, label_column: str | None = None, ignore_columns: tuple[str, ...] = ()):
    """Load a feature CSV; with ``label_column``, a LabeledDataset.

    The first row must be a header. All non-label cells must be numeric.
    Labels are mapped to dense indices 0..C-1 in sorted order of the
    distinct raw values (numeric sort when every value parses as a number,
    lexicographic otherwise); the mapping is logged and kept as
    ``class_names``. Columns named in ``ignore_columns`` are dropped when
    present.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: no such file")
    header, rows = _parse_rows(path)
    skipped = {header.index(c) for c in ignore_columns if c in header}
    if label_column is not None:
        if label_column not in header:
            raise InputError(f"{path}: no column named {label_column!r} in header")
        label_idx = header.index(label_column)
        skipped.discard(label_idx)
        feature_idx = [i for i in range(len(header)) if i != label_idx and i not in skipped]
    else:
        label_idx = None
        feature_idx = [i for i in range(len(header)) if i not in skipped]
    if not feature_idx:
        raise InputError(f"{path}: no feature columns remain")

    features = np.empty((len(rows), len(feature_idx)))
    raw_labels = []
    for r, row in enumerate(rows):
        for c, idx in enumerate(feature_idx):
            try:
                features[r, c] = float(row[idx])
            except ValueError:
                raise CsvParseError(
                    f"{path}: line {r + 2}, column {header[idx]!r}: "
                    f"non-numeric value {row[idx]!r}"
                ) from None
        if label_idx is not None:
            raw_labels.append(row[label_idx])
    features = as_features(features, name=str(path), allow_empty=True)

    if label_idx is None:
        return features

    distinct = sorted(set(raw_labels), key=_label_sort_key(raw_labels))
    if len(distinct) < 2:
        raise InputError(f"{path}: need at least two distinct label values")
    mapping = {value: i for i, value in enumerate(distinct)}
    logger.info("label mapping for %s: %s", path, mapping)
    labels = np.array([mapping[v] for v in raw_labels], dtype=np.int64)
    return LabeledDataset(features, labels, tuple(distinct))


def _label_sort_key(raw_labels):
    try:
        for v in set(raw_labels):
            float(v)
    except ValueError:
        return lambda v: v
    return lambda v: float(v)


def save_csv(path, features, labels=None, class_names=None) -> None:
    """Write features (and optionally a trailing label column) as CSV.

    Floats are written with ``repr`` so a round trip reproduces the exact
    values; header columns are f1..fd plus ``label`` when labels are given.
    """
    X = as_features(features, name="features", allow_empty=True)
    names = None
    if labels is not None:
        labels = as_labels(labels, len(class_names) if class_names else int(np.max(labels)) + 1)
        names = tuple(str(c) for c in class_names) if class_names else None
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = [f"f{i + 1}" for i in range(X.shape[1])]
        if labels is not None:
            header.append("label")
        writer.writerow(header)
        for i in range(X.shape[0]):
            row = [repr(float(v)) for v in X[i]]
            if labels is not None:
                value = names[labels[i]] if names else str(int(labels[i]))
                row.append(value)
            writer.writerow(row)
