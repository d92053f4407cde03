"""Labelled segments stored column-wise, plus the canonical dataset CSV."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np


class LabeledSegment(NamedTuple):
    recording: int
    frame: int
    step: int
    cls: int
    pi: np.ndarray
    attributes: np.ndarray | None
    window: np.ndarray | None = None


@dataclass
class SegmentTable:
    """All segments of a dataset, sorted by recording then frame."""

    recording: np.ndarray
    frame: np.ndarray
    step: np.ndarray
    cls: np.ndarray
    pi: np.ndarray  # (n, K)
    attributes: np.ndarray | None = None  # (n, K) ground truth bits
    windows: np.ndarray | None = None  # (n, T, W) raw mode only
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.pi.shape[0]
        for name in ("recording", "frame", "step", "cls"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            if arr.shape != (n,):
                raise ValueError(f"column {name} has shape {arr.shape}, expected ({n},)")
            setattr(self, name, arr)
        if self.attributes is not None and self.attributes.shape != self.pi.shape:
            raise ValueError("attribute and posterior columns differ in shape")

    def __len__(self) -> int:
        return self.pi.shape[0]

    @property
    def k(self) -> int:
        return self.pi.shape[1]

    def __iter__(self) -> Iterator[LabeledSegment]:
        for i in range(len(self)):
            yield LabeledSegment(
                int(self.recording[i]),
                int(self.frame[i]),
                int(self.step[i]),
                int(self.cls[i]),
                self.pi[i],
                None if self.attributes is None else self.attributes[i],
                None if self.windows is None else self.windows[i],
            )

    def subset(self, mask) -> "SegmentTable":
        mask = np.asarray(mask)
        return SegmentTable(
            self.recording[mask],
            self.frame[mask],
            self.step[mask],
            self.cls[mask],
            self.pi[mask],
            None if self.attributes is None else self.attributes[mask],
            None if self.windows is None else self.windows[mask],
            dict(self.meta),
        )

    def recording_ids(self) -> np.ndarray:
        return np.unique(self.recording)

    def recordings(self) -> list[np.ndarray]:
        """Row indices of each recording, in recording order."""
        return [np.flatnonzero(self.recording == r) for r in self.recording_ids()]

    def with_steps(self, steps) -> "SegmentTable":
        out = self.subset(slice(None))
        out.step = np.asarray(steps, dtype=np.int64).copy()
        return out

    def equals(self, other: "SegmentTable") -> bool:
        same = all(
            np.array_equal(getattr(self, c), getattr(other, c))
            for c in ("recording", "frame", "step", "cls", "pi")
        )
        if (self.attributes is None) != (other.attributes is None):
            return False
        if self.attributes is not None:
            same = same and np.array_equal(self.attributes, other.attributes)
        return same


def split_by_recording(table: SegmentTable, train_fraction: float = 0.7, seed: int = 0):
    """Random train/test split of whole recordings."""
    ids = table.recording_ids()
    if ids.size < 2:
        raise ValueError("need at least two recordings to split by recording")
    rng = np.random.default_rng(seed)
    order = rng.permutation(ids)
    n_train = min(max(1, int(round(train_fraction * ids.size))), ids.size - 1)
    train_ids = np.sort(order[:n_train])
    train_mask = np.isin(table.recording, train_ids)
    train, test = table.subset(train_mask), table.subset(~train_mask)
    overlap = np.intersect1d(train.recording_ids(), test.recording_ids())
    assert overlap.size == 0, "train and test share recordings"
    return train, test


def _fmt(x: float) -> str:
    return repr(float(x))


def table_to_csv(table: SegmentTable) -> str:
    k = table.k
    header = ["recording", "frame", "step", "class"]
    if table.attributes is not None:
        header += [f"a_{i + 1}" for i in range(k)]
    header += [f"pi_{i + 1}" for i in range(k)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for i in range(len(table)):
        row = [table.recording[i], table.frame[i], table.step[i], table.cls[i]]
        if table.attributes is not None:
            row += [int(b) for b in table.attributes[i]]
        row += [_fmt(v) for v in table.pi[i]]
        writer.writerow(row)
    return buf.getvalue()


def write_dataset(table: SegmentTable, path) -> None:
    Path(path).write_text(table_to_csv(table))


def parse_dataset(text: str, n_classes: int | None = None, n_steps: int | None = None) -> SegmentTable:
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ValueError("dataset file is empty") from None
    if header[:4] != ["recording", "frame", "step", "class"]:
        raise ValueError("line 1: header must start with recording,frame,step,class")
    a_cols = [i for i, h in enumerate(header) if h.startswith("a_")]
    p_cols = [i for i, h in enumerate(header) if h.startswith("pi_")]
    k = len(p_cols)
    if k == 0:
        raise ValueError("line 1: no pi_ columns")
    if [header[i] for i in p_cols] != [f"pi_{j + 1}" for j in range(k)]:
        raise ValueError("line 1: pi columns must be pi_1..pi_K in order")
    if a_cols and [header[i] for i in a_cols] != [f"a_{j + 1}" for j in range(k)]:
        raise ValueError("line 1: attribute columns must be a_1..a_K matching the pi columns")
    ints, pis, attrs = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValueError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            rec, frame, step, cls = (int(v) for v in row[:4])
            pi = [float(row[i]) for i in p_cols]
            a = [int(row[i]) for i in a_cols]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        if any(not (0.0 <= v <= 1.0) for v in pi):
            raise ValueError(f"line {lineno}: attribute posterior outside [0, 1]")
        if any(b not in (0, 1) for b in a):
            raise ValueError(f"line {lineno}: attribute values must be 0 or 1")
        if step < 0 or cls < 0 or (n_steps is not None and step >= n_steps) or (
            n_classes is not None and cls >= n_classes
        ):
            raise ValueError(f"line {lineno}: step or class id out of range")
        ints.append((rec, frame, step, cls))
        pis.append(pi)
        attrs.append(a)
    if not ints:
        raise ValueError("no segments in dataset")
    cols = np.array(ints, dtype=np.int64)
    return SegmentTable(
        cols[:, 0],
        cols[:, 1],
        cols[:, 2],
        cols[:, 3],
        np.array(pis, dtype=np.float64),
        np.array(attrs, dtype=np.int8) if a_cols else None,
    )


def ingest_dataset(path, n_classes: int | None = None, n_steps: int | None = None) -> SegmentTable:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    return parse_dataset(path.read_text(), n_classes=n_classes, n_steps=n_steps)
