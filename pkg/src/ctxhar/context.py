"""Process context: step prior tables, the process model walk, step noise."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

ROW_SUM_TOLERANCE = 0.002


@dataclass(frozen=True)
class StepPriorTable:
    """Per-step class distributions ``P[s, c] = p_s(c)``; rows sum to one."""

    probs: np.ndarray
    step_names: tuple[str, ...]
    class_names: tuple[str, ...]

    @property
    def n_steps(self) -> int:
        return self.probs.shape[0]

    @property
    def n_classes(self) -> int:
        return self.probs.shape[1]

    def argmax_classes(self) -> list[str]:
        return [self.class_names[int(np.argmax(row))] for row in self.probs]

    def to_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["state", *self.class_names])
        for name, row in zip(self.step_names, self.probs):
            writer.writerow([name, *(repr(float(v)) for v in row)])
        return buf.getvalue()


def parse_step_priors(text: str, tolerance: float = ROW_SUM_TOLERANCE) -> StepPriorTable:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].lstrip().startswith("#")]
    if len(rows) < 2:
        raise ValueError("prior table needs a header row and at least one step row")
    header = [h.strip() for h in rows[0]]
    class_names = tuple(header[1:])
    if not class_names:
        raise ValueError("prior table header lists no classes")
    step_names = []
    values = []
    for i, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise ValueError(f"row {i}: expected {len(header)} fields, got {len(row)}")
        step_names.append(row[0].strip())
        try:
            vals = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise ValueError(f"row {i}: {exc}") from None
        if any(v < 0 or not np.isfinite(v) for v in vals):
            raise ValueError(f"row {i} ({row[0].strip()}): negative or non-finite entry")
        total = sum(vals)
        if abs(total - 1.0) > tolerance:
            raise ValueError(
                f"row {i} ({row[0].strip()}): sums to {total:.6f}, outside 1 +/- {tolerance}"
            )
        values.append(vals)
    probs = np.array(values, dtype=np.float64)
    probs = probs / probs.sum(axis=1, keepdims=True)
    return StepPriorTable(probs, tuple(step_names), class_names)


def load_step_priors(source=None, tolerance: float = ROW_SUM_TOLERANCE) -> StepPriorTable:
    """Read a prior table file; ``None`` loads the bundled logistics table."""
    if source is None:
        text = resources.files("ctxhar.data").joinpath("step_priors.csv").read_text()
    else:
        text = Path(source).read_text()
    return parse_step_priors(text, tolerance=tolerance)


@dataclass
class BpmModel:
    """Process model as a directed graph over steps with geometric dwell times."""

    step_names: tuple[str, ...]
    edges: dict[int, tuple[int, ...]]
    start: int = 0
    mean_dwell: float = 20.0

    def __post_init__(self):
        n = len(self.step_names)
        if n < 1:
            raise ValueError("process model needs at least one step")
        if not 0 <= self.start < n:
            raise ValueError(f"start step {self.start} out of range")
        if self.mean_dwell < 1:
            raise ValueError("mean dwell must be >= 1 segment")
        for src, dsts in self.edges.items():
            for d in (src, *dsts):
                if not 0 <= d < n:
                    raise ValueError(f"edge references unknown step {d}")
        reached = {self.start}
        frontier = [self.start]
        while frontier:
            s = frontier.pop()
            for d in self.edges.get(s, ()):
                if d not in reached:
                    reached.add(d)
                    frontier.append(d)
        unreachable = sorted(set(range(n)) - reached)
        if unreachable:
            names = [self.step_names[u] for u in unreachable]
            raise ValueError(f"steps {names} are unreachable from {self.step_names[self.start]}")
        self.edges = {s: tuple(sorted(d)) for s, d in self.edges.items()}

    @property
    def n_steps(self) -> int:
        return len(self.step_names)

    def walk(self, length: int, rng: np.random.Generator) -> np.ndarray:
        """Step label per segment for a recording of ``length`` segments."""
        out = np.empty(length, dtype=np.int64)
        pos = 0
        step = self.start
        p_leave = 1.0 / self.mean_dwell
        while pos < length:
            dwell = int(rng.geometric(p_leave))
            out[pos : pos + dwell] = step
            pos += dwell
            succ = self.edges.get(step, ())
            if succ:
                step = succ[int(rng.integers(len(succ)))]
        return out

    def to_text(self) -> str:
        lines = [f"start {self.step_names[self.start]}"]
        for s in sorted(self.edges):
            for d in self.edges[s]:
                lines.append(f"{self.step_names[s]} {self.step_names[d]}")
        return "\n".join(lines) + "\n"


def parse_bpm(text: str, step_names: Sequence[str] | None = None, mean_dwell: float = 20.0) -> BpmModel:
    start_name = None
    pairs = []
    seen: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'from to' or 'start <step>'")
        a, b = parts
        if a == "start":
            start_name = b
            names = [b]
        else:
            pairs.append((a, b))
            names = [a, b]
        for name in names:
            if name not in seen:
                seen.append(name)
    if start_name is None:
        raise ValueError("process model file has no 'start <step>' line")
    names = list(step_names) if step_names is not None else seen
    index = {n: i for i, n in enumerate(names)}
    for n in seen:
        if n not in index:
            raise ValueError(f"unknown step {n!r} in process model")
    edges: dict[int, set] = {}
    for a, b in pairs:
        edges.setdefault(index[a], set()).add(index[b])
    return BpmModel(tuple(names), {k: tuple(v) for k, v in edges.items()}, index[start_name], mean_dwell)


def load_bpm(source=None, step_names: Sequence[str] | None = None, mean_dwell: float = 20.0) -> BpmModel:
    if source is None:
        text = resources.files("ctxhar.data").joinpath("bpm_default.txt").read_text()
    else:
        text = Path(source).read_text()
    return parse_bpm(text, step_names=step_names, mean_dwell=mean_dwell)


def corrupt_steps(
    steps,
    p: float,
    seed,
    n_steps: int | None = None,
    return_mask: bool = False,
):
    """Replace each step, with probability ``p``, by a different uniform step.

    ``n_steps`` defaults to ``max(steps) + 1``.  With ``return_mask`` the
    boolean array of replaced positions is returned as well.
    """
    steps = np.asarray(steps, dtype=np.int64)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"corruption probability {p} outside [0, 1]")
    if n_steps is None:
        n_steps = int(steps.max()) + 1 if steps.size else 1
    if steps.size and (steps.min() < 0 or steps.max() >= n_steps):
        raise ValueError("step id out of range")
    if n_steps < 2 and p > 0:
        raise ValueError("cannot corrupt steps with a single-step process (|S| = 1)")
    rng = np.random.default_rng(seed)
    fired = rng.random(steps.size) < p
    if n_steps >= 2:
        offsets = rng.integers(1, n_steps, size=steps.size)
    else:
        offsets = np.zeros(steps.size, dtype=np.int64)
    noisy = np.where(fired, (steps + offsets) % n_steps, steps)
    if return_mask:
        return noisy, fired
    return noisy


def step_sequence_accuracy(truth, noisy) -> float:
    truth = np.asarray(truth)
    noisy = np.asarray(noisy)
    if truth.shape != noisy.shape:
        raise ValueError(f"length mismatch: {truth.shape} vs {noisy.shape}")
    if truth.size == 0:
        raise ValueError("empty step sequences")
    return float(np.mean(truth == noisy))
