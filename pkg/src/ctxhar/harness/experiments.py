"""Model comparison and step-noise sweeps over a recording-level split."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..attributes import AttributeClassMap
from ..context import corrupt_steps
from ..metrics import accuracy, macro_f1
from ..segments import SegmentTable, ingest_dataset, split_by_recording
from ..shallow.heads import ClassifierHead, fit_head
from ..simgen import ScenarioSpec, generate, load_scenario
from .config import ExperimentConfig, sweep_seed

RAW_HEADER = ("model", "context", "p", "repetition", "seed", "accuracy", "macro_f1")
SUMMARY_HEADER = ("model", "context", "p", "n", "mean_accuracy", "std_accuracy", "mean_f1", "std_f1")


@dataclass
class Experiment:
    """A dataset instance for one seed, already split."""

    train: SegmentTable
    test: SegmentTable
    n_classes: int
    n_steps: int
    gmap: AttributeClassMap | None
    class_names: tuple[str, ...] = ()
    step_names: tuple[str, ...] = ()


def _scenario(cfg: ExperimentConfig) -> ScenarioSpec:
    path = cfg.dataset.partition(":")[2] or None
    return load_scenario(path)


def prepare(cfg: ExperimentConfig, seed: int) -> Experiment:
    """Generate or load the dataset for ``seed`` and split it by recording."""
    if cfg.dataset.startswith("csv:"):
        data = ingest_dataset(cfg.dataset[4:])
        n_classes, n_steps = int(data.cls.max()) + 1, int(data.step.max()) + 1
        names: tuple = ((), ())
        design = None
    else:
        spec = _scenario(cfg).with_seed(seed)
        data = generate(spec)
        n_classes, n_steps = spec.priors.n_classes, spec.priors.n_steps
        names = (spec.priors.class_names, spec.priors.step_names)
        design = spec.class_map()
    train, test = split_by_recording(data, cfg.train_fraction, seed)
    gmap = None
    if any(m in ("gdap", "nn") for m in cfg.models):
        if cfg.gmap == "design" and design is not None:
            gmap = design
        elif cfg.gmap in ("design", "estimate"):
            if train.attributes is None:
                raise ValueError("dataset has no attribute columns; pass a g map file via 'gmap'")
            gmap = AttributeClassMap.estimate(train.attributes, train.cls, n_classes)
        else:
            gmap = AttributeClassMap.load(cfg.gmap, n_classes=n_classes)
    return Experiment(train, test, n_classes, n_steps, gmap, *names)


def fit_model(cfg: ExperimentConfig, exp: Experiment, kind: str, use_steps: bool, seed: int) -> ClassifierHead:
    return fit_head(kind, exp.train, use_steps, exp.n_classes, exp.n_steps, gmap=exp.gmap,
                    options=cfg.head_options(kind, seed),
                    class_names=exp.class_names, step_names=exp.step_names)


def _score(head: ClassifierHead, exp: Experiment, steps=None) -> tuple[float, float]:
    pred = head.predict(exp.test, steps=steps)
    return accuracy(exp.test.cls, pred), macro_f1(exp.test.cls, pred, exp.n_classes)


class ResultsTable:
    """Raw rows per (model, context, p, repetition) plus recomputable aggregates.

    ``context`` is ``none`` (no step input), ``true`` (ground-truth steps) or
    ``noisy`` (corrupted steps at level ``p``).
    """

    def __init__(self, rows=None):
        self.rows: list[dict] = list(rows or [])

    def add(self, model: str, context: str, p, repetition: int, seed: int, acc: float, f1: float):
        self.rows.append({"model": model, "context": context, "p": None if p is None else float(p),
                          "repetition": int(repetition), "seed": int(seed),
                          "accuracy": float(acc), "macro_f1": float(f1)})

    def __len__(self):
        return len(self.rows)

    def select(self, model=None, context=None, p=...) -> list[dict]:
        out = self.rows
        if model is not None:
            out = [r for r in out if r["model"] == model]
        if context is not None:
            out = [r for r in out if r["context"] == context]
        if p is not ...:
            out = [r for r in out if (r["p"] is None if p is None else r["p"] is not None and np.isclose(r["p"], p))]
        return out

    def aggregate(self) -> list[dict]:
        """Mean and sample standard deviation (0 for a single row) per group, in first-seen order."""
        groups: dict[tuple, list[dict]] = {}
        for r in self.rows:
            groups.setdefault((r["model"], r["context"], r["p"]), []).append(r)
        out = []
        for (model, context, p), rows in groups.items():
            acc = np.array([r["accuracy"] for r in rows])
            f1 = np.array([r["macro_f1"] for r in rows])

            def sd(v):
                return float(v.std(ddof=1)) if v.size > 1 else 0.0

            out.append({"model": model, "context": context, "p": p, "n": len(rows),
                        "mean_accuracy": float(acc.mean()), "std_accuracy": sd(acc),
                        "mean_f1": float(f1.mean()), "std_f1": sd(f1)})
        return out

    def mean_f1(self, model: str, context: str, p=...) -> float:
        rows = self.select(model, context, p)
        if not rows:
            raise KeyError(f"no rows for {model}/{context}/{p}")
        return float(np.mean([r["macro_f1"] for r in rows]))

    @staticmethod
    def _fmt(v) -> str:
        if v is None:
            return ""
        if isinstance(v, float):
            return repr(v)
        return str(v)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RAW_HEADER)
        for r in self.rows:
            w.writerow([self._fmt(r[k]) for k in RAW_HEADER])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in self.aggregate():
            w.writerow([self._fmt(r[k]) for k in SUMMARY_HEADER])
        return buf.getvalue()

    def sweep_plot(self) -> str:
        """Plot-ready ``p,mean_f1,std_f1,model`` lines for the noisy-step rows."""
        lines = ["p,mean_f1,std_f1,model"]
        for r in self.aggregate():
            if r["context"] == "noisy":
                lines.append(f"{r['p']!r},{r['mean_f1']!r},{r['std_f1']!r},{r['model']}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "ResultsTable":
        rd = csv.reader(io.StringIO(text))
        header = tuple(next(rd))
        if header != RAW_HEADER:
            raise ValueError(f"unexpected results header {header}")
        table = cls()
        for row in rd:
            rec = dict(zip(header, row))
            table.add(rec["model"], rec["context"], float(rec["p"]) if rec["p"] else None,
                      int(rec["repetition"]), int(rec["seed"]), float(rec["accuracy"]), float(rec["macro_f1"]))
        return table


def run_comparison(cfg: ExperimentConfig) -> ResultsTable:
    """Every model without step input, and context-aware ones also with true steps, per seed."""
    table = ResultsTable()
    for rep, seed in enumerate(cfg.seeds):
        exp = prepare(cfg, seed)
        for kind in cfg.models:
            modes = [False] + ([True] if kind in cfg.context else [])
            for use_steps in modes:
                head = fit_model(cfg, exp, kind, use_steps, seed)
                acc, f1 = _score(head, exp)
                table.add(kind, "true" if use_steps else "none", None, rep, seed, acc, f1)
    return table


def run_noise_sweep(cfg: ExperimentConfig) -> ResultsTable:
    """Corrupt the test-step sequence at each p and repetition; models trained on true steps.

    Uses the first configured seed.  With ``refit`` the step-aware heads are
    re-trained per grid point with the point's seed (only RF consumes it).
    """
    sw = cfg.sweep
    if not {"qda", "rf"} <= set(sw.models):
        raise ValueError("the noise sweep needs at least qda and rf")
    seed = cfg.base_seed
    exp = prepare(replace(cfg, models=tuple(sw.models)), seed)
    table = ResultsTable()
    heads = {}
    for kind in sw.models:
        acc, f1 = _score(fit_model(cfg, exp, kind, False, seed), exp)
        table.add(kind, "none", None, 0, seed, acc, f1)
        heads[kind] = fit_model(cfg, exp, kind, True, seed)
    for p in sw.p_values:
        for rep in range(sw.repetitions):
            s = sweep_seed(seed, p, rep)
            noisy = corrupt_steps(exp.test.step, p, s, exp.n_steps)
            for kind in sw.models:
                head = fit_model(cfg, exp, kind, True, s) if sw.refit else heads[kind]
                acc, f1 = _score(head, exp, steps=noisy)
                table.add(kind, "noisy", p, rep, s, acc, f1)
    return table


def write_results(table: ResultsTable, out_dir, manifest: str, sweep: bool = False) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    files = {"results.csv": table.to_csv(), "summary.csv": table.summary_csv(), "manifest.txt": manifest}
    if sweep:
        files["sweep.dat"] = table.sweep_plot()
    for name, text in files.items():
        path = out / name
        path.write_text(text)
        written.append(path)
    return written
