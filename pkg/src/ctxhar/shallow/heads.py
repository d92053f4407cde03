"""Uniform wrapper around every attribute-to-class head, with persistence.

Heads: ``gdap``, ``nn``, ``dap`` (probabilistic, context-free) and ``qda``,
``hmm``, ``rf`` (classification-based, optionally step-aware).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..attributes import AttributeClassMap, ClassRepresentatives, gdap_scores, nn_classify_batch
from ..segments import SegmentTable
from .features import encode_batch
from .forest import ForestModel, rf_fit, rf_predict
from .hmm import HmmModel, hmm_decode, hmm_fit
from .qda import GaussianClassModel, GaussianObservations, qda_fit, qda_predict

HEAD_KINDS = ("gdap", "nn", "dap", "qda", "hmm", "rf")
CONTEXT_KINDS = ("qda", "hmm", "rf")
FORMAT_NAME = "ctxhar-model"
FORMAT_VERSION = 1


@dataclass
class ClassifierHead:
    kind: str
    model: Any
    use_steps: bool
    k: int
    n_classes: int
    n_steps: int
    options: dict = field(default_factory=dict)
    class_names: tuple = ()
    step_names: tuple = ()

    def predict(self, table: SegmentTable, steps=None) -> np.ndarray:
        """Predicted class per segment; ``steps`` overrides ``table.step``."""
        if table.k != self.k:
            raise ValueError(f"dataset has K={table.k}, head expects K={self.k}")
        steps = table.step if steps is None else np.asarray(steps, dtype=np.int64)
        if self.kind == "gdap":
            return np.argmax(gdap_scores(table.pi, self.model), axis=1)
        if self.kind == "nn":
            return nn_classify_batch(table.pi, self.model, norm=self.options.get("nn_norm", "l2"))
        if self.kind == "dap":
            with np.errstate(divide="ignore"):
                log_on, log_off = np.log(table.pi), np.log1p(-table.pi)
            scores = np.stack(
                [np.where(v == 1, log_on, log_off).sum(axis=1) for v in self.model.vectors], axis=1
            )
            return np.argmax(scores, axis=1)
        if self.kind == "qda":
            return qda_predict(self.model, table.pi, steps if self.use_steps else None)[0]
        if self.kind == "rf":
            X = encode_batch(
                table.pi, steps if self.use_steps else None, self.n_steps,
                self.options.get("step_encoding", "onehot"),
            )
            return rf_predict(self.model, X)[0]
        if self.kind == "hmm":
            out = np.empty(len(table), dtype=np.int64)
            mode = self.options.get("decode", "viterbi")
            for rows in table.recordings():
                s = steps[rows] if self.use_steps else None
                out[rows] = hmm_decode(self.model, table.pi[rows], s, mode=mode)
            return out
        raise ValueError(f"unknown head kind {self.kind!r}")


def fit_head(
    kind: str,
    train: SegmentTable,
    use_steps: bool = False,
    n_classes: int | None = None,
    n_steps: int | None = None,
    gmap: AttributeClassMap | None = None,
    reps: ClassRepresentatives | None = None,
    options: dict | None = None,
    class_names=(),
    step_names=(),
) -> ClassifierHead:
    options = dict(options or {})
    if kind not in HEAD_KINDS:
        raise ValueError(f"unknown head kind {kind!r}; choose from {HEAD_KINDS}")
    if use_steps and kind not in CONTEXT_KINDS:
        raise ValueError(f"{kind} cannot use process-step information")
    n_classes = int(train.cls.max()) + 1 if n_classes is None else n_classes
    n_steps = int(train.step.max()) + 1 if n_steps is None else n_steps
    if kind in ("gdap", "nn"):
        if gmap is None:
            if train.attributes is None:
                raise ValueError("estimating g needs ground-truth attribute columns")
            gmap = AttributeClassMap.estimate(train.attributes, train.cls, n_classes)
        model: Any = gmap
    elif kind == "dap":
        if reps is None:
            raise ValueError("DAP needs class representatives")
        model = reps
    elif kind == "qda":
        model = qda_fit(train.pi, train.cls, train.step if use_steps else None, n_classes, n_steps)
    elif kind == "hmm":
        seqs = [(train.pi[r], train.cls[r], train.step[r]) for r in train.recordings()]
        model = hmm_fit(seqs, use_steps, n_classes, n_steps,
                        alpha=float(options.get("transition_alpha", 0.01)))
    else:
        encoding = options.setdefault("step_encoding", "onehot")
        X = encode_batch(train.pi, train.step if use_steps else None, n_steps, encoding)
        model = rf_fit(
            X, train.cls,
            trees=int(options.get("trees", 500)),
            seed=int(options.get("seed", 0)),
            n_classes=n_classes,
            n_jobs=int(options.get("n_jobs", 1)),
        )
    return ClassifierHead(kind, model, use_steps, train.k, n_classes, n_steps, options,
                          tuple(class_names), tuple(step_names))


def _model_arrays(head: ClassifierHead) -> tuple[dict, dict]:
    m = head.model
    if head.kind in ("gdap", "nn"):
        return {"gmap": m.to_text()}, {}
    if head.kind == "dap":
        return {}, {"reps": m.vectors}
    if head.kind == "qda":
        arrays = {"means": m.obs.means, "covs": m.obs.covs, "priors": m.priors}
        if m.step_priors is not None:
            arrays["step_priors"] = m.step_priors
        return {}, arrays
    if head.kind == "hmm":
        return {}, {"means": m.obs.means, "covs": m.obs.covs,
                    "transitions": m.transitions, "initial": m.initial}
    arrays = {n: getattr(m, n) for n in ("feature", "threshold", "left", "right", "counts", "offsets")}
    return {"width": m.width, "mtry": m.mtry, "seed": m.seed}, arrays


def save_head(head: ClassifierHead, path) -> None:
    extra, arrays = _model_arrays(head)
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": head.kind,
        "use_steps": head.use_steps,
        "k": head.k,
        "n_classes": head.n_classes,
        "n_steps": head.n_steps,
        "class_names": list(head.class_names),
        "step_names": list(head.step_names),
        "options": head.options,
        "model": extra,
    }
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)), **arrays)


def load_head(path) -> ClassifierHead:
    with np.load(Path(path), allow_pickle=False) as data:
        header = json.loads(str(data["header"][()]))
        arrays = {k: data[k] for k in data.files if k != "header"}
    if header.get("format") != FORMAT_NAME:
        raise ValueError(f"{path} is not a {FORMAT_NAME} file")
    if header.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {header.get('version')}")
    kind = header["kind"]
    extra = header["model"]
    if kind in ("gdap", "nn"):
        model: Any = AttributeClassMap.from_text(extra["gmap"], n_classes=header["n_classes"])
    elif kind == "dap":
        model = ClassRepresentatives({c: v for c, v in enumerate(arrays["reps"])})
    elif kind == "qda":
        model = GaussianClassModel(
            GaussianObservations(arrays["means"], arrays["covs"]),
            arrays["priors"],
            arrays.get("step_priors"),
        )
    elif kind == "hmm":
        model = HmmModel(
            GaussianObservations(arrays["means"], arrays["covs"]),
            arrays["transitions"], arrays["initial"], header["use_steps"],
        )
    elif kind == "rf":
        model = ForestModel(
            **{n: arrays[n] for n in ("feature", "threshold", "left", "right", "counts", "offsets")},
            n_classes=header["n_classes"], width=extra["width"], mtry=extra["mtry"], seed=extra["seed"],
        )
    else:
        raise ValueError(f"unknown head kind {kind!r} in {path}")
    return ClassifierHead(kind, model, header["use_steps"], header["k"], header["n_classes"],
                          header["n_steps"], header["options"],
                          tuple(header["class_names"]), tuple(header["step_names"]))
