"""Experiment configuration: an INI file with ``[experiment]``, ``[sweep]`` and
``[attrnet]`` sections.  ``ExperimentConfig.to_text`` writes a file that
parses back to an equal config, which is what manifests rely on."""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..shallow.heads import CONTEXT_KINDS, HEAD_KINDS


def _grid(start: float, stop: float, step: float) -> tuple[float, ...]:
    n = int(round((stop - start) / step))
    return tuple(float(round(start + i * step, 10)) for i in range(n + 1))


DEFAULT_P_VALUES = _grid(0.0, 0.5, 0.05)


@dataclass(frozen=True)
class SweepConfig:
    p_values: tuple[float, ...] = DEFAULT_P_VALUES
    repetitions: int = 10
    models: tuple[str, ...] = ("qda", "hmm", "rf")
    refit: bool = False

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.p_values:
            raise ValueError("sweep needs at least one p value")
        for p in self.p_values:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"noise level {p} outside [0, 1]")
        bad = [m for m in self.models if m not in CONTEXT_KINDS]
        if bad:
            raise ValueError(f"sweep models must be context-aware ({CONTEXT_KINDS}); got {bad}")


@dataclass(frozen=True)
class AttrnetSection:
    epochs: int = 30
    learning_rate: float = 0.01
    batch_size: int = 16
    filters: int = 16
    hidden: int = 32
    optimizer: str = "momentum"
    window: int = 64
    channels: int = 6


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "synthetic"  # "synthetic", "synthetic:<scenario.cfg>" or "csv:<path>"
    models: tuple[str, ...] = ("gdap", "nn", "qda", "hmm", "rf")
    context: tuple[str, ...] = CONTEXT_KINDS
    seeds: tuple[int, ...] = (0,)
    train_fraction: float = 0.7
    trees: int = 500
    n_jobs: int = 1
    step_encoding: str = "onehot"
    hmm_decode: str = "viterbi"
    gmap: str = "design"  # "design" (scenario map), "estimate" or a map file
    sweep: SweepConfig = field(default_factory=SweepConfig)
    attrnet: AttrnetSection = field(default_factory=AttrnetSection)

    def __post_init__(self):
        bad = [m for m in self.models if m not in HEAD_KINDS]
        if bad:
            raise ValueError(f"unknown models {bad}; choose from {HEAD_KINDS}")
        bad = [m for m in self.context if m not in CONTEXT_KINDS]
        if bad:
            raise ValueError(f"models {bad} cannot use step information")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.trees < 1 or self.n_jobs < 1:
            raise ValueError("trees and n_jobs must be positive")
        if self.step_encoding not in ("onehot", "integer"):
            raise ValueError(f"unknown step encoding {self.step_encoding!r}")
        if not (self.dataset == "synthetic" or self.dataset.startswith(("synthetic:", "csv:"))):
            raise ValueError(f"dataset must be 'synthetic', 'synthetic:<file>' or 'csv:<file>', got {self.dataset!r}")

    @property
    def base_seed(self) -> int:
        return self.seeds[0]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Replace the seed list by a single seed (the CLI ``--seed`` flag)."""
        return replace(self, seeds=(int(seed),))

    def head_options(self, kind: str, seed: int) -> dict:
        if kind == "rf":
            return {"trees": self.trees, "seed": seed, "n_jobs": self.n_jobs,
                    "step_encoding": self.step_encoding}
        if kind == "hmm":
            return {"decode": self.hmm_decode}
        return {}

    def to_text(self) -> str:
        def fmt(v):
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, tuple):
                return " ".join(fmt(x) for x in v)
            if isinstance(v, float):
                return repr(v)
            return str(v)

        lines = ["[experiment]"]
        for f in fields(self):
            if f.name in ("sweep", "attrnet"):
                continue
            lines.append(f"{f.name} = {fmt(getattr(self, f.name))}")
        for name in ("sweep", "attrnet"):
            lines.append("")
            lines.append(f"[{name}]")
            for k, v in asdict(getattr(self, name)).items():
                lines.append(f"{k} = {fmt(tuple(v) if isinstance(v, list) else v)}")
        return "\n".join(lines) + "\n"


def _split(value: str) -> tuple[str, ...]:
    return tuple(v for v in value.replace(",", " ").split() if v)


def _seeds(value: str) -> tuple[int, ...]:
    out: list[int] = []
    for tok in _split(value):
        if ".." in tok:
            lo, hi = tok.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(tok))
    return tuple(out)


def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


_EXPERIMENT_KEYS = {
    "dataset": str, "models": _split, "context": _split, "seeds": _seeds,
    "train_fraction": float, "trees": int, "n_jobs": int, "step_encoding": str,
    "hmm_decode": str, "gmap": str, "seed": _seeds,
}


def parse_experiment(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.read_string(text)
    unknown = set(cp.sections()) - {"experiment", "sweep", "attrnet"}
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    kwargs: dict = {}
    if cp.has_section("experiment"):
        for key, value in cp["experiment"].items():
            if key not in _EXPERIMENT_KEYS:
                raise ValueError(f"unknown experiment key {key!r}")
            kwargs["seeds" if key == "seed" else key] = _EXPERIMENT_KEYS[key](value)
    if cp.has_section("sweep"):
        sw = cp["sweep"]
        skw: dict = {}
        for key, value in sw.items():
            if key == "p_values":
                skw[key] = tuple(float(v) for v in _split(value))
            elif key == "p_range":
                start, stop, step = (float(v) for v in _split(value))
                skw["p_values"] = _grid(start, stop, step)
            elif key == "repetitions":
                skw[key] = int(value)
            elif key == "models":
                skw[key] = _split(value)
            elif key == "refit":
                skw[key] = _bool(value)
            else:
                raise ValueError(f"unknown sweep key {key!r}")
        kwargs["sweep"] = SweepConfig(**skw)
    if cp.has_section("attrnet"):
        types = {f.name: f.type for f in fields(AttrnetSection)}
        akw = {}
        for key, value in cp["attrnet"].items():
            if key not in types:
                raise ValueError(f"unknown attrnet key {key!r}")
            akw[key] = value if types[key] == "str" else (float(value) if types[key] == "float" else int(value))
        kwargs["attrnet"] = AttrnetSection(**akw)
    cfg = ExperimentConfig(**kwargs)
    if base_dir is not None:
        cfg = _resolve_paths(cfg, base_dir)
    return cfg


def _resolve_paths(cfg: ExperimentConfig, base_dir: Path) -> ExperimentConfig:
    ds = cfg.dataset
    for prefix in ("synthetic:", "csv:"):
        if ds.startswith(prefix):
            p = Path(ds[len(prefix):])
            if not p.is_absolute():
                ds = prefix + str((base_dir / p).resolve())
    gm = cfg.gmap
    if gm not in ("design", "estimate") and not Path(gm).is_absolute():
        gm = str((base_dir / gm).resolve())
    return replace(cfg, dataset=ds, gmap=gm)


def load_experiment(path=None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    return parse_experiment(path.read_text(), base_dir=path.parent)


def sweep_seed(base: int, p: float, repetition: int) -> int:
    """``base XOR h(p, r)``: independent but reproducible corruption streams."""
    digest = hashlib.blake2b(f"{float(p)!r}:{int(repetition)}".encode(), digest_size=8).digest()
    return int((base ^ int.from_bytes(digest, "little")) & ((1 << 63) - 1))

