"""Synthetic process-driven recordings of attribute posteriors.

A recording walks the process model; within each step classes are drawn
either i.i.d. from the step prior (``mode="prior"``) or from a per-step
Markov chain (``mode="dynamics"``).  Each segment gets one of its class's
attribute variants (the template unless variants are given) as ground-truth
attribute vector, and a posterior drawn per attribute from

    Beta(beta * target + 1, beta * (1 - target) + 1),  beta = f / (1 - f)

around ``target``, the template bit pulled towards its complement by the
class's ``bias`` entry.  Fidelity ``f = 1`` returns ``target`` exactly.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .attributes import AttributeClassMap, ClassRepresentatives
from .context import BpmModel, StepPriorTable, load_bpm, load_step_priors
from .segments import SegmentTable

ATTRIBUTE_NAMES = ("Gait Cycle", "Torso Rot.", "Right Hand", "Left Hand", "Handy Unit", "No item")

# Stand, Walk, Cart, Handle (up), Handle (center), Handle (down), Sync.
DEFAULT_TEMPLATES = np.array(
    [
        [0, 0, 0, 0, 0, 1],
        [1, 0, 0, 0, 0, 1],
        [1, 0, 1, 1, 0, 0],
        [0, 1, 1, 1, 0, 0],
        [0, 0, 1, 1, 0, 0],
        [0, 1, 1, 1, 1, 0],
        [0, 1, 1, 1, 0, 1],
    ],
    dtype=np.int8,
)


# several attribute vectors per class; the first of each list is the template
DEFAULT_VARIANTS = tuple(
    np.array([[int(ch) for ch in v] for v in row], dtype=np.int8)
    for row in (
        ("000001", "010001"),
        ("100001", "100000"),
        ("101100", "101000"),
        ("011100", "011000", "010100"),
        ("001100", "001000", "000100"),
        ("011110", "001110", "000110"),
        ("011101", "001101"),
    )
)


def sticky_transitions(priors: np.ndarray, stickiness: float) -> np.ndarray:
    """Per-step chains ``rho * I + (1 - rho) * p_s`` with stationary law ``p_s``.

    Rows of classes with zero prior in a step jump straight to ``p_s``.
    """
    priors = np.asarray(priors, dtype=np.float64)
    n_steps, n_classes = priors.shape
    eye = np.eye(n_classes)
    out = np.empty((n_steps, n_classes, n_classes))
    for s in range(n_steps):
        rows = stickiness * eye + (1.0 - stickiness) * priors[s][None, :]
        rows[priors[s] == 0] = priors[s]
        out[s] = rows
    return out


@dataclass(frozen=True)
class RawSignature:
    """Per-class channel signatures for raw windows."""

    length: int  # frames per window, T
    means: np.ndarray  # (C, W)
    cycles: np.ndarray  # (C, W) integer sinusoid cycles per window
    amplitudes: np.ndarray  # (C, W)
    noise_std: float
    # channel w < K takes its mean from the segment's own attribute bit w
    attribute_coded: bool = False

    @property
    def channels(self) -> int:
        return self.means.shape[1]


def default_signature(templates: np.ndarray, length: int = 64, channels: int = 6,
                      snr: float | None = 10.0) -> RawSignature:
    """Channels whose means encode the attribute bits; ``snr=None`` means no noise."""
    n_classes, k = templates.shape
    means = np.zeros((n_classes, channels))
    for w in range(min(channels, k)):
        means[:, w] = 0.5 * (2.0 * templates[:, w] - 1.0)
    cycles = 1 + (np.arange(n_classes)[:, None] + np.arange(channels)[None, :]) % 4
    amplitudes = np.full((n_classes, channels), 0.5)
    power = float(np.mean(means**2 + amplitudes**2 / 2.0))
    noise = 0.0 if snr is None else float(np.sqrt(power / snr))
    return RawSignature(length, means, cycles.astype(np.int64), amplitudes, noise, attribute_coded=True)


@dataclass(frozen=True)
class ScenarioSpec:
    bpm: BpmModel
    priors: StepPriorTable
    templates: np.ndarray  # (C, K)
    fidelity: float = 0.6
    bias: np.ndarray | None = None  # (C, K) in [0, 1]
    mode: str = "dynamics"
    transitions: np.ndarray | None = None  # (S, C, C)
    stickiness: float = 0.8
    n_recordings: int = 12
    length: int = 250
    seed: int = 0
    raw: RawSignature | None = None
    variants: tuple | None = None  # per class (V_c, K) arrays; row 0 equals the template
    variant_weights: tuple | None = None
    attribute_names: tuple = field(default=ATTRIBUTE_NAMES)

    def __post_init__(self):
        t = np.asarray(self.templates, dtype=np.int8)
        object.__setattr__(self, "templates", t)
        n_classes, k = t.shape
        if n_classes != self.priors.n_classes:
            raise ValueError("template rows do not match the prior table's classes")
        if self.bpm.n_steps != self.priors.n_steps:
            raise ValueError("process model and prior table disagree on the number of steps")
        if len({row.tobytes() for row in t}) != n_classes:
            raise ValueError("class templates must be distinct")
        if self.variants is not None:
            if len(self.variants) != n_classes:
                raise ValueError("need one variant list per class")
            vs = tuple(np.atleast_2d(np.asarray(v, dtype=np.int8)) for v in self.variants)
            owner = {}
            for c, v in enumerate(vs):
                if v.shape[1] != k or not np.array_equal(v[0], t[c]):
                    raise ValueError(f"variants of class {c} must start with its template")
                for row in v:
                    key = row.tobytes()
                    if key in owner:
                        raise ValueError(f"attribute vector shared by classes {owner[key]} and {c}")
                    owner[key] = c
            object.__setattr__(self, "variants", vs)
            if self.variant_weights is not None:
                ws = tuple(np.asarray(w, dtype=np.float64) for w in self.variant_weights)
                if len(ws) != n_classes or any(w.shape != (v.shape[0],) for w, v in zip(ws, vs)):
                    raise ValueError("variant weights must match the variant lists")
                object.__setattr__(self, "variant_weights", tuple(w / w.sum() for w in ws))
        if not 0.0 < self.fidelity <= 1.0:
            raise ValueError("fidelity must lie in (0, 1]")
        if self.mode not in ("prior", "dynamics"):
            raise ValueError(f"unknown class sampling mode {self.mode!r}")
        if self.bias is not None:
            b = np.asarray(self.bias, dtype=np.float64)
            if b.shape != t.shape or np.any(b < 0) or np.any(b > 1):
                raise ValueError("bias must be a (C, K) array with entries in [0, 1]")
            object.__setattr__(self, "bias", b)
        if self.transitions is not None:
            tr = np.asarray(self.transitions, dtype=np.float64)
            if tr.shape != (self.priors.n_steps, n_classes, n_classes):
                raise ValueError("transitions must have shape (S, C, C)")
            if not np.allclose(tr.sum(axis=2), 1.0, atol=1e-9):
                raise ValueError("transition rows must sum to 1")
            object.__setattr__(self, "transitions", tr)
        if self.n_recordings < 1 or self.length < 1:
            raise ValueError("need at least one recording of at least one segment")
        if self.raw is not None and self.raw.means.shape[0] != n_classes:
            raise ValueError("raw signatures must have one row per class")

    @property
    def n_classes(self) -> int:
        return self.templates.shape[0]

    @property
    def n_steps(self) -> int:
        return self.priors.n_steps

    @property
    def k(self) -> int:
        return self.templates.shape[1]

    @property
    def class_names(self) -> tuple:
        return self.priors.class_names

    @property
    def step_names(self) -> tuple:
        return self.priors.step_names

    def class_transitions(self) -> np.ndarray:
        if self.transitions is not None:
            return self.transitions
        return sticky_transitions(self.priors.probs, self.stickiness)

    def representatives(self) -> ClassRepresentatives:
        return ClassRepresentatives({c: row for c, row in enumerate(self.templates)})

    def class_vectors(self) -> tuple[np.ndarray, np.ndarray]:
        """Every attribute vector the scenario emits, with its class."""
        if self.variants is None:
            return self.templates, np.arange(self.n_classes)
        vecs = np.vstack(self.variants)
        cls = np.concatenate([np.full(v.shape[0], c) for c, v in enumerate(self.variants)])
        return vecs, cls

    def class_map(self) -> AttributeClassMap:
        """Total map: each vector goes to the class of the nearest emitted vector."""
        vecs, cls = self.class_vectors()
        return AttributeClassMap.from_vectors(vecs, cls, self.n_classes, complete="nearest")

    def with_seed(self, seed: int) -> "ScenarioSpec":
        return replace(self, seed=int(seed))


def _sample_classes(spec: ScenarioSpec, steps: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = steps.size
    probs = spec.priors.probs
    u = rng.random(n)
    if spec.mode == "prior":
        cdf = np.cumsum(probs, axis=1)
        cls = np.array([np.searchsorted(cdf[s], x, side="right") for s, x in zip(steps, u)])
        return np.minimum(cls, spec.n_classes - 1).astype(np.int64)
    trans = np.cumsum(spec.class_transitions(), axis=2)
    init = np.cumsum(probs[steps[0]])
    cls = np.empty(n, dtype=np.int64)
    cls[0] = min(int(np.searchsorted(init, u[0], side="right")), spec.n_classes - 1)
    for t in range(1, n):
        row = trans[steps[t], cls[t - 1]]
        cls[t] = min(int(np.searchsorted(row, u[t], side="right")), spec.n_classes - 1)
    return cls


def _attributes(spec: ScenarioSpec, cls: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if spec.variants is None:
        return spec.templates[cls].copy()
    out = np.empty((cls.size, spec.k), dtype=np.int8)
    u = rng.random(cls.size)
    for c, v in enumerate(spec.variants):
        sel = np.flatnonzero(cls == c)
        if spec.variant_weights is None:
            pick = np.minimum((u[sel] * v.shape[0]).astype(np.int64), v.shape[0] - 1)
        else:
            pick = np.minimum(np.searchsorted(np.cumsum(spec.variant_weights[c]), u[sel], side="right"),
                              v.shape[0] - 1)
        out[sel] = v[pick]
    return out


def _posteriors(spec: ScenarioSpec, cls: np.ndarray, attrs: np.ndarray,
                rng: np.random.Generator) -> np.ndarray:
    a = attrs.astype(np.float64)
    if spec.bias is None:
        target = a
    else:
        b = spec.bias[cls]
        target = a * (1.0 - b) + (1.0 - a) * b
    if spec.fidelity >= 1.0:
        return target.copy()
    beta = spec.fidelity / (1.0 - spec.fidelity)
    return rng.beta(beta * target + 1.0, beta * (1.0 - target) + 1.0)


def _windows(sig: RawSignature, cls: np.ndarray, attrs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = cls.size
    t = np.arange(sig.length, dtype=np.float64)[None, :, None] / sig.length
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(n, 1, sig.channels))
    wave = np.sin(2.0 * np.pi * sig.cycles[cls][:, None, :] * t + phase)
    means = sig.means[cls].copy()
    if sig.attribute_coded:
        m = min(sig.channels, attrs.shape[1])
        means[:, :m] = 0.5 * (2.0 * attrs[:, :m] - 1.0)
    x = means[:, None, :] + sig.amplitudes[cls][:, None, :] * wave
    if sig.noise_std > 0:
        x = x + rng.normal(0.0, sig.noise_std, size=x.shape)
    return x


def _recording(spec: ScenarioSpec, rec: int, seed_seq: np.random.SeedSequence, raw: bool):
    rng = np.random.default_rng(seed_seq)
    steps = spec.bpm.walk(spec.length, rng)
    cls = _sample_classes(spec, steps, rng)
    attrs = _attributes(spec, cls, rng)
    pis = _posteriors(spec, cls, attrs, rng)
    windows = _windows(spec.raw, cls, attrs, rng) if raw else None
    return steps, cls, attrs, pis, windows


def generate(spec: ScenarioSpec, raw: bool = False) -> SegmentTable:
    """All recordings of the scenario; recording ``r`` uses its own seed stream."""
    if raw and spec.raw is None:
        raise ValueError("raw generation needs channel signatures in the scenario")
    children = np.random.SeedSequence(spec.seed).spawn(spec.n_recordings)
    parts = [_recording(spec, r, children[r], raw) for r in range(spec.n_recordings)]
    n = spec.length
    table = SegmentTable(
        recording=np.repeat(np.arange(spec.n_recordings), n),
        frame=np.tile(np.arange(n), spec.n_recordings),
        step=np.concatenate([p[0] for p in parts]),
        cls=np.concatenate([p[1] for p in parts]),
        pi=np.vstack([p[3] for p in parts]),
        attributes=np.vstack([p[2] for p in parts]),
        windows=np.concatenate([p[4] for p in parts]) if raw else None,
        meta={"n_classes": spec.n_classes, "n_steps": spec.n_steps},
    )
    return table


def generate_raw(spec: ScenarioSpec, length: int | None = None, channels: int | None = None) -> SegmentTable:
    """Like ``generate`` but with raw windows; builds default signatures if needed."""
    if spec.raw is None or (length is not None and length != spec.raw.length) or (
        channels is not None and channels != spec.raw.channels
    ):
        sig = default_signature(spec.templates, length or 64, channels or 6)
        spec = replace(spec, raw=sig)
    return generate(spec, raw=True)


# ----------------------------------------------------------------------------
# default scenario and config files

# per-class pull of each attribute towards its complement (systematic network bias)
DEFAULT_BIAS = np.array(
    [
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.3],
        [0.3, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.35, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.3, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.35, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.35],
    ]
)


def default_scenario(seed: int = 0, fidelity: float = 0.6, bias: bool = True,
                     variants: bool = True, **overrides) -> ScenarioSpec:
    """Logistics scenario: bundled step priors, default process model, templates
    and attribute variants."""
    priors = load_step_priors()
    bpm = load_bpm(step_names=priors.step_names, mean_dwell=20.0)
    kwargs = dict(
        bpm=bpm,
        priors=priors,
        templates=DEFAULT_TEMPLATES,
        fidelity=fidelity,
        bias=DEFAULT_BIAS if bias else None,
        variants=DEFAULT_VARIANTS if variants else None,
        seed=seed,
    )
    kwargs.update(overrides)
    return ScenarioSpec(**kwargs)


def _bits(text: str) -> list[int]:
    text = text.strip()
    if not text or set(text) - {"0", "1"}:
        raise ValueError(f"{text!r} is not a 0/1 attribute string")
    return [int(ch) for ch in text]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def parse_scenario(text: str, base_dir: Path | None = None) -> ScenarioSpec:
    """Scenario from an INI-style config (sections ``scenario``, ``templates``,
    ``bias``, ``transitions``, ``raw``)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str
    cp.read_string(text)
    if not cp.has_section("scenario"):
        raise ValueError("scenario config needs a [scenario] section")
    sc = cp["scenario"]
    base_dir = base_dir or Path(".")

    def resolve(value: str):
        if value in ("", "default"):
            return None
        return base_dir / value

    priors = load_step_priors(resolve(sc.get("priors", "default")))
    bpm = load_bpm(resolve(sc.get("bpm", "default")), step_names=priors.step_names,
                   mean_dwell=sc.getfloat("mean_dwell", 20.0))
    if cp.has_section("templates"):
        rows = []
        for name in priors.class_names:
            if name not in cp["templates"]:
                raise ValueError(f"no template for class {name!r}")
            rows.append(_bits(cp["templates"][name]))
        templates = np.array(rows, dtype=np.int8)
    else:
        templates = DEFAULT_TEMPLATES
    bias = None
    if cp.has_section("bias"):
        bias = np.zeros(templates.shape)
        for name, value in cp["bias"].items():
            if name not in priors.class_names:
                raise ValueError(f"bias given for unknown class {name!r}")
            vals = _floats(value)
            if len(vals) != templates.shape[1]:
                raise ValueError(f"bias for {name!r} needs {templates.shape[1]} values")
            bias[priors.class_names.index(name)] = vals
    variants = None
    if cp.has_section("variants"):
        variants = []
        for c, name in enumerate(priors.class_names):
            extra = cp["variants"].get(name, "").split()
            variants.append([templates[c].tolist()] + [_bits(v) for v in extra])
    transitions = None
    if cp.has_section("transitions"):
        n_c = len(priors.class_names)
        transitions = np.zeros((priors.n_steps, n_c, n_c))
        for name in priors.step_names:
            if name not in cp["transitions"]:
                raise ValueError(f"no transition matrix for step {name!r}")
            vals = _floats(cp["transitions"][name])
            if len(vals) != n_c * n_c:
                raise ValueError(f"transition matrix for {name!r} needs {n_c * n_c} values")
            transitions[priors.step_names.index(name)] = np.reshape(vals, (n_c, n_c))
    raw = None
    if cp.has_section("raw"):
        r = cp["raw"]
        snr = r.get("snr", "10")
        raw = default_signature(
            templates, r.getint("length", 64), r.getint("channels", 6),
            None if snr.strip().lower() in ("none", "inf") else float(snr),
        )
    return ScenarioSpec(
        bpm=bpm,
        priors=priors,
        templates=templates,
        fidelity=sc.getfloat("fidelity", 0.6),
        bias=bias,
        mode=sc.get("mode", "dynamics"),
        transitions=transitions,
        stickiness=sc.getfloat("stickiness", 0.8),
        n_recordings=sc.getint("recordings", 12),
        length=sc.getint("length", 250),
        seed=sc.getint("seed", 0),
        raw=raw,
        variants=variants,
    )


def load_scenario(path=None) -> ScenarioSpec:
    """Read a scenario config; ``None`` loads the bundled default scenario."""
    if path is None:
        text = resources.files("ctxhar.data").joinpath("scenario_default.cfg").read_text()
        return parse_scenario(text)
    path = Path(path)
    return parse_scenario(path.read_text(), base_dir=path.parent)
