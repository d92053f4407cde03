"""Attribute posteriors and attribute-to-class inference.

The attribute network outputs a vector ``pi`` of independent Bernoulli
parameters, one per binary attribute.  This module holds the likelihood of a
binary attribute vector under that posterior and the inference rules that turn
``pi`` into an activity class:

* ``dap_classify``  - one representative attribute vector per class
* ``gdap_classify`` - exact marginalisation over every attribute vector that
  maps to a class
* ``nn_classify``   - nearest normalised candidate vector
* ``ml_attribute_estimate`` - per-attribute thresholding

Attribute vectors are enumerated in lexicographic bit order with ``a_1`` as
the most significant bit, which is also the tie-break order everywhere.
"""
from __future__ import annotations

import warnings
from collections import Counter
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "MAX_ENUMERATION_K",
    "LOG_SPACE_K",
    "EnumerationLimitError",
    "AttributeClassMap",
    "ClassRepresentatives",
    "enumerate_vectors",
    "bernoulli_likelihood",
    "bernoulli_log_likelihood",
    "ml_attribute_estimate",
    "dap_classify",
    "gdap_scores",
    "gdap_classify",
    "nn_classify",
    "nn_classify_batch",
]

MAX_ENUMERATION_K = 20
LOG_SPACE_K = 15


class EnumerationLimitError(ValueError):
    """Raised when exact GDAP would have to enumerate too many vectors."""


def _as_posterior(pi) -> np.ndarray:
    arr = np.asarray(pi, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("attribute posterior must be a non-empty 1-d vector")
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("attribute posterior entries must lie in [0, 1]")
    return arr


def _as_bits(a) -> np.ndarray:
    arr = np.asarray(a)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("attribute vector must be a non-empty 1-d vector")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("attribute vector entries must be 0 or 1")
    return arr.astype(np.int8)


def _check_same_length(a: np.ndarray, pi: np.ndarray) -> None:
    if a.shape[-1] != pi.shape[-1]:
        raise ValueError(
            f"dimension mismatch: attribute vector has {a.shape[-1]} entries, "
            f"posterior has {pi.shape[-1]}"
        )


def enumerate_vectors(k: int) -> np.ndarray:
    """All ``2**k`` binary vectors of length ``k`` in lexicographic order."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > MAX_ENUMERATION_K:
        raise EnumerationLimitError(
            f"cannot enumerate 2**{k} attribute vectors (limit K={MAX_ENUMERATION_K})"
        )
    codes = np.arange(1 << k, dtype=np.int64)
    shifts = np.arange(k - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def bits_to_code(a: Sequence[int]) -> int:
    code = 0
    for bit in a:
        code = (code << 1) | int(bit)
    return code


def bernoulli_log_likelihood(a, pi) -> float:
    """``log p(a | pi)``; ``-inf`` when a factor is exactly zero."""
    a = _as_bits(a)
    pi = _as_posterior(pi)
    _check_same_length(a, pi)
    with np.errstate(divide="ignore"):
        terms = np.where(a == 1, np.log(pi), np.log1p(-pi))
    return float(terms.sum())


def bernoulli_likelihood(a, pi) -> float:
    """Probability of binary vector ``a`` under independent Bernoullis ``pi``."""
    a = _as_bits(a)
    pi = _as_posterior(pi)
    _check_same_length(a, pi)
    if pi.size > LOG_SPACE_K:
        return float(np.exp(bernoulli_log_likelihood(a, pi)))
    return float(np.prod(np.where(a == 1, pi, 1.0 - pi)))


def ml_attribute_estimate(pi) -> np.ndarray:
    """Most likely attribute vector: ``a_k = 1`` iff ``pi_k > 0.5``."""
    pi = _as_posterior(pi)
    return (pi > 0.5).astype(np.int8)


class ClassRepresentatives:
    """Injective map from class id to its unique attribute vector (DAP)."""

    def __init__(self, reps: Mapping[int, Sequence[int]]):
        if not reps:
            raise ValueError("at least one class representative is required")
        ids = sorted(reps)
        if ids != list(range(len(ids))):
            raise ValueError("class ids must be a contiguous 0-based range")
        vectors = np.stack([_as_bits(reps[c]) for c in ids])
        seen = {}
        for c, row in zip(ids, vectors):
            key = row.tobytes()
            if key in seen:
                raise ValueError(f"classes {seen[key]} and {c} share a representative")
            seen[key] = c
        self.vectors = vectors

    @property
    def n_classes(self) -> int:
        return self.vectors.shape[0]

    @property
    def k(self) -> int:
        return self.vectors.shape[1]


def dap_classify(pi, reps: ClassRepresentatives) -> int:
    """Class whose representative is most likely under ``pi`` (uniform prior)."""
    pi = _as_posterior(pi)
    _check_same_length(reps.vectors, pi)
    with np.errstate(divide="ignore"):
        logs = np.where(reps.vectors == 1, np.log(pi), np.log1p(-pi)).sum(axis=1)
    return int(np.argmax(logs))


class AttributeClassMap:
    """Deterministic map ``g(a) = c`` from binary attribute vectors to classes.

    ``entries`` may be partial; vectors without an entry map to
    ``default_class`` when one is set, otherwise they are unmapped.  Every
    class id in ``range(n_classes)`` must be reachable.
    """

    def __init__(
        self,
        entries: Mapping[tuple, int],
        n_classes: int,
        default_class: int | None = None,
    ):
        if not entries:
            raise ValueError("attribute class map needs at least one entry")
        lengths = {len(a) for a in entries}
        if len(lengths) != 1:
            raise ValueError("all attribute vectors in the map must share one length")
        self.k = lengths.pop()
        if self.k < 1:
            raise ValueError("attribute vectors must have length >= 1")
        self.n_classes = int(n_classes)
        clean: dict[tuple, int] = {}
        for a, c in entries.items():
            bits = tuple(int(b) for b in _as_bits(a))
            c = int(c)
            if not 0 <= c < self.n_classes:
                raise ValueError(f"class id {c} out of range for {self.n_classes} classes")
            clean[bits] = c
        if default_class is not None and not 0 <= default_class < self.n_classes:
            raise ValueError(f"default class {default_class} out of range")
        self.entries = dict(sorted(clean.items()))
        self.default_class = default_class
        image = set(self.entries.values())
        if default_class is not None:
            image.add(default_class)
        missing = sorted(set(range(self.n_classes)) - image)
        if missing:
            raise ValueError(f"classes {missing} are not the image of any attribute vector")

    def __call__(self, a) -> int | None:
        return self.entries.get(tuple(int(b) for b in a), self.default_class)

    def __eq__(self, other) -> bool:
        if not isinstance(other, AttributeClassMap):
            return NotImplemented
        return (
            self.entries == other.entries
            and self.n_classes == other.n_classes
            and self.default_class == other.default_class
        )

    def is_total(self) -> bool:
        return self.default_class is not None or len(self.entries) == (1 << self.k)

    def class_table(self) -> np.ndarray:
        """Class id for every enumerated vector, ``-1`` where unmapped."""
        if self.k > MAX_ENUMERATION_K:
            raise EnumerationLimitError(
                f"K={self.k} exceeds the enumeration limit {MAX_ENUMERATION_K}; "
                "use nn_classify instead"
            )
        fill = -1 if self.default_class is None else self.default_class
        table = np.full(1 << self.k, fill, dtype=np.int64)
        for bits, c in self.entries.items():
            table[bits_to_code(bits)] = c
        return table

    def candidates(self) -> tuple[np.ndarray, np.ndarray]:
        """Explicit entries as (vectors, classes), lexicographically ordered."""
        vecs = np.array(list(self.entries.keys()), dtype=np.int8)
        cls = np.array(list(self.entries.values()), dtype=np.int64)
        return vecs, cls

    @classmethod
    def from_representatives(
        cls, reps: ClassRepresentatives, complete: str = "none"
    ) -> "AttributeClassMap":
        """Map built from class representatives.

        ``complete="nearest"`` extends it to every vector by Hamming distance
        to the representatives (ties to the lowest class id).
        """
        entries = {tuple(int(b) for b in v): c for c, v in enumerate(reps.vectors)}
        if complete == "nearest":
            allv = enumerate_vectors(reps.k)
            dist = (allv[:, None, :] != reps.vectors[None, :, :]).sum(axis=2)
            nearest = np.argmin(dist, axis=1)
            entries = {tuple(int(b) for b in v): int(c) for v, c in zip(allv, nearest)}
        elif complete != "none":
            raise ValueError(f"unknown completion rule {complete!r}")
        return cls(entries, reps.n_classes)

    @classmethod
    def from_vectors(cls, vectors, classes, n_classes: int, complete: str = "none") -> "AttributeClassMap":
        """Map from explicit (vector, class) pairs.

        ``complete="nearest"`` assigns every other vector the class of the
        Hamming-nearest listed vector; distance ties go to the lowest class id.
        """
        vectors = np.asarray(vectors, dtype=np.int8)
        classes = np.asarray(classes, dtype=np.int64)
        entries = {tuple(int(b) for b in v): int(c) for v, c in zip(vectors, classes)}
        if complete == "nearest":
            allv = enumerate_vectors(vectors.shape[1])
            dist = (allv[:, None, :] != vectors[None, :, :]).sum(axis=2)
            best = dist.min(axis=1, keepdims=True)
            cand = np.where(dist == best, classes[None, :], np.iinfo(np.int64).max)
            nearest = cand.min(axis=1)
            entries = {tuple(int(b) for b in v): int(c) for v, c in zip(allv, nearest)}
        elif complete != "none":
            raise ValueError(f"unknown completion rule {complete!r}")
        return cls(entries, n_classes)

    @classmethod
    def estimate(
        cls,
        attributes: np.ndarray,
        classes: Iterable[int],
        n_classes: int,
        default_class: int | None = None,
    ) -> "AttributeClassMap":
        """Majority class per observed ground-truth attribute vector.

        Vote ties go to the lowest class id.  Unseen vectors fall to
        ``default_class``, which defaults to the most frequent class.
        """
        attributes = np.asarray(attributes)
        classes = np.asarray(list(classes), dtype=np.int64)
        if attributes.shape[0] != classes.shape[0]:
            raise ValueError("attribute rows and class labels differ in length")
        votes: dict[tuple, Counter] = {}
        for row, c in zip(attributes, classes):
            votes.setdefault(tuple(int(b) for b in row), Counter())[int(c)] += 1
        entries = {}
        for key, counter in votes.items():
            top = max(counter.values())
            entries[key] = min(c for c, v in counter.items() if v == top)
        if default_class is None:
            freq = np.bincount(classes, minlength=n_classes)
            default_class = int(np.argmax(freq))
        return cls(entries, n_classes, default_class=default_class)

    def to_text(self) -> str:
        lines = [f"# attribute class map: K={self.k} classes={self.n_classes}"]
        lines.append(f"classes {self.n_classes}")
        if self.default_class is not None:
            lines.append(f"default {self.default_class}")
        for bits, c in self.entries.items():
            lines.append("".join(str(b) for b in bits) + f" {c}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str, n_classes: int | None = None) -> "AttributeClassMap":
        entries: dict[tuple, int] = {}
        default = None
        declared = None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected '<bits> <class-id>', got {raw!r}")
            key, value = parts
            try:
                ivalue = int(value)
            except ValueError:
                raise ValueError(f"line {lineno}: class id {value!r} is not an integer") from None
            if key == "default":
                default = ivalue
            elif key == "classes":
                declared = ivalue
            else:
                if set(key) - {"0", "1"}:
                    raise ValueError(f"line {lineno}: {key!r} is not a 0/1 string")
                bits = tuple(int(ch) for ch in key)
                if bits in entries:
                    raise ValueError(f"line {lineno}: duplicate attribute vector {key}")
                entries[bits] = ivalue
        if n_classes is None:
            n_classes = declared
        if n_classes is None:
            n_classes = max(list(entries.values()) + [default if default is not None else -1]) + 1
        return cls(entries, n_classes, default_class=default)

    @classmethod
    def load(cls, path, n_classes: int | None = None) -> "AttributeClassMap":
        return cls.from_text(Path(path).read_text(), n_classes=n_classes)


def _log_terms(pis: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        log_on = np.log(pis)
        log_off = np.log1p(-pis)
    # (n, K) x (V, K) -> (n, V); 0 * -inf must stay 0, so mask instead of matmul
    v = vectors.astype(bool)
    out = np.empty((pis.shape[0], vectors.shape[0]))
    for i in range(pis.shape[0]):
        out[i] = np.where(v, log_on[i], log_off[i]).sum(axis=1)
    return out


def gdap_scores(pis, g: AttributeClassMap) -> np.ndarray:
    """Per-class GDAP mass for one posterior (1-d) or a batch (2-d)."""
    arr = np.asarray(pis, dtype=np.float64)
    single = arr.ndim == 1
    pis2 = np.atleast_2d(arr)
    for row in pis2:
        _as_posterior(row)
    if pis2.shape[1] != g.k:
        raise ValueError(f"dimension mismatch: posterior has {pis2.shape[1]} entries, map has K={g.k}")
    if g.k > MAX_ENUMERATION_K:
        raise EnumerationLimitError(
            f"exact GDAP needs 2**{g.k} terms (limit K={MAX_ENUMERATION_K}); use nn_classify"
        )
    if not g.is_total():
        raise ValueError("GDAP needs a total attribute class map or a default class")
    vectors = enumerate_vectors(g.k)
    table = g.class_table()
    scores = np.zeros((pis2.shape[0], g.n_classes))
    if g.k <= LOG_SPACE_K:
        for i, pi in enumerate(pis2):
            probs = np.where(vectors == 1, pi, 1.0 - pi).prod(axis=1)
            scores[i] = np.bincount(table, weights=probs, minlength=g.n_classes)
    else:
        logs = _log_terms(pis2, vectors)
        for c in range(g.n_classes):
            sel = logs[:, table == c]
            if sel.shape[1] == 0:
                continue
            m = sel.max(axis=1, keepdims=True)
            finite = np.isfinite(m[:, 0])
            out = np.zeros(pis2.shape[0])
            out[finite] = np.exp(m[finite, 0]) * np.exp(sel[finite] - m[finite]).sum(axis=1)
            scores[:, c] = out
    return scores[0] if single else scores


def gdap_classify(pi, g: AttributeClassMap) -> tuple[int, np.ndarray]:
    """Exact GDAP: class with the largest summed likelihood, plus all scores."""
    scores = gdap_scores(_as_posterior(pi), g)
    return int(np.argmax(scores)), scores


def _nn_candidates(g: AttributeClassMap, norm: str):
    vecs, cls = g.candidates()
    vecs = vecs.astype(np.float64)
    lengths = np.linalg.norm(vecs, axis=1)
    zero = lengths == 0
    if np.any(zero):
        warnings.warn("all-zero candidate vector skipped in nearest-neighbour search", stacklevel=3)
        vecs, cls, lengths = vecs[~zero], cls[~zero], lengths[~zero]
    if vecs.shape[0] == 0:
        raise ValueError("no usable candidate vectors for nearest-neighbour search")
    if norm == "l2":
        vecs = vecs / lengths[:, None]
    elif norm != "none":
        raise ValueError(f"unknown normalisation {norm!r}")
    return vecs, cls


def nn_classify_batch(pis, g: AttributeClassMap, norm: str = "l2") -> np.ndarray:
    pis = np.atleast_2d(np.asarray(pis, dtype=np.float64))
    if pis.shape[1] != g.k:
        raise ValueError(f"dimension mismatch: posterior has {pis.shape[1]} entries, map has K={g.k}")
    vecs, cls = _nn_candidates(g, norm)
    lengths = np.linalg.norm(pis, axis=1)
    if np.any(lengths == 0):
        raise ValueError("cannot normalise an all-zero attribute posterior")
    if norm == "l2":
        pis = pis / lengths[:, None]
    d2 = ((pis[:, None, :] - vecs[None, :, :]) ** 2).sum(axis=2)
    return cls[np.argmin(d2, axis=1)]


def nn_classify(pi, g: AttributeClassMap, norm: str = "l2") -> int:
    """Class of the candidate vector nearest to ``pi`` after normalisation."""
    return int(nn_classify_batch(_as_posterior(pi)[None, :], g, norm=norm)[0])
