"""Evaluation metrics: resemblance F1 over bipartite matching, and layout
solution correctness.

Object resemblance builds a confidence matrix from harmonic means of
scaled name/description similarities, thresholds it, and extracts a
one-to-one mapping with the Hungarian algorithm. Layout resemblance uses a
thresholded many-to-many confidence matrix with an object-name occurrence
filter. Counting conventions are asymmetric on purpose: object TP counts
the generated side, layout TP counts the ground-truth side.
"""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from sthl import constraints as constraints_mod
from sthl.dsl import parse, typecheck
from sthl.dsl.typecheck import TypedProgram
from sthl.errors import DimensionError, FormatError
from sthl.scene import SceneLayout


class Embedder(Protocol):
    """Maps text to a unit-norm vector; all vectors must share one length."""

    def embed(self, text: str) -> np.ndarray: ...


@dataclass(frozen=True)
class MatchScores:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "MatchScores":
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        return cls(precision, recall, f1, tp, fp, fn)


@dataclass
class ConfidenceMatrix:
    """Rows are generated items, columns ground-truth items."""

    entries: np.ndarray
    thresholded: bool = False

    def apply_threshold(self, tau: float) -> "ConfidenceMatrix":
        zeroed = np.where(self.entries < tau, 0.0, self.entries)
        return ConfidenceMatrix(zeroed, thresholded=True)


def harmonic_mean(a: float, b: float) -> float:
    if a <= 0 or b <= 0:
        return 0.0
    return 2 * a * b / (a + b)


def scaled_dot(u: np.ndarray, v: np.ndarray) -> float:
    """Dot product of unit vectors mapped linearly from [-1, 1] to [0, 1]."""
    if u.shape != v.shape:
        raise DimensionError(f"embedding lengths differ: {u.shape} vs {v.shape}")
    return float(np.clip((float(u @ v) + 1.0) / 2.0, 0.0, 1.0))


# ---------------------------------------------------------------------------
# Hungarian assignment


def hungarian_assign(matrix: np.ndarray) -> list[tuple[int, int]]:
    """Maximum-total one-to-one assignment on a nonnegative matrix.

    Zero entries are unassignable: pairs whose confidence is 0 never appear
    in the result.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0:
        return []
    rows, cols = linear_sum_assignment(matrix, maximize=True)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if matrix[r, c] > 0.0]


# ---------------------------------------------------------------------------
# Object resemblance


def object_confidences(
    generated: Sequence[tuple[str, str]],
    ground_truth: Sequence[tuple[str, str]],
    embedder: Embedder,
) -> ConfidenceMatrix:
    """Confidence matrix over (name, description) pairs.

    Each entry is the harmonic mean of the scaled name dot-product and the
    scaled description dot-product.
    """
    gen_names = [embedder.embed(name) for name, _ in generated]
    gen_descs = [embedder.embed(desc) for _, desc in generated]
    gt_names = [embedder.embed(name) for name, _ in ground_truth]
    gt_descs = [embedder.embed(desc) for _, desc in ground_truth]
    entries = np.zeros((len(generated), len(ground_truth)))
    for i in range(len(generated)):
        for j in range(len(ground_truth)):
            entries[i, j] = harmonic_mean(
                scaled_dot(gen_names[i], gt_names[j]),
                scaled_dot(gen_descs[i], gt_descs[j]),
            )
    return ConfidenceMatrix(entries)


def object_resemblance(
    generated: Sequence[tuple[str, str]],
    ground_truth: Sequence[tuple[str, str]],
    embedder: Embedder,
    tau: float,
) -> MatchScores:
    """Match generated objects one-to-one against ground truth.

    TP counts generated objects mapped to exactly one ground-truth object;
    FP counts unmapped generated objects; FN counts unmapped ground truth.
    """
    matrix = object_confidences(generated, ground_truth, embedder).apply_threshold(tau)
    assignment = hungarian_assign(matrix.entries)
    tp = len(assignment)
    fp = len(generated) - tp
    fn = len(ground_truth) - tp
    return MatchScores.from_counts(tp, fp, fn)


# ---------------------------------------------------------------------------
# Layout resemblance


_TOKEN_RE = re.compile(r"[a-z0-9]+")


def _tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _contains_name(tokens: list[str], name: str) -> bool:
    name_tokens = _tokens(name)
    if not name_tokens:
        return False
    n = len(name_tokens)
    return any(tokens[i : i + n] == name_tokens for i in range(len(tokens) - n + 1))


def layout_confidences(
    generated: Sequence[str],
    ground_truth: Sequence[str],
    object_names: Sequence[str],
    embedder: Embedder,
    tau: float,
) -> ConfidenceMatrix:
    """Thresholded many-to-many confidence matrix over constraint texts.

    An entry is zeroed when no object name mentioned by the ground-truth
    constraint occurs (whole-token, case-insensitive) in the generated
    constraint, or when the scaled dot-product falls below tau.
    """
    gen_vecs = [embedder.embed(text) for text in generated]
    gt_vecs = [embedder.embed(text) for text in ground_truth]
    gen_tokens = [_tokens(text) for text in generated]
    gt_names = [
        [name for name in object_names if _contains_name(_tokens(text), name)]
        for text in ground_truth
    ]
    entries = np.zeros((len(generated), len(ground_truth)))
    for i in range(len(generated)):
        for j in range(len(ground_truth)):
            if not any(_contains_name(gen_tokens[i], name) for name in gt_names[j]):
                continue
            score = scaled_dot(gen_vecs[i], gt_vecs[j])
            if score >= tau:
                entries[i, j] = score
    return ConfidenceMatrix(entries, thresholded=True)


def layout_resemblance(
    generated: Sequence[str],
    ground_truth: Sequence[str],
    object_names: Sequence[str],
    embedder: Embedder,
    tau: float,
) -> MatchScores:
    """Score generated layout-constraint texts against ground truth.

    TP counts ground-truth constraints mapped to at least one generated
    constraint; FP counts unmapped generated; FN counts unmapped ground
    truth.
    """
    matrix = layout_confidences(generated, ground_truth, object_names, embedder, tau)
    mapped_gt = (matrix.entries > 0).any(axis=0)
    mapped_gen = (matrix.entries > 0).any(axis=1)
    tp = int(mapped_gt.sum())
    fp = int((~mapped_gen).sum()) if len(generated) else 0
    fn = int((~mapped_gt).sum()) if len(ground_truth) else 0
    return MatchScores.from_counts(tp, fp, fn)


def overall_resemblance(obj: MatchScores, layout: MatchScores) -> MatchScores:
    """Pairwise harmonic means of the object and layout scores."""
    return MatchScores(
        precision=harmonic_mean(obj.precision, layout.precision),
        recall=harmonic_mean(obj.recall, layout.recall),
        f1=harmonic_mean(obj.f1, layout.f1),
        tp=obj.tp + layout.tp,
        fp=obj.fp + layout.fp,
        fn=obj.fn + layout.fn,
    )


# ---------------------------------------------------------------------------
# Solution correctness


def solution_correctness(
    program: str | TypedProgram, layout: SceneLayout, seed: int = 0
) -> float:
    """Satisfied-over-total constraint ratio of a layout (the recall-style
    correctness score). Accepts program source text or a checked program."""
    typed = typecheck(parse(program)) if isinstance(program, str) else program
    cs = constraints_mod.compile_constraints(typed, seed=seed)
    ctx = cs.context(layout, rng_seed=seed)
    return constraints_mod.satisfaction_ratio(cs, ctx)


# ---------------------------------------------------------------------------
# Embedding providers


@dataclass(frozen=True)
class TrigramEmbedder:
    """Deterministic character-trigram embedding (unit-norm, fixed dims).

    A stand-in for sentence embedding models so metrics run offline;
    hashing uses crc32, never the salted builtin `hash`.
    """

    dims: int = 256

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dims)
        for token in _tokens(text):
            padded = f"#{token}#"
            for i in range(len(padded) - 2):
                trigram = padded[i : i + 3]
                vec[zlib.crc32(trigram.encode("utf-8")) % self.dims] += 1.0
        norm = float(np.linalg.norm(vec))
        if norm == 0:
            vec[0] = 1.0
            return vec
        return vec / norm


@dataclass
class TsvEmbedder:
    """Embeddings read from a `text<TAB>v1,v2,...` file, with a fallback."""

    vectors: dict[str, np.ndarray]
    fallback: Embedder

    @classmethod
    def load(cls, path: str | Path, fallback: Embedder | None = None) -> "TsvEmbedder":
        vectors: dict[str, np.ndarray] = {}
        expected_dim: int | None = None
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected `text<TAB>v1,v2,...`")
            try:
                vec = np.array([float(x) for x in parts[1].split(",")])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad vector component: {exc}") from None
            if expected_dim is None:
                expected_dim = vec.size
            elif vec.size != expected_dim:
                raise DimensionError(
                    f"{path}:{lineno}: vector length {vec.size} != {expected_dim}"
                )
            norm = float(np.linalg.norm(vec))
            vectors[parts[0]] = vec / norm if norm > 0 else vec
        return cls(vectors, fallback or TrigramEmbedder())

    def embed(self, text: str) -> np.ndarray:
        if text in self.vectors:
            return self.vectors[text]
        return self.fallback.embed(text)
