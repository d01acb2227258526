"""Attention-MIL aggregation: patch embeddings -> specimen logits + attention.

The bag of patch embeddings h_k is pooled with tanh attention
(e_k = w . tanh(V h_k), a = softmax(e)) into z = sum a_k h_k, then classified
by a linear head.  A gated variant multiplies in sigm(U h_k).  Weights are
stored as 32-bit floats; the arithmetic runs in float64 so results agree with
straightforward reimplementations to tight tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import EmbeddingMatrix
from .errors import (
    DimMismatchError,
    EmptyBagError,
    MissingTensorError,
    NonFiniteInputError,
    NonFiniteWeightError,
    ShapeMismatchError,
)

__all__ = [
    "AggregatorWeights",
    "InferenceResult",
    "load_aggregator",
    "softmax",
    "attention_scores",
    "forward",
]


@dataclass(frozen=True)
class AggregatorWeights:
    """Validated attention-MIL parameters.

    V: L x D attention projection, w: L attention scorer, W_out: C x D
    classifier, b_out: C bias.  U (L x D) is present only for the gated
    attention variant.
    """

    V: np.ndarray
    w: np.ndarray
    W_out: np.ndarray
    b_out: np.ndarray
    class_names: tuple[str, ...]
    attention: str = "tanh"
    U: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return int(self.V.shape[1])

    @property
    def attn_dim(self) -> int:
        return int(self.V.shape[0])

    @property
    def n_classes(self) -> int:
        return int(self.W_out.shape[0])


@dataclass(frozen=True)
class InferenceResult:
    """Specimen-level outputs plus per-patch attention in plan order."""

    logits: tuple[float, ...]
    probs: tuple[float, ...]
    predicted_index: int
    attention: tuple[float, ...]
    class_names: tuple[str, ...]

    @property
    def predicted_class(self) -> str:
        return self.class_names[self.predicted_index]


def _as_tensor(doc: dict, name: str, shape: tuple[int, ...]) -> np.ndarray:
    if name not in doc:
        raise MissingTensorError(f"weights document is missing tensor {name!r}")
    try:
        arr = np.asarray(doc[name], dtype=np.float32)
    except (TypeError, ValueError) as e:
        raise ShapeMismatchError(f"tensor {name!r} is not numeric: {e}") from e
    if arr.shape != shape:
        raise ShapeMismatchError(
            f"tensor {name!r} has shape {arr.shape}, expected {shape}"
        )
    if not np.isfinite(arr).all():
        raise NonFiniteWeightError(f"tensor {name!r} contains NaN or Inf")
    return arr


def load_aggregator(doc: dict) -> AggregatorWeights:
    """Validate a parsed weights document into AggregatorWeights.

    The document carries `dims {D,L,C}`, `attention`, `class_names`, and
    nested row-major arrays `V`, `w`, `W_out`, `b_out` (plus `U` when gated).
    """
    if not isinstance(doc, dict):
        raise ShapeMismatchError("weights document must be a mapping")
    dims = doc.get("dims")
    if not isinstance(dims, dict) or not {"D", "L", "C"} <= set(dims):
        raise MissingTensorError("weights document needs dims {D, L, C}")
    d, la, c = int(dims["D"]), int(dims["L"]), int(dims["C"])
    if d < 1 or la < 1 or c < 2:
        raise ShapeMismatchError(f"dims must satisfy D>=1, L>=1, C>=2, got {dims}")
    attention = doc.get("attention", "tanh")
    if attention not in ("tanh", "gated"):
        raise ShapeMismatchError(f"unknown attention variant {attention!r}")
    class_names = doc.get("class_names")
    if (
        not isinstance(class_names, (list, tuple))
        or len(class_names) != c
        or not all(isinstance(n, str) for n in class_names)
    ):
        raise ShapeMismatchError(f"class_names must be {c} strings")
    return AggregatorWeights(
        V=_as_tensor(doc, "V", (la, d)),
        w=_as_tensor(doc, "w", (la,)),
        W_out=_as_tensor(doc, "W_out", (c, d)),
        b_out=_as_tensor(doc, "b_out", (c,)),
        class_names=tuple(class_names),
        attention=attention,
        U=_as_tensor(doc, "U", (la, d)) if attention == "gated" else None,
    )


def softmax(x: np.ndarray) -> np.ndarray:
    """Max-subtracted softmax in float64; safe for large inputs."""
    arr = np.asarray(x, np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"softmax needs a nonempty vector, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise NonFiniteInputError("softmax input contains NaN or Inf")
    shifted = np.exp(arr - arr.max())
    return shifted / shifted.sum()


def _check_bag(weights: AggregatorWeights, matrix: EmbeddingMatrix) -> np.ndarray:
    if matrix.n_patches == 0:
        raise EmptyBagError("cannot aggregate an empty bag of embeddings")
    if matrix.dim != weights.dim:
        raise DimMismatchError(
            f"embeddings have dim {matrix.dim}, aggregator expects {weights.dim}"
        )
    return matrix.values.astype(np.float64)


def _raw_attention(weights: AggregatorWeights, h: np.ndarray) -> np.ndarray:
    scores = np.tanh(h @ weights.V.astype(np.float64).T)
    if weights.attention == "gated":
        gate = 1.0 / (1.0 + np.exp(-(h @ weights.U.astype(np.float64).T)))
        scores = scores * gate
    return scores @ weights.w.astype(np.float64)


def attention_scores(weights: AggregatorWeights, matrix: EmbeddingMatrix) -> np.ndarray:
    """Per-patch attention a_k (sums to 1), in embedding row order."""
    h = _check_bag(weights, matrix)
    return softmax(_raw_attention(weights, h))


def forward(weights: AggregatorWeights, matrix: EmbeddingMatrix) -> InferenceResult:
    """Full specimen-level inference over one bag."""
    h = _check_bag(weights, matrix)
    a = softmax(_raw_attention(weights, h))
    z = a @ h
    logits = weights.W_out.astype(np.float64) @ z + weights.b_out.astype(np.float64)
    probs = softmax(logits)
    predicted = int(np.argmax(logits))  # np.argmax returns the first maximum
    return InferenceResult(
        logits=tuple(float(v) for v in logits),
        probs=tuple(float(v) for v in probs),
        predicted_index=predicted,
        attention=tuple(float(v) for v in a),
        class_names=weights.class_names,
    )
