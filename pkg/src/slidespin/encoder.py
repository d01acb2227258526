"""Patch encoders: pluggable patch -> embedding-vector backends.

Two encoder families are supported.  ``reference-v1`` is a deterministic,
weight-free encoder (horizontal-band gray means) so pipelines can run
end-to-end with no model downloads; it is part of the public contract, not a
test shim.  ``onnx:<file>`` runs an ONNX model from the bundle directory;
its declared interface is validated eagerly from file metadata, while actual
execution needs the optional ``onnxruntime`` package.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import onnx_meta
from .errors import (
    EncoderBackendUnavailableError,
    NonFiniteEmbeddingError,
    ShapeMismatchError,
    SizeMismatchError,
    UnknownEncoderError,
)
from .patching import PatchPlan, load_patch
from .slide_io import RasterPatch, SlidePyramid
from .tissue import to_grayscale

__all__ = [
    "DEFAULT_NORM_MEAN",
    "DEFAULT_NORM_STD",
    "EncoderSpec",
    "EmbeddingMatrix",
    "Encoder",
    "ReferenceEncoder",
    "OnnxEncoder",
    "load_encoder",
    "normalize",
    "reference_encode",
    "embed_batch",
]

# the de facto natural-image channel statistics, used when a bundle omits its own
DEFAULT_NORM_MEAN = (0.485, 0.456, 0.406)
DEFAULT_NORM_STD = (0.229, 0.224, 0.225)

DEFAULT_BATCH_SIZE = 32


@dataclass(frozen=True)
class EncoderSpec:
    """Which encoder to use and how to prepare pixels for it."""

    encoder_id: str
    embed_dim: int
    input_size: int
    norm_mean: tuple[float, float, float] = DEFAULT_NORM_MEAN
    norm_std: tuple[float, float, float] = DEFAULT_NORM_STD

    def __post_init__(self) -> None:
        if self.embed_dim < 1:
            raise ValueError(f"embed_dim must be >= 1, got {self.embed_dim}")
        if self.input_size < 1:
            raise ValueError(f"input_size must be >= 1, got {self.input_size}")
        if len(self.norm_mean) != 3 or len(self.norm_std) != 3:
            raise ValueError("norm_mean and norm_std must have 3 components")
        if any(s <= 0 for s in self.norm_std):
            raise ValueError(f"norm_std components must be > 0, got {self.norm_std}")


@dataclass(frozen=True)
class EmbeddingMatrix:
    """N x D float32 embeddings, row i = plan patch i."""

    values: np.ndarray
    patch_order: tuple[int, ...]

    @property
    def n_patches(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ValueError(f"embeddings must be 2-D, got shape {self.values.shape}")
        if self.values.dtype != np.float32:
            raise ValueError(f"embeddings must be float32, got {self.values.dtype}")
        if len(self.patch_order) != self.values.shape[0]:
            raise ValueError("patch_order must have one entry per row")


def normalize(patch: RasterPatch, spec: EncoderSpec) -> np.ndarray:
    """Scale pixels to [0,1], apply per-channel stats, emit 3 x S x S float32."""
    if patch.width != spec.input_size or patch.height != spec.input_size:
        raise SizeMismatchError(
            f"patch is {patch.width}x{patch.height}, encoder expects "
            f"{spec.input_size}x{spec.input_size}"
        )
    mean = np.asarray(spec.norm_mean, np.float32).reshape(3, 1, 1)
    std = np.asarray(spec.norm_std, np.float32).reshape(3, 1, 1)
    chw = np.transpose(patch.data, (2, 0, 1)).astype(np.float32) / np.float32(255.0)
    return (chw - mean) / std


def reference_encode(patch: RasterPatch | np.ndarray, dim: int) -> np.ndarray:
    """Mean gray of ``dim`` equal-height horizontal bands, scaled to [0,1].

    The last band absorbs the remainder rows; bands past the image bottom
    (possible when dim > height) are zero.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    gray = to_grayscale(patch)
    height = gray.shape[0]
    band = max(1, height // dim)
    out = np.zeros(dim, np.float32)
    for j in range(dim):
        lo = min(j * band, height)
        hi = height if j == dim - 1 else min((j + 1) * band, height)
        if lo < hi:
            out[j] = gray[lo:hi].mean(dtype=np.float64) / 255.0
    return out


class Encoder:
    """Immutable handle that turns batches of patches into embedding rows."""

    def __init__(self, spec: EncoderSpec):
        self.spec = spec

    def embed(self, patches: list[RasterPatch]) -> np.ndarray:
        raise NotImplementedError


class ReferenceEncoder(Encoder):
    """The built-in weight-free encoder; consumes raw (unnormalized) pixels."""

    def embed(self, patches: list[RasterPatch]) -> np.ndarray:
        out = np.zeros((len(patches), self.spec.embed_dim), np.float32)
        for i, patch in enumerate(patches):
            out[i] = reference_encode(patch, self.spec.embed_dim)
        return out


class OnnxEncoder(Encoder):
    """Runs an ONNX model over normalized NCHW batches.

    The declared graph interface is checked at construction; execution is
    deferred to onnxruntime and fails with a clear error when it is absent.
    """

    def __init__(self, spec: EncoderSpec, model_path):
        super().__init__(spec)
        self.model_path = model_path
        summary = self._validated_summary(spec, model_path)
        self.input_name = summary.inputs[0].name
        self.output_name = summary.outputs[0].name
        self._session = None

    @staticmethod
    def _validated_summary(spec: EncoderSpec, model_path) -> onnx_meta.OnnxSummary:
        try:
            summary = onnx_meta.read_model_summary(model_path)
        except ValueError as e:
            raise UnknownEncoderError(f"{model_path}: not a readable model: {e}") from e
        opset = summary.opset_versions.get("", summary.opset_versions.get("ai.onnx", 0))
        if opset < 13:
            raise UnknownEncoderError(
                f"{model_path}: opset {opset} too old (need >= 13)"
            )
        if len(summary.inputs) != 1 or len(summary.outputs) != 1:
            raise ShapeMismatchError(
                f"{model_path}: expected 1 input and 1 output, got "
                f"{len(summary.inputs)} and {len(summary.outputs)}"
            )
        inp, outp = summary.inputs[0], summary.outputs[0]
        if inp.elem_type != onnx_meta.ELEM_FLOAT32:
            raise ShapeMismatchError(f"{model_path}: input must be float32")
        if outp.elem_type != onnx_meta.ELEM_FLOAT32:
            raise ShapeMismatchError(f"{model_path}: output must be float32")
        size = spec.input_size
        if len(inp.dims) != 4 or inp.dims[1] != 3:
            raise ShapeMismatchError(
                f"{model_path}: input must be Nx3x{size}x{size}, got dims {inp.dims}"
            )
        for d in (inp.dims[2], inp.dims[3]):
            if isinstance(d, int) and d != size:
                raise ShapeMismatchError(
                    f"{model_path}: input spatial dims {inp.dims[2:]} != {size}"
                )
        if len(outp.dims) != 2:
            raise ShapeMismatchError(
                f"{model_path}: output must be 2-D (N x D), got dims {outp.dims}"
            )
        if isinstance(outp.dims[1], int) and outp.dims[1] != spec.embed_dim:
            raise ShapeMismatchError(
                f"{model_path}: output dim {outp.dims[1]} != declared "
                f"embed_dim {spec.embed_dim}"
            )
        return summary

    def _get_session(self):
        if self._session is None:
            try:
                import onnxruntime  # noqa: PLC0415 - optional heavy dep
            except ImportError as e:
                raise EncoderBackendUnavailableError(
                    "onnxruntime is not installed; install it to run onnx encoders"
                ) from e
            self._session = onnxruntime.InferenceSession(
                str(self.model_path), providers=["CPUExecutionProvider"]
            )
        return self._session

    def embed(self, patches: list[RasterPatch]) -> np.ndarray:
        batch = np.stack([normalize(p, self.spec) for p in patches])
        session = self._get_session()
        (rows,) = session.run([self.output_name], {self.input_name: batch})
        rows = np.asarray(rows, np.float32)
        if rows.shape != (len(patches), self.spec.embed_dim):
            raise ShapeMismatchError(
                f"{self.model_path}: model returned shape {rows.shape}, expected "
                f"({len(patches)}, {self.spec.embed_dim})"
            )
        return rows


def load_encoder(spec: EncoderSpec, bundle_dir) -> Encoder:
    """Build the encoder handle named by ``spec.encoder_id``."""
    if spec.encoder_id == "reference-v1":
        return ReferenceEncoder(spec)
    if spec.encoder_id.startswith("onnx:"):
        name = spec.encoder_id[len("onnx:") :]
        path = Path(bundle_dir) / name
        if not path.is_file():
            raise UnknownEncoderError(f"encoder model file not found: {path}")
        return OnnxEncoder(spec, path)
    raise UnknownEncoderError(f"unknown encoder id: {spec.encoder_id!r}")


def embed_batch(
    encoder: Encoder,
    plan: PatchPlan,
    slide: SlidePyramid,
    batch_size: int = DEFAULT_BATCH_SIZE,
    threads: int = 1,
) -> EmbeddingMatrix:
    """Embed every planned patch, lazily and in plan order.

    Row order is independent of batch_size and threads (patch loading may be
    concurrent, but rows land at their plan index).  Any non-finite embedding
    value is a hard error naming the offending patch index.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    n = len(plan)
    values = np.zeros((n, encoder.spec.embed_dim), np.float32)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for start in range(0, n, batch_size):
            stop = min(start + batch_size, n)
            indices = range(start, stop)
            if pool is not None:
                patches = list(pool.map(lambda i: load_patch(slide, plan, i), indices))
            else:
                patches = [load_patch(slide, plan, i) for i in indices]
            rows = encoder.embed(patches)
            bad = np.argwhere(~np.isfinite(rows))
            if bad.size:
                index = start + int(bad[0][0])
                raise NonFiniteEmbeddingError(
                    f"non-finite embedding value for patch {index}"
                )
            values[start:stop] = rows
    finally:
        if pool is not None:
            pool.shutdown()
    return EmbeddingMatrix(values=values, patch_order=tuple(range(n)))
