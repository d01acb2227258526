"""Model bundles: manifest validation, resolution, download cache, integrity.

A bundle is a self-contained directory — ``manifest.json`` plus the files it
lists (always an ``aggregator.json`` weights document, optionally an ONNX
encoder).  Bundles are referenced either by local directory or by an HTTP(S)
base URL; remote bundles are downloaded once into a cache keyed by a digest
of the URL, every file checked against its manifest sha256, and marked
complete only after all files verify — a partially fetched bundle is never
used and is re-fetched from scratch.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import requests
from filelock import FileLock

from .aggregator import AggregatorWeights, load_aggregator
from .encoder import DEFAULT_NORM_MEAN, DEFAULT_NORM_STD, EncoderSpec
from .errors import (
    ChecksumMismatchError,
    FetchError,
    FieldError,
    IncompleteBundleError,
    ManifestParseError,
    SchemaError,
    SlideSpinError,
)
from .patching import PatchSpec

__all__ = [
    "FileEntry",
    "ModelManifest",
    "ModelRef",
    "BundleReport",
    "parse_manifest",
    "resolve_model",
    "verify_bundle",
    "load_bundle",
    "default_cache_dir",
]

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"
COMPLETE_MARKER = ".complete"
CACHE_ENV_VAR = "SLIDESPIN_CACHE"

_SHA256_RE = re.compile(r"^[0-9a-f]{64}$")
_FETCH_TIMEOUT_S = 30
_MAX_REDIRECTS = 5


@dataclass(frozen=True)
class FileEntry:
    path: str
    sha256: str


@dataclass(frozen=True)
class ModelManifest:
    schema_version: int
    model_name: str
    encoder: EncoderSpec
    patch: PatchSpec
    class_names: tuple[str, ...]
    files: dict[str, FileEntry]  # role -> entry; always includes "aggregator"
    description: str = ""


@dataclass(frozen=True)
class ModelRef:
    """Either a local bundle directory or a remote base URL, never both."""

    path: Path | None = None
    url: str | None = None

    def __post_init__(self) -> None:
        if (self.path is None) == (self.url is None):
            raise ValueError("ModelRef needs exactly one of path or url")

    @classmethod
    def parse(cls, text: str) -> "ModelRef":
        if text.startswith(("http://", "https://")):
            return cls(url=text)
        return cls(path=Path(text))


@dataclass
class BundleReport:
    """Outcome of a full bundle verification; empty problems means healthy."""

    bundle_dir: Path
    manifest: ModelManifest | None = None
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.manifest is not None and not self.problems


def _field_str(doc: dict, key: str, problems: list[str]) -> str | None:
    value = doc.get(key)
    if not isinstance(value, str) or not value:
        problems.append(f"{key}: must be a nonempty string")
        return None
    return value


def _parse_encoder(doc, problems: list[str]) -> EncoderSpec | None:
    if not isinstance(doc, dict):
        problems.append("encoder: must be a mapping")
        return None
    try:
        return EncoderSpec(
            encoder_id=doc.get("encoder_id", ""),
            embed_dim=int(doc.get("embed_dim", 0)),
            input_size=int(doc.get("input_size", 0)),
            norm_mean=tuple(doc.get("norm_mean", DEFAULT_NORM_MEAN)),
            norm_std=tuple(doc.get("norm_std", DEFAULT_NORM_STD)),
        )
    except (TypeError, ValueError) as e:
        problems.append(f"encoder: {e}")
        return None


def _parse_patch(doc, problems: list[str]) -> PatchSpec | None:
    if not isinstance(doc, dict):
        problems.append("patch: must be a mapping")
        return None
    try:
        return PatchSpec(
            patch_size_px=int(doc.get("patch_size_px", 0)),
            spacing_mpp=(
                None if doc.get("spacing_mpp") is None else float(doc["spacing_mpp"])
            ),
            tissue_threshold=float(doc.get("tissue_threshold", 0.5)),
            stride_px=(
                None if doc.get("stride_px") is None else int(doc["stride_px"])
            ),
        )
    except (TypeError, ValueError) as e:
        problems.append(f"patch: {e}")
        return None


def _parse_files(doc, problems: list[str]) -> dict[str, FileEntry]:
    if not isinstance(doc, dict) or not doc:
        problems.append("files: must be a nonempty mapping of role -> {path, sha256}")
        return {}
    files: dict[str, FileEntry] = {}
    for role, entry in doc.items():
        if not isinstance(entry, dict) or "path" not in entry or "sha256" not in entry:
            problems.append(f"files.{role}: needs path and sha256")
            continue
        digest = entry["sha256"]
        if not isinstance(digest, str) or not _SHA256_RE.fullmatch(digest):
            problems.append(f"files.{role}.sha256: must be 64 lowercase hex chars")
            continue
        rel = entry["path"]
        if not isinstance(rel, str) or not rel or rel.startswith("/") or ".." in rel:
            problems.append(f"files.{role}.path: must be a relative path inside the bundle")
            continue
        files[role] = FileEntry(path=rel, sha256=digest)
    if "aggregator" not in doc:
        problems.append("files: missing required role 'aggregator'")
    return files


def parse_manifest(text: str) -> ModelManifest:
    """Parse and validate manifest JSON, reporting every violated field at once."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ManifestParseError(f"manifest is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ManifestParseError("manifest must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported schema_version {version!r} (supported: {SCHEMA_VERSION})"
        )

    problems: list[str] = []
    model_name = _field_str(doc, "model_name", problems)
    encoder = _parse_encoder(doc.get("encoder"), problems)
    patch = _parse_patch(doc.get("patch"), problems)
    class_names = doc.get("class_names")
    if (
        not isinstance(class_names, list)
        or len(class_names) < 2
        or not all(isinstance(n, str) and n for n in class_names)
    ):
        problems.append("class_names: must be a list of at least 2 nonempty strings")
        class_names = []
    files = _parse_files(doc.get("files"), problems)
    description = doc.get("description", "")
    if not isinstance(description, str):
        problems.append("description: must be a string")
        description = ""
    if problems:
        raise FieldError(problems)
    return ModelManifest(
        schema_version=SCHEMA_VERSION,
        model_name=model_name,
        encoder=encoder,
        patch=patch,
        class_names=tuple(class_names),
        files=files,
        description=description,
    )


def _sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _read_manifest(bundle_dir: Path) -> ModelManifest:
    manifest_path = bundle_dir / MANIFEST_NAME
    if not manifest_path.is_file():
        raise IncompleteBundleError(f"{bundle_dir}: missing {MANIFEST_NAME}")
    return parse_manifest(manifest_path.read_text("utf-8"))


def _check_files(bundle_dir: Path, manifest: ModelManifest) -> None:
    """Raise on the first missing or corrupted bundle file."""
    for role, entry in manifest.files.items():
        path = bundle_dir / entry.path
        if not path.is_file():
            raise IncompleteBundleError(
                f"{bundle_dir}: missing file {entry.path!r} (role {role!r})"
            )
        actual = _sha256_of(path)
        if actual != entry.sha256:
            raise ChecksumMismatchError(entry.path, entry.sha256, actual)


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV_VAR)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "slidespin"


def _canonical_url(url: str) -> str:
    return url.rstrip("/")


def _fetch_file(session: requests.Session, url: str, dest: Path) -> None:
    try:
        with session.get(url, stream=True, timeout=_FETCH_TIMEOUT_S) as response:
            if response.status_code != 200:
                raise FetchError(f"GET {url} -> HTTP {response.status_code}")
            with open(dest, "wb") as f:
                for chunk in response.iter_content(1 << 16):
                    f.write(chunk)
    except requests.RequestException as e:
        raise FetchError(f"GET {url} failed: {e}") from e


def _download_bundle(url: str, bundle_dir: Path) -> None:
    """Fetch a whole bundle into bundle_dir and mark it complete (marker last)."""
    if bundle_dir.exists():
        shutil.rmtree(bundle_dir)  # leftover partial download: start over
    bundle_dir.mkdir(parents=True)
    session = requests.Session()
    session.max_redirects = _MAX_REDIRECTS
    _fetch_file(session, f"{url}/{MANIFEST_NAME}", bundle_dir / MANIFEST_NAME)
    manifest = parse_manifest((bundle_dir / MANIFEST_NAME).read_text("utf-8"))
    for entry in manifest.files.values():
        dest = bundle_dir / entry.path
        dest.parent.mkdir(parents=True, exist_ok=True)
        _fetch_file(session, f"{url}/{entry.path}", dest)
        actual = _sha256_of(dest)
        if actual != entry.sha256:
            raise ChecksumMismatchError(entry.path, entry.sha256, actual)
    (bundle_dir / COMPLETE_MARKER).write_text("ok\n")


def resolve_model(ref: ModelRef, cache_dir: Path | None = None) -> Path:
    """Return a local directory containing a verified bundle.

    Local refs are validated in place.  Remote refs are cached under a digest
    of the canonical base URL; a bundle already marked complete is returned
    without any network traffic.
    """
    if ref.path is not None:
        bundle_dir = ref.path
        if not bundle_dir.is_dir():
            raise FileNotFoundError(f"bundle directory not found: {bundle_dir}")
        _check_files(bundle_dir, _read_manifest(bundle_dir))
        return bundle_dir

    url = _canonical_url(ref.url)
    cache = cache_dir if cache_dir is not None else default_cache_dir()
    cache.mkdir(parents=True, exist_ok=True)
    key = hashlib.sha256(url.encode("utf-8")).hexdigest()
    bundle_dir = cache / key
    with FileLock(str(cache / f"{key}.lock")):
        if (bundle_dir / COMPLETE_MARKER).is_file():
            return bundle_dir
        try:
            _download_bundle(url, bundle_dir)
        except SlideSpinError:
            shutil.rmtree(bundle_dir, ignore_errors=True)
            raise
    return bundle_dir


def verify_bundle(bundle_dir: str | Path) -> BundleReport:
    """Deep-check a bundle: manifest, file checksums, weights, cross-checks."""
    bundle_dir = Path(bundle_dir)
    report = BundleReport(bundle_dir=bundle_dir)
    if not bundle_dir.is_dir():
        report.problems.append(f"not a directory: {bundle_dir}")
        return report
    try:
        manifest = _read_manifest(bundle_dir)
    except SlideSpinError as e:
        report.problems.append(f"{type(e).__name__}: {e}")
        return report
    report.manifest = manifest

    for role, entry in manifest.files.items():
        path = bundle_dir / entry.path
        if not path.is_file():
            report.problems.append(
                f"IncompleteBundleError: missing file {entry.path!r} (role {role!r})"
            )
            continue
        actual = _sha256_of(path)
        if actual != entry.sha256:
            report.problems.append(
                f"ChecksumMismatchError: {entry.path} expected {entry.sha256}, "
                f"got {actual}"
            )

    if any(p.startswith(("IncompleteBundle", "ChecksumMismatch")) for p in report.problems):
        return report

    try:
        weights = _load_weights(bundle_dir, manifest)
    except (SlideSpinError, json.JSONDecodeError) as e:
        report.problems.append(f"{type(e).__name__}: {e}")
        return report

    if weights.dim != manifest.encoder.embed_dim:
        report.problems.append(
            f"cross-check: aggregator D={weights.dim} != "
            f"encoder embed_dim={manifest.encoder.embed_dim}"
        )
    if len(weights.class_names) != len(manifest.class_names):
        report.problems.append(
            f"cross-check: aggregator has {len(weights.class_names)} classes, "
            f"manifest lists {len(manifest.class_names)}"
        )
    return report


def _load_weights(bundle_dir: Path, manifest: ModelManifest) -> AggregatorWeights:
    weights_path = bundle_dir / manifest.files["aggregator"].path
    doc = json.loads(weights_path.read_text("utf-8"))
    return load_aggregator(doc)


def load_bundle(bundle_dir: str | Path) -> tuple[ModelManifest, AggregatorWeights]:
    """Load a (presumed resolved) bundle's manifest and aggregator weights."""
    bundle_dir = Path(bundle_dir)
    manifest = _read_manifest(bundle_dir)
    return manifest, _load_weights(bundle_dir, manifest)
