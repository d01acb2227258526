"""Pyramidal slide access.

Two sources are supported: a narrow tiled-TIFF subset (8-bit RGB/RGBA,
uncompressed or DEFLATE, optional horizontal predictor) and a raw
directory-pyramid format used by fixtures (``pyramid.json`` plus one
``level_{i}.rgb`` file of row-major RGB bytes per level).

All downstream addressing is in level-0 pixel coordinates; mapping to a
target level uses floor(x / downsample). Regions past the slide edge are
padded with white, the glass-background convention.
"""

from __future__ import annotations

import json
import math
import mmap
import os
import threading
import zlib
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tifffile
from PIL import Image

from .errors import (
    CorruptHeaderError,
    InvalidLevelError,
    ReadFailureError,
    UnsupportedFormatError,
)

WHITE = 255

# TIFF enums for the supported subset.
_COMPRESSION_NONE = 1
_COMPRESSION_DEFLATE = 8
_COMPRESSION_ADOBE_DEFLATE = 32946
_SUPPORTED_COMPRESSIONS = (_COMPRESSION_NONE, _COMPRESSION_DEFLATE, _COMPRESSION_ADOBE_DEFLATE)

_TILE_CACHE_CAPACITY = 128


@dataclass(frozen=True)
class LevelInfo:
    index: int
    width: int
    height: int
    downsample: float


@dataclass
class RasterPatch:
    """An RGB pixel block with its provenance in slide coordinates."""

    data: np.ndarray  # (height, width, 3) uint8, row-major
    origin_level0: tuple[int, int] = (0, 0)
    level: int = 0

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def channels(self) -> int:
        return int(self.data.shape[2])

    @property
    def pixels(self) -> bytes:
        return self.data.tobytes()


def _box_resize(arr: np.ndarray, width: int, height: int) -> np.ndarray:
    """Area-average (box filter) resize of an (h, w, 3) uint8 array."""
    if arr.shape[1] == width and arr.shape[0] == height:
        return arr
    img = Image.fromarray(arr, mode="RGB")
    return np.asarray(img.resize((width, height), resample=Image.BOX))


class SlidePyramid:
    """Handle to an open multi-resolution slide.

    Subclasses implement `_read_level_rect`, which returns pixels addressed
    in the target level's own coordinate system, white-padded to the
    requested size. Handles are safe to share across threads for reads.
    """

    def __init__(
        self,
        path: Path,
        levels: list[LevelInfo],
        mpp_x: float | None,
        mpp_y: float | None,
        tile_width: int,
        tile_height: int,
    ):
        if not levels:
            raise CorruptHeaderError(f"{path}: no pyramid levels")
        for lv in levels:
            if lv.width < 1 or lv.height < 1:
                raise CorruptHeaderError(f"{path}: level {lv.index} has empty dimensions")
        for a, b in zip(levels, levels[1:]):
            if not (b.width < a.width and b.height < a.height):
                raise CorruptHeaderError(
                    f"{path}: level dimensions must strictly decrease "
                    f"({a.width}x{a.height} -> {b.width}x{b.height})"
                )
        self.path = Path(path)
        self.levels = levels
        self.mpp_x = mpp_x
        self.mpp_y = mpp_y
        self.tile_width = tile_width
        self.tile_height = tile_height

    @property
    def width(self) -> int:
        return self.levels[0].width

    @property
    def height(self) -> int:
        return self.levels[0].height

    @property
    def level_count(self) -> int:
        return len(self.levels)

    def close(self) -> None:  # pragma: no cover - overridden where resources exist
        pass

    def __enter__(self) -> "SlidePyramid":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _check_level(self, level: int) -> LevelInfo:
        if not 0 <= level < len(self.levels):
            raise InvalidLevelError(f"level {level} not in [0, {len(self.levels) - 1}]")
        return self.levels[level]

    def read_region(self, level: int, x: int, y: int, w: int, h: int) -> RasterPatch:
        """Read a w*h RGB region of `level`; (x, y) are level-0 coordinates.

        Parts of the region outside the slide are white.
        """
        info = self._check_level(level)
        if w < 1 or h < 1:
            raise ValueError(f"region size must be positive, got {w}x{h}")
        lx = math.floor(x / info.downsample)
        ly = math.floor(y / info.downsample)
        data = self._read_level_rect(level, lx, ly, w, h)
        return RasterPatch(data, origin_level0=(int(x), int(y)), level=level)

    def get_thumbnail(self, max_dim: int) -> RasterPatch:
        """Whole-slide render with max(width, height) <= max_dim, never upsampled.

        Rendered from the smallest level still at least max_dim wide or tall,
        then box-downsampled; aspect ratio is preserved within one pixel.
        """
        if max_dim < 16:
            raise ValueError(f"max_dim must be >= 16, got {max_dim}")
        candidates = [lv for lv in self.levels if max(lv.width, lv.height) >= max_dim]
        src = candidates[-1] if candidates else self.levels[0]
        data = self._read_level_rect(src.index, 0, 0, src.width, src.height)
        longest = max(src.width, src.height)
        if longest > max_dim:
            scale = max_dim / longest
            tw = max(1, round(src.width * scale))
            th = max(1, round(src.height * scale))
            data = _box_resize(data, tw, th)
        return RasterPatch(data, origin_level0=(0, 0), level=src.index)

    def _read_level_rect(self, level: int, lx: int, ly: int, w: int, h: int) -> np.ndarray:
        raise NotImplementedError


class _DirectoryPyramidSlide(SlidePyramid):
    """Reader for the raw directory-pyramid fixture format."""

    def __init__(self, root: Path):
        meta_path = root / "pyramid.json"
        try:
            meta = json.loads(meta_path.read_text("utf-8"))
        except (OSError, ValueError) as e:
            raise CorruptHeaderError(f"{meta_path}: {e}") from e

        levels_meta = meta.get("levels")
        if not isinstance(levels_meta, list) or not levels_meta:
            raise CorruptHeaderError(f"{meta_path}: missing 'levels'")
        tile = meta.get("tile", 256)
        mpp = meta.get("mpp")
        if mpp is not None and (not isinstance(mpp, (int, float)) or mpp <= 0):
            raise CorruptHeaderError(f"{meta_path}: mpp must be null or > 0")

        levels = []
        for i, lm in enumerate(levels_meta):
            try:
                w, h = int(lm["width"]), int(lm["height"])
            except (KeyError, TypeError, ValueError) as e:
                raise CorruptHeaderError(f"{meta_path}: level {i} malformed") from e
            ds = 1.0 if i == 0 else int(levels_meta[0]["width"]) / w
            levels.append(LevelInfo(index=i, width=w, height=h, downsample=ds))

        super().__init__(root, levels, mpp, mpp, int(tile), int(tile))

        self._files: list[tuple[object, mmap.mmap, np.ndarray]] = []
        try:
            for lv in levels:
                p = root / f"level_{lv.index}.rgb"
                expected = lv.width * lv.height * 3
                if not p.exists() or p.stat().st_size != expected:
                    raise CorruptHeaderError(
                        f"{p}: expected {expected} bytes of raw RGB"
                    )
                f = open(p, "rb")
                mm = mmap.mmap(f.fileno(), 0, access=mmap.ACCESS_READ)
                arr = np.frombuffer(mm, dtype=np.uint8).reshape(lv.height, lv.width, 3)
                self._files.append((f, mm, arr))
        except Exception:
            self.close()
            raise

    def close(self) -> None:
        # numpy views must be dropped before the mmaps can close
        files, self._files = self._files, []
        while files:
            f, mm, arr = files.pop()
            del arr
            mm.close()
            f.close()

    def _read_level_rect(self, level: int, lx: int, ly: int, w: int, h: int) -> np.ndarray:
        arr = self._files[level][2]
        out = np.full((h, w, 3), WHITE, dtype=np.uint8)
        lw, lh = self.levels[level].width, self.levels[level].height
        x0, x1 = max(lx, 0), min(lx + w, lw)
        y0, y1 = max(ly, 0), min(ly + h, lh)
        if x0 < x1 and y0 < y1:
            out[y0 - ly : y1 - ly, x0 - lx : x1 - lx] = arr[y0:y1, x0:x1]
        return out


@dataclass
class _TiffLevel:
    width: int
    height: int
    tile_width: int
    tile_height: int
    offsets: tuple[int, ...]
    bytecounts: tuple[int, ...]
    compression: int
    predictor: int
    spp: int

    @property
    def tiles_across(self) -> int:
        return -(-self.width // self.tile_width)

    @property
    def tiles_down(self) -> int:
        return -(-self.height // self.tile_height)


class _TiledTiffSlide(SlidePyramid):
    """Reader for tiled pyramidal TIFFs; tiles are decoded lazily on demand.

    Raw tile payloads are fetched with pread (no shared file position) so
    concurrent region reads need no I/O lock; a small LRU keeps recently
    decoded tiles.
    """

    def __init__(self, path: Path):
        try:
            self._tif = tifffile.TiffFile(path)
        except tifffile.TiffFileError as e:
            raise CorruptHeaderError(f"{path}: {e}") from e

        try:
            series = self._tif.series
            if len(series[0].levels) > 1:
                # SubIFD pyramid
                pages = [lv.keyframe for lv in series[0].levels]
            elif len(series) > 1:
                # classic multi-page pyramid: one level per page, storage order
                pages = [s.keyframe for s in series]
            else:
                pages = [series[0].keyframe]
            tiff_levels = [self._validate_page(path, p) for p in pages]
        except (UnsupportedFormatError, CorruptHeaderError):
            self._tif.close()
            raise
        except Exception as e:
            self._tif.close()
            raise CorruptHeaderError(f"{path}: {e}") from e

        levels = []
        for i, tl in enumerate(tiff_levels):
            ds = 1.0 if i == 0 else tiff_levels[0].width / tl.width
            levels.append(LevelInfo(index=i, width=tl.width, height=tl.height, downsample=ds))

        try:
            super().__init__(
                path,
                levels,
                *self._read_mpp(pages[0]),
                tiff_levels[0].tile_width,
                tiff_levels[0].tile_height,
            )
        except Exception:
            self._tif.close()
            raise

        self._tiff_levels = tiff_levels
        self._fd = os.open(path, os.O_RDONLY)
        self._cache: OrderedDict[tuple[int, int], np.ndarray] = OrderedDict()
        self._cache_lock = threading.Lock()

    @staticmethod
    def _validate_page(path: Path, page) -> _TiffLevel:
        if not page.is_tiled:
            raise UnsupportedFormatError(f"{path}: only tiled TIFFs are supported")
        comp = int(page.compression)
        if comp not in _SUPPORTED_COMPRESSIONS:
            raise UnsupportedFormatError(
                f"{path}: unsupported compression {page.compression!r}"
            )
        pred = int(page.predictor)
        if pred not in (1, 2):
            raise UnsupportedFormatError(f"{path}: unsupported predictor {pred}")
        bits = page.bitspersample
        if isinstance(bits, (tuple, list)):
            bits = set(bits)
        else:
            bits = {bits}
        if bits != {8}:
            raise UnsupportedFormatError(f"{path}: only 8-bit samples are supported")
        if page.samplesperpixel not in (3, 4):
            raise UnsupportedFormatError(
                f"{path}: expected RGB or RGBA, got {page.samplesperpixel} samples"
            )
        if page.planarconfig is not None and int(page.planarconfig) != 1:
            raise UnsupportedFormatError(f"{path}: planar data is not supported")
        offsets = page.tags["TileOffsets"].value
        counts = page.tags["TileByteCounts"].value
        if isinstance(offsets, int):
            offsets, counts = (offsets,), (counts,)
        return _TiffLevel(
            width=int(page.imagewidth),
            height=int(page.imagelength),
            tile_width=int(page.tilewidth),
            tile_height=int(page.tilelength),
            offsets=tuple(offsets),
            bytecounts=tuple(counts),
            compression=comp,
            predictor=pred,
            spp=int(page.samplesperpixel),
        )

    @staticmethod
    def _read_mpp(page) -> tuple[float | None, float | None]:
        # Resolution tags give pixels per unit; only inch (2) and cm (3) are
        # meaningful. Converted to micrometers per pixel.
        unit_tag = page.tags.get("ResolutionUnit")
        if unit_tag is None:
            return None, None
        unit = int(unit_tag.value)
        per_unit_um = {2: 25400.0, 3: 10000.0}.get(unit)
        if per_unit_um is None:
            return None, None

        def _one(tag_name):
            tag = page.tags.get(tag_name)
            if tag is None:
                return None
            num, den = tag.value if isinstance(tag.value, tuple) else (tag.value, 1)
            if not num or not den:
                return None
            mpp = per_unit_um / (num / den)
            return mpp if mpp > 0 and math.isfinite(mpp) else None

        return _one("XResolution"), _one("YResolution")

    def close(self) -> None:
        if getattr(self, "_fd", None) is not None:
            os.close(self._fd)
            self._fd = None
        self._tif.close()

    def _tile_array(self, level: int, tile_index: int) -> np.ndarray:
        key = (level, tile_index)
        with self._cache_lock:
            tile = self._cache.get(key)
            if tile is not None:
                self._cache.move_to_end(key)
                return tile

        tl = self._tiff_levels[level]
        offset = tl.offsets[tile_index]
        count = tl.bytecounts[tile_index]
        expected = tl.tile_width * tl.tile_height * tl.spp
        if count == 0:
            # Sparse tile: no data written, background by convention.
            arr = np.full((tl.tile_height, tl.tile_width, tl.spp), WHITE, dtype=np.uint8)
        else:
            raw = os.pread(self._fd, count, offset)
            if len(raw) != count:
                raise ReadFailureError(f"{self.path}: short read for tile {tile_index}")
            if tl.compression != _COMPRESSION_NONE:
                try:
                    raw = zlib.decompress(raw)
                except zlib.error as e:
                    raise ReadFailureError(f"{self.path}: tile {tile_index}: {e}") from e
            if len(raw) != expected:
                raise ReadFailureError(
                    f"{self.path}: tile {tile_index} decoded to {len(raw)} bytes, "
                    f"expected {expected}"
                )
            arr = np.frombuffer(raw, dtype=np.uint8).reshape(
                tl.tile_height, tl.tile_width, tl.spp
            )
            if tl.predictor == 2:
                # Horizontal differencing: integrate along the row, mod 256.
                arr = np.cumsum(arr, axis=1, dtype=np.uint8)

        with self._cache_lock:
            self._cache[key] = arr
            while len(self._cache) > _TILE_CACHE_CAPACITY:
                self._cache.popitem(last=False)
        return arr

    def _read_level_rect(self, level: int, lx: int, ly: int, w: int, h: int) -> np.ndarray:
        tl = self._tiff_levels[level]
        out = np.full((h, w, 3), WHITE, dtype=np.uint8)
        x0, x1 = max(lx, 0), min(lx + w, tl.width)
        y0, y1 = max(ly, 0), min(ly + h, tl.height)
        if x0 >= x1 or y0 >= y1:
            return out
        tc0, tc1 = x0 // tl.tile_width, (x1 - 1) // tl.tile_width
        tr0, tr1 = y0 // tl.tile_height, (y1 - 1) // tl.tile_height
        for tr in range(tr0, tr1 + 1):
            for tc in range(tc0, tc1 + 1):
                tile = self._tile_array(level, tr * tl.tiles_across + tc)
                tx, ty = tc * tl.tile_width, tr * tl.tile_height
                ix0, ix1 = max(x0, tx), min(x1, tx + tl.tile_width)
                iy0, iy1 = max(y0, ty), min(y1, ty + tl.tile_height)
                out[iy0 - ly : iy1 - ly, ix0 - lx : ix1 - lx] = tile[
                    iy0 - ty : iy1 - ty, ix0 - tx : ix1 - tx, :3
                ]
        return out


def open_slide(path: str | Path) -> SlidePyramid:
    """Open a slide; its level geometry is read, no pixel data is loaded."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(str(p))
    if p.is_dir():
        if (p / "pyramid.json").exists():
            return _DirectoryPyramidSlide(p)
        raise UnsupportedFormatError(f"{p}: directory has no pyramid.json")
    with open(p, "rb") as f:
        magic = f.read(4)
    if magic[:2] in (b"II", b"MM"):
        return _TiledTiffSlide(p)
    raise UnsupportedFormatError(f"{p}: unrecognized file format")


def write_directory_pyramid(
    root: str | Path,
    levels: list[np.ndarray],
    tile: int = 256,
    mpp: float | None = None,
) -> Path:
    """Write arrays as the raw directory-pyramid format (bit-exact fixtures)."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    meta = {
        "levels": [{"width": int(a.shape[1]), "height": int(a.shape[0])} for a in levels],
        "tile": int(tile),
        "mpp": mpp,
    }
    (root / "pyramid.json").write_text(json.dumps(meta, indent=2), "utf-8")
    for i, arr in enumerate(levels):
        if arr.dtype != np.uint8 or arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError("levels must be (h, w, 3) uint8 arrays")
        (root / f"level_{i}.rgb").write_bytes(np.ascontiguousarray(arr).tobytes())
    return root
