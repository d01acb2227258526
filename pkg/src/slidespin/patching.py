"""Grid planning of level-0 patch rectangles inside tissue, with lazy loading.

A plan is a pure function of (slide geometry, tissue mask, patch spec): the
candidate grid is anchored at (0, 0) with a fixed stride, partial patches at
the right/bottom edge are dropped, and a candidate survives only if its
tissue fraction meets the threshold.  Pixel data is never touched during
planning; ``load_patch`` / ``PatchIterator`` fetch pixels on demand.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BadSpacingError
from .slide_io import RasterPatch, SlidePyramid, _box_resize
from .tissue import TissueMask, tissue_fraction

__all__ = [
    "PatchSpec",
    "PatchPlan",
    "PatchIterator",
    "effective_geometry",
    "plan_patches",
    "load_patch",
]


@dataclass(frozen=True)
class PatchSpec:
    """How patches are sized, spaced and filtered.

    ``spacing_mpp`` requests a physical sampling resolution; when it (or the
    slide's own resolution) is unknown the patch is taken as raw level-0
    pixels.  ``stride_px`` defaults to the effective level-0 patch side, i.e.
    non-overlapping tiling.
    """

    patch_size_px: int
    spacing_mpp: float | None = None
    tissue_threshold: float = 0.5
    stride_px: int | None = None

    def __post_init__(self) -> None:
        if self.patch_size_px < 32:
            raise ValueError(f"patch_size_px must be >= 32, got {self.patch_size_px}")
        if not 0.0 <= self.tissue_threshold <= 1.0:
            raise ValueError(
                f"tissue_threshold must be in [0, 1], got {self.tissue_threshold}"
            )
        if self.spacing_mpp is not None and self.spacing_mpp <= 0:
            raise ValueError(f"spacing_mpp must be > 0, got {self.spacing_mpp}")
        if self.stride_px is not None and self.stride_px < 1:
            raise ValueError(f"stride_px must be >= 1, got {self.stride_px}")


@dataclass(frozen=True)
class PatchPlan:
    """Ordered (row-major) list of level-0 patch rectangles that passed the
    tissue filter, plus the geometry needed to load them."""

    patches: tuple[tuple[int, int, int], ...]  # (x, y, side) at level 0
    tissue_fractions: tuple[float, ...]
    read_level: int
    level0_side: int
    resize_needed: bool
    spec: PatchSpec
    slide_ref: str

    def __len__(self) -> int:
        return len(self.patches)

    def __post_init__(self) -> None:
        if len(self.patches) != len(self.tissue_fractions):
            raise ValueError("patches and tissue_fractions must align")


class PatchIterator:
    """Iterates a plan in order, fetching pixels only when a patch is asked for."""

    def __init__(self, slide: SlidePyramid, plan: PatchPlan):
        self.slide = slide
        self.plan = plan
        self.cursor = 0

    def __iter__(self) -> "PatchIterator":
        return self

    def __len__(self) -> int:
        return len(self.plan)

    def __next__(self) -> RasterPatch:
        if self.cursor >= len(self.plan):
            raise StopIteration
        patch = load_patch(self.slide, self.plan, self.cursor)
        self.cursor += 1
        return patch


def effective_geometry(
    slide: SlidePyramid, spec: PatchSpec
) -> tuple[int, int, bool]:
    """Resolve (read_level, level0_side, resize_needed) for a spec on a slide.

    With a requested spacing and a known slide resolution, the patch covers
    ``round(patch_size_px * spacing_mpp / slide.mpp_x)`` level-0 pixels and is
    read from the highest pyramid level whose downsample does not exceed the
    implied factor (never upsampling).  Without resolution metadata the patch
    is ``patch_size_px`` raw level-0 pixels.
    """
    if spec.spacing_mpp is None or slide.mpp_x is None:
        return 0, spec.patch_size_px, False
    if spec.spacing_mpp < slide.mpp_x:
        raise BadSpacingError(
            f"requested spacing {spec.spacing_mpp} um/px is finer than the "
            f"slide's native {slide.mpp_x} um/px"
        )
    level0_side = round(spec.patch_size_px * spec.spacing_mpp / slide.mpp_x)
    target = level0_side / spec.patch_size_px
    read_level = 0
    for info in slide.levels:
        if info.downsample <= target:
            read_level = info.index
    side_at_level = round(level0_side / slide.levels[read_level].downsample)
    return read_level, level0_side, side_at_level != spec.patch_size_px


def plan_patches(
    slide: SlidePyramid, mask: TissueMask, spec: PatchSpec
) -> PatchPlan:
    """Lay a stride grid over level 0 and keep full-size cells with enough tissue.

    An empty result is a valid plan (the caller decides how to report a slide
    with no usable tissue).
    """
    read_level, level0_side, resize_needed = effective_geometry(slide, spec)
    stride = spec.stride_px if spec.stride_px is not None else level0_side
    patches: list[tuple[int, int, int]] = []
    fractions: list[float] = []
    for y in range(0, slide.height - level0_side + 1, stride):
        for x in range(0, slide.width - level0_side + 1, stride):
            frac = tissue_fraction(mask, (x, y, level0_side, level0_side))
            if frac >= spec.tissue_threshold:
                patches.append((x, y, level0_side))
                fractions.append(frac)
    return PatchPlan(
        patches=tuple(patches),
        tissue_fractions=tuple(fractions),
        read_level=read_level,
        level0_side=level0_side,
        resize_needed=resize_needed,
        spec=spec,
        slide_ref=str(slide.path),
    )


def load_patch(slide: SlidePyramid, plan: PatchPlan, index: int) -> RasterPatch:
    """Read patch ``index`` of the plan, resized to ``patch_size_px`` if needed."""
    if not 0 <= index < len(plan.patches):
        raise IndexError(f"patch index {index} out of range [0, {len(plan.patches)})")
    x, y, side = plan.patches[index]
    ds = slide.levels[plan.read_level].downsample
    side_at_level = round(side / ds)
    patch = slide.read_region(plan.read_level, x, y, side_at_level, side_at_level)
    if plan.resize_needed:
        size = plan.spec.patch_size_px
        patch = RasterPatch(
            data=_box_resize(patch.data, size, size),
            origin_level0=patch.origin_level0,
            level=patch.level,
        )
    return patch
