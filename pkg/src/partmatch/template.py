"""Template and target-set construction: foreground pruning, strips, NMS, top-K."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .features import (
    H_BINS,
    S_BINS,
    V_BINS,
    AuxMetric,
    Descriptor,
    EmptyRegionError,
    Raster,
    hsv_histogram,
    part_distance,
    zero_aux_metric,
)
from .geometry import iou
from .model import (
    DEFAULT_PERSON_HEIGHT,
    PartProposal,
    Scene,
    Template,
    TemplateIncompleteError,
    group_by_part,
    rect_of,
)
from .parts import PARTS


@dataclass(frozen=True)
class BuildConfig:
    K: int = 3
    fg_overlap_min: float = 0.75
    nms_iou: float = 0.5
    dedup_distance: float | None = None

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if not 0.0 <= self.fg_overlap_min <= 1.0:
            raise ValueError("fg_overlap_min must lie in [0, 1]")
        if not 0.0 < self.nms_iou <= 1.0:
            raise ValueError("nms_iou must lie in (0, 1]")
        if self.dedup_distance is not None and self.dedup_distance < 0:
            raise ValueError("dedup_distance must be non-negative")


def foreground_fraction(p: PartProposal, mask: np.ndarray, person_height: float) -> float:
    """Fraction of the proposal's rectangle pixels that are foreground.

    Pixels outside the image count as background.
    """
    rect = rect_of(p, person_height)
    x0, y0, x1, y1 = rect.bounds()
    h, w = mask.shape
    c0, r0 = int(np.floor(x0)), int(np.floor(y0))
    c1, r1 = int(np.ceil(x1)), int(np.ceil(y1))
    yy, xx = np.mgrid[r0:r1, c0:c1]
    inside = rect.contains(xx + 0.5, yy + 0.5)
    total = int(inside.sum())
    if total == 0:
        return 0.0
    in_img = (xx >= 0) & (xx < w) & (yy >= 0) & (yy < h)
    sel = inside & in_img
    fg = mask[yy[sel], xx[sel]].sum()
    return float(fg) / total


def prune_by_foreground(
    props: Sequence[PartProposal],
    mask: np.ndarray,
    min_overlap: float = 0.75,
    person_height: float = DEFAULT_PERSON_HEIGHT,
) -> list[PartProposal]:
    mask = np.asarray(mask, dtype=bool)
    return [p for p in props if foreground_fraction(p, mask, person_height) >= min_overlap]


def strip_of(y: float, image_height: float) -> int:
    return min(3, max(0, int(np.floor(4.0 * y / image_height))))


def strip_filter(props: Sequence[PartProposal], image_height: float) -> list[PartProposal]:
    """Keep proposals lying in their part's horizontal strip."""
    return [p for p in props if strip_of(p.y, image_height) == p.part.strip_index]


def _nms_order(p: PartProposal):
    # total order over every field, so the result never depends on input order
    d = p.descriptor
    appearance = (b"", ()) if d is None else (d.hsv_hist.tobytes(), tuple(d.aux or ()))
    return (-p.score, p.source_id, p.x, p.y, p.theta, p.s, appearance)


def nms(
    props: Sequence[PartProposal],
    iou_thresh: float = 0.5,
    person_height: float = DEFAULT_PERSON_HEIGHT,
) -> list[PartProposal]:
    """Greedy non-maximum suppression by descending score.

    Ties are ordered by (score, source_id, x, y) so the result does not
    depend on input order.
    """
    order = sorted(props, key=_nms_order)
    kept, rects = [], []
    for p in order:
        r = rect_of(p, person_height)
        if all(iou(r, k) <= iou_thresh for k in rects):
            kept.append(p)
            rects.append(r)
    return kept


def dedup(props: Sequence[PartProposal], min_distance: float, aux_metric: AuxMetric = zero_aux_metric) -> list[PartProposal]:
    """Drop proposals whose appearance is within ``min_distance`` of a kept one."""
    kept: list[PartProposal] = []
    for p in props:
        if all(part_distance(p.descriptor, k.descriptor, aux_metric) >= min_distance for k in kept):
            kept.append(p)
    return kept


def build_template(
    per_image_props: Sequence[Sequence[PartProposal]],
    masks: Sequence[np.ndarray],
    cfg: BuildConfig = BuildConfig(),
    person_height: float = DEFAULT_PERSON_HEIGHT,
    aux_metric: AuxMetric = zero_aux_metric,
) -> Template:
    """Build a multiple-instance template from reference-image proposals.

    Per part: foreground prune and strip filter per image, then NMS pooled
    across all references, top-K by score and optional appearance dedup.
    """
    if not per_image_props:
        raise ValueError("at least one reference image is required")
    if len(masks) != len(per_image_props):
        raise ValueError("one foreground mask per reference image is required")
    pooled = {p: [] for p in PARTS}
    for props, mask in zip(per_image_props, masks):
        mask = np.asarray(mask, dtype=bool)
        survivors = prune_by_foreground(props, mask, cfg.fg_overlap_min, person_height)
        survivors = strip_filter(survivors, mask.shape[0])
        for p in survivors:
            pooled[p.part].append(p)
    parts = {}
    for part in PARTS:
        chosen = nms(pooled[part], cfg.nms_iou, person_height)[: cfg.K]
        if cfg.dedup_distance:
            chosen = dedup(chosen, cfg.dedup_distance, aux_metric)
        if not chosen:
            raise TemplateIncompleteError(part)
        parts[part] = tuple(chosen)
    return Template(parts, person_height=person_height)


def describe_from_raster(
    props: Sequence[PartProposal],
    img: Raster,
    person_height: float = DEFAULT_PERSON_HEIGHT,
    bins: tuple[int, int, int] = (H_BINS, S_BINS, V_BINS),
    mask: np.ndarray | None = None,
) -> list[PartProposal]:
    """Replace each proposal's histogram with one measured from ``img``.

    Auxiliary payloads are carried over. Proposals whose rectangle covers
    no usable pixel keep their original descriptor.
    """
    out = []
    for p in props:
        try:
            h = hsv_histogram(img, rect_of(p, person_height), mask, bins)
        except EmptyRegionError:
            h = None
        if h is None or h.empty:
            out.append(p)
            continue
        aux = p.descriptor.aux if p.descriptor is not None else None
        out.append(p.moved(descriptor=Descriptor(h.hsv_hist, aux=aux)))
    return out


def build_scene(
    props: Sequence[PartProposal],
    mask: np.ndarray | None,
    cfg: BuildConfig = BuildConfig(),
    image_size: tuple[int, int] | None = None,
    person_height: float = DEFAULT_PERSON_HEIGHT,
    raster=None,
) -> Scene:
    """Target proposal set: foreground pruning plus per-part NMS, no strips or top-K."""
    if image_size is None:
        if mask is None:
            raise ValueError("image_size is required without a mask")
        image_size = (mask.shape[1], mask.shape[0])
    if mask is not None:
        props = prune_by_foreground(props, mask, cfg.fg_overlap_min, person_height)
    grouped = group_by_part(props)
    kept = {part: nms(grouped[part], cfg.nms_iou, person_height) for part in PARTS}
    return Scene(kept, image_size, person_height=person_height, raster=raster)
