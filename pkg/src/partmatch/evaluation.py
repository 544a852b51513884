"""Gallery ranking, CMC curves, shot localization and the PASCAL criterion."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .features import AuxMetric, zero_aux_metric
from .geometry import Box, box_iou, union_box
from .graph import CandidacyGraph, GraphParams, build_graph
from .kinematics import KinematicsModel
from .model import Scene, Template, rect_of
from .posterior import MatchState, PriorParams, derive_state, log_posterior
from .sampler import ChainConfig, greedy_labels, run_chains


class NoLocalizationError(ValueError):
    pass


@dataclass(frozen=True)
class RankedResult:
    query_id: str
    ranking: tuple[tuple[str, float], ...]

    def __post_init__(self):
        ids = [g for g, _ in self.ranking]
        if len(set(ids)) != len(ids):
            raise ValueError("gallery ids must be unique")
        scores = [s for _, s in self.ranking]
        if any(b > a for a, b in zip(scores, scores[1:])):
            raise ValueError("ranking scores must be non-increasing")

    def rank_of(self, gallery_id: str) -> int:
        """1-based rank of a gallery id."""
        for r, (g, _) in enumerate(self.ranking, 1):
            if g == gallery_id:
                return r
        raise KeyError(gallery_id)


@dataclass(frozen=True)
class MatchResult:
    state: MatchState
    box: Box | None
    score: float
    graph: CandidacyGraph


def _sort_key(item):
    gid, score = item
    return (-score if score > -math.inf else math.inf, gid)


def score_scene(t: Template, scene: Scene, km: KinematicsModel, params: GraphParams, cfg: ChainConfig, prior: PriorParams = PriorParams(), n_chains: int = 1, aux_metric: AuxMetric = zero_aux_metric):
    g = build_graph(t, scene, km, params, aux_metric)
    res = run_chains(g, prior, cfg, n_chains)
    return g, res


def rank_gallery(
    t: Template,
    gallery: Mapping[str, Scene],
    km: KinematicsModel,
    params: GraphParams = GraphParams(),
    cfg: ChainConfig = ChainConfig(),
    prior: PriorParams = PriorParams(),
    query_id: str = "query",
    n_chains: int = 1,
    aux_metric: AuxMetric = zero_aux_metric,
) -> RankedResult:
    """Score each segmented gallery shot by its best log-posterior; sort descending.

    Items whose graph cannot be built score -inf. Ties go to the smaller id.
    """
    if not gallery:
        raise ValueError("gallery is empty")
    scored = []
    for gid in sorted(gallery):
        try:
            _, res = score_scene(t, gallery[gid], km, params, cfg, prior, n_chains, aux_metric)
            scored.append((gid, res.best_score))
        except ValueError:
            scored.append((gid, -math.inf))
    return RankedResult(query_id, tuple(sorted(scored, key=_sort_key)))


def cmc(results: Sequence[RankedResult], truth: Mapping[str, str], max_rank: int | None = None) -> np.ndarray:
    """rates[r-1] = fraction of queries whose true gallery id is within the top r."""
    if not results:
        raise ValueError("no ranked results")
    n = max_rank or max(len(r.ranking) for r in results)
    hits = np.zeros(n)
    for r in results:
        if r.query_id not in truth:
            raise ValueError(f"no ground truth for query {r.query_id!r}")
        rank = r.rank_of(truth[r.query_id])
        if rank <= n:
            hits[rank - 1] += 1
    return np.cumsum(hits) / len(results)


def active_target_boxes(state: MatchState, g: CandidacyGraph) -> list[Box]:
    return [
        rect_of(g.vertices[i].target, g.person_height).bounds()
        for i in state.active()
        if not g.vertices[i].is_null and g.vertices[i].target is not None
    ]


def person_box(state: MatchState, g: CandidacyGraph) -> Box:
    """Tight axis-aligned box around every activated target rectangle."""
    boxes = active_target_boxes(state, g)
    if not boxes:
        raise NoLocalizationError("no part is matched")
    return union_box(boxes)


def pascal_match(pred: Box, gt: Box) -> bool:
    return box_iou(pred, gt) > 0.5


def match_in_shot(
    t: Template,
    scene: Scene,
    km: KinematicsModel,
    params: GraphParams = GraphParams(),
    cfg: ChainConfig = ChainConfig(),
    prior: PriorParams = PriorParams(),
    n_chains: int = 1,
    aux_metric: AuxMetric = zero_aux_metric,
) -> MatchResult:
    """Localize the template's individual in a scene shot; box is None when nothing matches."""
    g, res = score_scene(t, scene, km, params, cfg, prior, n_chains, aux_metric)
    try:
        box = person_box(res.best_state, g)
    except NoLocalizationError:
        box = None
    return MatchResult(res.best_state, box, res.best_score, g)


def greedy_match(t: Template, scene: Scene, km: KinematicsModel, params: GraphParams = GraphParams(), prior: PriorParams = PriorParams(), aux_metric: AuxMetric = zero_aux_metric) -> MatchResult:
    """Baseline: each part independently takes its most similar candidate."""
    g = build_graph(t, scene, km, params, aux_metric)
    labels = greedy_labels(g)
    state = derive_state(g, labels, prior)
    try:
        box = person_box(state, g)
    except NoLocalizationError:
        box = None
    return MatchResult(state, box, log_posterior(g, labels, prior), g)


# ---- reports ------------------------------------------------------------


def write_cmc_csv(path: str | Path, rates: np.ndarray) -> None:
    lines = ["rank,rate"] + [f"{r},{v:.6f}" for r, v in enumerate(rates, 1)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_rankings_csv(path: str | Path, results: Sequence[RankedResult]) -> None:
    lines = ["query,rank,gallery,score"]
    for r in results:
        for k, (gid, s) in enumerate(r.ranking, 1):
            lines.append(f"{r.query_id},{k},{gid},{s:.12g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def overlay_svg(
    scene: Scene,
    boxes: Sequence[tuple[Box, str]] = (),
    parts: Sequence = (),
    raster_href: str | None = None,
) -> str:
    """SVG with optional background image, part outlines and labeled boxes."""
    w, h = scene.image_size
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" width="{w}" height="{h}" viewBox="0 0 {w} {h}">']
    if raster_href:
        out.append(f'<image xlink:href="{raster_href}" x="0" y="0" width="{w}" height="{h}"/>')
    else:
        out.append(f'<rect x="0" y="0" width="{w}" height="{h}" fill="#202020"/>')
    for q in parts:
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in rect_of(q, scene.person_height).corners)
        out.append(f'<polygon points="{pts}" fill="none" stroke="#4aa3ff" stroke-width="1"/>')
    for (x0, y0, x1, y1), color in boxes:
        out.append(f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{x1 - x0:.2f}" height="{y1 - y0:.2f}" fill="none" stroke="{color}" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
