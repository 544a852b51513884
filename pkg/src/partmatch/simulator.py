"""Synthetic individuals, reference shots and cluttered scenes with ground truth.

All randomness flows through ``numpy.random.Generator(PCG64(seed))`` so a
fixed seed reproduces a scene bit for bit on any platform.
"""

from __future__ import annotations

import colorsys
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import (
    N_BINS,
    AuxMetric,
    Descriptor,
    Raster,
    vector_aux_metric,
    write_pbm,
    write_ppm,
)
from .geometry import Box, rotate, union_box
from .graph import CandidacyGraph, EdgeKind, Vertex, make_edge
from .model import DEFAULT_PERSON_HEIGHT, PartProposal, Scene, rect_of, write_proposals
from .parts import (
    DEFAULT_JOINT_OFFSETS,
    JOINTS,
    PARTS,
    SYMMETRY_PAIRS,
    PartType,
    joint_between,
)


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


# Blob payloads are vectors in the unit cube; scaling the RMS difference by
# sqrt(6) makes two unrelated payloads about 1 apart on average, the same
# range as the histogram distance.
BLOB_METRIC_SCALE = math.sqrt(6.0)
blob_metric: AuxMetric = vector_aux_metric(BLOB_METRIC_SCALE)


@dataclass(frozen=True)
class SimConfig:
    """Simulator knobs. Pose noise is (du, dv, dtheta, dlog_s) per joint.

    The default body is rigidly articulated: limbs meet exactly at their
    joints and share the person's scale, so only joint angles vary. Each
    part also carries a ``blob_dims``-long auxiliary appearance vector
    (compared with ``blob_metric``); 0 disables it.
    """

    n_individuals: int = 20
    shots_per_individual: int = 2
    pose_noise: tuple[float, float, float, float] = (0.0, 0.0, 0.10, 0.0)
    descriptor_noise: float = 0.15
    blob_dims: int = 6
    blob_noise: float = 0.05
    false_alarm_rate: float = 2.0
    occlusion_rate: float = 0.0
    confuser_similarity: float = 0.3
    seed: int = 0
    person_height: float = DEFAULT_PERSON_HEIGHT
    image_size: tuple[int, int] = (480, 320)
    scene_scale: float = 0.8
    depth_spread: float = 0.3
    hist_support: int = 8
    symmetry_perturbation: float = 0.05

    def __post_init__(self):
        for name in ("occlusion_rate", "confuser_similarity"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.false_alarm_rate < 0 or self.descriptor_noise < 0 or self.blob_noise < 0:
            raise ValueError("rates and noise levels must be non-negative")
        if any(s < 0 for s in self.pose_noise):
            raise ValueError("pose noise must be non-negative")
        if self.blob_dims < 0:
            raise ValueError("blob_dims must be non-negative")
        if self.n_individuals < 1 or self.shots_per_individual < 1:
            raise ValueError("need at least one individual and one shot")


@dataclass(frozen=True, eq=False)
class SyntheticIndividual:
    id: str
    prototypes: dict[PartType, np.ndarray] = field(repr=False)
    offsets: dict = field(default_factory=lambda: dict(DEFAULT_JOINT_OFFSETS), repr=False)
    height: float = DEFAULT_PERSON_HEIGHT
    own: dict[PartType, np.ndarray] | None = field(default=None, repr=False)
    blobs: dict[PartType, np.ndarray] | None = field(default=None, repr=False)
    own_blobs: dict[PartType, np.ndarray] | None = field(default=None, repr=False)


@dataclass
class ReferenceShot:
    proposals: list[PartProposal]
    mask: np.ndarray
    true_proposals: dict[PartType, PartProposal]


@dataclass
class GroundTruth:
    """Per placed individual: scene indices of its visible true parts and its box."""

    individual_ids: list[str]
    true_indices: list[dict[PartType, int | None]]
    boxes: list[Box]

    def to_rows(self) -> list[str]:
        rows = ["individual\tpart\tindex\tbox"]
        for iid, idx, box in zip(self.individual_ids, self.true_indices, self.boxes):
            b = ",".join(f"{v:.6f}" for v in box)
            for part in PARTS:
                i = idx.get(part)
                rows.append(f"{iid}\t{part.value}\t{'NULL' if i is None else i}\t{b}")
        return rows


# ---- appearance -----------------------------------------------------------


def _normalize(h: np.ndarray) -> np.ndarray:
    return h / h.sum()


def random_histogram(rng: np.random.Generator, support: int = 8, n_bins: int = N_BINS) -> np.ndarray:
    """Sparse random histogram: Dirichlet weights on a few random bins."""
    h = np.zeros(n_bins)
    idx = rng.choice(n_bins, size=support, replace=False)
    h[idx] = rng.dirichlet(np.ones(support))
    return h


def perturb_histogram(rng: np.random.Generator, h: np.ndarray, magnitude: float, support: int = 8) -> np.ndarray:
    """Multiplicative jitter on existing mass plus a little mass on new bins."""
    if magnitude == 0:
        return h.copy()
    jitter = h * np.exp(rng.normal(0.0, magnitude, size=h.shape))
    extra = random_histogram(rng, support, h.size)
    return _normalize(_normalize(jitter) + 0.5 * magnitude * extra)


def mix_histograms(a: np.ndarray, b: np.ndarray, weight_a: float) -> np.ndarray:
    return _normalize(weight_a * a + (1.0 - weight_a) * b)


def _mix(a: np.ndarray, b: np.ndarray, weight_a: float) -> np.ndarray:
    return weight_a * a + (1.0 - weight_a) * b


def generate_individual(rng: np.random.Generator, cfg: SimConfig = SimConfig(), id: str = "p0", base: dict | None = None, base_blobs: dict | None = None) -> SyntheticIndividual:
    """Random per-part prototypes; symmetric limbs share a perturbed prototype.

    With ``base`` given, prototypes are pulled toward it by
    ``cfg.confuser_similarity`` (population-level resemblance).
    """
    own: dict[PartType, np.ndarray] = {}
    own_blobs: dict[PartType, np.ndarray] = {}
    for part in PARTS:
        partner = part.symmetry_partner
        if partner is not None and partner in own:
            own[part] = perturb_histogram(rng, own[partner], cfg.symmetry_perturbation, cfg.hist_support)
            own_blobs[part] = np.clip(own_blobs[partner] + rng.normal(0.0, cfg.symmetry_perturbation, cfg.blob_dims), 0.0, 1.0)
        else:
            own[part] = random_histogram(rng, cfg.hist_support)
            own_blobs[part] = rng.random(cfg.blob_dims)
    protos, blobs = own, own_blobs
    if base is not None:
        protos = {p: mix_histograms(base[p], h, cfg.confuser_similarity) for p, h in own.items()}
    if base_blobs is not None:
        blobs = {p: _mix(base_blobs[p], v, cfg.confuser_similarity) for p, v in own_blobs.items()}
    return SyntheticIndividual(id, protos, height=cfg.person_height, own=own, blobs=blobs, own_blobs=own_blobs)


def generate_population(rng: np.random.Generator, cfg: SimConfig = SimConfig()) -> list[SyntheticIndividual]:
    base: dict[PartType, np.ndarray] = {}
    base_blobs: dict[PartType, np.ndarray] = {}
    for part in PARTS:
        partner = part.symmetry_partner
        if partner in base:
            base[part], base_blobs[part] = base[partner], base_blobs[partner]
        else:
            base[part], base_blobs[part] = random_histogram(rng, cfg.hist_support), rng.random(cfg.blob_dims)
    return [generate_individual(rng, cfg, id=f"p{i}", base=base, base_blobs=base_blobs) for i in range(cfg.n_individuals)]


def confuse(query: SyntheticIndividual, other: SyntheticIndividual, similarity: float) -> SyntheticIndividual:
    """Distractor whose prototypes are interpolated toward the query's.

    The distractor's own appearance (before any population-level mixing) is
    used, so ``similarity`` alone sets how close it comes to the query.
    """
    own = other.own if other.own is not None else other.prototypes
    protos = {p: mix_histograms(query.prototypes[p], own[p], similarity) for p in PARTS}
    blobs = None
    if query.blobs is not None and other.own_blobs is not None:
        blobs = {p: _mix(query.blobs[p], other.own_blobs[p], similarity) for p in PARTS}
    return SyntheticIndividual(other.id, protos, other.offsets, other.height, own=own, blobs=blobs, own_blobs=other.own_blobs)


# ---- pose -----------------------------------------------------------------


def _tree_order() -> list[tuple[PartType, PartType]]:
    order, frontier = [], [PartType.TORSO]
    while frontier:
        parent = frontier.pop(0)
        for joint in JOINTS:
            if joint[0] is parent:
                order.append(joint)
                frontier.append(joint[1])
    return order


_TREE = _tree_order()


def sample_pose(
    rng: np.random.Generator,
    cx: float,
    cy: float,
    scale: float,
    pose_noise: Sequence[float],
    person_height: float = DEFAULT_PERSON_HEIGHT,
    offsets=DEFAULT_JOINT_OFFSETS,
) -> dict[PartType, tuple[float, float, float, float]]:
    """Torso at (cx, cy); children hang off parent joints with Gaussian noise."""
    su, sv, st, ss = pose_noise
    pose = {PartType.TORSO: (cx, cy, rng.normal(0.0, st / 2), scale)}
    for joint in _TREE:
        parent, child = joint
        px, py, pt, ps = pose[parent]
        off_p, off_c = offsets[joint]
        kp = ps * person_height
        ax, ay = rotate(off_p[0] * kp, off_p[1] * kp, pt)
        eu, ev = rng.normal(0.0, su), rng.normal(0.0, sv)
        du, dv = rotate(eu * kp, ev * kp, pt)
        anchor = (px + ax + du, py + ay + dv)
        ct = pt + rng.normal(0.0, st)
        cs = ps * math.exp(rng.normal(0.0, ss))
        kc = cs * person_height
        ox, oy = rotate(off_c[0] * kc, off_c[1] * kc, ct)
        pose[child] = (anchor[0] - ox, anchor[1] - oy, ct, cs)
    return pose


def body_extent(scale: float, person_height: float = DEFAULT_PERSON_HEIGHT) -> tuple[float, float]:
    """Distances from the torso center to the top and bottom of a canonical body."""
    canon = sample_pose(make_rng(0), 0.0, 0.0, scale, (0, 0, 0, 0), person_height)
    tops, bottoms = [], []
    for part, (x, y, t, s) in canon.items():
        b = rect_of(PartProposal(part, x, y, t, s), person_height).bounds()
        tops.append(b[1])
        bottoms.append(b[3])
    return -min(tops), max(bottoms)


def _blob_payload(v: np.ndarray | None) -> tuple[float, ...] | None:
    return None if v is None or v.size == 0 else tuple(float(x) for x in v)


def _describe(rng, ind: SyntheticIndividual, part: PartType, cfg: SimConfig) -> Descriptor:
    hist = perturb_histogram(rng, ind.prototypes[part], cfg.descriptor_noise, cfg.hist_support)
    blob = None
    if ind.blobs is not None and cfg.blob_dims:
        blob = ind.blobs[part] + rng.normal(0.0, cfg.blob_noise, cfg.blob_dims)
    return Descriptor(hist, aux=_blob_payload(blob))


def _true_proposals(rng, ind: SyntheticIndividual, pose, cfg: SimConfig, source_id: str, image_size) -> dict[PartType, PartProposal]:
    w, h = image_size
    return {
        part: PartProposal(
            part,
            float(np.clip(x, 0, w)),
            float(np.clip(y, 0, h)),
            t,
            s,
            score=float(rng.normal(1.0, 0.1)),
            descriptor=_describe(rng, ind, part, cfg),
            source_id=source_id,
        )
        for part, (x, y, t, s) in pose.items()
    }


def _false_alarms(rng, cfg: SimConfig, region: Box, scale: float, image_size, source_id: str) -> list[PartProposal]:
    out = []
    x0, y0, x1, y1 = region
    w, h = image_size
    for part in PARTS:
        for _ in range(rng.poisson(cfg.false_alarm_rate)):
            x = float(np.clip(rng.uniform(x0, x1), 0, w))
            y = float(np.clip(rng.uniform(y0, y1), 0, h))
            out.append(
                PartProposal(
                    part,
                    x,
                    y,
                    rng.normal(0.0, 0.6),
                    scale * math.exp(rng.normal(0.0, 0.1)),
                    score=float(rng.uniform(0.0, 0.8)),
                    descriptor=Descriptor(random_histogram(rng, cfg.hist_support), aux=_blob_payload(rng.random(cfg.blob_dims))),
                    source_id=source_id,
                )
            )
    return out


def body_mask(props: Sequence[PartProposal], image_size, person_height: float, dilate: float = 2.0) -> np.ndarray:
    w, h = image_size
    yy, xx = np.mgrid[0:h, 0:w]
    mask = np.zeros((h, w), dtype=bool)
    for p in props:
        r = rect_of(p, person_height)
        cx, cy = p.x, p.y
        grown = type(r)(tuple((x + dilate * np.sign(x - cx), y + dilate * np.sign(y - cy)) for x, y in r.corners))
        mask |= grown.contains(xx + 0.5, yy + 0.5)
    return mask


def person_box_of(props: Sequence[PartProposal], person_height: float) -> Box:
    return union_box(rect_of(p, person_height).bounds() for p in props)


# Reference crops are framed so each part's canonical center sits well inside
# its horizontal strip: strips are 0.33 H tall and the torso center lies
# 0.432 H below the top edge.
REFERENCE_FRAME = (0.8, 1.32, 0.432)


def reference_image_size(person_height: float = DEFAULT_PERSON_HEIGHT) -> tuple[int, int]:
    w, h, _ = REFERENCE_FRAME
    return (int(round(w * person_height)), int(round(h * person_height)))


def generate_reference_shot(ind: SyntheticIndividual, rng: np.random.Generator, cfg: SimConfig = SimConfig(), source_id: str = "ref") -> ReferenceShot:
    """One upright shot of ``ind`` with all parts visible plus false alarms."""
    H = cfg.person_height
    size = reference_image_size(H)
    pose = sample_pose(rng, size[0] / 2.0, REFERENCE_FRAME[2] * H, 1.0, cfg.pose_noise, H, ind.offsets)
    truth = _true_proposals(rng, ind, pose, cfg, source_id, size)
    fas = _false_alarms(rng, cfg, (0, 0, size[0], size[1]), 1.0, size, source_id)
    mask = body_mask(list(truth.values()), size, H)
    return ReferenceShot(list(truth.values()) + fas, mask, truth)


def reference_scene(shot: ReferenceShot, individual_id: str, person_height: float = DEFAULT_PERSON_HEIGHT) -> tuple[Scene, GroundTruth]:
    """A reference shot packaged as a scene with its ground truth, for writing bundles."""
    scene = Scene.from_list(shot.proposals, reference_image_size(person_height), person_height=person_height)
    index = {id(q): i for part in PARTS for i, q in enumerate(scene[part])}
    idx = {part: index[id(q)] for part, q in shot.true_proposals.items()}
    box = person_box_of(list(shot.true_proposals.values()), person_height)
    return scene, GroundTruth([individual_id], [idx], [box])


def simulate_annotations(n: int, rng: np.random.Generator, cfg: SimConfig = SimConfig()) -> list[dict[PartType, PartProposal]]:
    """Annotated full-body configurations for fitting a kinematics model."""
    H = cfg.person_height
    out = []
    for _ in range(n):
        pose = sample_pose(rng, 0.0, 0.0, math.exp(rng.normal(0.0, 0.1)), cfg.pose_noise, H)
        out.append({part: PartProposal(part, x, y, t, s) for part, (x, y, t, s) in pose.items()})
    return out


def auto_placements(n: int, rng: np.random.Generator, cfg: SimConfig = SimConfig()) -> list[tuple[float, float, float]]:
    """Non-overlapping torso placements (cx, cy, scale) spread across the image."""
    w, h = cfg.image_size
    H = cfg.person_height
    slots = rng.permutation(n)
    out = []
    for i in range(n):
        s = cfg.scene_scale * math.exp(rng.uniform(-cfg.depth_spread, cfg.depth_spread))
        top, bottom = body_extent(s, H)
        cx = (slots[i] + 0.5) * w / n + rng.uniform(-0.05, 0.05) * w / n
        cy = float(np.clip(rng.uniform(top + 2, h - bottom - 2), top + 2, max(top + 2, h - bottom - 2)))
        out.append((cx, cy, s))
    return out


def generate_scene(
    individuals: Sequence[SyntheticIndividual],
    placements: Sequence[tuple[float, float, float]] | None,
    rng: np.random.Generator,
    cfg: SimConfig = SimConfig(),
    query: int | None = 0,
) -> tuple[Scene, GroundTruth, np.ndarray]:
    """Scene shot of several individuals with occlusion and false alarms.

    Individuals other than ``query`` have their appearance pulled toward the
    query's by ``cfg.confuser_similarity``. False alarms fall near people so
    they survive foreground pruning. Returns (scene, ground truth, mask).
    """
    H = cfg.person_height
    if placements is None:
        placements = auto_placements(len(individuals), rng, cfg)
    props: list[PartProposal] = []
    truths: list[dict[PartType, PartProposal | None]] = []
    boxes, bodies = [], []
    for k, (ind, (cx, cy, s)) in enumerate(zip(individuals, placements)):
        shown = ind
        if query is not None and k != query:
            shown = confuse(individuals[query], ind, cfg.confuser_similarity)
        pose = sample_pose(rng, cx, cy, s, cfg.pose_noise, H, ind.offsets)
        truth = _true_proposals(rng, shown, pose, cfg, ind.id, cfg.image_size)
        boxes.append(person_box_of(list(truth.values()), H))
        bodies.extend(truth.values())
        visible = {}
        for part in PARTS:
            keep = rng.random() >= cfg.occlusion_rate
            visible[part] = truth[part] if keep else None
        truths.append(visible)
        props.extend(q for q in visible.values() if q is not None)
    for box, (_, _, s) in zip(boxes, placements):
        pad = 0.1 * H * s
        region = (box[0] - pad, box[1] - pad, box[2] + pad, box[3] + pad)
        props.extend(_false_alarms(rng, cfg, region, s, cfg.image_size, "clutter"))
    scene = Scene.from_list(props, cfg.image_size, person_height=H)
    index = {id(q): i for part in PARTS for i, q in enumerate(scene[part])}
    true_idx = [{part: None if q is None else index[id(q)] for part, q in visible.items()} for visible in truths]
    gt = GroundTruth([ind.id for ind in individuals], true_idx, boxes)
    mask = body_mask(bodies, cfg.image_size, H, dilate=0.05 * H)
    return scene, gt, mask


# ---- rendering ------------------------------------------------------------


def _bin_color(b: int) -> tuple[int, int, int]:
    h_i, rest = divmod(b, 16)
    s_i, v_i = divmod(rest, 4)
    r, g, bl = colorsys.hsv_to_rgb((h_i + 0.5) / 16.0, (s_i + 0.5) / 4.0, (v_i + 0.5) / 4.0)
    return (int(r * 255), int(g * 255), int(bl * 255))


def render_raster(scene: Scene, rng: np.random.Generator, background: tuple[int, int, int] = (0, 0, 0)) -> Raster:
    """Paint proposals as rectangles, each pixel colored by a draw from its histogram.

    Pixels take the center color of a histogram bin, so the painted region
    reproduces the proposal's descriptor up to sampling error. Later
    proposals overwrite earlier ones where they overlap.
    """
    w, h = scene.image_size
    px = np.empty((h, w, 3), dtype=np.uint8)
    px[:] = background
    yy, xx = np.mgrid[0:h, 0:w]
    palette = np.array([_bin_color(b) for b in range(N_BINS)], dtype=np.uint8)
    for q in scene.all_proposals():
        inside = rect_of(q, scene.person_height).contains(xx + 0.5, yy + 0.5)
        n = int(inside.sum())
        if n == 0 or q.descriptor is None or q.descriptor.empty:
            continue
        bins = rng.choice(N_BINS, size=n, p=q.descriptor.hsv_hist)
        px[inside] = palette[bins]
    return Raster(px)


# ---- bundles --------------------------------------------------------------


def write_scene_bundle(directory: str | Path, scene: Scene, gt: GroundTruth, mask: np.ndarray, raster: Raster | None = None, cfg: SimConfig | None = None) -> Path:
    """Directory layout: proposals.jsonl, mask.pbm, truth.tsv, scene.json, render.ppm."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_proposals(d / "proposals.jsonl", scene.all_proposals())
    write_pbm(d / "mask.pbm", mask)
    (d / "truth.tsv").write_text("\n".join(gt.to_rows()) + "\n", encoding="utf-8")
    meta = {"image_size": list(scene.image_size), "person_height": scene.person_height}
    if cfg is not None:
        meta["config"] = asdict(cfg)
    (d / "scene.json").write_text(json.dumps(meta, sort_keys=True, indent=1), encoding="utf-8")
    if raster is not None:
        write_ppm(d / "render.ppm", raster)
    return d


def read_truth(path: str | Path) -> GroundTruth:
    ids, idx, boxes = [], [], []
    rows = Path(path).read_text(encoding="utf-8").splitlines()[1:]
    for row in rows:
        iid, part, i, box = row.split("\t")
        if not ids or ids[-1] != iid:
            ids.append(iid)
            idx.append({})
            boxes.append(tuple(float(v) for v in box.split(",")))
        idx[-1][PartType(part)] = None if i == "NULL" else int(i)
    return GroundTruth(ids, idx, boxes)


# ---- random graphs for sampler validation ---------------------------------

_RANDOM_PARTS = (
    PartType.HEAD,
    PartType.TORSO,
    PartType.LEFT_UPPER_ARM,
    PartType.RIGHT_UPPER_ARM,
    PartType.LEFT_FOREARM,
)


def random_candidacy_graph(
    rng: np.random.Generator,
    n_vertices: int,
    n_parts: int | None = None,
    null_rate: float = 0.2,
    overlap_rate: float = 0.3,
    distance_range: tuple[float, float] = (0.0, 1.5),
    scales: Sequence[float] = (0.8, 0.9, 1.0, 1.25),
) -> CandidacyGraph:
    """Small synthetic graph with every edge type and random probabilities.

    Vertices are spread over a few parts of the kinematic tree; same-part
    pairs get hard exclusion edges, adjacent or symmetric parts get
    compatible edges and other pairs occasionally get overlap edges.
    """
    if n_parts is None:
        n_parts = int(rng.integers(2, min(len(_RANDOM_PARTS), max(2, n_vertices)) + 1))
    parts = _RANDOM_PARTS[:n_parts]
    assign = [parts[i % n_parts] for i in range(n_vertices)]
    assign = [assign[i] for i in rng.permutation(n_vertices)]
    vertices = []
    counters: dict[PartType, int] = {}
    for part in assign:
        k = counters.get(part, 0)
        counters[part] = k + 1
        if rng.random() < null_rate:
            vertices.append(Vertex(part, k, None))
        else:
            vertices.append(Vertex(part, 0, k, distance=float(rng.uniform(*distance_range)), scale=float(rng.choice(scales))))
    edges = []
    for u in range(n_vertices):
        for v in range(u + 1, n_vertices):
            a, b = vertices[u], vertices[v]
            if a.part is b.part:
                edges.append(make_edge(u, v, EdgeKind.SAME_PART, 1.0))
                continue
            if a.is_null or b.is_null:
                continue
            if joint_between(a.part, b.part) is not None:
                edges.append(make_edge(u, v, EdgeKind.KINEMATIC, float(rng.uniform(0.02, 1.0))))
            elif (a.part, b.part) in SYMMETRY_PAIRS or (b.part, a.part) in SYMMETRY_PAIRS:
                edges.append(make_edge(u, v, EdgeKind.SYMMETRY, float(rng.uniform(0.02, 1.0))))
            if rng.random() < overlap_rate:
                edges.append(make_edge(u, v, EdgeKind.OVERLAP, float(rng.uniform(0.0, 0.99))))
    return CandidacyGraph(vertices, edges, parts=parts)
