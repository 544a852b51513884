"""Candidacy graph: candidate matches as vertices, compatible/competitive edges."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import AuxMetric, part_distance, zero_aux_metric
from .geometry import iou
from .kinematics import KinematicsModel, kinematic_logprob
from .model import DEFAULT_PERSON_HEIGHT, PartProposal, Scene, Template, rect_of
from .parts import JOINTS, PARTS, SYMMETRY_PAIRS, PartType, are_symmetric


class EdgeKind(str, Enum):
    KINEMATIC = "kinematic+"
    SYMMETRY = "symmetry+"
    SAME_PART = "same-part-"
    OVERLAP = "overlap-"

    @property
    def positive(self) -> bool:
        return self in (EdgeKind.KINEMATIC, EdgeKind.SYMMETRY)


_KIND_ORDER = {k: i for i, k in enumerate(EdgeKind)}


@dataclass(frozen=True, eq=False)
class Vertex:
    """Candidate match of one template proposal to a target proposal or to NULL.

    ``scale`` is the target's relative scale; ``distance`` the cached
    appearance distance between template and target proposals.
    """

    part: PartType
    template_index: int
    target_index: int | None
    distance: float | None = None
    scale: float | None = None
    template: PartProposal | None = None
    target: PartProposal | None = None

    def __post_init__(self):
        if self.target_index is None:
            if self.distance is not None:
                raise ValueError("NULL-target vertices carry no appearance distance")
        elif self.distance is None or self.scale is None:
            raise ValueError("matched vertices need a distance and a target scale")

    @property
    def is_null(self) -> bool:
        return self.target_index is None


@dataclass(frozen=True)
class Edge:
    """Undirected edge u < v. ``weight`` is the log-prior term when both ends are active."""

    u: int
    v: int
    kind: EdgeKind
    prob: float
    weight: float

    @property
    def positive(self) -> bool:
        return self.kind.positive


def make_edge(u: int, v: int, kind: EdgeKind, prob: float, weight: float | None = None) -> Edge:
    if u == v:
        raise ValueError("self-loops are not allowed")
    if not 0.0 <= prob <= 1.0:
        raise ValueError(f"edge probability {prob!r} outside [0, 1]")
    if weight is None:
        if kind.positive:
            weight = math.log(prob) if prob > 0 else -math.inf
        else:
            weight = math.log1p(-prob) if prob < 1 else -math.inf
    u, v = min(u, v), max(u, v)
    return Edge(u, v, EdgeKind(kind), float(prob), float(weight))


@dataclass(frozen=True)
class GraphParams:
    lam: float = 10.0
    min_edge_prob: float = 1e-4

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")


class CandidacyGraph:
    """Immutable labeled-graph view with flat arrays for fast scoring.

    ``parts`` lists every part the labeling must account for; parts with no
    active matched vertex count as unmatched.
    """

    def __init__(self, vertices: Sequence[Vertex], edges: Sequence[Edge], parts: Sequence[PartType] | None = None, person_height: float = DEFAULT_PERSON_HEIGHT):
        self.vertices = tuple(vertices)
        n = len(self.vertices)
        seen = set()
        for e in edges:
            if not (0 <= e.u < n and 0 <= e.v < n):
                raise ValueError("edge endpoint out of range")
            key = (e.u, e.v, e.kind)
            if key in seen:
                raise ValueError("duplicate edge of the same kind")
            seen.add(key)
        self.edges = tuple(sorted(edges, key=lambda e: (e.u, e.v, _KIND_ORDER[e.kind])))
        if parts is None:
            present = {v.part for v in self.vertices}
            parts = [p for p in PARTS if p in present]
        self.parts = tuple(parts)
        self.person_height = person_height
        part_pos = {p: i for i, p in enumerate(self.parts)}
        self.part_of = np.array([part_pos[v.part] for v in self.vertices], dtype=int)
        self.is_null = np.array([v.is_null for v in self.vertices], dtype=bool)
        self.distance = np.array([0.0 if v.is_null else v.distance for v in self.vertices], dtype=float)
        self.log_scale = np.array([math.nan if v.is_null else math.log(v.scale) for v in self.vertices], dtype=float)
        self.src = np.array([e.u for e in self.edges], dtype=int)
        self.dst = np.array([e.v for e in self.edges], dtype=int)
        self.positive = np.array([e.positive for e in self.edges], dtype=bool)
        self.prob = np.array([e.prob for e in self.edges], dtype=float)
        self.weight = np.array([e.weight for e in self.edges], dtype=float)
        self.same_part = np.array([e.kind is EdgeKind.SAME_PART for e in self.edges], dtype=bool)
        incident: list[list[int]] = [[] for _ in range(n)]
        for k, e in enumerate(self.edges):
            incident[e.u].append(k)
            incident[e.v].append(k)
        self.incident = incident

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def other(self, k: int, v: int) -> int:
        e = self.edges[k]
        return e.v if e.u == v else e.u

    def edges_of_kind(self, kind: EdgeKind) -> list[Edge]:
        return [e for e in self.edges if e.kind is kind]


# ---- edge probabilities -------------------------------------------------


def symmetry_prob(a: Vertex, b: Vertex, aux_metric: AuxMetric = zero_aux_metric) -> float:
    """exp(-D) between the two target proposals of symmetric parts."""
    if not are_symmetric(a.part, b.part):
        raise ValueError(f"{a.part.value} and {b.part.value} are not symmetry partners")
    if a.target is None or b.target is None:
        raise ValueError("symmetry edges need matched targets")
    return math.exp(-part_distance(a.target.descriptor, b.target.descriptor, aux_metric))


def overlap_prob(iou_value: float, lam: float) -> float:
    return -math.expm1(-lam * iou_value)


def competitive_prob(a: Vertex, b: Vertex, params: GraphParams = GraphParams(), person_height: float = DEFAULT_PERSON_HEIGHT) -> float:
    """1 for the same part; 1 - exp(-lambda * IoU) for overlapping targets of other parts."""
    if a.part is b.part:
        return 1.0
    if a.target is None or b.target is None:
        return 0.0
    return overlap_prob(iou(rect_of(a.target, person_height), rect_of(b.target, person_height)), params.lam)


# ---- construction -------------------------------------------------------


def build_graph(
    t: Template,
    scene: Scene,
    km: KinematicsModel,
    params: GraphParams = GraphParams(),
    aux_metric: AuxMetric = zero_aux_metric,
) -> CandidacyGraph:
    """Enumerate candidate matches and materialize all typed edges.

    Per part, every (template proposal, target proposal) pair plus one NULL
    vertex per template proposal. Compatible edges are kept with their
    exact log-probability however small; overlap edges below
    ``min_edge_prob`` are dropped.
    """
    t.check_complete()
    H = scene.person_height
    vertices: list[Vertex] = []
    by_part: dict[PartType, list[int]] = {p: [] for p in PARTS}
    for part in PARTS:
        targets = scene[part]
        for ti, tp in enumerate(t[part]):
            by_part[part].append(len(vertices))
            vertices.append(Vertex(part, ti, None, template=tp))
            for gi, gp in enumerate(targets):
                by_part[part].append(len(vertices))
                vertices.append(
                    Vertex(part, ti, gi, distance=part_distance(tp.descriptor, gp.descriptor, aux_metric), scale=gp.s, template=tp, target=gp)
                )

    edges: list[Edge] = []
    for part in PARTS:
        for u, v in combinations(by_part[part], 2):
            edges.append(make_edge(u, v, EdgeKind.SAME_PART, 1.0))

    real = {p: [i for i in by_part[p] if not vertices[i].is_null] for p in PARTS}

    for joint in JOINTS:
        cache: dict[tuple[int, int], float] = {}
        for u in real[joint[0]]:
            for v in real[joint[1]]:
                key = (vertices[u].target_index, vertices[v].target_index)
                if key not in cache:
                    cache[key] = kinematic_logprob(vertices[u].target, vertices[v].target, km, H)
                lp = cache[key]
                edges.append(make_edge(u, v, EdgeKind.KINEMATIC, math.exp(lp), lp))

    for a, b in SYMMETRY_PAIRS:
        cache = {}
        for u in real[a]:
            for v in real[b]:
                key = (vertices[u].target_index, vertices[v].target_index)
                if key not in cache:
                    cache[key] = symmetry_prob(vertices[u], vertices[v], aux_metric)
                edges.append(make_edge(u, v, EdgeKind.SYMMETRY, cache[key]))

    rects = {id(q): rect_of(q, H) for q in scene.all_proposals()}
    for pa, pb in combinations(PARTS, 2):
        cache = {}
        for u in real[pa]:
            for v in real[pb]:
                key = (vertices[u].target_index, vertices[v].target_index)
                if key not in cache:
                    ov = iou(rects[id(vertices[u].target)], rects[id(vertices[v].target)])
                    cache[key] = (overlap_prob(ov, params.lam), -params.lam * ov)
                prob, weight = cache[key]
                if prob > 0 and prob >= params.min_edge_prob:
                    edges.append(make_edge(u, v, EdgeKind.OVERLAP, prob, weight))

    return CandidacyGraph(vertices, edges, parts=PARTS, person_height=H)


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def dump_graph(g: CandidacyGraph, path: str | Path | None = None) -> str:
    """Tab-delimited vertex table followed by the edge table."""
    lines = ["# vertices", "id\tpart\ttemplate\ttarget\tdistance\tscale"]
    for i, v in enumerate(g.vertices):
        lines.append(
            "\t".join(
                [
                    str(i),
                    v.part.value,
                    str(v.template_index),
                    "NULL" if v.is_null else str(v.target_index),
                    "" if v.is_null else _fmt(v.distance),
                    "" if v.is_null else _fmt(v.scale),
                ]
            )
        )
    lines += ["# edges", "u\tv\tkind\tprob\tweight"]
    for e in g.edges:
        lines.append(f"{e.u}\t{e.v}\t{e.kind.value}\t{_fmt(e.prob)}\t{_fmt(e.weight)}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
