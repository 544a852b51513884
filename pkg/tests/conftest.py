"""Shared fixtures and the acceptance summary printed at the end of a run."""

from __future__ import annotations

import math

import numpy as np
import pytest

from partmatch.features import Descriptor
from partmatch.graph import CandidacyGraph, EdgeKind, Vertex, make_edge
from partmatch.model import PartProposal
from partmatch.parts import PartType

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def onehot(k: int, n: int = 256) -> Descriptor:
    h = np.zeros(n)
    h[k] = 1.0
    return Descriptor(h)


def prop(part, x=0.0, y=0.0, theta=0.0, s=1.0, score=0.0, descriptor=None, source_id=""):
    return PartProposal(PartType(part), x, y, theta, s, score, descriptor, source_id)


def real_vertex(part, k=0, distance=0.0, scale=1.0, template_index=0, target=None):
    return Vertex(PartType(part), template_index, k, distance=distance, scale=scale, target=target)


def null_vertex(part, template_index=0):
    return Vertex(PartType(part), template_index, None)


@pytest.fixture
def mixed_graph():
    """Eight vertices over three parts with every edge kind, used by several modules."""
    T, H, A = PartType.TORSO, PartType.HEAD, PartType.LEFT_UPPER_ARM
    vs = [
        real_vertex(T, 0, 0.3), real_vertex(T, 1, 0.5, scale=1.3), null_vertex(T),
        real_vertex(H, 0, 0.4), real_vertex(H, 1, 0.2, scale=1.3),
        real_vertex(A, 0, 0.6), real_vertex(A, 1, 0.3), null_vertex(A),
    ]
    edges = []
    for group in ((0, 1, 2), (3, 4), (5, 6, 7)):
        for i, u in enumerate(group):
            for v in group[i + 1:]:
                edges.append(make_edge(u, v, EdgeKind.SAME_PART, 1.0))
    edges += [
        make_edge(0, 3, EdgeKind.KINEMATIC, math.exp(-0.5)),
        make_edge(1, 4, EdgeKind.KINEMATIC, 0.9),
        make_edge(0, 4, EdgeKind.KINEMATIC, 0.2),
        make_edge(0, 5, EdgeKind.KINEMATIC, 0.7),
        make_edge(1, 6, EdgeKind.KINEMATIC, 0.4),
        make_edge(3, 6, EdgeKind.OVERLAP, 0.6),
        make_edge(4, 5, EdgeKind.OVERLAP, 0.3),
    ]
    return CandidacyGraph(vs, edges, parts=(T, H, A))
