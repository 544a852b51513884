"""Part proposals, templates and scenes, plus their line-delimited JSON form."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .features import Descriptor
from .geometry import OrientedRect, rotate, wrap_angle
from .parts import DEFAULT_JOINT_OFFSETS, PARTS, Joint, PartType, parse_part

DEFAULT_PERSON_HEIGHT = 175.0


class InvalidProposalError(ValueError):
    pass


class TemplateIncompleteError(ValueError):
    def __init__(self, part: PartType):
        super().__init__(f"template has no proposal for part {part.value!r}")
        self.part = part


@dataclass(frozen=True, eq=False)
class PartProposal:
    """One detected body-part hypothesis: part type, center, orientation, scale."""

    part: PartType
    x: float
    y: float
    theta: float
    s: float
    score: float = 0.0
    descriptor: Descriptor | None = None
    source_id: str = ""

    def __post_init__(self):
        if not (self.s > 0) or not math.isfinite(self.s):
            raise InvalidProposalError(f"proposal scale must be positive, got {self.s!r}")
        object.__setattr__(self, "part", parse_part(self.part))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    def moved(self, **changes) -> PartProposal:
        return replace(self, **changes)


def rect_of(p: PartProposal, person_height: float = DEFAULT_PERSON_HEIGHT) -> OrientedRect:
    """Oriented rectangle of a proposal: base size times scale times person height."""
    if not p.s > 0:
        raise InvalidProposalError("non-positive scale")
    bw, bh = p.part.base_size
    k = p.s * person_height
    return OrientedRect.from_center(p.x, p.y, p.theta, bw * k, bh * k)


def joint_transform(
    p: PartProposal,
    joint: Joint,
    person_height: float = DEFAULT_PERSON_HEIGHT,
    offsets: Mapping[Joint, tuple] = DEFAULT_JOINT_OFFSETS,
) -> tuple[float, float, float, float]:
    """Map a proposal into the coordinate system of one of its joints.

    Returns (anchor_x, anchor_y, theta, s) where the anchor is the part
    center plus the part-local joint offset rotated by theta and scaled.
    """
    parent, child = joint
    if p.part is parent:
        off = offsets[joint][0]
    elif p.part is child:
        off = offsets[joint][1]
    else:
        raise ValueError(f"joint {parent.value}-{child.value} is not incident to {p.part.value}")
    k = p.s * person_height
    du, dv = rotate(off[0] * k, off[1] * k, p.theta)
    return (p.x + du, p.y + dv, p.theta, p.s)


@dataclass(frozen=True, eq=False)
class Template:
    """Per-part lists of alternative reference proposals."""

    parts: Mapping[PartType, tuple[PartProposal, ...]]
    person_height: float = DEFAULT_PERSON_HEIGHT

    def __post_init__(self):
        clean = {}
        for part, props in self.parts.items():
            part = parse_part(part)
            props = tuple(props)
            for p in props:
                if p.part is not part:
                    raise ValueError(f"{p.part.value} proposal filed under {part.value}")
            clean[part] = props
        object.__setattr__(self, "parts", clean)

    def __getitem__(self, part: PartType) -> tuple[PartProposal, ...]:
        return self.parts.get(part, ())

    def check_complete(self) -> None:
        for part in PARTS:
            if not self.parts.get(part):
                raise TemplateIncompleteError(part)


@dataclass(frozen=True, eq=False)
class Scene:
    """Target proposal set of a scene shot, grouped by part."""

    proposals: Mapping[PartType, tuple[PartProposal, ...]]
    image_size: tuple[int, int]
    person_height: float = DEFAULT_PERSON_HEIGHT
    raster: object | None = field(default=None, repr=False)

    def __post_init__(self):
        grouped = {p: [] for p in PARTS}
        for part, props in self.proposals.items():
            for q in props:
                if q.part is not parse_part(part):
                    raise ValueError(f"{q.part.value} proposal filed under {part}")
                if not (0 <= q.x <= self.image_size[0] and 0 <= q.y <= self.image_size[1]):
                    raise InvalidProposalError(f"proposal center ({q.x}, {q.y}) outside the image")
                grouped[q.part].append(q)
        object.__setattr__(self, "proposals", {p: tuple(v) for p, v in grouped.items()})

    @classmethod
    def from_list(cls, props: Iterable[PartProposal], image_size, **kw) -> Scene:
        return cls(group_by_part(props), image_size, **kw)

    def __getitem__(self, part: PartType) -> tuple[PartProposal, ...]:
        return self.proposals.get(part, ())

    def all_proposals(self) -> list[PartProposal]:
        return [q for part in PARTS for q in self.proposals[part]]

    def __len__(self) -> int:
        return sum(len(v) for v in self.proposals.values())


def group_by_part(props: Iterable[PartProposal]) -> dict[PartType, list[PartProposal]]:
    grouped: dict[PartType, list[PartProposal]] = {p: [] for p in PARTS}
    for q in props:
        grouped[q.part].append(q)
    return grouped


# ---- serialization ------------------------------------------------------


def proposal_to_record(p: PartProposal) -> dict:
    rec = {
        "part": p.part.value,
        "x": p.x,
        "y": p.y,
        "theta": p.theta,
        "s": p.s,
        "score": p.score,
        "source_id": p.source_id,
    }
    if p.descriptor is not None:
        rec["descriptor"] = [float(v) for v in p.descriptor.hsv_hist]
        if p.descriptor.aux is not None:
            rec["aux"] = p.descriptor.aux
    return rec


def proposal_from_record(rec: Mapping) -> PartProposal:
    try:
        desc = None
        if rec.get("descriptor") is not None:
            desc = Descriptor(np.asarray(rec["descriptor"], dtype=float), aux=rec.get("aux"))
        return PartProposal(
            part=parse_part(rec["part"]),
            x=float(rec["x"]),
            y=float(rec["y"]),
            theta=float(rec["theta"]),
            s=float(rec["s"]),
            score=float(rec.get("score", 0.0)),
            descriptor=desc,
            source_id=str(rec.get("source_id", "")),
        )
    except KeyError as exc:
        raise InvalidProposalError(f"proposal record missing field {exc}") from None


def write_proposals(path: str | Path, props: Iterable[PartProposal]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in props:
            fh.write(json.dumps(proposal_to_record(p), sort_keys=True) + "\n")


def read_proposals(path: str | Path) -> list[PartProposal]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidProposalError(f"{path}:{lineno}: {exc}") from None
            out.append(proposal_from_record(rec))
    return out


def write_template(path: str | Path, t: Template) -> None:
    doc = {
        "person_height": t.person_height,
        "parts": {part.value: [proposal_to_record(p) for p in t[part]] for part in PARTS if t[part]},
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1), encoding="utf-8")


def read_template(path: str | Path) -> Template:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    parts = {parse_part(k): tuple(proposal_from_record(r) for r in v) for k, v in doc["parts"].items()}
    return Template(parts, person_height=float(doc.get("person_height", DEFAULT_PERSON_HEIGHT)))
