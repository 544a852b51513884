"""Joint-frame Gaussian kinematics between adjacent body parts."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .geometry import rotate, wrap_angle
from .model import DEFAULT_PERSON_HEIGHT, PartProposal, joint_transform
from .parts import (
    DEFAULT_JOINT_OFFSETS,
    JOINTS,
    Joint,
    PartType,
    joint_between,
    parse_part,
)

COV_EPS = 1e-6


class UnderdeterminedModelError(ValueError):
    pass


def joint_displacement(
    parent: PartProposal,
    child: PartProposal,
    joint: Joint,
    person_height: float = DEFAULT_PERSON_HEIGHT,
    offsets: Mapping[Joint, tuple] = DEFAULT_JOINT_OFFSETS,
) -> np.ndarray:
    """Raw (du, dv, dtheta, dlog_s) between the two joint anchors.

    Positions are expressed in the parent's frame and divided by the parent's
    pixel height, so the result is invariant to translation and rotation of
    the whole pair.
    """
    ax, ay, at, as_ = joint_transform(parent, joint, person_height, offsets)
    bx, by, bt, bs = joint_transform(child, joint, person_height, offsets)
    du, dv = rotate(ax - bx, ay - by, -at)
    k = as_ * person_height
    return np.array([du / k, dv / k, wrap_angle(at - bt), math.log(as_) - math.log(bs)])


@dataclass
class KinematicsModel:
    """Per-joint offsets plus a zero-mean Gaussian over joint displacements.

    ``mean`` holds the average raw displacement seen in training; residuals
    are measured from it so the fitted Gaussian is zero-mean.
    """

    cov: dict[Joint, np.ndarray]
    mean: dict[Joint, np.ndarray] = field(default_factory=dict)
    offsets: Mapping[Joint, tuple] = field(default_factory=lambda: dict(DEFAULT_JOINT_OFFSETS))

    def __post_init__(self):
        self._prec = {}
        self.log_norm = {}
        for joint, cov in self.cov.items():
            cov = np.asarray(cov, dtype=float)
            try:
                chol = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise ValueError(f"covariance for joint {joint[0].value}-{joint[1].value} is not positive definite") from None
            self.cov[joint] = cov
            self._prec[joint] = np.linalg.inv(cov)
            # log density at the mode; not needed for mode-normalized probabilities
            self.log_norm[joint] = -0.5 * cov.shape[0] * math.log(2 * math.pi) - float(np.log(np.diag(chol)).sum())
            self.mean.setdefault(joint, np.zeros(4))

    @classmethod
    def isotropic(cls, sigmas=(0.03, 0.03, 0.2, 0.05), offsets=DEFAULT_JOINT_OFFSETS) -> KinematicsModel:
        cov = np.diag(np.square(np.asarray(sigmas, dtype=float)))
        return cls({j: cov.copy() for j in JOINTS}, offsets=dict(offsets))

    def residual(self, a: PartProposal, b: PartProposal, person_height: float = DEFAULT_PERSON_HEIGHT) -> tuple[Joint, np.ndarray]:
        joint = joint_between(a.part, b.part)
        if joint is None:
            raise ValueError(f"{a.part.value} and {b.part.value} are not kinematically adjacent")
        parent, child = (a, b) if a.part is joint[0] else (b, a)
        r = joint_displacement(parent, child, joint, person_height, self.offsets) - self.mean[joint]
        r[2] = wrap_angle(r[2])
        return joint, r

    def mahalanobis_sq(self, a: PartProposal, b: PartProposal, person_height: float = DEFAULT_PERSON_HEIGHT) -> float:
        joint, r = self.residual(a, b, person_height)
        return float(r @ self._prec[joint] @ r)


def fit_kinematics(
    annotations: Sequence[Mapping[PartType, PartProposal]],
    person_height: float = DEFAULT_PERSON_HEIGHT,
    offsets: Mapping[Joint, tuple] = DEFAULT_JOINT_OFFSETS,
    eps: float = COV_EPS,
) -> KinematicsModel:
    """Fit per-joint mean displacement and covariance (MLE) from annotated bodies."""
    if len(annotations) < 2:
        raise UnderdeterminedModelError("at least two annotated configurations are required")
    means, covs = {}, {}
    for joint in JOINTS:
        parent, child = joint
        samples = [
            joint_displacement(ann[parent], ann[child], joint, person_height, offsets)
            for ann in annotations
            if parent in ann and child in ann
        ]
        if len(samples) < 2:
            raise UnderdeterminedModelError(f"joint {parent.value}-{child.value} observed fewer than twice")
        x = np.asarray(samples)
        mu = x.mean(axis=0)
        d = x - mu
        d[:, 2] = [wrap_angle(t) for t in d[:, 2]]
        means[joint] = mu
        covs[joint] = d.T @ d / len(x) + eps * np.eye(4)
    return KinematicsModel(covs, means, dict(offsets))


def kinematic_logprob(a, b, km: KinematicsModel, person_height: float = DEFAULT_PERSON_HEIGHT) -> float:
    a = getattr(a, "target", a)
    b = getattr(b, "target", b)
    return -0.5 * km.mahalanobis_sq(a, b, person_height)


def kinematic_prob(a, b, km: KinematicsModel, person_height: float = DEFAULT_PERSON_HEIGHT) -> float:
    """Gaussian density ratio to its mode; 1 at zero displacement.

    Accepts target proposals or graph vertices (their targets are used).
    """
    return math.exp(kinematic_logprob(a, b, km, person_height))


def _joint_key(joint: Joint) -> str:
    return f"{joint[0].value}-{joint[1].value}"


def write_kinematics(path: str | Path, km: KinematicsModel) -> None:
    """JSON keyed by "parent-child" with mean, covariance and joint offsets."""
    doc = {
        _joint_key(j): {
            "mean": [float(v) for v in km.mean[j]],
            "cov": [[float(v) for v in row] for row in km.cov[j]],
            "offsets": [list(o) for o in km.offsets[j]],
        }
        for j in JOINTS
        if j in km.cov
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1), encoding="utf-8")


def read_kinematics(path: str | Path) -> KinematicsModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    cov, mean, offsets = {}, {}, {}
    for key, rec in doc.items():
        parent, child = (parse_part(n) for n in key.split("-"))
        joint = (parent, child)
        cov[joint] = np.asarray(rec["cov"], dtype=float)
        mean[joint] = np.asarray(rec["mean"], dtype=float)
        offsets[joint] = tuple(tuple(float(v) for v in o) for o in rec["offsets"])
    return KinematicsModel(cov, mean, offsets)
