"""Body part vocabulary: the ten part slots, their kinematic tree and symmetry."""

from __future__ import annotations

from enum import Enum


class PartType(str, Enum):
    HEAD = "head"
    TORSO = "torso"
    LEFT_UPPER_ARM = "left_upper_arm"
    RIGHT_UPPER_ARM = "right_upper_arm"
    LEFT_FOREARM = "left_forearm"
    RIGHT_FOREARM = "right_forearm"
    LEFT_THIGH = "left_thigh"
    RIGHT_THIGH = "right_thigh"
    LEFT_CALF = "left_calf"
    RIGHT_CALF = "right_calf"

    @property
    def index(self) -> int:
        return _INDEX[self]

    @property
    def symmetry_partner(self) -> PartType | None:
        return _PARTNER.get(self)

    @property
    def kinematic_parent(self) -> PartType | None:
        return _PARENT.get(self)

    @property
    def strip_index(self) -> int:
        return _STRIP[self]

    @property
    def base_size(self) -> tuple[float, float]:
        """(width, height) as fractions of the person height."""
        return BASE_SIZE[self]


PARTS: tuple[PartType, ...] = tuple(PartType)
_INDEX = {p: i for i, p in enumerate(PARTS)}

P = PartType

_PARTNER = {
    P.LEFT_UPPER_ARM: P.RIGHT_UPPER_ARM,
    P.RIGHT_UPPER_ARM: P.LEFT_UPPER_ARM,
    P.LEFT_FOREARM: P.RIGHT_FOREARM,
    P.RIGHT_FOREARM: P.LEFT_FOREARM,
    P.LEFT_THIGH: P.RIGHT_THIGH,
    P.RIGHT_THIGH: P.LEFT_THIGH,
    P.LEFT_CALF: P.RIGHT_CALF,
    P.RIGHT_CALF: P.LEFT_CALF,
}

_PARENT = {
    P.HEAD: P.TORSO,
    P.LEFT_UPPER_ARM: P.TORSO,
    P.RIGHT_UPPER_ARM: P.TORSO,
    P.LEFT_FOREARM: P.LEFT_UPPER_ARM,
    P.RIGHT_FOREARM: P.RIGHT_UPPER_ARM,
    P.LEFT_THIGH: P.TORSO,
    P.RIGHT_THIGH: P.TORSO,
    P.LEFT_CALF: P.LEFT_THIGH,
    P.RIGHT_CALF: P.RIGHT_THIGH,
}

_STRIP = {
    P.HEAD: 0,
    P.TORSO: 1,
    P.LEFT_UPPER_ARM: 1,
    P.RIGHT_UPPER_ARM: 1,
    P.LEFT_FOREARM: 1,
    P.RIGHT_FOREARM: 1,
    P.LEFT_THIGH: 2,
    P.RIGHT_THIGH: 2,
    P.LEFT_CALF: 3,
    P.RIGHT_CALF: 3,
}

# Plausible anthropometry; configuration rather than a measured constant.
BASE_SIZE: dict[PartType, tuple[float, float]] = {
    P.HEAD: (0.16, 0.16),
    P.TORSO: (0.30, 0.35),
    P.LEFT_UPPER_ARM: (0.10, 0.22),
    P.RIGHT_UPPER_ARM: (0.10, 0.22),
    P.LEFT_FOREARM: (0.09, 0.22),
    P.RIGHT_FOREARM: (0.09, 0.22),
    P.LEFT_THIGH: (0.13, 0.28),
    P.RIGHT_THIGH: (0.13, 0.28),
    P.LEFT_CALF: (0.11, 0.28),
    P.RIGHT_CALF: (0.11, 0.28),
}

Joint = tuple[PartType, PartType]

# (parent, child) pairs of the kinematic tree, rooted at the torso.
JOINTS: tuple[Joint, ...] = tuple((parent, child) for child, parent in _PARENT.items())

SYMMETRY_PAIRS: tuple[tuple[PartType, PartType], ...] = (
    (P.LEFT_UPPER_ARM, P.RIGHT_UPPER_ARM),
    (P.LEFT_FOREARM, P.RIGHT_FOREARM),
    (P.LEFT_THIGH, P.RIGHT_THIGH),
    (P.LEFT_CALF, P.RIGHT_CALF),
)

# Joint anchors in each part's local frame (x along width, y along height,
# image y pointing down), fractions of person height at unit scale.
# Canonical upright pose: every part has theta = 0.
DEFAULT_JOINT_OFFSETS: dict[Joint, tuple[tuple[float, float], tuple[float, float]]] = {
    (P.TORSO, P.HEAD): ((0.0, -0.175), (0.0, 0.09)),
    (P.TORSO, P.LEFT_UPPER_ARM): ((-0.21, -0.17), (0.0, -0.11)),
    (P.TORSO, P.RIGHT_UPPER_ARM): ((0.21, -0.17), (0.0, -0.11)),
    (P.LEFT_UPPER_ARM, P.LEFT_FOREARM): ((0.0, 0.11), (0.0, -0.12)),
    (P.RIGHT_UPPER_ARM, P.RIGHT_FOREARM): ((0.0, 0.11), (0.0, -0.12)),
    (P.TORSO, P.LEFT_THIGH): ((-0.075, 0.185), (0.0, -0.14)),
    (P.TORSO, P.RIGHT_THIGH): ((0.075, 0.185), (0.0, -0.14)),
    (P.LEFT_THIGH, P.LEFT_CALF): ((0.0, 0.14), (0.0, -0.15)),
    (P.RIGHT_THIGH, P.RIGHT_CALF): ((0.0, 0.14), (0.0, -0.15)),
}


def joint_between(a: PartType, b: PartType) -> Joint | None:
    """Return the (parent, child) joint linking two parts, if any."""
    if _PARENT.get(b) is a:
        return (a, b)
    if _PARENT.get(a) is b:
        return (b, a)
    return None


def are_symmetric(a: PartType, b: PartType) -> bool:
    return _PARTNER.get(a) is b


def parse_part(name: str | PartType) -> PartType:
    try:
        return PartType(name)
    except ValueError:
        raise ValueError(f"unknown part name {name!r}") from None
