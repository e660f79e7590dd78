"""Joint vocabulary for the eight sonified channels.

The set is closed and the order is canonical: serialization, default
tables and per-joint iteration all follow JOINT_ORDER so output is
stable across runs.
"""

from __future__ import annotations

from enum import Enum


class JointId(str, Enum):
    BASE = "base"
    TORSO = "torso"
    SHOULDER = "shoulder"
    ELBOW = "elbow"
    HAND = "hand"
    WRIST = "wrist"
    GRIPPER = "gripper"
    HEAD = "head"

    def __str__(self) -> str:
        return self.value


JOINT_ORDER: tuple[JointId, ...] = (
    JointId.BASE,
    JointId.TORSO,
    JointId.SHOULDER,
    JointId.ELBOW,
    JointId.HAND,
    JointId.WRIST,
    JointId.GRIPPER,
    JointId.HEAD,
)

JOINT_INDEX: dict[JointId, int] = {j: i for i, j in enumerate(JOINT_ORDER)}


def joint_from_name(name: str) -> JointId:
    try:
        return JointId(name)
    except ValueError:
        raise KeyError(f"unknown joint {name!r}") from None
