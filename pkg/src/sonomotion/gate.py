"""Per-joint trigger gating: speed threshold plus sustain debounce.

A joint plays only once its velocity has been at or above the threshold
(default 0.05 rad/s) continuously for the debounce window (default
0.04 s). The boundary is closed on both counts: a sample exactly at the
threshold counts as above, and the window is satisfied at the first
sample whose elapsed time reaches the debounce. Debounce is measured in
elapsed stream time, not sample count, so jittery sampling cannot
shorten or stretch it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable

from .joints import JOINT_ORDER, JointId
from .telemetry import TelemetryFrame

# Absorbs float representation noise in elapsed-time comparisons.
_ELAPSED_EPS = 1e-9


@dataclass(frozen=True)
class GateConfig:
    threshold: float = 0.05  # rad/s
    debounce: float = 0.04  # s above threshold before Trigger
    release_debounce: float = 0.0  # s below threshold before Release

    def __post_init__(self):
        if self.threshold <= 0:
            raise ValueError("gate threshold must be > 0")
        if self.debounce < 0 or self.release_debounce < 0:
            raise ValueError("gate debounce values must be >= 0")


class GatePhase(Enum):
    IDLE = "idle"
    PENDING = "pending"
    ACTIVE = "active"


class EventKind(Enum):
    TRIGGER = "trigger"
    RELEASE = "release"


@dataclass(frozen=True)
class GateEvent:
    joint: JointId
    kind: EventKind
    t: float


@dataclass(frozen=True)
class GateState:
    phase: GatePhase = GatePhase.IDLE
    entered_at: float = 0.0  # time the current PENDING run began
    below_since: float | None = None  # first below-threshold time while ACTIVE
    last_transition: float = 0.0


def gate_step(
    state: GateState, velocity: float, t: float, cfg: GateConfig, joint: JointId
) -> tuple[GateState, GateEvent | None]:
    """Advance one sample. Caller must present strictly increasing t."""
    if not math.isfinite(velocity):
        raise ValueError(f"non-finite velocity {velocity!r} for {joint} at t={t}")
    above = velocity >= cfg.threshold

    if state.phase is GatePhase.IDLE:
        if not above:
            return state, None
        state = GateState(
            phase=GatePhase.PENDING, entered_at=t, last_transition=t
        )
        # Fall through: a zero debounce triggers on the entering sample.

    if state.phase is GatePhase.PENDING:
        if not above:
            return GateState(phase=GatePhase.IDLE, last_transition=t), None
        if t - state.entered_at >= cfg.debounce - _ELAPSED_EPS:
            event = GateEvent(joint=joint, kind=EventKind.TRIGGER, t=t)
            return GateState(phase=GatePhase.ACTIVE, last_transition=t), event
        return state, None

    # ACTIVE
    if above:
        if state.below_since is not None:
            return replace(state, below_since=None), None
        return state, None
    if cfg.release_debounce <= 0:
        event = GateEvent(joint=joint, kind=EventKind.RELEASE, t=t)
        return GateState(phase=GatePhase.IDLE, last_transition=t), event
    below_since = state.below_since if state.below_since is not None else t
    if t - below_since >= cfg.release_debounce - _ELAPSED_EPS:
        event = GateEvent(joint=joint, kind=EventKind.RELEASE, t=t)
        return GateState(phase=GatePhase.IDLE, last_transition=t), event
    return replace(state, below_since=below_since), None


class GateBank:
    """Eight independent machines stepped on a shared frame clock.

    Joints missing from a frame hold their previous velocity, so sparse
    publishers cannot cause spurious releases.
    """

    def __init__(self, configs: dict[JointId, GateConfig] | None = None):
        configs = configs or {}
        default = GateConfig()
        self._configs = {j: configs.get(j, default) for j in JOINT_ORDER}
        self._states = {j: GateState() for j in JOINT_ORDER}
        self._held = {j: 0.0 for j in JOINT_ORDER}

    def config_for(self, joint: JointId) -> GateConfig:
        return self._configs[joint]

    def is_active(self, joint: JointId) -> bool:
        return self._states[joint].phase is GatePhase.ACTIVE

    def active_joints(self) -> list[JointId]:
        return [j for j in JOINT_ORDER if self.is_active(j)]

    def step_frame(self, frame: TelemetryFrame) -> list[GateEvent]:
        """Step every joint at this frame time; events in canonical order."""
        self._held.update(frame.velocities)
        events: list[GateEvent] = []
        for joint in JOINT_ORDER:
            state, event = gate_step(
                self._states[joint],
                self._held[joint],
                frame.t,
                self._configs[joint],
                joint,
            )
            self._states[joint] = state
            if event is not None:
                events.append(event)
        return events


def gate_run(
    frames: Iterable[TelemetryFrame],
    cfg: GateConfig | None = None,
    per_joint: dict[JointId, GateConfig] | None = None,
) -> dict[JointId, list[GateEvent]]:
    """Fold the state machine over a whole stream, per joint."""
    configs = {j: cfg for j in JOINT_ORDER} if cfg is not None else {}
    if per_joint:
        configs.update(per_joint)
    bank = GateBank(configs)
    out: dict[JointId, list[GateEvent]] = {j: [] for j in JOINT_ORDER}
    for frame in frames:
        for event in bank.step_frame(frame):
            out[event.joint].append(event)
    return out
