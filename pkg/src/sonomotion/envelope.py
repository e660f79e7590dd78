"""Per-joint volume envelopes: linear fade per 40 ms tick.

While a joint's gate is active its volume is pinned to 100%. After
release the volume drops by the joint's fade rate once per tick until
it reaches 0, so the 4% class falls 100 -> 96 -> 92 ... -> 0 over 25
ticks (1.0 s). Volume is stored in integer milli-percent so every step
is exact and renders are bit-deterministic.

The speaker's loudness calibration maps percent to dB SPL between two
anchors (10% -> 65 dB, 100% -> 80 dB). Below the low anchor the SPL is
uncalibrated; the render path instead uses a linear amplitude ramp down
to silence at 0%.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .joints import JointId

MILLI = 1000  # milli-percent units per percent
FULL_VOLUME_MILLI = 100 * MILLI

DEFAULT_TICK_S = 0.04

# Paper fade classes, percent removed per tick.
FADE_FAST = 4.0
FADE_MEDIUM = 3.0
FADE_SLOW = 1.5

DEFAULT_FADE_RATES: dict[JointId, float] = {
    JointId.BASE: FADE_FAST,
    JointId.TORSO: FADE_FAST,
    JointId.SHOULDER: FADE_FAST,
    JointId.ELBOW: FADE_FAST,
    JointId.GRIPPER: FADE_FAST,
    JointId.WRIST: FADE_MEDIUM,
    JointId.HAND: FADE_SLOW,
    JointId.HEAD: FADE_SLOW,
}


def _rate_to_milli(rate: float) -> int:
    milli = round(rate * MILLI)
    if abs(rate * MILLI - milli) > 1e-6:
        raise ValueError(
            f"fade rate {rate} has more than 3 decimal places; "
            "volume arithmetic is exact in milli-percent"
        )
    return milli


@dataclass(frozen=True)
class FadeClass:
    """Linear fade: `rate` percentage points removed every `tick` seconds."""

    rate: float
    tick: float = DEFAULT_TICK_S

    def __post_init__(self):
        if not 0 < self.rate <= 100:
            raise ValueError(f"fade rate must be in (0, 100], got {self.rate}")
        if self.tick <= 0:
            raise ValueError(f"fade tick must be > 0, got {self.tick}")
        _rate_to_milli(self.rate)  # validate exactness up front

    @property
    def rate_milli(self) -> int:
        return _rate_to_milli(self.rate)


@dataclass(frozen=True)
class Envelope:
    fade: FadeClass
    volume_milli: int = 0
    gate_active: bool = False

    def __post_init__(self):
        if not 0 <= self.volume_milli <= FULL_VOLUME_MILLI:
            raise ValueError(f"volume out of range: {self.volume_milli} milli-percent")

    @property
    def volume_percent(self) -> float:
        return self.volume_milli / MILLI


def envelope_tick(env: Envelope) -> Envelope:
    """One tick: pin to 100% while gated, otherwise fade toward 0."""
    if env.gate_active:
        return replace(env, volume_milli=FULL_VOLUME_MILLI)
    return replace(env, volume_milli=max(0, env.volume_milli - env.fade.rate_milli))


def fade_ticks(fade: FadeClass) -> int:
    """Ticks from full volume to silence after release."""
    return -(-FULL_VOLUME_MILLI // fade.rate_milli)  # ceil division


def fade_duration(fade: FadeClass) -> float:
    return fade_ticks(fade) * fade.tick


@dataclass(frozen=True)
class VolumeAnchors:
    low_percent: float = 10.0
    low_db: float = 65.0
    high_percent: float = 100.0
    high_db: float = 80.0

    def __post_init__(self):
        if not self.low_percent < self.high_percent:
            raise ValueError("anchor percents must satisfy low < high")
        if not self.low_db < self.high_db:
            raise ValueError("anchor dB values must satisfy low < high")


def percent_to_db(p: float, anchors: VolumeAnchors = VolumeAnchors()) -> float | None:
    """Speaker percent to dB SPL; None below the calibrated range."""
    if not 0 <= p <= 100:
        raise ValueError(f"percent out of range: {p}")
    if p < anchors.low_percent:
        return None
    span = anchors.high_percent - anchors.low_percent
    return anchors.low_db + (p - anchors.low_percent) * (
        anchors.high_db - anchors.low_db
    ) / span


def percent_to_gain(p: float, anchors: VolumeAnchors = VolumeAnchors()) -> float:
    """Percent to linear amplitude gain, 1.0 at 100%.

    Within the calibrated range the gain follows the dB map; below the
    low anchor it ramps linearly to 0 so the mixer stays continuous.
    """
    if not 0 <= p <= 100:
        raise ValueError(f"percent out of range: {p}")
    low_gain = 10.0 ** ((anchors.low_db - anchors.high_db) / 20.0)
    if p < anchors.low_percent:
        return (p / anchors.low_percent) * low_gain
    db = percent_to_db(p, anchors)
    assert db is not None
    return 10.0 ** ((db - anchors.high_db) / 20.0)
