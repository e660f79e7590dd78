"""Sound assignment and generation.

A soundscape pairs each signal (usually a joint) with a sound source, a
pitch, and a fade class. Sources are either WAV files or built-in synth
recipes ("synth:strings"). Two banks ship as defaults: the orchestral
bank (instrument-flavored tones, bigger joints pitched lower) and the
robotic bank (machine-like tones at the robot's own component pitches).

Also here: the legacy position-to-note mode, which replays the earliest
iteration of the feature (joint angle quantized onto a scale), and the
random scheduler, which fabricates trigger/release events with no
relationship to telemetry.
"""

from __future__ import annotations

import hashlib
import math
import random
import wave as wave_io
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .envelope import DEFAULT_FADE_RATES
from .errors import ConfigError
from .gate import EventKind, GateConfig, GateEvent, gate_run
from .joints import JOINT_ORDER, JointId
from .notes import ScaleMap, midi_to_name, parse_note
from .synth import recipe_spec, build_loop
from .telemetry import TelemetryFrame

MODE_ORCHESTRAL = "orchestral"
MODE_ROBOTIC = "robotic"
MODE_LEGACY_NOTE = "legacy_note"
MODE_RANDOM = "random"
MODES = (MODE_ORCHESTRAL, MODE_ROBOTIC, MODE_LEGACY_NOTE, MODE_RANDOM)

# Advisory pairing-count guidance; validation warns outside this band.
PAIRING_GUIDELINE = (5, 7)

RANDOM_HOLD_RANGE_S = (0.5, 3.0)
DEFAULT_RANDOM_RATE_HZ = 0.5


@dataclass(frozen=True)
class NativePitchTable:
    """Pitches of the robot's own noisy components, default octave 3."""

    notes: dict[str, str] = field(
        default_factory=lambda: {
            "spinning_sensor": "B",
            "base_fans": "E",
            "shoulder": "C#",
            "gripper": "G",
            "head_tilt": "C#",
            "base_wheels": "A",
        }
    )
    default_octave: int = 3

    def note_for(self, component: str) -> str:
        return f"{self.notes[component]}{self.default_octave}"


NATIVE_PITCHES = NativePitchTable()

# Which native component voices each joint in the robotic bank. Spare
# joints reuse the nearest mechanical neighbour.
ROBOTIC_COMPONENT_FOR_JOINT: dict[JointId, str] = {
    JointId.BASE: "base_wheels",
    JointId.TORSO: "base_fans",
    JointId.SHOULDER: "shoulder",
    JointId.ELBOW: "spinning_sensor",
    JointId.HAND: "gripper",
    JointId.WRIST: "spinning_sensor",
    JointId.GRIPPER: "gripper",
    JointId.HEAD: "head_tilt",
}

# Joints ordered by the inertia they exert, largest first. The default
# orchestral pitches rise monotonically along this list so heavier
# joints always sound lower.
INERTIA_RANK: tuple[JointId, ...] = (
    JointId.TORSO,
    JointId.BASE,
    JointId.SHOULDER,
    JointId.ELBOW,
    JointId.HEAD,
    JointId.WRIST,
    JointId.HAND,
    JointId.GRIPPER,
)

ORCHESTRAL_DEFAULTS: dict[JointId, tuple[str, str]] = {
    JointId.TORSO: ("bass", "D2"),
    JointId.BASE: ("strings", "A2"),
    JointId.SHOULDER: ("strings", "D3"),
    JointId.ELBOW: ("piano", "F#3"),
    JointId.HEAD: ("brass", "A3"),
    JointId.WRIST: ("woodwinds", "D4"),
    JointId.HAND: ("bells", "F#4"),
    JointId.GRIPPER: ("chime", "A5"),
}


@dataclass(frozen=True)
class SoundAssignment:
    sample: str  # "synth:<recipe>" or a WAV path
    pitch: str
    fade_rate: float
    loop: bool = True

    def __post_init__(self):
        parse_note(self.pitch)
        if not self.sample:
            raise ConfigError("empty sample source")


@dataclass(frozen=True)
class SoundscapeConfig:
    mode: str = MODE_ORCHESTRAL
    assignments: dict[str, SoundAssignment] = field(default_factory=dict)
    random_seed: int | None = None
    random_rates: dict[str, float] = field(default_factory=dict)
    random_hold_range: tuple[float, float] = RANDOM_HOLD_RANGE_S
    scale: ScaleMap = field(default_factory=ScaleMap)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown soundscape mode {self.mode!r}")

    def assignment_for(self, signal: str) -> SoundAssignment:
        try:
            return self.assignments[signal]
        except KeyError:
            raise ConfigError(f"no sound assignment for signal {signal!r}") from None


def _default_assignments(
    table: dict[JointId, tuple[str, str]] | None = None,
) -> dict[str, SoundAssignment]:
    out: dict[str, SoundAssignment] = {}
    for joint in JOINT_ORDER:
        if table is None:
            recipe, pitch = "motor", NATIVE_PITCHES.note_for(
                ROBOTIC_COMPONENT_FOR_JOINT[joint]
            )
        else:
            recipe, pitch = table[joint]
        out[joint.value] = SoundAssignment(
            sample=f"synth:{recipe}",
            pitch=pitch,
            fade_rate=DEFAULT_FADE_RATES[joint],
        )
    return out


def orchestral_config() -> SoundscapeConfig:
    return SoundscapeConfig(
        mode=MODE_ORCHESTRAL, assignments=_default_assignments(ORCHESTRAL_DEFAULTS)
    )


def robotic_config() -> SoundscapeConfig:
    return SoundscapeConfig(mode=MODE_ROBOTIC, assignments=_default_assignments(None))


@dataclass(frozen=True)
class BankEntry:
    buffer: np.ndarray  # float64 mono at the render rate
    loop: bool
    source: str


class SampleBank:
    def __init__(self, entries: dict[str, BankEntry], sample_rate: int):
        self.entries = entries
        self.sample_rate = sample_rate

    def __contains__(self, signal: str) -> bool:
        return signal in self.entries

    def __getitem__(self, signal: str) -> BankEntry:
        return self.entries[signal]

    def signals(self) -> list[str]:
        return list(self.entries)


def _load_wav(path: str, signal: str, sample_rate: int) -> np.ndarray:
    try:
        with wave_io.open(path, "rb") as wav:
            channels = wav.getnchannels()
            width = wav.getsampwidth()
            rate = wav.getframerate()
            raw = wav.readframes(wav.getnframes())
    except FileNotFoundError:
        raise ConfigError(f"sample for {signal!r} not found: {path}") from None
    except (wave_io.Error, EOFError) as exc:
        raise ConfigError(f"sample for {signal!r} is not valid WAV: {path} ({exc})") from None
    if width == 2:
        data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif width == 1:
        data = (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    else:
        raise ConfigError(
            f"sample for {signal!r} has unsupported width {8 * width} bits: {path}"
        )
    if channels > 1:
        data = data.reshape(-1, channels).mean(axis=1)
    if rate != sample_rate and len(data) > 1:
        duration = len(data) / rate
        target_len = max(1, round(duration * sample_rate))
        src_t = np.arange(len(data)) / rate
        dst_t = np.arange(target_len) / sample_rate
        data = np.interp(dst_t, src_t, data)
    return data


def load_bank(cfg: SoundscapeConfig, sample_rate: int) -> SampleBank:
    """Build per-signal loop buffers at the render rate."""
    if not cfg.assignments:
        raise ConfigError("soundscape has no sound assignments")
    entries: dict[str, BankEntry] = {}
    for signal, assignment in cfg.assignments.items():
        if assignment.sample.startswith("synth:"):
            name = assignment.sample.split(":", 1)[1]
            try:
                spec = recipe_spec(name, assignment.pitch)
            except KeyError as exc:
                raise ConfigError(f"signal {signal!r}: {exc.args[0]}") from None
            buffer = build_loop(spec, sample_rate)
        else:
            buffer = _load_wav(assignment.sample, signal, sample_rate)
        if buffer.size == 0:
            raise ConfigError(f"sample for {signal!r} is empty")
        entries[signal] = BankEntry(
            buffer=buffer, loop=assignment.loop, source=assignment.sample
        )
    return SampleBank(entries, sample_rate)


@dataclass(frozen=True)
class NoteEvent:
    t: float
    joint: JointId
    note: str


def legacy_note_events(
    frames: Iterable[TelemetryFrame], scale: ScaleMap | None = None
) -> Iterator[NoteEvent]:
    """Position-to-note mode: emit a note whenever a joint's quantized
    scale step changes. Angles arrive under the record's "angles" key.
    """
    scale = scale or ScaleMap()
    last_step: dict[JointId, int] = {}
    for frame in frames:
        for joint in JOINT_ORDER:
            if joint not in frame.angles:
                continue
            step = scale.step_of(frame.angles[joint])
            if last_step.get(joint) != step:
                last_step[joint] = step
                yield NoteEvent(
                    t=frame.t,
                    joint=joint,
                    note=midi_to_name(scale.step_to_midi(step)),
                )


def _signal_rng(seed: int, signal: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{signal}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def random_schedule(
    duration: float,
    cfg: SoundscapeConfig,
    rates: dict[str, float] | None = None,
) -> dict[JointId, list[GateEvent]]:
    """Movement-decoupled trigger schedule (the "random" condition).

    Per joint, trigger onsets follow a homogeneous Poisson process at
    the given rate; each trigger holds for a uniform draw from the hold
    range, cut short if the next onset arrives first. Depends only on
    (seed, rates, duration) - never on telemetry.
    """
    if duration <= 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    if cfg.random_seed is None:
        raise ConfigError("random mode requires random_seed")
    rates = rates if rates is not None else cfg.random_rates
    lo, hi = cfg.random_hold_range
    out: dict[JointId, list[GateEvent]] = {}
    for joint in JOINT_ORDER:
        rate = rates.get(joint.value, DEFAULT_RANDOM_RATE_HZ)
        if rate <= 0:
            raise ValueError(f"rate for {joint} must be > 0, got {rate}")
        rng = _signal_rng(cfg.random_seed, joint.value)
        onsets: list[float] = []
        t = rng.expovariate(rate)
        while t < duration:
            onsets.append(t)
            t += rng.expovariate(rate)
        events: list[GateEvent] = []
        for i, onset in enumerate(onsets):
            hold = rng.uniform(lo, hi)
            release = onset + hold
            if i + 1 < len(onsets):
                release = min(release, onsets[i + 1])
            events.append(GateEvent(joint=joint, kind=EventKind.TRIGGER, t=onset))
            events.append(GateEvent(joint=joint, kind=EventKind.RELEASE, t=release))
        out[joint] = events
    return out


def empirical_rates(
    frames: Iterable[TelemetryFrame], cfg: GateConfig | None = None
) -> dict[str, float]:
    """Trigger rate per joint measured from a reference stream."""
    frames = list(frames)
    if not frames:
        return {}
    span = frames[-1].t
    if span <= 0:
        return {}
    events = gate_run(frames, cfg)
    return {
        joint.value: sum(1 for e in evs if e.kind is EventKind.TRIGGER) / span
        for joint, evs in events.items()
        if evs
    }
