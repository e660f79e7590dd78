"""Gate events to MIDI: live event lines and Standard MIDI Files.

Each registered signal owns one MIDI channel; the registry refuses a
17th signal, mirroring the 16-voice ceiling of the original external
workstation. Triggers become NoteOn (fixed velocity 100); releases
become NoteOff delayed by the signal's fade duration so an external
synth's tail window matches the on-device fade. If a retrigger lands
before the delayed NoteOff would fire, the NoteOff is pulled forward to
the retrigger instant to keep every (channel, pitch) stream balanced.

SMF output is format 0 at 480 ticks per quarter with a fixed 120 BPM
tempo; the music has no meter, so tempo is only a timestamp carrier
(one second = 960 ticks).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .envelope import FadeClass, fade_duration
from .errors import CapacityError, ConfigError, MappingError
from .gate import EventKind, GateEvent
from .joints import JointId
from .notes import parse_note
from .soundscape import SoundscapeConfig

TICKS_PER_QUARTER = 480
TEMPO_US_PER_QUARTER = 500_000  # 120 BPM
TICKS_PER_SECOND = 960
NOTE_ON_VELOCITY = 100

CHANNEL_CAPACITY = 16


class MidiKind(Enum):
    NOTE_ON = "on"
    NOTE_OFF = "off"


@dataclass(frozen=True)
class MidiEvent:
    t: float
    kind: MidiKind
    channel: int
    pitch: int
    velocity: int

    def __post_init__(self):
        if not 0 <= self.channel < CHANNEL_CAPACITY:
            raise ValueError(f"channel out of range: {self.channel}")
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch out of range: {self.pitch}")
        if not 0 <= self.velocity <= 127:
            raise ValueError(f"velocity out of range: {self.velocity}")


def event_to_line(event: MidiEvent) -> str:
    """Live wire format: one JSON object per line."""
    return json.dumps(
        {
            "t": event.t,
            "kind": event.kind.value,
            "ch": event.channel,
            "pitch": event.pitch,
            "vel": event.velocity,
        },
        separators=(",", ":"),
    )


class SignalRegistry:
    """Ordered signal -> channel table, capacity 16."""

    def __init__(self):
        self._channels: dict[str, int] = {}

    def register(self, name: str) -> int:
        if name in self._channels:
            raise ConfigError(f"signal {name!r} already registered")
        if len(self._channels) >= CHANNEL_CAPACITY:
            raise CapacityError(
                f"cannot register {name!r}: all {CHANNEL_CAPACITY} channels in use"
            )
        used = set(self._channels.values())
        channel = next(c for c in range(CHANNEL_CAPACITY) if c not in used)
        self._channels[name] = channel
        return channel

    def channel_of(self, name: str) -> int:
        try:
            return self._channels[name]
        except KeyError:
            raise MappingError(f"signal {name!r} is not registered") from None

    def __len__(self) -> int:
        return len(self._channels)

    def __contains__(self, name: str) -> bool:
        return name in self._channels


def build_registry(cfg: SoundscapeConfig) -> SignalRegistry:
    registry = SignalRegistry()
    for signal in cfg.assignments:
        registry.register(signal)
    return registry


def events_to_midi(
    gate_events: dict[JointId, list[GateEvent]],
    cfg: SoundscapeConfig,
    fades: dict[str, FadeClass],
    registry: SignalRegistry | None = None,
) -> list[MidiEvent]:
    """Convert per-joint gate events into a time-ordered MIDI stream."""
    registry = registry if registry is not None else build_registry(cfg)
    out: list[MidiEvent] = []
    for joint, events in gate_events.items():
        signal = joint.value if isinstance(joint, JointId) else str(joint)
        if not events:
            continue
        channel = registry.channel_of(signal)
        pitch = parse_note(cfg.assignment_for(signal).pitch)
        fade = fades[signal]
        tail = fade_duration(fade)
        pending_off: float | None = None
        for event in events:
            if event.kind is EventKind.TRIGGER:
                if pending_off is not None:
                    # Retrigger before the delayed off: close the note now.
                    off_t = min(pending_off, event.t)
                    out.append(MidiEvent(off_t, MidiKind.NOTE_OFF, channel, pitch, 0))
                pending_off = event.t + tail  # covers an unpaired trailing trigger
                out.append(
                    MidiEvent(event.t, MidiKind.NOTE_ON, channel, pitch, NOTE_ON_VELOCITY)
                )
            else:
                pending_off = event.t + tail
        if pending_off is not None:
            out.append(MidiEvent(pending_off, MidiKind.NOTE_OFF, channel, pitch, 0))
    # Offs sort ahead of ons at equal times so retriggers stay balanced.
    out.sort(key=lambda e: (e.t, 0 if e.kind is MidiKind.NOTE_OFF else 1))
    return out


def seconds_to_ticks(t: float) -> int:
    return round(t * TICKS_PER_SECOND)


def _encode_varlen(value: int) -> bytes:
    if value < 0:
        raise ValueError(f"cannot encode negative delta {value}")
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(chunks))


def smf_bytes(events: Iterable[MidiEvent]) -> bytes:
    """Serialize to a format-0 SMF; events must be time-ordered."""
    track = bytearray()
    track += _encode_varlen(0)
    track += bytes([0xFF, 0x51, 0x03]) + TEMPO_US_PER_QUARTER.to_bytes(3, "big")
    cursor = 0
    last_tick = -1
    for event in events:
        tick = seconds_to_ticks(event.t)
        if tick < last_tick:
            raise ValueError(f"events not time-ordered at t={event.t}")
        last_tick = tick
        track += _encode_varlen(tick - cursor)
        cursor = tick
        status = (0x90 if event.kind is MidiKind.NOTE_ON else 0x80) | event.channel
        track += bytes([status, event.pitch, event.velocity])
    track += _encode_varlen(0)
    track += bytes([0xFF, 0x2F, 0x00])
    header = struct.pack(">4sIHHH", b"MThd", 6, 0, 1, TICKS_PER_QUARTER)
    return header + struct.pack(">4sI", b"MTrk", len(track)) + bytes(track)


def write_smf(events: Iterable[MidiEvent], path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(smf_bytes(events))


class _TrackParser:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def varlen(self) -> int:
        value = 0
        while True:
            byte = self.data[self.pos]
            self.pos += 1
            value = (value << 7) | (byte & 0x7F)
            if not byte & 0x80:
                return value

    def take(self, n: int) -> bytes:
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def done(self) -> bool:
        return self.pos >= len(self.data)


def parse_smf(data: bytes) -> list[MidiEvent]:
    """Parse note events back out of an SMF (formats 0 and 1)."""
    if data[:4] != b"MThd":
        raise ValueError("not a standard MIDI file")
    header_len, fmt, ntrks, division = struct.unpack(">IHHH", data[4:14])
    if division & 0x8000:
        raise ValueError("SMPTE division is not supported")
    pos = 8 + header_len
    events: list[MidiEvent] = []
    for _ in range(ntrks):
        if data[pos : pos + 4] != b"MTrk":
            raise ValueError("missing track chunk")
        (length,) = struct.unpack(">I", data[pos + 4 : pos + 8])
        track = _TrackParser(data[pos + 8 : pos + 8 + length])
        pos += 8 + length
        tick = 0
        seconds = 0.0
        tempo = TEMPO_US_PER_QUARTER
        status = 0
        while not track.done():
            delta = track.varlen()
            tick += delta
            seconds += delta * tempo / 1_000_000 / division
            byte = track.data[track.pos]
            if byte & 0x80:
                status = byte
                track.pos += 1
            if status == 0xFF:
                meta_type = track.take(1)[0]
                meta_len = track.varlen()
                body = track.take(meta_len)
                if meta_type == 0x51:
                    tempo = int.from_bytes(body, "big")
                continue
            if status in (0xF0, 0xF7):
                track.take(track.varlen())
                continue
            kind = status & 0xF0
            channel = status & 0x0F
            if kind in (0x80, 0x90):
                pitch, velocity = track.take(2)
                on = kind == 0x90 and velocity > 0
                events.append(
                    MidiEvent(
                        t=seconds,
                        kind=MidiKind.NOTE_ON if on else MidiKind.NOTE_OFF,
                        channel=channel,
                        pitch=pitch,
                        velocity=velocity if on else 0,
                    )
                )
            elif kind in (0xA0, 0xB0, 0xE0):
                track.take(2)
            elif kind in (0xC0, 0xD0):
                track.take(1)
            else:
                raise ValueError(f"unexpected status byte 0x{status:02x}")
    events.sort(key=lambda e: (e.t, 0 if e.kind is MidiKind.NOTE_OFF else 1))
    return events


def read_smf(path: str) -> list[MidiEvent]:
    with open(path, "rb") as fh:
        return parse_smf(fh.read())
