"""Note names, equal temperament, and angle-to-scale quantization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

NOTE_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")

_FLAT_ALIASES = {"DB": 1, "EB": 3, "GB": 6, "AB": 8, "BB": 10}

A4_MIDI = 69
A4_HZ = 440.0

MAJOR_SCALE = (0, 2, 4, 5, 7, 9, 11)


def parse_note(note: str) -> int:
    """Note name+octave ("C#4", "Bb2") to MIDI number, C4 = 60."""
    text = note.strip()
    head = text.rstrip("-0123456789")
    tail = text[len(head):]
    name = head.strip().upper()
    if name in _FLAT_ALIASES:
        semitone = _FLAT_ALIASES[name]
    elif name in NOTE_NAMES:
        semitone = NOTE_NAMES.index(name)
    else:
        raise ValueError(f"unknown note name {note!r}")
    try:
        octave = int(tail)
    except ValueError:
        raise ValueError(f"note {note!r} is missing its octave") from None
    if not 0 <= octave <= 8:
        raise ValueError(f"octave out of range in {note!r} (expected 0..8)")
    return 12 * (octave + 1) + semitone


def midi_to_name(midi: int) -> str:
    if not 0 <= midi <= 127:
        raise ValueError(f"MIDI note out of range: {midi}")
    return f"{NOTE_NAMES[midi % 12]}{midi // 12 - 1}"


def midi_to_frequency(midi: int) -> float:
    return A4_HZ * 2.0 ** ((midi - A4_MIDI) / 12.0)


def note_to_frequency(note: str) -> float:
    """12-tone equal temperament, A4 = 440 Hz."""
    return midi_to_frequency(parse_note(note))


@dataclass(frozen=True)
class ScaleMap:
    """Quantizes a joint angle onto a scale.

    Each `resolution` degrees away from `reference_angle` moves one
    scale degree away from the root, walking the pattern across octaves
    in both directions.
    """

    root: str = "C4"
    pattern: tuple[int, ...] = MAJOR_SCALE
    reference_angle: float = 80.0
    resolution: float = 10.0

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("scale resolution must be > 0")
        if not self.pattern:
            raise ValueError("scale pattern must be non-empty")
        parse_note(self.root)  # validate eagerly

    def step_of(self, angle: float) -> int:
        """Nearest scale step for an angle; ties round toward +inf."""
        if not math.isfinite(angle):
            raise ValueError(f"non-finite angle {angle!r}")
        return math.floor((angle - self.reference_angle) / self.resolution + 0.5)

    def step_to_midi(self, step: int) -> int:
        octave_shift, degree = divmod(step, len(self.pattern))
        return parse_note(self.root) + 12 * octave_shift + self.pattern[degree]


def angle_to_note(angle: float, scale: ScaleMap) -> str:
    """Joint angle in degrees to the nearest note on the scale."""
    return midi_to_name(scale.step_to_midi(scale.step_of(angle)))
