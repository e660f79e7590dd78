"""Deterministic loopable tone synthesis.

Three waveform families cover the built-in banks:

  sine                  sustained additive partials, whole cycles per loop
  triangle-with-decay   struck partials under an attack/decay envelope
  filtered-noise-burst  band-filtered noise, seam-crossfaded to loop

Sustained loops stay continuous because every component completes an
integer number of cycles over the buffer; struck loops begin and end at
zero; noise loops are overlap-crossfaded at the seam. Named recipes
(strings, bass, bells, ...) are parameter presets over these families,
so a config can say "synth:strings" instead of spelling out partials.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .notes import midi_to_frequency, parse_note

WAVEFORM_SINE = "sine"
WAVEFORM_STRIKE = "triangle-with-decay"
WAVEFORM_NOISE = "filtered-noise-burst"

WAVEFORMS = (WAVEFORM_SINE, WAVEFORM_STRIKE, WAVEFORM_NOISE)

_NOISE_SEAM_S = 0.05


@dataclass(frozen=True)
class SynthSpec:
    """One synthesized loop: a waveform family plus its parameters.

    `partials` is a tuple of (ratio, detune_cycles, amplitude): `ratio`
    multiplies the fundamental, `detune_cycles` offsets the component by
    whole cycles across the loop (a slow chorus), and sustained families
    round ratio*cycles to whole numbers so the loop stays seamless.
    """

    waveform: str
    pitch: str
    loop_seconds: float = 1.0
    partials: tuple[tuple[float, int, float], ...] = ((1.0, 0, 1.0),)
    attack_shape: float = 0.02  # strike families: rise sharpness
    decay_shape: float = 3.0  # strike families: tail weight
    noise_bandwidth: float = 0.5  # noise family: band half-width, octaves
    tone_mix: float = 0.0  # noise family: blended harmonic hum

    def __post_init__(self):
        if self.waveform not in WAVEFORMS:
            raise ValueError(f"unknown waveform {self.waveform!r}")
        if self.loop_seconds <= 0:
            raise ValueError("loop_seconds must be > 0")
        parse_note(self.pitch)


def _loop_geometry(freq: float, sample_rate: int, loop_seconds: float) -> tuple[int, int]:
    """Loop length in samples and fundamental cycles fitting it exactly."""
    cycles = max(1, round(freq * loop_seconds))
    length = max(2, round(sample_rate * cycles / freq))
    return length, cycles


def _normalize(buf: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(buf))
    if peak > 0:
        buf = buf / peak
    return buf


def _strike_envelope(length: int, attack_shape: float, decay_shape: float) -> np.ndarray:
    # x^a * (1-x)^b: zero at both ends, fast rise, long tail.
    x = np.linspace(0.0, 1.0, length, endpoint=False)
    return x**attack_shape * (1.0 - x) ** decay_shape


def _seed_for(spec: SynthSpec, length: int) -> int:
    digest = hashlib.sha256(
        f"{spec.waveform}|{spec.pitch}|{length}".encode()
    ).digest()
    return int.from_bytes(digest[:8], "big")


def _sustained(spec: SynthSpec, freq: float, sample_rate: int) -> np.ndarray:
    length, cycles = _loop_geometry(freq, sample_rate, spec.loop_seconds)
    n = np.arange(length)
    buf = np.zeros(length)
    for ratio, detune, amp in spec.partials:
        component_cycles = max(1, round(cycles * ratio) + detune)
        buf += amp * np.sin(2.0 * np.pi * component_cycles * n / length)
    return _normalize(buf)


def _struck(spec: SynthSpec, freq: float, sample_rate: int) -> np.ndarray:
    length, cycles = _loop_geometry(freq, sample_rate, spec.loop_seconds)
    n = np.arange(length)
    env = _strike_envelope(length, spec.attack_shape, spec.decay_shape)
    buf = np.zeros(length)
    for ratio, detune, amp in spec.partials:
        # The envelope pins both ends to zero, so struck partials may be
        # inharmonic without breaking the loop seam.
        component_cycles = cycles * ratio + detune
        buf += amp * np.sin(2.0 * np.pi * component_cycles * n / length)
    return _normalize(buf * env)


def _bandpass_fir(freq: float, bandwidth_octaves: float, sample_rate: int) -> np.ndarray:
    low = freq * 2.0 ** (-bandwidth_octaves / 2.0)
    high = min(freq * 2.0 ** (bandwidth_octaves / 2.0), sample_rate * 0.45)
    taps = 255
    m = np.arange(taps) - (taps - 1) / 2
    def sinc_lp(cutoff: float) -> np.ndarray:
        return 2.0 * cutoff / sample_rate * np.sinc(2.0 * cutoff / sample_rate * m)
    kernel = (sinc_lp(high) - sinc_lp(low)) * np.hanning(taps)
    return kernel


def _noise(spec: SynthSpec, freq: float, sample_rate: int) -> np.ndarray:
    length, cycles = _loop_geometry(freq, sample_rate, spec.loop_seconds)
    seam = min(length // 4, max(2, round(_NOISE_SEAM_S * sample_rate)))
    rng = np.random.default_rng(_seed_for(spec, length))
    raw = rng.standard_normal(length + seam)
    shaped = np.convolve(raw, _bandpass_fir(freq, spec.noise_bandwidth, sample_rate), "same")
    buf = shaped[:length].copy()
    # Overlap-crossfade the head over the tail so wraparound is seamless.
    u = np.linspace(0.0, 1.0, seam, endpoint=False)
    buf[:seam] = buf[:seam] * u + shaped[length : length + seam] * (1.0 - u)
    if spec.tone_mix > 0:
        n = np.arange(length)
        hum = np.sin(2.0 * np.pi * cycles * n / length) + 0.4 * np.sin(
            2.0 * np.pi * 2 * cycles * n / length
        )
        buf = (1.0 - spec.tone_mix) * _normalize(buf) + spec.tone_mix * _normalize(hum)
    return _normalize(buf)


def build_loop(spec: SynthSpec, sample_rate: int) -> np.ndarray:
    """Render one loop buffer (float64, peak-normalized to 1.0)."""
    freq = midi_to_frequency(parse_note(spec.pitch))
    if spec.waveform == WAVEFORM_SINE:
        return _sustained(spec, freq, sample_rate)
    if spec.waveform == WAVEFORM_STRIKE:
        return _struck(spec, freq, sample_rate)
    return _noise(spec, freq, sample_rate)


# Named recipes: instrument-flavored presets over the three families.
# These are the "exact recipes" behind the default banks; configs refer
# to them as "synth:<name>".
RECIPES: dict[str, dict] = {
    "sine": {"waveform": WAVEFORM_SINE},
    "triangle-with-decay": {"waveform": WAVEFORM_STRIKE},
    "filtered-noise-burst": {"waveform": WAVEFORM_NOISE},
    "bass": {
        "waveform": WAVEFORM_SINE,
        "partials": ((1.0, 0, 1.0), (2.0, 0, 0.45), (3.0, 0, 0.18)),
        "loop_seconds": 1.2,
    },
    "strings": {
        "waveform": WAVEFORM_SINE,
        "partials": (
            (1.0, 0, 1.0),
            (1.0, 1, 0.55),
            (2.0, 0, 0.5),
            (2.0, -1, 0.3),
            (3.0, 0, 0.33),
            (4.0, 0, 0.25),
            (5.0, 0, 0.2),
            (6.0, 0, 0.16),
        ),
        "loop_seconds": 1.5,
    },
    "piano": {
        "waveform": WAVEFORM_STRIKE,
        "partials": (
            (1.0, 0, 1.0),
            (2.0, 0, 0.5),
            (3.0, 0, 0.3),
            (4.0, 0, 0.18),
            (5.0, 0, 0.1),
        ),
        "attack_shape": 0.015,
        "decay_shape": 2.5,
        "loop_seconds": 1.2,
    },
    "bells": {
        "waveform": WAVEFORM_STRIKE,
        "partials": ((1.0, 0, 1.0), (2.756, 0, 0.6), (5.404, 0, 0.25)),
        "attack_shape": 0.01,
        "decay_shape": 4.0,
        "loop_seconds": 1.0,
    },
    "woodwinds": {
        "waveform": WAVEFORM_SINE,
        "partials": ((1.0, 0, 1.0), (3.0, 0, 0.35), (5.0, 0, 0.12)),
        "loop_seconds": 1.4,
    },
    "chime": {
        "waveform": WAVEFORM_STRIKE,
        "partials": ((1.0, 0, 1.0), (2.667, 0, 0.45), (6.27, 0, 0.2)),
        "attack_shape": 0.01,
        "decay_shape": 6.0,
        "loop_seconds": 0.7,
    },
    "brass": {
        "waveform": WAVEFORM_SINE,
        "partials": (
            (1.0, 0, 1.0),
            (2.0, 0, 0.7),
            (3.0, 0, 0.5),
            (4.0, 0, 0.35),
            (5.0, 0, 0.25),
            (6.0, 0, 0.17),
        ),
        "loop_seconds": 1.0,
    },
    "motor": {
        "waveform": WAVEFORM_NOISE,
        "noise_bandwidth": 0.8,
        "tone_mix": 0.45,
        "loop_seconds": 1.0,
    },
}


def recipe_spec(name: str, pitch: str) -> SynthSpec:
    """Look up a named recipe at a pitch; raises KeyError if unknown."""
    if name not in RECIPES:
        raise KeyError(f"unknown synth recipe {name!r}")
    return SynthSpec(pitch=pitch, **RECIPES[name])
