"""PCM rendering: mix per-joint loops under their envelopes.

Sample-level semantics, shared by offline and streamed rendering:

  output[n] = clamp(headroom * sum_j gain_j(tick(n)) * loop_j[phase_j(n)])

Gain is a staircase: it changes only at 40 ms tick boundaries. At each
boundary the engine applies every gate event that occurred at or before
it (a trigger also resets the joint's loop phase to 0), then ticks the
envelopes. Loop phase advances one sample per rendered sample while the
joint's gain is non-zero and freezes while silent.

The engine renders a block only once telemetry has covered the block's
end, so a live stream emits audio within one block of input arrival.
When the input ends, joints still gated get a release at the final
frame time and rendering continues until every envelope reaches zero.
"""

from __future__ import annotations

import math
import queue
import threading
from collections import deque
from dataclasses import dataclass
from typing import IO, Callable, Iterable, Iterator

import numpy as np

from .envelope import (
    FULL_VOLUME_MILLI,
    DEFAULT_TICK_S,
    FadeClass,
    VolumeAnchors,
    percent_to_gain,
)
from .errors import ConfigError, OverrunError
from .gate import EventKind, GateBank, GateConfig, GateEvent
from .joints import JOINT_ORDER, JointId
from .soundscape import SampleBank
from .telemetry import TelemetryFrame

SUPPORTED_SAMPLE_RATES = (22050, 44100, 48000)

DEFAULT_BLOCK_FRAMES = 441  # 10 ms at 44.1 kHz

# Epsilon for mapping event times onto tick boundaries; absorbs float
# representation noise far below telemetry granularity.
_TICK_EPS = 1e-9


@dataclass(frozen=True)
class RenderConfig:
    sample_rate: int = 44100
    channels: int = 1
    headroom: float = 0.353  # ~1/sqrt(8): eight full-gain joints stay near [-1, 1]
    duration: float | None = None  # None: until stream end plus fade tail
    block_frames: int = DEFAULT_BLOCK_FRAMES
    tick_s: float = DEFAULT_TICK_S

    def __post_init__(self):
        if self.sample_rate not in SUPPORTED_SAMPLE_RATES:
            raise ConfigError(
                f"sample_rate must be one of {SUPPORTED_SAMPLE_RATES}, got {self.sample_rate}"
            )
        if self.channels != 1:
            raise ConfigError("only mono output is supported")
        if not 0 < self.headroom <= 1:
            raise ConfigError(f"headroom must be in (0, 1], got {self.headroom}")
        if self.duration is not None and self.duration <= 0:
            raise ConfigError("duration must be > 0")
        if self.block_frames <= 0:
            raise ConfigError("block_frames must be > 0")
        if self.tick_s <= 0:
            raise ConfigError("tick_s must be > 0")

    @property
    def samples_per_tick(self) -> int:
        spt = round(self.tick_s * self.sample_rate)
        if spt <= 0 or abs(spt - self.tick_s * self.sample_rate) > 1e-6:
            raise ConfigError(
                f"tick {self.tick_s}s is not a whole number of samples at {self.sample_rate} Hz"
            )
        return spt


def event_apply_tick(t: float, tick_s: float) -> int:
    """First tick boundary at or after an event time."""
    return max(0, math.ceil(t / tick_s - _TICK_EPS))


class _Voice:
    """Render-side state for one signal: envelope, gain, loop phase."""

    __slots__ = (
        "joint", "buffer", "loop", "rate_milli", "volume_milli",
        "gate_active", "gain", "phase", "pending",
    )

    def __init__(self, joint: JointId, buffer: np.ndarray, loop: bool, fade: FadeClass):
        self.joint = joint
        self.buffer = buffer
        self.loop = loop
        self.rate_milli = fade.rate_milli
        self.volume_milli = 0
        self.gate_active = False
        self.gain = 0.0
        self.phase = 0
        self.pending: deque[tuple[int, EventKind]] = deque()


class SonificationEngine:
    """Incremental telemetry-to-PCM engine (single owner, deterministic)."""

    def __init__(
        self,
        bank: SampleBank,
        fades: dict[str, FadeClass],
        gate_configs: dict[JointId, GateConfig] | None = None,
        cfg: RenderConfig = RenderConfig(),
        anchors: VolumeAnchors = VolumeAnchors(),
        master_percent: float = 100.0,
    ):
        if bank.sample_rate != cfg.sample_rate:
            raise ConfigError(
                f"bank rate {bank.sample_rate} != render rate {cfg.sample_rate}"
            )
        if not 0 <= master_percent <= 100:
            raise ConfigError(f"master volume out of range: {master_percent}")
        self.cfg = cfg
        self.anchors = anchors
        self.master = master_percent
        self.gates = GateBank(gate_configs)
        self._spt = cfg.samples_per_tick
        self._voices: list[_Voice] = []
        for joint in JOINT_ORDER:
            if joint.value not in bank:
                raise ConfigError(f"sound bank has no entry for joint {joint.value!r}")
            entry = bank[joint.value]
            self._voices.append(
                _Voice(joint, entry.buffer, entry.loop, fades[joint.value])
            )
        self._n = 0  # output samples rendered so far
        self._input_t: float | None = None
        self._total: int | None = (
            round(cfg.duration * cfg.sample_rate) if cfg.duration is not None else None
        )
        self._finishing = False
        self._ended = False
        self.trigger_counts: dict[JointId, int] = {j: 0 for j in JOINT_ORDER}
        self.peak = 0.0

    # -- event intake ---------------------------------------------------

    def _queue_event(self, event: GateEvent) -> None:
        voice = self._voices[JOINT_ORDER.index(event.joint)]
        voice.pending.append((event_apply_tick(event.t, self.cfg.tick_s), event.kind))
        if event.kind is EventKind.TRIGGER:
            self.trigger_counts[event.joint] += 1

    def feed_frame(self, frame: TelemetryFrame) -> list[np.ndarray]:
        """Ingest one frame; returns any output blocks it completed."""
        for event in self.gates.step_frame(frame):
            self._queue_event(event)
        self._input_t = frame.t
        return self._drain_ready()

    def inject_events(self, events: Iterable[GateEvent]) -> None:
        """Feed a prebuilt schedule instead of gating telemetry."""
        for event in sorted(events, key=lambda e: e.t):
            self._queue_event(event)

    def advance_to(self, t: float) -> list[np.ndarray]:
        """Advance the input clock without telemetry (scheduled modes)."""
        self._input_t = t
        return self._drain_ready()

    # -- tick machinery -------------------------------------------------

    def _process_boundary(self, k: int) -> None:
        master_scale = self.master / 100.0
        for voice in self._voices:
            triggered = False
            while voice.pending and voice.pending[0][0] <= k:
                _, kind = voice.pending.popleft()
                voice.gate_active = kind is EventKind.TRIGGER
                triggered = triggered or voice.gate_active
            if triggered:
                voice.phase = 0
            if voice.gate_active:
                voice.volume_milli = FULL_VOLUME_MILLI
            else:
                voice.volume_milli = max(0, voice.volume_milli - voice.rate_milli)
            if voice.volume_milli > 0:
                voice.gain = percent_to_gain(
                    voice.volume_milli / 1000.0 * master_scale, self.anchors
                )
            else:
                voice.gain = 0.0

    def _all_done(self) -> bool:
        return all(
            v.volume_milli == 0 and not v.pending and not v.gate_active
            for v in self._voices
        )

    def _render_range(self, n0: int, n1: int) -> tuple[np.ndarray, bool]:
        """Render samples [n0, n1). Returns (audio, reached_natural_end)."""
        out = np.zeros(n1 - n0)
        n = n0
        while n < n1:
            k = n // self._spt
            if n == k * self._spt:
                self._process_boundary(k)
                if self._finishing and self._all_done():
                    return out[: n - n0], True
            seg_end = min(n1, (k + 1) * self._spt)
            length = seg_end - n
            for voice in self._voices:
                if voice.gain == 0.0:
                    continue
                idx = voice.phase + np.arange(length)
                if voice.loop:
                    chunk = np.take(voice.buffer, idx, mode="wrap")
                else:
                    chunk = np.zeros(length)
                    live = idx < len(voice.buffer)
                    chunk[live] = voice.buffer[idx[live]]
                out[n - n0 : seg_end - n0] += voice.gain * chunk
                voice.phase += length
            n = seg_end
        return out, False

    def _emit(self, n1: int) -> np.ndarray | None:
        audio, ended = self._render_range(self._n, n1)
        self._ended = ended
        self._n += len(audio)
        if len(audio) == 0:
            return None
        block = np.clip(self.cfg.headroom * audio, -1.0, 1.0)
        self.peak = max(self.peak, float(np.max(np.abs(block))) if block.size else 0.0)
        return block

    def _drain_ready(self) -> list[np.ndarray]:
        if self._input_t is None:
            return []
        blocks: list[np.ndarray] = []
        bf = self.cfg.block_frames
        sr = self.cfg.sample_rate
        while not self._ended:
            next_end = (self._n // bf + 1) * bf
            if self._total is not None:
                next_end = min(next_end, self._total)
                if self._n >= self._total:
                    break
            if next_end / sr > self._input_t + _TICK_EPS or next_end <= self._n:
                break
            block = self._emit(next_end)
            if block is not None:
                blocks.append(block)
        return blocks

    # -- finishing ------------------------------------------------------

    def finish(self) -> list[np.ndarray]:
        """Release anything still gated and render the fade tail."""
        blocks: list[np.ndarray] = []
        if self._ended:
            return blocks
        release_t = self._input_t if self._input_t is not None else 0.0
        for joint in self.gates.active_joints():
            self._queue_event(GateEvent(joint=joint, kind=EventKind.RELEASE, t=release_t))
        self._finishing = True
        bf = self.cfg.block_frames
        while not self._ended:
            next_end = (self._n // bf + 1) * bf
            if self._total is not None:
                next_end = min(next_end, self._total)
                if self._n >= self._total:
                    break
            block = self._emit(next_end)
            if block is not None:
                blocks.append(block)
        return blocks

    def summary(self) -> dict:
        return {
            "duration_s": self._n / self.cfg.sample_rate,
            "peak_level": self.peak,
            "triggers_per_joint": {
                j.value: self.trigger_counts[j] for j in JOINT_ORDER
            },
        }


def render_offline(frames: Iterable[TelemetryFrame], engine: SonificationEngine) -> np.ndarray:
    """Run the whole pipeline over recorded telemetry; returns float PCM."""
    blocks: list[np.ndarray] = []
    for frame in frames:
        blocks.extend(engine.feed_frame(frame))
    blocks.extend(engine.finish())
    if not blocks:
        return np.zeros(0)
    return np.concatenate(blocks)


def render_scheduled(
    events: Iterable[GateEvent], duration: float, engine: SonificationEngine
) -> np.ndarray:
    """Render a prebuilt event schedule (random mode)."""
    engine.inject_events(events)
    blocks = engine.advance_to(duration)
    blocks.extend(engine.finish())
    if not blocks:
        return np.zeros(0)
    return np.concatenate(blocks)


def float_to_pcm16(buffer: np.ndarray) -> bytes:
    """Deterministic 16-bit conversion: truncation toward zero, no dither."""
    scaled = np.trunc(buffer * 32768.0)
    return np.clip(scaled, -32768, 32767).astype("<i2").tobytes()


def write_wav(buffer: np.ndarray, path: str, sample_rate: int) -> None:
    import wave as wave_io

    with wave_io.open(path, "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(sample_rate)
        wav.writeframes(float_to_pcm16(buffer))


class _SinkWriter:
    """Drains blocks to the sink on its own thread; counts drops."""

    def __init__(self, sink: Callable[[bytes], None] | IO[bytes], capacity: int):
        self._write = sink.write if hasattr(sink, "write") else sink
        self._queue: queue.Queue[bytes | None] = queue.Queue(maxsize=capacity)
        self.dropped = 0
        self.error: Exception | None = None
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def _run(self):
        while True:
            item = self._queue.get()
            if item is None:
                return
            try:
                self._write(item)
            except Exception as exc:  # surfaced on the render thread
                self.error = exc
                return

    def push(self, payload: bytes) -> None:
        if self.error is not None:
            raise self.error
        try:
            self._queue.put_nowait(payload)
        except queue.Full:
            self.dropped += 1

    def close(self) -> None:
        try:
            self._queue.put(None, timeout=5.0)
        except queue.Full:
            pass
        self._thread.join(timeout=5.0)


def render_stream(
    frames: Iterable[TelemetryFrame],
    engine: SonificationEngine,
    sink: Callable[[bytes], None] | IO[bytes],
    buffer_blocks: int = 32,
) -> dict:
    """Stream s16le PCM blocks to a sink as telemetry arrives.

    Raises OverrunError (with drop accounting) if the sink could not
    keep up within the bounded buffer.
    """
    writer = _SinkWriter(sink, capacity=buffer_blocks)
    try:
        for frame in frames:
            for block in engine.feed_frame(frame):
                writer.push(float_to_pcm16(block))
        for block in engine.finish():
            writer.push(float_to_pcm16(block))
    finally:
        writer.close()
    if writer.error is not None:
        raise writer.error
    if writer.dropped:
        raise OverrunError(writer.dropped)
    return engine.summary()
