"""Telemetry ingestion: JSON-lines joint-velocity streams.

Wire format, one UTF-8 record per line:

    {"header":{"sample_rate_hz":250,"joints":["torso","wrist"]}}   (optional first line)
    {"t":0.004,"joints":{"torso":0.12},"angles":{"torso":81.0}}

Velocities are stored as magnitudes; sign carries no sonic meaning.
Angles (legacy note mode only) pass through signed. Timestamps must be
strictly increasing; duplicates are rejected so the pipeline stays
deterministic.
"""

from __future__ import annotations

import json
import math
import socket
import urllib.parse
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

from .errors import StreamOrderError, StreamTimeout, TelemetryParseError
from .joints import JOINT_ORDER, JointId, joint_from_name

DEFAULT_SAMPLE_RATE_HZ = 250.0

# Guard against float representation noise when comparing stream times
# against tick-grid boundaries.
_TIME_EPS = 1e-9


@dataclass(frozen=True)
class TelemetryStreamHeader:
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    joints_present: tuple[JointId, ...] = JOINT_ORDER

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise TelemetryParseError("header field sample_rate_hz must be > 0")
        if not self.joints_present:
            raise TelemetryParseError("header field joints must be non-empty")


@dataclass(frozen=True)
class TelemetryFrame:
    """One timestamped sample. Velocities are rad/s magnitudes."""

    t: float
    velocities: dict[JointId, float]
    angles: dict[JointId, float] = field(default_factory=dict)

    def velocity(self, joint: JointId) -> float:
        return self.velocities.get(joint, 0.0)


@dataclass(frozen=True)
class TickSample:
    """Zero-order-held velocities at one tick boundary."""

    t: float
    velocities: dict[JointId, float]


def _parse_joint_map(raw, record_field: str, magnitude: bool) -> dict[JointId, float]:
    if not isinstance(raw, dict):
        raise TelemetryParseError(f"field {record_field!r} must be an object")
    out: dict[JointId, float] = {}
    for name, value in raw.items():
        try:
            joint = joint_from_name(name)
        except KeyError:
            raise TelemetryParseError(
                f"field {record_field!r} has unknown joint {name!r}"
            ) from None
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise TelemetryParseError(
                f"field {record_field}.{name} must be a number, got {value!r}"
            )
        value = float(value)
        if not math.isfinite(value):
            raise TelemetryParseError(f"field {record_field}.{name} is not finite")
        out[joint] = abs(value) if magnitude else value
    return out


def parse_frame(line: str) -> TelemetryFrame:
    """Parse one frame record. Signed velocities are folded to magnitudes."""
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise TelemetryParseError(f"malformed record: {exc}") from None
    if not isinstance(record, dict):
        raise TelemetryParseError("record must be a JSON object")
    if "t" not in record:
        raise TelemetryParseError("field 't' is missing")
    t = record["t"]
    if not isinstance(t, (int, float)) or isinstance(t, bool) or not math.isfinite(t):
        raise TelemetryParseError(f"field 't' must be a finite number, got {t!r}")
    if t < 0:
        raise TelemetryParseError(f"field 't' out of range: {t} < 0")
    if "joints" not in record:
        raise TelemetryParseError("field 'joints' is missing")
    velocities = _parse_joint_map(record["joints"], "joints", magnitude=True)
    angles = _parse_joint_map(record.get("angles", {}), "angles", magnitude=False)
    return TelemetryFrame(t=float(t), velocities=velocities, angles=angles)


def parse_header(line: str) -> TelemetryStreamHeader | None:
    """Return the header if the line is a header record, else None."""
    try:
        record = json.loads(line)
    except json.JSONDecodeError:
        return None
    if not isinstance(record, dict) or "header" not in record:
        return None
    body = record["header"]
    if not isinstance(body, dict):
        raise TelemetryParseError("field 'header' must be an object")
    rate = body.get("sample_rate_hz", DEFAULT_SAMPLE_RATE_HZ)
    if not isinstance(rate, (int, float)) or isinstance(rate, bool):
        raise TelemetryParseError("header field sample_rate_hz must be a number")
    joints = body.get("joints")
    if joints is None:
        present = JOINT_ORDER
    else:
        if not isinstance(joints, list):
            raise TelemetryParseError("header field joints must be a list")
        try:
            present = tuple(joint_from_name(n) for n in joints)
        except KeyError as exc:
            raise TelemetryParseError(f"header field joints: {exc}") from None
    return TelemetryStreamHeader(sample_rate_hz=float(rate), joints_present=present)


def serialize_frame(frame: TelemetryFrame) -> str:
    """Canonical single-line form: joints in canonical order."""
    record: dict = {"t": frame.t}
    record["joints"] = {
        j.value: frame.velocities[j] for j in JOINT_ORDER if j in frame.velocities
    }
    if frame.angles:
        record["angles"] = {
            j.value: frame.angles[j] for j in JOINT_ORDER if j in frame.angles
        }
    return json.dumps(record, separators=(",", ":"))


def serialize_header(header: TelemetryStreamHeader) -> str:
    return json.dumps(
        {
            "header": {
                "sample_rate_hz": header.sample_rate_hz,
                "joints": [j.value for j in header.joints_present],
            }
        },
        separators=(",", ":"),
    )


class TelemetryReader:
    """Iterates frames from a line source, enforcing strict time order.

    The optional header must be the first line; it is exposed via
    ``.header`` once iteration has begun.
    """

    def __init__(self, lines: Iterable[str]):
        self._lines = iter(lines)
        self.header: TelemetryStreamHeader | None = None
        self._last_t: float | None = None
        self._started = False

    def __iter__(self) -> Iterator[TelemetryFrame]:
        for line in self._lines:
            line = line.strip()
            if not line:
                continue
            if not self._started:
                self._started = True
                header = parse_header(line)
                if header is not None:
                    self.header = header
                    continue
            frame = parse_frame(line)
            if self._last_t is not None and frame.t <= self._last_t:
                raise StreamOrderError(self._last_t, frame.t)
            self._last_t = frame.t
            yield frame


def _socket_lines(host: str, port: int, idle_timeout: float | None) -> Iterator[str]:
    sock = socket.create_connection((host, port))
    sock.settimeout(idle_timeout)
    buf = b""
    try:
        while True:
            try:
                chunk = sock.recv(4096)
            except socket.timeout:
                raise StreamTimeout(
                    f"no telemetry for {idle_timeout}s on {host}:{port}"
                ) from None
            if not chunk:
                break
            buf += chunk
            while b"\n" in buf:
                line, buf = buf.split(b"\n", 1)
                yield line.decode("utf-8")
        if buf.strip():
            yield buf.decode("utf-8")
    finally:
        sock.close()


def open_source(source: str, idle_timeout: float | None = None) -> Iterator[str]:
    """Yield lines from a file path or a tcp://host:port endpoint."""
    if source.startswith("tcp://"):
        parsed = urllib.parse.urlparse(source)
        if parsed.hostname is None or parsed.port is None:
            raise TelemetryParseError(f"bad telemetry endpoint {source!r}")
        return _socket_lines(parsed.hostname, parsed.port, idle_timeout)

    def _file_lines() -> Iterator[str]:
        with open(source, "r", encoding="utf-8") as fh:
            yield from fh

    return _file_lines()


def read_stream(
    source: str | IO[str] | Iterable[str], idle_timeout: float | None = None
) -> TelemetryReader:
    """Build a reader over a path, tcp:// endpoint, or iterable of lines."""
    if isinstance(source, str):
        return TelemetryReader(open_source(source, idle_timeout))
    return TelemetryReader(source)


def resample_to_ticks(
    frames: Iterable[TelemetryFrame], tick: float = 0.04
) -> Iterator[TickSample]:
    """Zero-order hold onto the tick grid.

    Emits one sample per boundary k*tick for every boundary at or before
    the last frame, each holding the most recent velocity per joint.
    Boundaries before the first frame hold zeros. The gate consumes raw
    frames; this grid serves only the envelope/render clock.
    """
    if tick <= 0:
        raise ValueError("tick must be > 0")
    held = {j: 0.0 for j in JOINT_ORDER}
    k = 0
    last_t: float | None = None
    for frame in frames:
        # Boundaries strictly before this frame carry the prior hold.
        while k * tick < frame.t - _TIME_EPS:
            yield TickSample(t=k * tick, velocities=dict(held))
            k += 1
        held.update(frame.velocities)
        last_t = frame.t
    if last_t is None:
        return
    while k * tick <= last_t + _TIME_EPS:
        yield TickSample(t=k * tick, velocities=dict(held))
        k += 1
