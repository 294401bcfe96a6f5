"""From raw location trails to aligned label sequences.

Both parties derive the same position timeline from a shared
:class:`GridConfig` and :class:`SessionRange`: for every slot in the range,
one position per ``(ds, dy, dx)`` offset in canonical order. The receiver
repeats its own cell label at every offset of a slot; the sender fills
each offset with the neighbouring cell of the case observation made
``ds`` slots earlier.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field as dc_field
from datetime import datetime, timezone
from typing import Iterable

import numpy as np

from .errors import ParameterError, ParseError
from .field import DEFAULT_FIELD, Field
from .geo import GeoPoint, GridConfig, MAX_GRID_LATITUDE, encode_cell, expand_point, quantize, time_slot
from .protocol import receiver_sentinel, sender_sentinel

log = logging.getLogger(__name__)

HEADER = ["user_id", "timestamp", "lat", "lon"]
SLOTS_PER_DAY_DEFAULT = 72


@dataclass(frozen=True)
class TrailRecord:
    user_id: str
    timestamp: float  # seconds since the Unix epoch, UTC
    latitude: float
    longitude: float

    def point(self) -> GeoPoint:
        return GeoPoint(self.latitude, self.longitude, self.timestamp)


@dataclass(frozen=True)
class RowError:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


def parse_timestamp(text: str) -> float:
    """ISO-8601 UTC (``Z`` or ``+00:00`` suffix) or plain epoch seconds."""
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    elif dt.utcoffset().total_seconds() != 0:
        raise ValueError("timestamp must be UTC")
    return dt.timestamp()


def parse_trail(text: str) -> tuple[list[TrailRecord], list[RowError]]:
    """Strictly parse ``user_id,timestamp,lat,lon`` CSV.

    Bad rows are skipped and reported with their line numbers. A repeated
    ``(user_id, timestamp)`` keeps the last row.
    """
    if not text.strip():
        return [], []
    reader = csv.reader(io.StringIO(text))
    header = [h.strip() for h in next(reader)]
    if header != HEADER:
        raise ParseError(f"bad header {header!r}; expected {','.join(HEADER)}")
    by_key: dict[tuple[str, float], TrailRecord] = {}
    errors: list[RowError] = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            errors.append(RowError(line, f"expected 4 fields, got {len(row)}"))
            continue
        user, ts, lat, lon = (c.strip() for c in row)
        try:
            when = parse_timestamp(ts)
        except ValueError as exc:
            errors.append(RowError(line, f"bad timestamp {ts!r}: {exc}"))
            continue
        try:
            lat_v, lon_v = float(lat), float(lon)
        except ValueError:
            errors.append(RowError(line, f"bad coordinate {lat!r},{lon!r}"))
            continue
        if not (math.isfinite(lat_v) and -90.0 <= lat_v <= 90.0):
            errors.append(RowError(line, "latitude out of range"))
            continue
        if abs(lat_v) > MAX_GRID_LATITUDE:
            errors.append(RowError(line, f"latitude beyond +-{MAX_GRID_LATITUDE} (polar cells unsupported)"))
            continue
        if not (math.isfinite(lon_v) and -180.0 <= lon_v < 180.0):
            errors.append(RowError(line, "longitude out of range"))
            continue
        if not user:
            errors.append(RowError(line, "empty user_id"))
            continue
        key = (user, when)
        if key in by_key:
            log.warning("line %d: duplicate timestamp for user %s, keeping last", line, user)
            del by_key[key]
        by_key[key] = TrailRecord(user, when, lat_v, lon_v)
    for err in errors:
        log.warning("%s", err)
    return list(by_key.values()), errors


def split_by_user(records: Iterable[TrailRecord]) -> dict[str, list[TrailRecord]]:
    out: dict[str, list[TrailRecord]] = {}
    for rec in records:
        out.setdefault(rec.user_id, []).append(rec)
    return out


@dataclass(frozen=True)
class SessionRange:
    """Half-open slot interval ``[start_slot, end_slot)``."""

    start_slot: int
    end_slot: int

    def __post_init__(self) -> None:
        if self.end_slot <= self.start_slot or self.start_slot < 0:
            raise ParameterError(f"empty or negative slot range {self.start_slot}..{self.end_slot}")

    @property
    def slots(self) -> int:
        return self.end_slot - self.start_slot

    @classmethod
    def days(cls, start: float, config: GridConfig, days: int = 1) -> SessionRange:
        first = time_slot(start, config)
        per_day = round(86400 / config.slot_seconds)
        return cls(first, first + per_day * days)

    def positions(self, config: GridConfig) -> int:
        return self.slots * config.expansion


@dataclass(eq=False)
class AlignedSequence:
    session_range: SessionRange
    labels: np.ndarray = dc_field(repr=False)
    role: str

    @property
    def n(self) -> int:
        return len(self.labels)


def _single_user(records: list[TrailRecord]) -> None:
    users = {r.user_id for r in records}
    if len(users) > 1:
        raise ParameterError(f"expected one user's records, got {len(users)} users")


def _latest_per_slot(records: list[TrailRecord], config: GridConfig, rng: SessionRange) -> dict[int, TrailRecord]:
    latest: dict[int, TrailRecord] = {}
    for rec in records:  # stable: later input rows win timestamp ties
        slot = time_slot(rec.timestamp, config)
        if rng.start_slot <= slot < rng.end_slot:
            cur = latest.get(slot)
            if cur is None or rec.timestamp >= cur.timestamp:
                latest[slot] = rec
    return latest


def align_receiver(
    records: list[TrailRecord],
    config: GridConfig,
    session_range: SessionRange,
    field: Field = DEFAULT_FIELD,
) -> AlignedSequence:
    _single_user(records)
    latest = _latest_per_slot(records, config, session_range)
    per_slot = config.expansion
    labels = np.full(session_range.positions(config), receiver_sentinel(field), dtype=np.uint64)
    for slot, rec in latest.items():
        base = (slot - session_range.start_slot) * per_slot
        labels[base:base + per_slot] = encode_cell(quantize(rec.point(), config), field)
    return AlignedSequence(session_range, labels, "receiver")


def align_sender(
    records: list[TrailRecord],
    config: GridConfig,
    session_range: SessionRange,
    field: Field = DEFAULT_FIELD,
) -> AlignedSequence:
    """Case database for one patient.

    Position ``(k, ds, dy, dx)`` holds the ``(dy, dx)`` neighbour of the
    patient's cell at slot ``k - ds``; observations outside the session
    range do not contribute.
    """
    _single_user(records)
    latest = _latest_per_slot(records, config, session_range)
    offsets = config.offsets()
    spatial = (2 * config.spatial_radius + 1) ** 2
    hood = {
        slot: [encode_cell(c, field) for c in expand_point(rec.point(), config)[:spatial]]
        for slot, rec in latest.items()
    }
    per_slot = config.expansion
    labels = np.full(session_range.positions(config), sender_sentinel(field), dtype=np.uint64)
    for k in range(session_range.start_slot, session_range.end_slot):
        base = (k - session_range.start_slot) * per_slot
        for j, (ds, dy, dx) in enumerate(offsets):
            cells = hood.get(k - ds)
            if cells is not None:
                side = 2 * config.spatial_radius + 1
                labels[base + j] = cells[(dy + config.spatial_radius) * side + dx + config.spatial_radius]
    return AlignedSequence(session_range, labels, "sender")


# -- config files ------------------------------------------------------------

_GRID_KEYS = {
    "cell_size_m": float,
    "slot_minutes": float,
    "window_slots": int,
    "spatial_radius": int,
}


def parse_config(text: str) -> tuple[GridConfig, SessionRange, dict[str, str]]:
    """Parse ``key = value`` lines.

    Recognised keys: the GridConfig fields, ``epoch``, ``range_start``
    (timestamp, default ``epoch``), ``days`` (default 1). Anything else is
    returned untouched in the third element.
    """
    values: dict[str, str] = {}
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ParseError(f"config line {num}: expected key = value")
        values[key.strip()] = val.strip()
    grid_kwargs: dict = {}
    try:
        for key, cast in _GRID_KEYS.items():
            if key in values:
                grid_kwargs[key] = cast(values.pop(key))
        epoch = parse_timestamp(values.pop("epoch")) if "epoch" in values else 0.0
        grid = GridConfig(epoch=epoch, **grid_kwargs)
        start = parse_timestamp(values.pop("range_start")) if "range_start" in values else epoch
        days = int(values.pop("days", "1"))
        rng = SessionRange.days(start, grid, days)
    except (ValueError, ParameterError) as exc:
        raise ParseError(f"config: {exc}") from exc
    return grid, rng, values
