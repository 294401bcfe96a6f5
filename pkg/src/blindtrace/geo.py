"""Tessellation of the Earth's surface into space-time cells.

Northing comes from the meridian arc, which is the integral of the
latitude scaling series, so a row is exactly ``cell_size_m`` tall. Each
row scales longitude by its own constant, taken one cell beyond the row's
poleward edge. Two consequences:

* a cell is never narrower than ``cell_size_m`` on the ground, so any
  receiver within one cell width of a case point lands in the case's
  3x3 neighbourhood;
* columns of adjacent rows are not aligned. The sender therefore builds
  its neighbourhood by re-quantizing its longitude in each neighbouring
  row (:func:`expand_point`) instead of shifting ``ix`` blindly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

from .errors import EncodingError, ParameterError
from .field import Field

DEG = math.pi / 180.0
MAX_GRID_LATITUDE = 85.0
INDEX_BITS = 23
_INDEX_OFFSET = 1 << INDEX_BITS
LABEL_LIMIT = 1 << (2 * INDEX_BITS + 2)   # every label is < 2**48


def scaling_constants(latitude_deg: float) -> tuple[float, float]:
    """Kilometres per degree of latitude and of longitude at ``latitude_deg``."""
    if not -90.0 <= latitude_deg <= 90.0:
        raise ParameterError(f"latitude {latitude_deg} outside [-90, 90]")
    L = latitude_deg * DEG
    c_lat = 111.13209 - 0.56605 * math.cos(2 * L) + 0.0012 * math.cos(4 * L)
    c_lon = 111.41513 * math.cos(L) - 0.09455 * math.cos(3 * L) + 0.00012 * math.cos(5 * L)
    return c_lat, c_lon


def meridian_arc_km(latitude_deg: float) -> float:
    """Signed north-south distance from the equator, in km."""
    L = latitude_deg * DEG
    return (
        111.13209 * latitude_deg
        - 0.56605 * math.sin(2 * L) / (2 * DEG)
        + 0.0012 * math.sin(4 * L) / (4 * DEG)
    )


def latitude_from_arc(arc_km: float) -> float:
    """Inverse of :func:`meridian_arc_km` by Newton iteration."""
    lat = arc_km / 111.13209
    for _ in range(6):
        lat = max(-90.0, min(90.0, lat))
        step = (meridian_arc_km(lat) - arc_km) / scaling_constants(lat)[0]
        lat -= step
        if abs(step) < 1e-13:
            break
    return lat


@dataclass(frozen=True)
class GeoPoint:
    latitude: float
    longitude: float
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        if not -90.0 <= self.latitude <= 90.0:
            raise ParameterError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude < 180.0:
            raise ParameterError(f"longitude {self.longitude} outside [-180, 180)")
        if self.timestamp < 0:
            raise ParameterError("timestamp must be >= 0")


@dataclass(frozen=True)
class GridConfig:
    """Cell size, time quantization and neighbourhood radius.

    Defaults: 7 m cells, 20-minute slots, +-1 slot (40-minute window) and a
    3x3 spatial neighbourhood, giving 27 offsets per slot.
    """

    cell_size_m: float = 7.0
    slot_minutes: float = 20.0
    window_slots: int = 1
    spatial_radius: int = 1
    epoch: float = 0.0

    def __post_init__(self) -> None:
        if self.cell_size_m <= 0 or self.slot_minutes <= 0:
            raise ParameterError("cell_size_m and slot_minutes must be positive")
        if self.window_slots < 0 or self.spatial_radius < 0:
            raise ParameterError("window_slots and spatial_radius must be >= 0")

    @property
    def slot_seconds(self) -> float:
        return self.slot_minutes * 60.0

    @property
    def expansion(self) -> int:
        side = 2 * self.spatial_radius + 1
        return side * side * (2 * self.window_slots + 1)

    def offsets(self) -> list[tuple[int, int, int]]:
        """Canonical ``(ds, dy, dx)`` order: ds-major, then dy, then dx, ascending."""
        w, r = self.window_slots, self.spatial_radius
        return [
            (ds, dy, dx)
            for ds in range(-w, w + 1)
            for dy in range(-r, r + 1)
            for dx in range(-r, r + 1)
        ]


class Cell(NamedTuple):
    ix: int
    iy: int
    slot: int


@dataclass(frozen=True)
class ProximityThreshold:
    delta_m: float

    def __post_init__(self) -> None:
        if self.delta_m <= 0:
            raise ParameterError("delta_m must be positive")

    def within(self, a: GeoPoint, b: GeoPoint) -> bool:
        return ellipsoid_distance_m(a, b) < self.delta_m


def row_index(latitude_deg: float, cell_size_m: float) -> int:
    return math.floor(meridian_arc_km(latitude_deg) * 1000.0 / cell_size_m)


@lru_cache(maxsize=1 << 16)
def row_longitude_scale(iy: int, cell_size_m: float) -> float:
    """Km per degree of longitude used for every column of row ``iy``."""
    edge_m = (iy + 2) * cell_size_m if iy >= 0 else (iy - 1) * cell_size_m
    lat = latitude_from_arc(edge_m / 1000.0)
    c_lon = scaling_constants(max(-90.0, min(90.0, lat)))[1]
    if c_lon <= 0:
        raise ParameterError(f"row {iy} lies too close to a pole")
    return c_lon


def column_index(longitude_deg: float, iy: int, cell_size_m: float) -> int:
    return math.floor(longitude_deg * row_longitude_scale(iy, cell_size_m) * 1000.0 / cell_size_m)


def time_slot(timestamp: float, config: GridConfig) -> int:
    if timestamp < config.epoch:
        raise ParameterError(f"timestamp {timestamp} precedes grid epoch {config.epoch}")
    return math.floor((timestamp - config.epoch) / config.slot_seconds)


def quantize(point: GeoPoint, config: GridConfig = GridConfig()) -> Cell:
    if abs(point.latitude) > MAX_GRID_LATITUDE:
        raise ParameterError(
            f"latitude {point.latitude} beyond +-{MAX_GRID_LATITUDE}; grid undefined near poles"
        )
    iy = row_index(point.latitude, config.cell_size_m)
    ix = column_index(point.longitude, iy, config.cell_size_m)
    return Cell(ix, iy, time_slot(point.timestamp, config))


def expand(cell: Cell, config: GridConfig = GridConfig()) -> list[Cell]:
    """Index-space neighbourhood of ``cell`` in canonical order."""
    return [Cell(cell.ix + dx, cell.iy + dy, cell.slot + ds) for ds, dy, dx in config.offsets()]


def expand_point(point: GeoPoint, config: GridConfig = GridConfig()) -> list[Cell]:
    """Neighbourhood of the cell containing ``point``, in canonical order.

    Same order and length as :func:`expand`, but each neighbouring row's
    columns are measured in that row's own longitude scale.
    """
    home = quantize(point, config)
    size = config.cell_size_m
    cols = {
        dy: column_index(point.longitude, home.iy + dy, size)
        for dy in range(-config.spatial_radius, config.spatial_radius + 1)
    }
    return [Cell(cols[dy] + dx, home.iy + dy, home.slot + ds) for ds, dy, dx in config.offsets()]


def encode_cell(cell: Cell, field: Field | None = None) -> int:
    """Injective label for the spatial part of ``cell``; the slot is dropped."""
    ix, iy = cell.ix, cell.iy
    if not (-_INDEX_OFFSET <= ix < _INDEX_OFFSET and -_INDEX_OFFSET <= iy < _INDEX_OFFSET):
        raise EncodingError(f"cell index out of range: ix={ix}, iy={iy}")
    label = (ix + _INDEX_OFFSET) + ((iy + _INDEX_OFFSET) << (INDEX_BITS + 1))
    if field is not None and label >= field.modulus - 2:
        raise EncodingError(f"label {label} does not fit below the sentinels of {field!r}")
    return label


def decode_cell(label: int, slot: int = 0) -> Cell:
    if not 0 <= label < 1 << (2 * INDEX_BITS + 2):
        raise EncodingError(f"{label} is not a cell label")
    width = INDEX_BITS + 1
    ix = (label & ((1 << width) - 1)) - _INDEX_OFFSET
    iy = (label >> width) - _INDEX_OFFSET
    return Cell(ix, iy, slot)


def ellipsoid_distance_m(a: GeoPoint, b: GeoPoint) -> float:
    """Flat-Earth distance with scaling constants taken at the midpoint latitude."""
    c_lat, c_lon = scaling_constants((a.latitude + b.latitude) / 2.0)
    dy = (b.latitude - a.latitude) * c_lat * 1000.0
    dx = (b.longitude - a.longitude) * c_lon * 1000.0
    return math.hypot(dx, dy)
