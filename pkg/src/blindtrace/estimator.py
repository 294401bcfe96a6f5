"""Key-material and traffic volume for population-scale deployments.

Volume is linear in positions::

    positions = population * cases * days * slots_per_day * expansion

Per-position byte costs default to values fitted from published national
and city estimates (:data:`PUBLISHED_ESTIMATES`): take keys (or comms)
divided by population x cases for each row, drop rows more than 50% away
from the median, take the median of the rest, divide by the 1944
positions in one pair-day. 1 TB = 10**12 bytes.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import asdict, dataclass, replace

from .errors import ParameterError

TB = 10**12
POSITIONS_PER_PAIR_DAY = 72 * 27


@dataclass(frozen=True)
class PublishedRow:
    label: str
    population_m: float
    cases: int
    keys_tb: float
    comms_tb: float

    @property
    def pairs(self) -> float:
        return self.population_m * 1e6 * self.cases


PUBLISHED_ESTIMATES = (
    PublishedRow("Nation Small", 4.83, 5364, 6.1e2, 8.5e2),
    PublishedRow("Nation Medium", 37.98, 4666, 4.2e3, 5.8e3),
    PublishedRow("Nation Large", 1339, 5172, 1.1e4, 1.6e4),
    PublishedRow("City Small", 1, 100, 2.35, 3.3),
    PublishedRow("City Medium", 5, 200, 23.5, 33.0),
    PublishedRow("City Large", 20, 500, 235.7, 330.0),
)


@dataclass(frozen=True)
class ByteCostFit:
    key_bytes_per_pair_day: float
    comm_bytes_per_pair_day: float
    outliers: tuple[str, ...]

    @property
    def key_bytes_per_position(self) -> float:
        return self.key_bytes_per_pair_day / POSITIONS_PER_PAIR_DAY

    @property
    def comm_bytes_per_position(self) -> float:
        return self.comm_bytes_per_pair_day / POSITIONS_PER_PAIR_DAY


def fit_byte_costs(rows=PUBLISHED_ESTIMATES, tolerance: float = 0.5) -> ByteCostFit:
    def robust(values: dict[str, float]) -> tuple[float, set[str]]:
        mid = statistics.median(values.values())
        bad = {k for k, v in values.items() if abs(v / mid - 1) > tolerance}
        return statistics.median(v for k, v in values.items() if k not in bad), bad

    keys, bad_k = robust({r.label: r.keys_tb * TB / r.pairs for r in rows})
    comms, bad_c = robust({r.label: r.comms_tb * TB / r.pairs for r in rows})
    outliers = tuple(r.label for r in rows if r.label in bad_k | bad_c)
    return ByteCostFit(keys, comms, outliers)


FIT = fit_byte_costs()
FITTED_KEY_BYTES = FIT.key_bytes_per_position
FITTED_COMM_BYTES = FIT.comm_bytes_per_position


@dataclass(frozen=True)
class ScenarioParams:
    population: int
    cases: int
    days: int = 1
    slots_per_day: int = 72
    expansion: int = 27
    key_bytes_per_position: float = FITTED_KEY_BYTES
    comm_bytes_per_position: float = FITTED_COMM_BYTES
    label: str = ""

    def __post_init__(self) -> None:
        for name in ("population", "cases", "days", "slots_per_day", "expansion"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be non-negative")
        if self.key_bytes_per_position <= 0 or self.comm_bytes_per_position <= 0:
            raise ParameterError("byte costs must be positive")


@dataclass(frozen=True)
class ResourceReport:
    keys_tb: float
    comms_tb: float
    positions: int


def estimate(s: ScenarioParams) -> ResourceReport:
    positions = int(s.population) * int(s.cases) * s.days * s.slots_per_day * s.expansion
    return ResourceReport(
        keys_tb=positions * s.key_bytes_per_position / TB,
        comms_tb=positions * s.comm_bytes_per_position / TB,
        positions=positions,
    )


def default_scenarios() -> list[ScenarioParams]:
    return [
        ScenarioParams(round(r.population_m * 1e6), r.cases, label=r.label)
        for r in PUBLISHED_ESTIMATES
    ]


def _fmt_tb(x: float) -> str:
    return f"{x:.3e}" if x >= 1000 else f"{x:.4g}"


def _published(s: ScenarioParams) -> PublishedRow | None:
    for r in PUBLISHED_ESTIMATES:
        if s.population == round(r.population_m * 1e6) and s.cases == r.cases and s.days == 1:
            return r
    return None


def footnotes(scenarios: list[ScenarioParams]) -> list[str]:
    notes = []
    for s in scenarios:
        row = _published(s)
        if row is not None and row.label in FIT.outliers:
            implied = row.keys_tb * TB / row.pairs
            notes.append(
                f"{row.label}: published {row.keys_tb:g} TB keys / {row.comms_tb:g} TB comms "
                f"imply {implied / 1e3:.2f} KB per pair-day, inconsistent with the "
                f"{FIT.key_bytes_per_pair_day / 1e3:.1f} KB fitted from the other rows; "
                f"not reproduced"
            )
    return notes


def table_report(scenarios: list[ScenarioParams], fmt: str = "text") -> str:
    reports = [estimate(s) for s in scenarios]
    labels = [s.label or f"#{i + 1}" for i, s in enumerate(scenarios)]
    if fmt == "json":
        return json.dumps(
            {
                "scenarios": [
                    {"label": lab, **asdict(s), **asdict(r)}
                    for lab, s, r in zip(labels, scenarios, reports)
                ],
                "footnotes": footnotes(scenarios),
            },
            indent=2,
        )
    if fmt != "text":
        raise ParameterError(f"unknown format {fmt!r}")
    rows = [
        ("Size", labels),
        ("Population (M)", [f"{s.population / 1e6:g}" for s in scenarios]),
        ("Cases", [str(s.cases) for s in scenarios]),
        ("Keys (TB)", [_fmt_tb(r.keys_tb) for r in reports]),
        ("Comms (TB)", [_fmt_tb(r.comms_tb) for r in reports]),
    ]
    width = max([len(h) for h, _ in rows])
    cols = [max([len(v[i]) for _, v in rows]) for i in range(len(scenarios))]
    lines = [
        "  ".join([h.ljust(width)] + [c.rjust(w) for c, w in zip(vals, cols)]).rstrip()
        for h, vals in rows
    ]
    lines.extend(f"* {note}" for note in footnotes(scenarios))
    return "\n".join(lines)


def with_costs(s: ScenarioParams, key_bytes: float, comm_bytes: float) -> ScenarioParams:
    return replace(s, key_bytes_per_position=key_bytes, comm_bytes_per_position=comm_bytes)


def wire_byte_costs() -> tuple[int, int]:
    """This implementation's own per-position volume at the default field.

    Keys: sender a, b (8 bytes each) and a 4-byte index, receiver pad and
    expected value (8 bytes each). Comms: one 8-byte element each way.
    Framing overhead is ignored.
    """
    return 8 + 8 + 4 + 8 + 8, 8 + 8
