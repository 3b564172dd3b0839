"""Synthetic radio testbed.

Models the measurement campaign of a desk-scale deployment: five anchor
radios around a 3.6 m x 4.5 m room, a mobile node that broadcasts a
beacon request and records one RSSI reading per anchor reply, and a
log-distance path-loss channel with Gaussian shadowing.

Shadowing draws come from a counter-based generator keyed by
(seed, point, sample, anchor), so datasets generated for different
anchor subsets under the same seed share identical noise per reading
and comparisons between configurations are paired.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import Dataset, GridSpec, grid_points
from .errors import OutOfRange, ParseError
from .mlp import Position
from .rng import keyed_normal

_GRID_DOMAIN = 0
_UNKNOWN_DOMAIN = 1


class AnchorConfig(enum.Enum):
    """The six evaluated anchor subsets (by anchor id)."""

    TWO_A = "two_a"
    TWO_B = "two_b"
    THREE_A = "three_a"
    THREE_B = "three_b"
    FOUR = "four"
    FIVE = "five"

    @property
    def ids(self) -> tuple[int, ...]:
        return _CONFIG_IDS[self]

    @classmethod
    def from_name(cls, name: str) -> "AnchorConfig":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(c.value for c in cls)
            raise ValueError(f"unknown anchor config {name!r}; "
                             f"valid names: {valid}") from None


_CONFIG_IDS = {
    AnchorConfig.TWO_A: (2, 4),
    AnchorConfig.TWO_B: (1, 4),
    AnchorConfig.THREE_A: (1, 2, 4),
    AnchorConfig.THREE_B: (1, 3, 5),
    AnchorConfig.FOUR: (1, 2, 4, 5),
    AnchorConfig.FIVE: (1, 2, 3, 4, 5),
}


@dataclass(frozen=True)
class Deployment:
    """Anchor positions, the active subset, and the room rectangle."""

    anchors: tuple[tuple[int, Position], ...]
    selection: AnchorConfig
    room: tuple[float, float, float, float]  # x_min, y_min, x_max, y_max

    def __post_init__(self):
        ids = [i for i, _ in self.anchors]
        if len(set(ids)) != len(ids):
            raise ValueError("anchor ids must be unique")
        x0, y0, x1, y1 = self.room
        for i, pos in self.anchors:
            if not (x0 <= pos.x <= x1 and y0 <= pos.y <= y1):
                raise ValueError(f"anchor {i} lies outside the room")
        missing = set(self.selection.ids) - set(ids)
        if missing:
            raise ValueError(f"selection references unknown anchor ids {sorted(missing)}")

    def selected_anchors(self) -> list[tuple[int, Position]]:
        """The active anchors in ascending id order."""
        by_id = dict(self.anchors)
        return [(i, by_id[i]) for i in sorted(self.selection.ids)]

    def with_selection(self, selection: AnchorConfig) -> "Deployment":
        return replace(self, selection=selection)

    def contains(self, p: Position) -> bool:
        x0, y0, x1, y1 = self.room
        return x0 <= p.x <= x1 and y0 <= p.y <= y1


def reference_deployment(selection: AnchorConfig = AnchorConfig.FOUR) -> Deployment:
    """Anchors 1-4 at the grid corners, anchor 5 at the center."""
    return Deployment(
        anchors=(
            (1, Position(0.0, 0.0)),
            (2, Position(3.6, 0.0)),
            (3, Position(3.6, 4.5)),
            (4, Position(0.0, 4.5)),
            (5, Position(1.8, 2.25)),
        ),
        selection=selection,
        room=(0.0, 0.0, 3.6, 4.5),
    )


@dataclass(frozen=True)
class ChannelModel:
    """Log-distance path loss with Gaussian shadowing, clamped at the
    receiver sensitivity floor."""

    p0_dbm: float = -45.0
    d0_m: float = 1.0
    path_loss_exponent: float = 2.2
    shadowing_sigma_db: float = 2.0
    sensitivity_floor_dbm: float = -96.0
    max_range_m: float = 40.0
    seed: int = 0

    def __post_init__(self):
        if self.d0_m <= 0:
            raise ValueError("reference distance must be positive")
        if self.path_loss_exponent <= 0:
            raise ValueError("path-loss exponent must be positive")
        if self.shadowing_sigma_db < 0:
            raise ValueError("shadowing sigma must be non-negative")
        if self.sensitivity_floor_dbm >= self.p0_dbm:
            raise ValueError("sensitivity floor must lie below p0")


def rssi_at(model: ChannelModel, distance: float, noise_draw: float) -> float:
    """RSSI in dBm at the given distance for one standard-normal draw.

    Distances below the reference distance saturate at p0 plus noise;
    readings never fall below the sensitivity floor.
    """
    if distance < 0:
        raise ValueError("distance must be non-negative")
    if distance > model.max_range_m:
        raise OutOfRange(f"distance {distance:.2f} m exceeds the "
                         f"{model.max_range_m:.0f} m communication range")
    effective = max(distance, model.d0_m)
    loss = 10.0 * model.path_loss_exponent * math.log10(effective / model.d0_m)
    value = model.p0_dbm - loss + model.shadowing_sigma_db * noise_draw
    return max(value, model.sensitivity_floor_dbm)


@dataclass(frozen=True)
class Message:
    """One entry of a measurement exchange trace."""

    kind: str  # "request" or "beacon"
    sender: str
    receiver: str
    rssi_dbm: float | None = None


@dataclass(frozen=True)
class MeasurementInstance:
    """One beacon exchange: per-anchor readings plus the message trace."""

    mobile_position: Position
    readings: tuple[tuple[int, float], ...]  # (anchor id, rssi dBm), id order
    exchange_log: tuple[Message, ...]

    def rssi_vector(self) -> np.ndarray:
        return np.array([r for _, r in self.readings])


def measure(dep: Deployment, model: ChannelModel, mobile: Position,
            point_index: int = 0, sample_index: int = 0,
            domain: int = _GRID_DOMAIN) -> MeasurementInstance:
    """Simulate one request/beacon exchange at the mobile position.

    The mobile broadcasts one localization-beacon request; every selected
    anchor replies once, in ascending id order. Noise is addressed by
    (seed, domain, point_index, sample_index, anchor id) so repeated calls
    with the same indices reproduce the same instance.
    """
    if not dep.contains(mobile):
        raise ValueError(f"mobile position {mobile} lies outside the room")
    log = [Message("request", "mobile", "broadcast")]
    readings = []
    for anchor_id, pos in dep.selected_anchors():
        distance = mobile.distance_to(pos)
        draw = keyed_normal(model.seed, domain, point_index, sample_index,
                            anchor_id)
        try:
            value = rssi_at(model, distance, draw)
        except OutOfRange:
            raise OutOfRange(
                f"anchor {anchor_id} is {distance:.2f} m from the mobile, "
                f"beyond the {model.max_range_m:.0f} m range") from None
        readings.append((anchor_id, value))
        log.append(Message("beacon", f"anchor-{anchor_id}", "mobile", value))
    return MeasurementInstance(mobile, tuple(readings), tuple(log))


def generate_dataset(dep: Deployment, model: ChannelModel, grid: GridSpec,
                     samples_per_point: int,
                     unknown_points=(), samples_per_unknown: int = 0,
                     ) -> tuple[Dataset, Dataset | None]:
    """Synthesize the survey datasets for one deployment.

    Returns (train_pool, unknown_test); unknown_test is None when no
    unknown positions are requested. RSSI columns follow the selected
    anchor ids in ascending order. Fully deterministic in model.seed.
    """
    if samples_per_point < 1:
        raise ValueError("samples_per_point must be at least 1")
    meta = (f"synthetic config={dep.selection.value} seed={model.seed} "
            f"n={model.path_loss_exponent} sigma={model.shadowing_sigma_db}")

    def collect(points, samples, domain):
        inputs, targets = [], []
        for p_idx, point in enumerate(points):
            for s_idx in range(samples):
                inst = measure(dep, model, point, p_idx, s_idx, domain)
                inputs.append(inst.rssi_vector())
                targets.append([point.x, point.y])
        return Dataset(np.array(inputs), np.array(targets), meta)

    pool = collect(grid_points(grid), samples_per_point, _GRID_DOMAIN)
    unknown = None
    if unknown_points and samples_per_unknown > 0:
        unknown = collect(list(unknown_points), samples_per_unknown,
                          _UNKNOWN_DOMAIN)
    return pool, unknown


# -- plain-text testbed configuration ---------------------------------------

_CHANNEL_KEYS = {
    "p0_dbm": float,
    "d0_m": float,
    "path_loss_exponent": float,
    "shadowing_sigma_db": float,
    "sensitivity_floor_dbm": float,
    "max_range_m": float,
    "seed": int,
}


def load_testbed_config(source) -> tuple[Deployment, ChannelModel]:
    """Parse a key = value testbed file.

    Recognized keys: ``anchor.<id> = x, y``, ``config = <name>``,
    ``room = x0, y0, x1, y1`` plus the ChannelModel fields
    (p0_dbm, d0_m, path_loss_exponent, shadowing_sigma_db,
    sensitivity_floor_dbm, max_range_m, seed). Omitted keys keep the
    reference defaults. Lines starting with '#' are comments.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text(encoding="utf-8")

    default = reference_deployment()
    anchors = dict(default.anchors)
    room = default.room
    selection = default.selection
    channel_kwargs = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"expected key = value, got {line!r}", line=lineno)
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        try:
            if key.startswith("anchor."):
                anchor_id = int(key.split(".", 1)[1])
                x, y = (float(v) for v in value.split(","))
                anchors[anchor_id] = Position(x, y)
            elif key == "config":
                selection = AnchorConfig.from_name(value)
            elif key == "room":
                parts = tuple(float(v) for v in value.split(","))
                if len(parts) != 4:
                    raise ValueError("room needs 4 numbers")
                room = parts
            elif key in _CHANNEL_KEYS:
                channel_kwargs[key] = _CHANNEL_KEYS[key](value)
            else:
                raise ValueError(f"unknown key {key!r}")
        except (ValueError, IndexError) as exc:
            raise ParseError(str(exc), line=lineno) from None

    try:
        deployment = Deployment(tuple(sorted(anchors.items())), selection, room)
        channel = ChannelModel(**channel_kwargs)
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    return deployment, channel
