"""Battery discharge-cycle data: CSV loading/writing and a seeded synthetic generator.

The on-disk layout is one row per tick::

    cycle_id,tick_index,temperature_C,current_A,voltage_V,capacity_Ah

with the cycle's capacity label repeated on every row of that cycle.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from dtwsoh.errors import (
    ChannelLengthMismatch,
    InvalidConfig,
    MissingColumn,
    NonContiguousCycleIds,
    NonFiniteValue,
    ValidationError,
)

CHANNELS = ("temperature", "current", "voltage")
VOLTAGE_BAND = (0.0, 10.0)


@dataclass(frozen=True)
class CsvSchema:
    cycle_id: str = "cycle_id"
    tick_index: str = "tick_index"
    temperature: str = "temperature_C"
    current: str = "current_A"
    voltage: str = "voltage_V"
    capacity: str = "capacity_Ah"

    @property
    def columns(self) -> tuple[str, ...]:
        return (self.cycle_id, self.tick_index, self.temperature,
                self.current, self.voltage, self.capacity)


@dataclass(frozen=True, eq=False)
class CycleRecord:
    """One discharge cycle. Channels are 1-D float arrays of equal length."""

    cycle_id: int
    temperature: np.ndarray
    current: np.ndarray
    voltage: np.ndarray
    capacity: float

    def __post_init__(self) -> None:
        for name in CHANNELS:
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "capacity", float(self.capacity))
        object.__setattr__(self, "cycle_id", int(self.cycle_id))

    def __len__(self) -> int:
        return int(self.voltage.shape[0])

    def channel(self, name: str) -> np.ndarray:
        if name not in CHANNELS:
            raise KeyError(name)
        return getattr(self, name)

    def ticks(self) -> np.ndarray:
        """(n, 3) array of temperature, current, voltage."""
        return np.column_stack([self.temperature, self.current, self.voltage])

    def validate(self) -> None:
        lengths = {name: getattr(self, name).shape for name in CHANNELS}
        if len(set(lengths.values())) != 1 or self.voltage.ndim != 1:
            raise ChannelLengthMismatch(
                f"cycle {self.cycle_id}: channel lengths differ {lengths}")
        if len(self) < 2:
            raise ValidationError(f"cycle {self.cycle_id}: needs at least 2 ticks, got {len(self)}")
        for name in CHANNELS:
            bad = np.flatnonzero(~np.isfinite(getattr(self, name)))
            if bad.size:
                raise NonFiniteValue(
                    f"cycle {self.cycle_id}: non-finite {name} at tick {int(bad[0])}")
        lo, hi = VOLTAGE_BAND
        bad = np.flatnonzero((self.voltage < lo) | (self.voltage > hi))
        if bad.size:
            raise ValidationError(
                f"cycle {self.cycle_id}: voltage {self.voltage[bad[0]]} at tick {int(bad[0])} "
                f"outside [{lo}, {hi}] V")
        if not (math.isfinite(self.capacity) and self.capacity > 0):
            raise ValidationError(f"cycle {self.cycle_id}: capacity must be > 0, got {self.capacity}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CycleRecord):
            return NotImplemented
        return (self.cycle_id == other.cycle_id
                and self.capacity == other.capacity
                and all(np.array_equal(getattr(self, c), getattr(other, c)) for c in CHANNELS))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class BatteryDataset:
    battery_id: str
    cycles: tuple[CycleRecord, ...]
    rated_capacity: float | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "cycles", tuple(self.cycles))

    def __len__(self) -> int:
        return len(self.cycles)

    def __iter__(self):
        return iter(self.cycles)

    @property
    def lengths(self) -> list[int]:
        return [len(c) for c in self.cycles]

    @property
    def capacities(self) -> np.ndarray:
        return np.array([c.capacity for c in self.cycles])

    def cycle(self, cycle_id: int) -> CycleRecord:
        for c in self.cycles:
            if c.cycle_id == cycle_id:
                return c
        raise KeyError(cycle_id)

    def validate(self, min_cycles: int = 3) -> None:
        ids = [c.cycle_id for c in self.cycles]
        if ids != list(range(1, len(ids) + 1)):
            for expected, got in enumerate(ids, start=1):
                if got != expected:
                    raise NonContiguousCycleIds(
                        f"expected cycle_id {expected}, found {got}; ids must run 1..n without gaps")
        if len(self.cycles) < min_cycles:
            raise ValidationError(
                f"dataset {self.battery_id!r} has {len(self.cycles)} cycles, need at least {min_cycles}")
        for c in self.cycles:
            c.validate()


def _parse_float(text: str, column: str, lineno: int, cycle_id: object) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ValidationError(
            f"row {lineno} (cycle {cycle_id}): cannot parse {column}={text!r}") from None
    if not math.isfinite(value):
        raise NonFiniteValue(f"row {lineno} (cycle {cycle_id}): non-finite {column}={text!r}")
    return value


def load_dataset(path: str | Path, schema: CsvSchema | None = None, *,
                 battery_id: str | None = None, min_cycles: int = 3) -> BatteryDataset:
    """Read and validate a dataset written in the per-tick CSV layout.

    Rows must be sorted by ``(cycle_id, tick_index)`` and tick indexes must
    count up from 0 within each cycle. Errors name the offending row/cycle.
    """
    schema = schema or CsvSchema()
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset file not found: {path}")

    cycles: list[CycleRecord] = []
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MissingColumn(f"{path}: empty file, header row required") from None
        missing = [c for c in schema.columns if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")
        pos = {c: header.index(c) for c in schema.columns}

        cur_id: int | None = None
        buf: dict[str, list[float]] = {}
        cap: float | None = None

        def flush() -> None:
            if cur_id is not None:
                cycles.append(CycleRecord(cur_id, buf["temperature"], buf["current"],
                                          buf["voltage"], cap))

        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise ChannelLengthMismatch(
                    f"row {lineno}: expected {len(header)} fields, got {len(row)}")
            raw_id = row[pos[schema.cycle_id]].strip()
            try:
                cid = int(raw_id)
                tick = int(row[pos[schema.tick_index]].strip())
            except ValueError:
                raise ValidationError(f"row {lineno}: cycle_id/tick_index must be integers") from None
            if cid != cur_id:
                if cur_id is not None and cid < cur_id:
                    raise ValidationError(f"row {lineno}: rows not sorted by cycle_id ({cid} after {cur_id})")
                flush()
                expected = cycles[-1].cycle_id + 1 if cycles else 1
                if cid != expected:
                    raise NonContiguousCycleIds(
                        f"row {lineno}: cycle_id {cid} follows {expected - 1}; ids must run 1..n without gaps")
                cur_id, cap = cid, None
                buf = {name: [] for name in CHANNELS}
            if tick != len(buf["voltage"]):
                raise ValidationError(
                    f"row {lineno} (cycle {cid}): tick_index {tick}, expected {len(buf['voltage'])}")
            for name in CHANNELS:
                cell = row[pos[getattr(schema, name)]].strip()
                if cell == "":
                    raise ChannelLengthMismatch(
                        f"row {lineno} (cycle {cid}): {name} channel has no value at tick {tick}")
                buf[name].append(_parse_float(cell, getattr(schema, name), lineno, cid))
            row_cap = _parse_float(row[pos[schema.capacity]].strip(), schema.capacity, lineno, cid)
            if cap is None:
                cap = row_cap
            elif row_cap != cap:
                raise ValidationError(
                    f"row {lineno} (cycle {cid}): capacity {row_cap} differs from cycle label {cap}")
        flush()

    dataset = BatteryDataset(battery_id or path.stem, cycles)
    dataset.validate(min_cycles=min_cycles)
    return dataset


def write_dataset(dataset: BatteryDataset, path: str | Path, schema: CsvSchema | None = None) -> Path:
    """Canonical writer: UTF-8, LF endings, ``%.6f`` channel values."""
    schema = schema or CsvSchema()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(schema.columns) + "\n")
        for c in dataset.cycles:
            cap = f"{c.capacity:.6f}"
            for k in range(len(c)):
                handle.write(f"{c.cycle_id},{k},{c.temperature[k]:.6f},{c.current[k]:.6f},"
                             f"{c.voltage[k]:.6f},{cap}\n")
    return path


# --------------------------------------------------------------------------
# synthetic data

@dataclass(frozen=True)
class SynthConfig:
    """Knobs for :func:`generate_synthetic`.

    Tick length of each cycle is ``round(base_length * capacity / initial_capacity)``,
    so cycle 1 always has ``base_length`` ticks.
    """

    n_cycles: int = 132
    initial_capacity: float = 1.86
    fade_rate: float = 0.0053
    regen_probability: float = 0.05
    regen_gain: float = 0.025
    regen_decay: float = 0.6
    base_length: int = 357
    voltage_ceiling: float = 4.2
    voltage_cutoff: float = 2.5
    discharge_current: float = -2.0
    ambient_temperature: float = 24.0
    temperature_rise: float = 14.0
    voltage_noise: float = 0.004
    current_noise: float = 0.004
    temperature_noise: float = 0.05
    battery_id: str = "synthetic"

    def check(self) -> None:
        if self.n_cycles < 3:
            raise InvalidConfig(f"n_cycles must be >= 3, got {self.n_cycles}")
        if self.base_length < 2:
            raise InvalidConfig(f"base_length must be >= 2, got {self.base_length}")
        if not self.initial_capacity > 0:
            raise InvalidConfig(f"initial_capacity must be > 0, got {self.initial_capacity}")
        if not 0 <= self.fade_rate < 1:
            raise InvalidConfig(f"fade_rate must lie in [0, 1), got {self.fade_rate}")
        if not 0 <= self.regen_probability <= 1:
            raise InvalidConfig(f"regen_probability must lie in [0, 1], got {self.regen_probability}")
        if self.regen_gain < 0 or not 0 <= self.regen_decay < 1:
            raise InvalidConfig("regen_gain must be >= 0 and regen_decay in [0, 1)")
        if not self.voltage_ceiling > self.voltage_cutoff > 0:
            raise InvalidConfig("need voltage_ceiling > voltage_cutoff > 0")
        if min(self.voltage_noise, self.current_noise, self.temperature_noise) < 0:
            raise InvalidConfig("noise levels must be >= 0")


def b18_like_config(**overrides) -> SynthConfig:
    """132 cycles shrinking from 357 to 178 ticks, without regeneration."""
    fade = 1.0 - (178.0 / 357.0) ** (1.0 / 131.0)
    params = dict(n_cycles=132, base_length=357, fade_rate=fade, regen_probability=0.0,
                  battery_id="B18-synthetic")
    params.update(overrides)
    return SynthConfig(**params)


def _quantize(values: Iterable[float]) -> np.ndarray:
    # matches the %.6f writer so load(write(d)) == d
    return np.array([float(f"{v:.6f}") for v in values])


def _capacity_sequence(cfg: SynthConfig, rng: np.random.Generator) -> list[float]:
    caps = [cfg.initial_capacity]
    trend = cfg.initial_capacity
    offset = 0.0
    for _ in range(1, cfg.n_cycles):
        trend *= 1.0 - cfg.fade_rate
        if cfg.regen_probability > 0 and rng.random() < cfg.regen_probability:
            cap = caps[-1] * (1.0 + cfg.regen_gain)
            offset = cap / trend - 1.0
        else:
            offset *= cfg.regen_decay
            cap = trend * (1.0 + offset)
            if cfg.fade_rate > 0:
                cap = min(cap, caps[-1] * (1.0 - 1e-6))
        caps.append(cap)
    return caps


def _discharge_profile(cfg: SynthConfig, n: int, health: float,
                       rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    u = np.linspace(0.0, 1.0, n)
    span = cfg.voltage_ceiling - cfg.voltage_cutoff
    # aged cells sag earlier: a larger linear share and a softer knee
    lin = 0.30 + 0.25 * (1.0 - health)
    voltage = cfg.voltage_ceiling - span * (lin * u + (1.0 - lin) * u ** (4.0 + 4.0 * health))
    voltage = voltage + rng.uniform(-cfg.voltage_noise, cfg.voltage_noise, n)
    voltage = np.clip(voltage, cfg.voltage_cutoff - cfg.voltage_noise, cfg.voltage_ceiling + cfg.voltage_noise)

    current = cfg.discharge_current + rng.uniform(-cfg.current_noise, cfg.current_noise, n)

    peak = 0.88
    rise = cfg.temperature_rise * (0.8 + 0.2 * health)
    shape = np.where(u <= peak, (u / peak) ** 1.5, np.exp(-(u - peak) / 0.06))
    temperature = cfg.ambient_temperature + rise * shape
    temperature = temperature + rng.uniform(-cfg.temperature_noise, cfg.temperature_noise, n)
    return temperature, current, voltage


def generate_synthetic(config: SynthConfig | None = None, seed: int = 42) -> BatteryDataset:
    """Seeded synthetic fade dataset with uneven cycle lengths.

    Capacity decays geometrically by ``fade_rate`` per cycle; with probability
    ``regen_probability`` a cycle regenerates (capacity jumps by ``regen_gain``)
    and the excess then decays back towards the trend. Tick length tracks
    capacity, so regenerated cycles are also longer.
    """
    cfg = config or SynthConfig()
    cfg.check()
    rng = np.random.default_rng(seed)
    caps = _capacity_sequence(cfg, rng)
    cycles = []
    for k, cap in enumerate(caps, start=1):
        ratio = cap / cfg.initial_capacity
        n = max(2, int(round(cfg.base_length * ratio)))
        t, i, v = _discharge_profile(cfg, n, min(ratio, 1.0), rng)
        cycles.append(CycleRecord(k, _quantize(t), _quantize(i), _quantize(v), float(f"{cap:.6f}")))
    dataset = BatteryDataset(cfg.battery_id, cycles, rated_capacity=cfg.initial_capacity)
    dataset.validate()
    return dataset


def dataset_from_arrays(battery_id: str, channels: Sequence[tuple[Sequence[float], Sequence[float], Sequence[float]]],
                        capacities: Sequence[float]) -> BatteryDataset:
    """Build a dataset from per-cycle ``(temperature, current, voltage)`` tuples."""
    if len(channels) != len(capacities):
        raise ValidationError("need one capacity per cycle")
    cycles = [CycleRecord(k, t, i, v, cap)
              for k, ((t, i, v), cap) in enumerate(zip(channels, capacities), start=1)]
    return BatteryDataset(battery_id, cycles)
