"""Cycle synchronization: re-express every cycle on the reference cycle's index axis.

For each channel the sample cycle is warped onto the reference with FastDTW.
Slot ``k_r`` of the output holds the sample time index paired with it, or the
mean of the sample indexes when several are paired with the same ``k_r``.
The first and last slots are pinned to the sample's first and last index.
The three channels are aligned independently and stacked into an ``M x 3``
matrix ``[T', I', V']``.
"""

from __future__ import annotations

import csv
from concurrent.futures import Executor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from dtwsoh.dtw import FastDtwConfig, WarpPath, fastdtw
from dtwsoh.errors import DtwSohError, EmptyDataset, UnknownReferenceId, ValidationError
from dtwsoh.ingest import CHANNELS, BatteryDataset, CycleRecord

PROVENANCE = "dtw-sync"


class ReferencePolicy(str, Enum):
    FIRST = "first"
    LONGEST = "longest"


@dataclass(frozen=True, eq=False)
class SyncedChannel:
    values: np.ndarray
    channel_tag: str
    path: WarpPath | None = None

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class SyncedCycle:
    """Synchronized cycle. ``feature_matrix`` holds raw aggregated indexes;
    :meth:`inputs` returns what the estimator consumes (scaled by ``M - 1`` unless
    ``scaled`` is false)."""

    cycle_id: int
    channels: tuple[SyncedChannel, SyncedChannel, SyncedChannel]
    feature_matrix: np.ndarray
    capacity: float
    reference_id: int = 1
    scaled: bool = True
    provenance: str = field(default=PROVENANCE)

    @property
    def length(self) -> int:
        return int(self.feature_matrix.shape[0])

    def inputs(self) -> np.ndarray:
        if not self.scaled:
            return self.feature_matrix
        return self.feature_matrix / float(max(self.length - 1, 1))


def select_reference(dataset: BatteryDataset, policy: ReferencePolicy | str = ReferencePolicy.FIRST) -> int:
    """Pick the reference cycle id: the first cycle, or the longest (ties -> smallest id)."""
    if len(dataset) == 0:
        raise EmptyDataset(f"dataset {dataset.battery_id!r} has no cycles")
    policy = ReferencePolicy(policy)
    if policy is ReferencePolicy.FIRST:
        return min(c.cycle_id for c in dataset.cycles)
    best = max(dataset.cycles, key=lambda c: (len(c), -c.cycle_id))
    return best.cycle_id


def aggregate_path(path: WarpPath, m: int, *, pin_endpoints: bool = True) -> np.ndarray:
    """Mean sample index per reference index; every slot in ``range(m)`` must be hit.

    With ``pin_endpoints`` the first and last slots take the sample's first and
    last index (the path's end pairs) instead of a group mean, so every
    synchronized series runs from 0 to N-1.
    """
    counts = np.bincount(path.ref_idx, minlength=m)
    if counts.shape[0] != m or np.any(counts == 0):
        raise ValidationError(f"warp path does not cover all {m} reference indexes")
    sums = np.bincount(path.ref_idx, weights=path.sample_idx.astype(np.float64), minlength=m)
    values = sums / counts
    if pin_endpoints:
        values[0] = path.pairs[0, 1]
        values[-1] = path.pairs[-1, 1]
    return values


def synchronize_channel(reference, sample, cfg: FastDtwConfig | None = None,
                        channel_tag: str = "voltage") -> SyncedChannel:
    ref = np.asarray(reference, dtype=np.float64)
    path = fastdtw(ref, sample, cfg)
    return SyncedChannel(aggregate_path(path, ref.shape[0]), channel_tag, path)


def synchronize_cycle(reference_cycle: CycleRecord, sample_cycle: CycleRecord,
                      cfg: FastDtwConfig | None = None, *, scaled: bool = True) -> SyncedCycle:
    channels = tuple(
        synchronize_channel(reference_cycle.channel(name), sample_cycle.channel(name), cfg, name)
        for name in CHANNELS
    )
    matrix = np.column_stack([ch.values for ch in channels])
    matrix.setflags(write=False)
    return SyncedCycle(sample_cycle.cycle_id, channels, matrix, sample_cycle.capacity,
                       reference_id=reference_cycle.cycle_id, scaled=scaled)


def synchronize_dataset(dataset: BatteryDataset, reference_id: int | None = None,
                        cfg: FastDtwConfig | None = None, *, scaled: bool = True,
                        cycles: Sequence[CycleRecord] | None = None,
                        executor: Executor | None = None) -> list[SyncedCycle]:
    """Synchronize ``cycles`` (default: every cycle) against the reference cycle.

    Output is ordered by cycle id whatever order an ``executor`` finishes in.
    """
    if reference_id is None:
        reference_id = select_reference(dataset)
    try:
        reference = dataset.cycle(reference_id)
    except KeyError:
        raise UnknownReferenceId(f"reference cycle {reference_id} not in dataset {dataset.battery_id!r}") from None
    reference.validate()
    targets = sorted(cycles if cycles is not None else dataset.cycles, key=lambda c: c.cycle_id)

    def one(cycle: CycleRecord) -> SyncedCycle:
        try:
            cycle.validate()
            return synchronize_cycle(reference, cycle, cfg, scaled=scaled)
        except DtwSohError as exc:
            msg = str(exc)
            if f"cycle {cycle.cycle_id}" not in msg:
                msg = f"cycle {cycle.cycle_id}: {msg}"
            raise type(exc)(msg) from exc

    if executor is None:
        return [one(c) for c in targets]
    return list(executor.map(one, targets))


def write_synced_csv(synced: Sequence[SyncedCycle], path: str | Path) -> Path:
    """Dump synchronized matrices as ``cycle_id,row,Tp,Ip,Vp`` (raw indexes)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write("cycle_id,row,Tp,Ip,Vp\n")
        for sc in synced:
            for row, (tp, ip, vp) in enumerate(sc.feature_matrix):
                handle.write(f"{sc.cycle_id},{row},{tp:.6f},{ip:.6f},{vp:.6f}\n")
    return path


def read_synced_csv(path: str | Path) -> dict[int, np.ndarray]:
    rows: dict[int, list[list[float]]] = {}
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        for rec in csv.DictReader(handle):
            rows.setdefault(int(rec["cycle_id"]), []).append(
                [float(rec["Tp"]), float(rec["Ip"]), float(rec["Vp"])])
    return {cid: np.array(v) for cid, v in rows.items()}


def write_path_csv(path_obj: WarpPath, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write("k_r,k_s\n")
        for a, b in path_obj.pairs:
            handle.write(f"{a},{b}\n")
    return path


def read_path_csv(path: str | Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
