"""Comparison experiment: DTW-synchronized LSTM vs. the manual-truncation LSTM."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from dtwsoh.dtw import FastDtwConfig
from dtwsoh.errors import CycleShorterThanTarget, DegenerateSplit, DivisionByZero, ValidationError
from dtwsoh.ingest import BatteryDataset, CycleRecord
from dtwsoh.nn import (
    FULL_ARCH,
    TINY_ARCH,
    Architecture,
    LstmModel,
    Sample,
    TrainConfig,
    evaluate,
    init_model,
    loss_rmse,
    train,
)
from dtwsoh.sync import PROVENANCE as SYNC_PROVENANCE
from dtwsoh.sync import ReferencePolicy, SyncedCycle, select_reference, synchronize_dataset

log = logging.getLogger(__name__)

TRUNC_PROVENANCE = "truncation"


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    chronological: bool = True

    def __post_init__(self) -> None:
        if not 0 < self.train_fraction < 1:
            raise DegenerateSplit(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if not self.chronological:
            raise ValidationError("only chronological splits are supported")


def split_train_test(dataset: BatteryDataset, spec: SplitSpec | float) -> tuple[list[CycleRecord], list[CycleRecord]]:
    """First ``floor(fraction * n)`` cycles train, the rest test."""
    if not isinstance(spec, SplitSpec):
        spec = SplitSpec(float(spec))
    n = len(dataset)
    if n < 3:
        raise DegenerateSplit(f"need at least 3 cycles, dataset has {n}")
    n_train = int(math.floor(spec.train_fraction * n + 1e-9))
    if n_train < 1 or n - n_train < 1:
        raise DegenerateSplit(f"fraction {spec.train_fraction} of {n} cycles gives {n_train} train / {n - n_train} test")
    cycles = list(dataset.cycles)
    return cycles[:n_train], cycles[n_train:]


def truncate_baseline(dataset: BatteryDataset, target_length: int | None = None) -> BatteryDataset:
    """Keep the last ``target_length`` ticks of every cycle (default: the shortest cycle's length)."""
    if target_length is None:
        target_length = min(dataset.lengths)
    if target_length < 1:
        raise ValidationError(f"target length must be >= 1, got {target_length}")
    out = []
    for c in dataset.cycles:
        if len(c) < target_length:
            raise CycleShorterThanTarget(
                f"cycle {c.cycle_id} has {len(c)} ticks, shorter than target {target_length}")
        k = len(c) - target_length
        out.append(CycleRecord(c.cycle_id, c.temperature[k:], c.current[k:], c.voltage[k:], c.capacity))
    return BatteryDataset(dataset.battery_id, out, rated_capacity=dataset.rated_capacity)


def improvement(rmse_dtw: float, rmse_manual: float) -> float:
    """Percentage change of the DTW error relative to the baseline; negative means lower error."""
    if rmse_manual == 0:
        raise DivisionByZero("baseline RMSE is zero; improvement is undefined")
    return (rmse_dtw - rmse_manual) / rmse_manual * 100.0


# --------------------------------------------------------------------------
# sample construction

@dataclass(frozen=True)
class MinMaxScaler:
    """Per-channel min-max scaling fitted on training cycles."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    @classmethod
    def fit(cls, cycles: Sequence[CycleRecord]) -> "MinMaxScaler":
        stacked = np.concatenate([c.ticks() for c in cycles])
        return cls(tuple(stacked.min(axis=0).tolist()), tuple(stacked.max(axis=0).tolist()))

    def transform(self, ticks: np.ndarray) -> np.ndarray:
        lo = np.array(self.lo)
        span = np.array(self.hi) - lo
        span[span == 0] = 1.0
        return (ticks - lo) / span


def synced_samples(synced: Sequence[SyncedCycle]) -> list[Sample]:
    return [Sample(s.cycle_id, s.inputs(), s.capacity, s.provenance) for s in synced]


def truncated_samples(cycles: Sequence[CycleRecord], scaler: MinMaxScaler) -> list[Sample]:
    return [Sample(c.cycle_id, scaler.transform(c.ticks()), c.capacity, TRUNC_PROVENANCE) for c in cycles]


def _require_provenance(samples: Sequence[Sample], tag: str) -> None:
    bad = [s.cycle_id for s in samples if s.provenance != tag]
    if bad:
        raise ValidationError(f"arm expected {tag!r} inputs, got other provenance for cycles {bad[:5]}")


# --------------------------------------------------------------------------
# experiment

PRESETS: dict[str, tuple[Architecture, TrainConfig]] = {
    "full": (FULL_ARCH, TrainConfig(epochs=100, lr=1e-3)),
    "tiny": (TINY_ARCH, TrainConfig(epochs=60, lr=5e-3)),
}


@dataclass(frozen=True)
class ExperimentConfig:
    split: float = 0.7
    seed: int = 42
    preset: str = "tiny"
    radius: int = 10
    min_size: int = 16
    reference: str = "first"
    truncate_len: int | None = None
    epochs: int | None = None
    lr: float | None = None
    batch_size: int | None = None
    clip_norm: float | None = 5.0

    def architecture(self) -> Architecture:
        return PRESETS[self.preset][0]

    def train_config(self) -> TrainConfig:
        base = PRESETS[self.preset][1]
        return replace(base, seed=self.seed, clip_norm=self.clip_norm,
                       epochs=self.epochs if self.epochs is not None else base.epochs,
                       lr=self.lr if self.lr is not None else base.lr,
                       batch_size=self.batch_size if self.batch_size is not None else base.batch_size)

    def dtw_config(self) -> FastDtwConfig:
        return FastDtwConfig(self.radius, self.min_size)

    def check(self) -> None:
        if self.preset not in PRESETS:
            raise ValidationError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        SplitSpec(self.split)
        ReferencePolicy(self.reference)
        self.train_config()
        self.dtw_config()


@dataclass
class ArmResult:
    rmse_test: float
    rmse_train: float
    predictions: dict[int, float]
    history: list[float]
    best_epoch: int
    model: LstmModel | None = field(default=None, repr=False)


@dataclass
class ExperimentReport:
    battery_id: str
    rmse_dtw: float
    rmse_manual: float
    improvement_pct: float
    rmse_dtw_train: float
    rmse_manual_train: float
    n_train: int
    n_test: int
    reference_id: int
    reference_length: int
    truncate_len: int
    per_cycle: list[dict]
    history_dtw: list[float]
    history_manual: list[float]
    config: dict
    seed: int
    timestamp: str | None = None

    def check(self) -> None:
        if abs(improvement(self.rmse_dtw, self.rmse_manual) - self.improvement_pct) > 0.1:
            raise ValidationError("improvement_pct inconsistent with stored RMSEs")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentReport":
        return cls(**doc)

    def write(self, out_dir: str | Path, stem: str = "report") -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        json_path = out / f"{stem}.json"
        json_path.write_text(self.to_json(), encoding="utf-8")
        csv_path = out / f"{stem}_predictions.csv"
        with csv_path.open("w", encoding="utf-8", newline="\n") as handle:
            handle.write("cycle_id,truth_Ah,pred_dtw_Ah,pred_manual_Ah\n")
            for row in self.per_cycle:
                handle.write(f"{row['cycle_id']},{row['truth']:.6f},{row['pred_dtw']:.6f},{row['pred_manual']:.6f}\n")
        return json_path, csv_path


def _run_arm(name: str, train_samples: list[Sample], test_samples: list[Sample], arch: Architecture,
             tcfg: TrainConfig, keep_model: bool) -> ArmResult:
    model = init_model(arch, tcfg.seed)
    t0 = time.perf_counter()
    result = train(model, train_samples, tcfg,
                   progress=lambda e, r: log.debug("%s epoch %d train RMSE %.5f", name, e, r))
    log.info("%s arm: %d epochs in %.1fs, best epoch %d", name, tcfg.epochs, time.perf_counter() - t0,
             result.best_epoch)
    pred_train = evaluate(result.model, train_samples)
    pred_test = evaluate(result.model, test_samples)
    preds = {s.cycle_id: float(p) for s, p in zip(train_samples, pred_train)}
    preds.update({s.cycle_id: float(p) for s, p in zip(test_samples, pred_test)})
    return ArmResult(
        rmse_test=loss_rmse(pred_test, [s.target for s in test_samples]),
        rmse_train=loss_rmse(pred_train, [s.target for s in train_samples]),
        predictions=preds,
        history=result.history,
        best_epoch=result.best_epoch,
        model=result.model if keep_model else None,
    )


def dtw_arm_samples(dataset: BatteryDataset, train_cycles: Sequence[CycleRecord], cfg: ExperimentConfig
                    ) -> tuple[int, list[SyncedCycle]]:
    # reference is chosen among training cycles only
    train_view = BatteryDataset(dataset.battery_id, train_cycles)
    ref_id = select_reference(train_view, cfg.reference)
    return ref_id, synchronize_dataset(dataset, ref_id, cfg.dtw_config())


def run_experiment(dataset: BatteryDataset, config: ExperimentConfig | None = None, *,
                   synced: Sequence[SyncedCycle] | None = None, timestamp: bool = True,
                   keep_models: bool = False) -> tuple[ExperimentReport, dict[str, ArmResult]]:
    """Train both arms with the same seed and hyperparameters and compare test RMSE.

    ``synced`` lets callers reuse a previous synchronization of ``dataset``
    against the first training cycle.
    """
    cfg = config or ExperimentConfig()
    cfg.check()
    dataset.validate()
    train_cycles, test_cycles = split_train_test(dataset, SplitSpec(cfg.split))
    train_ids = {c.cycle_id for c in train_cycles}
    arch, tcfg = cfg.architecture(), cfg.train_config()

    if synced is None:
        ref_id, synced = dtw_arm_samples(dataset, train_cycles, cfg)
    else:
        ref_id = synced[0].reference_id
        if ref_id not in train_ids:
            raise ValidationError(f"reference cycle {ref_id} is not a training cycle")
    by_id = {s.cycle_id: s for s in synced}
    dtw_train = synced_samples([by_id[c.cycle_id] for c in train_cycles])
    dtw_test = synced_samples([by_id[c.cycle_id] for c in test_cycles])
    _require_provenance(dtw_train + dtw_test, SYNC_PROVENANCE)

    trunc_len = cfg.truncate_len if cfg.truncate_len is not None else min(dataset.lengths)
    truncated = truncate_baseline(dataset, trunc_len)
    scaler = MinMaxScaler.fit([truncated.cycle(cid) for cid in sorted(train_ids)])
    man_train = truncated_samples([truncated.cycle(c.cycle_id) for c in train_cycles], scaler)
    man_test = truncated_samples([truncated.cycle(c.cycle_id) for c in test_cycles], scaler)
    _require_provenance(man_train + man_test, TRUNC_PROVENANCE)

    arm_dtw = _run_arm("dtw", dtw_train, dtw_test, arch, tcfg, keep_models)
    arm_man = _run_arm("manual", man_train, man_test, arch, tcfg, keep_models)

    per_cycle = [
        {"cycle_id": c.cycle_id, "split": "train" if c.cycle_id in train_ids else "test",
         "truth": c.capacity, "pred_dtw": arm_dtw.predictions[c.cycle_id],
         "pred_manual": arm_man.predictions[c.cycle_id]}
        for c in dataset.cycles
    ]
    config_echo = asdict(cfg)
    config_echo["architecture"] = asdict(arch)
    config_echo["train"] = asdict(tcfg)
    report = ExperimentReport(
        battery_id=dataset.battery_id,
        rmse_dtw=arm_dtw.rmse_test,
        rmse_manual=arm_man.rmse_test,
        improvement_pct=improvement(arm_dtw.rmse_test, arm_man.rmse_test),
        rmse_dtw_train=arm_dtw.rmse_train,
        rmse_manual_train=arm_man.rmse_train,
        n_train=len(train_cycles),
        n_test=len(test_cycles),
        reference_id=ref_id,
        reference_length=len(dataset.cycle(ref_id)),
        truncate_len=trunc_len,
        per_cycle=per_cycle,
        history_dtw=arm_dtw.history,
        history_manual=arm_man.history,
        config=config_echo,
        seed=cfg.seed,
        timestamp=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()) if timestamp else None,
    )
    report.check()
    return report, {"dtw": arm_dtw, "manual": arm_man}
