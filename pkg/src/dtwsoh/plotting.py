"""Figure rendering for reports: capacity fade, synchronized channels,
per-cycle predictions and training curves. Everything goes to files via Agg."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from dtwsoh.ingest import CHANNELS, BatteryDataset  # noqa: E402
from dtwsoh.sync import SyncedCycle  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.0,
    "savefig.dpi": 120,
    "svg.hashsalt": "dtwsoh",
}

UNITS = {"temperature": "Temperature (°C)", "current": "Current (A)", "voltage": "Voltage (V)"}
SYNC_COLUMN = {"temperature": "T'", "current": "I'", "voltage": "V'"}


def size(scale: float = 1.0, aspect: float = 0.62) -> tuple[float, float]:
    width = 6.4 * scale
    return width, width * aspect


def save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # strip the version/date metadata so reruns produce identical PNGs
    fig.savefig(path, metadata={"Software": None} if path.suffix == ".png" else None, bbox_inches="tight")
    plt.close(fig)
    return path


def _pick_cycles(ids: Sequence[int], k: int = 4) -> list[int]:
    if len(ids) <= k:
        return list(ids)
    idx = np.unique(np.linspace(0, len(ids) - 1, k).round().astype(int))
    return [ids[i] for i in idx]


def plot_capacity(dataset: BatteryDataset, path, n_train: int | None = None) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=size(0.8))
        ids = [c.cycle_id for c in dataset.cycles]
        ax.plot(ids, dataset.capacities, "k.-", ms=3)
        if n_train:
            ax.axvline(n_train + 0.5, color="grey", ls="--", lw=0.8)
        ax.set_xlabel("Cycle")
        ax.set_ylabel("Capacity (Ah)")
        ax.set_title(f"{dataset.battery_id}: capacity per discharge cycle")
        return save(fig, path)


def plot_synced(dataset: BatteryDataset, synced: Sequence[SyncedCycle], path,
                cycle_ids: Sequence[int] | None = None) -> Path:
    """Raw channels (left) next to their synchronized index series (right)."""
    by_id = {s.cycle_id: s for s in synced}
    ids = list(cycle_ids) if cycle_ids else _pick_cycles(sorted(by_id))
    with plt.rc_context(RC):
        fig, axes = plt.subplots(3, 2, figsize=size(1.4, 1.0), sharex="col")
        for row, name in enumerate(CHANNELS):
            raw_ax, syn_ax = axes[row]
            for cid in ids:
                raw_ax.plot(dataset.cycle(cid).channel(name), label=f"cycle {cid}")
                syn_ax.plot(by_id[cid].channels[row].values, label=f"cycle {cid}")
            raw_ax.set_ylabel(UNITS[name])
            syn_ax.set_ylabel(f"{SYNC_COLUMN[name]} (sample index)")
        axes[0, 0].set_title("Original series")
        axes[0, 1].set_title("Synchronized on reference index")
        axes[-1, 0].set_xlabel("Time index")
        axes[-1, 1].set_xlabel("Reference time index")
        axes[0, 0].legend(loc="best")
        fig.tight_layout()
        return save(fig, path)


def plot_predictions(report, path) -> Path:
    rows = report.per_cycle
    ids = [r["cycle_id"] for r in rows]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=size(1.0))
        ax.plot(ids, [r["truth"] for r in rows], "k-", lw=1.4, label="Measured")
        ax.plot(ids, [r["pred_dtw"] for r in rows], "C0.-", ms=3, label=f"DTW-LSTM (test RMSE {report.rmse_dtw:.3f})")
        ax.plot(ids, [r["pred_manual"] for r in rows], "C3.-", ms=3,
                label=f"Truncation LSTM (test RMSE {report.rmse_manual:.3f})")
        ax.axvline(report.n_train + 0.5, color="grey", ls="--", lw=0.8)
        ax.set_xlabel("Cycle")
        ax.set_ylabel("Capacity (Ah)")
        frac = report.config.get("split", 0)
        ax.set_title(f"{report.battery_id}: {frac:.0%} training, improvement {report.improvement_pct:+.1f}%")
        ax.legend(loc="best")
        return save(fig, path)


def plot_history(report, path) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=size(0.8))
        ax.plot(np.arange(1, len(report.history_dtw) + 1), report.history_dtw, label="DTW-LSTM")
        ax.plot(np.arange(1, len(report.history_manual) + 1), report.history_manual, label="Truncation LSTM")
        ax.set_yscale("log")
        ax.set_xlabel("Epoch")
        ax.set_ylabel("Training RMSE (Ah)")
        ax.legend(loc="best")
        return save(fig, path)


def render_report(report, dataset: BatteryDataset, out_dir, stem: str = "report") -> list[Path]:
    out = Path(out_dir)
    return [
        plot_predictions(report, out / f"{stem}_predictions.png"),
        plot_history(report, out / f"{stem}_training.png"),
        plot_capacity(dataset, out / f"{stem}_capacity.png", report.n_train),
    ]
