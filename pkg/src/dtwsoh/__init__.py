"""DTW cycle synchronization and LSTM capacity estimation for lithium-ion battery cycling data."""

from dtwsoh.dtw import FastDtwConfig, WarpPath, dtw_exact, fastdtw, validate_path
from dtwsoh.ingest import BatteryDataset, CycleRecord, SynthConfig, generate_synthetic, load_dataset, write_dataset
from dtwsoh.pipeline import ExperimentConfig, ExperimentReport, improvement, run_experiment
from dtwsoh.sync import SyncedCycle, select_reference, synchronize_cycle, synchronize_dataset

__version__ = "0.1.0"

__all__ = [
    "BatteryDataset",
    "CycleRecord",
    "ExperimentConfig",
    "ExperimentReport",
    "FastDtwConfig",
    "SyncedCycle",
    "SynthConfig",
    "WarpPath",
    "dtw_exact",
    "fastdtw",
    "generate_synthetic",
    "improvement",
    "load_dataset",
    "run_experiment",
    "select_reference",
    "synchronize_cycle",
    "synchronize_dataset",
    "validate_path",
    "write_dataset",
]
