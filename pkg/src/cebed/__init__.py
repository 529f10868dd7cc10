"""Benchmark toolkit for pilot-assisted OFDM channel estimation."""

from cebed.bench import BenchConfig, BenchReport, run_suite
from cebed.classical import ChannelStats, PilotObservation
from cebed.data import Dataset, ScenarioFamily
from cebed.estimators import ALMMSEEstimator, LMMSEEstimator, LSEstimator, NeuralEstimator, make_estimator
from cebed.grid import ComplexGrid, GridDims, Profile, ScenarioSpec

__version__ = "0.1.0"

__all__ = [
    "ALMMSEEstimator",
    "BenchConfig",
    "BenchReport",
    "ChannelStats",
    "ComplexGrid",
    "Dataset",
    "GridDims",
    "LMMSEEstimator",
    "LSEstimator",
    "NeuralEstimator",
    "PilotObservation",
    "Profile",
    "ScenarioFamily",
    "ScenarioSpec",
    "make_estimator",
    "run_suite",
]
