"""Synthetic operating-room scenarios standing in for recorded surgeries."""

from .dataset import (
    DatasetConfig,
    DatasetSchemaError,
    generate_corpus,
    read_dataset,
    read_manifest,
    split_scenarios,
    write_dataset,
)
from .render import render_timepoint
from .scenario import Action, ScenarioScript, SynthConfig, generate_scenario

__all__ = [
    "Action",
    "DatasetConfig",
    "DatasetSchemaError",
    "ScenarioScript",
    "SynthConfig",
    "generate_corpus",
    "generate_scenario",
    "read_dataset",
    "read_manifest",
    "render_timepoint",
    "split_scenarios",
    "write_dataset",
]
