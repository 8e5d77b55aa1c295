"""Nested, hierarchical and flat Double-DQN agents for a block-building grid world."""
from .arena import Arena, Material, NestedAction, ShapeSpec, get_shape
from .config import ExperimentConfig
from .harness import run_experiment

__all__ = [
    "Arena",
    "ExperimentConfig",
    "Material",
    "NestedAction",
    "ShapeSpec",
    "get_shape",
    "run_experiment",
]
