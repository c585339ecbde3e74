"""Channel generation and Monte Carlo experiment drivers."""
from .geometry import GeometrySample, draw_channels, path_loss_db, sample_geometry, trial_rng
from .runner import ExperimentResult, run_experiment, run_trial, validate_design
from .spec import KINDS, PRESETS, TABLE_I, ExperimentSpec, load_spec, preset

__all__ = ["GeometrySample", "draw_channels", "path_loss_db", "sample_geometry", "trial_rng",
           "ExperimentResult", "run_experiment", "run_trial", "validate_design", "KINDS",
           "PRESETS", "TABLE_I", "ExperimentSpec", "load_spec", "preset"]
