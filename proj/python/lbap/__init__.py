"""Python bindings for the LBAP planner-uncertainty pipeline."""

from ._core import (
    LbapError,
    calibrate_from_scores,
    compute_posterior,
    default_threshold_grid,
    generate_tabletop,
    ground_textual,
    iou,
    min_calibration_size,
    prediction_set,
    sweep_config,
    sweep_synthetic,
)

__all__ = [
    "LbapError",
    "calibrate_from_scores",
    "compute_posterior",
    "default_threshold_grid",
    "generate_tabletop",
    "ground_textual",
    "iou",
    "min_calibration_size",
    "prediction_set",
    "sweep_config",
    "sweep_synthetic",
]
