"""Guided stereo matching: sparse disparity hints steering an SGM pipeline."""

from ._accel import backend_name
from .census import CensusImage, CostParams, build_cost_volume, census_transform, compute_costs
from .evaluation import EvalReport, compare, evaluate
from .guide import (
    depth_to_disparity,
    disparity_to_depth,
    enhance_volume,
    modulation_gradient,
    modulation_weight,
    read_hints,
    sample_hints,
    write_hints,
)
from .sgm import SgmParams, aggregate, left_right_check, run_pipeline, wta
from .types import (
    INVALID,
    Calibration,
    CostVolume,
    DisparityMap,
    FormatError,
    GrayImage,
    GuideParams,
    Polarity,
    SparseHints,
    StereoError,
    density,
)

__version__ = "0.1.0"
