"""tacflow: a marker-image tactile sensing pipeline.

A synthetic deformable-membrane simulator produces marker-image sequences
with analytic ground truth; dense inverse-search optical flow recovers the
displacement field; a contact estimator derives contact area and shear force;
a calibration module fits the displacement-to-force map; and a closed-loop
grasp controller aligns simulated fingertips on contact-area feedback.
"""

from .calibration import (
    CalibrationModel,
    DEFAULT_SHEAR_MODEL,
    TimedSeries,
    evaluate,
    fit_cubic_origin,
    force_from_displacement,
    resample_sync,
)
from .contact import ContactState, EstimatorParams, contact_mask, divergence, estimate
from .errors import TacflowError
from .flow import FlowField, FlowParams, build_pyramid, dis_flow, endpoint_error
from .geometry import Rect, centered_square
from .imaging import (
    Frame,
    MarkerPattern,
    generate_marker_pattern,
    load_frame,
    read_pgm,
    save_frame,
    write_pgm,
)
from .grasp import (
    GraspRunParams,
    GraspScenario,
    GraspTrace,
    PayloadModel,
    align_step,
    payload_limit,
    run_grasp,
    scenario_observe,
)
from .membrane import (
    DeformationSpec,
    GroundTruth,
    analytic_field,
    ground_truth,
    render,
    simulate_sequence,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationModel",
    "ContactState",
    "DEFAULT_SHEAR_MODEL",
    "DeformationSpec",
    "EstimatorParams",
    "FlowField",
    "FlowParams",
    "Frame",
    "GraspRunParams",
    "GraspScenario",
    "GraspTrace",
    "GroundTruth",
    "MarkerPattern",
    "PayloadModel",
    "Rect",
    "TacflowError",
    "TimedSeries",
    "align_step",
    "analytic_field",
    "build_pyramid",
    "centered_square",
    "contact_mask",
    "dis_flow",
    "divergence",
    "endpoint_error",
    "estimate",
    "evaluate",
    "fit_cubic_origin",
    "force_from_displacement",
    "generate_marker_pattern",
    "ground_truth",
    "load_frame",
    "payload_limit",
    "read_pgm",
    "render",
    "resample_sync",
    "run_grasp",
    "save_frame",
    "scenario_observe",
    "simulate_sequence",
    "write_pgm",
]
