"""Whisker-sensor contact point localization.

A planar whisker mounted on a moving base deflects against objects; the
bending moment at the base is the only measurement. This package provides
the quasi-static rod oracle used to generate ground truth, the calibrated
polynomial sensor model, Bayesian contact trackers (EKF, UKF, particle
filter) with a deterministic baseline, signal conditioning for contact and
break detection, and a benchmarking harness with reproducible reports.
"""

from .beam import (
    CURVED_WHISKER,
    STRAIGHT_WHISKER,
    Circle,
    ConvergenceError,
    ConvexPolygon,
    EquilibriumResult,
    EquilibriumSolver,
    PointPin,
    WhiskerSpec,
    indent_pin,
    pin_calibration_grid,
    rectangle,
    regular_polygon,
    solve_equilibrium,
    sweep_trajectory,
)
from .conditioning import (
    BandPassFilter,
    BreakDetector,
    ContactDetector,
    ContactPhase,
    default_thresholds,
)
from .estimators import (
    FilterConfig,
    GaussianBelief,
    ParticleBelief,
    ekf_step,
    init_belief,
    pf_step,
    ukf_step,
)
from .experiments import (
    Config,
    TrialRecord,
    build_report,
    contour_suite,
    emit_report,
    generate_trial,
    ingest_log,
    load_config,
    pin_suite,
    run_estimator,
    save_trial,
)
from .kinematics import BodyTwist, ContactState, Pose2, propagate, world_point
from .sensor_model import PolynomialModel, evaluate, fit, gradient, load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "BandPassFilter",
    "BodyTwist",
    "BreakDetector",
    "CURVED_WHISKER",
    "Circle",
    "Config",
    "ContactDetector",
    "ContactPhase",
    "ContactState",
    "ConvergenceError",
    "ConvexPolygon",
    "EquilibriumResult",
    "EquilibriumSolver",
    "FilterConfig",
    "GaussianBelief",
    "ParticleBelief",
    "PointPin",
    "PolynomialModel",
    "Pose2",
    "STRAIGHT_WHISKER",
    "TrialRecord",
    "WhiskerSpec",
    "build_report",
    "contour_suite",
    "default_thresholds",
    "ekf_step",
    "emit_report",
    "evaluate",
    "fit",
    "generate_trial",
    "gradient",
    "indent_pin",
    "ingest_log",
    "init_belief",
    "load_config",
    "load_model",
    "pf_step",
    "pin_calibration_grid",
    "pin_suite",
    "propagate",
    "rectangle",
    "regular_polygon",
    "run_estimator",
    "save_model",
    "save_trial",
    "solve_equilibrium",
    "sweep_trajectory",
    "ukf_step",
    "world_point",
]
