"""Population OD demand estimation for highway networks.

Scales a subsample origin-destination matrix by a single factor chosen
so that model-predicted ramp-to-ramp travel times best match observed
ones, using an analytical macroscopic flow model with an exact
derivative. See README.md for the workflow.
"""

from __future__ import annotations

from .errors import OdscaleError
from .estimate import (
    EstimateOptions,
    EstimationResult,
    GridSpec,
    GroundTruth,
    apply_scaling,
    estimate,
    grid_search_benchmark,
    objective,
)
from .flow import (
    FlowState,
    ModelParams,
    load_network,
    segment_counts,
    travel_time_derivative,
)
from .io import ScenarioBundle, discover_bundles, parse_scenario, read_sensors
from .kernels import BACKEND
from .metrics import (
    ObservationKind,
    PairedObservations,
    nrmse,
    pct_gap,
    pct_improvement,
    round_half_away_from_zero,
)
from .network import (
    AssignmentMatrix,
    NetworkSnapshot,
    ODPair,
    Path,
    Segment,
    build_snapshot,
    segment_demand_coefficients,
)
from .synthetic import SyntheticSpec, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "AssignmentMatrix",
    "BACKEND",
    "EstimateOptions",
    "EstimationResult",
    "FlowState",
    "GridSpec",
    "GroundTruth",
    "ModelParams",
    "NetworkSnapshot",
    "ODPair",
    "ObservationKind",
    "OdscaleError",
    "PairedObservations",
    "Path",
    "ScenarioBundle",
    "Segment",
    "SyntheticSpec",
    "apply_scaling",
    "build_snapshot",
    "discover_bundles",
    "estimate",
    "generate_synthetic",
    "grid_search_benchmark",
    "load_network",
    "nrmse",
    "objective",
    "parse_scenario",
    "pct_gap",
    "pct_improvement",
    "read_sensors",
    "round_half_away_from_zero",
    "segment_counts",
    "segment_demand_coefficients",
    "travel_time_derivative",
    "__version__",
]
