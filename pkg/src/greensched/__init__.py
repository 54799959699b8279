"""Temperature-aware DVFS and workload-allocation optimization for clusters
running mixed hard/firm/soft real-time tasks."""

from .errors import (
    ConfigurationError,
    EmptySampleError,
    GreenschedError,
    IncompleteEvaluationError,
    InfeasiblePeriodsError,
    InfeasibleTermError,
    InvalidAllocationError,
    InvalidArgumentError,
    ModelDomainError,
    ParseError,
    UnderdeterminedFitError,
)
from .nsga import EvolveConfig, EvolveResult, FrontPoint, ObjectiveVector, evolve
from .power import (
    DvfsMode,
    FitResult,
    ServerSpec,
    TelemetrySample,
    ThermalState,
    dynamic_energy,
    dynamic_power,
    fit_constants,
    leakage_current,
    leakage_energy,
    leakage_power,
    total_energy,
    total_power,
)
from .scenario import Scenario, load_scenario, load_server_spec, save_server_spec
from .sim import (
    Allocation,
    ClusterHost,
    EvaluationResult,
    JobOutcome,
    ServerOutcome,
    edf_schedule,
    evaluate_allocation,
    evaluate_objectives,
    validate_allocation,
)
from .tasks import (
    ConstraintCheck,
    ControlTaskSpec,
    HardTaskSpec,
    LatenessConstraint,
    SoftTaskSpec,
    TaskMissStats,
    check_constraints,
    choose_control_periods,
    control_constraint,
    lateness_fraction,
    utilization,
)
from .workload import (
    Job,
    JobTrace,
    TaskProfile,
    generate_jobs,
    hyperperiod_horizon,
    parse_trace,
    parse_workload,
    serialize_trace,
)

__version__ = "1.0.0"

__all__ = [
    "Allocation",
    "ClusterHost",
    "ConfigurationError",
    "ConstraintCheck",
    "ControlTaskSpec",
    "DvfsMode",
    "EmptySampleError",
    "EvaluationResult",
    "EvolveConfig",
    "EvolveResult",
    "FitResult",
    "FrontPoint",
    "GreenschedError",
    "HardTaskSpec",
    "IncompleteEvaluationError",
    "InfeasiblePeriodsError",
    "InfeasibleTermError",
    "InvalidAllocationError",
    "InvalidArgumentError",
    "Job",
    "JobOutcome",
    "JobTrace",
    "LatenessConstraint",
    "ModelDomainError",
    "ObjectiveVector",
    "ParseError",
    "Scenario",
    "ServerOutcome",
    "ServerSpec",
    "SoftTaskSpec",
    "TaskMissStats",
    "TaskProfile",
    "TelemetrySample",
    "ThermalState",
    "UnderdeterminedFitError",
    "check_constraints",
    "choose_control_periods",
    "control_constraint",
    "dynamic_energy",
    "dynamic_power",
    "edf_schedule",
    "evaluate_allocation",
    "evaluate_objectives",
    "evolve",
    "fit_constants",
    "generate_jobs",
    "hyperperiod_horizon",
    "lateness_fraction",
    "leakage_current",
    "leakage_energy",
    "leakage_power",
    "load_scenario",
    "load_server_spec",
    "parse_trace",
    "parse_workload",
    "save_server_spec",
    "serialize_trace",
    "total_energy",
    "total_power",
    "utilization",
    "validate_allocation",
]
