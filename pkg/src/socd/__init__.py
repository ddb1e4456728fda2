"""Sequential online chore division: model, mechanisms, metrics, experiments.

A convoy of agents shares one recurring chore (leading the convoy) while
membership changes over time. This package provides the timing model with
exact rational arithmetic, three allocation mechanisms (payment transfer,
repeated-game load balancing, and single-game load balancing with an
optional dynamic adjustment), fairness and efficiency metrics, and two
reproducible simulation experiments with a command-line front end.
"""

from .mechanisms import (
    ConvoyState,
    Ledger,
    MechanismKind,
    MechanismOutcome,
    Transfer,
    convoy_switch_cost,
    net_utilities,
    pt_run,
    pt_segment_payment,
    rg_run,
    run_mechanism,
    sg_adjust_shares,
    sg_run,
)
from .metrics import (
    UNSATISFIED_THRESHOLD,
    AllZeroSample,
    ConvergenceCurve,
    EmptySample,
    InsufficientRecords,
    ParticipationRecord,
    ZeroEpps,
    gini,
    gini_table,
    lead_ratio,
    unsatisfied_fraction,
)
from .model import (
    ActivePeriod,
    AgentSpec,
    DuplicateArrival,
    EmptyStream,
    EmptyWindow,
    GameParams,
    InvalidPresentSet,
    Schedule,
    Segment,
    ShareReport,
    SwitchEvent,
    SwitchKind,
    UnknownAgent,
    Violation,
    as_time,
    assigned_share,
    availability_union,
    eas_segments,
    efficiency,
    eps_segments,
    ex_ante_share,
    ex_post_share,
    game_duration,
    stream_segments,
    validate_schedule,
    validate_stream,
)
from .simulation import (
    HIGHWAY_MECHANISMS,
    ExperimentResult,
    HighwayParams,
    RingRoadParams,
    aggregate_curves,
    highway_experiment,
    ring_road_experiment,
    sample_stream,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # model
    "ActivePeriod",
    "AgentSpec",
    "DuplicateArrival",
    "EmptyStream",
    "EmptyWindow",
    "GameParams",
    "InvalidPresentSet",
    "Schedule",
    "Segment",
    "ShareReport",
    "SwitchEvent",
    "SwitchKind",
    "UnknownAgent",
    "Violation",
    "as_time",
    "assigned_share",
    "availability_union",
    "eas_segments",
    "efficiency",
    "eps_segments",
    "ex_ante_share",
    "ex_post_share",
    "game_duration",
    "stream_segments",
    "validate_schedule",
    "validate_stream",
    # mechanisms
    "ConvoyState",
    "Ledger",
    "MechanismKind",
    "MechanismOutcome",
    "Transfer",
    "convoy_switch_cost",
    "net_utilities",
    "pt_run",
    "pt_segment_payment",
    "rg_run",
    "run_mechanism",
    "sg_adjust_shares",
    "sg_run",
    # metrics
    "UNSATISFIED_THRESHOLD",
    "AllZeroSample",
    "ConvergenceCurve",
    "EmptySample",
    "InsufficientRecords",
    "ParticipationRecord",
    "ZeroEpps",
    "gini",
    "gini_table",
    "lead_ratio",
    "unsatisfied_fraction",
    # simulation
    "HIGHWAY_MECHANISMS",
    "ExperimentResult",
    "HighwayParams",
    "RingRoadParams",
    "aggregate_curves",
    "highway_experiment",
    "ring_road_experiment",
    "sample_stream",
]
