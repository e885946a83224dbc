"""Latency prediction laboratory for weighted-voting HotStuff.

Models basic and chained HotStuff view latency over WAN latency matrices,
searches weight assignments and leader rotations with simulated annealing,
and checks continuous weight vectors for Byzantine quorum safety.
"""

from .chained import ChainedViewTrace, predict_chained_run
from .errors import (
    EnergyEvaluationFailed,
    InvalidParameter,
    IoFailure,
    MalformedInput,
    QuorumUnreachable,
)
from .experiments import (
    ScenarioSpec,
    emit_results,
    run_comparison_campaign,
    run_scenario,
    run_sweep,
)
from .hotstuff import LeaderSchedule, ScenarioResult, ViewTrace, predict_run, predict_view
from .netmodel import (
    LatencyMatrix,
    MessageKind,
    generate_random_topology,
    load_fixture,
    load_latency_matrix,
    make_rng,
    sample_message_latency,
    save_latency_matrix,
)
from .optimizer import (
    AnnealParams,
    CandidateState,
    anneal,
    perturb_combined,
    perturb_continuous,
    perturb_discrete_weights,
    perturb_leader_schedule,
)
from .quorum import (
    ProtocolConfig,
    QuorumSafetyReport,
    Scheme,
    WeightAssignment,
    check_continuous_safety,
    make_config,
    make_discrete_assignment,
    make_equal_assignment,
    select_faulty,
    time_to_form_quorum,
)

__version__ = "0.1.0"
