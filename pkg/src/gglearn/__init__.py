"""Structure and payoff learning for continuous-action games.

Players sit on a directed graph; each payoff is a sum of pairwise
functions of the player's own action and one in-neighbor's action,
expanded in a shared basis.  Given noisy payoff samples, the library
estimates the expansion coefficients per player with an l1-penalized
least-squares fit, reads the graph off the nonzero pattern, certifies
solver optimality, and checks the conditions under which the recovered
structure provably matches the truth.
"""

__version__ = "0.1.0"

from .basis import (
    BasisSet,
    CustomBasis,
    FourierPairwiseBasis,
    basis_from_json,
    basis_to_json,
    eval_basis,
    feature_matrix,
    feature_vector,
)
from .game import (
    GameSpec,
    PowerLawTail,
    ZeroTail,
    game_from_json,
    game_to_json,
    generate_game,
    load_game,
    save_game,
    true_utility,
)
from .sampling import (
    NoiseModel,
    SampleMeta,
    SampleSet,
    build_sample_set,
    draw_actions,
    load_sample_set,
    noisy_payoff,
    save_sample_set,
)
from .solver import (
    KktReport,
    SolverConfig,
    SolverConvergenceError,
    SolverResult,
    assemble_regression,
    kkt_certificate,
    solve_player,
)
from .recovery import (
    PlayerEstimate,
    RecoveryResult,
    StructureMetrics,
    assemble_graph,
    extract_support,
    graph_to_adjacency,
    graph_to_dot,
    learn_game,
    payoff_error,
    reconstruct_payoff,
    structure_metrics,
)
from .diagnostics import (
    DiagnosticsReport,
    NotApplicableError,
    check_incoherence,
    check_min_weight,
    check_positive_definiteness,
    compute_gram,
    compute_noisy_gram,
    diagnose_game,
    diagnose_player,
    error_bounds,
    lambda_threshold,
    noisy_condition_frequency,
    render_report_table,
    tail_bound,
)
from .experiments import (
    CellResult,
    CellSpec,
    FixedPenalty,
    ScalingResult,
    SweepConfig,
    ThresholdPenalty,
    run_cell,
    run_sweep,
    scaling_study,
)
from .ingest import (
    TableParseError,
    influence_ranking,
    load_table,
    make_fixture,
)
