"""Cooperative robust output regulation for linear multi-agent systems
with input and communication delays.

The package synthesises distributed internal-model controllers over a
leader-follower digraph, verifies them through the delay regulator
equations and simulates the closed-loop delay dynamics.
"""

from .exceptions import (
    AssumptionViolation,
    BorderlineRankWarning,
    CoopregError,
    DimensionError,
    GraphConsistencyError,
    GridRefinementError,
    MinimalPolynomialAmbiguity,
    NoSpanningTree,
    NumericFailure,
    RegulatorSingular,
    SimulationDivergence,
    SynthesisInfeasible,
)
from .graph import Digraph, has_spanning_tree_from_leader, laplacian_parts, virtual_errors
from .numerics import (
    companion,
    eigenvalues,
    mat_exp,
    minimal_polynomial,
    solve_dual_riccati,
    solve_parametric_are,
    spectral_split,
)
from .plant import (
    AgentPlant,
    Exosystem,
    PlantEnsemble,
    build_internal_model,
    check_assumptions,
)
from .regulator import solve_delay_regulator, verify_regulation
from .scenarios import double_integrator_team
from .sim import (
    DelaySystem,
    History,
    decay_metrics,
    integrate,
    simulate_output_feedback,
    simulate_state_feedback,
)
from .synthesis import (
    OUTPUT_FEEDBACK,
    STATE_FEEDBACK,
    assemble_closed_loop,
    certify,
    dde_rightmost_root,
    low_gain_K,
    synthesize_output_feedback,
    synthesize_state_feedback,
)

__version__ = "0.1.0"
