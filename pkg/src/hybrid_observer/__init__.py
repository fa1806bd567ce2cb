"""Hybrid distributed observers for multi-channel LTI systems.

Each agent senses one output channel of ``xdot = A x`` and combines a
reduced-order local observer with a consensus-based parameter estimator
that runs ``q`` rounds before every event time. The package synthesizes
the agents' matrices, certifies a convergence rate with a mixed matrix
norm contraction argument, and simulates the resulting hybrid system
over time-varying neighbor graphs.
"""

from .analysis import (
    ContractionCert,
    ObserverParams,
    build_Omega,
    build_Theta,
    certified_rate,
    certify,
    contraction_coefficient,
    min_iterations,
    min_observer_rate,
    mixed_norm,
)
from .exceptions import (
    AssumptionViolation,
    ConfigError,
    DesignError,
    HybridObserverError,
    NumericsError,
)
from .network import (
    Digraph,
    GraphSchedule,
    flocking_matrix,
    graph_at,
    is_strongly_connected,
    random_strongly_connected,
)
from .numerics import eigenvalues, mat_exp, nullspace, spectral_norm, zeta
from .simulator import (
    Disturbance,
    SimConfig,
    SimTrace,
    error_recursion_oracle,
    estimator_window,
    fit_rate,
    run,
)
from .system_design import (
    AgentDesign,
    SystemModel,
    build_L,
    check_joint_observability,
    design_agent,
    design_agents,
    place_observer_gain,
    reduce_pair,
    unobservable_subspace,
    validate_gain_matrix,
)

__version__ = "0.1.0"
