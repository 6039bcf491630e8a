"""Two-point certification of quantum states, unitary channels and von
Neumann measurements under a type-I error bound."""

from .config import (
    DimensionLimitError,
    EigensolverError,
    FeasibilityError,
    NotPSDError,
    OptimizerError,
    QcertError,
    SupportPointError,
    Tolerances,
    ValidationError,
    set_tolerances,
    tol,
    tolerances,
)
from .linalg import DensityOperator, Effect, PureState, UnitaryOperator, VonNeumannMeasurement
from .numrange import RangeSet, hull_of_unitary, nu_q_unitary, nu_unitary, spectral_spread, wq_boundary_samples
from .povm import (
    DephasedStrategy,
    PovmCertProblem,
    assemble_povm_strategy,
    diamond_distance_povm,
    optimize_e0,
    p2_povm,
    p2_povm_parallel,
)
from .simulator import SimReport, brute_force_best_p2, exact_errors, run_protocol
from .states import (
    StateCertProblem,
    StateStrategy,
    min_copies_perfect_states,
    optimal_state_measurement,
    p2_states,
    p2_states_parallel,
)
from .unitary import (
    UnitaryCertProblem,
    UnitaryStrategy,
    min_copies_perfect_unitary,
    optimal_unitary_strategy,
    p2_unitary,
    p2_unitary_parallel,
)

__version__ = "0.1.0"
