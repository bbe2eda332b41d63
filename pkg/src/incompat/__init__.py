"""Joint measurability, incompatibility preservability, and filter games.

A desk-scale (d = 2..4) toolkit that decides joint measurability of
measurement assemblages, computes certified lower and upper bounds on a
channel's incompatibility-preservability robustness, scores
entanglement-assisted filter games, and verifies the structural
guarantees of the underlying resource theory numerically.
"""

from .config import DEFAULT_TOL, Tolerances
from .objects import Channel, Effect, Filter, FilterOutcome, MeasurementAssemblage, QState
from .channels import (
    channel_of_choi,
    choi_of_channel,
    depolarising,
    heisenberg,
    identity_channel,
    max_entangled,
    measure_prepare_channel,
    measure_z_prepare,
    pushforward,
    random_channel,
    singlet_fraction,
)
from .linalg import partial_trace
from .diamond import diamond_distance
from .jm import (
    DeterministicResponse,
    JmVerdict,
    ParentPOVM,
    deterministic_responses,
    jm_decide,
    jm_visibility,
    jm_visibility_bisect,
    mub_assemblage,
    pauli_assemblage,
    trivial_assemblage,
)
from .preservability import (
    IaCertificateReport,
    ProbeFamily,
    RobustnessBounds,
    bounds,
    depolarising_report,
    eb_robustness_ub,
    probe_ia_test,
    restricted_robustness_lb,
    sf_lower_bounds,
)
from .allowed_ops import (
    AllowedOperation,
    Instrument,
    apply_ao,
    compose_ao,
    default_ao_bank,
    golden_rule_check,
    identity_ao,
    parent_after_ao,
    random_ao,
)
from .games import (
    GameBound,
    GameScore,
    conversion_falsifier,
    game_lb,
    gamma_reduce,
    ia_denominator,
    phi_plus_filter,
    pmax_search,
    score,
    witness_bound,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
