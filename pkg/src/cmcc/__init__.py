"""Constrained maximum correntropy adaptive filtering."""

from .constraints import ConstraintSet, build_constraints, check_feasible, linear_phase_matrix, random_constraints
from .errors import (
    CMCCError,
    ConfigurationError,
    ConstraintRankError,
    DimensionError,
    InfiniteMomentError,
    InputError,
    InstabilityError,
    TheoryInapplicableError,
)
from .filters import ALGORITHMS, FilterState, HyperParams, cap_step, clms_step, cmcc_step, crls_step, init_filter, step
from .noise import (
    AlphaStableNoise,
    BinaryNoise,
    CauchyNoise,
    GaussianNoise,
    LaplaceNoise,
    MixedGaussianNoise,
    Moment,
    NoiseModel,
    noise_from_dict,
    noise_moment,
    sample,
)
from .theory import (
    SteadyStatePrediction,
    TheoryInputs,
    f_matrix,
    limiting_gains,
    optimal_weights,
    stability_bound,
    steady_state_msd,
)

__version__ = "0.1.0"
