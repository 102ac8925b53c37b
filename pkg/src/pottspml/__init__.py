"""Hidden Potts model toolkit.

Simulation of smooth label fields (Swendsen-Wang, with a Gibbs oracle),
Gaussian emission and classification (per-site ML and ICM), two
pseudo-maximum-likelihood estimators of the smoothness parameter, and a
Monte Carlo harness for accuracy and contamination-sensitivity studies.
"""

from ._version import __version__
from .lattice import (
    GridDims,
    NeighborhoodSpec,
    FIRST_ORDER,
    SECOND_ORDER,
    LabelField,
    FormatError,
    neighbor_label_counts,
    global_agreement,
    degree,
    histogram_signature,
    neighbor_count_stack,
    own_neighbor_counts,
    read_lmap,
    write_lmap,
)
from .rng import RNG_ALGORITHM, derive_seed, make_rng, splitmix64
from .sampler import (
    SamplerConfig,
    swendsen_wang_sweep,
    gibbs_sweep,
    simulate_potts,
    empirical_state_histogram,
)
from .emission import (
    EmissionModel,
    RadiometricImage,
    build_separated_model,
    sample_emission,
    class_log_likelihood,
    log_likelihood_stack,
    ml_classify,
    read_rimg,
    write_rimg,
    read_emission_model,
    write_emission_model,
)
from .estimator import (
    ScoreContext,
    SolverOptions,
    EstimationResult,
    NonConvergenceError,
    score_prior,
    score_post,
    score_prior_grouped,
    score_derivative,
    root_condition,
    estimate_beta,
    sample_curve,
    DEGREE8_PARTITIONS,
    partition_index,
    interior_signature_histogram,
)
from .segmentation import IcmOptions, IcmResult, icm, posterior_log_objective
from .experiments import (
    ExperimentConfig,
    ReplicationRecord,
    AccuracyRow,
    parse_config,
    read_config,
    run_replication,
    aggregate,
    run_experiment,
)

__all__ = [name for name in dir() if not name.startswith("_")]
