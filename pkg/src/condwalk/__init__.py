"""Conditioned planar random walk and Brownian motion toolkit.

Samplers and exact oracles for the simple random walk conditioned to avoid
the origin or a finite set, the Brownian motion conditioned off a disk, the
excursion decompositions over geometric annuli shared by both, a dyadic
(KMT-type) walk/BM coupling and the paired-excursion coupling built on it,
and rate-of-escape statistics for all of the above.
"""

from .potential import (
    C0,
    GAMMA_EM,
    RHO0,
    AvoidSet,
    PotentialTable,
    build_avoid_set,
    default_table,
    equilibrium_measure,
    exact_hitting_distribution,
    potential_a,
    potential_asymptotic,
    potential_oracle,
    potential_series,
)
from .chains import (
    ChainSpec,
    LatticeTrajectory,
    conditioned_equals_hSA_check,
    escape_probability,
    escape_probability_mc,
    exit_time_expectation,
    sample_path,
    step_distribution,
)
from .diffusion import (
    DiffusionSpec,
    bessel_hitting_experiment,
    bessel_hitting_probability,
    green_1csrw,
    green_1csrw_exact,
    level_chain_step,
    level_radius,
    sample_bm_path,
    sample_hatW_direct,
)
from .excursions import (
    ExcursionRecord,
    LevelGeometry,
    build_hatS_excursion,
    build_hatW_excursion,
    gamma_membership,
    shell_norm2_bounds,
    shell_sites,
)
from .kmt import (
    CoupledPair1D,
    CoupledPair2D,
    controlled_between_integers_check,
    dyadic_couple_1d,
    lift_to_2d,
)
from .coupling import (
    CouplingParams,
    CouplingTranscript,
    align_rotation,
    catastrophe_survey,
    classify_try,
    run_coupling,
    transcript_bound_check,
)
from .escape import (
    FutureMinima,
    TestFunction,
    future_minima_stream,
    g_constant,
    g_exp_half,
    g_zero,
    hatSA_escape_stats,
    integral_test_experiment,
    lil_running_max,
    lil_running_max_diffusion,
)
from .manifest import RunManifest, validate_manifest

__version__ = "0.1.0"
