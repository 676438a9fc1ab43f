"""Algebraic analysis and model selection for linear structural equation
models represented as mixed graphs."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .graphs import (
    ColliderType,
    MixedGraph,
    canonical_code,
    collider_type,
    count_acyclic,
    delete_edges,
    enumerate_acyclic,
    load_graph,
    parse_graph_text,
    skeleton,
    structure_predicates,
)
from .halftrek import (
    HtcStatus,
    IdentifyingSets,
    Membership,
    ParamPair,
    build_linear_system,
    find_identifying_sets,
    half_trek_reachable,
    membership,
    phi,
    recover_lambda,
    recover_omega,
)
from .polynomials import Polynomial, RationalFunction, Ring, canonicalize, solve_symbolic
from .constraints import (
    ConstraintSet,
    clusters_equivalent,
    lambda_symbolic,
    recognize,
    sigma_ring,
    theorem1_constraints,
    vanishes_on_model,
    vanishing_pcorr_poly,
)
from .equivalence import (
    ClassTable,
    Clustering,
    RankReport,
    build_class_table,
    cluster_all,
    generic_rank,
    is_finite_to_one,
    jacobian_at,
    merge_clusters,
    model_dimension,
    prop1_check,
    theorem2_equivalents,
)
from .fitting import (
    FitOptions,
    FitResult,
    SampleCov,
    ScoreReport,
    bic,
    fisher_z_test,
    fit_class,
    log_likelihood,
    partial_corr,
    prop2_holds,
    random_sem,
    recover_params_via_equivalent,
    ricf_fit,
    sample_cov_from_data,
    sample_data,
    select_class,
)
from .ystruct import (
    battery_pass,
    extended_y_structure_graph,
    is_y_pattern,
    latent_projection,
    run_experiment,
    y_structure_graph,
)

__version__ = "0.1.0"
