"""Quantum state assignment flows on graphs of density matrices."""
from .flow import (
    FlowConfig,
    FlowResult,
    barycenter,
    initial_state,
    mu_flow_integrate,
    potential,
    potential_laplacian_form,
    qsaf_vector_field,
    rho_flow_lift,
    s_flow_field,
    similarity_density,
    spectral_limit,
    sqsaf_integrate,
)
from .graph import WeightedGraph, complete_graph, grid_graph, knn_graph, omega_apply, single_vertex_graph
from .hermitian import DomainError, bkm_metric, tmap, tmap_inv
from .manifold import (
    dgamma,
    dgamma_inv,
    exp_e,
    exp_e_inv,
    gamma,
    gamma_inv,
    likelihood_density,
    lift_exp_density,
    log_euclidean_exp,
    purity_gap,
    replicator_density,
    riemannian_grad,
)
from .simplex import s_flow_integrate, single_vertex_af

__version__ = "0.1.0"
