from .clt import (
    base_variance,
    clt_mean_term,
    clt_variance,
    clt_variance_blurring,
    clt_variance_nonblurring,
    lemma3_identity_check,
)
from .distribution import (
    BlurringMap,
    PopulationDistribution,
    blurring_map,
    default_quadrature,
    eta_derivative,
    eta_population,
    population_chain,
    propagate_distribution,
)
from .kernels import (
    T_MAX,
    KernelGrid,
    base_kernel,
    bridge_covariance,
    default_u_grid,
    kernel_H_blurring,
    kernel_H_nonblurring,
    kernel_K,
)

__all__ = [
    "T_MAX",
    "BlurringMap",
    "KernelGrid",
    "PopulationDistribution",
    "base_kernel",
    "base_variance",
    "blurring_map",
    "bridge_covariance",
    "clt_mean_term",
    "clt_variance",
    "clt_variance_blurring",
    "clt_variance_nonblurring",
    "default_quadrature",
    "default_u_grid",
    "eta_derivative",
    "eta_population",
    "kernel_H_blurring",
    "kernel_H_nonblurring",
    "kernel_K",
    "lemma3_identity_check",
    "population_chain",
    "propagate_distribution",
]
