"""Bayesian spatial modeling with SPDE-GMRF and low-rank TPS random effects."""

from _spfit import (  # noqa: F401
    FemMatrices,
    Mesh,
    Model,
    TpsBasis,
    assemble_fem,
    assemble_q,
    build_full,
    ess_bulk,
    gamma_logpdf,
    gaussian_logpdf,
    matern_cov,
    projector_matrix,
    psis_loo,
    simulate,
    skew_normal_logpdf,
    split_rhat,
    tps_basis,
    tps_kernel,
    tps_knot_basis,
    triangulate,
    truncate_spectral,
)

__all__ = [
    "FemMatrices", "Mesh", "Model", "TpsBasis", "assemble_fem", "assemble_q",
    "build_full", "ess_bulk", "gamma_logpdf", "gaussian_logpdf", "matern_cov",
    "projector_matrix", "psis_loo", "simulate", "skew_normal_logpdf",
    "split_rhat", "tps_basis", "tps_kernel", "tps_knot_basis", "triangulate",
    "truncate_spectral",
]
