// SPDX-License-Identifier: Apache-2.0

//! Test-function spaces, boundary-condition heat semigroups and a slow-bond
//! exclusion simulator for studying equilibrium density fluctuations.

pub mod error;
pub mod kernels;
pub mod semigroups;
pub mod simulator;
pub mod stats;
pub mod testfn;

pub use error::{Error, Result};
pub use kernels::{heat_kernel, heat_kernel_deriv, integrate, Domain, QuadratureConfig};
pub use semigroups::{
    apply, apply_dirichlet, apply_line, apply_neumann, apply_robin, continuity_modulus, generator_residual,
    gradnorm_curve, semigroup_apply, RobinRoute, SemigroupQuery,
};
pub use simulator::{
    exact_small_ctmc, fluctuation, init, run_replicas, step_to, ChainRates, FieldProbe, FieldSample, LatticeConfig,
    ParticleState,
};
pub use stats::{
    dynkin_martingale_test, empirical_covariance, exponential_martingale_test, exponential_weights, lattice_covariance,
    ou_covariance_oracle, phase_transition_report, CovEstimate, OUParams, RegimeCampaign,
};
pub use testfn::{
    battery, builtin_family, eval, grad_beta, l2beta_norm, laplace_beta, metric, seminorm, validate_membership,
    BetaRegime, Family, RegimeKind, SeminormIndex, Side, TestFunction,
};
