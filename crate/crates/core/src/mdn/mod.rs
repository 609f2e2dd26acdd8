//! Gaussian-mixture policies with a sparsemax gate and the closed-form
//! Tsallis entropy of a mixture.

mod entropy;
mod mixture;
mod policy;

pub use entropy::{
    discounted_states, entropy_gradient, gibbs_entropy_loglik, naive_tsallis_per_action,
    tsallis_entropy_analytic, tsallis_entropy_per_sample, EntropyEstimate, EntropyMethod,
    WeightedState,
};
pub(crate) use entropy::accumulate_entropy_gradient;
pub use mixture::{GaussianMixture, MixtureGrad};
pub use policy::{Gate, MdnConfig, MixtureHead, SparseMixturePolicy};
