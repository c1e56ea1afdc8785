//! Smoothed Wasserstein estimation through the entropic dual, with exact
//! transport oracles and a Jensen-Shannon baseline.

mod divergence;
mod dual;
mod exact;
mod features;

pub use divergence::js_divergence_categorical;
pub use dual::{
    cost, dual_sgd_step, estimate_wd, fit_potentials, fit_potentials_embedded, integrand_grad_x,
    sample_product_pairs, DualForm, DualPotentials, OtParams, PairSampler, ProductSampler,
    ScriptedSampler,
};
#[allow(unused_imports)]
pub(crate) use dual::sq_dist;
pub use exact::{
    exact_wd_1d, exact_wd_discrete, exact_wd_permutations, DiscreteMeasure, MAX_COUPLINGS,
    MAX_PERMUTATION_POINTS,
};
pub use features::{median_heuristic, RandomFeatureMap};
