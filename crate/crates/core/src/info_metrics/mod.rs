//! Loss-induced information measures on finite distributions, and
//! inference-error-versus-AoI curves.
//!
//! Every quantity is derived from a loss `L(y, a)` through its Bayes action:
//! the L-entropy `H_L(Y) = min_a E[L(Y, a)]`, the L-divergence
//! `D_L(p‖q) = E_q[L(Y, a_p)] − E_q[L(Y, a_q)]`, and the L-(conditional)
//! mutual information as entropy differences. Logarithms are natural. Ties
//! between Bayes actions go to the lowest alphabet index.

mod distribution;
mod loss;
mod measures;
mod series;

pub use distribution::{Alphabet, Distribution, JointDistribution, Symbol, TripleJoint};
pub use loss::{bayes_action, l_entropy, Action, LossFunction};
pub use measures::{
    chi2_conditional_mutual_information, chi2_divergence, epsilon_markov_coefficient,
    l_conditional_cross_entropy, l_conditional_entropy, l_conditional_mutual_information,
    l_divergence, l_mutual_information,
};
pub use series::{
    freshness_cross_curve, freshness_curve, stochastic_order_check, freshness_decomposition,
    ChainModel, Decomposition, FreshnessCurve, LaggedSource, OrderReport, TimeSeriesDataset,
};
