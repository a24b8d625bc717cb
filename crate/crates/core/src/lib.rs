//! Hypothesis selection from locally private samples.
//!
//! Given k candidate distributions and users who each hold one sample but
//! only release an epsilon-LDP report, the routines here pick a candidate
//! whose total variation distance to the data distribution is within a
//! constant factor of the best in the set. Two routes are provided: a
//! one-round protocol built on noised log-likelihoods over a flattened
//! domain, and a round-efficient tournament of pairwise Scheffe tests.
//! `comparator` and `select` also stand alone as a noisy maximum-selection
//! toolkit with adversarial tie-breaking.

pub mod comparator;
pub mod dist;
pub mod flatten;
pub mod loglik;
pub mod mech;
pub mod reduction;
pub mod scheffe;
pub mod select;
pub mod stream;
pub mod transcript;
