//! Independent checks of the scheme: Monte Carlo estimates of the
//! no-intervention cost and a from-scratch enumeration of both recursions on
//! tiny chains.

pub mod brute_force;
pub mod mc;

pub use brute_force::{brute_force_pure_k, brute_force_recursion, BruteForceResult, ToyChain, ToyInstance};
pub use mc::{mc_discount_at_jump, mc_no_impulse_cost, McEstimate};
