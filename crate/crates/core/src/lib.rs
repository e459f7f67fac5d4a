// `!(x < y)` is used on purpose so that NaN lands on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocator;
pub mod baselines;
#[cfg(feature = "cli")]
pub mod cli;
pub mod linkmodel;
pub mod montecarlo;
pub mod oracle;
mod par;
pub mod scenario;
pub mod validation;
