//! Generalized Fox-H processes: generalized Wright functions, Fox-H mixing
//! densities, fractional Brownian motion and the mixtures `√Y · B^H`.

// `!(x > y)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod fbm;
pub mod fhdam;
pub mod gfhp;
pub mod quad;
pub mod rng;
pub mod special;
pub mod wright;
