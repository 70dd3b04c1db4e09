//! Secret key rates for a BBM92-style protocol in dimension `d` with `m`
//! mutually unbiased measurement bases.
//!
//! * [`weyl`]: Heisenberg–Weyl operators, Bell basis, MUB eigenbases.
//! * [`bell`]: twirling to Bell-diagonal form, error rates, entropies.
//! * [`asymptotic`]: Devetak–Winter rates from the entropy-maximizing
//!   Bell coefficients.
//! * [`oracle`]: a generic numerical entropy maximizer used to check the
//!   analytic optimum.
//! * [`finite`]: finite-size rates (uncertainty-relation and AEP bounds),
//!   postselection for coherent attacks, and the parameter optimizer.

// `!(x > 0.0)` style guards are deliberate: NaN has to fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod bell;
pub mod error;
pub mod finite;
pub mod oracle;
pub mod weyl;

pub use error::{Error, Result};
