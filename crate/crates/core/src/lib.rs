// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boussinesq;
pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod grid;
pub mod linalg;
pub mod pkp;
pub mod quadratic;
pub mod reference;
pub mod stencil;
pub mod time_integration;
