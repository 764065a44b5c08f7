//! Exact arithmetic: rationals, real number fields and dense linear algebra.

pub mod field;
pub mod int;
pub mod linalg;
pub mod rational;

pub use field::{NumberField, Scalar};
pub use int::Int;
pub use linalg::Mat;
pub use rational::Q;
