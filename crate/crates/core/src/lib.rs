//! Cayley-Dickson arithmetic and the PDE machinery built on it: operator
//! factorization into first-order hypercomplex operators, non-commutative
//! line integrals, and fundamental solutions checked against mollified deltas.

pub mod algebra;
pub mod check;
pub mod error;
pub mod expr;
pub mod factorize;
pub mod fundamental;
pub mod line_integral;
pub mod quadform;

pub use algebra::{Ccd, CdNumber, SignedBasis};
pub use error::{Error, Result};
pub use expr::Expr;
