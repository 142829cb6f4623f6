// Tensor formulas read clearest with explicit 1-based index loops that
// mirror the standard index conventions; iterator rewrites obscure them.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::manual_memcpy)]

pub mod canon;
pub mod cauchy;
pub mod compat;
pub mod eds;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod linalg;
pub mod monge;
pub mod rational;
pub mod series;
pub mod system;
