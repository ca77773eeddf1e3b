pub mod bessel;
pub mod bounds;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod lapack;
pub mod oracle;
pub mod quad;
pub mod solver;
pub mod studies;
pub mod transforms;
