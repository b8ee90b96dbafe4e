//! Numerical foundation: standard-normal special functions, the exponential
//! integral, adaptive Gauss-Kronrod quadrature, and safeguarded scalar root
//! finding.

pub mod expint;
pub mod normal;
pub mod quad;
pub mod solve;
