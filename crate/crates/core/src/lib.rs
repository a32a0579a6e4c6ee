pub mod calibration;
pub mod failure;
pub mod model;
pub mod precision;
pub mod pricing;
pub mod quadrature;
pub mod study;
pub(crate) mod serde_float;
pub mod switch;
pub mod testcases;
