pub mod error;
pub mod fock;
pub mod states;
pub mod tridiag;
pub mod optics;
pub mod analytic;
pub mod metrology;
pub mod cli;
