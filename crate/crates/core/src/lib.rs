//! Numerical laboratory for correlated Jordan and Cartan spectra of free
//! groups acting through tuples of matrix representations.

pub mod linalg;
pub mod spectra;
pub mod word;
pub mod chamber;
pub mod polyhedral;
pub mod cone;
pub mod critical;
pub mod hypertube;
pub mod asymptotics;
pub mod cache;
pub mod lab;
