//! N-fold supersymmetric model pairs of type B and type X₂ on constant and
//! position-dependent mass backgrounds.

pub mod gauged;
pub mod linalg;
pub mod mass;
pub mod models;
pub mod normalizability;
pub mod poly;
pub mod probe;
pub mod quadrature;
pub mod rational;
pub mod reference;
pub mod spectral;
