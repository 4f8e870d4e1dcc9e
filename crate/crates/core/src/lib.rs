//! Half-line inverse scattering by the Krein method: the characteristic
//! function g(k), its cosine transform H, the Krein G-function and the
//! potential without bound states, plus the Gelfand-Levitan ladder that adds
//! and removes bound states.

pub mod cli;
pub mod config;
pub mod gk;
pub mod glm;
pub mod hfun;
pub mod krein;
pub mod linalg;
pub mod potential;
pub mod quadrature;
pub mod refpot;
pub mod specfun;
