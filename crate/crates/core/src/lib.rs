//! Time-filtered general linear methods.
//!
//! Build a method from a core solver and pre/post-filters, check its order
//! conditions, measure its linear stability region, search for filters that
//! widen it, and run it on ODE test problems. Everything numeric is generic
//! over [`scalar::Real`] (`f32` or `f64`); the aliases below fix `f64`, the
//! precision used by the CLI and the acceptance tests.

pub mod catalog;
pub mod filter;
pub mod glm;
pub mod integrate;
pub mod linalg;
pub mod optimize;
pub mod order;
pub mod problems;
pub mod scalar;
pub mod stability;

pub use scalar::Real;

pub type GlmTableau = glm::GlmTableau<f64>;
pub type CompactGlm = glm::CompactGlm<f64>;
pub type UpdateRow = glm::UpdateRow<f64>;
pub type CoreMethod = filter::CoreMethod<f64>;
pub type CatalogEntry = catalog::CatalogEntry<f64>;
pub type OdeProblem = problems::OdeProblem<f64>;
pub type Method = integrate::Method<f64>;
pub type SolveConfig = integrate::SolveConfig<f64>;
pub type SolutionRecord = integrate::SolutionRecord<f64>;
pub type OptimizationProblem = optimize::OptimizationProblem<f64>;
pub type OptimizationResult = optimize::OptimizationResult<f64>;

/// Single-precision aliases.
pub mod f32 {
    pub type GlmTableau = crate::glm::GlmTableau<f32>;
    pub type CompactGlm = crate::glm::CompactGlm<f32>;
    pub type CoreMethod = crate::filter::CoreMethod<f32>;
    pub type CatalogEntry = crate::catalog::CatalogEntry<f32>;
    pub type OdeProblem = crate::problems::OdeProblem<f32>;
    pub type Method = crate::integrate::Method<f32>;
}
