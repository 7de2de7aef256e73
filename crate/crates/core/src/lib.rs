//! Reconfigurable-intelligent-surface beamforming toolkit.

pub mod channel;
pub mod codebook;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod oracle;
pub mod packing;
pub mod pattern;
pub mod protocol;
pub mod scalar;
pub mod search;
pub mod vec3;

pub use error::{Error, Result};
pub use scalar::RisFloat;

pub type RisGeometryF64 = geometry::RisGeometry<f64>;
pub type RisGeometryF32 = geometry::RisGeometry<f32>;
pub type PhaseStateSetF64 = geometry::PhaseStateSet<f64>;
pub type PhaseStateSetF32 = geometry::PhaseStateSet<f32>;
pub type PhaseProfileF64 = geometry::PhaseProfile<f64>;
pub type PhaseProfileF32 = geometry::PhaseProfile<f32>;
pub type SteeringVectorF64 = geometry::SteeringVector<f64>;
pub type SteeringVectorF32 = geometry::SteeringVector<f32>;
pub type AngleGridF64 = codebook::AngleGrid<f64>;
pub type AngleGridF32 = codebook::AngleGrid<f32>;
pub type CodebookF64 = codebook::Codebook<f64>;
pub type CodebookF32 = codebook::Codebook<f32>;
pub type ScenarioF64 = channel::Scenario<f64>;
pub type ScenarioF32 = channel::Scenario<f32>;
pub type SimulatedOracleF64 = channel::SimulatedOracle<f64>;
pub type SimulatedOracleF32 = channel::SimulatedOracle<f32>;
pub type SearchResultF64 = search::SearchResult<f64>;
pub type SearchResultF32 = search::SearchResult<f32>;
pub type RadiationPatternF64 = pattern::RadiationPattern<f64>;
pub type RadiationPatternF32 = pattern::RadiationPattern<f32>;
