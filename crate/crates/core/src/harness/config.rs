//! Loading of scenario, geometry and angle-grid files.

use std::path::Path;

use serde::Deserialize;

use super::HarnessError;
use crate::channel::Scenario;
use crate::codebook::{degree_range, AngleGrid};
use crate::geometry::RisGeometry;
use crate::scalar::RisFloat;

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

fn config_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(format!("{}: {e}", path.display()))
}

pub fn load_scenario<T: RisFloat>(path: &Path) -> Result<Scenario<T>, HarnessError> {
    Scenario::from_json(&read(path)?).map_err(|e| config_err(path, e))
}

pub fn load_geometry<T: RisFloat>(path: &Path) -> Result<RisGeometry<T>, HarnessError> {
    serde_json::from_str(&read(path)?).map_err(|e| config_err(path, e))
}

/// Either an explicit list of degrees or an inclusive `{start, stop, step}` range.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DegreeList {
    List(Vec<f64>),
    Range(DegreeRange),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegreeRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl DegreeList {
    fn radians<T: RisFloat>(&self) -> crate::Result<Vec<T>> {
        match self {
            DegreeList::List(v) => Ok(v.iter().map(|&d| T::of(d).rad()).collect()),
            DegreeList::Range(r) => degree_range(r.start, r.stop, r.step),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub zenith_deg: DegreeList,
    pub azimuth_deg: DegreeList,
}

impl GridConfig {
    pub fn build<T: RisFloat>(&self) -> crate::Result<AngleGrid<T>> {
        AngleGrid::new(self.zenith_deg.radians()?, self.azimuth_deg.radians()?)
    }
}

pub fn parse_grid<T: RisFloat>(text: &str) -> crate::Result<AngleGrid<T>> {
    let cfg: GridConfig = serde_json::from_str(text).map_err(|e| crate::Error::InvalidGrid(e.to_string()))?;
    cfg.build()
}

pub fn load_grid<T: RisFloat>(path: &Path) -> Result<AngleGrid<T>, HarnessError> {
    parse_grid(&read(path)?).map_err(|e| config_err(path, e))
}
