//! Scenarios, role programs, property formulas and the command line.

pub mod cli;
pub mod model;
pub mod props;
pub mod report;
pub mod scenario;

use std::path::Path;

use thiserror::Error;

use crate::checker::{CheckError, Property};
use crate::kernel::ModelError;
pub use model::{build_model, build_user_program, Model};
pub use props::Scope;
pub use scenario::{default_scenario, Role, ScenarioConfig, TABLE_PROPERTIES};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario line {line}: {msg}")]
    Scenario { line: usize, msg: String },
    #[error("property column {pos}: {msg}")]
    Property { pos: usize, msg: String },
    #[error("no property named `{0}` in the scenario")]
    UnknownProperty(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed trace file: {0}")]
    TraceFile(#[from] serde_json::Error),
}

pub fn read_file(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, HarnessError> {
    ScenarioConfig::parse(&read_file(path)?)
}

impl Model {
    pub fn scope(&self) -> Scope<'_> {
        Scope {
            schema: self.schema(),
            constants: &self.constants,
            events: &self.events,
        }
    }

    pub fn parse_property(&self, name: &str, formula: &str) -> Result<Property, HarnessError> {
        Ok(Property::new(name, self.scope().parse_property(formula)?))
    }

    /// A property declared in the scenario, by name.
    pub fn property(&self, name: &str) -> Result<Property, HarnessError> {
        let formula = self
            .config
            .property(name)
            .ok_or_else(|| HarnessError::UnknownProperty(name.into()))?;
        self.parse_property(name, formula)
    }

    pub fn properties(&self) -> Result<Vec<Property>, HarnessError> {
        self.config
            .properties
            .iter()
            .map(|(n, f)| self.parse_property(n, f))
            .collect()
    }
}
