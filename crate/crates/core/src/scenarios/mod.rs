//! Scenario builders: epidemic simulation and detection, product
//! configuration, and mediation, plus user-defined systems.

pub mod configuration;
pub mod epidemic;
pub mod mediation;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{
    ActionSpec, AgentId, InvalidSystem, MessageType, ModelError, PayloadExpr, Performative,
    Recipient, SystemDocument,
};
use crate::organization::OrganizationError;
use crate::runtime::{GridError, Injection, RuntimeError, World};

pub use configuration::{build_configuration, ConfigurationConfig};
pub use epidemic::{build_epidemic, EpidemicConfig};
pub use mediation::{build_mediation, MediationConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    System(#[from] InvalidSystem),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Organization(#[from] OrganizationError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub(crate) fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::InvalidConfig(msg.into())
}

pub(crate) fn agent(id: &str) -> Result<AgentId, ScenarioError> {
    Ok(AgentId::new(id)?)
}

/// A system given directly as agents, roles, communities and affinities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomConfig {
    pub system: SystemDocument,
    #[serde(default)]
    pub injections: Vec<Injection>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_rounds: Option<u64>,
}

pub fn build_custom(cfg: &CustomConfig) -> Result<World, ScenarioError> {
    let system = cfg.system.clone().build()?;
    let mut world = World::new(system, cfg.seed).with_injections(cfg.injections.clone())?;
    if let Some(t) = cfg.timeout_rounds {
        world = world.with_timeout(t);
    }
    Ok(world)
}

/// Any scenario, tagged by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum ScenarioSpec {
    Epidemic(EpidemicConfig),
    Configuration(ConfigurationConfig),
    Mediation(MediationConfig),
    Custom(CustomConfig),
}

impl ScenarioSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioSpec::Epidemic(_) => "epidemic",
            ScenarioSpec::Configuration(_) => "configuration",
            ScenarioSpec::Mediation(_) => "mediation",
            ScenarioSpec::Custom(_) => "custom",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ScenarioSpec::Epidemic(c) => c.seed,
            ScenarioSpec::Configuration(c) => c.seed,
            ScenarioSpec::Mediation(c) => c.seed,
            ScenarioSpec::Custom(c) => c.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ScenarioSpec::Epidemic(c) => c.seed = seed,
            ScenarioSpec::Configuration(c) => c.seed = seed,
            ScenarioSpec::Mediation(c) => c.seed = seed,
            ScenarioSpec::Custom(c) => c.seed = seed,
        }
    }

    pub fn build(&self) -> Result<World, ScenarioError> {
        match self {
            ScenarioSpec::Epidemic(c) => build_epidemic(c),
            ScenarioSpec::Configuration(c) => build_configuration(c),
            ScenarioSpec::Mediation(c) => build_mediation(c),
            ScenarioSpec::Custom(c) => build_custom(c),
        }
    }
}

pub(crate) fn send(
    performative: Performative,
    to: Recipient,
    mtype: u32,
    payload: PayloadExpr,
) -> ActionSpec {
    ActionSpec::Send {
        performative,
        to,
        mtype: MessageType::new(mtype),
        payload,
    }
}

pub(crate) fn env_op(op: &str) -> ActionSpec {
    ActionSpec::EnvironmentOp {
        op: op.into(),
        params: BTreeMap::new(),
    }
}
