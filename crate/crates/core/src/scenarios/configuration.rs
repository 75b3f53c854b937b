//! Product configuration.
//!
//! Requirement agents each inform a function agent of a fuzzy value. A
//! function agent receiving a value above the threshold diffuses it to the
//! whole function community and acknowledges the requirement agent only
//! after every function agent it reached has acknowledged in turn.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{agent, invalid, send, ScenarioError};
use crate::behaviour::{AgentSpec, Level};
use crate::model::{
    build_system, AckSpec, ActionSpec, AgentId, CmpOp, Community, Condition, DecisionRule,
    EventPattern, Expr, KnowledgeBase, PayloadExpr, Performative, Recipient, Role,
};
use crate::organization::AffinityNetwork;
use crate::runtime::{Injection, World};

/// Message type of requirement values and their diffusion.
pub const VALUE_TYPE: u32 = 2;
/// Percept that makes a requirement agent announce its value.
pub const START: &str = "start";

pub const REQUIREMENTS: &str = "R";
pub const FUNCTIONS: &str = "F";
pub const SOLUTIONS: &str = "S";
pub const CONSTRAINTS: &str = "C";

fn default_threshold() -> f64 {
    0.4
}

fn one() -> usize {
    1
}

fn three() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationConfig {
    #[serde(default = "one")]
    pub requirements: usize,
    #[serde(default = "three")]
    pub functions: usize,
    #[serde(default = "one")]
    pub solutions: usize,
    #[serde(default = "one")]
    pub constraints: usize,
    /// Value announced by each requirement agent, `r1` first.
    pub values: Vec<f64>,
    /// Function agent each requirement agent informs (1-based). Missing
    /// entries go round-robin.
    #[serde(default)]
    pub targets: Vec<usize>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub affinity: AffinityNetwork,
    /// Agents that never answer anything.
    #[serde(default)]
    pub silent: Vec<AgentId>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_rounds: Option<u64>,
}

impl ConfigurationConfig {
    /// One requirement agent informing `f1` of `value`, `functions`
    /// function agents.
    pub fn single(functions: usize, value: f64) -> Self {
        ConfigurationConfig {
            requirements: 1,
            functions,
            solutions: 1,
            constraints: 1,
            values: vec![value],
            targets: Vec::new(),
            threshold: default_threshold(),
            affinity: AffinityNetwork::default(),
            silent: Vec::new(),
            seed: 0,
            timeout_rounds: None,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        for (name, n) in [
            ("requirements", self.requirements),
            ("functions", self.functions),
            ("solutions", self.solutions),
            ("constraints", self.constraints),
        ] {
            if n < 1 {
                return Err(invalid(format!("{name} must be at least 1")));
            }
        }
        if self.values.len() != self.requirements {
            return Err(invalid(format!(
                "{} values given for {} requirement agents",
                self.values.len(),
                self.requirements
            )));
        }
        if let Some(v) = self.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("value {v} outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(invalid(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        if let Some(t) = self
            .targets
            .iter()
            .find(|t| **t < 1 || **t > self.functions)
        {
            return Err(invalid(format!("target f{t} does not exist")));
        }
        Ok(())
    }

    fn target(&self, requirement: usize) -> usize {
        self.targets
            .get(requirement)
            .copied()
            .unwrap_or(requirement % self.functions + 1)
    }
}

fn names(prefix: &str, n: usize) -> Result<Vec<AgentId>, ScenarioError> {
    (1..=n).map(|i| agent(&format!("{prefix}{i}"))).collect()
}

fn ack_payload() -> PayloadExpr {
    PayloadExpr::Response {
        key: "ack".into(),
        value: Expr::lit(1.0),
    }
}

fn confirm_sender() -> ActionSpec {
    send(
        Performative::Confirm,
        Recipient::Sender,
        VALUE_TYPE,
        ack_payload(),
    )
}

/// The function agents' rule: a value above `threshold` is diffused to the
/// function community, with the acknowledgment to the informer held back.
pub fn delta1(threshold: f64) -> DecisionRule {
    DecisionRule::new(
        "delta1",
        EventPattern::message(Some(Performative::Inform), Some(VALUE_TYPE)).bind("V"),
        Condition::cmp(Expr::var("V"), CmpOp::Gt, Expr::lit(threshold)),
        vec![ActionSpec::Diffuse {
            performative: Performative::Diffuse,
            community: FUNCTIONS.into(),
            mtype: VALUE_TYPE.into(),
            payload: PayloadExpr::Value(Expr::var("V")),
            ack: Some(AckSpec {
                performative: Performative::Confirm,
                mtype: VALUE_TYPE.into(),
                payload: ack_payload(),
            }),
        }],
    )
}

pub fn function_rules(threshold: f64) -> Vec<DecisionRule> {
    vec![
        delta1(threshold),
        DecisionRule::new(
            "below_threshold",
            EventPattern::message(Some(Performative::Inform), Some(VALUE_TYPE)).bind("V"),
            Condition::not(Condition::cmp(
                Expr::var("V"),
                CmpOp::Gt,
                Expr::lit(threshold),
            )),
            vec![confirm_sender()],
        ),
        DecisionRule::new(
            "ack_diffusion",
            EventPattern::message(Some(Performative::Diffuse), Some(VALUE_TYPE)),
            Condition::True,
            vec![confirm_sender()],
        ),
    ]
}

fn passive_rules() -> Vec<DecisionRule> {
    [Performative::Inform, Performative::Diffuse]
        .into_iter()
        .map(|p| {
            DecisionRule::new(
                &format!("ack_{p}"),
                EventPattern::message(Some(p), None),
                Condition::True,
                vec![confirm_sender()],
            )
        })
        .collect()
}

fn routine(id: &AgentId, rules: Vec<DecisionRule>, silent: &BTreeSet<&AgentId>) -> AgentSpec {
    let mut kb = KnowledgeBase::default();
    if !silent.contains(id) {
        kb.rules = rules;
    }
    AgentSpec::routine(id.clone(), kb)
}

pub fn build_configuration(cfg: &ConfigurationConfig) -> Result<World, ScenarioError> {
    cfg.validate()?;
    let r = names("r", cfg.requirements)?;
    let f = names("f", cfg.functions)?;
    let s = names("s", cfg.solutions)?;
    let c = names("c", cfg.constraints)?;
    let all: BTreeSet<&AgentId> = r.iter().chain(&f).chain(&s).chain(&c).collect();
    if let Some(x) = cfg.silent.iter().find(|x| !all.contains(x)) {
        return Err(invalid(format!("silent agent {x} does not exist")));
    }
    let silent: BTreeSet<&AgentId> = cfg.silent.iter().collect();

    let mut agents = Vec::new();
    let mut roles = BTreeMap::new();
    for (n, id) in r.iter().enumerate() {
        let target = &f[cfg.target(n) - 1];
        let mut kb = KnowledgeBase::default()
            .fact("value", cfg.values[n])
            .fact("target", target.as_str());
        if !silent.contains(id) {
            kb = kb.rule(DecisionRule::new(
                "announce",
                EventPattern::percept(START),
                Condition::True,
                vec![send(
                    Performative::Inform,
                    Recipient::Kb("target".into()),
                    VALUE_TYPE,
                    PayloadExpr::Value(Expr::kb("value")),
                )],
            ));
        }
        agents.push(AgentSpec::routine(id.clone(), kb));
        roles.insert(id.clone(), Role::new("requirement", Level::Routine));
    }
    for id in &f {
        agents.push(routine(id, function_rules(cfg.threshold), &silent));
        roles.insert(id.clone(), Role::new("function", Level::Routine));
    }
    for id in &s {
        agents.push(routine(id, passive_rules(), &silent));
        roles.insert(id.clone(), Role::new("solution", Level::Routine));
    }
    for id in &c {
        agents.push(routine(id, passive_rules(), &silent));
        roles.insert(id.clone(), Role::new("constraint", Level::Routine));
    }

    let communities = vec![
        Community::new(REQUIREMENTS, r.iter().cloned()),
        Community::new(FUNCTIONS, f.iter().cloned()),
        Community::new(SOLUTIONS, s.iter().cloned()),
        Community::new(CONSTRAINTS, c.iter().cloned()),
    ];
    let system = build_system(agents, Vec::new(), roles, communities, cfg.affinity.clone())?;
    let injections: Vec<Injection> = r
        .iter()
        .map(|id| Injection::new(0, id.clone(), START, true))
        .collect();
    let mut world = World::new(system, cfg.seed).with_injections(injections)?;
    if let Some(t) = cfg.timeout_rounds {
        world = world.with_timeout(t);
    }
    Ok(world)
}
