//! Mediation between designers.
//!
//! Designers are reactive proxies that forward scripted proposals to a
//! collective mediator. The mediator's members pass each proposal along
//! observer, knowledge, control and communication; only the answer leaves
//! the mediator.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{agent, invalid, send, ScenarioError};
use crate::behaviour::{AgentSpec, InterpretationRule, Level, MemberRole, ModelUpdate, Reflex};
use crate::model::{
    build_system, AgentId, CmpOp, Community, Condition, DecisionRule, EventPattern, Expr,
    KnowledgeBase, PayloadExpr, Performative, Recipient, Role,
};
use crate::organization::AffinityNetwork;
use crate::runtime::{Injection, World};

pub const PROPOSAL_TYPE: u32 = 5;
/// Percept that makes a designer send a proposal.
pub const PROPOSE: &str = "propose";
pub const DESIGNERS: &str = "designers";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub round: u64,
    pub designer: AgentId,
    pub value: f64,
}

fn default_mediator() -> AgentId {
    AgentId::new("mediator").expect("nonempty")
}

fn default_threshold() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MediationConfig {
    pub designers: Vec<AgentId>,
    #[serde(default = "default_mediator")]
    pub mediator: AgentId,
    #[serde(default)]
    pub proposals: Vec<Proposal>,
    /// Proposals at or above this value are confirmed, others refused.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_rounds: Option<u64>,
}

impl MediationConfig {
    pub fn new(designers: Vec<AgentId>, proposals: Vec<Proposal>) -> Self {
        MediationConfig {
            designers,
            mediator: default_mediator(),
            proposals,
            threshold: default_threshold(),
            seed: 0,
            timeout_rounds: None,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.designers.len() < 2 {
            return Err(invalid("mediation needs at least two designers"));
        }
        let designers: BTreeSet<&AgentId> = self.designers.iter().collect();
        for p in &self.proposals {
            if !designers.contains(&p.designer) {
                return Err(invalid(format!(
                    "proposal from unknown designer {}",
                    p.designer
                )));
            }
            if !(0.0..=1.0).contains(&p.value) {
                return Err(invalid(format!(
                    "proposal value {} outside [0, 1]",
                    p.value
                )));
            }
        }
        Ok(())
    }
}

/// Member ids of a mediator: `{mediator}.{role}`.
pub fn members(mediator: &AgentId) -> Result<BTreeMap<MemberRole, AgentId>, ScenarioError> {
    MemberRole::ALL
        .iter()
        .map(|r| Ok((*r, agent(&format!("{mediator}.{}", r.as_str()))?)))
        .collect()
}

fn designer(id: &AgentId, mediator: &AgentId) -> AgentSpec {
    AgentSpec::reactive(
        id.clone(),
        vec![Reflex {
            pattern: EventPattern::percept(PROPOSE).bind("V"),
            actions: vec![send(
                Performative::Propose,
                Recipient::Agent(mediator.clone()),
                PROPOSAL_TYPE,
                PayloadExpr::Value(Expr::var("V")),
            )],
        }],
    )
}

fn mediator(cfg: &MediationConfig) -> Result<AgentSpec, ScenarioError> {
    let on_proposal =
        || EventPattern::message(Some(Performative::Propose), Some(PROPOSAL_TYPE)).bind("V");
    let answer = |p| {
        send(
            p,
            Recipient::Sender,
            PROPOSAL_TYPE,
            PayloadExpr::Response {
                key: "proposal".into(),
                value: Expr::var("V"),
            },
        )
    };
    let at_least = Condition::cmp(Expr::var("V"), CmpOp::Ge, Expr::lit(cfg.threshold));
    let kb = KnowledgeBase::default()
        .rule(DecisionRule::new(
            "accept_proposal",
            on_proposal(),
            at_least.clone(),
            vec![answer(Performative::Confirm)],
        ))
        .rule(DecisionRule::new(
            "reject_proposal",
            on_proposal(),
            Condition::not(at_least),
            vec![answer(Performative::Refuse)],
        ));
    let interpreter = vec![InterpretationRule {
        tag: "proposal_received".into(),
        trigger: on_proposal(),
        guard: Condition::True,
        updates: vec![ModelUpdate::new("proposals.{sender}", Expr::var("V"))],
    }];
    Ok(AgentSpec::collective(
        cfg.mediator.clone(),
        kb,
        interpreter,
        members(&cfg.mediator)?,
    ))
}

pub fn build_mediation(cfg: &MediationConfig) -> Result<World, ScenarioError> {
    cfg.validate()?;
    let mut agents: Vec<AgentSpec> = cfg
        .designers
        .iter()
        .map(|d| designer(d, &cfg.mediator))
        .collect();
    agents.push(mediator(cfg)?);
    let mut roles: BTreeMap<AgentId, Role> = cfg
        .designers
        .iter()
        .map(|d| (d.clone(), Role::new("designer", Level::Reactive)))
        .collect();
    roles.insert(
        cfg.mediator.clone(),
        Role::new("mediator", Level::Collective),
    );
    let communities = vec![Community::new(DESIGNERS, cfg.designers.iter().cloned())];
    let system = build_system(
        agents,
        Vec::new(),
        roles,
        communities,
        AffinityNetwork::default(),
    )?;
    let injections = cfg
        .proposals
        .iter()
        .map(|p| Injection::new(p.round, p.designer.clone(), PROPOSE, p.value));
    let mut world = World::new(system, cfg.seed).with_injections(injections)?;
    if let Some(t) = cfg.timeout_rounds {
        world = world.with_timeout(t);
    }
    Ok(world)
}
