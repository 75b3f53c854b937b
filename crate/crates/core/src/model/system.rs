use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::rule::placeholders;
use super::{
    ActionSpec, AgentId, Condition, DecisionRule, EventPattern, Expr, KnowledgeBase, PayloadExpr,
    Performative, Recipient, Source, Value,
};
use crate::behaviour::{AgentSpec, Level, MemberRole};
use crate::organization::AffinityNetwork;

pub const MAX_CONDITION_DEPTH: usize = 16;

/// Role played by an agent, with its behaviour level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Role {
    pub name: String,
    pub level: Level,
}

impl Role {
    pub fn new(name: &str, level: Level) -> Self {
        Role {
            name: name.into(),
            level,
        }
    }
}

/// A named group of agents; the target of diffusion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Community {
    pub name: String,
    pub members: BTreeSet<AgentId>,
}

impl Community {
    pub fn new(name: &str, members: impl IntoIterator<Item = AgentId>) -> Self {
        Community {
            name: name.into(),
            members: members.into_iter().collect(),
        }
    }
}

/// An allowed (sender role, receiver role, performative) interaction.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interaction {
    pub sender_role: String,
    pub receiver_role: String,
    pub performative: Performative,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum Diagnostic {
    #[error("duplicate agent {0}")]
    DuplicateAgent(AgentId),
    #[error("unknown agent {agent} referenced by {context}")]
    UnknownAgent { context: String, agent: AgentId },
    #[error("agent {0} has no role")]
    MissingRole(AgentId),
    #[error("agent {agent} is level {agent_level} but its role is level {role_level}")]
    RoleLevelMismatch {
        agent: AgentId,
        agent_level: u8,
        role_level: u8,
    },
    #[error("duplicate community {0}")]
    DuplicateCommunity(String),
    #[error("community {0} has no members")]
    EmptyCommunity(String),
    #[error("interaction names unknown role {0}")]
    UnknownRoleName(String),
    #[error("agent {agent}: key {key} is both a fact and a system-model belief")]
    OverlappingKnowledge { agent: AgentId, key: String },
    #[error("agent {agent}: duplicate rule id {rule}")]
    DuplicateRuleId { agent: AgentId, rule: String },
    #[error("agent {agent}, rule {rule}: no actions")]
    EmptyActions { agent: AgentId, rule: String },
    #[error("agent {agent}, rule {rule}: condition depth {depth} exceeds {MAX_CONDITION_DEPTH}")]
    ConditionTooDeep {
        agent: AgentId,
        rule: String,
        depth: usize,
    },
    #[error("agent {agent}, rule {rule}: UnboundVariable({var})")]
    UnboundVariable {
        agent: AgentId,
        rule: String,
        var: String,
    },
    #[error("agent {agent}, rule {rule}: UnknownCommunity({community})")]
    UnknownCommunity {
        agent: AgentId,
        rule: String,
        community: String,
    },
    #[error("agent {agent}, rule {rule}: unknown knowledge key {key}")]
    UnknownKnowledgeKey {
        agent: AgentId,
        rule: String,
        key: String,
    },
    #[error("agent {agent}, rule {rule}: replies to a sender but its event is not a message")]
    NoSenderToReply { agent: AgentId, rule: String },
    #[error("agent {agent}, rule {rule}: variable {var} bound twice")]
    DuplicateBinder {
        agent: AgentId,
        rule: String,
        var: String,
    },
    #[error("agent {agent}, rule {rule}: payload value {value} outside [0, 1]")]
    PayloadOutOfRange {
        agent: AgentId,
        rule: String,
        value: f64,
    },
    #[error("agent {agent}: collective agent lacks members {missing:?}")]
    IncompleteMembers {
        agent: AgentId,
        missing: Vec<MemberRole>,
    },
    #[error("agent {agent}: member id {member} is reused or collides with a system agent")]
    MemberCollision { agent: AgentId, member: AgentId },
    #[error("agent {agent}: {detail}")]
    LevelRequirement {
        agent: AgentId,
        detail: &'static str,
    },
}

/// Every problem found while validating a system.
#[derive(Clone, Debug, PartialEq)]
pub struct InvalidSystem(pub Vec<Diagnostic>);

impl fmt::Display for InvalidSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} diagnostic(s)", self.0.len())?;
        for d in &self.0 {
            write!(f, "\n  {d}")?;
        }
        Ok(())
    }
}

impl core::error::Error for InvalidSystem {}

/// A validated agent-based system: agents, interactions, roles and
/// organizations, plus the affinity network linking agents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemDocument", into = "SystemDocument")]
pub struct SystemModel {
    agents: BTreeMap<AgentId, AgentSpec>,
    interactions: Vec<Interaction>,
    roles: BTreeMap<AgentId, Role>,
    organizations: Vec<Community>,
    affinity: AffinityNetwork,
}

impl SystemModel {
    pub fn agents(&self) -> &BTreeMap<AgentId, AgentSpec> {
        &self.agents
    }

    pub fn agent(&self, id: &AgentId) -> Option<&AgentSpec> {
        self.agents.get(id)
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn roles(&self) -> &BTreeMap<AgentId, Role> {
        &self.roles
    }

    pub fn role(&self, id: &AgentId) -> Option<&Role> {
        self.roles.get(id)
    }

    pub fn organizations(&self) -> &[Community] {
        &self.organizations
    }

    pub fn community(&self, name: &str) -> Option<&Community> {
        self.organizations.iter().find(|c| c.name == name)
    }

    pub fn affinity(&self) -> &AffinityNetwork {
        &self.affinity
    }

    /// Whether the interaction table admits `performative` from `sender` to
    /// `receiver`. An empty table admits everything.
    pub fn allows(&self, sender: &AgentId, receiver: &AgentId, performative: Performative) -> bool {
        if self.interactions.is_empty() {
            return true;
        }
        let (Some(s), Some(r)) = (self.roles.get(sender), self.roles.get(receiver)) else {
            return false;
        };
        self.interactions.iter().any(|i| {
            i.performative == performative && i.sender_role == s.name && i.receiver_role == r.name
        })
    }

    /// Whether `sender` may diffuse to a community it is not a member of.
    pub fn may_diffuse_from_outside(&self, sender: &AgentId) -> bool {
        if self.interactions.is_empty() {
            return true;
        }
        let Some(s) = self.roles.get(sender) else {
            return false;
        };
        self.interactions
            .iter()
            .any(|i| i.performative == Performative::Diffuse && i.sender_role == s.name)
    }
}

/// Serialized form of a [`SystemModel`]; loading goes through
/// [`build_system`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemDocument {
    #[serde(default)]
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
    #[serde(default)]
    pub roles: BTreeMap<AgentId, Role>,
    #[serde(default)]
    pub organizations: Vec<Community>,
    #[serde(default)]
    pub affinity: AffinityNetwork,
}

impl SystemDocument {
    pub fn build(self) -> Result<SystemModel, InvalidSystem> {
        build_system(
            self.agents,
            self.interactions,
            self.roles,
            self.organizations,
            self.affinity,
        )
    }
}

impl TryFrom<SystemDocument> for SystemModel {
    type Error = InvalidSystem;

    fn try_from(doc: SystemDocument) -> Result<Self, Self::Error> {
        doc.build()
    }
}

impl From<SystemModel> for SystemDocument {
    fn from(m: SystemModel) -> Self {
        SystemDocument {
            agents: m.agents.into_values().collect(),
            interactions: m.interactions,
            roles: m.roles,
            organizations: m.organizations,
            affinity: m.affinity,
        }
    }
}

/// Validates and assembles a system. All diagnostics are collected.
pub fn build_system(
    agents: Vec<AgentSpec>,
    interactions: Vec<Interaction>,
    roles: BTreeMap<AgentId, Role>,
    organizations: Vec<Community>,
    affinity: AffinityNetwork,
) -> Result<SystemModel, InvalidSystem> {
    let mut diags = Vec::new();
    let mut by_id = BTreeMap::new();
    for spec in agents {
        if by_id.contains_key(&spec.id) {
            diags.push(Diagnostic::DuplicateAgent(spec.id.clone()));
            continue;
        }
        by_id.insert(spec.id.clone(), spec);
    }

    for (id, spec) in &by_id {
        match roles.get(id) {
            None => diags.push(Diagnostic::MissingRole(id.clone())),
            Some(role) if role.level != spec.level => diags.push(Diagnostic::RoleLevelMismatch {
                agent: id.clone(),
                agent_level: spec.level.number(),
                role_level: role.level.number(),
            }),
            Some(_) => {}
        }
    }
    for id in roles.keys() {
        if !by_id.contains_key(id) {
            diags.push(Diagnostic::UnknownAgent {
                context: "role table".into(),
                agent: id.clone(),
            });
        }
    }

    let mut names = BTreeSet::new();
    for c in &organizations {
        if !names.insert(c.name.as_str()) {
            diags.push(Diagnostic::DuplicateCommunity(c.name.clone()));
        }
        if c.members.is_empty() {
            diags.push(Diagnostic::EmptyCommunity(c.name.clone()));
        }
        for m in &c.members {
            if !by_id.contains_key(m) {
                diags.push(Diagnostic::UnknownAgent {
                    context: alloc::format!("community {}", c.name),
                    agent: m.clone(),
                });
            }
        }
    }

    let role_names: BTreeSet<&str> = roles.values().map(|r| r.name.as_str()).collect();
    for i in &interactions {
        for name in [&i.sender_role, &i.receiver_role] {
            if !role_names.contains(name.as_str()) {
                diags.push(Diagnostic::UnknownRoleName(name.clone()));
            }
        }
    }

    for (a, b) in affinity.pairs() {
        for id in [a, b] {
            if !by_id.contains_key(id) {
                diags.push(Diagnostic::UnknownAgent {
                    context: "affinity network".into(),
                    agent: id.clone(),
                });
            }
        }
    }

    let ids: BTreeSet<AgentId> = by_id.keys().cloned().collect();
    for spec in by_id.values() {
        let ctx = RuleContext {
            agents: &ids,
            communities: &names,
            kb: &spec.kb,
            written: written_keys(spec),
        };
        validate_agent(spec, &ctx, &mut diags);
    }

    if diags.is_empty() {
        Ok(SystemModel {
            agents: by_id,
            interactions,
            roles,
            organizations,
            affinity,
        })
    } else {
        Err(InvalidSystem(diags))
    }
}

/// Checks that every variable a rule uses is bound and every name resolves.
pub fn validate_rule(
    rule: &DecisionRule,
    context: &SystemModel,
    owner: &AgentId,
) -> Result<(), Vec<Diagnostic>> {
    let Some(spec) = context.agent(owner) else {
        return Err(alloc::vec![Diagnostic::UnknownAgent {
            context: alloc::format!("rule {}", rule.id),
            agent: owner.clone(),
        }]);
    };
    let ids: BTreeSet<AgentId> = context.agents.keys().cloned().collect();
    let names: BTreeSet<&str> = context
        .organizations
        .iter()
        .map(|c| c.name.as_str())
        .collect();
    let ctx = RuleContext {
        agents: &ids,
        communities: &names,
        kb: &spec.kb,
        written: written_keys(spec),
    };
    let mut diags = Vec::new();
    check_rule_like(
        &ctx,
        owner,
        &rule.id,
        &rule.event,
        &rule.condition,
        &rule.actions,
        &mut diags,
    );
    if diags.is_empty() {
        Ok(())
    } else {
        Err(diags)
    }
}

struct RuleContext<'a> {
    agents: &'a BTreeSet<AgentId>,
    communities: &'a BTreeSet<&'a str>,
    kb: &'a KnowledgeBase,
    written: BTreeSet<String>,
}

impl RuleContext<'_> {
    fn knows(&self, key: &str) -> bool {
        self.kb.contains(key) || self.written.contains(key)
    }
}

fn written_keys(spec: &AgentSpec) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let actions = spec
        .kb
        .rules
        .iter()
        .flat_map(|r| r.actions.iter())
        .chain(spec.reflexes.iter().flat_map(|r| r.actions.iter()));
    for a in actions {
        if let ActionSpec::UpdateKnowledge { key, .. } = a {
            out.insert(key.clone());
        }
    }
    for i in &spec.interpreter {
        for u in &i.updates {
            out.insert(u.key.clone());
        }
    }
    out
}

fn validate_agent(spec: &AgentSpec, ctx: &RuleContext<'_>, diags: &mut Vec<Diagnostic>) {
    let id = &spec.id;
    for key in spec.kb.facts.keys() {
        if spec.kb.system_model.contains_key(key) {
            diags.push(Diagnostic::OverlappingKnowledge {
                agent: id.clone(),
                key: key.clone(),
            });
        }
    }
    for a in &spec.kb.acquaintances {
        if !ctx.agents.contains(a) {
            diags.push(Diagnostic::UnknownAgent {
                context: alloc::format!("acquaintances of {id}"),
                agent: a.clone(),
            });
        }
    }

    let mut rule_ids = BTreeSet::new();
    for rule in &spec.kb.rules {
        if !rule_ids.insert(rule.id.as_str()) {
            diags.push(Diagnostic::DuplicateRuleId {
                agent: id.clone(),
                rule: rule.id.clone(),
            });
        }
        check_rule_like(
            ctx,
            id,
            &rule.id,
            &rule.event,
            &rule.condition,
            &rule.actions,
            diags,
        );
    }
    for (n, reflex) in spec.reflexes.iter().enumerate() {
        let label = alloc::format!("reflex#{n}");
        check_rule_like(
            ctx,
            id,
            &label,
            &reflex.pattern,
            &Condition::True,
            &reflex.actions,
            diags,
        );
    }
    for interp in &spec.interpreter {
        let label = alloc::format!("interpretation {}", interp.tag);
        check_pattern(ctx, id, &label, &interp.trigger, diags);
        let bound = interp.trigger.bound_variables();
        let mut exprs = Vec::new();
        interp.guard.exprs(&mut exprs);
        exprs.extend(interp.updates.iter().map(|u| &u.value));
        let mut templates = Vec::new();
        interp.guard.templates(&mut templates);
        templates.extend(interp.updates.iter().map(|u| u.key.as_str()));
        check_names(ctx, id, &label, &bound, &exprs, &templates, diags);
    }

    if !spec.interpreter.is_empty() && spec.level < Level::Cognitive {
        diags.push(Diagnostic::LevelRequirement {
            agent: id.clone(),
            detail: "interpretation rules need level 3 or 4",
        });
    }
    if spec.level == Level::Collective {
        let missing: Vec<MemberRole> = MemberRole::ALL
            .iter()
            .copied()
            .filter(|r| !spec.members.contains_key(r))
            .collect();
        if !missing.is_empty() {
            diags.push(Diagnostic::IncompleteMembers {
                agent: id.clone(),
                missing,
            });
        }
        let mut seen = BTreeSet::new();
        for m in spec.members.values() {
            if !seen.insert(m) || m == id || ctx.agents.contains(m) {
                diags.push(Diagnostic::MemberCollision {
                    agent: id.clone(),
                    member: m.clone(),
                });
            }
        }
    } else if !spec.members.is_empty() {
        diags.push(Diagnostic::LevelRequirement {
            agent: id.clone(),
            detail: "only collective agents have members",
        });
    }
}

fn check_pattern(
    ctx: &RuleContext<'_>,
    agent: &AgentId,
    rule: &str,
    pattern: &EventPattern,
    diags: &mut Vec<Diagnostic>,
) {
    if let Some(s) = &pattern.sender {
        if !ctx.agents.contains(s) {
            diags.push(Diagnostic::UnknownAgent {
                context: alloc::format!("event of {rule}"),
                agent: s.clone(),
            });
        }
    }
    let bound = pattern.bound_variables();
    let mut seen = BTreeSet::new();
    for v in bound {
        if !seen.insert(v) {
            diags.push(Diagnostic::DuplicateBinder {
                agent: agent.clone(),
                rule: rule.into(),
                var: v.into(),
            });
        }
    }
}

fn check_names(
    ctx: &RuleContext<'_>,
    agent: &AgentId,
    rule: &str,
    bound: &[&str],
    exprs: &[&Expr],
    templates: &[&str],
    diags: &mut Vec<Diagnostic>,
) {
    let unbound = |var: &str| Diagnostic::UnboundVariable {
        agent: agent.clone(),
        rule: rule.into(),
        var: var.into(),
    };
    let check_template = |t: &str, diags: &mut Vec<Diagnostic>| {
        for p in placeholders(t) {
            if !bound.contains(&p) && !ctx.knows(p) {
                diags.push(unbound(p));
            }
        }
    };
    for t in templates {
        check_template(t, diags);
    }
    for e in exprs {
        e.visit(&mut |node| match node {
            Expr::Var(v) if !bound.contains(&v.as_str()) => diags.push(unbound(v)),
            Expr::Kb(key) => {
                let ps = placeholders(key);
                if ps.is_empty() {
                    if !ctx.knows(key) {
                        diags.push(Diagnostic::UnknownKnowledgeKey {
                            agent: agent.clone(),
                            rule: rule.into(),
                            key: key.clone(),
                        });
                    }
                } else {
                    for p in ps {
                        if !bound.contains(&p) && !ctx.knows(p) {
                            diags.push(unbound(p));
                        }
                    }
                }
            }
            _ => {}
        });
    }
}

fn check_rule_like(
    ctx: &RuleContext<'_>,
    agent: &AgentId,
    rule: &str,
    pattern: &EventPattern,
    condition: &Condition,
    actions: &[ActionSpec],
    diags: &mut Vec<Diagnostic>,
) {
    check_pattern(ctx, agent, rule, pattern, diags);
    if actions.is_empty() {
        diags.push(Diagnostic::EmptyActions {
            agent: agent.clone(),
            rule: rule.into(),
        });
    }
    let depth = condition.depth();
    if depth > MAX_CONDITION_DEPTH {
        diags.push(Diagnostic::ConditionTooDeep {
            agent: agent.clone(),
            rule: rule.into(),
            depth,
        });
    }

    let bound = pattern.bound_variables();
    let mut exprs = Vec::new();
    condition.exprs(&mut exprs);
    let mut templates = Vec::new();
    condition.templates(&mut templates);
    for a in actions {
        exprs.extend(a.exprs());
        templates.extend(a.templates());
    }
    check_names(ctx, agent, rule, &bound, &exprs, &templates, diags);

    for a in actions {
        let (replies, payloads): (bool, Vec<&PayloadExpr>) = match a {
            ActionSpec::Send { to, payload, .. } => {
                match to {
                    Recipient::Agent(r) if !ctx.agents.contains(r) => {
                        diags.push(Diagnostic::UnknownAgent {
                            context: alloc::format!("action of {rule}"),
                            agent: r.clone(),
                        })
                    }
                    Recipient::Kb(k) if placeholders(k).is_empty() && !ctx.knows(k) => {
                        diags.push(Diagnostic::UnknownKnowledgeKey {
                            agent: agent.clone(),
                            rule: rule.into(),
                            key: k.clone(),
                        })
                    }
                    _ => {}
                }
                (matches!(to, Recipient::Sender), alloc::vec![payload])
            }
            ActionSpec::Diffuse {
                community,
                payload,
                ack,
                ..
            } => {
                if !ctx.communities.contains(community.as_str()) {
                    diags.push(Diagnostic::UnknownCommunity {
                        agent: agent.clone(),
                        rule: rule.into(),
                        community: community.clone(),
                    });
                }
                let mut ps = alloc::vec![payload];
                ps.extend(ack.as_ref().map(|a| &a.payload));
                (ack.is_some(), ps)
            }
            _ => (false, Vec::new()),
        };
        if replies && pattern.source != Source::Message {
            diags.push(Diagnostic::NoSenderToReply {
                agent: agent.clone(),
                rule: rule.into(),
            });
        }
        for p in payloads {
            if let PayloadExpr::Value(Expr::Lit(Value::Num(v))) = p {
                if !(0.0..=1.0).contains(v) {
                    diags.push(Diagnostic::PayloadOutOfRange {
                        agent: agent.clone(),
                        rule: rule.into(),
                        value: *v,
                    });
                }
            }
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (level {})", self.name, self.level.number())
    }
}
