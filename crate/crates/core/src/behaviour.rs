//! The four behaviour levels as step functions.
//!
//! Each step wires observation, (interpretation), decision and action:
//!
//! | level | name       | pipeline                                          |
//! |-------|------------|---------------------------------------------------|
//! | 1     | reactive   | observe -> reflex -> act                          |
//! | 2     | routine    | observe -> decide (ECA rules) -> act              |
//! | 3     | cognitive  | observe -> interpret -> decide -> act             |
//! | 4     | collective | observer -> knowledge -> control -> communication |
//!
//! Knowledge updates are applied to the agent's knowledge base as soon as
//! they are produced, so later stimuli in the same step see them. They are
//! also returned as effects so the runtime can log every write.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{
    make_act, ActionSpec, AgentId, CommunicationAct, Condition, ConversationId, EventPattern, Expr,
    KnowledgeBase, MessageType, ModelError, Payload, Performative, Value,
};
use crate::rules::{
    apply_action, decide, eval_condition, eval_expr, match_event, resolve_template, DecideError,
    Effect, EvalError, Percept, Stimulus,
};

/// Position on the behaviour scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Level {
    Reactive = 1,
    Routine = 2,
    Cognitive = 3,
    Collective = 4,
}

impl Level {
    pub fn number(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for Level {
    type Error = ModelError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Level::Reactive),
            2 => Ok(Level::Routine),
            3 => Ok(Level::Cognitive),
            4 => Ok(Level::Collective),
            other => Err(ModelError::InvalidLevel(other)),
        }
    }
}

impl From<Level> for u8 {
    fn from(l: Level) -> Self {
        l.number()
    }
}

/// Cooperation roles of the members of a collective agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberRole {
    Observer,
    Knowledge,
    Control,
    Monitoring,
    Memorization,
    Communication,
}

impl MemberRole {
    pub const ALL: [MemberRole; 6] = [
        MemberRole::Observer,
        MemberRole::Knowledge,
        MemberRole::Control,
        MemberRole::Monitoring,
        MemberRole::Memorization,
        MemberRole::Communication,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MemberRole::Observer => "observer",
            MemberRole::Knowledge => "knowledge",
            MemberRole::Control => "control",
            MemberRole::Monitoring => "monitoring",
            MemberRole::Memorization => "memorization",
            MemberRole::Communication => "communication",
        }
    }
}

/// A reflex: when the pattern matches, perform the actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reflex {
    pub pattern: EventPattern,
    pub actions: Vec<ActionSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelUpdate {
    pub key: String,
    pub value: Expr,
}

impl ModelUpdate {
    pub fn new(key: &str, value: Expr) -> Self {
        ModelUpdate {
            key: key.into(),
            value,
        }
    }
}

/// Interpretation rule: on a matching observation whose guard holds, update
/// the agent's system model and record the interpretation `tag`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpretationRule {
    pub tag: String,
    pub trigger: EventPattern,
    #[serde(default)]
    pub guard: Condition,
    #[serde(default)]
    pub updates: Vec<ModelUpdate>,
}

/// System-model key holding the latest interpretation tag.
pub const INTERPRETATION_KEY: &str = "interpretation";
/// Prefix of the memorization member's copies of internal acts.
pub const MEMORY_PREFIX: &str = "memory.";
/// Counter kept by the monitoring member.
pub const MONITOR_KEY: &str = "monitoring.observed";

/// An agent: its level, knowledge, and the level-specific machinery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: AgentId,
    pub level: Level,
    #[serde(default)]
    pub kb: KnowledgeBase,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reflexes: Vec<Reflex>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interpreter: Vec<InterpretationRule>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub members: BTreeMap<MemberRole, AgentId>,
}

impl AgentSpec {
    pub fn reactive(id: AgentId, reflexes: Vec<Reflex>) -> Self {
        AgentSpec {
            id,
            level: Level::Reactive,
            kb: KnowledgeBase::default(),
            reflexes,
            interpreter: Vec::new(),
            members: BTreeMap::new(),
        }
    }

    pub fn routine(id: AgentId, kb: KnowledgeBase) -> Self {
        AgentSpec {
            level: Level::Routine,
            kb,
            ..AgentSpec::reactive(id, Vec::new())
        }
    }

    pub fn cognitive(id: AgentId, kb: KnowledgeBase, interpreter: Vec<InterpretationRule>) -> Self {
        AgentSpec {
            level: Level::Cognitive,
            interpreter,
            ..AgentSpec::routine(id, kb)
        }
    }

    pub fn collective(
        id: AgentId,
        kb: KnowledgeBase,
        interpreter: Vec<InterpretationRule>,
        members: BTreeMap<MemberRole, AgentId>,
    ) -> Self {
        AgentSpec {
            level: Level::Collective,
            members,
            ..AgentSpec::cognitive(id, kb, interpreter)
        }
    }

    pub fn with_kb(mut self, kb: KnowledgeBase) -> Self {
        self.kb = kb;
        self
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StepError {
    #[error("agent {agent} is level {found:?}, step needs {expected:?}")]
    LevelMismatch {
        agent: AgentId,
        expected: Level,
        found: Level,
    },
    #[error("agent {agent} is level {level:?}; interpretation needs level 3 or more")]
    LevelTooLow { agent: AgentId, level: Level },
    #[error("collective agent {agent} lacks members {missing:?}")]
    IncompleteMembers {
        agent: AgentId,
        missing: Vec<MemberRole>,
    },
    #[error("agent {agent}: {source}")]
    Decide { agent: AgentId, source: DecideError },
    #[error("agent {agent}, rule {rule}: {source}")]
    Action {
        agent: AgentId,
        rule: String,
        source: EvalError,
    },
    #[error("agent {agent}, interpretation {tag}: {source}")]
    Interpretation {
        agent: AgentId,
        tag: String,
        source: EvalError,
    },
    #[error("agent {agent}: {source}")]
    Model { agent: AgentId, source: ModelError },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("round {got} logged after round {last}")]
pub struct NonMonotoneRound {
    pub last: u64,
    pub got: u64,
}

/// Every effect an agent produced, with the round it was produced in.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionLog {
    entries: Vec<(u64, Effect)>,
}

impl ActionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, round: u64, effect: Effect) -> Result<(), NonMonotoneRound> {
        if let Some((last, _)) = self.entries.last() {
            if round < *last {
                return Err(NonMonotoneRound {
                    last: *last,
                    got: round,
                });
            }
        }
        self.entries.push((round, effect));
        Ok(())
    }

    pub fn entries(&self) -> &[(u64, Effect)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn record_action(
    mut log: ActionLog,
    round: u64,
    effect: Effect,
) -> Result<ActionLog, NonMonotoneRound> {
    log.record(round, effect)?;
    Ok(log)
}

/// Merges inbox (arrival order) and percepts (key order) into stimuli.
pub fn observe(
    _agent: &AgentSpec,
    inbox: Vec<CommunicationAct>,
    mut env_view: Vec<Percept>,
) -> Vec<Stimulus> {
    env_view.sort_by(|a, b| a.key.cmp(&b.key));
    inbox
        .into_iter()
        .map(Stimulus::Message)
        .chain(env_view.into_iter().map(Stimulus::Percept))
        .collect()
}

/// What an interpretation pass changed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Interpretation {
    pub writes: Vec<(String, Value)>,
    pub tags: Vec<String>,
}

/// Applies every matching interpretation rule, in order, for each stimulus.
/// Writes go to the system model only.
pub fn interpret(
    agent: &mut AgentSpec,
    stimuli: &[Stimulus],
    now: u64,
) -> Result<Interpretation, StepError> {
    if agent.level < Level::Cognitive {
        return Err(StepError::LevelTooLow {
            agent: agent.id.clone(),
            level: agent.level,
        });
    }
    let mut out = Interpretation::default();
    for s in stimuli {
        for rule in &agent.interpreter {
            let Some(binding) = match_event(&rule.trigger, s) else {
                continue;
            };
            let binding = binding.at(now);
            let fail = |source| StepError::Interpretation {
                agent: agent.id.clone(),
                tag: rule.tag.clone(),
                source,
            };
            if !eval_condition(&rule.guard, &binding, &agent.kb).map_err(fail)? {
                continue;
            }
            for u in &rule.updates {
                let key = resolve_template(&u.key, &binding, &agent.kb).map_err(fail)?;
                let value = eval_expr(&u.value, &binding, &agent.kb).map_err(fail)?;
                agent.kb.write_model(key.clone(), value.clone());
                out.writes.push((key, value));
            }
            let tag = Value::Text(rule.tag.clone());
            agent.kb.write_model(INTERPRETATION_KEY.into(), tag.clone());
            out.writes.push((INTERPRETATION_KEY.into(), tag));
            out.tags.push(rule.tag.clone());
        }
    }
    Ok(out)
}

fn expect_level(agent: &AgentSpec, expected: Level) -> Result<(), StepError> {
    if agent.level == expected {
        Ok(())
    } else {
        Err(StepError::LevelMismatch {
            agent: agent.id.clone(),
            expected,
            found: agent.level,
        })
    }
}

fn commit(kb: &mut KnowledgeBase, effect: &Effect) {
    if let Effect::KnowledgeUpdate { key, value } = effect {
        kb.write(key.clone(), value.clone());
    }
}

/// Reflex behaviour: the first matching reflex fires for each stimulus.
pub fn step_reactive(
    agent: &mut AgentSpec,
    stimuli: &[Stimulus],
    _now: u64,
) -> Result<Vec<Effect>, StepError> {
    expect_level(agent, Level::Reactive)?;
    let mut effects = Vec::new();
    for s in stimuli {
        let Some((n, binding)) = agent
            .reflexes
            .iter()
            .enumerate()
            .find_map(|(n, r)| match_event(&r.pattern, s).map(|b| (n, b)))
        else {
            continue;
        };
        let actions = agent.reflexes[n].actions.clone();
        for a in &actions {
            let e = apply_action(a, &binding, &agent.kb, &agent.id).map_err(|source| {
                StepError::Action {
                    agent: agent.id.clone(),
                    rule: format!("reflex#{n}"),
                    source,
                }
            })?;
            commit(&mut agent.kb, &e);
            effects.push(e);
        }
    }
    Ok(effects)
}

fn deliberate(
    agent: &mut AgentSpec,
    stimuli: &[Stimulus],
    now: u64,
    effects: &mut Vec<Effect>,
) -> Result<(), StepError> {
    for s in stimuli {
        let fired: Vec<(String, Vec<ActionSpec>, crate::rules::Binding)> =
            decide(&agent.kb.rules, s, &agent.kb, now)
                .map_err(|source| StepError::Decide {
                    agent: agent.id.clone(),
                    source,
                })?
                .into_iter()
                .map(|(r, b)| (r.id.clone(), r.actions.clone(), b))
                .collect();
        for (rule, actions, binding) in fired {
            for a in &actions {
                let e = apply_action(a, &binding, &agent.kb, &agent.id).map_err(|source| {
                    StepError::Action {
                        agent: agent.id.clone(),
                        rule: rule.clone(),
                        source,
                    }
                })?;
                commit(&mut agent.kb, &e);
                effects.push(e);
            }
        }
    }
    Ok(())
}

/// Rule-based behaviour: every fired rule's actions, in decision order.
pub fn step_routine(
    agent: &mut AgentSpec,
    stimuli: &[Stimulus],
    now: u64,
) -> Result<Vec<Effect>, StepError> {
    expect_level(agent, Level::Routine)?;
    let mut effects = Vec::new();
    deliberate(agent, stimuli, now, &mut effects)?;
    Ok(effects)
}

/// Knowledge-based behaviour: interpret all stimuli, then decide with the
/// updated system model visible to conditions.
pub fn step_cognitive(
    agent: &mut AgentSpec,
    stimuli: &[Stimulus],
    now: u64,
) -> Result<Vec<Effect>, StepError> {
    expect_level(agent, Level::Cognitive)?;
    let interp = interpret(agent, stimuli, now)?;
    let mut effects: Vec<Effect> = interp
        .writes
        .into_iter()
        .map(|(key, value)| Effect::KnowledgeUpdate { key, value })
        .collect();
    deliberate(agent, stimuli, now, &mut effects)?;
    Ok(effects)
}

struct Members {
    observer: AgentId,
    knowledge: AgentId,
    control: AgentId,
    communication: AgentId,
}

fn members(actor: &AgentSpec) -> Result<Members, StepError> {
    let missing: Vec<MemberRole> = MemberRole::ALL
        .iter()
        .copied()
        .filter(|r| !actor.members.contains_key(r))
        .collect();
    if !missing.is_empty() {
        return Err(StepError::IncompleteMembers {
            agent: actor.id.clone(),
            missing,
        });
    }
    let get = |r: MemberRole| actor.members[&r].clone();
    Ok(Members {
        observer: get(MemberRole::Observer),
        knowledge: get(MemberRole::Knowledge),
        control: get(MemberRole::Control),
        communication: get(MemberRole::Communication),
    })
}

/// Internal acts of a collective agent. Every act is also copied to the
/// memorization member.
struct MicroChannel<'a> {
    actor: &'a AgentId,
    now: u64,
    conversation: ConversationId,
    mtype: MessageType,
}

impl MicroChannel<'_> {
    fn send(
        &self,
        kb: &mut KnowledgeBase,
        effects: &mut Vec<Effect>,
        performative: Performative,
        from: &AgentId,
        to: &AgentId,
        payload: Payload,
    ) -> Result<(), StepError> {
        let mut act = make_act(
            performative,
            from.clone(),
            to.clone(),
            self.mtype.clone(),
            payload,
            self.conversation.clone(),
        )
        .map_err(|source| StepError::Model {
            agent: self.actor.clone(),
            source,
        })?;
        act.round = self.now;
        let slot = kb
            .system_model
            .keys()
            .filter(|k| k.starts_with(MEMORY_PREFIX))
            .count();
        let key = format!("{MEMORY_PREFIX}{slot:06}");
        let copy = Effect::KnowledgeUpdate {
            key: key.clone(),
            value: Value::Text(act.to_string()),
        };
        kb.write_model(key, Value::Text(act.to_string()));
        effects.push(Effect::Micro(act));
        effects.push(copy);
        Ok(())
    }
}

/// Collective behaviour. Each stimulus goes to the observer, which informs
/// the knowledge member; knowledge interprets and informs control; control
/// decides with the actor's rules and orders the communication member to
/// carry out each outward action. Only those outward actions leave the
/// actor. Monitoring counts observations; memorization copies every
/// internal act.
pub fn step_collective(
    actor: &mut AgentSpec,
    stimuli: &[Stimulus],
    now: u64,
) -> Result<Vec<Effect>, StepError> {
    expect_level(actor, Level::Collective)?;
    let m = members(actor)?;
    let actor_id = actor.id.clone();
    let mut effects = Vec::new();

    for s in stimuli {
        let (payload, mtype, conversation) = match s {
            Stimulus::Message(act) => (
                act.payload.clone(),
                act.mtype.clone(),
                act.conversation.clone(),
            ),
            Stimulus::Percept(p) => (
                Payload::Assertion {
                    key: p.key.clone(),
                    value: p.value.clone(),
                },
                MessageType::new(0),
                ConversationId::new(format!("{actor_id}:internal@{now}")).map_err(|source| {
                    StepError::Model {
                        agent: actor_id.clone(),
                        source,
                    }
                })?,
            ),
        };
        let channel = MicroChannel {
            actor: &actor_id,
            now,
            conversation,
            mtype,
        };

        channel.send(
            &mut actor.kb,
            &mut effects,
            Performative::Inform,
            &m.observer,
            &m.knowledge,
            payload.clone(),
        )?;

        let interp = interpret(actor, core::slice::from_ref(s), now)?;
        effects.extend(
            interp
                .writes
                .into_iter()
                .map(|(key, value)| Effect::KnowledgeUpdate { key, value }),
        );
        channel.send(
            &mut actor.kb,
            &mut effects,
            Performative::Inform,
            &m.knowledge,
            &m.control,
            payload,
        )?;

        let mut decided = Vec::new();
        deliberate(actor, core::slice::from_ref(s), now, &mut decided)?;
        for e in decided {
            match e {
                Effect::KnowledgeUpdate { .. } => effects.push(e),
                outward => {
                    let task = match &outward {
                        Effect::Outbound(o) => {
                            format!("{}:{}", o.template.performative, o.receiver)
                        }
                        Effect::OutboundDiffusion { community, .. } => {
                            format!("diffuse:{community}")
                        }
                        Effect::EnvironmentEffect { op, .. } => format!("env:{op}"),
                        _ => String::from("act"),
                    };
                    channel.send(
                        &mut actor.kb,
                        &mut effects,
                        Performative::Order,
                        &m.control,
                        &m.communication,
                        Payload::TaskRef(task),
                    )?;
                    effects.push(outward);
                }
            }
        }

        let seen = actor
            .kb
            .lookup(MONITOR_KEY)
            .and_then(Value::as_num)
            .unwrap_or(0.0);
        let update = Effect::KnowledgeUpdate {
            key: MONITOR_KEY.into(),
            value: Value::Num(seen + 1.0),
        };
        commit(&mut actor.kb, &update);
        effects.push(update);
    }
    Ok(effects)
}

/// Steps an agent with the function for its level.
pub fn step(
    agent: &mut AgentSpec,
    stimuli: &[Stimulus],
    now: u64,
) -> Result<Vec<Effect>, StepError> {
    match agent.level {
        Level::Reactive => step_reactive(agent, stimuli, now),
        Level::Routine => step_routine(agent, stimuli, now),
        Level::Cognitive => step_cognitive(agent, stimuli, now),
        Level::Collective => step_collective(agent, stimuli, now),
    }
}
