//! Discrete-round scheduler.
//!
//! Each round has three phases:
//!
//! * **A** writes a round marker, applies scripted injections, sends grid
//!   ticks to carriers, and delivers every act sent in the previous round
//!   (ordered by sender id, then send order). Delivery updates the
//!   obligation tracker and any acknowledgment barrier.
//! * **B** steps every agent with pending stimuli, in ascending id order.
//! * **C** applies the effects: acts are stamped and queued, diffusions are
//!   expanded through the affinity network, environment effects are
//!   applied, completed barriers release their acknowledgments, overdue
//!   obligations are flagged, and affinity weights are reinforced.
//!
//! Acts sent in round `r` are delivered in round `r + 1`.

pub mod grid;
pub mod rng;
pub mod trace;

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::behaviour::{step, ActionLog, AgentSpec, NonMonotoneRound, StepError};
use crate::model::{
    AgentId, CommunicationAct, ConversationId, ModelError, Performative, SystemModel, Value,
};
use crate::organization::{diffuse, AffinityNetwork, OrganizationError, Outcome};
use crate::protocol::{
    ack_barrier_step, AckBarrier, ConversationTracker, ProtocolEvent, DEFAULT_TIMEOUT_ROUNDS,
};
use crate::rules::{Effect, Outgoing, Percept, Stimulus};

pub use grid::{Grid, GridError, Infection};
pub use rng::SimRng;
pub use trace::{trace_digest, Scope, Trace, TraceRecord};

/// Environment key raised on an individual when it is infected.
pub const CONTAMINATED: &str = "contaminated";
/// Percept sent to every carrier at the start of each round.
pub const TICK: &str = "tick";
pub const POSITION: &str = "position";

/// A scripted change to one agent's environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub round: u64,
    pub agent: AgentId,
    pub key: String,
    pub value: Value,
}

impl Injection {
    pub fn new(round: u64, agent: AgentId, key: &str, value: impl Into<Value>) -> Self {
        Injection {
            round,
            agent,
            key: key.into(),
            value: value.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuntimeError {
    #[error("round {round}: {source}")]
    Step { round: u64, source: StepError },
    #[error("round {round}, agent {agent}: {source}")]
    Log {
        round: u64,
        agent: AgentId,
        source: NonMonotoneRound,
    },
    #[error("round {round}, agent {agent}: {source}")]
    Organization {
        round: u64,
        agent: AgentId,
        source: OrganizationError,
    },
    #[error("round {round}, agent {agent}: {source}")]
    Model {
        round: u64,
        agent: AgentId,
        source: ModelError,
    },
    #[error("injection for unknown agent {0}")]
    UnknownAgent(AgentId),
}

/// Sent and delivered macro act counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub sent: u64,
    pub delivered: u64,
    pub micro: u64,
}

#[derive(Clone, Debug)]
pub struct World {
    system: SystemModel,
    agents: BTreeMap<AgentId, AgentSpec>,
    affinity: AffinityNetwork,
    env: BTreeMap<AgentId, BTreeMap<String, Value>>,
    percepts: BTreeMap<AgentId, Vec<Percept>>,
    in_flight: Vec<CommunicationAct>,
    mailboxes: BTreeMap<AgentId, VecDeque<CommunicationAct>>,
    logs: BTreeMap<AgentId, ActionLog>,
    injections: BTreeMap<u64, Vec<Injection>>,
    grid: Option<Grid>,
    tracker: ConversationTracker,
    barriers: Vec<AckBarrier>,
    timeout: u64,
    next_conversation: u64,
    round: u64,
    seed: u64,
    counters: Counters,
    trace: Trace,
}

impl World {
    pub fn new(system: SystemModel, seed: u64) -> Self {
        let agents = system.agents().clone();
        let timeout = agents
            .values()
            .filter_map(|a| a.kb.interaction.timeout_rounds)
            .max()
            .unwrap_or(DEFAULT_TIMEOUT_ROUNDS);
        World {
            affinity: system.affinity().clone(),
            logs: agents
                .keys()
                .map(|a| (a.clone(), ActionLog::new()))
                .collect(),
            agents,
            system,
            env: BTreeMap::new(),
            percepts: BTreeMap::new(),
            in_flight: Vec::new(),
            mailboxes: BTreeMap::new(),
            injections: BTreeMap::new(),
            grid: None,
            tracker: ConversationTracker::default(),
            barriers: Vec::new(),
            timeout,
            next_conversation: 0,
            round: 0,
            seed,
            counters: Counters::default(),
            trace: Trace::new(),
        }
    }

    pub fn with_grid(mut self, grid: Grid) -> Self {
        for (a, cell) in grid_cells(&grid) {
            self.env.entry(a).or_default().insert(POSITION.into(), cell);
        }
        self.grid = Some(grid);
        self
    }

    pub fn with_injections(
        mut self,
        injections: impl IntoIterator<Item = Injection>,
    ) -> Result<Self, RuntimeError> {
        for i in injections {
            if !self.agents.contains_key(&i.agent) {
                return Err(RuntimeError::UnknownAgent(i.agent));
            }
            self.injections.entry(i.round).or_default().push(i);
        }
        Ok(self)
    }

    pub fn with_timeout(mut self, timeout_rounds: u64) -> Self {
        self.timeout = timeout_rounds.max(1);
        self
    }

    pub fn set_inhibition_threshold(&mut self, t: f64) -> Result<(), OrganizationError> {
        self.affinity.set_inhibition_threshold(t)
    }

    pub fn system(&self) -> &SystemModel {
        &self.system
    }

    pub fn agents(&self) -> &BTreeMap<AgentId, AgentSpec> {
        &self.agents
    }

    pub fn agent(&self, id: &AgentId) -> Option<&AgentSpec> {
        self.agents.get(id)
    }

    pub fn affinity(&self) -> &AffinityNetwork {
        &self.affinity
    }

    pub fn env(&self, agent: &AgentId) -> Option<&BTreeMap<String, Value>> {
        self.env.get(agent)
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.grid.as_ref()
    }

    pub fn tracker(&self) -> &ConversationTracker {
        &self.tracker
    }

    pub fn barriers(&self) -> &[AckBarrier] {
        &self.barriers
    }

    pub fn log(&self, agent: &AgentId) -> Option<&ActionLog> {
        self.logs.get(agent)
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn timeout(&self) -> u64 {
        self.timeout
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    /// Acts sent but not yet delivered.
    pub fn in_flight(&self) -> &[CommunicationAct] {
        &self.in_flight
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    /// Open obligations older than the timeout at the current round.
    pub fn pending_obligations(&self) -> usize {
        self.tracker
            .pending_obligations(self.round, self.timeout)
            .len()
    }

    /// Whether nothing is in flight and nothing is scripted for later.
    pub fn is_quiescent(&self) -> bool {
        self.in_flight.is_empty()
            && self.percepts.values().all(Vec::is_empty)
            && self.injections.range(self.round..).next().is_none()
            && self.grid.as_ref().is_none_or(|g| g.carriers().is_empty())
    }

    /// Queues a percept for the agent's next step without touching the
    /// environment.
    pub fn perceive(&mut self, agent: &AgentId, percept: Percept) {
        self.percepts
            .entry(agent.clone())
            .or_default()
            .push(percept);
    }

    /// Queues an act for delivery next round, as if sent this round.
    pub fn post(&mut self, mut act: CommunicationAct) {
        act.round = self.round;
        self.counters.sent += 1;
        self.in_flight.push(act);
    }

    fn fresh_conversation(&mut self) -> ConversationId {
        self.next_conversation += 1;
        ConversationId::numbered(self.next_conversation)
    }

    fn protocol(&mut self, event: ProtocolEvent) {
        self.trace.push(TraceRecord::Protocol {
            round: self.round,
            flagged: event.is_flagged(),
            event,
        });
    }

    fn set_env(&mut self, agent: &AgentId, key: &str, value: Value, perceive: bool) {
        self.env
            .entry(agent.clone())
            .or_default()
            .insert(key.into(), value.clone());
        self.trace.push(TraceRecord::EnvChange {
            round: self.round,
            agent: Some(agent.clone()),
            key: key.into(),
            value: value.clone(),
        });
        if perceive {
            self.perceive(agent, Percept::new(key, value));
        }
    }

    /// Runs one round through phases A, B and C.
    pub fn schedule_round(&mut self) -> Result<(), RuntimeError> {
        let mut outcomes: Vec<(AgentId, AgentId, Outcome)> = Vec::new();
        self.phase_a(&mut outcomes);
        let effects = self.phase_b()?;
        self.phase_c(effects, &mut outcomes)?;
        self.round += 1;
        Ok(())
    }

    /// Runs `steps` rounds and returns the trace so far.
    pub fn run(&mut self, steps: u64) -> Result<&Trace, RuntimeError> {
        for _ in 0..steps {
            self.schedule_round()?;
        }
        Ok(&self.trace)
    }

    fn phase_a(&mut self, outcomes: &mut Vec<(AgentId, AgentId, Outcome)>) {
        let round = self.round;
        self.trace.push(TraceRecord::Round { round });

        if let Some(list) = self.injections.remove(&round) {
            for i in list {
                self.set_env(&i.agent, &i.key, i.value, true);
            }
        }

        if let Some(g) = &self.grid {
            let carriers: Vec<AgentId> = g
                .carriers()
                .keys()
                .filter(|a| self.agents.contains_key(*a))
                .cloned()
                .collect();
            for a in carriers {
                self.perceive(&a, Percept::new(TICK, true));
            }
        }

        let mut batch = core::mem::take(&mut self.in_flight);
        batch.sort_by(|a, b| a.sender.cmp(&b.sender));
        for act in batch {
            self.counters.delivered += 1;
            self.trace.push(TraceRecord::Delivered {
                round,
                scope: Scope::Macro,
                act: act.clone(),
            });
            match self.tracker.record_act(&act, round) {
                Ok(events) => {
                    for e in events {
                        if let ProtocolEvent::Satisfied {
                            initiator,
                            responder,
                            response,
                            ..
                        } = &e
                        {
                            match response {
                                Performative::Confirm | Performative::Accept => outcomes.push((
                                    initiator.clone(),
                                    responder.clone(),
                                    Outcome::Success,
                                )),
                                Performative::Refuse => outcomes.push((
                                    initiator.clone(),
                                    responder.clone(),
                                    Outcome::Failure,
                                )),
                                _ => {}
                            }
                        }
                        self.protocol(e);
                    }
                }
                Err(v) => self.protocol(v.into()),
            }
            if act.performative == Performative::Confirm {
                if let Some(b) = self
                    .barriers
                    .iter_mut()
                    .find(|b| b.conversation == act.conversation && b.owner == act.receiver)
                {
                    if let Err(error) = ack_barrier_step(b, &act) {
                        let e = ProtocolEvent::BarrierError {
                            conversation: act.conversation.clone(),
                            responder: act.sender.clone(),
                            error,
                        };
                        self.protocol(e);
                    }
                }
            }
            self.mailboxes
                .entry(act.receiver.clone())
                .or_default()
                .push_back(act);
        }
    }

    fn phase_b(&mut self) -> Result<Vec<(AgentId, Vec<Effect>)>, RuntimeError> {
        let round = self.round;
        let mut out = Vec::new();
        for (id, agent) in self.agents.iter_mut() {
            let inbox: Vec<CommunicationAct> = self
                .mailboxes
                .get_mut(id)
                .map(|q| q.drain(..).collect())
                .unwrap_or_default();
            let percepts = self.percepts.remove(id).unwrap_or_default();
            if inbox.is_empty() && percepts.is_empty() {
                continue;
            }
            let stimuli: Vec<Stimulus> = crate::behaviour::observe(agent, inbox, percepts);
            let effects = step(agent, &stimuli, round)
                .map_err(|source| RuntimeError::Step { round, source })?;
            out.push((id.clone(), effects));
        }
        Ok(out)
    }

    fn phase_c(
        &mut self,
        effects: Vec<(AgentId, Vec<Effect>)>,
        outcomes: &mut Vec<(AgentId, AgentId, Outcome)>,
    ) -> Result<(), RuntimeError> {
        let round = self.round;
        let mut movers = BTreeSet::new();
        let mut infectors = BTreeSet::new();

        for (agent, list) in effects {
            for effect in list {
                if let Some(log) = self.logs.get_mut(&agent) {
                    log.record(round, effect.clone())
                        .map_err(|source| RuntimeError::Log {
                            round,
                            agent: agent.clone(),
                            source,
                        })?;
                }
                match effect {
                    Effect::KnowledgeUpdate { key, value } => {
                        self.trace.push(TraceRecord::KnowledgeWrite {
                            round,
                            agent: agent.clone(),
                            key,
                            value,
                        });
                    }
                    Effect::Micro(act) => {
                        self.counters.micro += 1;
                        self.trace.push(TraceRecord::Delivered {
                            round,
                            scope: Scope::Micro,
                            act,
                        });
                    }
                    Effect::Outbound(o) => self.send(&agent, o)?,
                    Effect::OutboundDiffusion {
                        community,
                        template,
                        ack,
                    } => self.expand_diffusion(&agent, &community, &template, ack)?,
                    Effect::EnvironmentEffect { op, params } => match op.as_str() {
                        "move" => {
                            movers.insert(agent.clone());
                        }
                        "infect" => {
                            infectors.insert(agent.clone());
                        }
                        _ => {
                            for (k, v) in params {
                                self.set_env(&agent, &k, v, false);
                            }
                        }
                    },
                }
            }
        }

        if self.grid.is_some() {
            self.grid_step(&movers, &infectors);
        }

        let (done, open): (Vec<AckBarrier>, Vec<AckBarrier>) = core::mem::take(&mut self.barriers)
            .into_iter()
            .partition(AckBarrier::is_complete);
        self.barriers = open;
        for b in done {
            if let Some(reply) = b.deferred {
                self.send(&b.owner, reply)?;
            }
        }

        for e in self.tracker.flag_overdue(round, self.timeout) {
            if let ProtocolEvent::Overdue {
                initiator,
                responder,
                ..
            } = &e
            {
                outcomes.push((initiator.clone(), responder.clone(), Outcome::Failure));
            }
            self.protocol(e);
        }

        for (a, b, outcome) in outcomes.drain(..) {
            if a != b {
                self.affinity.reinforce(&a, &b, outcome).map_err(|source| {
                    RuntimeError::Organization {
                        round,
                        agent: a.clone(),
                        source,
                    }
                })?;
            }
        }
        Ok(())
    }

    fn send(&mut self, sender: &AgentId, o: Outgoing) -> Result<(), RuntimeError> {
        let round = self.round;
        let performative = o.template.performative;
        if !self.agents.contains_key(&o.receiver)
            || !self.system.allows(sender, &o.receiver, performative)
        {
            self.protocol(ProtocolEvent::Rejected {
                sender: sender.clone(),
                receiver: o.receiver,
                performative,
            });
            return Ok(());
        }
        let conversation = match o.template.conversation.clone() {
            Some(c) => c,
            None => self.fresh_conversation(),
        };
        let act = o
            .template
            .address(o.receiver, conversation, round)
            .map_err(|source| RuntimeError::Model {
                round,
                agent: sender.clone(),
                source,
            })?;
        self.counters.sent += 1;
        self.in_flight.push(act);
        Ok(())
    }

    fn expand_diffusion(
        &mut self,
        sender: &AgentId,
        community: &str,
        template: &crate::rules::ActTemplate,
        ack: Option<Outgoing>,
    ) -> Result<(), RuntimeError> {
        let round = self.round;
        let org_err = |source| RuntimeError::Organization {
            round,
            agent: sender.clone(),
            source,
        };
        let Some(c) = self.system.community(community).cloned() else {
            return Err(org_err(OrganizationError::UnknownCommunity(
                community.into(),
            )));
        };
        if !c.members.contains(sender) && !self.system.may_diffuse_from_outside(sender) {
            self.protocol(ProtocolEvent::Rejected {
                sender: sender.clone(),
                receiver: sender.clone(),
                performative: template.performative,
            });
            return Ok(());
        }
        let conversation = match template.conversation.clone() {
            Some(c) => c,
            None => self.fresh_conversation(),
        };
        let acts =
            diffuse(sender, &c, template, &self.affinity, &conversation, round).map_err(org_err)?;
        let expected: BTreeSet<AgentId> = acts.iter().map(|a| a.receiver.clone()).collect();
        self.counters.sent += acts.len() as u64;
        self.in_flight.extend(acts);
        if let Some(reply) = ack {
            if expected.is_empty() {
                self.send(sender, reply)?;
            } else {
                self.barriers.push(AckBarrier::new(
                    sender.clone(),
                    conversation,
                    expected,
                    Some(reply),
                ));
            }
        }
        Ok(())
    }

    fn grid_step(&mut self, movers: &BTreeSet<AgentId>, infectors: &BTreeSet<AgentId>) {
        let Some(g) = self.grid.as_mut() else {
            return;
        };
        let moves = g.move_carriers(movers);
        let infections = g.infect(infectors);
        for m in moves {
            self.set_env(&m.agent, POSITION, cell_value(m.to), false);
        }
        for i in infections {
            self.set_env(&i.target, CONTAMINATED, Value::Text(i.disease), true);
        }
    }

    /// One grid step with every carrier moving and spreading, outside the
    /// agent cycle. Returns the new infections.
    pub fn infection_step(&mut self) -> Vec<Infection> {
        let Some(g) = self.grid.as_mut() else {
            return Vec::new();
        };
        let carriers: BTreeSet<AgentId> = g.carriers().keys().cloned().collect();
        let moves = g.move_carriers(&carriers);
        let infections = g.infect(&carriers);
        for m in moves {
            self.set_env(&m.agent, POSITION, cell_value(m.to), false);
        }
        for i in &infections {
            self.set_env(
                &i.target,
                CONTAMINATED,
                Value::Text(i.disease.clone()),
                true,
            );
        }
        infections
    }
}

fn cell_value(c: grid::Cell) -> Value {
    Value::Series(alloc::vec![u64::from(c.0), u64::from(c.1)])
}

fn grid_cells(g: &Grid) -> Vec<(AgentId, Value)> {
    g.carriers()
        .keys()
        .chain(g.individuals().iter())
        .filter_map(|a| g.position(a).map(|c| (a.clone(), cell_value(c))))
        .collect()
}

/// Applies `schedule_round` once.
pub fn schedule_round(world: &mut World) -> Result<(), RuntimeError> {
    world.schedule_round()
}

/// Runs `steps` rounds and returns the full trace.
pub fn run(mut world: World, steps: u64) -> Result<Trace, RuntimeError> {
    world.run(steps)?;
    Ok(world.into_trace())
}
