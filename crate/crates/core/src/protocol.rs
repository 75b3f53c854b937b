//! Response obligations and acknowledgment barriers.
//!
//! Some performatives require an answer: an `ask` must be met by `accept`
//! or `refuse`, an `inform` by `confirm`, and so on. The tracker opens an
//! obligation for each such act and closes it when the receiver replies in
//! the same conversation with an acceptable performative.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{AgentId, CommunicationAct, ConversationId, Performative};
use crate::rules::Outgoing;

pub const DEFAULT_TIMEOUT_ROUNDS: u64 = 8;

/// Acceptable responses per performative. Terminal acts map to the empty set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObligationTable(BTreeMap<Performative, BTreeSet<Performative>>);

impl Default for ObligationTable {
    fn default() -> Self {
        use Performative::*;
        let mut t = BTreeMap::new();
        for p in Performative::ALL {
            let responses: &[Performative] = match p {
                Ask | AgainstPropose => &[Accept, Refuse],
                Inform | Diffuse | Answer | Order => &[Confirm],
                Propose => &[Confirm, Refuse],
                Evaluate => &[Agree, Disagree],
                Confirm | Refuse | Accept | Agree | Disagree => &[],
            };
            t.insert(p, responses.iter().copied().collect());
        }
        ObligationTable(t)
    }
}

impl ObligationTable {
    pub fn expected(&self, p: Performative) -> BTreeSet<Performative> {
        self.0.get(&p).cloned().unwrap_or_default()
    }

    pub fn requires_response(&self, p: Performative) -> bool {
        self.0.get(&p).is_some_and(|s| !s.is_empty())
    }

    pub fn accepts(&self, initiator: Performative, response: Performative) -> bool {
        self.0
            .get(&initiator)
            .is_some_and(|s| s.contains(&response))
    }

    /// Replaces the response set of one performative.
    pub fn set(&mut self, p: Performative, responses: BTreeSet<Performative>) {
        self.0.insert(p, responses);
    }
}

/// The default protocol map.
pub fn expected_responses(p: Performative) -> BTreeSet<Performative> {
    ObligationTable::default().expected(p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Status {
    Open,
    Satisfied { by: Performative, round: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obligation {
    pub act: CommunicationAct,
    pub opened: u64,
    #[serde(flatten)]
    pub status: Status,
    #[serde(default)]
    pub flagged: bool,
}

impl Obligation {
    pub fn is_open(&self) -> bool {
        self.status == Status::Open
    }

    fn answered_by(&self, act: &CommunicationAct) -> bool {
        act.conversation == self.act.conversation
            && act.sender == self.act.receiver
            && act.receiver == self.act.sender
    }
}

/// What recording an act did.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProtocolEvent {
    Opened {
        conversation: ConversationId,
        initiator: AgentId,
        responder: AgentId,
        performative: Performative,
    },
    Satisfied {
        conversation: ConversationId,
        initiator: AgentId,
        responder: AgentId,
        performative: Performative,
        response: Performative,
    },
    Violation {
        conversation: ConversationId,
        initiator: AgentId,
        responder: AgentId,
        performative: Performative,
        response: Performative,
    },
    Overdue {
        conversation: ConversationId,
        initiator: AgentId,
        responder: AgentId,
        performative: Performative,
        opened: u64,
    },
    BarrierError {
        conversation: ConversationId,
        responder: AgentId,
        error: AckError,
    },
    Rejected {
        sender: AgentId,
        receiver: AgentId,
        performative: Performative,
    },
}

impl ProtocolEvent {
    /// Whether this event breaks conformance.
    pub fn is_flagged(&self) -> bool {
        !matches!(
            self,
            ProtocolEvent::Opened { .. } | ProtocolEvent::Satisfied { .. }
        )
    }

    fn satisfied(o: &Obligation, response: Performative) -> Self {
        ProtocolEvent::Satisfied {
            conversation: o.act.conversation.clone(),
            initiator: o.act.sender.clone(),
            responder: o.act.receiver.clone(),
            performative: o.act.performative,
            response,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{response} from {responder} does not answer {performative} in {conversation}")]
pub struct ProtocolViolation {
    pub conversation: ConversationId,
    pub initiator: AgentId,
    pub responder: AgentId,
    pub performative: Performative,
    pub response: Performative,
}

impl From<ProtocolViolation> for ProtocolEvent {
    fn from(v: ProtocolViolation) -> Self {
        ProtocolEvent::Violation {
            conversation: v.conversation,
            initiator: v.initiator,
            responder: v.responder,
            performative: v.performative,
            response: v.response,
        }
    }
}

/// Tracks open and satisfied obligations across conversations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConversationTracker {
    table: ObligationTable,
    obligations: Vec<Obligation>,
    by_conversation: BTreeMap<ConversationId, Vec<usize>>,
    orphans: BTreeMap<ConversationId, Vec<CommunicationAct>>,
}

impl ConversationTracker {
    pub fn new(table: ObligationTable) -> Self {
        ConversationTracker {
            table,
            ..Self::default()
        }
    }

    pub fn table(&self) -> &ObligationTable {
        &self.table
    }

    pub fn obligations(&self) -> &[Obligation] {
        &self.obligations
    }

    pub fn open(&self) -> impl Iterator<Item = &Obligation> {
        self.obligations.iter().filter(|o| o.is_open())
    }

    pub fn open_count(&self) -> usize {
        self.open().count()
    }

    /// Open obligations per (initiator, responder) pair.
    pub fn pending_by_pair(&self) -> BTreeMap<(AgentId, AgentId), usize> {
        let mut m = BTreeMap::new();
        for o in self.open() {
            *m.entry((o.act.sender.clone(), o.act.receiver.clone()))
                .or_insert(0) += 1;
        }
        m
    }

    /// Records a delivered act. A response to an open obligation either
    /// satisfies it or is a violation; an act that requires a response
    /// opens a new obligation. A response that arrives before its initiator
    /// is held until the initiator is recorded.
    pub fn record_act(
        &mut self,
        act: &CommunicationAct,
        round: u64,
    ) -> Result<Vec<ProtocolEvent>, ProtocolViolation> {
        let mut events = Vec::new();
        let open = self
            .by_conversation
            .get(&act.conversation)
            .into_iter()
            .flatten()
            .copied()
            .find(|&i| self.obligations[i].is_open() && self.obligations[i].answered_by(act));

        if let Some(i) = open {
            let o = &mut self.obligations[i];
            if !self.table.accepts(o.act.performative, act.performative) {
                return Err(ProtocolViolation {
                    conversation: act.conversation.clone(),
                    initiator: o.act.sender.clone(),
                    responder: act.sender.clone(),
                    performative: o.act.performative,
                    response: act.performative,
                });
            }
            o.status = Status::Satisfied {
                by: act.performative,
                round,
            };
            events.push(ProtocolEvent::satisfied(o, act.performative));
            return Ok(events);
        }

        if !self.table.requires_response(act.performative) {
            self.orphans
                .entry(act.conversation.clone())
                .or_default()
                .push(act.clone());
            return Ok(events);
        }

        let mut o = Obligation {
            act: act.clone(),
            opened: round,
            status: Status::Open,
            flagged: false,
        };
        events.push(ProtocolEvent::Opened {
            conversation: act.conversation.clone(),
            initiator: act.sender.clone(),
            responder: act.receiver.clone(),
            performative: act.performative,
        });
        if let Some(waiting) = self.orphans.get_mut(&act.conversation) {
            let table = &self.table;
            if let Some(j) = waiting
                .iter()
                .position(|r| o.answered_by(r) && table.accepts(act.performative, r.performative))
            {
                let r = waiting.remove(j);
                o.status = Status::Satisfied {
                    by: r.performative,
                    round,
                };
                events.push(ProtocolEvent::satisfied(&o, r.performative));
            }
        }
        self.by_conversation
            .entry(act.conversation.clone())
            .or_default()
            .push(self.obligations.len());
        self.obligations.push(o);
        Ok(events)
    }

    /// Open obligations older than `timeout_rounds`.
    pub fn pending_obligations(&self, current_round: u64, timeout_rounds: u64) -> Vec<&Obligation> {
        self.open()
            .filter(|o| current_round.saturating_sub(o.opened) > timeout_rounds)
            .collect()
    }

    /// Like [`Self::pending_obligations`], but returns each overdue
    /// obligation only the first time it is seen.
    pub fn flag_overdue(&mut self, current_round: u64, timeout_rounds: u64) -> Vec<ProtocolEvent> {
        let mut out = Vec::new();
        for o in self.obligations.iter_mut() {
            if o.is_open() && !o.flagged && current_round.saturating_sub(o.opened) > timeout_rounds
            {
                o.flagged = true;
                out.push(ProtocolEvent::Overdue {
                    conversation: o.act.conversation.clone(),
                    initiator: o.act.sender.clone(),
                    responder: o.act.receiver.clone(),
                    performative: o.act.performative,
                    opened: o.opened,
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(rename_all = "snake_case")]
pub enum AckError {
    #[error("{0} already acknowledged")]
    DuplicateAck(AgentId),
    #[error("{0} was not a recipient of the diffusion")]
    UnexpectedResponder(AgentId),
    #[error("{0} is not an acknowledgment")]
    NotAcknowledgment(Performative),
    #[error("acknowledgment in conversation {0} does not belong to this barrier")]
    WrongConversation(ConversationId),
}

/// Holds back an agent's own acknowledgment until every recipient of its
/// diffusion has confirmed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AckBarrier {
    pub owner: AgentId,
    pub conversation: ConversationId,
    pub expected: BTreeSet<AgentId>,
    pub received: BTreeSet<AgentId>,
    /// The acknowledgment to send once the barrier completes.
    pub deferred: Option<Outgoing>,
}

impl AckBarrier {
    pub fn new(
        owner: AgentId,
        conversation: ConversationId,
        expected: BTreeSet<AgentId>,
        deferred: Option<Outgoing>,
    ) -> Self {
        AckBarrier {
            owner,
            conversation,
            expected,
            received: BTreeSet::new(),
            deferred,
        }
    }

    pub fn expected_count(&self) -> usize {
        self.expected.len()
    }

    pub fn is_complete(&self) -> bool {
        self.received.len() == self.expected.len()
    }
}

/// Adds one confirm to the barrier; returns whether it is now complete.
pub fn ack_barrier_step(
    barrier: &mut AckBarrier,
    incoming: &CommunicationAct,
) -> Result<bool, AckError> {
    if incoming.conversation != barrier.conversation || incoming.receiver != barrier.owner {
        return Err(AckError::WrongConversation(incoming.conversation.clone()));
    }
    if incoming.performative != Performative::Confirm {
        return Err(AckError::NotAcknowledgment(incoming.performative));
    }
    if !barrier.expected.contains(&incoming.sender) {
        return Err(AckError::UnexpectedResponder(incoming.sender.clone()));
    }
    if !barrier.received.insert(incoming.sender.clone()) {
        return Err(AckError::DuplicateAck(incoming.sender.clone()));
    }
    Ok(barrier.is_complete())
}
