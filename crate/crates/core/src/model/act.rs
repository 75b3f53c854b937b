use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AgentId, ConversationId, Fuzzy, ModelError, Value};

/// Speech-act verb of a communication act. The set is closed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Performative {
    Inform,
    Diffuse,
    Ask,
    Answer,
    Confirm,
    Propose,
    AgainstPropose,
    Refuse,
    Accept,
    Order,
    Agree,
    Disagree,
    Evaluate,
}

impl Performative {
    pub const ALL: [Performative; 13] = [
        Performative::Inform,
        Performative::Diffuse,
        Performative::Ask,
        Performative::Answer,
        Performative::Confirm,
        Performative::Propose,
        Performative::AgainstPropose,
        Performative::Refuse,
        Performative::Accept,
        Performative::Order,
        Performative::Agree,
        Performative::Disagree,
        Performative::Evaluate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Performative::Inform => "inform",
            Performative::Diffuse => "diffuse",
            Performative::Ask => "ask",
            Performative::Answer => "answer",
            Performative::Confirm => "confirm",
            Performative::Propose => "propose",
            Performative::AgainstPropose => "against_propose",
            Performative::Refuse => "refuse",
            Performative::Accept => "accept",
            Performative::Order => "order",
            Performative::Agree => "agree",
            Performative::Disagree => "disagree",
            Performative::Evaluate => "evaluate",
        }
    }
}

impl FromStr for Performative {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Performative::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| ModelError::UnknownPerformative(s.into()))
    }
}

impl fmt::Display for Performative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Message type code with an optional label. Equality is on the code.
#[derive(Clone, Debug, Eq, Serialize, Deserialize)]
#[serde(from = "MessageTypeRepr", into = "MessageTypeRepr")]
pub struct MessageType {
    pub code: u32,
    pub label: Option<String>,
}

impl MessageType {
    pub const fn new(code: u32) -> Self {
        MessageType { code, label: None }
    }

    pub fn labelled(code: u32, label: impl Into<String>) -> Self {
        MessageType {
            code,
            label: Some(label.into()),
        }
    }
}

impl PartialEq for MessageType {
    fn eq(&self, other: &Self) -> bool {
        self.code == other.code
    }
}

impl From<u32> for MessageType {
    fn from(code: u32) -> Self {
        MessageType::new(code)
    }
}

impl fmt::Display for MessageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.label {
            Some(l) => write!(f, "{}:{}", self.code, l),
            None => write!(f, "{}", self.code),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MessageTypeRepr {
    Code(u32),
    Labelled { code: u32, label: String },
}

impl From<MessageTypeRepr> for MessageType {
    fn from(r: MessageTypeRepr) -> Self {
        match r {
            MessageTypeRepr::Code(code) => MessageType::new(code),
            MessageTypeRepr::Labelled { code, label } => MessageType::labelled(code, label),
        }
    }
}

impl From<MessageType> for MessageTypeRepr {
    fn from(m: MessageType) -> Self {
        match m.label {
            Some(label) => MessageTypeRepr::Labelled {
                code: m.code,
                label,
            },
            None => MessageTypeRepr::Code(m.code),
        }
    }
}

/// Content of a communication act.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Value(Fuzzy),
    Assertion { key: String, value: Value },
    Question { key: String },
    Response { key: String, value: Value },
    TaskRef(String),
}

impl Payload {
    pub fn value(v: f64) -> Result<Self, ModelError> {
        Ok(Payload::Value(Fuzzy::new(v)?))
    }

    /// Checks the nonempty-key invariant.
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            Payload::Assertion { key, .. }
            | Payload::Question { key }
            | Payload::Response { key, .. } => {
                if key.is_empty() {
                    return Err(ModelError::EmptyToken("payload key"));
                }
            }
            Payload::TaskRef(t) if t.is_empty() => {
                return Err(ModelError::EmptyToken("task reference"))
            }
            _ => {}
        }
        Ok(())
    }
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::Value(v) => write!(f, "{}", v.get()),
            Payload::Assertion { key, value } => write!(f, "{key}={value}"),
            Payload::Question { key } => write!(f, "{key}?"),
            Payload::Response { key, value } => write!(f, "{key}:{value}"),
            Payload::TaskRef(t) => write!(f, "task:{t}"),
        }
    }
}

/// A communication act: performative, sender, receiver, message type and
/// payload, plus the conversation token and the round it was sent in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunicationAct {
    pub performative: Performative,
    pub sender: AgentId,
    pub receiver: AgentId,
    pub mtype: MessageType,
    pub payload: Payload,
    pub conversation: ConversationId,
    pub round: u64,
}

impl fmt::Display for CommunicationAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}({}->{}, {}, {}) [{}@{}]",
            self.performative,
            self.sender,
            self.receiver,
            self.mtype,
            self.payload,
            self.conversation,
            self.round
        )
    }
}

/// Builds a well-formed act. The round is stamped later by the runtime.
pub fn make_act(
    performative: Performative,
    sender: AgentId,
    receiver: AgentId,
    mtype: impl Into<MessageType>,
    payload: Payload,
    conversation: ConversationId,
) -> Result<CommunicationAct, ModelError> {
    if sender == receiver {
        return Err(ModelError::SelfMessage(sender));
    }
    payload.validate()?;
    Ok(CommunicationAct {
        performative,
        sender,
        receiver,
        mtype: mtype.into(),
        payload,
        conversation,
        round: 0,
    })
}
