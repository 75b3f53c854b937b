//! Domain types: agents, roles, communities, communication acts, decision
//! rules and the validated system model.

mod act;
mod ids;
mod rule;
mod system;
mod value;

use alloc::string::String;

pub use act::{make_act, CommunicationAct, MessageType, Payload, Performative};
pub use ids::{AgentId, ConversationId};
pub use rule::{
    placeholders, AckSpec, ActionSpec, CmpOp, Condition, DecisionRule, EventPattern, Expr,
    InteractionConfig, KnowledgeBase, PayloadExpr, Recipient, Source,
};
pub use system::{
    build_system, validate_rule, Community, Diagnostic, Interaction, InvalidSystem, Role,
    SystemDocument, SystemModel, MAX_CONDITION_DEPTH,
};
pub use value::{Fuzzy, Value};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("{0} must be nonempty")]
    EmptyToken(&'static str),
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("unknown performative `{0}`")]
    UnknownPerformative(String),
    #[error("agent {0} cannot address itself")]
    SelfMessage(AgentId),
    #[error("behaviour level must be 1..=4, got {0}")]
    InvalidLevel(u8),
}
