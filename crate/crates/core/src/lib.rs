//! Deterministic multi-level agent simulation.
//!
//! Agents sit on a four-level behaviour scale: reactive agents map stimuli
//! straight to actions, routine agents decide with event-condition-action
//! rules, cognitive agents interpret observations before deciding, and
//! collective agents (actors) are built from cooperating member agents.
//! Agents talk through speech-act communication acts under a response
//! obligation protocol, are grouped in communities, and are linked by a
//! fuzzy-weighted affinity network.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, IO and the
//! command line live in the `mlagent` companion crate.
//!
//! ```
//! use mlagent_core::scenarios::configuration::{build_configuration, ConfigurationConfig};
//! use mlagent_core::scenarios::ScenarioError;
//! use mlagent_core::trace_digest;
//!
//! let mut world = build_configuration(&ConfigurationConfig::single(3, 0.6))?;
//! world.run(12)?;
//! assert_eq!(world.trace().len(), 25);
//! assert_eq!(trace_digest(world.trace()).len(), 64);
//! # Ok::<(), ScenarioError>(())
//! ```

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod behaviour;
pub mod model;
pub mod organization;
pub mod protocol;
pub mod rules;
pub mod runtime;
pub mod scenarios;

pub use behaviour::{AgentSpec, Level};
pub use model::{
    make_act, ActionSpec, AgentId, CommunicationAct, Condition, ConversationId, DecisionRule,
    EventPattern, KnowledgeBase, MessageType, Payload, Performative, SystemModel, Value,
};
pub use runtime::{trace_digest, Trace, TraceRecord, World};
