//! Communities and the fuzzy affinity network.
//!
//! Weights are directed and live in `[0, 1]`; a pair with no stored weight
//! has weight 1. A diffusion reaches a member only if the sender's weight
//! towards it is strictly above the inhibition threshold.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{AgentId, CommunicationAct, Community, ConversationId, ModelError};
use crate::rules::ActTemplate;

pub const DEFAULT_INHIBITION_THRESHOLD: f64 = 0.1;
pub const DEFAULT_REINFORCE_DELTA: f64 = 0.05;
pub const DEFAULT_DECAY_DELTA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OrganizationError {
    #[error("unknown community {0}")]
    UnknownCommunity(alloc::string::String),
    #[error("weight {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("{0} cannot have an affinity with itself")]
    SelfEdge(AgentId),
    #[error("{sender} is not a member of {community} and has no role allowing diffusion")]
    NotAuthorized {
        sender: AgentId,
        community: alloc::string::String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub from: AgentId,
    pub to: AgentId,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRepr", into = "NetworkRepr")]
pub struct AffinityNetwork {
    weights: BTreeMap<(AgentId, AgentId), f64>,
    inhibition_threshold: f64,
    reinforce_delta: f64,
    decay_delta: f64,
}

impl Default for AffinityNetwork {
    fn default() -> Self {
        AffinityNetwork {
            weights: BTreeMap::new(),
            inhibition_threshold: DEFAULT_INHIBITION_THRESHOLD,
            reinforce_delta: DEFAULT_REINFORCE_DELTA,
            decay_delta: DEFAULT_DECAY_DELTA,
        }
    }
}

fn unit(w: f64) -> Result<f64, OrganizationError> {
    if (0.0..=1.0).contains(&w) {
        Ok(w)
    } else {
        Err(OrganizationError::OutOfRange(w))
    }
}

fn open_unit(w: f64) -> Result<f64, OrganizationError> {
    if w > 0.0 && w < 1.0 {
        Ok(w)
    } else {
        Err(OrganizationError::OutOfRange(w))
    }
}

impl AffinityNetwork {
    pub fn new(
        inhibition_threshold: f64,
        reinforce_delta: f64,
        decay_delta: f64,
    ) -> Result<Self, OrganizationError> {
        if !(0.0..1.0).contains(&inhibition_threshold) {
            return Err(OrganizationError::OutOfRange(inhibition_threshold));
        }
        Ok(AffinityNetwork {
            weights: BTreeMap::new(),
            inhibition_threshold,
            reinforce_delta: open_unit(reinforce_delta)?,
            decay_delta: open_unit(decay_delta)?,
        })
    }

    pub fn inhibition_threshold(&self) -> f64 {
        self.inhibition_threshold
    }

    pub fn reinforce_delta(&self) -> f64 {
        self.reinforce_delta
    }

    pub fn decay_delta(&self) -> f64 {
        self.decay_delta
    }

    pub fn set_inhibition_threshold(&mut self, t: f64) -> Result<(), OrganizationError> {
        if !(0.0..1.0).contains(&t) {
            return Err(OrganizationError::OutOfRange(t));
        }
        self.inhibition_threshold = t;
        Ok(())
    }

    pub fn weight(&self, a: &AgentId, b: &AgentId) -> f64 {
        self.weights
            .get(&(a.clone(), b.clone()))
            .copied()
            .unwrap_or(1.0)
    }

    pub fn set_affinity(
        &mut self,
        a: &AgentId,
        b: &AgentId,
        w: f64,
    ) -> Result<(), OrganizationError> {
        if a == b {
            return Err(OrganizationError::SelfEdge(a.clone()));
        }
        self.weights.insert((a.clone(), b.clone()), unit(w)?);
        Ok(())
    }

    pub fn reinforce(
        &mut self,
        a: &AgentId,
        b: &AgentId,
        outcome: Outcome,
    ) -> Result<f64, OrganizationError> {
        if a == b {
            return Err(OrganizationError::SelfEdge(a.clone()));
        }
        let w = self.weight(a, b);
        let next = match outcome {
            Outcome::Success => (w + self.reinforce_delta).min(1.0),
            Outcome::Failure => (w - self.decay_delta).max(0.0),
        };
        self.weights.insert((a.clone(), b.clone()), next);
        Ok(next)
    }

    /// Stored pairs, in key order.
    pub fn pairs(&self) -> impl Iterator<Item = (&AgentId, &AgentId)> {
        self.weights.keys().map(|(a, b)| (a, b))
    }

    pub fn entries(&self) -> Vec<WeightEntry> {
        self.weights
            .iter()
            .map(|((a, b), w)| WeightEntry {
                from: a.clone(),
                to: b.clone(),
                weight: *w,
            })
            .collect()
    }

    /// Members of `community` other than `sender` that a diffusion reaches.
    pub fn recipients(&self, sender: &AgentId, community: &Community) -> Vec<AgentId> {
        community
            .members
            .iter()
            .filter(|m| *m != sender && self.weight(sender, m) > self.inhibition_threshold)
            .cloned()
            .collect()
    }
}

/// One act per reachable member, in ascending id order, all in
/// `conversation` and stamped with `round`. Authorization of outside
/// senders is checked by the caller.
pub fn diffuse(
    sender: &AgentId,
    community: &Community,
    template: &ActTemplate,
    net: &AffinityNetwork,
    conversation: &ConversationId,
    round: u64,
) -> Result<Vec<CommunicationAct>, OrganizationError> {
    net.recipients(sender, community)
        .into_iter()
        .map(|m| {
            template
                .address(m, conversation.clone(), round)
                .map_err(OrganizationError::from)
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct NetworkRepr {
    #[serde(default)]
    weights: Vec<WeightEntry>,
    #[serde(default = "default_threshold")]
    inhibition_threshold: f64,
    #[serde(default = "default_reinforce")]
    reinforce_delta: f64,
    #[serde(default = "default_decay")]
    decay_delta: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_INHIBITION_THRESHOLD
}

fn default_reinforce() -> f64 {
    DEFAULT_REINFORCE_DELTA
}

fn default_decay() -> f64 {
    DEFAULT_DECAY_DELTA
}

impl TryFrom<NetworkRepr> for AffinityNetwork {
    type Error = OrganizationError;

    fn try_from(r: NetworkRepr) -> Result<Self, Self::Error> {
        let mut net =
            AffinityNetwork::new(r.inhibition_threshold, r.reinforce_delta, r.decay_delta)?;
        for e in r.weights {
            net.set_affinity(&e.from, &e.to, e.weight)?;
        }
        Ok(net)
    }
}

impl From<AffinityNetwork> for NetworkRepr {
    fn from(n: AffinityNetwork) -> Self {
        NetworkRepr {
            weights: n.entries(),
            inhibition_threshold: n.inhibition_threshold,
            reinforce_delta: n.reinforce_delta,
            decay_delta: n.decay_delta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MessageType, Payload, Performative};

    fn id(s: &str) -> AgentId {
        AgentId::new(s).unwrap()
    }

    fn f_community() -> Community {
        Community::new("F", ["f1", "f2", "f3", "f4"].map(id))
    }

    fn template(sender: &str) -> ActTemplate {
        ActTemplate {
            performative: Performative::Diffuse,
            sender: id(sender),
            mtype: MessageType::new(2),
            payload: Payload::value(0.6).unwrap(),
            conversation: None,
        }
    }

    #[test]
    fn set_and_default() {
        let mut n = AffinityNetwork::default();
        n.set_affinity(&id("r1"), &id("f1"), 0.7).unwrap();
        assert_eq!(n.weight(&id("r1"), &id("f1")), 0.7);
        assert_eq!(n.weight(&id("f1"), &id("r1")), 1.0);
        assert_eq!(
            n.set_affinity(&id("r1"), &id("f1"), 1.2),
            Err(OrganizationError::OutOfRange(1.2))
        );
        assert!(matches!(
            n.set_affinity(&id("r1"), &id("r1"), 0.5),
            Err(OrganizationError::SelfEdge(_))
        ));
    }

    #[test]
    fn diffusion_skips_sender_and_inhibited() {
        let c = f_community();
        let conv = ConversationId::numbered(1);
        let mut n = AffinityNetwork::default();
        let acts = diffuse(&id("f1"), &c, &template("f1"), &n, &conv, 3).unwrap();
        let to: Vec<&str> = acts.iter().map(|a| a.receiver.as_str()).collect();
        assert_eq!(to, ["f2", "f3", "f4"]);
        assert!(acts.iter().all(|a| a.conversation == conv && a.round == 3));

        n.set_affinity(&id("f1"), &id("f3"), 0.0).unwrap();
        let acts = diffuse(&id("f1"), &c, &template("f1"), &n, &conv, 3).unwrap();
        assert_eq!(acts.len(), 2);

        let alone = Community::new("solo", [id("f1")]);
        assert!(diffuse(&id("f1"), &alone, &template("f1"), &n, &conv, 0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn threshold_is_strict() {
        let c = f_community();
        let mut n = AffinityNetwork::default();
        n.set_affinity(&id("f1"), &id("f2"), 0.1).unwrap();
        assert_eq!(n.recipients(&id("f1"), &c), [id("f3"), id("f4")]);
    }

    #[test]
    fn reinforce_clamps() {
        let (a, b) = (id("a"), id("b"));
        let mut n = AffinityNetwork::default();
        n.set_affinity(&a, &b, 0.5).unwrap();
        assert!((n.reinforce(&a, &b, Outcome::Success).unwrap() - 0.55).abs() < 1e-12);
        n.set_affinity(&a, &b, 1.0).unwrap();
        assert_eq!(n.reinforce(&a, &b, Outcome::Success).unwrap(), 1.0);
        n.set_affinity(&a, &b, 0.02).unwrap();
        assert_eq!(n.reinforce(&a, &b, Outcome::Failure).unwrap(), 0.0);
    }

    #[test]
    fn serde_round_trip() {
        let mut n = AffinityNetwork::new(0.2, 0.1, 0.05).unwrap();
        n.set_affinity(&id("a"), &id("b"), 0.3).unwrap();
        let s = serde_json::to_string(&n).unwrap();
        let back: AffinityNetwork = serde_json::from_str(&s).unwrap();
        assert_eq!(back, n);
        let bad = r#"{"weights":[{"from":"a","to":"b","weight":2.0}]}"#;
        assert!(serde_json::from_str::<AffinityNetwork>(bad).is_err());
    }
}
