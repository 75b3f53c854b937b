//! Event-condition-action engine: matching stimuli against event patterns,
//! evaluating conditions against knowledge, and instantiating actions.
//!
//! Everything here is a pure function of its inputs. Knowledge writes are
//! returned as [`Effect::KnowledgeUpdate`] and applied by the caller.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{
    placeholders, ActionSpec, AgentId, CmpOp, CommunicationAct, Condition, ConversationId,
    DecisionRule, EventPattern, Expr, Fuzzy, KnowledgeBase, MessageType, ModelError, Payload,
    PayloadExpr, Performative, Recipient, Source, Value,
};

/// Name under which a message match binds the sender's id.
pub const SENDER_VAR: &str = "sender";

/// A change of an environment key as seen by one agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Percept {
    pub key: String,
    pub value: Value,
}

impl Percept {
    pub fn new(key: &str, value: impl Into<Value>) -> Self {
        Percept {
            key: key.into(),
            value: value.into(),
        }
    }
}

/// Something an agent reacts to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stimulus {
    Message(CommunicationAct),
    Percept(Percept),
}

/// Variables captured by a match, plus the context a reply needs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Binding {
    vars: BTreeMap<String, Value>,
    pub sender: Option<AgentId>,
    pub conversation: Option<ConversationId>,
    pub mtype: Option<MessageType>,
    pub now: Option<u64>,
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, var: &str) -> Option<&Value> {
        self.vars.get(var)
    }

    pub fn vars(&self) -> &BTreeMap<String, Value> {
        &self.vars
    }

    /// Binds `var`; returns false (and keeps the old value) if already bound.
    pub fn bind(&mut self, var: &str, value: Value) -> bool {
        if self.vars.contains_key(var) {
            return false;
        }
        self.vars.insert(var.into(), value);
        true
    }

    pub fn with(mut self, var: &str, value: impl Into<Value>) -> Self {
        self.bind(var, value.into());
        self
    }

    pub fn at(mut self, now: u64) -> Self {
        self.now = Some(now);
        self
    }
}

/// An act before it is addressed and stamped. `conversation: None` asks
/// the runtime to open a fresh conversation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActTemplate {
    pub performative: Performative,
    pub sender: AgentId,
    pub mtype: MessageType,
    pub payload: Payload,
    pub conversation: Option<ConversationId>,
}

impl ActTemplate {
    pub fn address(
        &self,
        receiver: AgentId,
        conversation: ConversationId,
        round: u64,
    ) -> Result<CommunicationAct, ModelError> {
        let mut act = crate::model::make_act(
            self.performative,
            self.sender.clone(),
            receiver,
            self.mtype.clone(),
            self.payload.clone(),
            conversation,
        )?;
        act.round = round;
        Ok(act)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outgoing {
    pub receiver: AgentId,
    pub template: ActTemplate,
}

/// Result of an action, applied by the behaviour module or the runtime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    Outbound(Outgoing),
    /// Send to every non-inhibited member of a community. `ack` is held
    /// back until all recipients acknowledge.
    OutboundDiffusion {
        community: String,
        template: ActTemplate,
        ack: Option<Outgoing>,
    },
    KnowledgeUpdate {
        key: String,
        value: Value,
    },
    EnvironmentEffect {
        op: String,
        params: BTreeMap<String, Value>,
    },
    /// Internal act between members of a collective agent.
    Micro(CommunicationAct),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("missing binding for {0}")]
    MissingBinding(String),
    #[error("missing knowledge key {0}")]
    MissingKnowledgeKey(String),
    #[error("{op} cannot take a {found}")]
    TypeMismatch {
        op: &'static str,
        found: &'static str,
    },
    #[error("reply requested but the stimulus has no sender")]
    NoSender,
    #[error("knowledge value {0} is not an agent id")]
    NotAnAgent(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("rule {rule}: {source}")]
pub struct DecideError {
    pub rule: String,
    pub source: EvalError,
}

/// Matches a pattern against a stimulus; wildcards match anything.
pub fn match_event(pattern: &EventPattern, stimulus: &Stimulus) -> Option<Binding> {
    let mut b = Binding::new();
    match stimulus {
        Stimulus::Message(act) => {
            if pattern.source != Source::Message {
                return None;
            }
            if pattern.performative.is_some_and(|p| p != act.performative)
                || pattern.sender.as_ref().is_some_and(|s| *s != act.sender)
                || pattern.mtype.as_ref().is_some_and(|t| *t != act.mtype)
            {
                return None;
            }
            let (key, value) = match &act.payload {
                Payload::Value(v) => (None, Value::Num(v.get())),
                Payload::Assertion { key, value } | Payload::Response { key, value } => {
                    (Some(key), value.clone())
                }
                Payload::Question { key } => (Some(key), Value::Text(key.clone())),
                Payload::TaskRef(t) => (None, Value::Text(t.clone())),
            };
            if let Some(want) = &pattern.key {
                if key != Some(want) {
                    return None;
                }
            }
            b.bind(SENDER_VAR, Value::Text(act.sender.to_string()));
            if let Some(var) = &pattern.binder {
                if !b.bind(var, value) {
                    return None;
                }
            }
            if let Some(var) = &pattern.key_binder {
                let key = key?;
                if !b.bind(var, Value::Text(key.clone())) {
                    return None;
                }
            }
            b.sender = Some(act.sender.clone());
            b.conversation = Some(act.conversation.clone());
            b.mtype = Some(act.mtype.clone());
        }
        Stimulus::Percept(p) => {
            if pattern.source != Source::Environment
                || pattern.performative.is_some()
                || pattern.sender.is_some()
                || pattern.mtype.is_some()
            {
                return None;
            }
            if pattern.key.as_ref().is_some_and(|k| *k != p.key) {
                return None;
            }
            if let Some(var) = &pattern.binder {
                b.bind(var, p.value.clone());
            }
            if let Some(var) = &pattern.key_binder {
                if !b.bind(var, Value::Text(p.key.clone())) {
                    return None;
                }
            }
        }
    }
    Some(b)
}

/// Fills `{name}` placeholders from bindings, then knowledge.
pub fn resolve_template(
    template: &str,
    bindings: &Binding,
    kb: &KnowledgeBase,
) -> Result<String, EvalError> {
    if placeholders(template).is_empty() {
        return Ok(template.into());
    }
    let mut out = String::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let Some(end) = rest[start..].find('}') else {
            break;
        };
        out.push_str(&rest[..start]);
        let name = &rest[start + 1..start + end];
        let v = bindings
            .get(name)
            .or_else(|| kb.lookup(name))
            .ok_or_else(|| EvalError::MissingBinding(name.into()))?;
        out.push_str(&v.to_string());
        rest = &rest[start + end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn num(v: Value, op: &'static str) -> Result<f64, EvalError> {
    match v {
        Value::Num(n) => Ok(n),
        other => Err(EvalError::TypeMismatch {
            op,
            found: other.type_name(),
        }),
    }
}

pub fn eval_expr(expr: &Expr, bindings: &Binding, kb: &KnowledgeBase) -> Result<Value, EvalError> {
    Ok(match expr {
        Expr::Lit(v) => v.clone(),
        Expr::Var(name) => bindings
            .get(name)
            .cloned()
            .ok_or_else(|| EvalError::MissingBinding(name.clone()))?,
        Expr::Kb(key) => {
            let key = resolve_template(key, bindings, kb)?;
            kb.lookup(&key)
                .cloned()
                .ok_or(EvalError::MissingKnowledgeKey(key))?
        }
        Expr::Now => Value::Num(
            bindings
                .now
                .ok_or_else(|| EvalError::MissingBinding("now".into()))? as f64,
        ),
        Expr::Add(a, b) => Value::Num(
            num(eval_expr(a, bindings, kb)?, "+")? + num(eval_expr(b, bindings, kb)?, "+")?,
        ),
        Expr::Sub(a, b) => Value::Num(
            num(eval_expr(a, bindings, kb)?, "-")? - num(eval_expr(b, bindings, kb)?, "-")?,
        ),
        Expr::Append(series, item) => {
            let Value::Series(mut s) = eval_expr(series, bindings, kb)? else {
                return Err(EvalError::TypeMismatch {
                    op: "append",
                    found: "non-series",
                });
            };
            let r = num(eval_expr(item, bindings, kb)?, "append")?;
            if r < 0.0 {
                return Err(EvalError::TypeMismatch {
                    op: "append",
                    found: "negative number",
                });
            }
            s.push(r as u64);
            Value::Series(s)
        }
        Expr::WindowCount { series, window } => {
            let now = bindings
                .now
                .ok_or_else(|| EvalError::MissingBinding("now".into()))?;
            match eval_expr(series, bindings, kb)? {
                Value::Series(s) => {
                    Value::Num(s.iter().filter(|&&r| r <= now && now - r < *window).count() as f64)
                }
                other => {
                    return Err(EvalError::TypeMismatch {
                        op: "count",
                        found: other.type_name(),
                    })
                }
            }
        }
    })
}

fn compare(op: CmpOp, left: &Value, right: &Value) -> Result<bool, EvalError> {
    match (left, right) {
        (Value::Num(a), Value::Num(b)) => Ok(match op {
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
        }),
        (a, b) if op == CmpOp::Eq => {
            if core::mem::discriminant(a) == core::mem::discriminant(b) {
                Ok(a == b)
            } else {
                Err(EvalError::TypeMismatch {
                    op: "=",
                    found: b.type_name(),
                })
            }
        }
        (a, _) => Err(EvalError::TypeMismatch {
            op: op.symbol(),
            found: a.type_name(),
        }),
    }
}

/// Knowledge lookups read facts, then the system model.
pub fn eval_condition(
    cond: &Condition,
    bindings: &Binding,
    kb: &KnowledgeBase,
) -> Result<bool, EvalError> {
    match cond {
        Condition::True => Ok(true),
        Condition::Cmp { left, op, right } => {
            let l = eval_expr(left, bindings, kb)?;
            let r = eval_expr(right, bindings, kb)?;
            compare(*op, &l, &r)
        }
        Condition::And(cs) => {
            for c in cs {
                if !eval_condition(c, bindings, kb)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Condition::Or(cs) => {
            for c in cs {
                if eval_condition(c, bindings, kb)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Condition::Not(c) => Ok(!eval_condition(c, bindings, kb)?),
        Condition::Known(key) => Ok(kb.contains(&resolve_template(key, bindings, kb)?)),
    }
}

/// Every rule whose event matches and whose condition holds, ordered by
/// priority (descending) then id.
pub fn decide<'r>(
    rules: &'r [DecisionRule],
    stimulus: &Stimulus,
    kb: &KnowledgeBase,
    now: u64,
) -> Result<Vec<(&'r DecisionRule, Binding)>, DecideError> {
    let mut fired = Vec::new();
    for rule in rules {
        let Some(binding) = match_event(&rule.event, stimulus) else {
            continue;
        };
        let binding = binding.at(now);
        let holds =
            eval_condition(&rule.condition, &binding, kb).map_err(|source| DecideError {
                rule: rule.id.clone(),
                source,
            })?;
        if holds {
            fired.push((rule, binding));
        }
    }
    fired.sort_by(|(a, _), (b, _)| b.priority.cmp(&a.priority).then_with(|| a.id.cmp(&b.id)));
    Ok(fired)
}

pub fn eval_payload(
    payload: &PayloadExpr,
    bindings: &Binding,
    kb: &KnowledgeBase,
) -> Result<Payload, EvalError> {
    let p = match payload {
        PayloadExpr::Value(e) => Payload::Value(Fuzzy::new(num(
            eval_expr(e, bindings, kb)?,
            "payload value",
        )?)?),
        PayloadExpr::Assertion { key, value } => Payload::Assertion {
            key: resolve_template(key, bindings, kb)?,
            value: eval_expr(value, bindings, kb)?,
        },
        PayloadExpr::Question { key } => Payload::Question {
            key: resolve_template(key, bindings, kb)?,
        },
        PayloadExpr::Response { key, value } => Payload::Response {
            key: resolve_template(key, bindings, kb)?,
            value: eval_expr(value, bindings, kb)?,
        },
        PayloadExpr::TaskRef(t) => Payload::TaskRef(resolve_template(t, bindings, kb)?),
    };
    p.validate()?;
    Ok(p)
}

fn reply_target(bindings: &Binding) -> Result<(AgentId, ConversationId), EvalError> {
    match (&bindings.sender, &bindings.conversation) {
        (Some(s), Some(c)) => Ok((s.clone(), c.clone())),
        _ => Err(EvalError::NoSender),
    }
}

/// Instantiates one action under `bindings`. `owner` is the acting agent.
pub fn apply_action(
    action: &ActionSpec,
    bindings: &Binding,
    kb: &KnowledgeBase,
    owner: &AgentId,
) -> Result<Effect, EvalError> {
    match action {
        ActionSpec::Send {
            performative,
            to,
            mtype,
            payload,
        } => {
            let (receiver, conversation) = match to {
                Recipient::Sender => {
                    let (s, c) = reply_target(bindings)?;
                    (s, Some(c))
                }
                Recipient::Agent(a) => (a.clone(), None),
                Recipient::Kb(key) => {
                    let key = resolve_template(key, bindings, kb)?;
                    match kb.lookup(&key) {
                        Some(Value::Text(id)) => (
                            AgentId::new(id.clone())
                                .map_err(|_| EvalError::NotAnAgent(id.clone()))?,
                            None,
                        ),
                        Some(other) => return Err(EvalError::NotAnAgent(other.to_string())),
                        None => return Err(EvalError::MissingKnowledgeKey(key)),
                    }
                }
            };
            if receiver == *owner {
                return Err(ModelError::SelfMessage(receiver).into());
            }
            Ok(Effect::Outbound(Outgoing {
                receiver,
                template: ActTemplate {
                    performative: *performative,
                    sender: owner.clone(),
                    mtype: mtype.clone(),
                    payload: eval_payload(payload, bindings, kb)?,
                    conversation,
                },
            }))
        }
        ActionSpec::Diffuse {
            performative,
            community,
            mtype,
            payload,
            ack,
        } => {
            let ack = match ack {
                Some(a) => {
                    let (receiver, conversation) = reply_target(bindings)?;
                    Some(Outgoing {
                        receiver,
                        template: ActTemplate {
                            performative: a.performative,
                            sender: owner.clone(),
                            mtype: a.mtype.clone(),
                            payload: eval_payload(&a.payload, bindings, kb)?,
                            conversation: Some(conversation),
                        },
                    })
                }
                None => None,
            };
            Ok(Effect::OutboundDiffusion {
                community: community.clone(),
                template: ActTemplate {
                    performative: *performative,
                    sender: owner.clone(),
                    mtype: mtype.clone(),
                    payload: eval_payload(payload, bindings, kb)?,
                    conversation: None,
                },
                ack,
            })
        }
        ActionSpec::UpdateKnowledge { key, value } => Ok(Effect::KnowledgeUpdate {
            key: resolve_template(key, bindings, kb)?,
            value: eval_expr(value, bindings, kb)?,
        }),
        ActionSpec::EnvironmentOp { op, params } => {
            let mut out = BTreeMap::new();
            for (k, e) in params {
                out.insert(k.clone(), eval_expr(e, bindings, kb)?);
            }
            Ok(Effect::EnvironmentEffect {
                op: op.clone(),
                params: out,
            })
        }
    }
}

/// One rule per line, sorted by rule id.
pub fn dump_rules(rules: &[DecisionRule]) -> String {
    let mut sorted: Vec<&DecisionRule> = rules.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = String::new();
    for r in sorted {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}
