use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::{AgentId, MessageType, Performative, Value};

/// Where an observed event comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    #[default]
    Message,
    Environment,
}

/// Event side of a decision rule. `None` fields are wildcards.
///
/// For message events `binder` captures the payload value and `key_binder`
/// the payload key; for environment events they capture the percept value
/// and key. Message matches also bind `sender` implicitly.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EventPattern {
    pub source: Source,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub performative: Option<Performative>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sender: Option<AgentId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mtype: Option<MessageType>,
    /// Percept key filter, environment events only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub binder: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key_binder: Option<String>,
}

impl EventPattern {
    pub fn message(performative: Option<Performative>, mtype: Option<u32>) -> Self {
        EventPattern {
            source: Source::Message,
            performative,
            mtype: mtype.map(MessageType::new),
            ..Default::default()
        }
    }

    pub fn percept(key: &str) -> Self {
        EventPattern {
            source: Source::Environment,
            key: Some(key.into()),
            ..Default::default()
        }
    }

    pub fn bind(mut self, var: &str) -> Self {
        self.binder = Some(var.into());
        self
    }

    pub fn bind_key(mut self, var: &str) -> Self {
        self.key_binder = Some(var.into());
        self
    }

    pub fn from_sender(mut self, sender: AgentId) -> Self {
        self.sender = Some(sender);
        self
    }

    /// Variables a successful match binds.
    pub fn bound_variables(&self) -> Vec<&str> {
        let mut vars = Vec::new();
        if self.source == Source::Message {
            vars.push(crate::rules::SENDER_VAR);
        }
        vars.extend(self.binder.as_deref());
        vars.extend(self.key_binder.as_deref());
        vars
    }
}

/// Value expression evaluated against bindings and knowledge.
///
/// Knowledge keys and templates may contain `{name}` placeholders that are
/// filled from bound variables first, then from knowledge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Lit(Value),
    Var(String),
    Kb(String),
    /// Current round.
    Now,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    /// Series with the round given by the second operand appended.
    Append(Box<Expr>, Box<Expr>),
    /// Number of series entries `e` with `now - window < e <= now`.
    WindowCount {
        series: Box<Expr>,
        window: u64,
    },
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn lit(v: impl Into<Value>) -> Self {
        Expr::Lit(v.into())
    }

    pub fn var(name: &str) -> Self {
        Expr::Var(name.into())
    }

    pub fn kb(key: &str) -> Self {
        Expr::Kb(key.into())
    }

    pub fn add(a: Expr, b: Expr) -> Self {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Self {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn append(series: Expr, item: Expr) -> Self {
        Expr::Append(Box::new(series), Box::new(item))
    }

    pub fn window_count(series: Expr, window: u64) -> Self {
        Expr::WindowCount {
            series: Box::new(series),
            window,
        }
    }

    pub(crate) fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Append(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::WindowCount { series, .. } => series.visit(f),
            _ => {}
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
        }
    }
}

/// Condition side of a decision rule.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    #[default]
    True,
    Cmp {
        left: Expr,
        op: CmpOp,
        right: Expr,
    },
    And(Vec<Condition>),
    Or(Vec<Condition>),
    Not(Box<Condition>),
    /// Holds when the (templated) knowledge key exists.
    Known(String),
}

#[allow(clippy::should_implement_trait)]
impl Condition {
    pub fn cmp(left: Expr, op: CmpOp, right: Expr) -> Self {
        Condition::Cmp { left, op, right }
    }

    pub fn not(c: Condition) -> Self {
        Condition::Not(Box::new(c))
    }

    pub fn depth(&self) -> usize {
        match self {
            Condition::True | Condition::Cmp { .. } | Condition::Known(_) => 1,
            Condition::And(cs) | Condition::Or(cs) => {
                1 + cs.iter().map(Condition::depth).max().unwrap_or(0)
            }
            Condition::Not(c) => 1 + c.depth(),
        }
    }

    pub(crate) fn exprs<'a>(&'a self, out: &mut Vec<&'a Expr>) {
        match self {
            Condition::Cmp { left, right, .. } => {
                out.push(left);
                out.push(right);
            }
            Condition::And(cs) | Condition::Or(cs) => cs.iter().for_each(|c| c.exprs(out)),
            Condition::Not(c) => c.exprs(out),
            Condition::True | Condition::Known(_) => {}
        }
    }

    pub(crate) fn templates<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Condition::Known(t) => out.push(t),
            Condition::And(cs) | Condition::Or(cs) => cs.iter().for_each(|c| c.templates(out)),
            Condition::Not(c) => c.templates(out),
            _ => {}
        }
    }
}

/// Payload built by an action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadExpr {
    Value(Expr),
    Assertion { key: String, value: Expr },
    Question { key: String },
    Response { key: String, value: Expr },
    TaskRef(String),
}

impl PayloadExpr {
    pub(crate) fn exprs(&self) -> Option<&Expr> {
        match self {
            PayloadExpr::Value(e)
            | PayloadExpr::Assertion { value: e, .. }
            | PayloadExpr::Response { value: e, .. } => Some(e),
            _ => None,
        }
    }

    pub(crate) fn template(&self) -> &str {
        match self {
            PayloadExpr::Value(_) => "",
            PayloadExpr::Assertion { key, .. }
            | PayloadExpr::Question { key }
            | PayloadExpr::Response { key, .. }
            | PayloadExpr::TaskRef(key) => key,
        }
    }
}

/// Receiver of a `send` action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipient {
    /// Reply to the sender of the triggering message, in its conversation.
    Sender,
    Agent(AgentId),
    /// Agent id read from a knowledge key.
    Kb(String),
}

/// Reply sent to the triggering message's sender once every recipient of a
/// diffusion has acknowledged it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AckSpec {
    pub performative: Performative,
    pub mtype: MessageType,
    pub payload: PayloadExpr,
}

/// Action side of a decision rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSpec {
    Send {
        performative: Performative,
        to: Recipient,
        mtype: MessageType,
        payload: PayloadExpr,
    },
    Diffuse {
        performative: Performative,
        community: String,
        mtype: MessageType,
        payload: PayloadExpr,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ack: Option<AckSpec>,
    },
    UpdateKnowledge {
        key: String,
        value: Expr,
    },
    EnvironmentOp {
        op: String,
        #[serde(default)]
        params: BTreeMap<String, Expr>,
    },
}

impl ActionSpec {
    pub(crate) fn exprs(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        match self {
            ActionSpec::Send { payload, .. } => out.extend(payload.exprs()),
            ActionSpec::Diffuse { payload, ack, .. } => {
                out.extend(payload.exprs());
                if let Some(a) = ack {
                    out.extend(a.payload.exprs());
                }
            }
            ActionSpec::UpdateKnowledge { value, .. } => out.push(value),
            ActionSpec::EnvironmentOp { params, .. } => out.extend(params.values()),
        }
        out
    }

    pub(crate) fn templates(&self) -> Vec<&str> {
        let mut out = Vec::new();
        match self {
            ActionSpec::Send { payload, to, .. } => {
                out.push(payload.template());
                if let Recipient::Kb(k) = to {
                    out.push(k.as_str());
                }
            }
            ActionSpec::Diffuse { payload, ack, .. } => {
                out.push(payload.template());
                if let Some(a) = ack {
                    out.push(a.payload.template());
                }
            }
            ActionSpec::UpdateKnowledge { key, .. } => out.push(key),
            ActionSpec::EnvironmentOp { .. } => {}
        }
        out
    }
}

/// Event-condition-action decision rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub id: String,
    pub event: EventPattern,
    #[serde(default)]
    pub condition: Condition,
    pub actions: Vec<ActionSpec>,
    #[serde(default)]
    pub priority: i32,
}

impl DecisionRule {
    pub fn new(
        id: &str,
        event: EventPattern,
        condition: Condition,
        actions: Vec<ActionSpec>,
    ) -> Self {
        DecisionRule {
            id: id.into(),
            event,
            condition,
            actions,
            priority: 0,
        }
    }

    pub fn with_priority(mut self, priority: i32) -> Self {
        self.priority = priority;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InteractionConfig {
    /// Obligation timeout in rounds. A world uses the largest value any
    /// of its agents sets.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeout_rounds: Option<u64>,
}

/// An agent's knowledge: domain facts and internal state, its beliefs about
/// the system, its decision rules, its acquaintances and interaction
/// parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnowledgeBase {
    pub facts: BTreeMap<String, Value>,
    pub system_model: BTreeMap<String, Value>,
    pub rules: Vec<DecisionRule>,
    pub acquaintances: Vec<AgentId>,
    pub interaction: InteractionConfig,
}

impl KnowledgeBase {
    /// Facts first, then system model.
    pub fn lookup(&self, key: &str) -> Option<&Value> {
        self.facts.get(key).or_else(|| self.system_model.get(key))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.lookup(key).is_some()
    }

    /// Writes into the system model when the key lives there, else into facts.
    pub fn write(&mut self, key: String, value: Value) {
        if let Some(slot) = self.system_model.get_mut(&key) {
            *slot = value;
        } else {
            self.facts.insert(key, value);
        }
    }

    pub fn write_model(&mut self, key: String, value: Value) {
        self.facts.remove(&key);
        self.system_model.insert(key, value);
    }

    pub fn fact(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.facts.insert(key.into(), value.into());
        self
    }

    pub fn belief(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.system_model.insert(key.into(), value.into());
        self
    }

    pub fn rule(mut self, rule: DecisionRule) -> Self {
        self.rules.push(rule);
        self
    }
}

/// Placeholders (`{name}`) in a key template, in order of appearance.
pub fn placeholders(template: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        match after.find('}') {
            Some(end) => {
                out.push(&after[..end]);
                rest = &after[end + 1..];
            }
            None => break,
        }
    }
    out
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(Value::Text(t)) => write!(f, "\"{t}\""),
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Kb(k) => write!(f, "kb[{k}]"),
            Expr::Now => f.write_str("now"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Append(a, b) => write!(f, "append({a}, {b})"),
            Expr::WindowCount { series, window } => write!(f, "count({series}, {window})"),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join(f: &mut fmt::Formatter<'_>, cs: &[Condition], sep: &str) -> fmt::Result {
            f.write_str("(")?;
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                write!(f, "{c}")?;
            }
            f.write_str(")")
        }
        match self {
            Condition::True => f.write_str("true"),
            Condition::Cmp { left, op, right } => write!(f, "{left} {} {right}", op.symbol()),
            Condition::And(cs) => join(f, cs, " and "),
            Condition::Or(cs) => join(f, cs, " or "),
            Condition::Not(c) => write!(f, "not ({c})"),
            Condition::Known(k) => write!(f, "known[{k}]"),
        }
    }
}

impl fmt::Display for EventPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.source {
            Source::Message => f.write_str("message")?,
            Source::Environment => f.write_str("percept")?,
        }
        match self.performative {
            Some(p) => write!(f, " {p}")?,
            None => f.write_str(" *")?,
        }
        if let Some(s) = &self.sender {
            write!(f, " from={s}")?;
        }
        if let Some(t) = &self.mtype {
            write!(f, " type={}", t.code)?;
        }
        if let Some(k) = &self.key {
            write!(f, " key={k}")?;
        }
        if let Some(b) = &self.binder {
            write!(f, " bind={b}")?;
        }
        if let Some(b) = &self.key_binder {
            write!(f, " bind_key={b}")?;
        }
        Ok(())
    }
}

impl fmt::Display for PayloadExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PayloadExpr::Value(e) => write!(f, "{e}"),
            PayloadExpr::Assertion { key, value } => write!(f, "{key}={value}"),
            PayloadExpr::Question { key } => write!(f, "{key}?"),
            PayloadExpr::Response { key, value } => write!(f, "{key}:{value}"),
            PayloadExpr::TaskRef(t) => write!(f, "task:{t}"),
        }
    }
}

impl fmt::Display for ActionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionSpec::Send {
                performative,
                to,
                mtype,
                payload,
            } => {
                let to = match to {
                    Recipient::Sender => "sender".into(),
                    Recipient::Agent(a) => alloc::format!("{a}"),
                    Recipient::Kb(k) => alloc::format!("kb[{k}]"),
                };
                write!(f, "send {performative}(->{to}, {}, {payload})", mtype.code)
            }
            ActionSpec::Diffuse {
                performative,
                community,
                mtype,
                payload,
                ack,
            } => {
                write!(
                    f,
                    "diffuse {performative}(->{community}, {}, {payload})",
                    mtype.code
                )?;
                if let Some(a) = ack {
                    write!(
                        f,
                        " then {}({}, {})",
                        a.performative, a.mtype.code, a.payload
                    )?;
                }
                Ok(())
            }
            ActionSpec::UpdateKnowledge { key, value } => write!(f, "set {key} := {value}"),
            ActionSpec::EnvironmentOp { op, params } => {
                write!(f, "env {op}(")?;
                for (i, (k, v)) in params.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}={v}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for DecisionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}] on {} when {} do ",
            self.id, self.priority, self.event, self.condition
        )?;
        for (i, a) in self.actions.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}
