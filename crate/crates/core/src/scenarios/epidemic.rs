//! Epidemic simulation and detection.
//!
//! Contaminants and infected individuals are reactive carriers on a grid.
//! A newly infected individual consults its doctor, the doctor reports the
//! case to the health authority, and the authority declares an epidemic in
//! a region once `k` cases from that region fall within a window of `w`
//! rounds, alerting every doctor.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{agent, env_op, invalid, send, ScenarioError};
use crate::behaviour::{AgentSpec, InterpretationRule, Level, ModelUpdate, Reflex};
use crate::model::{
    build_system, ActionSpec, AgentId, CmpOp, Community, Condition, DecisionRule, EventPattern,
    Expr, Interaction, KnowledgeBase, PayloadExpr, Performative, Recipient, Role, Value,
};
use crate::organization::AffinityNetwork;
use crate::runtime::grid::Cell;
use crate::runtime::{Grid, Injection, World, CONTAMINATED, TICK};

/// Message types used by the scenario.
pub const CONSULT: u32 = 3;
pub const REPORT: u32 = 4;
pub const ALERT: u32 = 6;
pub const DECLARATION: u32 = 7;

/// Percept that makes a doctor report a case without a consultation.
pub const CASE: &str = "case";
pub const DOCTORS: &str = "doctors";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contaminant {
    pub id: AgentId,
    pub at: Cell,
    pub disease: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: AgentId,
    pub at: Cell,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doctor: Option<AgentId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Doctor {
    pub id: AgentId,
    pub region: String,
}

/// A case a doctor reports on its own; `round` is the round the
/// authority interprets it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptedReport {
    pub round: u64,
    pub doctor: AgentId,
    pub disease: String,
}

fn default_authority() -> AgentId {
    AgentId::new("authority").expect("nonempty")
}

fn default_radius() -> u32 {
    1
}

fn default_threshold() -> u32 {
    3
}

fn default_window() -> u64 {
    5
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpidemicConfig {
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub contaminants: Vec<Contaminant>,
    #[serde(default)]
    pub individuals: Vec<Individual>,
    pub doctors: Vec<Doctor>,
    #[serde(default = "default_authority")]
    pub authority: AgentId,
    pub infection_probability: f64,
    #[serde(default = "default_radius")]
    pub proximity_radius: u32,
    #[serde(default = "default_threshold")]
    pub detection_threshold: u32,
    #[serde(default = "default_window")]
    pub detection_window: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub movement: bool,
    /// Disease codes the authority recognises. Empty means the diseases
    /// carried by the contaminants.
    #[serde(default)]
    pub known_diseases: Vec<String>,
    /// Second reporting tier: the authority informs this agent of each
    /// declaration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upstream_authority: Option<AgentId>,
    #[serde(default)]
    pub scripted_reports: Vec<ScriptedReport>,
    #[serde(default)]
    pub affinity: AffinityNetwork,
}

impl EpidemicConfig {
    /// An empty grid with the given doctors and default detection settings.
    pub fn new(width: u32, height: u32, doctors: Vec<Doctor>) -> Self {
        EpidemicConfig {
            width,
            height,
            contaminants: Vec::new(),
            individuals: Vec::new(),
            doctors,
            authority: default_authority(),
            infection_probability: 0.5,
            proximity_radius: default_radius(),
            detection_threshold: default_threshold(),
            detection_window: default_window(),
            seed: 0,
            movement: true,
            known_diseases: Vec::new(),
            upstream_authority: None,
            scripted_reports: Vec::new(),
            affinity: AffinityNetwork::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.detection_threshold < 1 {
            return Err(invalid("detection_threshold must be at least 1"));
        }
        if self.detection_window < 1 {
            return Err(invalid("detection_window must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.infection_probability) {
            return Err(invalid(format!(
                "infection_probability {} outside [0, 1]",
                self.infection_probability
            )));
        }
        if self.doctors.is_empty() {
            return Err(invalid("at least one doctor is required"));
        }
        let doctors: BTreeSet<&AgentId> = self.doctors.iter().map(|d| &d.id).collect();
        for i in &self.individuals {
            if let Some(d) = &i.doctor {
                if !doctors.contains(d) {
                    return Err(invalid(format!("{} names unknown doctor {d}", i.id)));
                }
            }
        }
        for r in &self.scripted_reports {
            if r.round == 0 {
                return Err(invalid("scripted reports are interpreted from round 1 on"));
            }
            if !doctors.contains(&r.doctor) {
                return Err(invalid(format!("report names unknown doctor {}", r.doctor)));
            }
        }
        Ok(())
    }

    fn known(&self) -> BTreeSet<String> {
        if self.known_diseases.is_empty() {
            self.contaminants
                .iter()
                .map(|c| c.disease.clone())
                .collect()
        } else {
            self.known_diseases.iter().cloned().collect()
        }
    }

    /// Doctor of each individual; unassigned ones go round-robin.
    pub fn assignments(&self) -> BTreeMap<AgentId, &Doctor> {
        let mut out = BTreeMap::new();
        let mut next = 0;
        for i in &self.individuals {
            let d = match &i.doctor {
                Some(id) => self
                    .doctors
                    .iter()
                    .find(|d| &d.id == id)
                    .expect("validated"),
                None => {
                    let d = &self.doctors[next % self.doctors.len()];
                    next += 1;
                    d
                }
            };
            out.insert(i.id.clone(), d);
        }
        out
    }
}

fn carrier_reflex() -> Reflex {
    Reflex {
        pattern: EventPattern::percept(TICK),
        actions: vec![env_op("move"), env_op("infect")],
    }
}

fn contaminant(c: &Contaminant) -> AgentSpec {
    AgentSpec::reactive(c.id.clone(), vec![carrier_reflex()])
}

fn individual(i: &Individual, doctor: &Doctor) -> AgentSpec {
    let consult = Reflex {
        pattern: EventPattern::percept(CONTAMINATED).bind("D"),
        actions: vec![
            ActionSpec::UpdateKnowledge {
                key: "state".into(),
                value: Expr::lit("patient"),
            },
            send(
                Performative::Ask,
                Recipient::Agent(doctor.id.clone()),
                CONSULT,
                PayloadExpr::Assertion {
                    key: doctor.region.clone(),
                    value: Expr::var("D"),
                },
            ),
        ],
    };
    AgentSpec::reactive(i.id.clone(), vec![consult, carrier_reflex()])
        .with_kb(KnowledgeBase::default().fact("state", "healthy"))
}

fn doctor(d: &Doctor, authority: &AgentId) -> AgentSpec {
    let report = |value: Expr| {
        send(
            Performative::Inform,
            Recipient::Agent(authority.clone()),
            REPORT,
            PayloadExpr::Assertion {
                key: d.region.clone(),
                value,
            },
        )
    };
    let kb = KnowledgeBase::default()
        .fact("region", d.region.as_str())
        .belief("alert", false)
        .rule(DecisionRule::new(
            "consult",
            EventPattern::message(Some(Performative::Ask), Some(CONSULT)).bind("D"),
            Condition::True,
            vec![
                send(
                    Performative::Accept,
                    Recipient::Sender,
                    CONSULT,
                    PayloadExpr::Response {
                        key: "diagnosis".into(),
                        value: Expr::var("D"),
                    },
                ),
                report(Expr::var("D")),
            ],
        ))
        .rule(DecisionRule::new(
            "report_case",
            EventPattern::percept(CASE).bind("D"),
            Condition::True,
            vec![report(Expr::var("D"))],
        ))
        .rule(DecisionRule::new(
            "ack_alert",
            EventPattern::message(Some(Performative::Diffuse), Some(ALERT)),
            Condition::True,
            vec![send(
                Performative::Confirm,
                Recipient::Sender,
                ALERT,
                PayloadExpr::Response {
                    key: "alert".into(),
                    value: Expr::lit(true),
                },
            )],
        ));
    let interpreter = vec![
        InterpretationRule {
            tag: "consultation".into(),
            trigger: EventPattern::message(Some(Performative::Ask), Some(CONSULT)).bind("D"),
            guard: Condition::True,
            updates: vec![ModelUpdate::new("patients.{sender}", Expr::var("D"))],
        },
        InterpretationRule {
            tag: "alert_received".into(),
            trigger: EventPattern::message(Some(Performative::Diffuse), Some(ALERT)),
            guard: Condition::True,
            updates: vec![ModelUpdate::new("alert", Expr::lit(true))],
        },
    ];
    AgentSpec::cognitive(d.id.clone(), kb, interpreter)
}

/// The authority's declaration rule: `k` in-window reports from region `R`
/// and no earlier declaration there.
pub fn declaration_rule(k: u32, w: u64) -> DecisionRule {
    DecisionRule::new(
        "declare_epidemic",
        EventPattern::message(Some(Performative::Inform), Some(REPORT))
            .bind("D")
            .bind_key("R"),
        Condition::And(vec![
            Condition::Known("reports.{R}".into()),
            Condition::cmp(
                Expr::window_count(Expr::kb("reports.{R}"), w),
                CmpOp::Ge,
                Expr::lit(f64::from(k)),
            ),
            Condition::cmp(Expr::kb("declared.{R}"), CmpOp::Eq, Expr::lit(false)),
        ]),
        vec![
            ActionSpec::UpdateKnowledge {
                key: "declared.{R}".into(),
                value: Expr::lit(true),
            },
            ActionSpec::Diffuse {
                performative: Performative::Diffuse,
                community: DOCTORS.into(),
                mtype: ALERT.into(),
                payload: PayloadExpr::Assertion {
                    key: "{R}".into(),
                    value: Expr::var("D"),
                },
                ack: None,
            },
        ],
    )
    .with_priority(1)
}

fn declaration(cfg: &EpidemicConfig) -> DecisionRule {
    let mut rule = declaration_rule(cfg.detection_threshold, cfg.detection_window);
    if let Some(up) = &cfg.upstream_authority {
        rule.actions.push(send(
            Performative::Inform,
            Recipient::Agent(up.clone()),
            DECLARATION,
            PayloadExpr::Assertion {
                key: "{R}".into(),
                value: Expr::var("D"),
            },
        ));
    }
    rule
}

fn upstream(id: &AgentId) -> AgentSpec {
    let kb = KnowledgeBase::default().rule(DecisionRule::new(
        "ack_declaration",
        EventPattern::message(Some(Performative::Inform), Some(DECLARATION)),
        Condition::True,
        vec![send(
            Performative::Confirm,
            Recipient::Sender,
            DECLARATION,
            PayloadExpr::Response {
                key: "declaration".into(),
                value: Expr::lit(true),
            },
        )],
    ));
    let interpreter = vec![InterpretationRule {
        tag: "declaration_received".into(),
        trigger: EventPattern::message(Some(Performative::Inform), Some(DECLARATION))
            .bind("D")
            .bind_key("R"),
        guard: Condition::True,
        updates: vec![ModelUpdate::new("declared.{R}", Expr::var("D"))],
    }];
    AgentSpec::cognitive(id.clone(), kb, interpreter)
}

fn authority(cfg: &EpidemicConfig) -> AgentSpec {
    let mut kb = KnowledgeBase::default();
    for d in cfg.known() {
        kb = kb.fact(&format!("known.{d}"), true);
    }
    let regions: BTreeSet<&str> = cfg.doctors.iter().map(|d| d.region.as_str()).collect();
    for r in regions {
        kb = kb
            .belief(&format!("cases.{r}"), 0.0)
            .belief(&format!("reports.{r}"), Value::Series(Vec::new()))
            .belief(&format!("declared.{r}"), false);
    }
    let kb = kb
        .rule(DecisionRule::new(
            "ack_report",
            EventPattern::message(Some(Performative::Inform), Some(REPORT)),
            Condition::True,
            vec![send(
                Performative::Confirm,
                Recipient::Sender,
                REPORT,
                PayloadExpr::Response {
                    key: "report".into(),
                    value: Expr::lit(true),
                },
            )],
        ))
        .rule(declaration(cfg));

    let trigger = || {
        EventPattern::message(Some(Performative::Inform), Some(REPORT))
            .bind("D")
            .bind_key("R")
    };
    let known = Condition::And(vec![
        Condition::Known("known.{D}".into()),
        Condition::Known("cases.{R}".into()),
    ]);
    let interpreter = vec![
        InterpretationRule {
            tag: "case_counted".into(),
            trigger: trigger(),
            guard: known.clone(),
            updates: vec![
                ModelUpdate::new(
                    "cases.{R}",
                    Expr::add(Expr::kb("cases.{R}"), Expr::lit(1.0)),
                ),
                ModelUpdate::new(
                    "reports.{R}",
                    Expr::append(Expr::kb("reports.{R}"), Expr::Now),
                ),
            ],
        },
        InterpretationRule {
            tag: "unknown_disease".into(),
            trigger: trigger(),
            guard: Condition::not(Condition::Known("known.{D}".into())),
            updates: Vec::new(),
        },
    ];
    AgentSpec::cognitive(cfg.authority.clone(), kb, interpreter)
}

fn interactions() -> Vec<Interaction> {
    let i = |s: &str, r: &str, p| Interaction {
        sender_role: s.into(),
        receiver_role: r.into(),
        performative: p,
    };
    vec![
        i("individual", "doctor", Performative::Ask),
        i("doctor", "individual", Performative::Accept),
        i("doctor", "individual", Performative::Refuse),
        i("doctor", "authority", Performative::Inform),
        i("authority", "doctor", Performative::Confirm),
        i("authority", "doctor", Performative::Diffuse),
        i("doctor", "authority", Performative::Confirm),
        i("authority", "upstream", Performative::Inform),
        i("upstream", "authority", Performative::Confirm),
    ]
}

/// Builds the world: grid carriers, individuals, doctors and authority.
pub fn build_epidemic(cfg: &EpidemicConfig) -> Result<World, ScenarioError> {
    cfg.validate()?;
    let assignments = cfg.assignments();

    let mut agents = Vec::new();
    let mut roles = BTreeMap::new();
    for c in &cfg.contaminants {
        agents.push(contaminant(c));
        roles.insert(c.id.clone(), Role::new("contaminant", Level::Reactive));
    }
    for i in &cfg.individuals {
        agents.push(individual(i, assignments[&i.id]));
        roles.insert(i.id.clone(), Role::new("individual", Level::Reactive));
    }
    for d in &cfg.doctors {
        agents.push(doctor(d, &cfg.authority));
        roles.insert(d.id.clone(), Role::new("doctor", Level::Cognitive));
    }
    agents.push(authority(cfg));
    roles.insert(
        cfg.authority.clone(),
        Role::new("authority", Level::Cognitive),
    );
    if let Some(up) = &cfg.upstream_authority {
        agents.push(upstream(up));
        roles.insert(up.clone(), Role::new("upstream", Level::Cognitive));
    }

    let doctors = Community::new(DOCTORS, cfg.doctors.iter().map(|d| d.id.clone()));
    let present: BTreeSet<String> = roles.values().map(|r| r.name.clone()).collect();
    let interactions = interactions()
        .into_iter()
        .filter(|i| present.contains(&i.sender_role) && present.contains(&i.receiver_role))
        .collect();
    let system = build_system(
        agents,
        interactions,
        roles,
        vec![doctors],
        cfg.affinity.clone(),
    )?;

    let mut grid = Grid::new(
        cfg.width,
        cfg.height,
        cfg.proximity_radius,
        cfg.infection_probability,
        cfg.movement,
        cfg.seed,
    )?;
    for c in &cfg.contaminants {
        grid.add_carrier(&c.id, c.at, &c.disease, cfg.seed)?;
    }
    for i in &cfg.individuals {
        grid.add_individual(&i.id, i.at, cfg.seed)?;
    }

    let injections = cfg
        .scripted_reports
        .iter()
        .map(|r| Injection::new(r.round - 1, r.doctor.clone(), CASE, r.disease.as_str()));
    Ok(World::new(system, cfg.seed)
        .with_grid(grid)
        .with_injections(injections)?)
}

/// Grid-only configuration: `contaminants` carriers and `individuals`
/// healthy agents at the given cells, and a single doctor.
pub fn grid_config(
    width: u32,
    height: u32,
    contaminants: &[(Cell, &str)],
    individuals: &[Cell],
    p: f64,
    seed: u64,
) -> Result<EpidemicConfig, ScenarioError> {
    let mut cfg = EpidemicConfig::new(
        width,
        height,
        vec![Doctor {
            id: agent("doctor")?,
            region: "region".into(),
        }],
    );
    for (n, (at, disease)) in contaminants.iter().enumerate() {
        cfg.contaminants.push(Contaminant {
            id: agent(&format!("c{n}"))?,
            at: *at,
            disease: (*disease).into(),
        });
    }
    for (n, at) in individuals.iter().enumerate() {
        cfg.individuals.push(Individual {
            id: agent(&format!("i{n}"))?,
            at: *at,
            doctor: None,
        });
    }
    cfg.infection_probability = p;
    cfg.seed = seed;
    Ok(cfg)
}
