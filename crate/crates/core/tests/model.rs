use std::collections::BTreeMap;

use proptest::prelude::*;

use mlagent_core::behaviour::{AgentSpec, Level};
use mlagent_core::model::{
    build_system, make_act, validate_rule, ActionSpec, AgentId, CmpOp, CommunicationAct, Community,
    Condition, ConversationId, DecisionRule, Diagnostic, EventPattern, Expr, KnowledgeBase,
    MessageType, ModelError, Payload, PayloadExpr, Performative, Role, SystemDocument, SystemModel,
    Value,
};
use mlagent_core::organization::AffinityNetwork;
use mlagent_core::scenarios::configuration::delta1;

fn id(s: &str) -> AgentId {
    AgentId::new(s).unwrap()
}

fn routine_system(
    rs: usize,
    fs: usize,
    extra: Vec<Community>,
) -> Result<SystemModel, Vec<Diagnostic>> {
    let r: Vec<AgentId> = (1..=rs).map(|i| id(&format!("r{i}"))).collect();
    let f: Vec<AgentId> = (1..=fs).map(|i| id(&format!("f{i}"))).collect();
    let agents = r
        .iter()
        .chain(&f)
        .map(|a| AgentSpec::routine(a.clone(), KnowledgeBase::default()))
        .collect();
    let roles: BTreeMap<AgentId, Role> = r
        .iter()
        .map(|a| (a.clone(), Role::new("requirement", Level::Routine)))
        .chain(
            f.iter()
                .map(|a| (a.clone(), Role::new("function", Level::Routine))),
        )
        .collect();
    let mut orgs = vec![
        Community::new("R", r.clone()),
        Community::new("F", f.clone()),
    ];
    orgs.extend(extra);
    build_system(agents, Vec::new(), roles, orgs, AffinityNetwork::default()).map_err(|e| e.0)
}

#[test]
fn builds_requirement_and_function_agents() {
    let m = routine_system(2, 3, Vec::new()).unwrap();
    assert_eq!(m.agents().len(), 5);
    assert_eq!(m.community("F").unwrap().members.len(), 3);
}

#[test]
fn empty_system_is_valid() {
    let m = build_system(
        Vec::new(),
        Vec::new(),
        BTreeMap::new(),
        Vec::new(),
        AffinityNetwork::default(),
    )
    .unwrap();
    assert!(m.agents().is_empty());
}

#[test]
fn community_with_absent_member() {
    let err = routine_system(1, 1, vec![Community::new("G", [id("f9")])]).unwrap_err();
    assert!(err
        .iter()
        .any(|d| matches!(d, Diagnostic::UnknownAgent { agent, .. } if agent.as_str() == "f9")));
}

#[test]
fn missing_role_and_duplicate_community() {
    let agents = vec![AgentSpec::routine(id("a"), KnowledgeBase::default())];
    let err = build_system(
        agents,
        Vec::new(),
        BTreeMap::new(),
        vec![
            Community::new("X", [id("a")]),
            Community::new("X", [id("a")]),
        ],
        AffinityNetwork::default(),
    )
    .unwrap_err()
    .0;
    assert!(err.contains(&Diagnostic::MissingRole(id("a"))));
    assert!(err.contains(&Diagnostic::DuplicateCommunity("X".into())));
}

#[test]
fn delta1_validates() {
    let m = routine_system(1, 3, Vec::new()).unwrap();
    assert_eq!(validate_rule(&delta1(0.4), &m, &id("f1")), Ok(()));
}

#[test]
fn unbound_variable_and_unknown_community() {
    let m = routine_system(1, 3, Vec::new()).unwrap();
    let mut rule = delta1(0.4);
    rule.condition = Condition::cmp(Expr::var("W"), CmpOp::Gt, Expr::lit(0.4));
    let diags = validate_rule(&rule, &m, &id("f1")).unwrap_err();
    assert_eq!(diags.len(), 1);
    assert!(diags[0].to_string().ends_with("UnboundVariable(W)"));

    let mut rule = delta1(0.4);
    if let ActionSpec::Diffuse { community, .. } = &mut rule.actions[0] {
        *community = "Z".into();
    }
    let diags = validate_rule(&rule, &m, &id("f1")).unwrap_err();
    assert!(diags[0].to_string().ends_with("UnknownCommunity(Z)"));
}

#[test]
fn more_rule_diagnostics() {
    let m = routine_system(1, 1, Vec::new()).unwrap();
    let empty = DecisionRule::new("e", EventPattern::percept("x"), Condition::True, Vec::new());
    assert!(matches!(
        validate_rule(&empty, &m, &id("f1")).unwrap_err()[0],
        Diagnostic::EmptyActions { .. }
    ));

    let mut deep = Condition::True;
    for _ in 0..16 {
        deep = Condition::not(deep);
    }
    let rule = DecisionRule::new(
        "d",
        EventPattern::percept("x"),
        deep,
        vec![ActionSpec::UpdateKnowledge {
            key: "k".into(),
            value: Expr::lit(1.0),
        }],
    );
    assert!(matches!(
        validate_rule(&rule, &m, &id("f1")).unwrap_err()[0],
        Diagnostic::ConditionTooDeep { depth: 17, .. }
    ));

    let reply = DecisionRule::new(
        "r",
        EventPattern::percept("x"),
        Condition::True,
        vec![ActionSpec::Send {
            performative: Performative::Confirm,
            to: mlagent_core::model::Recipient::Sender,
            mtype: MessageType::new(1),
            payload: PayloadExpr::Value(Expr::lit(1.5)),
        }],
    );
    let diags = validate_rule(&reply, &m, &id("f1")).unwrap_err();
    assert!(diags
        .iter()
        .any(|d| matches!(d, Diagnostic::NoSenderToReply { .. })));
    assert!(diags
        .iter()
        .any(|d| matches!(d, Diagnostic::PayloadOutOfRange { .. })));
}

#[test]
fn acts() {
    let a = make_act(
        Performative::Inform,
        id("r1"),
        id("f1"),
        2,
        Payload::value(0.6).unwrap(),
        ConversationId::new("c1").unwrap(),
    )
    .unwrap();
    assert_eq!(a.mtype, MessageType::new(2));
    assert_eq!(a.payload, Payload::value(0.6).unwrap());

    assert_eq!(
        make_act(
            Performative::Ask,
            id("a"),
            id("a"),
            0,
            Payload::Question { key: "k".into() },
            ConversationId::new("c").unwrap(),
        ),
        Err(ModelError::SelfMessage(id("a")))
    );

    let ack = make_act(
        Performative::Confirm,
        id("f1"),
        id("r1"),
        2,
        Payload::Response {
            key: "ack".into(),
            value: Value::Num(1.0),
        },
        ConversationId::new("c1").unwrap(),
    );
    assert!(ack.is_ok());
}

#[test]
fn closed_sets_and_ranges() {
    assert_eq!(Performative::ALL.len(), 13);
    assert!("shout".parse::<Performative>().is_err());
    assert!(Payload::value(1.2).is_err());
    assert!(AgentId::new("").is_err());
    assert!(serde_json::from_str::<Performative>("\"shout\"").is_err());
    assert!(serde_json::from_str::<Payload>(r#"{"value":1.5}"#).is_err());
    assert!(serde_json::from_str::<Level>("5").is_err());
    assert_eq!(
        serde_json::from_str::<Level>("3").unwrap(),
        Level::Cognitive
    );
}

#[test]
fn labelled_message_type_equality_ignores_label() {
    let labelled = MessageType::labelled(2, "requirement value");
    assert_eq!(labelled, MessageType::new(2));
    let s = serde_json::to_string(&labelled).unwrap();
    let back: MessageType = serde_json::from_str(&s).unwrap();
    assert_eq!(back.label.as_deref(), Some("requirement value"));
    assert_eq!(serde_json::to_string(&MessageType::new(4)).unwrap(), "4");
}

#[test]
fn system_document_round_trip() {
    let m = routine_system(2, 2, Vec::new()).unwrap();
    let s = serde_json::to_string(&m).unwrap();
    let back: SystemModel = serde_json::from_str(&s).unwrap();
    assert_eq!(back, m);
    let mut doc: SystemDocument = serde_json::from_str(&s).unwrap();
    doc.roles.clear();
    assert!(doc.build().is_err());
}

fn performative() -> impl Strategy<Value = Performative> {
    (0..Performative::ALL.len()).prop_map(|i| Performative::ALL[i])
}

fn payload() -> impl Strategy<Value = Payload> {
    prop_oneof![
        (0.0f64..=1.0).prop_map(|v| Payload::value(v).unwrap()),
        ("[a-z]{1,6}", "[a-z]{0,6}").prop_map(|(key, v)| Payload::Assertion {
            key,
            value: Value::Text(v)
        }),
        "[a-z]{1,6}".prop_map(|key| Payload::Question { key }),
        ("[a-z]{1,6}", any::<bool>()).prop_map(|(key, v)| Payload::Response {
            key,
            value: Value::Bool(v)
        }),
        "[a-z]{1,6}".prop_map(Payload::TaskRef),
    ]
}

proptest! {
    #[test]
    fn acts_round_trip(
        p in performative(),
        from in "[a-z][a-z0-9]{0,5}",
        to in "[A-Z][a-z0-9]{0,5}",
        code in 0u32..100,
        payload in payload(),
        conv in "c[0-9]{1,4}",
        round in 0u64..1_000_000,
    ) {
        let mut a: CommunicationAct =
            make_act(p, id(&from), id(&to), code, payload, ConversationId::new(conv).unwrap()).unwrap();
        a.round = round;
        let s = serde_json::to_string(&a).unwrap();
        let back: CommunicationAct = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn rules_round_trip(threshold in 0.0f64..=1.0, priority in -5i32..5) {
        let rule = delta1(threshold).with_priority(priority);
        let s = serde_json::to_string(&rule).unwrap();
        let back: DecisionRule = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, rule);
    }

    #[test]
    fn unknown_members_always_rejected(rs in 1usize..4, fs in 1usize..4, ghost in "[g-h][0-9]{1,3}") {
        prop_assert!(routine_system(rs, fs, Vec::new()).is_ok());
        let err = routine_system(rs, fs, vec![Community::new("G", [id(&ghost)])]).unwrap_err();
        prop_assert!(
            err.iter().any(|d| matches!(d, Diagnostic::UnknownAgent { .. })),
            "unknown member accepted"
        );
    }
}
