use std::collections::BTreeSet;

use proptest::prelude::*;

use mlagent_core::behaviour::{step_reactive, step_routine, AgentSpec, Reflex};
use mlagent_core::model::{
    make_act, ActionSpec, CommunicationAct, Community, Condition, ConversationId, DecisionRule,
    EventPattern, Expr, KnowledgeBase, MessageType, Payload, PayloadExpr, Performative, Recipient,
};
use mlagent_core::organization::{AffinityNetwork, Outcome};
use mlagent_core::protocol::{expected_responses, ConversationTracker, Status};
use mlagent_core::rules::{Percept, Stimulus};
use mlagent_core::scenarios::configuration::{build_configuration, ConfigurationConfig};
use mlagent_core::scenarios::epidemic::{build_epidemic, grid_config};
use mlagent_core::AgentId;

fn id(s: &str) -> AgentId {
    AgentId::new(s).unwrap()
}

fn agents(n: usize) -> Vec<AgentId> {
    (0..n).map(|i| id(&format!("a{i}"))).collect()
}

proptest! {
    #[test]
    fn reinforce_keeps_weights_in_unit_interval(
        ops in prop::collection::vec((0usize..5, 0usize..5, any::<bool>()), 0..400),
        delta in 0.01f64..0.99,
        decay in 0.01f64..0.99,
    ) {
        let ids = agents(5);
        let mut net = AffinityNetwork::new(0.1, delta, decay).unwrap();
        for (a, b, ok) in ops {
            if a == b {
                prop_assert!(net.reinforce(&ids[a], &ids[b], Outcome::Success).is_err());
                continue;
            }
            let outcome = if ok { Outcome::Success } else { Outcome::Failure };
            let w = net.reinforce(&ids[a], &ids[b], outcome).unwrap();
            prop_assert!((0.0..=1.0).contains(&w));
        }
        for e in net.entries() {
            prop_assert!((0.0..=1.0).contains(&e.weight));
        }
    }

    #[test]
    fn diffusion_count_monotone_in_threshold(
        weights in prop::collection::vec(0.0f64..=1.0, 7),
        sender in 0usize..8,
    ) {
        let ids = agents(8);
        let c = Community::new("F", ids.iter().cloned());
        let mut net = AffinityNetwork::default();
        let others: Vec<&AgentId> = ids.iter().filter(|m| **m != ids[sender]).collect();
        for (m, w) in others.iter().zip(&weights) {
            net.set_affinity(&ids[sender], m, *w).unwrap();
        }
        let mut last = usize::MAX;
        for step in 0..100 {
            net.set_inhibition_threshold(step as f64 / 100.0).unwrap();
            let got = net.recipients(&ids[sender], &c);
            prop_assert!(got.len() <= last);
            prop_assert!(!got.contains(&ids[sender]));
            prop_assert!(got.windows(2).all(|p| p[0] < p[1]));
            last = got.len();
        }
    }

    #[test]
    fn raising_weights_keeps_recipient_set(
        weights in prop::collection::vec(0.0f64..=1.0, 5),
        bump in 0.0f64..0.5,
    ) {
        let ids = agents(6);
        let c = Community::new("F", ids.iter().cloned());
        let mut net = AffinityNetwork::default();
        for (m, w) in ids[1..].iter().zip(&weights) {
            net.set_affinity(&ids[0], m, *w).unwrap();
        }
        let before = net.recipients(&ids[0], &c);
        for m in &before {
            let w = net.weight(&ids[0], m);
            net.set_affinity(&ids[0], m, (w + bump).min(1.0)).unwrap();
        }
        prop_assert_eq!(before, net.recipients(&ids[0], &c));
    }

    #[test]
    fn satisfaction_is_order_insensitive(
        plan in prop::collection::vec((0usize..4, 0usize..4, 0usize..13, any::<bool>()), 1..12),
        seed in any::<u64>(),
    ) {
        let ids = agents(4);
        let mut acts: Vec<CommunicationAct> = Vec::new();
        for (n, (a, b, p, answer)) in plan.into_iter().enumerate() {
            if a == b {
                continue;
            }
            let p = Performative::ALL[p];
            let conv = ConversationId::numbered(n as u64);
            acts.push(act(p, &ids[a], &ids[b], &conv));
            if answer {
                if let Some(r) = expected_responses(p).into_iter().next() {
                    acts.push(act(r, &ids[b], &ids[a], &conv));
                }
            }
        }
        let forward = statuses(&acts);
        let mut shuffled = acts.clone();
        let mut s = seed | 1;
        for i in (1..shuffled.len()).rev() {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            shuffled.swap(i, (s % (i as u64 + 1)) as usize);
        }
        prop_assert_eq!(forward, statuses(&shuffled));
    }

    #[test]
    fn reactive_and_routine_agree(
        map in prop::collection::btree_map(0u8..16, (0usize..3, 0.0f64..=1.0), 0..16),
    ) {
        let keys: Vec<String> = (0..16).map(|k| format!("k{k}")).collect();
        let action = |target: usize, v: f64| ActionSpec::Send {
            performative: Performative::Inform,
            to: Recipient::Agent(id(&format!("b{target}"))),
            mtype: MessageType::new(1),
            payload: PayloadExpr::Value(Expr::lit(v)),
        };
        let reflexes: Vec<Reflex> = map
            .iter()
            .map(|(k, (t, v))| Reflex {
                pattern: EventPattern::percept(&keys[*k as usize]),
                actions: vec![action(*t, *v)],
            })
            .collect();
        let mut kb = KnowledgeBase::default();
        for (n, r) in reflexes.iter().enumerate() {
            kb = kb.rule(DecisionRule::new(
                &format!("r{n:02}"),
                r.pattern.clone(),
                Condition::True,
                r.actions.clone(),
            ));
        }
        let mut reactive = AgentSpec::reactive(id("a"), reflexes);
        let mut routine = AgentSpec::routine(id("a"), kb);
        let stimuli: Vec<Stimulus> = keys
            .iter()
            .map(|k| Stimulus::Percept(Percept::new(k, true)))
            .collect();
        for s in &stimuli {
            let one = std::slice::from_ref(s);
            prop_assert_eq!(
                step_reactive(&mut reactive, one, 0).unwrap(),
                step_routine(&mut routine, one, 0).unwrap()
            );
        }
        prop_assert_eq!(
            step_reactive(&mut reactive, &stimuli, 1).unwrap(),
            step_routine(&mut routine, &stimuli, 1).unwrap()
        );
    }

    #[test]
    fn acts_are_conserved(functions in 2usize..7, value in 0.0f64..=1.0, rounds in 0u64..12) {
        let mut w = build_configuration(&ConfigurationConfig::single(functions, value)).unwrap();
        w.run(rounds).unwrap();
        let c = w.counters();
        prop_assert_eq!(c.sent, c.delivered + w.in_flight().len() as u64);
        let mut last = 0;
        for r in w.trace().iter() {
            prop_assert!(r.round() >= last);
            last = r.round();
        }
    }

    #[test]
    fn configuration_settles_in_time(functions in 1usize..9, value in 0.0f64..=1.0) {
        let mut w = build_configuration(&ConfigurationConfig::single(functions, value)).unwrap();
        w.run(2 * functions as u64 + 4).unwrap();
        prop_assert_eq!(w.tracker().open_count(), 0);
        prop_assert!(w.in_flight().is_empty());
    }

    #[test]
    fn epidemic_runs_are_reproducible(seed in any::<u64>()) {
        let cfg = grid_config(6, 6, &[((0, 0), "flu"), ((5, 5), "flu")], &[(2, 2), (3, 3), (4, 1)], 0.6, seed).unwrap();
        let a = build_epidemic(&cfg).unwrap().run(30).unwrap().to_jsonl();
        let b = build_epidemic(&cfg).unwrap().run(30).unwrap().to_jsonl();
        prop_assert_eq!(a, b);
    }
}

fn act(p: Performative, from: &AgentId, to: &AgentId, conv: &ConversationId) -> CommunicationAct {
    let payload = match p {
        Performative::Inform | Performative::Diffuse | Performative::Propose => {
            Payload::value(0.5).unwrap()
        }
        _ => Payload::TaskRef("t".into()),
    };
    make_act(
        p,
        from.clone(),
        to.clone(),
        MessageType::new(1),
        payload,
        conv.clone(),
    )
    .unwrap()
}

fn statuses(acts: &[CommunicationAct]) -> BTreeSet<(String, bool)> {
    let mut t = ConversationTracker::default();
    for a in acts {
        t.record_act(a, 0).unwrap();
    }
    t.obligations()
        .iter()
        .map(|o| {
            (
                format!("{}", o.act),
                matches!(o.status, Status::Satisfied { .. }),
            )
        })
        .collect()
}
