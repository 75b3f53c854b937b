//! Acceptance criteria, one PASS/FAIL line each.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mlagent::{cmd_run, RunArgs, ScenarioFile, EXIT_NONCONFORMANT, EXIT_OK};
use mlagent_core::behaviour::{step_reactive, step_routine, AgentSpec, Reflex};
use mlagent_core::model::{
    ActionSpec, Community, Condition, DecisionRule, EventPattern, Expr, KnowledgeBase, MessageType,
    PayloadExpr, Performative, Recipient,
};
use mlagent_core::organization::{AffinityNetwork, Outcome};
use mlagent_core::rules::{Effect, Percept, Stimulus};
use mlagent_core::runtime::{trace_digest, Scope, SimRng};
use mlagent_core::scenarios::configuration::{build_configuration, ConfigurationConfig};
use mlagent_core::scenarios::epidemic::{
    build_epidemic, grid_config, Doctor, EpidemicConfig, ScriptedReport,
};
use mlagent_core::{AgentId, World};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn id(s: &str) -> AgentId {
    AgentId::new(s).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("{what} took {elapsed:?}, limit {limit:?}")
    })
}

fn delivered(w: &World, p: Performative) -> usize {
    w.trace()
        .delivered(Scope::Macro)
        .filter(|a| a.performative == p)
        .count()
}

fn threshold_sweep() -> Check {
    let start = Instant::now();
    let mut agree = 0;
    for i in 0..=20u32 {
        let v = i as f64 / 20.0;
        let mut w =
            build_configuration(&ConfigurationConfig::single(3, v)).map_err(|e| e.to_string())?;
        w.run(12).map_err(|e| e.to_string())?;
        let diffused = delivered(&w, Performative::Diffuse) > 0;
        let expected = i * 5 > 40;
        ensure(diffused == expected, || {
            format!("V={v}: diffused={diffused}")
        })?;
        agree += 1;
    }
    within(start.elapsed(), Duration::from_secs(1), "sweep")?;
    Ok(format!("{agree}/21 values, {:?}", start.elapsed()))
}

fn handshake_counts() -> Check {
    let mut seen = Vec::new();
    for f in [2usize, 3, 5, 8] {
        let mut w =
            build_configuration(&ConfigurationConfig::single(f, 0.6)).map_err(|e| e.to_string())?;
        w.run(4 * f as u64 + 8).map_err(|e| e.to_string())?;
        let inform = 1;
        let diffuse = f - 1;
        let acks = f - 1;
        let final_confirm = 1;
        let expected = inform + diffuse + acks + final_confirm;
        let got = w.trace().delivered(Scope::Macro).count();
        ensure(got == expected && got == 2 * f, || {
            format!("|F|={f}: {got} acts, expected {expected}")
        })?;
        seen.push(format!("{f}->{got}"));
    }
    Ok(seen.join(" "))
}

fn conformance() -> Check {
    let mut notes = Vec::new();
    for name in ["configuration", "mediation"] {
        let file = ScenarioFile::shipped(name, &[]).map_err(|e| e.to_string())?;
        let mut w = file.spec.build().map_err(|e| e.to_string())?;
        w.run(file.default_steps()).map_err(|e| e.to_string())?;
        let open = w.tracker().open_count();
        ensure(open == 0 && w.trace().flagged().count() == 0, || {
            format!("{name}: {open} open obligations")
        })?;
        let out = cmd_run(&RunArgs {
            scenario: Some(name.into()),
            conformance: true,
            ..RunArgs::default()
        });
        ensure(out.code == EXIT_OK, || format!("{name}: exit {}", out.code))?;
        notes.push(format!("{name} pending=0"));
    }
    let out = cmd_run(&RunArgs {
        scenario: Some("configuration".into()),
        conformance: true,
        steps: Some(20),
        params: vec![r#"silent=["f3"]"#.into()],
        ..RunArgs::default()
    });
    ensure(out.code == EXIT_NONCONFORMANT, || {
        format!("silent agent: exit {}", out.code)
    })?;
    ensure(out.stderr.contains("overdue"), || {
        "no overdue obligation listed".into()
    })?;
    notes.push(format!("silent f3 exit={}", out.code));
    Ok(notes.join(", "))
}

fn epidemic_reproducible() -> Check {
    let file = ScenarioFile::shipped("epidemic", &[]).map_err(|e| e.to_string())?;
    let mut digests = Vec::new();
    for _ in 0..2 {
        let start = Instant::now();
        let mut w = file.spec.build().map_err(|e| e.to_string())?;
        let grid = w.grid().ok_or("no grid")?;
        ensure((grid.width(), grid.height()) == (10, 10), || {
            "grid is not 10x10".into()
        })?;
        ensure(w.agents().len() == 10, || {
            format!("{} agents", w.agents().len())
        })?;
        w.run(1000).map_err(|e| e.to_string())?;
        within(start.elapsed(), Duration::from_secs(10), "epidemic run")?;
        digests.push(trace_digest(w.trace()));
    }
    ensure(digests[0] == digests[1], || "digests differ".into())?;
    Ok(format!("digest {}", &digests[0][..16]))
}

struct Xs(u64);

impl Xs {
    fn new(seed: u64) -> Self {
        Xs(if seed == 0 { 0x9E3779B97F4A7C15 } else { seed })
    }

    fn next(&mut self) -> u64 {
        self.0 ^= self.0 >> 12;
        self.0 ^= self.0 << 25;
        self.0 ^= self.0 >> 27;
        self.0.wrapping_mul(0x2545F4914F6CDD1D)
    }

    fn unit(&mut self) -> f64 {
        (self.next() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }
}

fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn fnv(s: &str) -> u64 {
    s.bytes().fold(0xcbf29ce484222325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100000001b3)
    })
}

fn stream(seed: u64, label: &str) -> Xs {
    Xs::new(mix(seed ^ fnv(label)))
}

/// Straight-line movement and infection model.
struct Oracle {
    w: i64,
    h: i64,
    p: f64,
    pos: BTreeMap<String, (i64, i64)>,
    carriers: BTreeSet<String>,
    healthy: BTreeSet<String>,
    moves: BTreeMap<String, Xs>,
    infection: Xs,
}

impl Oracle {
    fn new(cfg: &EpidemicConfig) -> Self {
        let mut pos = BTreeMap::new();
        for c in &cfg.contaminants {
            pos.insert(c.id.to_string(), (c.at.0 as i64, c.at.1 as i64));
        }
        for i in &cfg.individuals {
            pos.insert(i.id.to_string(), (i.at.0 as i64, i.at.1 as i64));
        }
        let moves = pos
            .keys()
            .map(|a| (a.clone(), stream(cfg.seed, &format!("move:{a}"))))
            .collect();
        Oracle {
            w: cfg.width as i64,
            h: cfg.height as i64,
            p: cfg.infection_probability,
            carriers: cfg.contaminants.iter().map(|c| c.id.to_string()).collect(),
            healthy: cfg.individuals.iter().map(|i| i.id.to_string()).collect(),
            pos,
            moves,
            infection: stream(cfg.seed, "infection"),
        }
    }

    fn round(&mut self) {
        let active: Vec<String> = self.carriers.iter().cloned().collect();
        for a in &active {
            let k = self.moves.get_mut(a).unwrap().next() % 9;
            let (x, y) = self.pos[a];
            let nx = (x + (k % 3) as i64 - 1).clamp(0, self.w - 1);
            let ny = (y + (k / 3) as i64 - 1).clamp(0, self.h - 1);
            self.pos.insert(a.clone(), (nx, ny));
        }
        let targets: Vec<String> = self.healthy.iter().cloned().collect();
        let mut hit = BTreeSet::new();
        for s in &active {
            for t in &targets {
                let (a, b) = (self.pos[s], self.pos[t]);
                let near = (a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1;
                if near && self.infection.unit() < self.p {
                    hit.insert(t.clone());
                }
            }
        }
        for t in hit {
            self.healthy.remove(&t);
            self.carriers.insert(t);
        }
    }

    fn infected(&self) -> BTreeSet<String> {
        self.carriers
            .iter()
            .filter(|a| a.starts_with('i'))
            .cloned()
            .collect()
    }
}

fn random_config(seed: u64) -> EpidemicConfig {
    let mut g = Xs::new(seed.wrapping_mul(0x9E37) + 1);
    let mut cell = || ((g.next() % 5) as u32, (g.next() % 5) as u32);
    let cells: Vec<_> = (0..4).map(|_| cell()).collect();
    let n = 1 + (seed % 2) as usize;
    let contaminants: Vec<_> = cells[..n].iter().map(|c| (*c, "flu")).collect();
    let p = [0.3, 0.5, 0.7, 0.9][(seed % 4) as usize];
    grid_config(5, 5, &contaminants, &cells[n..], p, seed).unwrap()
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut matched = 0;
    let mut with_infections = 0;
    for seed in 0..100 {
        let cfg = random_config(seed);
        let mut world = build_epidemic(&cfg).map_err(|e| e.to_string())?;
        ensure(world.agents().len() <= 6, || {
            format!("seed {seed}: too many agents")
        })?;
        let mut oracle = Oracle::new(&cfg);
        for round in 0..20 {
            world.schedule_round().map_err(|e| e.to_string())?;
            oracle.round();
            let got: BTreeSet<String> = world
                .grid()
                .unwrap()
                .infected()
                .iter()
                .map(|a| a.to_string())
                .collect();
            ensure(got == oracle.infected(), || {
                format!("seed {seed}, round {round}")
            })?;
        }
        if !oracle.infected().is_empty() {
            with_infections += 1;
        }
        matched += 1;
    }
    within(start.elapsed(), Duration::from_secs(30), "oracle runs")?;
    Ok(format!(
        "{matched}/100 seeds ({with_infections} with infections)"
    ))
}

fn reactive_routine_equivalence() -> Check {
    let keys: Vec<String> = (0..16).map(|k| format!("k{k}")).collect();
    let stimuli: Vec<Stimulus> = keys
        .iter()
        .map(|k| Stimulus::Percept(Percept::new(k, true)))
        .collect();
    let mut rng = SimRng::new(99);
    let mut compared = 0;
    for _ in 0..200 {
        let mut reflexes = Vec::new();
        let mut kb = KnowledgeBase::default();
        for key in &keys {
            if rng.below(3) == 0 {
                continue;
            }
            let action = ActionSpec::Send {
                performative: Performative::Inform,
                to: Recipient::Agent(id(&format!("b{}", rng.below(3)))),
                mtype: MessageType::new(1),
                payload: PayloadExpr::Value(Expr::lit(rng.below(11) as f64 / 10.0)),
            };
            let pattern = EventPattern::percept(key);
            kb = kb.rule(DecisionRule::new(
                &format!("r{:02}", reflexes.len()),
                pattern.clone(),
                Condition::True,
                vec![action.clone()],
            ));
            reflexes.push(Reflex {
                pattern,
                actions: vec![action],
            });
        }
        let mut reactive = AgentSpec::reactive(id("a"), reflexes);
        let mut routine = AgentSpec::routine(id("a"), kb);
        for s in &stimuli {
            let one = std::slice::from_ref(s);
            let a: Vec<Effect> = step_reactive(&mut reactive, one, 0).map_err(|e| e.to_string())?;
            let b: Vec<Effect> = step_routine(&mut routine, one, 0).map_err(|e| e.to_string())?;
            ensure(a == b, || format!("mapping differs on {s:?}"))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} stimulus steps over 200 mappings"))
}

fn alert_rounds(reports: &[u64]) -> Result<Vec<u64>, String> {
    let mut cfg = EpidemicConfig::new(
        4,
        4,
        vec![Doctor {
            id: id("d1"),
            region: "north".into(),
        }],
    );
    cfg.detection_threshold = 3;
    cfg.detection_window = 5;
    cfg.known_diseases = vec!["flu".into()];
    cfg.scripted_reports = reports
        .iter()
        .map(|&round| ScriptedReport {
            round,
            doctor: id("d1"),
            disease: "flu".into(),
        })
        .collect();
    let mut w = build_epidemic(&cfg).map_err(|e| e.to_string())?;
    w.run(20).map_err(|e| e.to_string())?;
    Ok(w.log(&id("authority"))
        .ok_or("no authority log")?
        .entries()
        .iter()
        .filter(|(_, e)| matches!(e, Effect::OutboundDiffusion { .. }))
        .map(|(r, _)| *r)
        .collect())
}

fn detection_window() -> Check {
    let a = alert_rounds(&[1, 2, 4])?;
    ensure(a == [4], || format!("reports 1,2,4 alerted at {a:?}"))?;
    let b = alert_rounds(&[1, 2, 9])?;
    ensure(b.is_empty(), || format!("reports 1,2,9 alerted at {b:?}"))?;
    Ok("{1,2,4} alert at 4, {1,2,9} silent".into())
}

fn affinity_invariants() -> Check {
    let ids: Vec<AgentId> = (0..6).map(|i| id(&format!("a{i}"))).collect();
    let mut rng = SimRng::new(2024);
    let mut net = AffinityNetwork::new(0.1, 0.05, 0.05).map_err(|e| e.to_string())?;
    let mut ops = 0;
    while ops < 10_000 {
        let (a, b) = (rng.below(6) as usize, rng.below(6) as usize);
        if a == b {
            continue;
        }
        let outcome = if rng.below(2) == 0 {
            Outcome::Success
        } else {
            Outcome::Failure
        };
        let w = net
            .reinforce(&ids[a], &ids[b], outcome)
            .map_err(|e| e.to_string())?;
        ensure((0.0..=1.0).contains(&w), || {
            format!("weight {w} after {ops} ops")
        })?;
        ops += 1;
    }
    ensure(
        net.entries()
            .iter()
            .all(|e| (0.0..=1.0).contains(&e.weight)),
        || "stored weight out of range".into(),
    )?;

    let community = Community::new("F", ids.iter().cloned());
    for trial in 0..50 {
        let mut net = AffinityNetwork::default();
        for m in &ids[1..] {
            net.set_affinity(&ids[0], m, rng.next_f64())
                .map_err(|e| e.to_string())?;
        }
        let mut last = usize::MAX;
        for step in 0..100 {
            net.set_inhibition_threshold(step as f64 / 100.0)
                .map_err(|e| e.to_string())?;
            let n = net.recipients(&ids[0], &community).len();
            ensure(n <= last, || {
                format!("trial {trial}: count rose at threshold {step}/100")
            })?;
            last = n;
        }
    }
    Ok(format!("{ops} ops in range, 50 threshold sweeps monotone"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("threshold sweep diffuses iff V > 0.4", threshold_sweep),
        ("one inform yields 2|F| delivered acts", handshake_counts),
        (
            "protocol conformance and non-responder detection",
            conformance,
        ),
        (
            "epidemic 10x10, 1000 rounds, reproducible",
            epidemic_reproducible,
        ),
        ("epidemic matches independent oracle", oracle_equivalence),
        (
            "reactive and routine agents agree",
            reactive_routine_equivalence,
        ),
        ("detection window k=3, w=5", detection_window),
        (
            "affinity weights bounded, diffusion monotone",
            affinity_invariants,
        ),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let t = start.elapsed();
        match result {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({t:.2?})", n + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why} ({t:.2?})", n + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
