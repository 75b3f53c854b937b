//! Trace summaries.

use std::collections::BTreeMap;
use std::fmt::{self, Write};

use mlagent_core::protocol::ProtocolEvent;
use mlagent_core::runtime::{Scope, CONTAMINATED};
use mlagent_core::{Performative, TraceRecord};

/// Delivered acts in one round, by performative.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoundCounts {
    pub macro_acts: BTreeMap<Performative, u64>,
    pub micro_acts: BTreeMap<Performative, u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub rounds: u64,
    pub per_round: BTreeMap<u64, RoundCounts>,
    pub macro_total: u64,
    pub micro_total: u64,
    pub infections: u64,
    pub knowledge_writes: u64,
    pub obligations_opened: u64,
    pub obligations_satisfied: u64,
    pub violations: u64,
    pub overdue: u64,
    pub rejected: u64,
    pub barrier_errors: u64,
}

impl Stats {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a TraceRecord>) -> Self {
        let mut s = Stats::default();
        for r in records {
            match r {
                TraceRecord::Round { .. } => s.rounds += 1,
                TraceRecord::Delivered { round, scope, act } => {
                    let counts = s.per_round.entry(*round).or_default();
                    let (bucket, total) = match scope {
                        Scope::Macro => (&mut counts.macro_acts, &mut s.macro_total),
                        Scope::Micro => (&mut counts.micro_acts, &mut s.micro_total),
                    };
                    *bucket.entry(act.performative).or_default() += 1;
                    *total += 1;
                }
                TraceRecord::KnowledgeWrite { .. } => s.knowledge_writes += 1,
                TraceRecord::EnvChange { key, .. } if key == CONTAMINATED => s.infections += 1,
                TraceRecord::EnvChange { .. } => {}
                TraceRecord::Protocol { event, .. } => match event {
                    ProtocolEvent::Opened { .. } => s.obligations_opened += 1,
                    ProtocolEvent::Satisfied { .. } => s.obligations_satisfied += 1,
                    ProtocolEvent::Violation { .. } => s.violations += 1,
                    ProtocolEvent::Overdue { .. } => s.overdue += 1,
                    ProtocolEvent::Rejected { .. } => s.rejected += 1,
                    ProtocolEvent::BarrierError { .. } => s.barrier_errors += 1,
                },
            }
        }
        s
    }

    pub fn flagged(&self) -> u64 {
        self.violations + self.overdue + self.rejected + self.barrier_errors
    }
}

fn counts(f: &mut fmt::Formatter<'_>, label: &str, m: &BTreeMap<Performative, u64>) -> fmt::Result {
    if m.is_empty() {
        return Ok(());
    }
    let mut line = String::new();
    for (p, n) in m {
        write!(line, " {p}={n}")?;
    }
    write!(f, "  {label}{line}")
}

impl fmt::Display for Stats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rounds: {}", self.rounds)?;
        writeln!(
            f,
            "delivered: {} (macro {}, micro {})",
            self.macro_total + self.micro_total,
            self.macro_total,
            self.micro_total
        )?;
        writeln!(f, "infections: {}", self.infections)?;
        writeln!(f, "knowledge writes: {}", self.knowledge_writes)?;
        writeln!(
            f,
            "obligations: opened {}, satisfied {}",
            self.obligations_opened, self.obligations_satisfied
        )?;
        writeln!(
            f,
            "flagged: {} (violations {}, overdue {}, rejected {}, barrier errors {})",
            self.flagged(),
            self.violations,
            self.overdue,
            self.rejected,
            self.barrier_errors
        )?;
        if self.per_round.is_empty() {
            return Ok(());
        }
        writeln!(f, "per round:")?;
        for (round, c) in &self.per_round {
            write!(f, "  {round:>4}")?;
            counts(f, "macro", &c.macro_acts)?;
            counts(f, "micro", &c.micro_acts)?;
            writeln!(f)?;
        }
        Ok(())
    }
}
