//! Std companion to `mlagent-core`: config files, trace files, summaries
//! and the `mlagent` command line.

pub mod config;
pub mod stats;
pub mod trace_io;

use std::fmt::Write;
use std::path::{Path, PathBuf};

use mlagent_core::protocol::ProtocolEvent;
use mlagent_core::runtime::trace_digest;
use mlagent_core::scenarios::ScenarioError;
use mlagent_core::TraceRecord;

pub use config::{ConfigError, ScenarioFile};
pub use stats::Stats;
pub use trace_io::{parse_trace, read_trace, write_trace, TraceError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NONCONFORMANT: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// What a command printed and the process exit code.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CmdOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CmdOutput {
    fn fail(code: i32, stderr: impl Into<String>) -> Self {
        CmdOutput {
            code,
            stdout: String::new(),
            stderr: stderr.into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunArgs {
    pub scenario: Option<String>,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub steps: Option<u64>,
    pub out: Option<PathBuf>,
    pub conformance: bool,
    pub weights_report: Option<PathBuf>,
    /// `key=value` overrides applied to the config before it is read.
    pub params: Vec<String>,
}

pub(crate) fn strip_location(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

fn scenario_error_lines(e: &ScenarioError) -> String {
    match e {
        ScenarioError::System(inv) => {
            let mut s = String::new();
            for d in &inv.0 {
                writeln!(s, "error: {d}").unwrap();
            }
            s
        }
        other => format!("error: {other}\n"),
    }
}

/// Loads and builds a scenario, printing every diagnostic.
pub fn cmd_validate(scenario: Option<&str>, config: Option<&Path>, params: &[String]) -> CmdOutput {
    let file = match ScenarioFile::resolve(scenario, config, params) {
        Ok(f) => f,
        Err(e) => return CmdOutput::fail(EXIT_INVALID, format!("error: {e}\n")),
    };
    match file.spec.build() {
        Ok(world) => CmdOutput {
            code: EXIT_OK,
            stdout: format!(
                "ok: {} scenario, {} agents, {} communities\n",
                file.spec.name(),
                world.agents().len(),
                world.system().organizations().len()
            ),
            stderr: String::new(),
        },
        Err(e) => CmdOutput::fail(EXIT_INVALID, scenario_error_lines(&e)),
    }
}

/// One-line description of a flagged protocol event.
pub fn describe(event: &ProtocolEvent) -> String {
    match event {
        ProtocolEvent::Opened {
            conversation,
            initiator,
            responder,
            performative,
        } => format!("opened {performative} {initiator}->{responder} in {conversation}"),
        ProtocolEvent::Satisfied {
            conversation,
            initiator,
            responder,
            performative,
            response,
        } => format!(
            "satisfied {performative} {initiator}->{responder} by {response} in {conversation}"
        ),
        ProtocolEvent::Violation {
            conversation,
            initiator,
            responder,
            performative,
            response,
        } => format!(
            "violation: {responder} answered {performative} from {initiator} with {response} in {conversation}"
        ),
        ProtocolEvent::Overdue {
            conversation,
            initiator,
            responder,
            performative,
            opened,
        } => format!(
            "overdue: {performative} {initiator}->{responder} in {conversation}, opened round {opened}"
        ),
        ProtocolEvent::BarrierError {
            conversation,
            responder,
            error,
        } => format!("barrier error from {responder} in {conversation}: {error}"),
        ProtocolEvent::Rejected {
            sender,
            receiver,
            performative,
        } => format!("rejected: {performative} {sender}->{receiver} is not an allowed interaction"),
    }
}

/// Builds and runs a scenario, writes the trace and prints its digest.
pub fn cmd_run(args: &RunArgs) -> CmdOutput {
    let mut file = match ScenarioFile::resolve(
        args.scenario.as_deref(),
        args.config.as_deref(),
        &args.params,
    ) {
        Ok(f) => f,
        Err(e) => return CmdOutput::fail(EXIT_INVALID, format!("error: {e}\n")),
    };
    if let Some(seed) = args.seed {
        file.spec.set_seed(seed);
    }
    let steps = args.steps.unwrap_or_else(|| file.default_steps());
    let mut world = match file.spec.build() {
        Ok(w) => w,
        Err(e) => return CmdOutput::fail(EXIT_INVALID, scenario_error_lines(&e)),
    };

    let mut out = CmdOutput::default();
    let run_error = world.run(steps).err();
    let digest = trace_digest(world.trace());
    if let Some(path) = &args.out {
        if let Err(e) = write_trace(path, world.trace()) {
            return CmdOutput::fail(EXIT_RUNTIME, format!("error: {e}\n"));
        }
    }
    if let Some(path) = &args.weights_report {
        let report = serde_json::to_string_pretty(world.affinity()).expect("networks serialize");
        if let Err(e) = std::fs::write(path, report + "\n") {
            let msg = format!("error: cannot write {}: {e}\n", path.display());
            return CmdOutput::fail(EXIT_RUNTIME, msg);
        }
    }

    let stats = Stats::from_records(world.trace().iter());
    let s = &mut out.stdout;
    writeln!(s, "scenario: {}", file.spec.name()).unwrap();
    writeln!(s, "seed: {}", world.seed()).unwrap();
    writeln!(s, "rounds: {}", world.round()).unwrap();
    writeln!(
        s,
        "delivered: {} macro, {} micro",
        stats.macro_total, stats.micro_total
    )
    .unwrap();
    writeln!(s, "infections: {}", stats.infections).unwrap();
    writeln!(s, "open obligations: {}", world.tracker().open_count()).unwrap();
    writeln!(s, "flagged: {}", stats.flagged()).unwrap();
    writeln!(s, "digest: {digest}").unwrap();

    if let Some(e) = run_error {
        writeln!(out.stderr, "runtime error: {e}").unwrap();
        out.code = EXIT_RUNTIME;
        return out;
    }
    if args.conformance {
        let mut problems = 0usize;
        for r in world.trace().flagged() {
            if let TraceRecord::Protocol { round, event, .. } = r {
                writeln!(out.stderr, "round {round}: {}", describe(event)).unwrap();
                problems += 1;
            }
        }
        let pending: Vec<_> = world
            .tracker()
            .pending_obligations(world.round(), world.timeout())
            .into_iter()
            .filter(|o| !o.flagged)
            .collect();
        for o in &pending {
            let a = &o.act;
            writeln!(
                out.stderr,
                "pending: {} {}->{} in {}, opened round {}",
                a.performative, a.sender, a.receiver, a.conversation, o.opened
            )
            .unwrap();
        }
        problems += pending.len();
        if problems > 0 {
            writeln!(out.stderr, "nonconformant: {problems} problem(s)").unwrap();
            out.code = EXIT_NONCONFORMANT;
        }
    }
    out
}

/// Summarizes a trace file.
pub fn cmd_stats(path: &Path) -> CmdOutput {
    match read_trace(path) {
        Ok(records) => CmdOutput {
            code: EXIT_OK,
            stdout: Stats::from_records(&records).to_string(),
            stderr: String::new(),
        },
        Err(e) => CmdOutput::fail(EXIT_INVALID, format!("error: {e}\n")),
    }
}
