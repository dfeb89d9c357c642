//! Command-line front end: parse a model, run the bounded analysis,
//! report a verdict and optionally export the state space.

pub mod export;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{error::ErrorKind, Parser, ValueEnum};
use hrebeca_core::frontend::{parse, parse_predicate};
use hrebeca_core::ha::{check_containment, reach_ha, translate};
use hrebeca_core::reach::{analyze, check_unsafe, AnalysisConfig, ReachError, ReachResult};
use hrebeca_core::semantics::{Program, DEFAULT_NTP_BUDGET};
use serde::{Deserialize, Serialize};

use export::{ConfigDoc, Document};

pub const EXIT_SAFE: i32 = 0;
pub const EXIT_UNSAFE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ANALYSIS: i32 = 3;

/// Jump bound for the automaton comparison. Every urgent statement costs
/// a jump there, so it is much larger than the analysis bound.
pub const HA_JUMP_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Dot,
    Json,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SeedOrder {
    /// Single-threaded, deterministic traversal.
    Strict,
}

/// Bounded reachability analysis for Hybrid Rebeca models.
#[derive(Debug, Parser)]
#[command(name = "hrebeca", version)]
pub struct Cli {
    /// Model file (.hrebeca).
    #[arg(long)]
    pub model: PathBuf,
    /// Time horizon in seconds.
    #[arg(long)]
    pub time_horizon: f64,
    /// Maximum number of time-progress steps along a path.
    #[arg(long)]
    pub jump_depth: usize,
    /// Flowpipe step size.
    #[arg(long, default_value_t = 0.5)]
    pub step_size: f64,
    /// Predicate over `rebec.var` names describing unsafe states.
    #[arg(long = "unsafe")]
    pub unsafe_pred: Option<String>,
    #[arg(long, value_enum, default_value_t = Emit::None)]
    pub emit: Emit,
    /// Write the export here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also translate to a hybrid automaton and check containment.
    #[arg(long)]
    pub compare_ha: bool,
    #[arg(long, value_enum)]
    pub seed_order: Option<SeedOrder>,
    /// Rule applications allowed while closing a state under
    /// non-time-progress steps.
    #[arg(long, default_value_t = DEFAULT_NTP_BUDGET)]
    pub ntp_budget: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Verdict {
    SafeWithinBounds,
    PotentiallyUnsafe { witness: usize },
    NoPredicate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ContainmentSummary {
    pub checked: usize,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub state_count: usize,
    pub edge_count: usize,
    /// Seconds.
    pub wall_time: f64,
    pub verdict: Verdict,
    pub exhausted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub containment: Option<ContainmentSummary>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Verdict::PotentiallyUnsafe { .. } => EXIT_UNSAFE,
            Verdict::SafeWithinBounds | Verdict::NoPredicate => EXIT_SAFE,
        }
    }
}

enum Failure {
    Usage(String),
    Analysis(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Analysis(_) => EXIT_ANALYSIS,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Analysis(m) => m,
        }
    }
}

impl From<ReachError> for Failure {
    fn from(e: ReachError) -> Self {
        match e {
            ReachError::Config(c) => Failure::Usage(c.to_string()),
            ReachError::Unsafe(u) => Failure::Usage(format!("unsafe predicate: {u}")),
            other => Failure::Analysis(other.to_string()),
        }
    }
}

/// Runs the analysis described by `cli` and returns its report together
/// with the explored state space.
fn execute(cli: &Cli) -> Result<(RunReport, ReachResult), Failure> {
    let src = std::fs::read_to_string(&cli.model)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", cli.model.display())))?;
    let model = parse(&src).map_err(|e| {
        let mut msg = format!("{}: {e}", cli.model.display());
        for d in e.diagnostics() {
            msg.push_str(&format!("\n  {d}"));
        }
        Failure::Usage(msg)
    })?;
    let program = Program::new(model)
        .map_err(|e| Failure::Usage(format!("{}: {e}", cli.model.display())))?
        .with_ntp_budget(cli.ntp_budget);
    let pred = cli
        .unsafe_pred
        .as_deref()
        .map(parse_predicate)
        .transpose()
        .map_err(|e| Failure::Usage(format!("unsafe predicate: {e}")))?;

    let mut cfg = AnalysisConfig::new(cli.time_horizon, cli.jump_depth, cli.step_size);
    cfg.ntp_budget = cli.ntp_budget;
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(p) = &pred {
        // Reject unknown names before spending time on the analysis.
        let init = program.make_initial_state().map_err(|e| Failure::Analysis(e.to_string()))?;
        check_unsafe(&[init], p).map_err(|e| Failure::Usage(format!("unsafe predicate: {e}")))?;
    }
    cfg.unsafe_pred = pred;

    let start = Instant::now();
    let result = analyze(&program, &cfg)?;
    let containment = if cli.compare_ha {
        let mut ha = translate(&program).map_err(|e| Failure::Analysis(e.to_string()))?;
        let reach = reach_ha(&mut ha, cli.time_horizon, HA_JUMP_DEPTH, cli.step_size)
            .map_err(|e| Failure::Analysis(e.to_string()))?;
        let report = check_containment(&ha, &reach, &result.states);
        Some(ContainmentSummary {
            checked: report.checked,
            violations: report
                .violations
                .iter()
                .map(|v| match (&v.rebec, &v.var, &v.tts, &v.ha) {
                    (Some(x), Some(var), Some(t), Some(h)) => {
                        format!("s{}: {x}.{var} = {t} not within {h}", v.state)
                    }
                    _ => format!("s{}: {}", v.state, v.reason),
                })
                .collect(),
        })
    } else {
        None
    };
    let verdict = match (&cfg.unsafe_pred, result.unsafe_witness) {
        (None, _) => Verdict::NoPredicate,
        (Some(_), Some(witness)) => Verdict::PotentiallyUnsafe { witness },
        (Some(_), None) => Verdict::SafeWithinBounds,
    };
    let report = RunReport {
        state_count: result.states.len(),
        edge_count: result.edges.len(),
        wall_time: start.elapsed().as_secs_f64(),
        verdict,
        exhausted: result.exhausted,
        containment,
    };
    Ok((report, result))
}

fn summary(report: &RunReport) -> String {
    let verdict = match &report.verdict {
        Verdict::SafeWithinBounds => "safe within bounds".to_string(),
        Verdict::PotentiallyUnsafe { witness } => format!("potentially unsafe (witness s{witness})"),
        Verdict::NoPredicate => "no predicate".to_string(),
    };
    let mut s = format!(
        "{} states, {} edges, {:.3}s, {verdict}{}",
        report.state_count,
        report.edge_count,
        report.wall_time,
        if report.exhausted { "" } else { ", jump bound reached" }
    );
    if let Some(c) = &report.containment {
        s.push_str(&format!("\ncontainment: {} states checked, {} violations", c.checked, c.violations.len()));
        for v in &c.violations {
            s.push_str(&format!("\n  {v}"));
        }
    }
    s
}

/// Entry point shared by the binary and the tests. Writes the export (or
/// the JSON report when nothing is exported) to `out` and diagnostics to
/// `err`; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_SAFE
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let (report, result) = match execute(&cli) {
        Ok(r) => r,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            return f.code();
        }
    };
    let export = match cli.emit {
        Emit::None => None,
        Emit::Dot => Some(export::to_dot(&result)),
        Emit::Json => {
            let config = ConfigDoc {
                model: cli.model.display().to_string(),
                time_horizon: cli.time_horizon,
                jump_depth: cli.jump_depth,
                step_size: cli.step_size,
                unsafe_predicate: cli.unsafe_pred.clone(),
            };
            let doc = Document::new(config, &result, report.clone());
            Some(serde_json::to_string_pretty(&doc).expect("document serializes") + "\n")
        }
    };
    let report_json = serde_json::to_string_pretty(&report).expect("report serializes");
    let written = match (export, &cli.out) {
        (Some(text), Some(path)) => std::fs::write(path, text)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))
            .and_then(|()| writeln!(out, "{report_json}").map_err(|e| e.to_string())),
        (Some(text), None) => write!(out, "{text}").map_err(|e| e.to_string()),
        (None, _) => writeln!(out, "{report_json}").map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: {e}");
        return EXIT_USAGE;
    }
    let _ = writeln!(err, "{}", summary(&report));
    report.exit_code()
}
