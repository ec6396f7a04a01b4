//! `defimc` command line. Exit codes: 0 all valid, 1 some property
//! violated, 2 inconclusive or error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::report::{stats_line, verdict_text, TraceFile, VerdictReport};
use super::{build_model, load_scenario, read_file, HarnessError, Model, ScenarioConfig};
use crate::checker::{self, Direction, ExploreConfig, Status, Verdict};

pub const EXIT_VALID: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_OTHER: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "defimc", version, about = "Model checker for composed lending and exchange protocols")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
struct Common {
    /// Worker threads used to expand each frontier.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    workers: u16,
    /// Give up (inconclusive) after this many distinct states.
    #[arg(long)]
    state_budget: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Shuffles work handed to parallel workers; never changes verdicts.
    #[arg(long)]
    seed: Option<u64>,
    /// Keep state hashes only. Unsound if two states collide.
    #[arg(long)]
    bitstate: bool,
    /// Redeem adds the redeemed tokens to the cToken supply.
    #[arg(long)]
    paper_literal_redeem: bool,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Check properties declared in a scenario.
    Verify {
        scenario: PathBuf,
        /// Property to check (repeatable). Defaults to all of them.
        #[arg(long = "property", conflicts_with = "all")]
        properties: Vec<String>,
        #[arg(long)]
        all: bool,
        /// Write one replayable trace file per violated property here.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Extreme value of an expression over all reachable states.
    Extremum {
        scenario: PathBuf,
        #[arg(long)]
        expr: String,
        #[arg(long, conflicts_with = "min", required_unless_present = "min")]
        max: bool,
        #[arg(long)]
        min: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Re-execute a saved witness and re-check its property.
    Replay {
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Full state-space statistics per property.
    Stats {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Print the built-in scenario.
    DefaultScenario,
}

impl Common {
    fn explore_config(&self, scenario: &ScenarioConfig) -> ExploreConfig {
        ExploreConfig {
            workers: self.workers as usize,
            state_budget: self.state_budget.or(scenario.params.state_budget),
            bitstate: self.bitstate,
            seed: self.seed,
            early_stop: true,
        }
    }

    fn model(&self, path: &Path) -> Result<Model, HarnessError> {
        let mut cfg = load_scenario(path)?;
        if self.paper_literal_redeem {
            cfg.params.literal_redeem = true;
        }
        build_model(&cfg)
    }
}

fn exit_code(verdicts: &[Verdict]) -> i32 {
    if verdicts.iter().any(Verdict::is_invalid) {
        EXIT_INVALID
    } else if verdicts.iter().any(|v| matches!(v.status, Status::Inconclusive { .. })) {
        EXIT_OTHER
    } else {
        EXIT_VALID
    }
}

fn emit(out: &mut dyn Write, format: Format, model: Option<&Model>, verdicts: &[Verdict]) -> std::io::Result<()> {
    let formula = |v: &Verdict| model.and_then(|m| m.config.property(&v.property));
    match format {
        Format::Json => {
            let reports: Vec<_> = verdicts.iter().map(|v| VerdictReport::new(v, formula(v))).collect();
            writeln!(out, "{}", serde_json::to_string_pretty(&reports).expect("serializable report"))
        }
        Format::Text => verdicts.iter().try_for_each(|v| write!(out, "{}", verdict_text(v))),
    }
}

fn write_trace(dir: &Path, model: &Model, v: &Verdict) -> Result<PathBuf, HarnessError> {
    let io = |source| HarnessError::Io {
        path: dir.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let file = TraceFile {
        scenario: model.config.to_text(),
        property: v.property.clone(),
        formula: model.config.property(&v.property).unwrap_or_default().to_string(),
        trace: v.trace().expect("violation carries a trace").clone(),
    };
    let path = dir.join(format!("{}.trace.json", v.property));
    std::fs::write(&path, serde_json::to_string_pretty(&file)?).map_err(io)?;
    Ok(path)
}

fn run(cmd: Cmd, out: &mut dyn Write) -> Result<i32, HarnessError> {
    let io = |source| HarnessError::Io {
        path: "<output>".into(),
        source,
    };
    match cmd {
        Cmd::Verify {
            scenario,
            properties,
            all: _,
            trace_dir,
            common,
        } => {
            let model = common.model(&scenario)?;
            let props = if properties.is_empty() {
                model.properties()?
            } else {
                properties.iter().map(|n| model.property(n)).collect::<Result<_, _>>()?
            };
            let config = common.explore_config(&model.config);
            let verdicts = checker::explore(&model.system, &props, &config)?;
            emit(out, common.format, Some(&model), &verdicts).map_err(io)?;
            if let Some(dir) = trace_dir {
                for v in verdicts.iter().filter(|v| v.is_invalid()) {
                    let path = write_trace(&dir, &model, v)?;
                    if common.format == Format::Text {
                        writeln!(out, "trace written to {}", path.display()).map_err(io)?;
                    }
                }
            }
            Ok(exit_code(&verdicts))
        }
        Cmd::Extremum {
            scenario,
            expr,
            max,
            min: _,
            common,
        } => {
            let model = common.model(&scenario)?;
            let e = model.scope().parse_expr(&expr)?;
            let direction = if max { Direction::Max } else { Direction::Min };
            let config = common.explore_config(&model.config);
            let mut v = checker::reach_extremum(&model.system, e, direction, &config)?;
            v.property = format!("{} {expr}", if max { "max" } else { "min" });
            emit(out, common.format, None, std::slice::from_ref(&v)).map_err(io)?;
            Ok(match v.status {
                Status::Extremum { .. } => EXIT_VALID,
                _ => EXIT_OTHER,
            })
        }
        Cmd::Replay { trace, format } => {
            let file: TraceFile = serde_json::from_str(&read_file(&trace)?)?;
            let model = build_model(&ScenarioConfig::parse(&file.scenario)?)?;
            let prop = model.parse_property(&file.property, &file.formula)?;
            let violated = checker::violates(&model.system, &prop.spec, &file.trace)?;
            match format {
                Format::Json => writeln!(
                    out,
                    "{}",
                    serde_json::json!({
                        "property": file.property,
                        "steps": file.trace.len(),
                        "reproduced": violated,
                        "status": if violated { "Invalid" } else { "Valid" },
                    })
                ),
                Format::Text => writeln!(
                    out,
                    "{}: {} steps replayed, violation {}",
                    file.property,
                    file.trace.len(),
                    if violated { "reproduced" } else { "NOT reproduced" }
                ),
            }
            .map_err(io)?;
            Ok(if violated { EXIT_INVALID } else { EXIT_VALID })
        }
        Cmd::Stats { scenario, common } => {
            let model = common.model(&scenario)?;
            let config = ExploreConfig {
                early_stop: false,
                ..common.explore_config(&model.config)
            };
            let total = checker::state_space(&model.system, &config)?;
            let verdicts = checker::explore(&model.system, &model.properties()?, &config)?;
            match common.format {
                Format::Json => {
                    let reports: Vec<_> = verdicts
                        .iter()
                        .map(|v| VerdictReport {
                            trace: None,
                            ..VerdictReport::new(v, model.config.property(&v.property))
                        })
                        .collect();
                    let doc = serde_json::json!({ "stateSpace": total, "properties": reports });
                    writeln!(out, "{}", serde_json::to_string_pretty(&doc)?).map_err(io)?;
                }
                Format::Text => {
                    writeln!(out, "{:<24} {}", "state space", stats_line(&total)).map_err(io)?;
                    for v in &verdicts {
                        writeln!(out, "{:<24} {:<12} {}", v.property, v.status.name(), stats_line(&v.stats))
                            .map_err(io)?;
                    }
                }
            }
            Ok(exit_code(&verdicts))
        }
        Cmd::DefaultScenario => {
            write!(out, "{}", super::default_scenario().to_text()).map_err(io)?;
            Ok(EXIT_VALID)
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_OTHER } else { EXIT_VALID };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match run(cli.cmd, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_OTHER
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_cli(std::iter::once("defimc").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn default_scenario_prints_and_parses() {
        let (code, out, _) = cli(&["default-scenario"]);
        assert_eq!(code, 0);
        assert_eq!(ScenarioConfig::parse(&out).unwrap(), super::super::default_scenario());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(cli(&["verify"]).0, EXIT_OTHER);
        assert_eq!(cli(&["frobnicate"]).0, EXIT_OTHER);
        assert_eq!(cli(&["extremum", "x.scn", "--expr", "1", "--max", "--min"]).0, EXIT_OTHER);
        assert_eq!(cli(&["verify", "x.scn", "--workers", "0"]).0, EXIT_OTHER);
        assert_eq!(cli(&["--help"]).0, EXIT_VALID);
    }

    #[test]
    fn missing_files_exit_two() {
        let (code, _, err) = cli(&["verify", "/nonexistent/file.scn"]);
        assert_eq!(code, EXIT_OTHER);
        assert!(err.contains("/nonexistent/file.scn"), "{err}");
        assert_eq!(cli(&["replay", "/nonexistent/t.json"]).0, EXIT_OTHER);
    }
}
