//! The `cpq` command line: `run` replicated experiments, `verify` the
//! acceptance suite, and print closed-form values with `theory`.
//!
//! Exit codes: 0 on success, 1 on invalid input or I/O failure, 2 when
//! `verify` finds a failing criterion.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analytic::AnalyticParams;
use crate::estimators::{fmt_num, BinGrid, InfinityMode, Metric, BIN_COUNT};
use crate::experiment::run_experiment;
use crate::measure_state::PriorityLevel;
use crate::simulator::SimConfig;
use crate::verify::{Level, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_ACCEPTANCE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Parser)]
#[command(name = "cpq", version, allow_negative_numbers = true, about = "Continuous-priority preemptive M/M/1 queue: simulation and steady-state theory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run replicated simulations and write estimate-vs-theory tables.
    Run(RunArgs),
    /// Run the verification suite and print one line per criterion.
    Verify {
        #[arg(long, value_enum, default_value_t = LevelArg::Quick)]
        level: LevelArg,
    },
    /// Evaluate closed-form results on a priority grid.
    Theory(TheoryArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LevelArg {
    Quick,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Include,
    Exclude,
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// JSON experiment file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Metric to emit (m, s or w); repeat for several.
    #[arg(long = "metric")]
    pub metrics: Vec<String>,
    /// Output path for the metric at the same position; stdout when absent.
    #[arg(long = "out")]
    pub outs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_enum)]
    pub infinity_mode: Option<ModeArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TheoryMetric {
    M,
    S,
    W,
    Pstar,
    #[value(name = "ccdf_mean")]
    CcdfMean,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[arg(long)]
    pub rho: f64,
    #[arg(long, value_enum)]
    pub metric: TheoryMetric,
    /// Priorities to evaluate (comma separated); defaults to the 20 bin midpoints.
    #[arg(long = "p", value_delimiter = ',')]
    pub grid: Vec<f64>,
}

/// One requested table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub metric: Metric,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

/// Full description of a replicated experiment, as read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub rho: f64,
    pub horizon: f64,
    pub seed: u64,
    pub replications: usize,
    /// Echo only; the grid is fixed at 20 bins.
    pub bins: usize,
    pub infinity_mode: InfinityMode,
    pub outputs: Vec<OutputSpec>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            rho: 0.75,
            horizon: 1e4,
            seed: 1,
            replications: 20,
            bins: BIN_COUNT,
            infinity_mode: InfinityMode::Exclude,
            outputs: Vec::new(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        let invalid = |m: String| Err(CliError::Invalid(m));
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return invalid(format!("rho must be positive and finite, got {}", self.rho));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return invalid(format!("horizon must be positive and finite, got {}", self.horizon));
        }
        if self.replications == 0 {
            return invalid("replications must be at least 1".into());
        }
        if self.bins != BIN_COUNT {
            return invalid(format!("bins is fixed at {BIN_COUNT}, got {}", self.bins));
        }
        Ok(())
    }

    /// Requested outputs, defaulting to all three metrics on stdout.
    pub fn effective_outputs(&self) -> Vec<OutputSpec> {
        if self.outputs.is_empty() {
            Metric::ALL
                .iter()
                .map(|&metric| OutputSpec {
                    metric,
                    path: None,
                    format: Format::Csv,
                })
                .collect()
        } else {
            self.outputs.clone()
        }
    }
}

/// Merges a config file (if any) with command-line flags.
pub fn resolve_spec(args: &RunArgs) -> Result<ExperimentSpec, CliError> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(rho) = args.rho {
        spec.rho = rho;
    }
    if let Some(h) = args.horizon {
        spec.horizon = h;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(n) = args.replications {
        spec.replications = n;
    }
    if let Some(mode) = args.infinity_mode {
        spec.infinity_mode = match mode {
            ModeArg::Include => InfinityMode::Include,
            ModeArg::Exclude => InfinityMode::Exclude,
        };
    }
    if !args.metrics.is_empty() {
        if !args.outs.is_empty() && args.outs.len() != args.metrics.len() {
            return Err(CliError::Invalid(format!(
                "{} --out paths for {} --metric flags",
                args.outs.len(),
                args.metrics.len()
            )));
        }
        let format = args.format.unwrap_or_default();
        spec.outputs = args
            .metrics
            .iter()
            .enumerate()
            .map(|(i, m)| {
                Ok(OutputSpec {
                    metric: m.parse().map_err(CliError::Invalid)?,
                    path: args.outs.get(i).cloned(),
                    format,
                })
            })
            .collect::<Result<_, CliError>>()?;
    } else if !args.outs.is_empty() {
        return Err(CliError::Invalid("--out requires a matching --metric".into()));
    } else if let Some(format) = args.format {
        spec.outputs = spec
            .effective_outputs()
            .into_iter()
            .map(|o| OutputSpec { format, ..o })
            .collect();
    }
    spec.validate()?;
    Ok(spec)
}

/// Runs the experiment and renders every requested table.
pub fn render_run(spec: &ExperimentSpec) -> Result<Vec<(OutputSpec, String)>, CliError> {
    spec.validate()?;
    let config = SimConfig::new(spec.rho, spec.horizon, spec.seed);
    let outcome = run_experiment(&config, spec.replications, |_| {})
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    Ok(spec
        .effective_outputs()
        .into_iter()
        .map(|o| {
            let table = outcome.table(o.metric, spec.infinity_mode);
            let body = match o.format {
                Format::Csv => table.to_csv(),
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&table.to_json())
                        .expect("JSON values always serialize");
                    s.push('\n');
                    s
                }
            };
            (o, body)
        })
        .collect())
}

pub fn cmd_run(spec: &ExperimentSpec, stdout: &mut dyn Write) -> Result<(), CliError> {
    spec.validate()?;
    // Open every file up front so an unwritable path fails before the run.
    let mut files = Vec::new();
    for o in spec.effective_outputs() {
        if let Some(path) = &o.path {
            files.push((path.clone(), create(path)?));
        }
    }
    let rendered = render_run(spec)?;
    let mut files = files.into_iter();
    for (o, body) in rendered {
        match o.path {
            Some(_) => {
                let (path, mut f) = files.next().expect("one file per path");
                f.write_all(body.as_bytes())
                    .map_err(|source| CliError::Io { path, source })?;
            }
            None => {
                writeln!(stdout, "# metric {}", o.metric).and_then(|_| stdout.write_all(body.as_bytes()))
                    .map_err(|source| CliError::Io {
                        path: "<stdout>".into(),
                        source,
                    })?;
            }
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<File, CliError> {
    File::create(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs the suite, printing one line per criterion. Returns whether all
/// criteria passed.
pub fn cmd_verify(level: Level, out: &mut dyn Write) -> io::Result<bool> {
    let suite = Suite::new(level);
    let mut all = true;
    for c in suite.run_all() {
        writeln!(out, "{c}")?;
        all &= c.passed;
    }
    Ok(all)
}

/// Renders a theory table: `p,value` rows, or the single critical priority.
pub fn cmd_theory(rho: f64, metric: TheoryMetric, grid: &[f64]) -> Result<String, CliError> {
    let params = AnalyticParams::new(rho).map_err(|e| CliError::Invalid(e.to_string()))?;
    if metric == TheoryMetric::Pstar {
        return Ok(match params.critical_priority() {
            Some(p) => format!("pstar\n{p}\n"),
            None => "pstar\nnone\n".to_string(),
        });
    }
    let grid: Vec<f64> = if grid.is_empty() {
        BinGrid.midpoints().collect()
    } else {
        grid.to_vec()
    };
    let mut out = String::from("p,value\n");
    for &p in &grid {
        let pl = PriorityLevel::new(p).map_err(|e| CliError::Invalid(e.to_string()))?;
        let v = match metric {
            TheoryMetric::M => params.mean_density(pl),
            TheoryMetric::S => params.sojourn(pl),
            TheoryMetric::W => params.waiting(pl),
            TheoryMetric::CcdfMean => params.mean_ccdf(pl),
            TheoryMetric::Pstar => unreachable!(),
        };
        out.push_str(&format!("{p},{}\n", fmt_num(v)));
    }
    Ok(out)
}

/// Entry point for the `cpq` binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let stdout = io::stdout();
    let mut stdout = stdout.lock();
    let result = match cli.command {
        Command::Run(args) => resolve_spec(&args).and_then(|spec| cmd_run(&spec, &mut stdout)),
        Command::Verify { level } => {
            let level = match level {
                LevelArg::Quick => Level::Quick,
                LevelArg::Full => Level::Full,
            };
            return match cmd_verify(level, &mut stdout) {
                Ok(true) => EXIT_OK,
                Ok(false) => EXIT_ACCEPTANCE,
                Err(e) => {
                    eprintln!("cpq: {e}");
                    EXIT_INVALID
                }
            };
        }
        Command::Theory(args) => cmd_theory(args.rho, args.metric, &args.grid)
            .and_then(|table| {
                stdout.write_all(table.as_bytes()).map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
            }),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("cpq: {e}");
            EXIT_INVALID
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theory_values() {
        assert_eq!(cmd_theory(1.25, TheoryMetric::Pstar, &[]).unwrap(), format!("pstar\n{}\n", 1.0 - 1.0 / 1.25));
        assert_eq!(cmd_theory(0.75, TheoryMetric::Pstar, &[]).unwrap(), "pstar\nnone\n");
        let m = cmd_theory(0.75, TheoryMetric::M, &[0.5]).unwrap();
        let v: f64 = m.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - 1.92).abs() < 1e-12);
        assert_eq!(cmd_theory(0.75, TheoryMetric::W, &[1.0]).unwrap(), "p,value\n1,0\n");
        assert_eq!(cmd_theory(0.75, TheoryMetric::S, &[]).unwrap().lines().count(), 21);
        assert!(cmd_theory(0.0, TheoryMetric::S, &[]).is_err());
        assert!(cmd_theory(1.0, TheoryMetric::S, &[1.5]).is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("exp.json");
        std::fs::write(
            &cfg,
            r#"{"rho": 1.25, "horizon": 500, "replications": 3, "infinity_mode": "include",
                "outputs": [{"metric": "s", "path": "s.csv", "format": "json"}]}"#,
        )
        .unwrap();
        let args = RunArgs {
            config: Some(cfg),
            horizon: Some(800.0),
            ..Default::default()
        };
        let spec = resolve_spec(&args).unwrap();
        assert_eq!(spec.rho, 1.25);
        assert_eq!(spec.horizon, 800.0);
        assert_eq!(spec.replications, 3);
        assert_eq!(spec.infinity_mode, InfinityMode::Include);
        assert_eq!(spec.outputs[0].metric, Metric::Sojourn);
        assert_eq!(spec.outputs[0].format, Format::Json);
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = |args: RunArgs| matches!(resolve_spec(&args), Err(CliError::Invalid(_)));
        assert!(bad(RunArgs { rho: Some(-1.0), ..Default::default() }));
        assert!(bad(RunArgs { replications: Some(0), ..Default::default() }));
        assert!(bad(RunArgs { metrics: vec!["q".into()], ..Default::default() }));
        assert!(bad(RunArgs {
            metrics: vec!["m".into(), "s".into()],
            outs: vec!["a.csv".into()],
            ..Default::default()
        }));
        assert!(bad(RunArgs { outs: vec!["a.csv".into()], ..Default::default() }));
    }

    #[test]
    fn unknown_config_field_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("exp.json");
        std::fs::write(&cfg, r#"{"rho": 0.5, "warmup": 10}"#).unwrap();
        let args = RunArgs { config: Some(cfg), ..Default::default() };
        assert!(matches!(resolve_spec(&args), Err(CliError::Invalid(_))));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_with_args(["cpq", "theory", "--rho", "0.75", "--metric", "m", "--p", "0.5"]), EXIT_OK);
        assert_eq!(main_with_args(["cpq", "theory", "--rho", "-2", "--metric", "m"]), EXIT_INVALID);
        assert_eq!(main_with_args(["cpq", "theory", "--rho", "1", "--metric", "bogus"]), EXIT_INVALID);
        assert_eq!(main_with_args(["cpq", "run", "--rho", "0"]), EXIT_INVALID);
        assert_eq!(
            main_with_args(["cpq", "run", "--horizon", "50", "--replications", "1", "--metric", "m", "--out", "/nonexistent-dir/x.csv"]),
            EXIT_INVALID
        );
    }
}
