//! Command line: `run`, `grid`, `tables` and `recommend`.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dgm::{BinaryProps, DoseDistribution, NonComplierTypes, PartialDoseProps, TrialConfig};
use crate::outcomes::{ComplianceMode, ThresholdCase};
use crate::scenarios::Scenario;

use super::{emit_table, family_labels, grid_by_label, recommend_method, run_cell, run_grid};
use super::{GridCell, GridSpec, TableFormat};

#[derive(Debug, Parser)]
#[command(name = "cacelab", version, about = "Monte Carlo comparison of CACE estimators under non-random non-compliance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one design cell and print ITT, PP and IV summaries.
    Run(RunArgs),
    /// Run a labelled family of the built-in grid, or `all`.
    Grid(GridArgs),
    /// Run every grid family, one table each.
    Tables(TablesArgs),
    /// Print the preferred estimator for a setting.
    Recommend(RecommendArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Md,
}

impl From<FormatArg> for TableFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => TableFormat::Csv,
            FormatArg::Md => TableFormat::Markdown,
        }
    }
}

#[derive(Debug, Args)]
struct StudyArgs {
    /// Participants per trial.
    #[arg(long)]
    n: Option<usize>,
    /// Monte Carlo replications.
    #[arg(long)]
    reps: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// IV first stages below this magnitude are divergent.
    #[arg(long)]
    min_first_stage: Option<f64>,
    /// IV estimates further than this multiple of max(|CACE|, 1) from the truth are divergent.
    #[arg(long)]
    bias_multiple: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl StudyArgs {
    fn apply(&self, config: &mut TrialConfig) {
        if let Some(n) = self.n {
            config.n = n;
        }
        if let Some(reps) = self.reps {
            config.reps = reps;
        }
        if let Some(seed) = self.seed {
            config.master_seed = seed;
        }
        if let Some(m) = self.min_first_stage {
            config.divergence.min_first_stage = m;
        }
        if let Some(b) = self.bias_multiple {
            config.divergence.bias_multiple = b;
        }
    }
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Debug, Args)]
struct DesignArgs {
    #[arg(long, default_value = "binary")]
    compliance: ComplianceMode,
    /// nt (never-takers only) or nt-at (never-takers and always-takers).
    #[arg(long, default_value = "nt-at")]
    noncompliers: NonComplierTypes,
    /// random or A..H.
    #[arg(long, default_value = "random")]
    scenario: Scenario,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    design: DesignArgs,
    /// Average treatment effect.
    #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
    effect: f64,
    /// Condition band severity.
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    /// Complier threshold case for partial compliance.
    #[arg(long, default_value = "I")]
    threshold: ThresholdCase,
    /// Partial dose shares "c0,c1,c2,c3,c4;t0,t1,t2,t3,t4" for doses 0..1 in quarters.
    #[arg(long)]
    props: Option<String>,
    /// Binary shares "p_nt,p_at".
    #[arg(long)]
    binary_props: Option<String>,
    /// Use the larger non-complier shares of the proportions sensitivity analysis.
    #[arg(long)]
    sensitivity_props: bool,
    /// Drop divergent IV replications from the IV summary.
    #[arg(long)]
    exclude_divergent: bool,
    #[command(flatten)]
    study: StudyArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Family label, or `all`.
    #[arg(long, default_value = "main")]
    label: String,
    #[command(flatten)]
    study: StudyArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct TablesArgs {
    /// Directory for one file per family (default: all tables to stdout).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "md")]
    format: FormatArg,
    #[command(flatten)]
    study: StudyArgs,
}

#[derive(Debug, Args)]
struct RecommendArgs {
    #[command(flatten)]
    design: DesignArgs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub path: Option<PathBuf>,
    pub format: TableFormat,
}

/// A parsed and validated command line.
#[derive(Debug, Clone, PartialEq)]
pub enum Invocation {
    Run {
        cell: GridCell,
        threads: Option<usize>,
        output: Output,
    },
    Grid {
        spec: GridSpec,
        threads: Option<usize>,
        output: Output,
    },
    Tables {
        template: TrialConfig,
        threads: Option<usize>,
        out_dir: Option<PathBuf>,
        format: TableFormat,
    },
    Recommend {
        compliance: ComplianceMode,
        noncompliers: NonComplierTypes,
        scenario: Scenario,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// `--help` or `--version`: print to stdout and exit 0.
    Display(String),
    /// One-line diagnostic; exit nonzero.
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Display(_) => 0,
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn usage(flag: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("error: --{flag}: {msg}"))
}

fn parse_reals(flag: &str, text: &str, expected: usize) -> Result<Vec<f64>, CliError> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| usage(flag, format!("'{text}': {e}")))?;
    if values.len() != expected {
        return Err(usage(flag, format!("expected {expected} comma-separated values, got {}", values.len())));
    }
    Ok(values)
}

fn parse_partial_props(text: &str) -> Result<PartialDoseProps, CliError> {
    let (control, treatment) = text
        .split_once(';')
        .ok_or_else(|| usage("props", "expected \"control shares;treatment shares\""))?;
    let dist = |part: &str| -> Result<DoseDistribution, CliError> {
        let v = parse_reals("props", part, 5)?;
        Ok(DoseDistribution([v[0], v[1], v[2], v[3], v[4]]))
    };
    Ok(PartialDoseProps {
        control: dist(control)?,
        treatment: dist(treatment)?,
    })
}

fn parse_binary_props(text: &str) -> Result<BinaryProps, CliError> {
    let v = parse_reals("binary-props", text, 2)?;
    Ok(BinaryProps { p_nt: v[0], p_at: v[1] })
}

/// Maps a configuration error to the flag that caused it.
fn config_diagnostic(e: &crate::error::ConfigError) -> CliError {
    use crate::error::ConfigError as E;
    let flag = match e {
        E::TooFewParticipants(_) => "n",
        E::NoReplications => "reps",
        E::NotFinite { field, .. } | E::NotPositive { field, .. } => field,
        E::DeltaTooSmall(_) => "delta",
        E::NegativeProportion { field, .. } | E::ProportionsDoNotSum { field, .. } => {
            if field.starts_with("binary") {
                "binary-props"
            } else {
                "props"
            }
        }
        E::NonComplierShareTooLarge(_) | E::AlwaysTakersWithoutType => "binary-props",
        E::ScenarioNeedsAlwaysTakers { .. } | E::ScenarioNeedsPartial { .. } => "scenario",
        E::ThresholdNeedsPartial => "threshold",
    };
    usage(flag, e)
}

fn first_line(e: &clap::Error) -> CliError {
    use clap::error::ErrorKind;
    let rendered = e.render().to_string();
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            CliError::Display(rendered)
        }
        _ => CliError::Usage(
            rendered
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("error: invalid arguments")
                .trim()
                .to_string(),
        ),
    }
}

/// Parses and validates a command line (including the program name).
pub fn parse_config<I, T>(args: I) -> Result<Invocation, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| first_line(&e))?;
    match cli.command {
        Command::Run(a) => {
            let mut config = TrialConfig::design(a.design.compliance, a.design.noncompliers, a.design.scenario);
            if a.sensitivity_props {
                config = config.with_sensitivity_proportions();
            }
            config.effect = a.effect;
            config.delta = a.delta;
            config.threshold = a.threshold;
            if let Some(p) = &a.props {
                config.partial_props = parse_partial_props(p)?;
            }
            if let Some(p) = &a.binary_props {
                config.binary_props = parse_binary_props(p)?;
            }
            a.study.apply(&mut config);
            config.validate().map_err(|e| config_diagnostic(&e))?;
            if a.props.is_some() && config.compliance == ComplianceMode::Binary {
                return Err(usage("props", "dose shares apply to partial compliance only"));
            }
            if a.binary_props.is_some() && config.compliance == ComplianceMode::Partial {
                return Err(usage("binary-props", "binary shares apply to binary compliance only"));
            }
            check_threads(a.study.threads)?;
            Ok(Invocation::Run {
                cell: GridCell {
                    family: "run".to_string(),
                    config,
                    exclude_divergent: a.exclude_divergent,
                },
                threads: a.study.threads,
                output: Output {
                    path: a.output.out,
                    format: a.output.format.into(),
                },
            })
        }
        Command::Grid(a) => {
            let template = template_from(&a.study)?;
            let spec = grid_by_label(&a.label, &template).ok_or_else(|| {
                usage(
                    "label",
                    format!("unknown grid label '{}' (expected all or one of: {})", a.label, family_labels().join(", ")),
                )
            })?;
            check_threads(a.study.threads)?;
            Ok(Invocation::Grid {
                spec,
                threads: a.study.threads,
                output: Output {
                    path: a.output.out,
                    format: a.output.format.into(),
                },
            })
        }
        Command::Tables(a) => {
            let template = template_from(&a.study)?;
            check_threads(a.study.threads)?;
            Ok(Invocation::Tables {
                template,
                threads: a.study.threads,
                out_dir: a.out_dir,
                format: a.format.into(),
            })
        }
        Command::Recommend(a) => {
            let DesignArgs { compliance, noncompliers, scenario } = a.design;
            recommend_method(compliance, noncompliers, scenario).map_err(|e| config_diagnostic(&e))?;
            Ok(Invocation::Recommend {
                compliance,
                noncompliers,
                scenario,
            })
        }
    }
}

fn template_from(study: &StudyArgs) -> Result<TrialConfig, CliError> {
    let mut template = TrialConfig::default();
    study.apply(&mut template);
    template.validate().map_err(|e| config_diagnostic(&e))?;
    Ok(template)
}

fn check_threads(threads: Option<usize>) -> Result<(), CliError> {
    match threads {
        Some(0) => Err(usage("threads", "must be at least 1")),
        _ => Ok(()),
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("error: {e}"))
}

fn write_output(output: &Output, rows: &[super::ResultRow], stdout: &mut dyn Write) -> Result<(), CliError> {
    match &output.path {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            emit_table(rows, output.format, std::io::BufWriter::new(file)).map_err(runtime)
        }
        None => emit_table(rows, output.format, stdout).map_err(runtime),
    }
}

pub fn execute(invocation: Invocation, stdout: &mut dyn Write) -> Result<(), CliError> {
    match invocation {
        Invocation::Run { cell, threads, output } => {
            let rows = run_cell(&cell, threads).map_err(runtime)?;
            write_output(&output, &rows, stdout)
        }
        Invocation::Grid { spec, threads, output } => {
            let rows = run_grid(&spec, threads).map_err(runtime)?;
            write_output(&output, &rows, stdout)
        }
        Invocation::Tables {
            template,
            threads,
            out_dir,
            format,
        } => {
            if let Some(dir) = &out_dir {
                fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
            }
            let ext = match format {
                TableFormat::Csv => "csv",
                TableFormat::Markdown => "md",
            };
            for label in family_labels() {
                let spec = grid_by_label(&label, &template).expect("known label");
                let rows = run_grid(&spec, threads).map_err(runtime)?;
                match &out_dir {
                    Some(dir) => write_output(
                        &Output {
                            path: Some(dir.join(format!("{label}.{ext}"))),
                            format,
                        },
                        &rows,
                        stdout,
                    )?,
                    None => {
                        writeln!(stdout, "## {label}\n").map_err(runtime)?;
                        emit_table(&rows, format, &mut *stdout).map_err(runtime)?;
                        writeln!(stdout).map_err(runtime)?;
                    }
                }
            }
            Ok(())
        }
        Invocation::Recommend {
            compliance,
            noncompliers,
            scenario,
        } => {
            let rec = recommend_method(compliance, noncompliers, scenario).map_err(|e| config_diagnostic(&e))?;
            writeln!(stdout, "{rec}").map_err(runtime)
        }
    }
}

/// Entry point for the binary: returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut handle = stdout.lock();
    let result = parse_config(args).and_then(|inv| execute(inv, &mut handle));
    match result {
        Ok(()) => 0,
        Err(CliError::Display(text)) => {
            let _ = write!(handle, "{text}");
            0
        }
        Err(e @ (CliError::Usage(_) | CliError::Runtime(_))) => {
            let (CliError::Usage(msg) | CliError::Runtime(msg)) = &e else { unreachable!() };
            eprintln!("{msg}");
            e.exit_code()
        }
    }
}
