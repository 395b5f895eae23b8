// Negated comparisons are used on purpose: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use foodsim_core::demand::ExpenditureConvention;
use foodsim_core::engine::{run_scenario, validate, ScenarioData, Settings};
use foodsim_core::io::{read_text, PolicyRef, ScenarioConfig};
use foodsim_core::policy::{builtin_scenarios, PolicySpec};
use foodsim_core::rescale::RescaleMode;
use foodsim_core::uncertainty::{monte_carlo, univariate_sensitivity, Execution, McSpec, SensitivityParam};
use foodsim_core::{desk, textbox, Error};

mod report;

#[derive(Parser)]
#[command(name = "foodsim", version)]
#[command(about = "Food tax and subsidy simulation: price response, diet, BMI and health-adjusted life years")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario config and every file it refers to
    Validate(ScenarioArgs),
    /// Expected-value run for one or more policies
    Simulate(ScenarioArgs),
    /// Seeded Monte Carlo over parameter uncertainty
    Mc(McArgs),
    /// Pin one parameter at percentiles of its distribution
    Sensitivity(SensitivityArgs),
    /// Expand the PE matrix to food level and audit adding-up
    Disaggregate(DisaggArgs),
    /// Print the three-food worked example
    Textbox,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Rescale {
    Energy,
    Grams,
    Expenditure,
    Tfee,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Convention {
    PostPolicy,
    BaselinePrice,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML. Defaults to $FOODSIM_DATA_DIR/scenario.toml, then the
    /// bundled desk dataset.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Directory holding scenario.toml
    #[arg(long, env = "FOODSIM_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Built-in policy name or a policy TOML file. Defaults to the config's
    /// policy, else every built-in policy.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long, value_enum)]
    rescale: Option<Rescale>,
    /// Total food expenditure elasticity for --rescale tfee
    #[arg(long)]
    tfee: Option<f64>,
    #[arg(long, value_enum)]
    convention: Option<Convention>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    #[arg(long, default_value_t = 20_240_101)]
    seed: u64,
    /// Run iterations on one thread
    #[arg(long)]
    serial: bool,
    /// Write per-iteration metrics as CSV
    #[arg(long)]
    dump_iterations: Option<PathBuf>,
}

#[derive(Args)]
struct SensitivityArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// tfee or disagg_scalar
    #[arg(long)]
    param: String,
    #[arg(long, value_delimiter = ',', default_value = "2.5,97.5")]
    percentiles: Vec<f64>,
}

#[derive(Args)]
struct DisaggArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Disaggregation scalar; defaults to the config value
    #[arg(long)]
    scalar: Option<f64>,
    /// Write the matrix here instead of standard output
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Exit status 1 for bad input, 2 for failures while running.
enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    fn invalid(e: impl ToString) -> Self {
        Failure::Invalid(e.to_string())
    }

    fn runtime(e: impl ToString) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

struct Loaded {
    config: ScenarioConfig,
    embedded: bool,
}

impl Loaded {
    fn fetch(&self, path: &Path) -> foodsim_core::Result<String> {
        if self.embedded {
            desk::fetch(path)
        } else {
            read_text(path)
        }
    }
}

impl ScenarioArgs {
    fn load_config(&self) -> CliResult<Loaded> {
        let path = match (&self.config, &self.data_dir) {
            (Some(p), _) => Some(p.clone()),
            (None, Some(dir)) => Some(dir.join("scenario.toml")),
            (None, None) => None,
        };
        let (config, embedded) = match path {
            Some(p) => (ScenarioConfig::load(&p).map_err(Failure::invalid)?, false),
            None => (desk::config(), true),
        };
        Ok(Loaded { config, embedded })
    }

    fn settings(&self, cfg: &ScenarioConfig) -> CliResult<Settings> {
        let mut s = Settings::from_config(cfg).map_err(Failure::invalid)?;
        let tfee = self.tfee.unwrap_or(cfg.rescale.tfee);
        if let Some(r) = self.rescale {
            s.mode = match r {
                Rescale::Energy => RescaleMode::ConstantEnergy,
                Rescale::Grams => RescaleMode::ConstantGrams,
                Rescale::Expenditure => RescaleMode::ConstantExpenditure,
                Rescale::Tfee => RescaleMode::TfeeScaled(tfee),
            };
        }
        if self.tfee.is_some() {
            if !tfee.is_finite() {
                return Err(Failure::invalid(format!("--tfee {tfee} is not finite")));
            }
            s.mode = s.mode.with_tfee(tfee);
        }
        if let Some(c) = self.convention {
            s.options.convention = match c {
                Convention::PostPolicy => ExpenditureConvention::PostPolicy,
                Convention::BaselinePrice => ExpenditureConvention::BaselinePrice,
            };
        }
        Ok(s)
    }

    fn policies(&self, cfg: &ScenarioConfig) -> CliResult<Vec<PolicySpec>> {
        if let Some(p) = &self.policy {
            let path = Path::new(p);
            if path.extension().is_some_and(|e| e == "toml") {
                let text = read_text(path).map_err(Failure::invalid)?;
                let spec: PolicySpec = toml::from_str(&text)
                    .map_err(|e| Failure::invalid(format!("{}: {}", path.display(), e.message())))?;
                return Ok(vec![spec]);
            }
            return PolicyRef::Builtin(p.clone())
                .resolve()
                .map(|s| vec![s])
                .map_err(Failure::invalid);
        }
        match &cfg.policy {
            Some(p) => p.resolve().map(|s| vec![s]).map_err(Failure::invalid),
            None => Ok(builtin_scenarios()),
        }
    }

    fn load(&self) -> CliResult<(ScenarioData, Settings, Vec<PolicySpec>)> {
        let loaded = self.load_config()?;
        let cfg = &loaded.config;
        let settings = self.settings(cfg)?;
        let policies = self.policies(cfg)?;
        let data = ScenarioData::from_config_with(cfg, &|p: &Path| loaded.fetch(p)).map_err(Failure::invalid)?;
        Ok((data, settings, policies))
    }
}

fn json<T: serde::Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v).map_err(Failure::runtime)
}

fn cmd_validate(args: &ScenarioArgs) -> CliResult<String> {
    let loaded = args.load_config()?;
    let mut report = validate(&loaded.config, &|p: &Path| loaded.fetch(p));
    if let Err(Failure::Invalid(e)) = args.settings(&loaded.config) {
        report.error(e);
    }
    if let Err(Failure::Invalid(e)) = args.policies(&loaded.config) {
        report.error(e);
    }
    let text = match args.format {
        Format::Json => json(&report)?,
        _ if report.is_empty() => "ok\n".to_string(),
        _ => report.to_string(),
    };
    if report.is_ok() {
        Ok(text)
    } else {
        print!("{text}");
        Err(Failure::Invalid(format!("{} error(s)", report.errors.len())))
    }
}

fn cmd_simulate(args: &ScenarioArgs) -> CliResult<String> {
    let (data, settings, policies) = args.load()?;
    let outcomes = policies
        .iter()
        .map(|p| run_scenario(&data, &settings, p))
        .collect::<Result<Vec<_>, Error>>()
        .map_err(Failure::runtime)?;
    match args.format {
        Format::Table => Ok(report::outcome_table(&outcomes)),
        Format::Json => json(&outcomes),
        Format::Csv => report::outcome_csv(&outcomes).map_err(Failure::runtime),
    }
}

fn cmd_mc(args: &McArgs) -> CliResult<String> {
    let (data, settings, policies) = args.scenario.load()?;
    if args.iterations == 0 {
        return Err(Failure::invalid("--iterations must be at least 1"));
    }
    let spec = McSpec::from_settings(&settings);
    let exec = if args.serial {
        Execution::Serial
    } else {
        Execution::Parallel
    };
    let mut summaries = BTreeMap::new();
    let mut dump = String::new();
    for p in &policies {
        let run = monte_carlo(&data, &settings, p, &spec, args.iterations, args.seed, exec).map_err(Failure::runtime)?;
        if args.dump_iterations.is_some() {
            let csv = run.iterations_csv();
            for (k, line) in csv.lines().enumerate() {
                // One header for the whole file.
                if k == 0 && !dump.is_empty() {
                    continue;
                }
                let first = if k == 0 { "policy" } else { p.name.as_str() };
                dump.push_str(&format!("{first},{line}\n"));
            }
        }
        summaries.insert(p.name.clone(), run.summary);
    }
    if let Some(path) = &args.dump_iterations {
        fs::write(path, dump).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
    }
    match args.scenario.format {
        Format::Csv => report::summary_csv(&summaries).map_err(Failure::runtime),
        _ => json(&summaries),
    }
}

fn cmd_sensitivity(args: &SensitivityArgs) -> CliResult<String> {
    let param: SensitivityParam = args.param.parse().map_err(Failure::invalid)?;
    let (data, settings, policies) = args.scenario.load()?;
    let spec = McSpec::from_settings(&settings);
    let mut runs = Vec::new();
    for p in &policies {
        let r = univariate_sensitivity(&data, &settings, p, &spec, param, &args.percentiles).map_err(|e| match e {
            Error::Invalid(_) => Failure::invalid(e),
            other => Failure::runtime(other),
        })?;
        runs.extend(r);
    }
    match args.scenario.format {
        Format::Table => Ok(report::sensitivity_table(&runs)),
        Format::Json => json(&runs),
        Format::Csv => report::sensitivity_csv(&runs).map_err(Failure::runtime),
    }
}

fn cmd_disaggregate(args: &DisaggArgs) -> CliResult<String> {
    let (data, settings, _) = args.scenario.load()?;
    let s = args.scalar.unwrap_or(settings.disagg.value);
    if !(s >= 0.0) {
        return Err(Failure::invalid(format!("--scalar {s} must be >= 0")));
    }
    let (matrix, audit) = data.disaggregate(s).map_err(Failure::runtime)?;
    let csv = report::matrix_csv(&matrix).map_err(Failure::runtime)?;
    let audit_text = format!(
        "adding-up audit: {} child rows, {} blocks, max |residual| {:.3e}\n",
        audit.rows_checked, audit.blocks_checked, audit.max_abs_residual
    );
    match &args.output {
        Some(path) => {
            fs::write(path, csv).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
            match args.scenario.format {
                Format::Json => json(&audit),
                _ => Ok(audit_text),
            }
        }
        None => {
            eprint!("{audit_text}");
            Ok(csv)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Mc(a) => cmd_mc(a),
        Command::Sensitivity(a) => cmd_sensitivity(a),
        Command::Disaggregate(a) => cmd_disaggregate(a),
        Command::Textbox => textbox::textbox().map_err(Failure::runtime),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            if !out.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
