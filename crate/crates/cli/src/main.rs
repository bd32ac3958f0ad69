use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use selfsim::checks::run_suite;
use selfsim::io::{execute, execute_filtered, read_csv, write_svg, OutputFormat, PlotStyle, Problem, RunConfig, RunReport, RunStatus};
use selfsim::Error;

/// Environment variable naming the default output directory.
const OUTPUT_DIR_ENV: &str = "SELFSIM_OUTPUT_DIR";

/// Similarity profiles, their sustaining fluxes, and direct simulations.
#[derive(Parser)]
#[command(name = "selfsim", version)]
struct Cli {
    /// Directory for artifacts [default: $SELFSIM_OUTPUT_DIR, else ./selfsim-output].
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Artifact format; report.json is always written.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
    All,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
            Format::Svg => OutputFormat::Svg,
            Format::All => OutputFormat::All,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve a similarity profile and its fluxes.
    Profile(Inline),
    /// Simulate the unscaled equations and compare with the profile.
    Simulate(Inline),
    /// Closed-form Barenblatt profiles.
    Barenblatt {
        /// PME exponent(s).
        #[arg(short, required = true, num_args = 1.., value_delimiter = ',')]
        m: Vec<f64>,
        /// Mass parameter.
        #[arg(short = 'N', default_value_t = 1.0)]
        mass: f64,
        /// Half-width of the profile grid.
        #[arg(short = 'L')]
        half_width: Option<f64>,
        /// Odd number of grid nodes.
        #[arg(short)]
        n: Option<usize>,
    },
    /// Ginzburg-Landau mixed-wavenumber run with tracked zeros of Re A.
    GlZeros(Inline),
    /// Flux sets only (multipliers, diffusive fluxes, zero speeds).
    Fluxes(Inline),
    /// Run the bundled invariant suite; exit 0 iff every check passes.
    Check,
    /// Render a curve CSV as an SVG line plot.
    Plot {
        /// Curve file written by a previous run.
        input: PathBuf,
        /// Output file [default: input with .svg extension].
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        y_label: Option<String>,
    },
}

/// `--config` plus inline overrides; inline flags win.
#[derive(Args, Default)]
struct Inline {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Problem tag (pme_barenblatt, pme_mixing, rds_profile, ...).
    #[arg(long)]
    problem: Option<String>,
    /// Built-in network: two_species, three_species_binary or two_reaction_chain.
    #[arg(long)]
    network: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    k2: Option<f64>,
    #[arg(short, long, value_delimiter = ',')]
    m: Vec<f64>,
    #[arg(short = 'N')]
    mass: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    u_minus: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    u_plus: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    c_minus: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    c_plus: Vec<f64>,
    /// Diffusion constants, comma separated.
    #[arg(short, long, value_delimiter = ',', allow_hyphen_values = true)]
    d: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    eta_minus: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    eta_plus: Option<f64>,
    #[arg(long)]
    phi_minus: Option<f64>,
    #[arg(long)]
    phi_plus: Option<f64>,
    /// Turbulence half-width.
    #[arg(short = 'A')]
    turbulence_half_width: Option<f64>,
    #[arg(short = 'L', allow_hyphen_values = true)]
    half_width: Option<f64>,
    #[arg(short, allow_hyphen_values = true)]
    n: Option<i64>,
    #[arg(short = 'X')]
    domain_half_width: Option<f64>,
    #[arg(long)]
    n_x: Option<usize>,
    #[arg(short = 'T')]
    final_time: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    snapshots: Vec<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
}

impl Inline {
    fn overrides(&self) -> anyhow::Result<Map<String, Value>> {
        let mut o = Map::new();
        let mut put = |key: &str, v: Value| {
            o.insert(key.to_string(), v);
        };
        if let Some(p) = &self.problem {
            put("problem", json!(p));
        }
        if let Some(name) = &self.network {
            let mut net = Map::new();
            net.insert("network".into(), json!(name));
            for (key, v) in [
                ("beta", self.beta),
                ("gamma", self.gamma),
                ("kappa", self.kappa),
                ("k1", self.k1),
                ("k2", self.k2),
            ] {
                if let Some(v) = v {
                    net.insert(key.into(), json!(v));
                }
            }
            put("network", Value::Object(net));
        } else if [self.beta, self.gamma, self.kappa, self.k1, self.k2].iter().any(Option::is_some) {
            bail!(Error::Validation {
                parameter: "network".into(),
                reason: "rate or exponent flags need --network".into()
            });
        }
        for (key, v) in [
            ("m", &self.m),
            ("u_minus", &self.u_minus),
            ("u_plus", &self.u_plus),
            ("c_minus", &self.c_minus),
            ("c_plus", &self.c_plus),
            ("d", &self.d),
            ("snapshots", &self.snapshots),
        ] {
            if !v.is_empty() {
                put(key, json!(v));
            }
        }
        for (key, v) in [
            ("N", self.mass),
            ("eta_minus", self.eta_minus),
            ("eta_plus", self.eta_plus),
            ("phi_minus", self.phi_minus),
            ("phi_plus", self.phi_plus),
            ("A", self.turbulence_half_width),
            ("L", self.half_width),
            ("X", self.domain_half_width),
            ("T", self.final_time),
            ("dt", self.dt),
            ("tol", self.tol),
        ] {
            if let Some(v) = v {
                put(key, json!(v));
            }
        }
        if let Some(n) = self.n {
            if n < 0 {
                bail!(Error::Validation {
                    parameter: "n".into(),
                    reason: format!("grid node count must be positive, got {n}")
                });
            }
            put("n", json!(n));
        }
        if let Some(n) = self.n_x {
            put("n_x", json!(n));
        }
        Ok(o)
    }

    /// Merges the config file with the inline flags, inferring the problem
    /// from the parameters when neither names one.
    fn resolve(&self, fallback: impl Fn(&Map<String, Value>) -> Option<Problem>) -> anyhow::Result<RunConfig> {
        let mut base = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.display().to_string(),
                    source: e,
                })?;
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(map)) => map,
                    Ok(_) => bail!(Error::Parse(format!("{}: expected a JSON object", path.display()))),
                    Err(e) => bail!(Error::Parse(format!("{}: {e}", path.display()))),
                }
            }
            None => Map::new(),
        };
        for (k, v) in self.overrides()? {
            base.insert(k, v);
        }
        if !base.contains_key("problem") {
            let problem = fallback(&base).ok_or_else(|| Error::Validation {
                parameter: "problem".into(),
                reason: "give --config, --problem, or enough parameters to infer one".into(),
            })?;
            base.insert("problem".into(), serde_json::to_value(problem)?);
        }
        Ok(RunConfig::from_json(&Value::Object(base).to_string())?)
    }
}

fn infer_profile(p: &Map<String, Value>) -> Option<Problem> {
    let has = |k: &str| p.contains_key(k);
    if has("network") {
        Some(Problem::RdsProfile)
    } else if has("eta_minus") || has("eta_plus") {
        Some(Problem::GlProfile)
    } else if has("A") {
        Some(Problem::TurbulenceExact)
    } else if has("m") && has("u_minus") {
        Some(Problem::PmeMixing)
    } else if has("m") {
        Some(Problem::PmeBarenblatt)
    } else {
        None
    }
}

fn infer_simulation(p: &Map<String, Value>) -> Option<Problem> {
    match infer_profile(p)? {
        Problem::RdsProfile => Some(Problem::RdsSimulate),
        Problem::GlProfile => Some(Problem::GlSimulate),
        Problem::TurbulenceExact => Some(Problem::TurbulenceSimulate),
        other => Some(other),
    }
}

fn output_dir(cli: &Option<PathBuf>, config: &RunConfig) -> PathBuf {
    cli.clone()
        .or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("selfsim-output"))
}

fn usage_error(msg: String) -> anyhow::Error {
    anyhow::Error::new(Error::Validation {
        parameter: "problem".into(),
        reason: msg,
    })
}

fn print_report(report: &RunReport, dir: &Path) {
    let status = match report.status {
        RunStatus::Ok => "ok",
        RunStatus::Failed => "failed",
    };
    println!("{} [{}]: {status} in {:.2} s", report.label, report.problem, report.wall_clock_seconds);
    if let Some(e) = &report.error {
        println!("  error: {}", e.message);
    }
    for (k, v) in report.metrics.iter().chain(&report.flux_summaries).chain(&report.conservation) {
        println!("  {k} = {v:.6e}");
    }
    for w in &report.warnings {
        println!("  warning: {w}");
    }
    for a in &report.artifacts {
        println!("  wrote {}", dir.join(a).display());
    }
}

fn run_config(
    mut config: RunConfig,
    out: &Option<PathBuf>,
    format: OutputFormat,
    keep: Option<&[&str]>,
) -> anyhow::Result<()> {
    let dir = output_dir(out, &config);
    config.output_dir = Some(dir.clone());
    let exec = match keep {
        None => execute(&config, &dir, format),
        Some(names) => execute_filtered(&config, &dir, format, |c| names.contains(&c.name.as_str())),
    };
    print_report(&exec.report, &dir);
    match exec.error {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let format = OutputFormat::from(cli.format);
    match cli.command {
        Command::Profile(inline) => {
            let config = inline.resolve(infer_profile)?;
            if config.problem.is_simulation() {
                return Err(usage_error(format!(
                    "'{}' is a simulation; use the simulate subcommand",
                    config.problem.tag()
                )));
            }
            // Profiles only; PME simulations belong to `simulate`.
            let mut config = config;
            config.final_time = None;
            run_config(config, &cli.output_dir, format, None)
        }
        Command::Simulate(inline) => {
            let config = inline.resolve(infer_simulation)?;
            let simulates = config.problem.is_simulation()
                || (matches!(config.problem, Problem::PmeBarenblatt | Problem::PmeMixing)
                    && config.final_time.is_some());
            if !simulates {
                return Err(usage_error(format!(
                    "'{}' has no simulation; use a *_simulate problem or give T for PME problems",
                    config.problem.tag()
                )));
            }
            run_config(config, &cli.output_dir, format, None)
        }
        Command::Barenblatt {
            m,
            mass,
            half_width,
            n,
        } => {
            let mut config = RunConfig::empty(Problem::PmeBarenblatt);
            config.m = Some(m);
            config.mass_parameter = Some(mass);
            config.half_width = half_width;
            config.n = n;
            config.validate()?;
            run_config(config, &cli.output_dir, format, None)
        }
        Command::GlZeros(inline) => {
            let mut config = inline.resolve(|_| Some(Problem::GlSimulate))?;
            if !matches!(config.problem, Problem::GlSimulate | Problem::GlProfile) {
                return Err(usage_error("gl-zeros needs a Ginzburg-Landau problem".into()));
            }
            config.problem = Problem::GlSimulate;
            if config.final_time.is_none() {
                config.final_time = Some(200.0);
            }
            config.validate()?;
            run_config(config, &cli.output_dir, format, None)
        }
        Command::Fluxes(inline) => {
            let mut config = inline.resolve(infer_profile)?;
            config.problem = match config.problem {
                Problem::RdsSimulate => Problem::RdsProfile,
                Problem::GlSimulate => Problem::GlProfile,
                Problem::TurbulenceSimulate => Problem::TurbulenceExact,
                other => other,
            };
            config.final_time = None;
            config.validate()?;
            run_config(
                config,
                &cli.output_dir,
                format,
                Some(&["fluxes", "multipliers", "multiplier", "zero_speed"]),
            )
        }
        Command::Check => {
            let outcomes = run_suite();
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            for o in &outcomes {
                let mark = if o.passed { "PASS" } else { "FAIL" };
                println!("{mark} {:<30} {:>7.2} s  {}", o.name, o.seconds, o.detail);
            }
            if let Some(dir) = &cli.output_dir {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join("checks.json");
                std::fs::write(&path, serde_json::to_string_pretty(&outcomes)? + "\n")
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            println!("{} of {} checks passed", outcomes.len() - failed, outcomes.len());
            if failed > 0 {
                bail!(Error::Validation {
                    parameter: "check".into(),
                    reason: format!("{failed} invariant check(s) failed"),
                });
            }
            Ok(())
        }
        Command::Plot {
            input,
            output,
            title,
            y_label,
        } => {
            let curves = read_csv(&input)?;
            let style = PlotStyle {
                title: title.unwrap_or_else(|| curves.name.clone()),
                x_label: curves.columns[0].clone(),
                y_label: y_label.unwrap_or_default(),
                ..PlotStyle::default()
            };
            let path = output.unwrap_or_else(|| input.with_extension("svg"));
            write_svg(&curves, &style, &path)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

/// 2 for solver failures, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_solver_failure() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
