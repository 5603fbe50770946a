//! `conelab`: command-line driver for the cone free-boundary toolkit.

mod commands;
mod params;
mod sweep;

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use params::Params;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(conelab_core::Error),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<UsageError> for CliError {
    fn from(e: UsageError) -> Self {
        CliError::Usage(e.0)
    }
}

impl From<conelab_core::Error> for CliError {
    fn from(e: conelab_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) | CliError::Usage(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "conelab", version, about = "Free boundaries and symmetric solutions on cones over S^2")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory for JSON/CSV artifacts.
    #[arg(long, global = true, default_value = "conelab-out")]
    out: PathBuf,
    /// Flat `key = value` file; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for sweeps (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Also write columnar plot files.
    #[arg(long, global = true)]
    plot_data: bool,
}

#[derive(Args, Debug, Default)]
struct Common {
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// `Nr,Nphi`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the radial profile for (beta, c).
    Profile {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        phi_max: Option<f64>,
    },
    /// Free-boundary angle of the symmetric solution.
    Phi0 {
        #[command(flatten)]
        common: Common,
    },
    /// Stability margin at one slope.
    Stability {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Bisect the stability threshold.
    CriticalC {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        lo: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        hi: Option<f64>,
        /// Stability reports sampled across [lo, hi].
        #[arg(long)]
        points: Option<usize>,
    },
    /// Discrete Steklov quotient on an annulus.
    Steklov {
        #[command(flatten)]
        common: Common,
        /// Outer radius R of the annulus [1/R, R].
        #[arg(long)]
        r_scale: Option<f64>,
    },
    /// Minimize the free-boundary energy with Phi_c (or half-space) data.
    Minimize {
        #[command(flatten)]
        common: Common,
        /// `symmetric` or `halfspace`.
        #[arg(long)]
        boundary: Option<String>,
        #[arg(long)]
        max_outer: Option<usize>,
        #[arg(long)]
        save_field: bool,
    },
    /// Weiss functional trace.
    Weiss {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        radii: Option<usize>,
        /// `symmetric` or `minimize`.
        #[arg(long)]
        source: Option<String>,
    },
    /// Barrier certification for one slope, or a search over `--cs start:stop:count`.
    Barriers {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        m: Option<f64>,
        #[arg(long)]
        cs: Option<String>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        lift_grid: Option<String>,
    },
    /// Cone slope threshold for k-planes through the vertex.
    Morgan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<u32>,
    },
    /// Map a command over `name=start:stop:count`; extra `--key value` pairs are passed through.
    Sweep {
        spec: String,
        command: String,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        rest: Vec<String>,
    },
}

fn fill_common(p: &mut Params, c: &Common) {
    p.set_opt("c", &c.c);
    p.set_opt("beta", &c.beta);
    p.set_opt("grid", &c.grid);
    p.set_opt("tol", &c.tol);
}

/// Command name and the flag layer of the parameter map.
fn flags(cmd: &Command, p: &mut Params) -> &'static str {
    match cmd {
        Command::Profile { common, step, phi_max } => {
            fill_common(p, common);
            p.set_opt("step", step);
            p.set_opt("phi-max", phi_max);
            "profile"
        }
        Command::Phi0 { common } => {
            fill_common(p, common);
            "phi0"
        }
        Command::Stability { common, step } => {
            fill_common(p, common);
            p.set_opt("step", step);
            "stability"
        }
        Command::CriticalC { common, lo, hi, points } => {
            fill_common(p, common);
            p.set_opt("lo", lo);
            p.set_opt("hi", hi);
            p.set_opt("points", points);
            "critical-c"
        }
        Command::Steklov { common, r_scale } => {
            fill_common(p, common);
            p.set_opt("r-scale", r_scale);
            "steklov"
        }
        Command::Minimize { common, boundary, max_outer, save_field } => {
            fill_common(p, common);
            p.set_opt("boundary", boundary);
            p.set_opt("max-outer", max_outer);
            if *save_field {
                p.set("save-field", true);
            }
            "minimize"
        }
        Command::Weiss { common, radii, source } => {
            fill_common(p, common);
            p.set_opt("radii", radii);
            p.set_opt("source", source);
            "weiss"
        }
        Command::Barriers { common, m, cs, points, lift_grid } => {
            fill_common(p, common);
            p.set_opt("m", m);
            p.set_opt("cs", cs);
            p.set_opt("points", points);
            p.set_opt("lift-grid", lift_grid);
            "barriers"
        }
        Command::Morgan { common, k } => {
            fill_common(p, common);
            p.set_opt("k", k);
            "morgan"
        }
        Command::Sweep { .. } => "sweep",
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn append_record(
    dir: &Path,
    command: &str,
    params: &Params,
    outputs: serde_json::Value,
    wall: f64,
) -> Result<(), CliError> {
    let record = json!({
        "command": command,
        "params": params.as_map(),
        "version": VERSION,
        "outputs": outputs,
        "wall_time_s": wall,
    });
    let mut f = OpenOptions::new().create(true).append(true).open(dir.join("runs.jsonl"))?;
    writeln!(f, "{record}")?;
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let start = Instant::now();
    let mut params = match &cli.config {
        Some(path) => Params::from_config_file(path)?,
        None => Params::default(),
    };
    let name = flags(&cli.command, &mut params);
    fs::create_dir_all(&cli.out)?;
    if let Command::Sweep { spec, command, rest } = &cli.command {
        sweep::pass_through(&mut params, rest)?;
        let raw = spec.clone();
        let spec: params::GridSpec = spec.parse()?;
        let report = sweep::run(&spec, command, &params, cli.jobs)?;
        let path = write_file(&cli.out, &format!("sweep_{command}.csv"), &report.csv)?;
        println!(
            "sweep {} over {}: {} rows, {} failed -> {}",
            command,
            spec.name,
            report.rows,
            report.failed,
            path.display()
        );
        append_record(
            &cli.out,
            "sweep",
            &params,
            json!({"spec": raw, "command": command, "rows": report.rows, "failed": report.failed}),
            start.elapsed().as_secs_f64(),
        )?;
        if report.rows > 0 && report.failed == report.rows {
            return Err(CliError::Core(conelab_core::Error::ConvergenceFailure("every sweep point failed".into())));
        }
        return Ok(());
    }
    let out = commands::run(name, &params)?;
    let json_text = serde_json::to_string_pretty(&out.json).expect("json value serializes");
    write_file(&cli.out, &format!("{name}.json"), &json_text)?;
    for (file, contents) in &out.files {
        write_file(&cli.out, file, contents)?;
    }
    if cli.plot_data {
        for (file, contents) in &out.plot {
            write_file(&cli.out, file, contents)?;
        }
    }
    println!("{}", out.summary);
    append_record(&cli.out, name, &params, out.json, start.elapsed().as_secs_f64())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
