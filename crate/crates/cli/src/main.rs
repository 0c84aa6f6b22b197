use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cvleak::config::{DirectionSel, Format};
use cvleak::output::{self, sidecar_path};
use cvleak::{run, CliError, Outcome, RunConfig, RunOptions};

/// Key-rate analysis of CV-QKD with IQ-modulator sideband leakage.
///
/// Exit status: 0 on success with a positive key, 1 on usage or config
/// errors, 2 when the computation shows no security.
#[derive(Parser)]
#[command(name = "cvleak", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Key fractions at a single parameter point (JSON).
    Keyrate(Common),
    /// One-axis parameter sweep (CSV, or JSON with --format json).
    Sweep(Common),
    /// Trusted-noise viability matrix (JSON).
    Table1(Common),
    /// Monte-Carlo estimation and key-rate closure check (JSON).
    Mc(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Reconciliation direction(s) that decide the exit status.
    #[arg(long, value_enum)]
    direction: Option<DirectionSel>,
    /// Optimize V_M at every point.
    #[arg(long)]
    optimize_vm: bool,
    /// Also compute the tolerable extra loss and its reduction by leakage.
    #[arg(long)]
    with_eta_max: bool,
    /// Estimate with k forced to 0 (mc only).
    #[arg(long)]
    assume_no_leakage: bool,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// RNG seed for mc, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn options(&self, cfg: &RunConfig) -> RunOptions {
        let o = &cfg.outputs;
        RunOptions {
            direction: self.direction.or(o.direction).unwrap_or_default(),
            optimize_vm: self.optimize_vm || o.optimize_vm,
            with_eta_max: self.with_eta_max || o.with_eta_max,
            assume_no_leakage: self.assume_no_leakage,
            seed: self.seed,
        }
    }

    fn out_path(&self, cfg: &RunConfig) -> Option<PathBuf> {
        self.out.clone().or_else(|| cfg.outputs.path.clone())
    }

    fn format(&self, cfg: &RunConfig) -> Format {
        self.format.or(cfg.outputs.format).unwrap_or_default()
    }
}

fn emit(path: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => output::write_file(p, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io("stdout".into(), e)),
    }
}

fn json_only(cmd: &str, format: Format) -> Result<(), CliError> {
    match format {
        Format::Json => Ok(()),
        Format::Csv => Err(CliError::Usage(format!("{cmd} writes JSON only"))),
    }
}

fn execute(cli: Cli) -> Result<Outcome, CliError> {
    let (name, common) = match &cli.command {
        Command::Keyrate(c) => ("keyrate", c),
        Command::Sweep(c) => ("sweep", c),
        Command::Table1(c) => ("table1", c),
        Command::Mc(c) => ("mc", c),
    };
    let cfg = RunConfig::load(&common.config)?;
    let opts = common.options(&cfg);
    let out = common.out_path(&cfg);
    if common.assume_no_leakage && name != "mc" {
        return Err(CliError::Usage("--assume-no-leakage applies to mc only".into()));
    }
    let explicit_format = common.format.or(cfg.outputs.format);

    match cli.command {
        Command::Keyrate(_) => {
            json_only(name, explicit_format.unwrap_or(Format::Json))?;
            let (res, outcome) = run::keyrate(&cfg, &opts)?;
            emit(out.as_ref(), &output::to_json(&res)?)?;
            Ok(outcome)
        }
        Command::Sweep(_) => {
            let res = run::sweep(&cfg, &opts)?;
            match common.format(&cfg) {
                Format::Json => emit(out.as_ref(), &output::to_json(&res)?)?,
                Format::Csv => {
                    let mut buf = Vec::new();
                    output::write_csv(&mut buf, &res.rows)?;
                    let text = String::from_utf8(buf).expect("csv output is UTF-8");
                    emit(out.as_ref(), &text)?;
                    if let Some(p) = &out {
                        output::write_file(&sidecar_path(p), output::to_json(&res.metadata)?.as_bytes())?;
                    }
                }
            }
            Ok(Outcome::Secure)
        }
        Command::Table1(_) => {
            json_only(name, explicit_format.unwrap_or(Format::Json))?;
            let res = run::table1(&cfg, &opts)?;
            emit(out.as_ref(), &output::to_json(&res)?)?;
            Ok(Outcome::Secure)
        }
        Command::Mc(_) => {
            json_only(name, explicit_format.unwrap_or(Format::Json))?;
            let (res, outcome) = run::mc(&cfg, &opts)?;
            emit(out.as_ref(), &output::to_json(&res)?)?;
            Ok(outcome)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(outcome) => ExitCode::from(outcome.code() as u8),
        Err(e) => {
            eprintln!("cvleak: {e}");
            ExitCode::from(1)
        }
    }
}
