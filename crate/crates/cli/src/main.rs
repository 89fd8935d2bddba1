use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use colltherm_cli::commands::selftest;
use colltherm_cli::config::Interaction;
use colltherm_cli::{plot_script, run, CliError, Command, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "thermo", version, about = "Collisional thermometry sweeps and single-point evaluations")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Delta / F_th over (gamma tau, nbar), with the advantage region.
    Fig1a(Opts),
    /// Mutual information and discord of adjacent ancillas.
    Fig1b(Opts),
    /// Parameter interdependence R for (nbar, gamma) at two ancillas.
    Fig1c(Opts),
    /// Averaged over deterministic Delta for the configured waiting-time law.
    Fig2(Opts),
    /// Per-ancilla QFI against mean gamma tau for several Weibull shapes.
    Fig3(Opts),
    /// Every quantity at one parameter point, as JSON.
    Compute(Opts),
    /// Quick physics checks; exits 3 if any fails.
    Selftest(Opts),
}

#[derive(Args, Clone)]
struct Opts {
    /// JSON config; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "THERMO_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    nbar: Option<f64>,
    #[arg(long = "gamma-tau")]
    gamma_tau: Option<f64>,
    /// Weibull shape of the waiting-time law.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long = "n-ancillas")]
    n_ancillas: Option<usize>,
    #[arg(long, value_parser = parse_interaction)]
    interaction: Option<Interaction>,
    #[arg(long = "g-tau")]
    g_tau: Option<f64>,
    /// Also write a gnuplot script next to --out.
    #[arg(long = "plot-script")]
    plot_script: bool,
}

fn parse_interaction(s: &str) -> Result<Interaction, String> {
    match s {
        "zz" => Ok(Interaction::Zz),
        "swap" => Ok(Interaction::Swap),
        _ => Err(format!("expected zz or swap, got {s}")),
    }
}

impl Opts {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            nbar: self.nbar,
            gamma_tau: self.gamma_tau,
            k: self.k,
            n_ancillas: self.n_ancillas,
            interaction: self.interaction,
            g_tau: self.g_tau,
        }
    }
}

fn emit(opts: &Opts, command: Option<Command>, text: &str) -> Result<(), CliError> {
    match &opts.out {
        Some(path) => {
            std::fs::write(path, text)?;
            if let (true, Some(cmd)) = (opts.plot_script, command) {
                if let Some(script) = plot_script(cmd, path) {
                    std::fs::write(path.with_extension("gp"), script)?;
                }
            }
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn execute(cmd: Cmd) -> Result<bool, CliError> {
    let (command, opts) = match cmd {
        Cmd::Fig1a(o) => (Some(Command::Fig1a), o),
        Cmd::Fig1b(o) => (Some(Command::Fig1b), o),
        Cmd::Fig1c(o) => (Some(Command::Fig1c), o),
        Cmd::Fig2(o) => (Some(Command::Fig2), o),
        Cmd::Fig3(o) => (Some(Command::Fig3), o),
        Cmd::Compute(o) => (Some(Command::Compute), o),
        Cmd::Selftest(o) => (None, o),
    };
    if let Some(n) = opts.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = RunConfig::load(opts.config.as_deref(), &opts.overrides())?;
    match command {
        Some(c) => {
            emit(&opts, Some(c), &run(c, &cfg)?)?;
            Ok(true)
        }
        None => {
            let checks = selftest(cfg.seed)?;
            let text: String = checks.iter().map(|c| c.line() + "\n").collect();
            emit(&opts, None, &text)?;
            Ok(checks.iter().all(|c| c.pass))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("thermo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
