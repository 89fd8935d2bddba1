//! Library half of the `thermo` binary: configuration, the figure and
//! single-point commands, and CSV rendering. Kept separate from `main.rs` so
//! integration tests can call commands without spawning processes.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::path::Path;

use thiserror::Error;

pub use config::{Overrides, RunConfig};

/// Figure and single-point commands that produce a file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Fig1a,
    Fig1b,
    Fig1c,
    Fig2,
    Fig3,
    Compute,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fig1a => "fig1a",
            Command::Fig1b => "fig1b",
            Command::Fig1c => "fig1c",
            Command::Fig2 => "fig2",
            Command::Fig3 => "fig3",
            Command::Compute => "compute",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error(transparent)]
    Core(#[from] colltherm::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// 2 for bad input, 3 for numerical failure, 4 for size limits.
    pub fn exit_code(&self) -> i32 {
        use colltherm::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Resource(_) => 4,
            CliError::Core(e) => match e {
                E::DimensionGuard { .. } => 4,
                E::InvalidParameter(_) | E::DimensionMismatch { .. } | E::InvalidSubsystems(_) => 2,
                _ => 3,
            },
        }
    }
}

/// Runs a command and returns the text to write.
pub fn run(command: Command, cfg: &RunConfig) -> Result<String, CliError> {
    let name = command.name();
    let table = match command {
        Command::Fig1a => commands::fig1a(cfg)?,
        Command::Fig1b => commands::fig1b(cfg)?,
        Command::Fig1c => commands::fig1c(cfg)?,
        Command::Fig2 => commands::fig2(cfg)?,
        Command::Fig3 => commands::fig3(cfg)?,
        Command::Compute => return Ok(commands::render_compute(&commands::compute(cfg)?)),
    };
    Ok(table.render(name, cfg))
}

/// A gnuplot script that draws `csv` (a file written by `command`).
pub fn plot_script(command: Command, csv: &Path) -> Option<String> {
    let file = csv.display();
    let head = format!("set datafile separator ','\nset datafile commentschars '#'\nfile = '{file}'\n");
    let body = match command {
        Command::Fig1a | Command::Fig1b | Command::Fig1c | Command::Fig2 => {
            let label = match command {
                Command::Fig1a => "log10(Delta / F_th)",
                Command::Fig1b => "mutual information (nats)",
                Command::Fig1c => "R",
                _ => "log10(Delta_avg / Delta_det)",
            };
            format!(
                "set logscale x\nset xlabel 'gamma tau'\nset ylabel 'nbar'\nset cblabel '{label}'\n\
                 set view map\nsplot file every ::1 using 1:2:3 with points pointtype 5 palette notitle\n"
            )
        }
        Command::Fig3 => "set multiplot layout 1,2\n\
             set logscale x\nset xlabel 'mean gamma tau'\nset ylabel 'QFI per ancilla / F_th'\n\
             plot file every ::1 using (strcol(1) eq 'qfi' ? $3 : 1/0):4 with lines title 'all series'\n\
             unset logscale x\nset xlabel 't / mean'\nset ylabel 'density'\nset xrange [0:3]\n\
             plot file every ::1 using (strcol(1) eq 'pdf' ? $3 : 1/0):4 with lines title 'inset'\n\
             unset multiplot\n"
            .to_string(),
        Command::Compute => return None,
    };
    Some(head + &body)
}
