use clap::{Parser, Subcommand};
use hs_ctrl_cli::{cmd_list_presets, cmd_run, cmd_validate, RunArgs};
use std::path::PathBuf;

/// Simulator for closed-form robust control under time-varying hard and
/// soft constraints.
#[derive(Parser)]
#[command(name = "hs-ctrl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and export trajectory.csv, summary.txt and SVG plots.
    ///
    /// Exit codes: 0 run completed, 1 configuration error, 2 a barrier or
    /// funnel was breached during simulation.
    Run {
        /// Scenario file path or preset name (see `list-presets`).
        #[arg(long)]
        scenario: String,
        /// Override the integration step [s].
        #[arg(long)]
        dt: Option<f64>,
        /// Override the horizon [s].
        #[arg(long = "t-final")]
        t_final: Option<f64>,
        /// Override the controller variant: `semiglobal` or `global`.
        #[arg(long)]
        mode: Option<String>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Skip SVG generation.
        #[arg(long)]
        no_plots: bool,
    },
    /// Check the initial conditions and feasibility diagnostics only.
    Validate {
        /// Scenario file path or preset name.
        #[arg(long)]
        scenario: String,
    },
    /// List the embedded scenario presets.
    ListPresets,
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            scenario,
            dt,
            t_final,
            mode,
            out,
            no_plots,
        } => cmd_run(&RunArgs {
            scenario,
            dt,
            t_final,
            mode,
            out,
            plots: !no_plots,
        }),
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::ListPresets => cmd_list_presets(),
    };
    std::process::exit(code);
}
