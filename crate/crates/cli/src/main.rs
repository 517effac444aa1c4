use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use avqds_core::experiment::artifact::write_atomic;
use avqds_core::experiment::compare::cmd_compare;
use avqds_core::experiment::sweep::cmd_sweep;
use avqds_core::experiment::{cmd_run, exit_code, set_threads};
use avqds_core::Result;

#[derive(Parser)]
#[command(name = "avqds", version, about = "Adaptive variational quantum dynamics experiments")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Accepted for scripts; runs never use random numbers.
    #[arg(long, global = true)]
    seedless: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two run directories (the second is the reference).
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        /// Restrict the comparison to test times in [T0, T1].
        #[arg(long, num_args = 2, value_names = ["T0", "T1"])]
        window: Option<Vec<f64>>,
        /// Also write the report as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a config template over a parameter grid.
    Sweep {
        template: PathBuf,
        /// e.g. `model.n=4:8;t_final=3,6`
        #[arg(long)]
        grid: String,
        /// Times at which N_cx is tabulated, comma separated.
        #[arg(long, value_delimiter = ',')]
        cuts: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out } => {
            let (dir, meta) = cmd_run(&config, out.as_deref())?;
            println!(
                "{}: {} records, N_theta = {}, N_cx = {}, status {}",
                dir.display(),
                meta.n_records,
                meta.final_n_theta,
                meta.final_n_cx,
                meta.status
            );
        }
        Command::Compare { run_a, run_b, window, out } => {
            let window = window.map(|w| (w[0], w[1]));
            let report = cmd_compare(&run_a, &run_b, window)?;
            print!("{}", report.to_csv());
            if let Some(path) = out {
                write_atomic(&path, serde_json::to_string_pretty(&report)?.as_bytes())?;
            }
        }
        Command::Sweep { template, grid, cuts, out } => {
            let report = cmd_sweep(&template, &grid, &cuts, out.as_deref())?;
            print!("{}", report.to_csv()?);
            for f in &report.fits {
                if let Some(p) = &f.power_law {
                    println!("fit {} [{}]: {:.4} N^{:.4} (rss {:.3e})", f.quantity, f.group, p.a, p.alpha, p.rss);
                }
                if let Some(e) = &f.exponential {
                    println!("fit {} [{}]: {:.4} (e^(N/{:.4}) - 1) (rss {:.3e})", f.quantity, f.group, e.b, e.beta, e.rss);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        set_threads(n.max(1));
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
