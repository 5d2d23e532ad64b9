use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ns1d::harness::{self, load_config};
use ns1d::Result;

#[derive(Parser, Debug)]
#[command(name = "ns1d", version, about = "1D degenerate-viscosity Navier-Stokes runs and studies")]
struct Cli {
    /// Output directory (default: $NS1D_OUT_DIR/<name> or out/<name>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run a scenario and write time series, snapshots and a summary.
    Run { config: PathBuf },
    /// Sweep the (alpha, gamma) product grid.
    Sweep {
        config: PathBuf,
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        alpha: Vec<f64>,
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        gamma: Vec<f64>,
    },
    /// Grid refinement study over the listed cell counts.
    Refine {
        config: PathBuf,
        #[arg(long = "N", num_args = 1.., value_delimiter = ',', required = true)]
        cells: Vec<usize>,
    },
    /// Viscosity-floor and mollifier study over the listed indices.
    Regularize {
        config: PathBuf,
        #[arg(long = "n", num_args = 1.., value_delimiter = ',', required = true)]
        n: Vec<u32>,
    },
    /// Parse and validate a scenario without running it.
    Validate { config: PathBuf },
}

fn execute(cli: &Cli) -> Result<()> {
    let out = |name: &str| harness::output_dir(cli.out.as_deref(), name);
    match &cli.cmd {
        Cmd::Run { config } => {
            let s = load_config(config)?.scenario;
            let dir = out(&s.name);
            let res = harness::run_scenario(&s, &dir)?;
            for sm in res.summaries() {
                println!(
                    "{} {:?}: t = {} steps = {} min rho = {:e} vacuum = {} gronwall = {}",
                    s.name,
                    sm.form,
                    sm.end_time,
                    sm.steps,
                    sm.min_rho,
                    sm.vacuum_time.map_or("no".to_string(), |t| format!("yes (t = {t})")),
                    sm.gronwall.as_str()
                );
            }
            println!("wrote {}", dir.display());
        }
        Cmd::Sweep { config, alpha, gamma } => {
            let s = load_config(config)?.scenario;
            let rows = harness::sweep(&s, alpha, gamma)?;
            let path = out(&s.name).join("sweep.csv");
            harness::write_sweep(&rows, &path)?;
            println!("{} rows -> {}", rows.len(), path.display());
        }
        Cmd::Refine { config, cells } => {
            let s = load_config(config)?.scenario;
            let study = harness::refinement_study(&s, cells)?;
            let path = out(&s.name).join("orders.csv");
            harness::write_orders(&study, &path)?;
            for r in &study.rows {
                let order = r.order.value().map_or("undefined".to_string(), |o| format!("{o:.3}"));
                println!("{:<28} {:<4} {:>6}/{:<6} order {order}", r.quantity, r.form, r.n_a, r.n_b);
            }
            println!("wrote {}", path.display());
        }
        Cmd::Regularize { config, n } => {
            let s = load_config(config)?.scenario;
            let study = harness::regularization_study(&s, n)?;
            let path = out(&s.name).join("regularization.csv");
            harness::write_regularization(&study, &path)?;
            println!("{} rows, {} trend inversions -> {}", study.rows.len(), study.inversions(), path.display());
        }
        Cmd::Validate { config } => report(config)?,
    }
    Ok(())
}

fn report(config: &Path) -> Result<()> {
    let loaded = load_config(config)?;
    let r = loaded.report;
    println!("{}: valid", loaded.scenario.name);
    if r.inside_theorem {
        println!("inside existence region");
    } else {
        println!("outside existence region: {}", r.violations().join(", "));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ns1d: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
