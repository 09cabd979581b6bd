use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arh1::config::ExperimentConfig;
use arh1::estimators::{truncation_level, BasisTag};
use arh1::experiments::{
    gaussian_oracle, oracle_csv, rate_sweep, reproduce_table, run_experiment, Scale, RATE_GRID,
};
use arh1::quadrature::Grid;
use arh1::simulator::{
    assemble_curves, simulate_nondiagonal, simulate_spectrum, BandProfile, NonDiagonalModel,
};
use arh1::{config::GridSpec, config::ModelKind, Error, Result};
use clap::{Parser, Subcommand};

/// Simulation and estimation experiments for ARH(1) processes.
#[derive(Debug, Parser)]
#[command(name = "arh1", version)]
struct Cli {
    /// Key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Multiplier on the replication count, in (0, 1].
    #[arg(long = "scale-N", global = true, default_value_t = 1.0)]
    scale_replications: f64,
    /// Multiplier on every sample size, in (0, 1].
    #[arg(long = "scale-n", global = true, default_value_t = 1.0)]
    scale_n: f64,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Published replication counts and sample sizes (slow).
    #[arg(long, global = true)]
    full: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one replication at the first configured sample size.
    Simulate,
    /// Run the configured estimators over the configured sample sizes.
    Estimate,
    /// Compare Monte Carlo variances of the AR(1) path statistics with their formulas.
    Oracle,
    /// Reproduce one of the nine published tables.
    Table { id: u8 },
    /// Convergence-rate sweep of EMSE and its prediction bound.
    Rates,
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if !(cli.scale_n > 0.0 && cli.scale_n <= 1.0) || !(cli.scale_replications > 0.0 && cli.scale_replications <= 1.0) {
        return Err(Error::Config("scale factors must lie in (0, 1]".into()));
    }
    let mut ns: Vec<usize> = cfg.n_grid.iter().map(|&n| (n as f64 * cli.scale_n).round() as usize).collect();
    ns.dedup();
    cfg.n_grid = ns;
    cfg.replications = ((cfg.replications as f64 * cli.scale_replications).round() as usize).max(1);
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> PathBuf {
    match (cli.out.as_os_str() == "results", cfg.and_then(|c| c.out.clone())) {
        (true, Some(p)) => p,
        _ => cli.out.clone(),
    }
}

fn simulate(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    let n = cfg.n_grid[0];
    let series = match cfg.kind {
        ModelKind::Diagonal => simulate_spectrum(&cfg.model.spectrum(cfg.components), n, cfg.seed, 0)?,
        ModelKind::NonDiagonal => {
            let nd = NonDiagonalModel::banded(&cfg.model, cfg.components, BandProfile::default(), cfg.burn_in)?;
            simulate_nondiagonal(&nd, n, cfg.seed, 0)?
        }
    };
    let dir = out_dir(cli, Some(&cfg));
    std::fs::create_dir_all(&dir)?;
    series.write_csv(std::io::BufWriter::new(std::fs::File::create(dir.join("coefficients.csv"))?))?;
    if cfg.basis == BasisTag::Empirical {
        let grid = match cfg.grid {
            GridSpec::Step(h) => Grid::from_step(cfg.model.interval, h)?,
            GridSpec::Points(p) => Grid::uniform(cfg.model.interval, p)?,
        };
        let curves = assemble_curves(&series, &cfg.model, &grid)?;
        let mut text = String::from("i");
        for t in grid.points.iter() {
            text.push_str(&format!(",{t}"));
        }
        text.push('\n');
        for (i, row) in curves.curves.outer_iter().enumerate() {
            text.push_str(&i.to_string());
            for v in row {
                text.push_str(&format!(",{v:e}"));
            }
            text.push('\n');
        }
        std::fs::write(dir.join("curves.csv"), text)?;
    }
    for r in &cfg.rules {
        println!("n = {n}, rule {r}: k_n = {}", truncation_level(r, n));
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn report(table: &arh1::experiments::ResultTable, dir: &Path, stem: &str) -> Result<()> {
    let csv = table.write(dir, stem)?;
    table.write_plot_data(dir, stem)?;
    print!("{}", table.to_csv());
    eprintln!("wrote {}", csv.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate => simulate(cli),
        Command::Estimate => {
            let cfg = load(cli)?;
            let table = run_experiment(&cfg)?;
            report(&table, &out_dir(cli, Some(&cfg)), "estimate")
        }
        Command::Oracle => {
            let reps = ((5000.0 * cli.scale_replications).round() as usize).max(2);
            let rows = gaussian_oracle(&[0.0, 0.5, 0.9, 0.99], &[200, 2000], reps, cli.seed.unwrap_or(1))?;
            let text = oracle_csv(&rows);
            std::fs::create_dir_all(&cli.out)?;
            std::fs::write(cli.out.join("oracle.csv"), &text)?;
            print!("{text}");
            Ok(())
        }
        Command::Table { id } => {
            let scale = Scale { n: cli.scale_n, replications: cli.scale_replications, full: cli.full };
            let seed = match &cli.config {
                Some(p) => cli.seed.unwrap_or(ExperimentConfig::from_file(p)?.seed),
                None => cli.seed.unwrap_or(1),
            };
            let table = reproduce_table(*id, scale, seed)?;
            report(&table, &cli.out, &format!("table{id}"))
        }
        Command::Rates => {
            let ns: Vec<usize> = RATE_GRID.iter().map(|&n| (n as f64 * cli.scale_n).round() as usize).collect();
            let reps = ((100.0 * cli.scale_replications).round() as usize).max(2);
            let rep = rate_sweep(&ns, reps, 6.0, cli.seed.unwrap_or(1))?;
            rep.table.write(&cli.out, "rates")?;
            rep.write_plot_data(&cli.out)?;
            print!("{}", rep.table.to_csv());
            println!("emse slope {:.4} (r2 {:.4})", rep.emse.slope, rep.emse.r2);
            println!("ub slope {:.4} (r2 {:.4})", rep.ub.slope, rep.ub.r2);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("arh1: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
