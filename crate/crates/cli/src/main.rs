use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use phasefield_core::{output, Config, Error};

/// Allen-Cahn solver with stability monitors.
#[derive(Debug, Parser)]
#[command(name = "phasefield", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation; writes run.csv and summary.json.
    Run(Invocation),
    /// Run one simulation per time step in the [sweep] section.
    Sweep(Invocation),
    /// Convergence study driven by the [converge] section.
    Converge(Invocation),
    /// Print the step bound and hypothesis checks without stepping.
    Check(Invocation),
}

#[derive(Debug, Args)]
struct Invocation {
    /// Run-configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Override a config value, e.g. `--set scheme.dt=0.25`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory; defaults to output.path from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Everything fine.
const EXIT_OK: u8 = 0;
/// Bad config, bad input, or IO failure.
const EXIT_ERROR: u8 = 1;
/// A monitor failed while its hypotheses held.
const EXIT_VIOLATION: u8 = 2;

impl Invocation {
    fn load(&self) -> Result<Config, Error> {
        if !self.config.exists() {
            return Err(Error::Config(format!(
                "config file {} does not exist",
                self.config.display()
            )));
        }
        Config::load_with_overrides(&self.config, &self.overrides)
    }

    fn out_dir(&self, configured: &std::path::Path) -> PathBuf {
        self.out.clone().unwrap_or_else(|| configured.to_path_buf())
    }
}

fn threads_from_env() -> Option<usize> {
    std::env::var("PHASEFIELD_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

fn verdict(violated: bool) -> u8 {
    if violated {
        EXIT_VIOLATION
    } else {
        EXIT_OK
    }
}

fn cmd_run(inv: &Invocation) -> Result<u8, Error> {
    let cfg = inv.load()?.run_config()?;
    let result = phasefield_core::run(&cfg)?;
    let (csv, json) = output::write_run(&inv.out_dir(&cfg.output), &result)?;
    let s = &result.summary;
    println!(
        "{} steps, dt = {}, energy {} -> {}, range [{}, {}]",
        s.steps_completed, s.dt, s.initial_energy, s.final_energy, s.min_val, s.max_val
    );
    println!("wrote {} and {}", csv.display(), json.display());
    if let Some(v) = s.first_violation {
        error!(
            "{} violated at step {} under its hypotheses",
            v.monitor.name(),
            v.step
        );
    }
    Ok(verdict(s.first_violation.is_some()))
}

fn cmd_sweep(inv: &Invocation) -> Result<u8, Error> {
    let cfg = inv.load()?.sweep_config()?;
    let result = phasefield_core::sweep(&cfg, threads_from_env())?;
    let (csv, _) = output::write_sweep(&inv.out_dir(&cfg.base.output), &result)?;
    for row in &result.rows {
        if let Some(e) = &row.error {
            error!("dt = {}: {e}", row.dt);
        }
        if let Some(v) = row.first_violation {
            error!(
                "dt = {}: {} violated at step {}",
                row.dt,
                v.monitor.name(),
                v.step
            );
        }
    }
    println!(
        "{} rows, dt_max = {}; wrote {}",
        result.rows.len(),
        result.dt_max,
        csv.display()
    );
    Ok(verdict(result.any_active_violation()))
}

fn cmd_converge(inv: &Invocation) -> Result<u8, Error> {
    let cfg = inv.load()?.convergence_config()?;
    let table = phasefield_core::convergence_study(&cfg)?;
    let (csv, _) = output::write_convergence(&inv.out_dir(&cfg.base.output), &table)?;
    println!("{:>12} {:>12} {:>12} {:>8}", "dt", "dx", "error", "order");
    for row in &table.rows {
        let order = row
            .observed_order
            .map_or_else(|| "-".to_string(), |o| format!("{o:.3}"));
        println!(
            "{:>12.4e} {:>12.4e} {:>12.4e} {:>8}",
            row.dt, row.dx, row.error, order
        );
    }
    println!("wrote {}", csv.display());
    Ok(verdict(table.any_active_violation()))
}

fn cmd_check(inv: &Invocation) -> Result<u8, Error> {
    let config = inv.load()?;
    let p = config.potential()?;
    let bounds = p.stability_bounds()?;
    let report = p.validate_hypotheses();
    println!(
        "potential: {:?} on [{}, {}]",
        p.kind(),
        p.gamma_minus(),
        p.gamma_plus()
    );
    println!("max_fprime = {}", bounds.max_fprime);
    println!("L = {}", bounds.lipschitz_l);
    println!("dt_max = {}", bounds.dt_max);
    println!(
        "endpoints_vanish = {} (f(gamma_minus) = {:e}, f(gamma_plus) = {:e}, tol = {:e})",
        report.endpoints_vanish, report.f_at_gamma_minus, report.f_at_gamma_plus, report.tolerance
    );
    println!(
        "f_vanishes_at_zero = {} (f(0) = {:e}, gamma_minus < 0 < gamma_plus: {})",
        report.f_vanishes_at_zero, report.f_at_zero, report.zero_interior
    );
    if let Ok(cfg) = config.run_config() {
        match cfg.resolve_dt(&bounds) {
            Ok(dt) => println!("dt = {dt} (within bound: {})", dt <= bounds.dt_max),
            Err(e) => println!("dt unresolved: {e}"),
        }
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with 2 on usage errors, which is reserved for violations here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_OK });
        }
    };
    let (name, outcome) = match &cli.command {
        Command::Run(inv) => ("run", cmd_run(inv)),
        Command::Sweep(inv) => ("sweep", cmd_sweep(inv)),
        Command::Converge(inv) => ("converge", cmd_converge(inv)),
        Command::Check(inv) => ("check", cmd_check(inv)),
    };
    let code = outcome.unwrap_or_else(|e| {
        eprintln!("phasefield {name}: {e}");
        EXIT_ERROR
    });
    info!("{name} finished with exit code {code}");
    ExitCode::from(code)
}
