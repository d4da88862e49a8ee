use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ybl_core::commands::{
    cmd_bubble_check, cmd_certify, cmd_metric_check, cmd_profile, cmd_scaling, cmd_sphere_check, exit_code,
    CommandOutput, MetricConfig, ProfileConfig, ScalingConfig, SphereConfig,
};
use ybl_core::metric::FD_STEP_FACTOR;
use ybl_core::LabError;

/// Verification lab for a Yamabe blow-up construction (dimensions 25 to 51).
#[derive(Parser, Debug)]
#[command(name = "ybl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Output {
    /// Write the JSON report here ("-" for stdout).
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Write the data table as CSV here.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Only print the final verdict line.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact certification of tau and the inequality families.
    Certify {
        #[arg(long, default_value_t = 25)]
        n_min: i64,
        #[arg(long, default_value_t = 51)]
        n_max: i64,
        #[command(flatten)]
        out: Output,
    },
    /// Sweep of F(0, eps) with derivatives and the centre Hessian.
    Profile {
        #[arg(long, default_value_t = 25)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        eps_min: f64,
        #[arg(long, default_value_t = 2.0)]
        eps_max: f64,
        #[arg(long, default_value_t = 301)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Sphere integral identities by exact moments and Monte Carlo.
    SphereCheck {
        #[arg(long, default_value_t = 25)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Bubble PDE, mass, Gram matrix and trace-free identities.
    BubbleCheck {
        #[arg(long, default_value_t = 25)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Curvature expansion, metric properties and error-term scaling.
    MetricCheck {
        #[arg(long, default_value_t = 25)]
        n: usize,
        #[arg(long, default_value_t = 0.02)]
        lambda: f64,
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Sample points per amplitude in the curvature study.
        #[arg(long, default_value_t = 100)]
        points: usize,
        /// Monte Carlo directions for the error-term norm.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = FD_STEP_FACTOR)]
        fd_step_factor: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Error-term and sup-norm exponents over a grid, glued construction.
    Scaling {
        #[arg(long, default_value_t = 25)]
        n: usize,
        /// Points per scaling axis.
        #[arg(long, default_value_t = 3)]
        grid: usize,
        #[arg(long, default_value_t = 0.02)]
        lambda: f64,
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 20)]
        n0: u32,
        #[arg(long, default_value_t = 60)]
        n_max: u32,
        #[command(flatten)]
        out: Output,
    },
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("YBL_THREADS") else {
        return Ok(());
    };
    let threads: usize = v.trim().parse().map_err(|_| format!("YBL_THREADS must be a positive integer, got {v:?}"))?;
    if threads == 0 {
        return Err("YBL_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| e.to_string())
}

// A closed pipe (e.g. `| head`) is not an error worth reporting.
fn write_stdout(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn emit(result: CommandOutput, out: &Output) -> Result<u8, LabError> {
    let report = &result.report;
    let to_stdout = out.json.as_deref().is_some_and(|p| p.as_os_str() == "-");
    match &out.json {
        Some(_) if to_stdout => write_stdout(&format!("{}\n", report.to_json()?)),
        Some(path) => report.write_json(path)?,
        None => {}
    }
    if let (Some(path), Some(table)) = (&out.csv, &result.table) {
        table.write_csv(path)?;
    }
    if !to_stdout {
        let summary = report.summary();
        if out.quiet {
            write_stdout(&summary.lines().last().map(|l| format!("{l}\n")).unwrap_or_default());
        } else {
            write_stdout(&summary);
        }
    }
    Ok(exit_code(report) as u8)
}

fn run(cli: Cli) -> Result<u8, LabError> {
    match cli.command {
        Command::Certify { n_min, n_max, out } => emit(cmd_certify(n_min, n_max)?, &out),
        Command::Profile { n, eps_min, eps_max, steps, seed, out } => {
            let cfg = ProfileConfig { n, eps_min, eps_max, steps, seed };
            emit(cmd_profile(&cfg)?, &out)
        }
        Command::SphereCheck { n, seed, samples, out } => emit(cmd_sphere_check(&SphereConfig::new(n, seed, samples))?, &out),
        Command::BubbleCheck { n, seed, out } => emit(cmd_bubble_check(n, seed)?, &out),
        Command::MetricCheck { n, lambda, mu, rho, seed, points, samples, fd_step_factor, out } => {
            let cfg = MetricConfig { n, lambda, mu, rho, seed, points, samples, fd_step_factor };
            emit(cmd_metric_check(&cfg)?, &out)
        }
        Command::Scaling { n, grid, lambda, mu, rho, seed, samples, n0, n_max, out } => {
            let cfg = ScalingConfig { n, grid, lambda, mu, rho, seed, samples, n0, n_max };
            emit(cmd_scaling(&cfg)?, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn defaults_match_the_documented_runs() {
        let cli = Cli::try_parse_from(["ybl", "metric-check"]).unwrap();
        let Command::MetricCheck { n, lambda, mu, rho, points, samples, .. } = cli.command else {
            panic!("wrong subcommand");
        };
        assert_eq!((n, lambda, mu, rho, points, samples), (25, 0.02, 0.5, 0.5, 100, 100_000));
        let cli = Cli::try_parse_from(["ybl", "certify", "--json", "-", "-q"]).unwrap();
        let Command::Certify { n_min, n_max, out } = cli.command else {
            panic!("wrong subcommand");
        };
        assert_eq!((n_min, n_max), (25, 51));
        assert!(out.quiet && out.json.is_some_and(|p| p.as_os_str() == "-"));
    }

    #[test]
    fn malformed_numbers_are_rejected() {
        assert!(Cli::try_parse_from(["ybl", "profile", "--steps", "many"]).is_err());
        assert!(Cli::try_parse_from(["ybl", "scaling", "--n0", "-3"]).is_err());
    }
}
