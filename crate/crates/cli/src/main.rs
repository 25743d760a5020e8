//! `langevin-lab` command-line front end.
//!
//! Exit codes: 0 success, 1 config error, 2 runtime error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, CommandFactory, FromArgMatches, Parser, Subcommand};
use langevin_lab::experiments::{lemma_a1, simsec, thm1, thm2, thm3, write_summary_and_metrics};
use langevin_lab::metrics::{general_position_check, lp_error_certificate_thm1, lp_error_certificate_thm2, MetricRow};
use langevin_lab::score_fields::{read_points_csv, Thm1Field, Thm2Field};
use langevin_lab::LabError;
use log::{error, info};

use config::{CertKind, ConfigError};

#[derive(Parser, Debug)]
#[command(
    name = "langevin-lab",
    version,
    about = "Langevin sampling experiments with adversarial and learned score estimates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file with `key = value` lines
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory [default: runs/<subcommand>]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Override the root seed from the config
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// More log output (repeatable)
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    /// Only log warnings and errors
    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Trajectories from N(0, I) against the single-trap field
    Thm1,
    /// Trajectories from the data points against the memorizing field
    Thm2,
    /// Cone occupancy under the cone-absorbing field
    Thm3,
    /// Monte Carlo exceedance of the OU supremum bound
    #[command(name = "lemma-a1")]
    LemmaA1,
    /// Train a denoiser and compare vanilla/fresh/train initializations
    Simsec,
    /// Analytic L^p score-error certificate
    #[command(name = "lp-cert")]
    LpCert,
    /// General-position check of a point set
    #[command(name = "gp-check")]
    GpCheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Thm1 => "thm1",
            Command::Thm2 => "thm2",
            Command::Thm3 => "thm3",
            Command::LemmaA1 => "lemma-a1",
            Command::Simsec => "simsec",
            Command::LpCert => "lp-cert",
            Command::GpCheck => "gp-check",
        }
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

fn runtime(e: LabError) -> Failure {
    Failure::Runtime(e.to_string())
}

fn invalid(e: LabError) -> Failure {
    Failure::Config(e.to_string())
}

fn command() -> clap::Command {
    Cli::command().after_long_help(config::keys_help())
}

fn main() -> ExitCode {
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Warn,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            error!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            error!("runtime error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let entries = config::load(cli.config.as_deref())?;
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(cli.command.name()));
    std::fs::create_dir_all(&out)
        .map_err(|e| Failure::Config(format!("cannot create output directory {}: {e}", out.display())))?;
    info!("{} -> {}", cli.command.name(), out.display());
    match cli.command {
        Command::Thm1 => {
            let mut c = config::thm1(&entries)?;
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            c.validate().map_err(invalid)?;
            let res = thm1::run(&c).map_err(runtime)?;
            thm1::write(&out, &c, &res).map_err(runtime)?;
            info!(
                "escapes {}/{} tv_lower_bound {:.6} certificate {:e}",
                res.escape.n_escaped, res.escape.n_trajectories, res.tv_lower_bound, res.lp_certificate.value
            );
        }
        Command::Thm2 => {
            let mut c = config::thm2(&entries)?;
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            c.validate().map_err(invalid)?;
            let res = thm2::run(&c).map_err(runtime)?;
            thm2::write(&out, &c, &res).map_err(runtime)?;
            match &res.simulation {
                Some(sim) => info!(
                    "escapes {}/{} tv_lower_bound {:.6} certificate {:e}",
                    sim.escape.n_escaped, sim.escape.n_trajectories, sim.tv_lower_bound, sim.lp_certificate.value
                ),
                None => {
                    return Err(Failure::Runtime(format!(
                        "anchors are not in general position: {}",
                        res.general_position.summary()
                    )))
                }
            }
        }
        Command::Thm3 => {
            let mut c = config::thm3(&entries)?;
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            c.validate().map_err(invalid)?;
            let res = thm3::run(&c).map_err(runtime)?;
            thm3::write(&out, &c, &res).map_err(runtime)?;
            for occ in &res.occupancy {
                info!(
                    "{}: cone occupancy at t={} is {:.4}",
                    occ.initialization.label(),
                    occ.times.last().copied().unwrap_or(0.0),
                    occ.fractions.last().copied().unwrap_or(0.0)
                );
            }
        }
        Command::LemmaA1 => {
            let mut c = config::lemma_a1(&entries)?;
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            c.validate().map_err(invalid)?;
            let res = lemma_a1::run(&c).map_err(runtime)?;
            lemma_a1::write(&out, &c, &res).map_err(runtime)?;
            for s in &res.per_alpha {
                info!("alpha {}: {}/{} exceedances", s.alpha, s.n_exceed, s.n_runs);
            }
        }
        Command::Simsec => {
            let mut c = config::simsec(&entries)?;
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            c.validate().map_err(invalid)?;
            if let Some(p) = &c.checkpoint {
                if !p.exists() {
                    return Err(Failure::Config(format!("checkpoint file {} does not exist", p.display())));
                }
            }
            let res = simsec::run_with_progress(&c, |msg| info!("{msg}")).map_err(runtime)?;
            simsec::write(&out, &c, &res).map_err(runtime)?;
        }
        Command::LpCert => {
            let mut c = config::lp_cert(&entries)?;
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            run_lp_cert(&out, &c)?;
        }
        Command::GpCheck => {
            let mut c = config::gp_check(&entries)?;
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            run_gp_check(&out, &c)?;
        }
    }
    Ok(())
}

fn read_points(path: &Path) -> Result<Vec<Vec<f64>>, Failure> {
    if !path.exists() {
        return Err(Failure::Config(format!("point file {} does not exist", path.display())));
    }
    read_points_csv(path).map_err(invalid)
}

fn cert_row(c: &config::LpCertConfig, n: usize, name: &str, value: f64) -> MetricRow {
    MetricRow {
        experiment: "lp_cert".into(),
        target: match c.kind {
            CertKind::Thm1 => "gaussian_far_mean".into(),
            CertKind::Thm2 => "standard_normal".into(),
        },
        algorithm: "certificate".into(),
        n_samples: n,
        d: c.d,
        seed: c.seed,
        metric_name: name.into(),
        metric_value: value,
    }
}

fn run_lp_cert(out: &Path, c: &config::LpCertConfig) -> Result<(), Failure> {
    let (cert, n) = match c.kind {
        CertKind::Thm1 => {
            let alpha = c.alpha.unwrap_or(Thm1Field::DEFAULT_ALPHA);
            (lp_error_certificate_thm1(c.d, c.p, alpha).map_err(invalid)?, 0)
        }
        CertKind::Thm2 => {
            let alpha = c.alpha.unwrap_or(Thm2Field::DEFAULT_ALPHA);
            let anchors = match &c.anchors {
                Some(p) => read_points(p)?,
                None => thm2::draw_anchors(c.d, c.n_anchors, c.seed).map_err(invalid)?,
            };
            (lp_error_certificate_thm2(&anchors, c.p, alpha).map_err(runtime)?, anchors.len())
        }
    };
    let rows = [
        cert_row(c, n, "lp_certificate", cert.value),
        cert_row(c, n, "lp_certificate_ln", cert.ln_value),
    ];
    write_summary_and_metrics(out, "lp_cert", c.seed, c, &cert, &rows).map_err(runtime)?;
    info!("certificate {:e} (ln {:.3})", cert.value, cert.ln_value);
    Ok(())
}

fn run_gp_check(out: &Path, c: &config::GpCheckConfig) -> Result<(), Failure> {
    let points = match &c.points {
        Some(p) => read_points(p)?,
        None => thm2::draw_anchors(c.d, c.n_points, c.seed).map_err(invalid)?,
    };
    let report = general_position_check(&points);
    let d = points.first().map_or(0, Vec::len);
    let rows = [MetricRow {
        experiment: "gp_check".into(),
        target: "points".into(),
        algorithm: "check".into(),
        n_samples: points.len(),
        d,
        seed: c.seed,
        metric_name: "general_position_pass".into(),
        metric_value: if report.pass { 1.0 } else { 0.0 },
    }];
    write_summary_and_metrics(out, "gp_check", c.seed, c, &report, &rows).map_err(runtime)?;
    info!("{}", report.summary());
    Ok(())
}
