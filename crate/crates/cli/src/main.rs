use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use aoa_select::validate::{degree_grid, run_validation, CheckKind, ValidationPlan};
use aoa_select::{
    crlb_theta, efficiency_metric, error_tolerance_map, expected_crlb, expected_u, greedy_select,
    monte_carlo_variance, select_expected, uniform_thetas, ArrayGeometry, ChannelTruth, MonteCarloConfig,
    SelectionMethod, SelectionReport, SystemParams, TieBreak, TierDump, ToleranceSearch,
};

const THREADS_ENV: &str = "AOA_SELECT_THREADS";

#[derive(Parser, Debug)]
#[command(name = "aoa-select", version, about = "CRLB-driven antenna selection for planar-array AoA estimation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Array size parameter; the grid has (M+1)^2 antennas. Must be even.
    #[arg(long = "M", global = true, default_value_t = 6)]
    m: u32,
    #[arg(long, global = true, default_value_t = 0.5)]
    d_over_lambda: f64,
    /// SNR in dB.
    #[arg(long, global = true, default_value_t = 0.0, allow_hyphen_values = true)]
    rho_db: f64,
    /// Elevation in degrees, (0, 90].
    #[arg(long, global = true, default_value_t = 60.0)]
    phi_deg: f64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Table format for sweep commands. Reports are always JSON.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Expected,
    Realtime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodChoice {
    Expected,
    Realtime,
    Both,
}

impl MethodChoice {
    fn methods(self) -> Vec<SelectionMethod> {
        match self {
            MethodChoice::Expected => vec![SelectionMethod::Expected],
            MethodChoice::Realtime => vec![SelectionMethod::Realtime],
            MethodChoice::Both => vec![SelectionMethod::Expected, SelectionMethod::Realtime],
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CheckArg {
    Boundaries,
    Start,
    Expected,
    Ties,
    Mirror,
    Greedy,
    Half,
}

impl From<CheckArg> for CheckKind {
    fn from(c: CheckArg) -> Self {
        match c {
            CheckArg::Boundaries => CheckKind::Boundaries,
            CheckArg::Start => CheckKind::StartSets,
            CheckArg::Expected => CheckKind::ExpectedPrefix,
            CheckArg::Ties => CheckKind::TierTies,
            CheckArg::Mirror => CheckKind::Mirror,
            CheckArg::Greedy => CheckKind::Greedy,
            CheckArg::Half => CheckKind::HalfSearch,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// CRLB against azimuth for one selection method and antenna count.
    CrlbSweep {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long = "F")]
        f: usize,
        #[arg(long, default_value_t = 1.0)]
        theta_grid_deg: f64,
        /// Scan every candidate in the greedy loop instead of half the grid.
        #[arg(long)]
        full_search: bool,
    },
    /// Check the closed-form selectors against brute force. Exit code 1 on
    /// any failure.
    Validate {
        /// Checks to run; all by default.
        #[arg(long, value_enum, value_delimiter = ',')]
        checks: Vec<CheckArg>,
        /// Azimuth step of the start-set check.
        #[arg(long, default_value_t = 1.0)]
        theta_grid_deg: f64,
        /// Azimuth step of the greedy and half-search checks.
        #[arg(long, default_value_t = 15.0)]
        greedy_grid_deg: f64,
        #[arg(long = "F", value_delimiter = ',', default_value = "4,5,6")]
        f: Vec<usize>,
        /// Largest preliminary count in the offline-selection checks.
        #[arg(long = "Fp", default_value_t = 7)]
        f_p: usize,
        #[arg(long, default_value_t = 10_000)]
        mirror_instances: usize,
        /// Replace the closed-form start set by a perturbed one.
        #[arg(long)]
        corrupt_start: bool,
    },
    /// Monte Carlo variance of the two-stage estimator.
    Simulate {
        #[arg(long, value_enum, default_value_t = MethodChoice::Both)]
        method: MethodChoice,
        #[arg(long = "F", value_delimiter = ',', required = true)]
        f: Vec<usize>,
        #[arg(long = "Fp", default_value_t = 4)]
        f_p: usize,
        #[arg(long, default_value_t = 30.0, allow_hyphen_values = true)]
        theta_deg: f64,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 100)]
        snapshots: usize,
        #[arg(long, default_value_t = 0.2)]
        split: f64,
    },
    /// Largest preliminary-azimuth error the real-time set tolerates before
    /// the offline set does better.
    Tolerance {
        #[arg(long = "F", value_delimiter = ',', required = true)]
        f: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        theta_grid_deg: f64,
        #[arg(long, default_value_t = 45.0)]
        cap_deg: f64,
        #[arg(long, default_value_t = 0.05)]
        resolution_deg: f64,
    },
    /// 1/(F * mean CRLB) per method and antenna count.
    Efficiency {
        /// Antenna counts; 3..=(M+1)^2 when omitted.
        #[arg(long = "F", value_delimiter = ',')]
        f: Vec<usize>,
        #[arg(long, default_value_t = 360)]
        theta_points: usize,
    },
    /// Priority tiers of the offline selection as JSON.
    DumpTiers,
    /// Selected antennas for one azimuth as JSON.
    Select {
        #[arg(long, value_enum, default_value_t = Method::Realtime)]
        method: Method,
        #[arg(long, allow_hyphen_values = true)]
        theta_deg: f64,
        #[arg(long = "F")]
        f: usize,
        #[arg(long)]
        full_search: bool,
    },
}

#[derive(Serialize)]
struct CrlbRow {
    theta_deg: f64,
    crlb: f64,
}

#[derive(Serialize)]
struct SimulateRow {
    theta_deg: f64,
    #[serde(rename = "F")]
    f: usize,
    method: &'static str,
    crlb: f64,
    variance: f64,
    trials: usize,
}

#[derive(Serialize)]
struct EfficiencyRow {
    #[serde(rename = "F")]
    f: usize,
    method: &'static str,
    efficiency: f64,
}

#[derive(Serialize)]
struct ExpectedSelection {
    #[serde(rename = "M")]
    m: u32,
    #[serde(rename = "F")]
    f: usize,
    selected: Vec<aoa_select::Antenna>,
    expected_u: f64,
    expected_crlb: f64,
    crlb_theta: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        bail!("{THREADS_ENV} must be a positive integer, got 0");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_table<T: Serialize>(common: &Common, rows: &[T]) -> Result<()> {
    let mut w = sink(&common.out)?;
    match common.format {
        Format::Csv => {
            let mut cw = csv::Writer::from_writer(&mut w);
            for r in rows {
                cw.serialize(r)?;
            }
            cw.flush()?;
        }
        Format::Json => {
            serde_json::to_writer(&mut w, rows)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(common: &Common, value: &T) -> Result<()> {
    let mut w = sink(&common.out)?;
    serde_json::to_writer(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn setup(common: &Common) -> Result<(ArrayGeometry, SystemParams)> {
    let geom = ArrayGeometry::new(common.m, common.d_over_lambda)?;
    if !common.rho_db.is_finite() {
        bail!("--rho-db must be finite");
    }
    let rho = 10f64.powf(common.rho_db / 10.0);
    let params = SystemParams::new(&geom, rho, 1.0, common.phi_deg.to_radians())?;
    Ok((geom, params))
}

fn positive_step(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0 && v <= 360.0) {
        bail!("{name} must lie in (0, 360], got {v}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let common = &cli.common;
    let (geom, params) = setup(common)?;
    match cli.command {
        Command::CrlbSweep { method, f, theta_grid_deg, full_search } => {
            positive_step("--theta-grid-deg", theta_grid_deg)?;
            let grid = degree_grid(theta_grid_deg);
            let rows = match method {
                Method::Expected => {
                    let set = select_expected(&geom, f, TieBreak::default())?;
                    grid.iter()
                        .map(|&d| CrlbRow { theta_deg: d, crlb: crlb_theta(&set, d.to_radians(), &params) })
                        .collect::<Vec<_>>()
                }
                Method::Realtime => grid
                    .iter()
                    .map(|&d| {
                        let t = d.to_radians();
                        let (set, _) = greedy_select(&geom, t, f, &params, !full_search)?;
                        Ok(CrlbRow { theta_deg: d, crlb: crlb_theta(&set, t, &params) })
                    })
                    .collect::<Result<Vec<_>>>()?,
            };
            write_table(common, &rows)?;
            Ok(true)
        }
        Command::Validate {
            checks,
            theta_grid_deg,
            greedy_grid_deg,
            f,
            f_p,
            mirror_instances,
            corrupt_start,
        } => {
            positive_step("--theta-grid-deg", theta_grid_deg)?;
            positive_step("--greedy-grid-deg", greedy_grid_deg)?;
            let mut plan = ValidationPlan {
                start_step_deg: theta_grid_deg,
                greedy_step_deg: greedy_grid_deg,
                greedy_f: f,
                expected_f_max: f_p,
                mirror_instances,
                corrupt_start,
                seed: common.seed,
                ..ValidationPlan::default()
            };
            if !checks.is_empty() {
                plan.checks = checks.into_iter().map(CheckKind::from).collect();
            }
            let report = run_validation(&geom, &params, &plan)?;
            write_json(common, &report)?;
            for c in &report.checks {
                let verdict = if c.passed { "PASS" } else { "FAIL" };
                eprintln!("{verdict} {} ({} cases, {} failing)", c.name, c.cases, c.failures.len());
            }
            Ok(report.passed)
        }
        Command::Simulate { method, f, f_p, theta_deg, trials, snapshots, split } => {
            let truth = ChannelTruth::with_snr(theta_deg.to_radians(), params.phi, params.rho);
            let mut rows = Vec::new();
            for &count in &f {
                for m in method.methods() {
                    let mut cfg = MonteCarloConfig::new(geom, truth, m, count);
                    cfg.f_p = f_p;
                    cfg.trials = trials;
                    cfg.snapshots = snapshots;
                    cfg.split = split;
                    cfg.seed = common.seed;
                    let r = monte_carlo_variance(&cfg)?;
                    rows.push(SimulateRow {
                        theta_deg,
                        f: count,
                        method: m.name(),
                        crlb: r.crlb_reference,
                        variance: r.empirical_variance_theta,
                        trials: r.trials,
                    });
                }
            }
            write_table(common, &rows)?;
            Ok(true)
        }
        Command::Tolerance { f, theta_grid_deg, cap_deg, resolution_deg } => {
            positive_step("--theta-grid-deg", theta_grid_deg)?;
            if !(cap_deg > 0.0 && resolution_deg > 0.0) {
                bail!("--cap-deg and --resolution-deg must be positive");
            }
            let search = ToleranceSearch { cap_deg, resolution_deg };
            let rows = error_tolerance_map(&geom, &f, &degree_grid(theta_grid_deg), &params, search)?;
            write_table(common, &rows)?;
            Ok(true)
        }
        Command::Efficiency { f, theta_points } => {
            let counts = if f.is_empty() { (3..=geom.antenna_count()).collect() } else { f };
            let thetas = uniform_thetas(theta_points);
            let mut rows = Vec::new();
            for &count in &counts {
                for m in [SelectionMethod::Expected, SelectionMethod::Realtime] {
                    rows.push(EfficiencyRow {
                        f: count,
                        method: m.name(),
                        efficiency: efficiency_metric(&geom, m, count, &params, &thetas)?,
                    });
                }
            }
            write_table(common, &rows)?;
            Ok(true)
        }
        Command::DumpTiers => {
            write_json(common, &TierDump::new(&geom))?;
            Ok(true)
        }
        Command::Select { method, theta_deg, f, full_search } => {
            let theta = theta_deg.to_radians();
            match method {
                Method::Realtime => {
                    write_json(common, &SelectionReport::build(&geom, theta, f, &params, !full_search)?)?;
                }
                Method::Expected => {
                    let set = select_expected(&geom, f, TieBreak::default())?;
                    write_json(
                        common,
                        &ExpectedSelection {
                            m: geom.m(),
                            f,
                            selected: set.sorted_members(),
                            expected_u: expected_u(&set),
                            expected_crlb: expected_crlb(&set, &params)?,
                            crlb_theta: crlb_theta(&set, theta, &params),
                        },
                    )?;
                }
            }
            Ok(true)
        }
    }
}
