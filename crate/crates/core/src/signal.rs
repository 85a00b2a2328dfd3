//! Synthetic pilot snapshots, a grid-search ML estimator, and the Monte Carlo
//! drivers built on them.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::crlb::{crlb_theta, nearly_equal, SystemParams};
use crate::error::{Error, Result};
use crate::expected::{select_expected, TieBreak};
use crate::geometry::{Antenna, ArrayGeometry, SelectionSet};
use crate::realtime::{greedy_select, preliminary_snapshot_count, two_stage_select, TwoStageConfig};

/// Ground truth of one simulated link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelTruth {
    pub theta: f64,
    pub phi: f64,
    pub h: Complex64,
    pub pilot_power: f64,
    pub noise_var: f64,
}

impl ChannelTruth {
    /// Unit channel and pilot power with the noise set by `rho` (linear).
    pub fn with_snr(theta: f64, phi: f64, rho: f64) -> Self {
        Self {
            theta,
            phi,
            h: Complex64::new(1.0, 0.0),
            pilot_power: 1.0,
            noise_var: 1.0 / rho,
        }
    }

    pub fn rho(&self) -> f64 {
        self.pilot_power / self.noise_var
    }

    pub fn params(&self, geom: &ArrayGeometry) -> Result<SystemParams> {
        SystemParams::new(geom, self.rho(), self.h.norm_sqr(), self.phi)
    }
}

/// Phase `β·sinφ·(x cosθ + y sinθ)` of one antenna.
fn phase(beta: f64, a: Antenna, theta: f64, phi: f64) -> f64 {
    let (st, ct) = theta.sin_cos();
    beta * phi.sin() * (a.x as f64 * ct + a.y as f64 * st)
}

/// Array response over `set`, in member order. Element `(x, y)` is
/// `exp(−jβ sinφ (x cosθ + y sinθ))`, unity at the reference antenna.
pub fn steering_vector(geom: &ArrayGeometry, set: &SelectionSet, theta: f64, phi: f64) -> Vec<Complex64> {
    set.members()
        .iter()
        .map(|&a| Complex64::from_polar(1.0, -phase(geom.beta(), a, theta, phi)))
        .collect()
}

/// Pilot observations over the full grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotBatch {
    geom: ArrayGeometry,
    pilots: Vec<Complex64>,
    /// One row-major full-grid observation vector per snapshot.
    observations: Vec<Vec<Complex64>>,
}

/// Borrowed contiguous range of snapshots.
#[derive(Debug, Clone, Copy)]
pub struct SnapshotView<'a> {
    geom: &'a ArrayGeometry,
    pilots: &'a [Complex64],
    observations: &'a [Vec<Complex64>],
}

impl SnapshotBatch {
    pub fn new(geom: ArrayGeometry, pilots: Vec<Complex64>, observations: Vec<Vec<Complex64>>) -> Result<Self> {
        if pilots.len() != observations.len() {
            return Err(Error::InvalidParameter("one pilot per snapshot required".into()));
        }
        if observations.iter().any(|y| y.len() != geom.antenna_count()) {
            return Err(Error::InvalidParameter(format!(
                "observations must cover all {} antennas",
                geom.antenna_count()
            )));
        }
        Ok(Self { geom, pilots, observations })
    }

    pub fn len(&self) -> usize {
        self.pilots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pilots.is_empty()
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geom
    }

    pub fn pilots(&self) -> &[Complex64] {
        &self.pilots
    }

    pub fn observations(&self) -> &[Vec<Complex64>] {
        &self.observations
    }

    pub fn view(&self) -> SnapshotView<'_> {
        SnapshotView {
            geom: &self.geom,
            pilots: &self.pilots,
            observations: &self.observations,
        }
    }

    /// First `k` snapshots and the rest.
    pub fn split_at(&self, k: usize) -> (SnapshotView<'_>, SnapshotView<'_>) {
        let (p0, p1) = self.pilots.split_at(k);
        let (o0, o1) = self.observations.split_at(k);
        (
            SnapshotView { geom: &self.geom, pilots: p0, observations: o0 },
            SnapshotView { geom: &self.geom, pilots: p1, observations: o1 },
        )
    }
}

impl SnapshotView<'_> {
    pub fn len(&self) -> usize {
        self.pilots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pilots.is_empty()
    }
}

/// `y_t = a(θ, φ)·h·s_t + n_t` with constant-modulus pilots `s_t = √p_r` and
/// circular Gaussian noise. Deterministic in `seed`.
pub fn simulate_snapshots(geom: &ArrayGeometry, truth: &ChannelTruth, t: usize, seed: u64) -> Result<SnapshotBatch> {
    if t == 0 {
        return Err(Error::InvalidParameter("snapshot count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let response: Vec<Complex64> = crate::geometry::enumerate_grid(geom)
        .into_iter()
        .map(|a| Complex64::from_polar(1.0, -phase(geom.beta(), a, truth.theta, truth.phi)) * truth.h)
        .collect();
    let sigma = (truth.noise_var / 2.0).sqrt();
    let pilot = Complex64::new(truth.pilot_power.sqrt(), 0.0);
    let mut observations = Vec::with_capacity(t);
    for _ in 0..t {
        let y = response
            .iter()
            .map(|&r| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                r * pilot + Complex64::new(sigma * re, sigma * im)
            })
            .collect();
        observations.push(y);
    }
    SnapshotBatch::new(*geom, vec![pilot; t], observations)
}

/// Azimuth/elevation search grid with successive local refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchGrid {
    /// Coarse azimuth step over `[0, 2π)`, radians.
    pub theta_step: f64,
    /// Coarse elevation step over `(0, π/2]`, radians.
    pub phi_step: f64,
    pub fine_theta_step: f64,
    pub fine_phi_step: f64,
    /// Restricts the coarse azimuth search to `[lower, upper]` (may wrap).
    pub window: Option<(f64, f64)>,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self {
            theta_step: 1f64.to_radians(),
            phi_step: 5f64.to_radians(),
            fine_theta_step: 0.02f64.to_radians(),
            fine_phi_step: 0.1f64.to_radians(),
            window: None,
        }
    }
}

impl SearchGrid {
    /// Coarse grid only, no refinement.
    pub fn coarse_only(mut self) -> Self {
        self.fine_theta_step = self.theta_step;
        self.fine_phi_step = self.phi_step;
        self
    }

    pub fn with_window(mut self, center: f64, half_width: f64) -> Self {
        self.window = Some((center - half_width, center + half_width));
        self
    }

    fn in_window(&self, theta: f64) -> bool {
        match self.window {
            None => true,
            Some((lo, hi)) => (theta - lo).rem_euclid(2.0 * PI) <= hi - lo + 1e-12,
        }
    }
}

/// One ML estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub theta: f64,
    pub phi: f64,
    /// Concentrated log-likelihood up to constants, `|aᴴz|² / ‖a‖²`.
    pub objective: f64,
}

struct Matched {
    positions: Vec<(f64, f64)>,
    /// `Σ_t conj(s_t)·y_t` restricted to the selected antennas.
    z: Vec<Complex64>,
    beta: f64,
}

impl Matched {
    fn new(view: &SnapshotView<'_>, set: &SelectionSet) -> Result<Self> {
        let mut z = vec![Complex64::new(0.0, 0.0); set.len()];
        let idx: Vec<usize> = set
            .members()
            .iter()
            .map(|&a| view.geom.index_of(a))
            .collect::<Result<_>>()?;
        for (s, y) in view.pilots.iter().zip(view.observations) {
            let sc = s.conj();
            for (zi, &i) in z.iter_mut().zip(&idx) {
                *zi += sc * y[i];
            }
        }
        Ok(Self {
            positions: set.members().iter().map(|a| (a.x as f64, a.y as f64)).collect(),
            z,
            beta: view.geom.beta(),
        })
    }

    fn objective(&self, theta: f64, phi: f64) -> f64 {
        let (st, ct) = theta.sin_cos();
        let k = self.beta * phi.sin();
        let (u, v) = (k * ct, k * st);
        let acc: Complex64 = self
            .positions
            .iter()
            .zip(&self.z)
            .map(|(&(x, y), &z)| Complex64::from_polar(1.0, u * x + v * y) * z)
            .sum();
        acc.norm_sqr() / self.positions.len() as f64
    }
}

fn phi_axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let lo = lo.max(step.min(FRAC_PI_2) * 1e-3);
    let hi = hi.min(FRAC_PI_2);
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut v: Vec<f64> = (0..=n).map(|k| lo + k as f64 * step).collect();
    if (hi - v[v.len() - 1]) > 1e-12 {
        v.push(hi);
    }
    v
}

/// Maximizes the concentrated likelihood over `grid`; the channel gain is
/// eliminated in closed form. Only observations of antennas in `set` are read.
pub fn ml_estimate(view: &SnapshotView<'_>, set: &SelectionSet, grid: &SearchGrid) -> Result<Estimate> {
    if set.is_empty() || view.is_empty() {
        return Err(Error::InvalidParameter("estimation needs antennas and snapshots".into()));
    }
    let matched = Matched::new(view, set)?;
    let n_theta = (2.0 * PI / grid.theta_step).round() as usize;
    let thetas: Vec<f64> = (0..n_theta)
        .map(|k| k as f64 * grid.theta_step)
        .filter(|&t| grid.in_window(t))
        .collect();
    if thetas.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let phis = phi_axis(grid.phi_step, FRAC_PI_2, grid.phi_step);

    let mut best = Estimate { theta: thetas[0], phi: phis[0], objective: f64::NEG_INFINITY };
    let consider = |theta: f64, phi: f64, best: &mut Estimate| {
        let o = matched.objective(theta, phi);
        if o > best.objective {
            *best = Estimate { theta, phi, objective: o };
        }
    };
    for &t in &thetas {
        for &p in &phis {
            consider(t, p, &mut best);
        }
    }

    let (mut ts, mut ps) = (grid.theta_step, grid.phi_step);
    while ts > grid.fine_theta_step * (1.0 + 1e-9) || ps > grid.fine_phi_step * (1.0 + 1e-9) {
        let nts = (ts / 10.0).max(grid.fine_theta_step);
        let nps = (ps / 10.0).max(grid.fine_phi_step);
        let (ct, cp) = (best.theta, best.phi);
        let kt = (ts / nts).round() as i64;
        for i in -kt..=kt {
            let t = ct + i as f64 * nts;
            for p in phi_axis(cp - ps, cp + ps, nps) {
                consider(t, p, &mut best);
            }
        }
        ts = nts;
        ps = nps;
    }
    best.theta = best.theta.rem_euclid(2.0 * PI);
    Ok(best)
}

/// Wraps an angle difference to `(−π, π]`.
pub fn wrap_angle(d: f64) -> f64 {
    let w = d.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMethod {
    /// Offline set minimizing the azimuth-averaged CRLB.
    Expected,
    /// Two-stage real-time selection.
    Realtime,
}

impl SelectionMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionMethod::Expected => "expected",
            SelectionMethod::Realtime => "realtime",
        }
    }
}

/// Aggregate of repeated estimation trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationResult {
    /// Circular mean of the azimuth estimates.
    pub theta_hat: f64,
    pub phi_hat: f64,
    pub trials: usize,
    /// Mean squared azimuth error around the true azimuth, rad².
    pub empirical_variance_theta: f64,
    /// Mean over trials of the CRLB of the final set, divided by the number
    /// of snapshots the final estimate used.
    pub crlb_reference: f64,
    /// Set when only one trial ran and no spread can be estimated.
    pub degenerate_sample: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub geom: ArrayGeometry,
    pub truth: ChannelTruth,
    pub method: SelectionMethod,
    pub f: usize,
    pub f_p: usize,
    pub trials: usize,
    pub snapshots: usize,
    pub split: f64,
    pub seed: u64,
    pub grid: SearchGrid,
    pub half_search: bool,
}

impl MonteCarloConfig {
    pub fn new(geom: ArrayGeometry, truth: ChannelTruth, method: SelectionMethod, f: usize) -> Self {
        Self {
            geom,
            truth,
            method,
            f,
            f_p: 4,
            trials: 500,
            snapshots: 100,
            split: 0.2,
            seed: 0,
            grid: SearchGrid::default(),
            half_search: true,
        }
    }
}

struct TrialOutcome {
    theta: f64,
    phi: f64,
    crlb: f64,
}

fn run_trial(cfg: &MonteCarloConfig, params: &SystemParams, trial: usize) -> Result<TrialOutcome> {
    let seed = cfg.seed.wrapping_add(trial as u64);
    let batch = simulate_snapshots(&cfg.geom, &cfg.truth, cfg.snapshots, seed)?;
    let (set, estimate, used) = match cfg.method {
        SelectionMethod::Realtime => {
            let mut ts = TwoStageConfig::new(cfg.f_p, cfg.f);
            ts.split = cfg.split;
            ts.grid = cfg.grid;
            ts.half_search = cfg.half_search;
            let out = two_stage_select(&cfg.geom, &batch, &ts, params)?;
            (out.selection, out.final_estimate, out.main_snapshots)
        }
        SelectionMethod::Expected => {
            // same main-stage snapshot budget as the real-time pipeline
            let k = preliminary_snapshot_count(batch.len(), cfg.split)?;
            let (_, late) = batch.split_at(k);
            let set = select_expected(&cfg.geom, cfg.f, TieBreak::default())?;
            let est = ml_estimate(&late, &set, &cfg.grid)?;
            (set, est, late.len())
        }
    };
    Ok(TrialOutcome {
        theta: estimate.theta,
        phi: estimate.phi,
        crlb: crlb_theta(&set, cfg.truth.theta, params) / used as f64,
    })
}

/// Independent trials (trial `i` seeded `seed + i`) through the configured
/// pipeline. Trials run in parallel; the result does not depend on
/// scheduling.
pub fn monte_carlo_variance(cfg: &MonteCarloConfig) -> Result<EstimationResult> {
    if cfg.trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let params = cfg.truth.params(&cfg.geom)?;
    let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, &params, i))
        .collect::<Result<_>>()?;
    let n = outcomes.len() as f64;
    let (s, c) = outcomes
        .iter()
        .fold((0.0, 0.0), |(s, c), o| (s + o.theta.sin(), c + o.theta.cos()));
    let theta_hat = s.atan2(c).rem_euclid(2.0 * PI);
    let phi_hat = outcomes.iter().map(|o| o.phi).sum::<f64>() / n;
    let crlb_reference = outcomes.iter().map(|o| o.crlb).sum::<f64>() / n;
    let degenerate = cfg.trials == 1;
    let variance = if degenerate {
        0.0
    } else {
        outcomes
            .iter()
            .map(|o| wrap_angle(o.theta - cfg.truth.theta).powi(2))
            .sum::<f64>()
            / n
    };
    Ok(EstimationResult {
        theta_hat,
        phi_hat,
        trials: cfg.trials,
        empirical_variance_theta: variance,
        crlb_reference,
        degenerate_sample: degenerate,
    })
}

/// CRLB at `theta` of the real-time set chosen for a preliminary azimuth off
/// by `error` radians, taking the worse of `theta ± error`.
pub fn realtime_crlb_with_error(
    geom: &ArrayGeometry,
    theta: f64,
    error: f64,
    f: usize,
    params: &SystemParams,
) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for sign in [-1.0, 1.0] {
        let tp = (theta + sign * error).rem_euclid(2.0 * PI);
        let (set, _) = greedy_select(geom, tp, f, params, true)?;
        worst = worst.max(crlb_theta(&set, theta, params));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToleranceRow {
    pub theta_deg: f64,
    #[serde(rename = "F")]
    pub f: usize,
    pub tol_deg: f64,
}

/// Search settings for [`error_tolerance_map`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceSearch {
    pub cap_deg: f64,
    pub resolution_deg: f64,
}

impl Default for ToleranceSearch {
    fn default() -> Self {
        Self { cap_deg: 45.0, resolution_deg: 0.05 }
    }
}

/// For each `(θ, F)`, the largest preliminary-azimuth error (degrees) for
/// which the real-time set still does at least as well as the expected set,
/// found by bisection on `[0, cap]`.
pub fn error_tolerance_map(
    geom: &ArrayGeometry,
    f_values: &[usize],
    theta_grid_deg: &[f64],
    params: &SystemParams,
    search: ToleranceSearch,
) -> Result<Vec<ToleranceRow>> {
    let jobs: Vec<(f64, usize)> = theta_grid_deg
        .iter()
        .flat_map(|&t| f_values.iter().map(move |&f| (t, f)))
        .collect();
    let mut rows: Vec<ToleranceRow> = jobs
        .into_par_iter()
        .map(|(theta_deg, f)| {
            let theta = theta_deg.to_radians();
            let reference = crlb_theta(&select_expected(geom, f, TieBreak::default())?, theta, params);
            let ok = |e_deg: f64| -> Result<bool> {
                let c = realtime_crlb_with_error(geom, theta, e_deg.to_radians(), f, params)?;
                Ok(c <= reference || nearly_equal(c, reference))
            };
            let tol_deg = if !ok(0.0)? {
                0.0
            } else if ok(search.cap_deg)? {
                search.cap_deg
            } else {
                let (mut lo, mut hi) = (0.0, search.cap_deg);
                while hi - lo > search.resolution_deg {
                    let mid = 0.5 * (lo + hi);
                    if ok(mid)? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            };
            Ok(ToleranceRow { theta_deg, f, tol_deg })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.theta_deg.total_cmp(&b.theta_deg).then(a.f.cmp(&b.f)));
    Ok(rows)
}

/// `1 / (F · mean_θ CRLB)` for the set each method picks at each azimuth (the
/// real-time set uses the exact azimuth as its preliminary estimate).
pub fn efficiency_metric(
    geom: &ArrayGeometry,
    method: SelectionMethod,
    f: usize,
    params: &SystemParams,
    theta_points: &[f64],
) -> Result<f64> {
    if f < 3 {
        return Err(Error::CountOutOfRange { count: f, min: 3, max: geom.antenna_count() });
    }
    if theta_points.is_empty() {
        return Err(Error::InvalidParameter("no azimuth points".into()));
    }
    let total: f64 = match method {
        SelectionMethod::Expected => {
            let set = select_expected(geom, f, TieBreak::default())?;
            theta_points.iter().map(|&t| crlb_theta(&set, t, params)).sum()
        }
        SelectionMethod::Realtime => theta_points
            .par_iter()
            .map(|&t| greedy_select(geom, t, f, params, true).map(|(s, _)| crlb_theta(&s, t, params)))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .sum(),
    };
    Ok(1.0 / (f as f64 * total / theta_points.len() as f64))
}

/// Uniform azimuth grid of `n` points over `[0, 2π)`.
pub fn uniform_thetas(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}
