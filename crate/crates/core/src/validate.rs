//! Self-checks of the closed-form selectors against the brute-force oracles.
//!
//! Each check returns a [`CheckOutcome`] listing every failing case instead
//! of stopping at the first, so a report shows the full extent of a problem.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::crlb::{crlb_theta, expected_u_exact, nearly_equal, SystemParams};
use crate::error::Result;
use crate::expected::{for_each_combination, priority_tiers, select_expected, TieBreak};
use crate::geometry::{enumerate_grid, Antenna, ArrayGeometry, SelectionSet};
use crate::oracle::{exhaustive_start, exhaustive_subset, Objective};
use crate::realtime::{greedy_select, optimal_start_set, region_boundaries};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, cases: usize, failures: Vec<String>) -> Self {
        Self {
            name: name.into(),
            passed: failures.is_empty(),
            cases,
            failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn new(checks: Vec<CheckOutcome>) -> Self {
        Self {
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }
}

/// Produces the two non-reference antennas of a start set for an azimuth.
pub type StartProvider<'a> = dyn Fn(&ArrayGeometry, f64) -> Result<(Antenna, Antenna)> + Sync + 'a;

/// The closed-form start set.
pub fn closed_form_start(geom: &ArrayGeometry, theta: f64) -> Result<(Antenna, Antenna)> {
    let s = optimal_start_set(geom, theta)?;
    Ok((s.a1, s.a2))
}

/// Degree grid `0, step, 2·step, …` below 360, rounded to 1e-9° so that
/// steps like 0.1 print cleanly.
pub fn degree_grid(step_deg: f64) -> Vec<f64> {
    let n = (360.0 / step_deg - 1e-9).ceil().max(0.0) as usize;
    (0..n).map(|k| (k as f64 * step_deg * 1e9).round() / 1e9).collect()
}

/// Region boundaries against their expected values in degrees.
pub fn check_boundaries(geom: &ArrayGeometry, theta0_deg: f64, theta1_deg: f64, tol_deg: f64) -> Result<CheckOutcome> {
    let b = region_boundaries(geom)?;
    let mut failures = Vec::new();
    for (label, got, want) in [("theta0", b.theta0.to_degrees(), theta0_deg), ("theta1", b.theta1.to_degrees(), theta1_deg)] {
        if (got - want).abs() > tol_deg {
            failures.push(format!("{label} = {got:.6} deg, expected {want:.6}"));
        }
    }
    Ok(CheckOutcome::new(format!("region boundaries M={}", geom.m()), 2, failures))
}

/// Start set from `provider` against the exhaustive pair search at every
/// azimuth of `thetas_deg`.
pub fn check_start_sets(
    geom: &ArrayGeometry,
    thetas_deg: &[f64],
    params: &SystemParams,
    provider: &StartProvider<'_>,
) -> Result<CheckOutcome> {
    let mut failures = Vec::new();
    for &deg in thetas_deg {
        let theta = deg.to_radians();
        let (a1, a2) = provider(geom, theta)?;
        let set = SelectionSet::from_antennas(geom, [Antenna::REFERENCE, a1, a2])?;
        let got = crlb_theta(&set, theta, params);
        let oracle = exhaustive_start(geom, theta, params)?;
        if !nearly_equal(got, oracle.optimum) {
            failures.push(format!(
                "theta = {deg} deg: start {{{a1}, {a2}}} gives {got:.9e}, optimum {:.9e} at {:?}",
                oracle.optimum,
                oracle.optimizers.first()
            ));
        }
    }
    Ok(CheckOutcome::new(format!("start set vs exhaustive M={}", geom.m()), thetas_deg.len(), failures))
}

/// Tier selection attains the exhaustive minimum of `U` for each `F` in
/// `3..=f_max`.
pub fn check_expected_prefix(geom: &ArrayGeometry, f_max: usize, params: &SystemParams) -> Result<CheckOutcome> {
    let f_max = f_max.min(geom.antenna_count());
    let mut failures = Vec::new();
    for f in 3..=f_max {
        let chosen = select_expected(geom, f, TieBreak::default())?;
        let got = expected_u_exact(chosen.moments());
        let oracle = exhaustive_subset(geom, f, Objective::Expected, params)?;
        let best_set = SelectionSet::from_antennas(geom, oracle.optimizers[0].iter().copied())?;
        let best = expected_u_exact(best_set.moments());
        if got != best {
            failures.push(format!("F = {f}: selected U = {got:?}, optimum {best:?}"));
        }
    }
    Ok(CheckOutcome::new(
        format!("expected selection vs exhaustive M={}", geom.m()),
        f_max.saturating_sub(2),
        failures,
    ))
}

/// Every way of completing a partially used tier gives the same `U`.
pub fn check_tier_exchangeability(geom: &ArrayGeometry, f_max: usize) -> Result<CheckOutcome> {
    let f_max = f_max.min(geom.antenna_count());
    let tiers = priority_tiers(geom);
    let mut failures = Vec::new();
    let mut cases = 0;
    for f in 3..=f_max {
        let mut base = SelectionSet::with_reference();
        let mut need = f - 1;
        for tier in &tiers {
            if need == 0 {
                break;
            }
            if need >= tier.antennas.len() {
                for &a in &tier.antennas {
                    base.insert(geom, a)?;
                }
                need -= tier.antennas.len();
                continue;
            }
            let mut values = Vec::new();
            for_each_combination(tier.antennas.len(), need, |idx| {
                let m = idx.iter().fold(base.moments(), |m, &i| m.with(tier.antennas[i]));
                values.push(expected_u_exact(m));
            });
            cases += 1;
            values.sort_by(crate::crlb::cmp_exact_u);
            values.dedup();
            if values.len() > 1 {
                let shown: Vec<String> = values
                    .iter()
                    .map(|v| v.map_or("inf".to_string(), |r| r.to_string()))
                    .collect();
                failures.push(format!(
                    "F = {f}: {need} of tier {} give {} distinct U values [{}]",
                    tier.rank,
                    values.len(),
                    shown.join(", ")
                ));
            }
            break;
        }
    }
    Ok(CheckOutcome::new(format!("intra-tier ties M={}", geom.m()), cases, failures))
}

/// Mirror substitution on random sets leaves the CRLB unchanged.
pub fn check_mirror_invariance(
    geom: &ArrayGeometry,
    instances: usize,
    thetas_per_instance: usize,
    params: &SystemParams,
    seed: u64,
) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = enumerate_grid(geom);
    let mut failures = Vec::new();
    let mut cases = 0;
    let mut case = 0;
    // draw until `instances` sets with a swappable antenna have been tested
    while case < instances {
        let size = rng.random_range(3..grid.len());
        let mut pool = grid.clone();
        pool.shuffle(&mut rng);
        let members = &pool[..size];
        // an antenna whose mirror is not already in the set
        let Some(pos) = members
            .iter()
            .position(|a| *a != Antenna::REFERENCE && !members.contains(&a.mirror()))
        else {
            continue;
        };
        case += 1;
        let original = SelectionSet::from_antennas(geom, members.iter().copied())?;
        let swapped = SelectionSet::from_antennas(
            geom,
            members
                .iter()
                .enumerate()
                .map(|(i, a)| if i == pos { a.mirror() } else { *a }),
        )?;
        for _ in 0..thetas_per_instance {
            cases += 1;
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let (a, b) = (crlb_theta(&original, theta, params), crlb_theta(&swapped, theta, params));
            if !nearly_equal(a, b) {
                failures.push(format!("case {case}: theta = {theta:.6}, {a:e} vs {b:e}"));
            }
        }
    }
    Ok(CheckOutcome::new(
        format!("mirror invariance M={}", geom.m()),
        cases,
        failures,
    ))
}

/// Greedy CRLB within `ratio` of the exhaustive optimum.
pub fn check_greedy_quality(
    geom: &ArrayGeometry,
    f_values: &[usize],
    thetas_deg: &[f64],
    ratio: f64,
    params: &SystemParams,
) -> Result<CheckOutcome> {
    let mut failures = Vec::new();
    for &f in f_values {
        for &deg in thetas_deg {
            let theta = deg.to_radians();
            let (set, _) = greedy_select(geom, theta, f, params, true)?;
            let got = crlb_theta(&set, theta, params);
            let oracle = exhaustive_subset(geom, f, Objective::Instantaneous { theta }, params)?;
            if got > ratio * oracle.optimum {
                failures.push(format!(
                    "F = {f}, theta = {deg} deg: greedy {got:.6e} > {ratio} x {:.6e}",
                    oracle.optimum
                ));
            }
        }
    }
    Ok(CheckOutcome::new(
        format!("greedy vs exhaustive M={}", geom.m()),
        f_values.len() * thetas_deg.len(),
        failures,
    ))
}

/// Half-plane and full-grid greedy agree in value at every step.
pub fn check_half_search(geom: &ArrayGeometry, f: usize, thetas_deg: &[f64], params: &SystemParams) -> Result<CheckOutcome> {
    let mut failures = Vec::new();
    for &deg in thetas_deg {
        let theta = deg.to_radians();
        let (_, half) = greedy_select(geom, theta, f, params, true)?;
        let (_, full) = greedy_select(geom, theta, f, params, false)?;
        for (i, (h, g)) in half.steps.iter().zip(&full.steps).enumerate() {
            if !nearly_equal(h.crlb, g.crlb) {
                failures.push(format!("theta = {deg} deg, step {}: {:e} vs {:e}", i + 1, h.crlb, g.crlb));
                break;
            }
        }
    }
    Ok(CheckOutcome::new(format!("half search M={}", geom.m()), thetas_deg.len(), failures))
}

/// Replaces the second start antenna by its neighbour one step toward the
/// array centre. Used as a negative control for [`check_start_sets`].
pub fn corrupted_start(geom: &ArrayGeometry, theta: f64) -> Result<(Antenna, Antenna)> {
    let (a1, a2) = closed_form_start(geom, theta)?;
    let moved = if a2.x != 0 {
        Antenna::new(a2.x - a2.x.signum(), a2.y)
    } else {
        Antenna::new(a2.x, a2.y - a2.y.signum())
    };
    Ok((a1, moved))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheckKind {
    Boundaries,
    StartSets,
    ExpectedPrefix,
    TierTies,
    Mirror,
    Greedy,
    HalfSearch,
}

impl CheckKind {
    pub const ALL: [CheckKind; 7] = [
        CheckKind::Boundaries,
        CheckKind::StartSets,
        CheckKind::ExpectedPrefix,
        CheckKind::TierTies,
        CheckKind::Mirror,
        CheckKind::Greedy,
        CheckKind::HalfSearch,
    ];
}

/// Settings for [`run_validation`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationPlan {
    pub checks: Vec<CheckKind>,
    pub start_step_deg: f64,
    /// Swap in [`corrupted_start`] for the closed form.
    pub corrupt_start: bool,
    pub expected_f_max: usize,
    pub mirror_instances: usize,
    pub greedy_f: Vec<usize>,
    pub greedy_step_deg: f64,
    pub greedy_ratio: f64,
    pub half_search_f: usize,
    pub seed: u64,
}

impl Default for ValidationPlan {
    fn default() -> Self {
        Self {
            checks: CheckKind::ALL.to_vec(),
            start_step_deg: 1.0,
            corrupt_start: false,
            expected_f_max: 7,
            mirror_instances: 10_000,
            greedy_f: vec![4, 5, 6],
            greedy_step_deg: 15.0,
            greedy_ratio: 1.05,
            half_search_f: 13,
            seed: 0,
        }
    }
}

/// Runs the checks of `plan` that apply to `geom`.
///
/// Boundary values are only known in closed form at M = 6, and start sets are
/// not defined below M = 4; those checks are skipped elsewhere.
pub fn run_validation(geom: &ArrayGeometry, params: &SystemParams, plan: &ValidationPlan) -> Result<ValidationReport> {
    let mut checks = Vec::new();
    let m = geom.m();
    for kind in &plan.checks {
        match kind {
            CheckKind::Boundaries if m == 6 => checks.push(check_boundaries(geom, 43.1352, 46.8648, 1e-3)?),
            CheckKind::StartSets if m >= 4 => {
                let provider: &StartProvider<'_> = if plan.corrupt_start { &corrupted_start } else { &closed_form_start };
                checks.push(check_start_sets(geom, &degree_grid(plan.start_step_deg), params, provider)?);
            }
            CheckKind::ExpectedPrefix => checks.push(check_expected_prefix(geom, plan.expected_f_max, params)?),
            CheckKind::TierTies => checks.push(check_tier_exchangeability(geom, plan.expected_f_max)?),
            CheckKind::Mirror => checks.push(check_mirror_invariance(geom, plan.mirror_instances, 10, params, plan.seed)?),
            CheckKind::Greedy if m >= 4 => {
                let fs: Vec<usize> = plan.greedy_f.iter().copied().filter(|&f| f <= geom.antenna_count()).collect();
                checks.push(check_greedy_quality(geom, &fs, &degree_grid(plan.greedy_step_deg), plan.greedy_ratio, params)?);
            }
            CheckKind::HalfSearch if m >= 4 => {
                let f = plan.half_search_f.min(geom.antenna_count());
                checks.push(check_half_search(geom, f, &degree_grid(plan.greedy_step_deg), params)?);
            }
            _ => {}
        }
    }
    Ok(ValidationReport::new(checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(m: u32) -> ArrayGeometry {
        ArrayGeometry::half_wavelength(m).unwrap()
    }

    #[test]
    fn closed_form_start_passes_on_coarse_grid() {
        let g = geom(4);
        let p = SystemParams::defaults(&g);
        let out = check_start_sets(&g, &degree_grid(10.0), &p, &closed_form_start).unwrap();
        assert!(out.passed, "{:?}", out.failures);
        assert_eq!(out.cases, 36);
    }

    #[test]
    fn corrupted_start_is_caught() {
        let g = geom(4);
        let p = SystemParams::defaults(&g);
        // a fixed pair is only right in one region
        let bad = |_: &ArrayGeometry, _: f64| Ok((Antenna::new(-2, 2), Antenna::new(2, 2)));
        let out = check_start_sets(&g, &[0.0, 45.0, 80.0], &p, &bad).unwrap();
        assert!(!out.passed);
        assert_eq!(out.failures.len(), 2);
        assert!(out.failures[0].starts_with("theta = 45 deg"));
        assert!(out.failures[1].starts_with("theta = 80 deg"));
    }

    #[test]
    fn tier_exchangeability_reports_counterexample() {
        let out = check_tier_exchangeability(&geom(4), 7).unwrap();
        assert!(!out.passed);
        assert!(out.failures.iter().any(|f| f.starts_with("F = 7")));
    }

    #[test]
    fn corrupted_provider_fails_somewhere() {
        let g = geom(6);
        let p = SystemParams::defaults(&g);
        let out = check_start_sets(&g, &degree_grid(5.0), &p, &corrupted_start).unwrap();
        assert!(!out.passed);
    }

    #[test]
    fn plan_skips_inapplicable_checks() {
        let g = geom(2);
        let p = SystemParams::defaults(&g);
        let plan = ValidationPlan {
            checks: vec![CheckKind::Boundaries, CheckKind::StartSets, CheckKind::ExpectedPrefix],
            ..ValidationPlan::default()
        };
        let r = run_validation(&g, &p, &plan).unwrap();
        assert_eq!(r.checks.len(), 1);
        assert!(r.passed);
    }

    #[test]
    fn degree_grid_shape() {
        let g = degree_grid(15.0);
        assert_eq!(g.len(), 24);
        assert_eq!(g[23], 345.0);
        assert_eq!(degree_grid(0.1)[3], 0.3);
        assert_eq!(degree_grid(7.0).len(), 52);
    }

    #[test]
    fn report_aggregates() {
        let ok = CheckOutcome::new("a", 1, vec![]);
        let bad = CheckOutcome::new("b", 1, vec!["x".into()]);
        assert!(ValidationReport::new(vec![ok.clone()]).passed);
        assert!(!ValidationReport::new(vec![ok, bad]).passed);
    }
}
