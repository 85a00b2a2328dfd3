//! Real-time selection: optimal three-antenna start sets per azimuth region
//! and the greedy loop that grows them to `F` antennas.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use crate::crlb::{crlb_from_moments, crlb_theta, nearly_equal, SystemParams};
use crate::error::{Error, Result};
use crate::expected::{select_expected, TieBreak};
use crate::geometry::{enumerate_grid, Antenna, ArrayGeometry, SelectionSet};
use crate::signal::{ml_estimate, Estimate, SearchGrid, SnapshotBatch};

/// Azimuths in the first quadrant where the optimal start set changes.
///
/// The diagonal-pair set is optimal on `(theta0, theta1)`; the two boundaries
/// are symmetric about π/4 (`theta0 + theta1 = π/2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionBoundaries {
    pub theta0: f64,
    pub theta1: f64,
}

/// Roots of the boundary quadratic
/// `M²(3M²−6M+2)x² − 2M(3M³−10M²+12M−4)x + (M−2)(3M−2)(M²−2M+2) = 0`.
pub fn boundary_roots(geom: &ArrayGeometry) -> Result<(f64, f64)> {
    let m = geom.m();
    if m < 4 {
        return Err(Error::UnsupportedGeometry(m));
    }
    let (a, b, c) = boundary_coefficients(m);
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(Error::NonRealRoots(m));
    }
    let sq = disc.sqrt();
    // numerically stable pair
    let q = -0.5 * (b + b.signum() * sq);
    let (r1, r2) = (q / a, c / q);
    Ok((r1.min(r2), r1.max(r2)))
}

fn boundary_coefficients(m: u32) -> (f64, f64, f64) {
    let m = m as f64;
    let a = m * m * (3.0 * m * m - 6.0 * m + 2.0);
    let b = -2.0 * m * (3.0 * m.powi(3) - 10.0 * m * m + 12.0 * m - 4.0);
    let c = (m - 2.0) * (3.0 * m - 2.0) * (m * m - 2.0 * m + 2.0);
    (a, b, c)
}

pub fn region_boundaries(geom: &ArrayGeometry) -> Result<RegionBoundaries> {
    let (small, big) = boundary_roots(geom)?;
    let (a, _, c) = boundary_coefficients(geom.m());
    Ok(RegionBoundaries {
        theta0: big.atan(),
        theta1: (a * small / c).atan(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionKind {
    /// Corner plus a second antenna sliding along the top row.
    CornerSlidingX,
    /// The two neighbours of a corner.
    DiagonalPair,
    /// Corner plus a second antenna sliding along a side column.
    CornerSlidingY,
}

/// One of the twelve azimuth intervals tiling `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngleRegion {
    pub index: usize,
    pub lower: f64,
    pub upper: f64,
    pub kind: RegionKind,
}

impl AngleRegion {
    /// All twelve regions in order. Regions `6..12` repeat `0..6` shifted by π.
    pub fn all(bounds: &RegionBoundaries) -> Vec<AngleRegion> {
        use RegionKind::*;
        let RegionBoundaries { theta0, theta1 } = *bounds;
        let half = [
            (0.0, theta0, CornerSlidingX),
            (theta0, theta1, DiagonalPair),
            (theta1, FRAC_PI_2, CornerSlidingY),
            (FRAC_PI_2, FRAC_PI_2 + theta0, CornerSlidingY),
            (FRAC_PI_2 + theta0, FRAC_PI_2 + theta1, DiagonalPair),
            (FRAC_PI_2 + theta1, PI, CornerSlidingX),
        ];
        (0..12)
            .map(|i| {
                let (lo, hi, kind) = half[i % 6];
                let shift = if i < 6 { 0.0 } else { PI };
                AngleRegion {
                    index: i,
                    lower: lo + shift,
                    upper: hi + shift,
                    kind,
                }
            })
            .collect()
    }

    /// Region containing `theta` (any real; reduced modulo 2π).
    ///
    /// Sliding regions are closed at their region-internal boundary, the
    /// diagonal-pair intervals are open, and π/2 belongs to the preceding
    /// region.
    pub fn locate(bounds: &RegionBoundaries, theta: f64) -> AngleRegion {
        let t = theta.rem_euclid(2.0 * PI);
        let (t, offset) = if t >= PI { (t - PI, 6) } else { (t, 0) };
        let RegionBoundaries { theta0, theta1 } = *bounds;
        let local = if t <= theta0 {
            0
        } else if t < theta1 {
            1
        } else if t <= FRAC_PI_2 {
            2
        } else if t <= FRAC_PI_2 + theta0 {
            3
        } else if t < FRAC_PI_2 + theta1 {
            4
        } else {
            5
        };
        AngleRegion::all(bounds)[local + offset]
    }
}

/// Optimal three-antenna seed `{(0,0), a1, a2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StartSet {
    pub a1: Antenna,
    pub a2: Antenna,
    pub region: AngleRegion,
}

impl StartSet {
    pub fn to_selection(&self, geom: &ArrayGeometry) -> Result<SelectionSet> {
        SelectionSet::from_antennas(geom, [Antenna::REFERENCE, self.a1, self.a2])
    }

    pub fn antennas(&self) -> [Antenna; 3] {
        [Antenna::REFERENCE, self.a1, self.a2]
    }
}

/// Integer coordinate near `center` chosen by the smaller `cost`, kept inside
/// the grid and off `avoid` (the fixed corner coordinate).
fn round_by_cost(center: f64, half: i32, avoid: i32, cost: impl Fn(f64) -> f64) -> i32 {
    let fix = |v: f64| {
        let v = (v as i32).clamp(-half, half);
        if v == avoid {
            // step inward, away from the corner
            v - avoid.signum()
        } else {
            v
        }
    };
    let lo = fix(center.floor());
    let hi = fix(center.ceil());
    if lo == hi || cost(lo as f64) <= cost(hi as f64) {
        lo
    } else {
        hi
    }
}

pub fn optimal_start_set(geom: &ArrayGeometry, theta: f64) -> Result<StartSet> {
    let bounds = region_boundaries(geom)?;
    let region = AngleRegion::locate(&bounds, theta);
    let h = geom.half();
    let m = geom.m() as f64;
    let hf = h as f64;
    let t = theta.rem_euclid(PI);
    let (a1, a2) = match region.index % 6 {
        0 => {
            let alpha = t.tan();
            let g = |x: f64| ((1.0 - alpha).powi(2) + (2.0 * x / m + alpha).powi(2)) / (hf + x).powi(2);
            let x2 = round_by_cost(m * (1.0 - 2.0 * alpha) / 2.0, h, -h, g);
            (Antenna::new(-h, h), Antenna::new(x2, h))
        }
        1 => (Antenna::new(-h, h - 1), Antenna::new(1 - h, h)),
        2 => {
            let y2 = if t == FRAC_PI_2 {
                -h
            } else {
                let alpha = t.tan();
                let g = |y: f64| {
                    ((1.0 - alpha).powi(2) + (2.0 * alpha * y / m - 1.0).powi(2)) / (hf - y).powi(2)
                };
                round_by_cost(m * (2.0 - alpha) / (2.0 * alpha), h, h, g)
            };
            (Antenna::new(-h, h), Antenna::new(-h, y2))
        }
        3 => {
            let alpha = t.tan();
            let g = |y: f64| {
                ((1.0 + alpha).powi(2) + (2.0 * alpha * y / m + 1.0).powi(2)) / (hf - y).powi(2)
            };
            let y2 = round_by_cost(-m * (2.0 + alpha) / (2.0 * alpha), h, h, g);
            (Antenna::new(h, h), Antenna::new(h, y2))
        }
        4 => (Antenna::new(h, h - 1), Antenna::new(h - 1, h)),
        _ => {
            let alpha = t.tan();
            let g = |x: f64| ((1.0 + alpha).powi(2) + (2.0 * x / m + alpha).powi(2)) / (hf - x).powi(2);
            let x2 = round_by_cost(-m * (1.0 + 2.0 * alpha) / 2.0, h, h, g);
            (Antenna::new(h, h), Antenna::new(x2, h))
        }
    };
    Ok(StartSet { a1, a2, region })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreedyStep {
    pub antenna: Antenna,
    pub crlb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreedyTrace {
    pub start_crlb: f64,
    pub steps: Vec<GreedyStep>,
    /// CRLB evaluations performed over all steps.
    pub evaluations: u64,
}

/// Candidates examined for the next greedy step.
///
/// With `half_search`, only the closed half-plane `y > 0 ∪ (y = 0, x ≥ 0)`
/// is scanned, plus the mirrors of selected half-plane antennas: a mirror
/// contributes exactly like its original, so the minimum over this domain
/// equals the minimum over the whole grid.
pub fn candidate_domain(geom: &ArrayGeometry, set: &SelectionSet, half_search: bool) -> Vec<Antenna> {
    let grid = enumerate_grid(geom);
    let mut out: Vec<Antenna> = if half_search {
        let in_half = |a: &Antenna| a.y > 0 || (a.y == 0 && a.x >= 0);
        grid.iter()
            .filter(|a| in_half(a))
            .map(|&a| if set.contains(a) { a.mirror() } else { a })
            .filter(|a| !set.contains(*a))
            .collect()
    } else {
        grid.into_iter().filter(|a| !set.contains(*a)).collect()
    };
    out.sort_unstable();
    out
}

/// Grows the optimal start set for `theta_p` to `f` antennas, each step
/// adding the candidate with the smallest resulting CRLB at `theta_p`.
/// Ties within [`crate::crlb::TIE_RTOL`] go to the lexicographically smallest
/// antenna.
pub fn greedy_select(
    geom: &ArrayGeometry,
    theta_p: f64,
    f: usize,
    params: &SystemParams,
    half_search: bool,
) -> Result<(SelectionSet, GreedyTrace)> {
    let start = optimal_start_set(geom, theta_p)?;
    greedy_from(geom, start.to_selection(geom)?, theta_p, f, params, half_search)
}

/// Greedy growth from an arbitrary seed set.
pub fn greedy_from(
    geom: &ArrayGeometry,
    mut set: SelectionSet,
    theta_p: f64,
    f: usize,
    params: &SystemParams,
    half_search: bool,
) -> Result<(SelectionSet, GreedyTrace)> {
    let n = geom.antenna_count();
    if !(3..=n).contains(&f) {
        return Err(Error::CountOutOfRange { count: f, min: 3, max: n });
    }
    if set.len() > f {
        return Err(Error::CountOutOfRange { count: f, min: set.len(), max: n });
    }
    let mut trace = GreedyTrace {
        start_crlb: crlb_theta(&set, theta_p, params),
        steps: Vec::with_capacity(f - set.len()),
        evaluations: 0,
    };
    while set.len() < f {
        let base = set.moments();
        let mut best: Option<(f64, Antenna)> = None;
        for c in candidate_domain(geom, &set, half_search) {
            trace.evaluations += 1;
            let v = crlb_from_moments(base.with(c), theta_p, params);
            // candidates arrive in (x, y) order, so only a strictly smaller
            // value displaces the incumbent
            match best {
                Some((bv, _)) if v >= bv || nearly_equal(v, bv) => {}
                _ => best = Some((v, c)),
            }
        }
        let (crlb, antenna) = best.expect("candidate pool is nonempty while set.len() < N");
        set.insert(geom, antenna)?;
        trace.steps.push(GreedyStep { antenna, crlb });
    }
    Ok((set, trace))
}

/// Evaluation count `Σ_{i=1}^{f−3} (n − i) = (f − 3)(n − f/2 + 1)`, in exact
/// integer arithmetic.
pub fn iteration_count(n: u64, f: u64) -> u64 {
    assert!(f >= 3 && n >= f, "iteration_count requires 3 <= f <= n");
    let k = f - 3;
    k * n - k * (k + 1) / 2
}

/// Options for the two-stage pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageConfig {
    pub f_p: usize,
    pub f: usize,
    /// Fraction of snapshots spent on the preliminary estimate.
    pub split: f64,
    pub half_search: bool,
    pub grid: SearchGrid,
    /// Added to the preliminary estimate before selection; used to probe the
    /// sensitivity of the selection to a biased preliminary azimuth.
    pub theta_p_offset: f64,
}

impl TwoStageConfig {
    pub fn new(f_p: usize, f: usize) -> Self {
        Self {
            f_p,
            f,
            split: 0.2,
            half_search: true,
            grid: SearchGrid::default(),
            theta_p_offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageOutcome {
    pub preliminary_set: SelectionSet,
    pub preliminary: Estimate,
    pub theta_p: f64,
    pub selection: SelectionSet,
    pub trace: GreedyTrace,
    pub final_estimate: Estimate,
    /// Snapshots used by the main-stage estimate.
    pub main_snapshots: usize,
}

/// Number of leading snapshots reserved for the preliminary stage.
pub fn preliminary_snapshot_count(total: usize, split: f64) -> Result<usize> {
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::InvalidParameter(format!("split must lie in (0, 1), got {split}")));
    }
    let k = (split * total as f64).ceil() as usize;
    if k == 0 || k >= total {
        return Err(Error::InvalidParameter(format!(
            "split {split} of {total} snapshots leaves a stage without data"
        )));
    }
    Ok(k)
}

/// Preliminary estimate on the offline set, then greedy selection around it
/// and a final estimate on the remaining snapshots.
pub fn two_stage_select(
    geom: &ArrayGeometry,
    batch: &SnapshotBatch,
    config: &TwoStageConfig,
    params: &SystemParams,
) -> Result<TwoStageOutcome> {
    if config.f_p < 3 {
        return Err(Error::CountOutOfRange {
            count: config.f_p,
            min: 3,
            max: geom.antenna_count(),
        });
    }
    let k = preliminary_snapshot_count(batch.len(), config.split)?;
    let (early, late) = batch.split_at(k);

    let preliminary_set = select_expected(geom, config.f_p, TieBreak::default())?;
    let preliminary = ml_estimate(&early, &preliminary_set, &config.grid)?;
    let theta_p = (preliminary.theta + config.theta_p_offset).rem_euclid(2.0 * PI);

    let (selection, trace) = greedy_select(geom, theta_p, config.f, params, config.half_search)?;
    let final_estimate = ml_estimate(&late, &selection, &config.grid)?;
    Ok(TwoStageOutcome {
        preliminary_set,
        preliminary,
        theta_p,
        selection,
        trace,
        final_estimate,
        main_snapshots: late.len(),
    })
}

/// JSON report of one real-time selection.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionReport {
    #[serde(rename = "M")]
    pub m: u32,
    pub theta_p_deg: f64,
    pub start_set: Vec<Antenna>,
    pub selected: Vec<Antenna>,
    pub crlb_theta: f64,
    pub evaluations: u64,
}

impl SelectionReport {
    pub fn build(
        geom: &ArrayGeometry,
        theta_p: f64,
        f: usize,
        params: &SystemParams,
        half_search: bool,
    ) -> Result<Self> {
        let start = optimal_start_set(geom, theta_p)?;
        let (set, trace) = greedy_select(geom, theta_p, f, params, half_search)?;
        Ok(Self {
            m: geom.m(),
            theta_p_deg: theta_p.to_degrees(),
            start_set: start.antennas().to_vec(),
            selected: set.members().to_vec(),
            crlb_theta: crlb_theta(&set, theta_p, params),
            evaluations: trace.evaluations,
        })
    }
}
