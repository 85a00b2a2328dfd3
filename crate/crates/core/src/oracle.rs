//! Brute-force references for the closed-form selectors.
//!
//! Nothing here is clever on purpose: every search enumerates the full
//! candidate space with the reference antenna pinned and records every
//! optimizer that ties with the optimum.

use std::cmp::Ordering;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::crlb::{
    cmp_exact_u, crlb_from_moments, crlb_theta, expected_u_exact, nearly_equal, SystemParams,
};
use crate::error::{Error, Result};
use crate::expected::for_each_combination;
use crate::geometry::{enumerate_grid, Antenna, ArrayGeometry, Moments, SelectionSet};

/// Largest subset enumeration [`exhaustive_subset`] accepts.
pub const SUBSET_SEARCH_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Objective {
    /// CRLB at a fixed azimuth (radians).
    Instantaneous { theta: f64 },
    /// Azimuth-averaged CRLB.
    Expected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    #[serde(rename = "M")]
    pub m: u32,
    pub objective: Objective,
    #[serde(rename = "F")]
    pub f: usize,
    /// Optimal CRLB (instantaneous) or optimal `U` (expected).
    pub optimum: f64,
    /// Every set attaining the optimum, members sorted, sets sorted.
    pub optimizers: Vec<Vec<Antenna>>,
    pub search_size: u128,
}

impl OracleReport {
    pub fn contains(&self, set: &SelectionSet) -> bool {
        let s = set.sorted_members();
        self.optimizers.contains(&s)
    }
}

/// `C(n, k)` in exact arithmetic.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn non_reference(geom: &ArrayGeometry) -> Vec<Antenna> {
    enumerate_grid(geom)
        .into_iter()
        .filter(|a| *a != Antenna::REFERENCE)
        .collect()
}

fn sorted_with_reference(extra: impl IntoIterator<Item = Antenna>) -> Vec<Antenna> {
    let mut v: Vec<Antenna> = std::iter::once(Antenna::REFERENCE).chain(extra).collect();
    v.sort_unstable();
    v
}

/// Best three-antenna set `{(0,0), a, b}` at `theta` over all pairs.
pub fn exhaustive_start(geom: &ArrayGeometry, theta: f64, params: &SystemParams) -> Result<OracleReport> {
    if geom.m() > 8 {
        return Err(Error::SearchTooLarge {
            size: binomial(geom.antenna_count() as u64 - 1, 2),
            limit: binomial(80, 2),
        });
    }
    exhaustive_subset(geom, 3, Objective::Instantaneous { theta }, params)
}

/// Best `f`-subset containing the reference antenna under `objective`.
pub fn exhaustive_subset(
    geom: &ArrayGeometry,
    f: usize,
    objective: Objective,
    params: &SystemParams,
) -> Result<OracleReport> {
    let n = geom.antenna_count();
    if !(1..=n).contains(&f) {
        return Err(Error::CountOutOfRange { count: f, min: 1, max: n });
    }
    let size = binomial(n as u64 - 1, f as u64 - 1);
    if size > SUBSET_SEARCH_LIMIT {
        return Err(Error::SearchTooLarge { size, limit: SUBSET_SEARCH_LIMIT });
    }
    let pool = non_reference(geom);
    let k = f - 1;

    // Split on the first chosen index; each chunk enumerates the remaining
    // k − 1 picks from the indices after it.
    let firsts: Vec<Option<usize>> = if k == 0 {
        vec![None]
    } else {
        (0..=pool.len() - k).map(Some).collect()
    };
    let merged = firsts
        .into_par_iter()
        .map(|first| {
            let mut acc = TieSet::default();
            let Some(first) = first else {
                acc.offer(score(Moments::default(), &objective, params), || {
                    vec![Antenna::REFERENCE]
                });
                return acc;
            };
            let base = Moments::default().with(pool[first]);
            let rest = &pool[first + 1..];
            for_each_combination(rest.len(), k - 1, |idx| {
                let m = idx.iter().fold(base, |m, &i| m.with(rest[i]));
                acc.offer(score(m, &objective, params), || {
                    sorted_with_reference(
                        std::iter::once(pool[first]).chain(idx.iter().map(|&i| rest[i])),
                    )
                });
            });
            acc
        })
        .reduce(TieSet::default, TieSet::merge);

    let optimum = match merged.best {
        Some(Score::Crlb(v)) => v,
        Some(Score::U(Some(r))) => *r.numer() as f64 / *r.denom() as f64,
        _ => f64::INFINITY,
    };
    let mut optimizers: Vec<Vec<Antenna>> = merged.ties.into_iter().map(|(_, s)| s).collect();
    optimizers.sort();
    Ok(OracleReport {
        m: geom.m(),
        objective,
        f,
        optimum,
        optimizers,
        search_size: size,
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Score {
    Crlb(f64),
    U(Option<Ratio<i64>>),
}

fn score(m: Moments, objective: &Objective, params: &SystemParams) -> Score {
    match *objective {
        Objective::Instantaneous { theta } => Score::Crlb(crlb_from_moments(m, theta, params)),
        Objective::Expected => Score::U(expected_u_exact(m)),
    }
}

impl Score {
    /// Floating-point scores tie within the relative tolerance; exact scores
    /// tie only when equal.
    fn compare(&self, other: &Score) -> Ordering {
        match (self, other) {
            (Score::Crlb(a), Score::Crlb(b)) => {
                if nearly_equal(*a, *b) {
                    Ordering::Equal
                } else {
                    a.total_cmp(b)
                }
            }
            (Score::U(a), Score::U(b)) => cmp_exact_u(a, b),
            _ => unreachable!("one objective per search"),
        }
    }
}

#[derive(Default)]
struct TieSet {
    best: Option<Score>,
    ties: Vec<(Score, Vec<Antenna>)>,
}

impl TieSet {
    fn offer(&mut self, s: Score, set: impl FnOnce() -> Vec<Antenna>) {
        let ord = self.best.as_ref().map(|b| s.compare(b));
        match ord {
            Some(Ordering::Greater) => {}
            Some(Ordering::Equal) => {
                if let Some(Score::Crlb(b)) = self.best {
                    if let Score::Crlb(v) = s {
                        if v < b {
                            self.best = Some(Score::Crlb(v));
                        }
                    }
                }
                self.ties.push((s, set()));
            }
            _ => {
                self.ties.retain(|(t, _)| t.compare(&s) == Ordering::Equal);
                self.best = Some(s.clone());
                self.ties.push((s, set()));
            }
        }
    }

    fn merge(mut self, other: TieSet) -> TieSet {
        for (s, set) in other.ties {
            self.offer(s, || set);
        }
        if let Some(best) = &self.best {
            self.ties.retain(|(t, _)| t.compare(best) == Ordering::Equal);
        }
        self
    }
}

/// Average of the instantaneous CRLB over `grid_points` uniform azimuths.
pub fn theta_average_crlb(set: &SelectionSet, params: &SystemParams, grid_points: usize) -> Result<f64> {
    if set.det() == 0 {
        return Err(Error::DegenerateSet);
    }
    if grid_points == 0 {
        return Err(Error::InvalidParameter("grid_points must be positive".into()));
    }
    let step = 2.0 * std::f64::consts::PI / grid_points as f64;
    let sum: f64 = (0..grid_points)
        .map(|k| crlb_theta(set, k as f64 * step, params))
        .sum();
    Ok(sum / grid_points as f64)
}
