//! Offline selection minimizing the azimuth-averaged CRLB.
//!
//! Antennas are ranked in tiers: the four corners first, then on the
//! outermost rectangle the antennas at increasing distance from their
//! nearest corner, then the next rectangle inward with the same pattern.
//! The reference antenna is always selected and is not part of any tier.

use serde::Serialize;

use crate::crlb::{cmp_exact_u, expected_u_exact};
use crate::error::{Error, Result};
use crate::geometry::{Antenna, ArrayGeometry, Moments, SelectionSet};

/// Antennas sharing one selection priority. Lower rank is selected first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PriorityTier {
    pub rank: usize,
    /// Sorted lexicographically by `(x, y)`.
    pub antennas: Vec<Antenna>,
}

pub fn priority_tiers(geom: &ArrayGeometry) -> Vec<PriorityTier> {
    let mut tiers = Vec::new();
    for r in (1..=geom.half()).rev() {
        let corners = vec![
            Antenna::new(-r, -r),
            Antenna::new(-r, r),
            Antenna::new(r, -r),
            Antenna::new(r, r),
        ];
        tiers.push(corners);
        for k in 1..=r {
            let mut ring = Vec::with_capacity(8);
            for sx in [-1, 1] {
                for sy in [-1, 1] {
                    ring.push(Antenna::new(sx * (r - k), sy * r));
                    ring.push(Antenna::new(sx * r, sy * (r - k)));
                }
            }
            ring.sort_unstable();
            // at k == r the sign flips collapse onto the four edge midpoints
            ring.dedup();
            tiers.push(ring);
        }
    }
    tiers
        .into_iter()
        .enumerate()
        .map(|(rank, antennas)| PriorityTier { rank, antennas })
        .collect()
}

/// How antennas are taken from a tier that is only partially consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// First antennas of the tier in `(x, y)` order.
    Lexicographic,
    /// The subset of the tier with the smallest exact `U`, ties resolved by
    /// the lexicographic order of the chosen combination.
    #[default]
    MinimizeU,
}

/// `f` antennas: the reference plus the first `f − 1` drawn tier by tier.
pub fn select_expected(geom: &ArrayGeometry, f: usize, tie_break: TieBreak) -> Result<SelectionSet> {
    let n = geom.antenna_count();
    if !(3..=n).contains(&f) {
        return Err(Error::CountOutOfRange { count: f, min: 3, max: n });
    }
    let mut set = SelectionSet::with_reference();
    let mut need = f - 1;
    for tier in priority_tiers(geom) {
        if need == 0 {
            break;
        }
        let take: Vec<Antenna> = if need >= tier.antennas.len() {
            tier.antennas.clone()
        } else {
            match tie_break {
                TieBreak::Lexicographic => tier.antennas[..need].to_vec(),
                TieBreak::MinimizeU => best_subset(set.moments(), &tier.antennas, need),
            }
        };
        need -= take.len();
        for a in take {
            set.insert(geom, a)?;
        }
    }
    Ok(set)
}

/// Best `k`-subset of `pool` to add on top of `base` by exact `U`.
fn best_subset(base: Moments, pool: &[Antenna], k: usize) -> Vec<Antenna> {
    let mut best: Option<(Option<num_rational::Ratio<i64>>, Vec<usize>)> = None;
    for_each_combination(pool.len(), k, |idx| {
        let m = idx.iter().fold(base, |m, &i| m.with(pool[i]));
        let u = expected_u_exact(m);
        let better = match &best {
            None => true,
            Some((bu, _)) => cmp_exact_u(&u, bu).is_lt(),
        };
        if better {
            best = Some((u, idx.to_vec()));
        }
    });
    best.map(|(_, idx)| idx.into_iter().map(|i| pool[i]).collect())
        .unwrap_or_default()
}

/// Visits all `k`-combinations of `0..n` in lexicographic order.
pub(crate) fn for_each_combination(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// JSON layout of the tier dump: `{"M":6,"tiers":[[[-3,-3],...],...]}`.
#[derive(Debug, Clone, Serialize)]
pub struct TierDump {
    #[serde(rename = "M")]
    pub m: u32,
    pub tiers: Vec<Vec<Antenna>>,
}

impl TierDump {
    pub fn new(geom: &ArrayGeometry) -> Self {
        Self {
            m: geom.m(),
            tiers: priority_tiers(geom).into_iter().map(|t| t.antennas).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use num_rational::Ratio;

    use super::*;
    use crate::crlb::expected_u;

    fn geom(m: u32) -> ArrayGeometry {
        ArrayGeometry::half_wavelength(m).unwrap()
    }

    fn pts(v: &[(i32, i32)]) -> Vec<Antenna> {
        let mut v: Vec<Antenna> = v.iter().copied().map(Antenna::from).collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn tiers_m6() {
        let t = priority_tiers(&geom(6));
        assert_eq!(t[0].antennas, pts(&[(3, 3), (3, -3), (-3, 3), (-3, -3)]));
        assert_eq!(
            t[1].antennas,
            pts(&[(2, 3), (-2, 3), (2, -3), (-2, -3), (3, 2), (-3, 2), (3, -2), (-3, -2)])
        );
        assert_eq!(
            t[2].antennas,
            pts(&[(1, 3), (-1, 3), (1, -3), (-1, -3), (3, 1), (-3, 1), (3, -1), (-3, -1)])
        );
        assert_eq!(t[3].antennas, pts(&[(0, 3), (0, -3), (3, 0), (-3, 0)]));
        assert_eq!(t[4].antennas, pts(&[(2, 2), (2, -2), (-2, 2), (-2, -2)]));
        assert_eq!(t.iter().map(|t| t.antennas.len()).sum::<usize>(), 48);
        assert!(t.iter().enumerate().all(|(i, t)| t.rank == i));
    }

    #[test]
    fn tiers_m2_and_m4() {
        let t = priority_tiers(&geom(2));
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].antennas, pts(&[(1, 1), (1, -1), (-1, 1), (-1, -1)]));
        assert_eq!(t[1].antennas, pts(&[(0, 1), (0, -1), (1, 0), (-1, 0)]));

        let t = priority_tiers(&geom(4));
        let sizes: Vec<_> = t.iter().map(|t| t.antennas.len()).collect();
        assert_eq!(sizes, vec![4, 8, 4, 4, 4]);
        assert_eq!(t[2].antennas, pts(&[(0, 2), (0, -2), (2, 0), (-2, 0)]));
        assert_eq!(t[3].antennas, pts(&[(1, 1), (1, -1), (-1, 1), (-1, -1)]));
    }

    #[test]
    fn tiers_partition_grid() {
        for m in [2, 4, 6, 8, 10] {
            let g = geom(m);
            let mut all: Vec<Antenna> = priority_tiers(&g)
                .into_iter()
                .flat_map(|t| t.antennas)
                .collect();
            all.sort_unstable();
            let mut grid = crate::geometry::enumerate_grid(&g);
            grid.retain(|a| *a != Antenna::REFERENCE);
            grid.sort_unstable();
            assert_eq!(all, grid, "M = {m}");
        }
    }

    #[test]
    fn select_expected_fixtures() {
        let g = geom(6);
        let s5 = select_expected(&g, 5, TieBreak::default()).unwrap();
        assert_eq!(
            s5.sorted_members(),
            pts(&[(0, 0), (-3, -3), (-3, 3), (3, -3), (3, 3)])
        );
        assert_eq!(expected_u_exact(s5.moments()), Some(Ratio::new(2, 36)));
        let s13 = select_expected(&g, 13, TieBreak::default()).unwrap();
        assert_eq!(expected_u_exact(s13.moments()), Some(Ratio::new(2, 88)));

        // Any three corners tie.
        let s4 = select_expected(&g, 4, TieBreak::Lexicographic).unwrap();
        let corners = &priority_tiers(&g)[0].antennas;
        for skip in 0..4 {
            let alt = SelectionSet::from_antennas(
                &g,
                std::iter::once(Antenna::REFERENCE)
                    .chain(corners.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, a)| *a)),
            )
            .unwrap();
            assert_eq!(expected_u_exact(alt.moments()), expected_u_exact(s4.moments()));
        }
    }

    #[test]
    fn lexicographic_tiebreak_is_not_always_optimal() {
        // Taking two antennas from the M = 4 second tier: balancing x and y
        // moments matters, which plain lexicographic order ignores.
        let g = geom(4);
        let lex = select_expected(&g, 7, TieBreak::Lexicographic).unwrap();
        let best = select_expected(&g, 7, TieBreak::MinimizeU).unwrap();
        assert_eq!(expected_u_exact(lex.moments()), Some(Ratio::new(7, 72)));
        assert_eq!(expected_u_exact(best.moments()), Some(Ratio::new(2, 21)));
        assert!(expected_u(&best) < expected_u(&lex));
    }

    #[test]
    fn count_range() {
        let g = geom(2);
        assert!(select_expected(&g, 2, TieBreak::default()).is_err());
        assert!(select_expected(&g, 10, TieBreak::default()).is_err());
        assert_eq!(select_expected(&g, 9, TieBreak::default()).unwrap().len(), 9);
    }

    #[test]
    fn combinations_lexicographic() {
        let mut seen = Vec::new();
        for_each_combination(4, 2, |c| seen.push(c.to_vec()));
        assert_eq!(
            seen,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        let mut count = 0;
        for_each_combination(5, 0, |_| count += 1);
        assert_eq!(count, 1);
    }

    #[test]
    fn tier_dump_json() {
        let json = serde_json::to_string(&TierDump::new(&geom(2))).unwrap();
        assert_eq!(
            json,
            r#"{"M":2,"tiers":[[[-1,-1],[-1,1],[1,-1],[1,1]],[[-1,0],[0,-1],[0,1],[1,0]]]}"#
        );
    }
}
