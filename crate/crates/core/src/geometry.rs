//! Square planar array geometry and antenna selection sets.
//!
//! Antennas live on a centered integer grid: for an array with `M + 1`
//! elements per axis both coordinates span `-M/2..=M/2`, with the phase
//! reference at `(0, 0)`. A [`SelectionSet`] keeps the three second-moment
//! sums that fully determine the azimuth CRLB, maintained exactly in integer
//! arithmetic as antennas are added.

use std::f64::consts::PI;
use std::fmt;

use serde::ser::{Serialize, SerializeTuple, Serializer};

use crate::error::{Error, Result};

/// Uniform square array with `(M + 1)^2` elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    m: u32,
    d_over_lambda: f64,
    beta: f64,
}

impl ArrayGeometry {
    /// `m` must be even and at least 2, `d_over_lambda` positive and finite.
    pub fn new(m: u32, d_over_lambda: f64) -> Result<Self> {
        if m < 2 || m % 2 != 0 {
            return Err(Error::InvalidGeometry(format!(
                "M must be an even integer >= 2, got {m}"
            )));
        }
        if !(d_over_lambda.is_finite() && d_over_lambda > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "spacing ratio d/lambda must be positive, got {d_over_lambda}"
            )));
        }
        Ok(Self {
            m,
            d_over_lambda,
            beta: 2.0 * PI * d_over_lambda,
        })
    }

    /// Half-wavelength spacing.
    pub fn half_wavelength(m: u32) -> Result<Self> {
        Self::new(m, 0.5)
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Largest coordinate magnitude, `M/2`.
    pub fn half(&self) -> i32 {
        (self.m / 2) as i32
    }

    pub fn d_over_lambda(&self) -> f64 {
        self.d_over_lambda
    }

    /// Phase progression per unit coordinate, `2π·d/λ`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Antennas per axis, `M + 1`.
    pub fn side(&self) -> usize {
        self.m as usize + 1
    }

    /// Total antenna count `N = (M + 1)^2`.
    pub fn antenna_count(&self) -> usize {
        self.side() * self.side()
    }

    pub fn contains(&self, a: Antenna) -> bool {
        let h = self.half();
        (-h..=h).contains(&a.x) && (-h..=h).contains(&a.y)
    }

    /// Row-major index of an antenna: `y` selects the row, `x` the column.
    /// Matches the element order of the full-array observation vector.
    pub fn index_of(&self, a: Antenna) -> Result<usize> {
        if !self.contains(a) {
            return Err(Error::OutOfBounds { antenna: a, m: self.m });
        }
        let h = self.half();
        Ok((a.y + h) as usize * self.side() + (a.x + h) as usize)
    }

    /// Inverse of [`ArrayGeometry::index_of`].
    pub fn antenna_at(&self, index: usize) -> Option<Antenna> {
        if index >= self.antenna_count() {
            return None;
        }
        let h = self.half();
        let side = self.side();
        Some(Antenna::new(
            (index % side) as i32 - h,
            (index / side) as i32 - h,
        ))
    }
}

/// All grid antennas in row-major order (`y` outer, `x` inner).
pub fn enumerate_grid(geom: &ArrayGeometry) -> Vec<Antenna> {
    let h = geom.half();
    (-h..=h)
        .flat_map(|y| (-h..=h).map(move |x| Antenna::new(x, y)))
        .collect()
}

/// A grid position in centered coordinates.
///
/// Ordering is lexicographic by `(x, y)`; this is the tie-break order used by
/// every selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Antenna {
    pub x: i32,
    pub y: i32,
}

impl Antenna {
    pub const REFERENCE: Antenna = Antenna { x: 0, y: 0 };

    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    /// Point reflection through the reference antenna.
    pub fn mirror(self) -> Self {
        Self::new(-self.x, -self.y)
    }

    /// Twice the signed area of the triangle `(0,0), self, other`.
    pub fn cross(self, other: Antenna) -> i64 {
        self.x as i64 * other.y as i64 - other.x as i64 * self.y as i64
    }
}

/// Free-function form of [`Antenna::mirror`].
pub fn mirror(a: Antenna) -> Antenna {
    a.mirror()
}

impl fmt::Display for Antenna {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl From<(i32, i32)> for Antenna {
    fn from((x, y): (i32, i32)) -> Self {
        Self::new(x, y)
    }
}

impl Serialize for Antenna {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut t = serializer.serialize_tuple(2)?;
        t.serialize_element(&self.x)?;
        t.serialize_element(&self.y)?;
        t.end()
    }
}

/// Second-moment sums of a set of antenna coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Moments {
    /// Σ x²
    pub sxx: i64,
    /// Σ y²
    pub syy: i64,
    /// Σ x·y
    pub sxy: i64,
}

impl Moments {
    pub fn of(antennas: &[Antenna]) -> Self {
        antennas.iter().fold(Self::default(), |m, &a| m.with(a))
    }

    /// Moments after adding one antenna.
    pub fn with(self, a: Antenna) -> Self {
        let (x, y) = (a.x as i64, a.y as i64);
        Self {
            sxx: self.sxx + x * x,
            syy: self.syy + y * y,
            sxy: self.sxy + x * y,
        }
    }

    /// `sxx·syy − sxy²`; zero iff every antenna lies on one line through the
    /// reference.
    pub fn det(&self) -> i64 {
        self.sxx * self.syy - self.sxy * self.sxy
    }

    pub fn trace(&self) -> i64 {
        self.sxx + self.syy
    }

    pub fn is_planar(&self) -> bool {
        self.det() > 0
    }
}

/// Duplicate-free ordered antenna selection with running moments.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SelectionSet {
    members: Vec<Antenna>,
    moments: Moments,
}

impl SelectionSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Set holding only the reference antenna.
    pub fn with_reference() -> Self {
        let mut s = Self::new();
        s.members.push(Antenna::REFERENCE);
        s
    }

    /// Builds a set from a list, rejecting duplicates and out-of-grid antennas.
    pub fn from_antennas<I>(geom: &ArrayGeometry, antennas: I) -> Result<Self>
    where
        I: IntoIterator<Item = Antenna>,
    {
        let mut s = Self::new();
        for a in antennas {
            s.insert(geom, a)?;
        }
        Ok(s)
    }

    /// Appends `a`, updating the moments incrementally.
    pub fn add_antenna(mut self, geom: &ArrayGeometry, a: Antenna) -> Result<Self> {
        self.insert(geom, a)?;
        Ok(self)
    }

    /// In-place variant of [`SelectionSet::add_antenna`].
    pub fn insert(&mut self, geom: &ArrayGeometry, a: Antenna) -> Result<()> {
        if !geom.contains(a) {
            return Err(Error::OutOfBounds { antenna: a, m: geom.m() });
        }
        if self.contains(a) {
            return Err(Error::DuplicateAntenna(a));
        }
        self.members.push(a);
        self.moments = self.moments.with(a);
        Ok(())
    }

    pub fn contains(&self, a: Antenna) -> bool {
        self.members.contains(&a)
    }

    pub fn members(&self) -> &[Antenna] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn moments(&self) -> Moments {
        self.moments
    }

    pub fn sxx(&self) -> i64 {
        self.moments.sxx
    }

    pub fn syy(&self) -> i64 {
        self.moments.syy
    }

    pub fn sxy(&self) -> i64 {
        self.moments.sxy
    }

    pub fn det(&self) -> i64 {
        self.moments.det()
    }

    /// Members sorted lexicographically; handy for set comparisons.
    pub fn sorted_members(&self) -> Vec<Antenna> {
        let mut v = self.members.clone();
        v.sort_unstable();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(m: u32) -> ArrayGeometry {
        ArrayGeometry::half_wavelength(m).unwrap()
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(ArrayGeometry::new(3, 0.5).is_err());
        assert!(ArrayGeometry::new(0, 0.5).is_err());
        assert!(ArrayGeometry::new(4, 0.0).is_err());
        assert!(ArrayGeometry::new(4, f64::NAN).is_err());
        let g = geom(6);
        assert_eq!(g.beta(), 2.0 * PI * 0.5);
        assert_eq!(g.antenna_count(), 49);
    }

    #[test]
    fn grid_enumeration() {
        let g2 = enumerate_grid(&geom(2));
        assert_eq!(g2.len(), 9);
        for c in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
            assert!(g2.contains(&c.into()));
        }
        assert_eq!(enumerate_grid(&geom(6)).len(), 49);
        let g4 = enumerate_grid(&geom(4));
        assert_eq!(g4.iter().filter(|a| **a == Antenna::REFERENCE).count(), 1);
        // row-major: y outer
        assert_eq!(g4[0], Antenna::new(-2, -2));
        assert_eq!(g4[1], Antenna::new(-1, -2));
        assert_eq!(g4[5], Antenna::new(-2, -1));
    }

    #[test]
    fn index_bijection() {
        let g = geom(4);
        for (i, a) in enumerate_grid(&g).into_iter().enumerate() {
            assert_eq!(g.index_of(a).unwrap(), i);
            assert_eq!(g.antenna_at(i), Some(a));
        }
        assert_eq!(g.antenna_at(25), None);
        assert!(g.index_of(Antenna::new(3, 0)).is_err());
    }

    #[test]
    fn incremental_moments() {
        let g = geom(6);
        let s = SelectionSet::new().add_antenna(&g, Antenna::new(0, 0)).unwrap();
        assert_eq!((s.sxx(), s.syy(), s.sxy()), (0, 0, 0));
        let s = s.add_antenna(&g, Antenna::new(-3, 3)).unwrap();
        assert_eq!((s.sxx(), s.syy(), s.sxy()), (9, 9, -9));
        let s = s.add_antenna(&g, Antenna::new(3, 3)).unwrap();
        assert_eq!((s.sxx(), s.syy(), s.sxy()), (18, 18, 0));
    }

    #[test]
    fn add_errors() {
        let g = geom(6);
        let s = SelectionSet::with_reference();
        assert!(matches!(
            s.clone().add_antenna(&g, Antenna::REFERENCE),
            Err(Error::DuplicateAntenna(_))
        ));
        assert!(matches!(
            s.add_antenna(&g, Antenna::new(4, 0)),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn mirror_examples() {
        assert_eq!(mirror(Antenna::new(1, 2)), Antenna::new(-1, -2));
        assert_eq!(mirror(Antenna::new(0, 0)), Antenna::new(0, 0));
        assert_eq!(mirror(Antenna::new(-3, 0)), Antenna::new(3, 0));
    }

    #[test]
    fn collinear_det_is_zero() {
        let g = geom(4);
        let s = SelectionSet::from_antennas(
            &g,
            [(0, 0), (1, 1), (2, 2)].map(Antenna::from),
        )
        .unwrap();
        assert_eq!(s.det(), 0);
        assert!(!s.moments().is_planar());
    }

    #[test]
    fn antenna_serializes_as_pair() {
        let json = serde_json::to_string(&Antenna::new(-3, 2)).unwrap();
        assert_eq!(json, "[-3,2]");
    }
}
