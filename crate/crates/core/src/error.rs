use thiserror::Error;

use crate::geometry::Antenna;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid array geometry: {0}")]
    InvalidGeometry(String),

    #[error("antenna {antenna} lies outside the grid for M = {m}")]
    OutOfBounds { antenna: Antenna, m: u32 },

    #[error("antenna {0} is already selected")]
    DuplicateAntenna(Antenna),

    #[error("selection count {count} outside [{min}, {max}]")]
    CountOutOfRange { count: usize, min: usize, max: usize },

    #[error("antenna set is collinear; the azimuth CRLB is unbounded")]
    DegenerateSet,

    #[error("start-set regions are only defined for M >= 4 (got M = {0})")]
    UnsupportedGeometry(u32),

    #[error("region-boundary quadratic has no real roots for M = {0}")]
    NonRealRoots(u32),

    #[error("exhaustive search of {size} candidates exceeds the limit of {limit}")]
    SearchTooLarge { size: u128, limit: u128 },

    #[error("estimation window contains no azimuth grid points")]
    EmptyWindow,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
