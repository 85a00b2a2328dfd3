//! Benchmark-only crate. The benches live under `benches/`; this library
//! holds shared fixtures.

use aoa_select::{ArrayGeometry, SystemParams};

/// Half-wavelength geometry with the default system parameters.
pub fn fixture(m: u32) -> (ArrayGeometry, SystemParams) {
    let geom = ArrayGeometry::half_wavelength(m).expect("even M >= 2");
    let params = SystemParams::defaults(&geom);
    (geom, params)
}
