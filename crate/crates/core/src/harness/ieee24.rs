//! Modified 24-bus reliability test system: the bus-23 units are tripped and
//! the remaining fleet is described by per-size inertia and droop buckets.

use crate::error::Result;
use crate::sfr::{GeneratorUnit, SystemParams, aggregate_droop, aggregate_inertia};

/// Generator ratings (MVA) per bus of the 1979 reliability test system.
pub const RTS79_UNITS: &[(u32, &[f64])] = &[
    (1, &[20.0, 20.0, 76.0, 76.0]),
    (2, &[20.0, 20.0, 76.0, 76.0]),
    (7, &[100.0, 100.0, 100.0]),
    (13, &[197.0, 197.0, 197.0]),
    (15, &[12.0, 12.0, 12.0, 12.0, 12.0, 155.0]),
    (16, &[155.0]),
    (18, &[400.0]),
    (21, &[400.0]),
    (22, &[50.0, 50.0, 50.0, 50.0, 50.0, 50.0]),
    (23, &[155.0, 155.0, 350.0]),
];

/// Bus whose units are replaced by the HVDC infeed.
pub const TRIPPED_BUS: u32 = 23;

/// Total system load (MW).
pub const TOTAL_LOAD_MW: f64 = 2850.0;

/// Inertia (s) and droop (p.u.) by unit size.
pub fn bucket(rating_mva: f64) -> (f64, f64) {
    if rating_mva < 100.0 {
        (5.8, 1.0 / 17.0)
    } else if rating_mva <= 200.0 {
        (8.1, 1.0 / 20.0)
    } else {
        (9.3, 1.0 / 22.0)
    }
}

/// Units left in service after the bus-23 generators are removed.
pub fn post_trip_units() -> Vec<GeneratorUnit> {
    RTS79_UNITS
        .iter()
        .filter(|(bus, _)| *bus != TRIPPED_BUS)
        .flat_map(|(_, ratings)| ratings.iter())
        .map(|&rating_mva| {
            let (inertia_h, droop_r) = bucket(rating_mva);
            GeneratorUnit { rating_mva, inertia_h, droop_r }
        })
        .collect()
}

pub fn fleet_rating_mva(units: &[GeneratorUnit]) -> f64 {
    units.iter().map(|u| u.rating_mva).sum()
}

/// Equivalent (h, r) of the post-trip fleet on its own rating.
pub fn fleet_aggregate() -> Result<(f64, f64, f64)> {
    let units = post_trip_units();
    let base = fleet_rating_mva(&units);
    Ok((aggregate_inertia(&units, base)?, aggregate_droop(&units, base)?, base))
}

/// Damping, turbine and governor constants of the case study.
pub fn case_params(h: f64, r: f64, s_base_mva: f64) -> SystemParams {
    SystemParams {
        h,
        d: 2.5,
        r,
        km: 0.95,
        fh: 0.3,
        tr: 8.0,
        s_base_mva,
        f_nominal_hz: 50.0,
        p_load_total_mw: TOTAL_LOAD_MW,
    }
}
