//! Recovers the equivalent inertia, droop and base power of the IEEE 24-bus
//! case from its operating point, starting from the unit-list aggregate.

use edgeshed::harness::ieee24::{case_params, fleet_aggregate};
use edgeshed::harness::{CalibrationTargets, calibrate};

fn main() -> edgeshed::Result<()> {
    let (h0, r0, s0) = fleet_aggregate()?;
    println!("unit aggregate: h={h0:.4} r={r0:.6} s_base={s0:.1}");
    let base = case_params(h0, r0, s0);
    let targets = CalibrationTargets::default();
    let c = calibrate(&base, (h0, r0), &targets)?;
    println!("calibrated after {} iterations", c.iterations);
    println!("h = {:?}", c.h);
    println!("r = {:?}", c.r);
    println!("s_base_mva = {:?}", c.s_base_mva);
    let d = case_params(c.h, c.r, c.s_base_mva).derive()?;
    println!("t_nadir = {:.4} s", d.t_nadir());
    println!("delta_p_s = {:.3} MW", d.threshold_power_loss_mw(targets.f_s_hz)?);
    Ok(())
}
