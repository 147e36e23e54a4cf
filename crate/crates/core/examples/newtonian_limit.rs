//! Sweep the speed of light and watch relative dynamics approach Newton's
//! second law for a free particle seen from inertial frames.

use obsplit::geodesic::Tolerances;
use obsplit::newtlimit::{newtonian_limit_report, LimitScenario};
use obsplit::splitting::Vec3;

fn main() -> obsplit::Result<()> {
    let scenario = LimitScenario::SrInertial {
        w: Vec3::new(0.15, -0.1, 0.05),
        start: Vec3::new(3.0, 2.0, -1.0),
        samples: vec![1.0, 2.0, 3.0],
        box_half: 10.0,
    };
    let rep = newtonian_limit_report(&scenario, &[1.0, 2.0, 4.0, 8.0, 16.0], &Tolerances::default())?;
    println!("{:>6} {:>12} {:>12} {:>12} {:>12}", "c", "|tau_dot-1|", "series res", "pseudo", "remainder");
    for r in &rep.rows {
        println!(
            "{:6.1} {:12.4e} {:12.4e} {:12.4e} {:12.4e}",
            r.c, r.max_tau_dot_dev, r.tau_series_residual, r.pseudo_force, r.pseudo_remainder
        );
    }
    println!(
        "slopes against 1/c: tau series {:.3?}, pseudo-force {:.3?}, remainder {:.3?}",
        rep.tau_series_slope, rep.pseudo_force_slope, rep.pseudo_remainder_slope
    );
    Ok(())
}
