//! Past light cone of a static observer near a Schwarzschild mass: where do
//! the lightlike geodesics arriving from a ring of directions start?

use obsplit::geodesic::Tolerances;
use obsplit::observer::{make_static_observer, standard_frame};
use obsplit::splitting::{kinematic_observer_map_detailed, ObservedEvent, Vec3};
use obsplit::Schwarzschild;

fn main() -> obsplit::Result<()> {
    let tols = Tolerances::default();
    let chart = Schwarzschild::new(1.0, 1.0)?;
    let obs = make_static_observer(&chart, 10.0, std::f64::consts::FRAC_PI_2, 0.0, (-5.0, 5.0))?;
    let frames = standard_frame(&obs, &tols)?;

    println!("{:>8} {:>6} {:>12} {:>10} {:>10} {:>10} {:>10}", "angle", "dist", "ct", "r", "theta", "phi", "residual");
    for i in 0..8 {
        let ang = std::f64::consts::PI * i as f64 / 4.0;
        for dist in [2.0, 5.0] {
            let x = Vec3::new(ang.cos(), ang.sin(), 0.0) * dist;
            match kinematic_observer_map_detailed(&frames, &ObservedEvent::new(0.0, x)?, &tols) {
                Ok(mp) => {
                    let k = mp.event.coords;
                    println!(
                        "{ang:8.4} {dist:6.1} {:12.6} {:10.6} {:10.6} {:10.6} {:10.2e}",
                        k[0], k[1], k[2], k[3], mp.lightlike_residual
                    );
                }
                Err(e) => println!("{ang:8.4} {dist:6.1} unreachable: {e}"),
            }
        }
    }
    Ok(())
}
