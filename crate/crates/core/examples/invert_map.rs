//! Observer coordinates of seen events: multistart inversion of the map.

use obsplit::geodesic::Tolerances;
use obsplit::observer::{make_uniformly_accelerated_observer, rotating_frame, standard_frame};
use obsplit::splitting::{invert_observer_map, kinematic_observer_map, InversionConfig, ObservedEvent, Vec3};

fn main() -> obsplit::Result<()> {
    let tols = Tolerances::default();
    let obs = make_uniformly_accelerated_observer(1.0, 1.0, (-3.0, 3.0))?;
    let frames = rotating_frame(&standard_frame(&obs, &tols)?, 0.5, 3)?;
    let cfg = InversionConfig { grid: [5, 5, 5, 5], ..InversionConfig::with_box((-3.0, 3.0), 1.5) };

    for (tau, x) in [(0.5, Vec3::new(0.3, -0.2, 0.4)), (-0.8, Vec3::new(-0.5, 0.3, 0.1))] {
        let seen = kinematic_observer_map(&frames, &ObservedEvent::new(tau, x)?, &tols)?;
        let res = invert_observer_map(&frames, &seen, &cfg, &tols)?;
        println!("event {:?}: {} seeds, {} preimages", seen.coords.as_slice(), res.seeds, res.preimages.len());
        for pre in &res.preimages {
            println!(
                "  tau {:.10}  x {:?}  residual {:.1e}  condition {:.2}  regular {}",
                pre.point.tau,
                pre.point.x.as_slice(),
                pre.residual,
                pre.condition,
                pre.regular
            );
        }
    }
    Ok(())
}
