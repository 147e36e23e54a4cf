//! Observer map of a uniformly accelerated observer with rotating frames,
//! compared with its closed form.

use obsplit::geodesic::Tolerances;
use obsplit::observer::{make_uniformly_accelerated_observer, rotating_frame, standard_frame};
use obsplit::splitting::{kinematic_observer_map, ObservedEvent, Vec3};
use obsplit::Vec4;

fn closed_form(tau: f64, x: &Vec3) -> Vec4 {
    let r = x.norm();
    let (sh, ch) = (tau.sinh(), tau.cosh());
    let (sw, cw) = tau.sin_cos();
    Vec4::new(sh - r * ch + x[0] * sh, ch - 1.0 - r * sh + x[0] * ch, x[1] * cw - x[2] * sw, x[1] * sw + x[2] * cw)
}

fn main() -> obsplit::Result<()> {
    let tols = Tolerances::default();
    let obs = make_uniformly_accelerated_observer(1.0, 1.0, (-3.0, 3.0))?;
    let frames = rotating_frame(&standard_frame(&obs, &tols)?, 1.0, 1)?;
    let x = Vec3::new(0.3, 0.5, -0.2);
    for i in 0..=8 {
        let tau = -2.0 + 0.5 * i as f64;
        let e = kinematic_observer_map(&frames, &ObservedEvent::new(tau, x)?, &tols)?;
        let dev = (e.coords - closed_form(tau, &x)).amax();
        println!("tau {tau:5.2}  event {:?}  deviation {dev:.2e}", e.coords.as_slice());
    }
    Ok(())
}
