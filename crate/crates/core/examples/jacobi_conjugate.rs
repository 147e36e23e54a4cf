//! Conjugate points along lightlike geodesics around a Schwarzschild mass,
//! where the observer map stops being a local diffeomorphism.

use obsplit::geodesic::{detect_conjugate, Tolerances};
use obsplit::{Chart, Event, Schwarzschild, Vec4};

fn main() -> obsplit::Result<()> {
    let tols = Tolerances::default();
    let chart = Schwarzschild::new(1.0, 1.0)?;
    let p = Vec4::new(0.0, 6.0, std::f64::consts::FRAC_PI_2, 0.0);
    let q = Event::from_vec("schwarzschild", p);
    let frame = chart.reference_frame(&p);
    // Past-directed lightlike directions at angle `a` from radially inward.
    // Rays just outside the capture cone wrap around the mass and cross the
    // axis behind it, where neighbouring rays refocus.
    for i in 0..=6 {
        let a = 0.45 + 0.1 * i as f64;
        let k = (frame.column(0) * -1.0 + frame.column(1) * -a.cos() + frame.column(3) * a.sin()) * 20.0;
        match detect_conjugate(&chart, &q, &k, 1.0, 64, &tols) {
            Ok(rep) => println!("angle {a:.3}: conjugate at s = {:?}, reached s = {:.3}", rep.values, rep.reached),
            Err(e) => println!("angle {a:.3}: {e}"),
        }
    }
    Ok(())
}
