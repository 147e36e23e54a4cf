//! How fast a moving particle's clock appears to run for an inertial
//! observer: exact value, second-order series and the measured value.

use std::sync::Arc;

use obsplit::geodesic::Tolerances;
use obsplit::newtlimit::{jet_fighter_first_order, sr_tau_dot_exact, sr_tau_dot_series};
use obsplit::observer::{make_inertial_observer, standard_frame};
use obsplit::splitting::{observe_curve, InversionConfig, ObserveConfig, Vec3, Worldline};
use obsplit::{Chart, Event, Minkowski, Vec4};

fn main() -> obsplit::Result<()> {
    let tols = Tolerances::default();
    let chart: Arc<dyn Chart> = Arc::new(Minkowski::default());
    let obs = make_inertial_observer(chart.clone(), &Event::new("minkowski", [0.0; 4]), &Vec4::new(1.0, 0.0, 0.0, 0.0), (-20.0, 40.0), &tols)?;
    let frames = standard_frame(&obs, &tols)?;

    let w = Vec3::new(0.3, -0.1, 0.05);
    let target = make_inertial_observer(chart, &Event::new("minkowski", [0.0, 4.0, 3.0, -1.0]), &Vec4::new(1.0, w[0], w[1], w[2]), (-5.0, 15.0), &tols)?;
    let cfg = ObserveConfig { inversion: InversionConfig::with_box((-20.0, 40.0), 12.0), ..Default::default() };
    let samples: Vec<f64> = (0..5).map(|i| 2.0 * i as f64).collect();
    let rep = observe_curve(&frames, &Worldline::Observer(target), &samples, &cfg, &tols)?;
    println!("{:>5} {:>10} {:>14} {:>14} {:>14}", "s", "tau", "measured", "exact", "series");
    for s in &rep.samples {
        let exact = sr_tau_dot_exact(&s.x, &s.v, 1.0)?;
        let xv = s.x.normalize().dot(&s.v.normalize());
        let series = sr_tau_dot_series(xv, s.v.norm())?.eval(1.0);
        println!("{:5.1} {:10.5} {:14.10} {:14.10} {:14.10}", s.s, s.tau, s.tau_dot, exact, series);
    }
    println!("jet fighter at 7000 km/h: first-order correction {:.4e}", jet_fighter_first_order());
    Ok(())
}
