//! Fermi–Walker transport along an accelerated observer and frame checks
//! along the way.

use obsplit::geodesic::Tolerances;
use obsplit::observer::{make_uniformly_accelerated_observer, proper_acceleration, standard_frame};

fn main() -> obsplit::Result<()> {
    let tols = Tolerances::default();
    let obs = make_uniformly_accelerated_observer(1.0, 1.0, (-3.0, 3.0))?;
    let frames = standard_frame(&obs, &tols)?;
    for i in 0..=6 {
        let tau = -3.0 + i as f64;
        let chk = frames.check(tau)?;
        let (_, a) = proper_acceleration(&obs, tau)?;
        let x = frames.columns_at(tau)?;
        println!(
            "tau {tau:5.1}  |a| {a:.6}  X1 {:?}  gram {:.1e}  tangent {:.1e}",
            x.column(1).as_slice(),
            chk.gram_residual,
            chk.tangent_residual
        );
    }
    Ok(())
}
