//! Curvature of the Schwarzschild exterior: Ricci flatness and the
//! Kretschmann-like size of the Riemann tensor falling off with radius.

use obsplit::spacetime::{fd_christoffels, riemann_ricci_at};
use obsplit::{Chart, Schwarzschild, Vec4};

fn main() -> obsplit::Result<()> {
    let chart = Schwarzschild::new(1.0, 1.0)?;
    println!("{:>6} {:>12} {:>12} {:>12}", "r", "max|Riem|", "max|Ric|", "Gamma fd err");
    for r in [1.5, 2.0, 4.0, 8.0, 16.0] {
        let p = Vec4::new(0.0, r, 1.2, 0.4);
        let cs = riemann_ricci_at(&chart, &p, 1e-4)?;
        let an = chart.analytic_christoffels(&p).expect("closed form");
        let fd = fd_christoffels(&chart, &p, 1e-5).expect("inside the chart");
        let err = an.0.iter().flatten().flatten().zip(fd.0.iter().flatten().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("{r:6.1} {:12.4e} {:12.4e} {:12.4e}", cs.riemann.max_abs(), cs.ricci.amax(), err);
    }
    Ok(())
}
