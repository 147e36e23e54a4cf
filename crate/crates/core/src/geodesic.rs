//! Geodesics, parallel transport, the exponential map and Jacobi fields.
//!
//! Transported vectors and Jacobi fields are integrated together with the
//! geodesic they live on: the path is re-integrated from its stored initial
//! data with the extra components appended to the state, so covariant
//! derivatives use the exact velocity at every stage instead of an
//! interpolant.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lorentz::{Mat4, Vec4};
use crate::ode::{integrate, DenseSolution, OdeOptions, OdeStats, Termination};
use crate::spacetime::{Chart, Event, TidalOperator, DEFAULT_FD_STEP};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub fd_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, fd_step: DEFAULT_FD_STEP }
    }
}

impl Tolerances {
    pub fn ode_options(&self) -> OdeOptions {
        OdeOptions::with_tolerances(self.rel_tol, self.abs_tol)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.fd_step > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicIvp {
    pub start: Event,
    /// `dκ/ds` at the start.
    pub velocity: Vec4,
}

impl GeodesicIvp {
    pub fn new(start: Event, velocity: Vec4) -> Self {
        Self { start, velocity }
    }
}

/// Extra quantities carried along a geodesic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Carried {
    /// Parallel-transported vector with the given initial value.
    Parallel(Vec4),
    /// Jacobi field with initial `J` and `∇J/ds`.
    Jacobi(Vec4, Vec4),
}

impl Carried {
    fn width(&self) -> usize {
        match self {
            Carried::Parallel(_) => 4,
            Carried::Jacobi(..) => 8,
        }
    }
}

/// A geodesic `s ↦ κ(s)` with dense output and optional carried fields.
#[derive(Debug, Clone)]
pub struct GeodesicSolution {
    pub chart_id: Arc<str>,
    pub ivp: GeodesicIvp,
    pub tols: Tolerances,
    sol: DenseSolution,
    carried: Vec<Carried>,
    offsets: Vec<usize>,
}

impl GeodesicSolution {
    pub fn s_start(&self) -> f64 {
        self.sol.t_start()
    }

    /// Last parameter reached; equals the target when [`Self::completed`].
    pub fn s_end(&self) -> f64 {
        self.sol.t_end()
    }

    pub fn s_target(&self) -> f64 {
        self.sol.t_target
    }

    pub fn completed(&self) -> bool {
        self.sol.completed()
    }

    pub fn stats(&self) -> OdeStats {
        self.sol.stats
    }

    pub fn dense(&self) -> &DenseSolution {
        &self.sol
    }

    pub fn carried(&self) -> &[Carried] {
        &self.carried
    }

    pub fn contains(&self, s: f64) -> bool {
        self.sol.contains(s)
    }

    pub fn state(&self, s: f64) -> Option<Vec<f64>> {
        self.sol.eval(s)
    }

    pub fn position(&self, s: f64) -> Option<Vec4> {
        self.state(s).map(|y| Vec4::from_column_slice(&y[0..4]))
    }

    pub fn velocity(&self, s: f64) -> Option<Vec4> {
        self.state(s).map(|y| Vec4::from_column_slice(&y[4..8]))
    }

    pub fn event(&self, s: f64) -> Option<Event> {
        self.position(s).map(|k| Event { chart_id: self.chart_id.clone(), coords: k })
    }

    pub fn final_position(&self) -> Vec4 {
        Vec4::from_column_slice(&self.sol.last()[0..4])
    }

    pub fn final_velocity(&self) -> Vec4 {
        Vec4::from_column_slice(&self.sol.last()[4..8])
    }

    fn slot(&self, idx: usize, y: &[f64], off: usize) -> Vec4 {
        let o = self.offsets[idx] + off;
        Vec4::from_column_slice(&y[o..o + 4])
    }

    /// Carried parallel vector `idx` at `s`.
    pub fn parallel(&self, idx: usize, s: f64) -> Option<Vec4> {
        matches!(self.carried.get(idx), Some(Carried::Parallel(_))).then_some(())?;
        self.state(s).map(|y| self.slot(idx, &y, 0))
    }

    /// Carried Jacobi field `idx` at `s` as `(J, ∇J/ds)`.
    pub fn jacobi(&self, idx: usize, s: f64) -> Option<(Vec4, Vec4)> {
        matches!(self.carried.get(idx), Some(Carried::Jacobi(..))).then_some(())?;
        self.state(s).map(|y| (self.slot(idx, &y, 0), self.slot(idx, &y, 4)))
    }

    /// Carried Jacobi fields at the final parameter.
    pub fn final_jacobi(&self) -> Vec<(Vec4, Vec4)> {
        let y = self.sol.last();
        (0..self.carried.len())
            .filter(|&i| matches!(self.carried[i], Carried::Jacobi(..)))
            .map(|i| (self.slot(i, y, 0), self.slot(i, y, 4)))
            .collect()
    }
}

fn geodesic_rhs(chart: &dyn Chart, fd_step: f64, carried: &[Carried], y: &[f64], dy: &mut [f64]) -> bool {
    let k = Vec4::from_column_slice(&y[0..4]);
    if !chart.contains(&k) {
        return false;
    }
    let u = Vec4::from_column_slice(&y[4..8]);
    let has_jacobi = carried.iter().any(|c| matches!(c, Carried::Jacobi(..)));
    let (gamma, tidal) = if has_jacobi {
        match TidalOperator::new(chart, &k, &u, fd_step) {
            Some(t) => (t.gamma, Some(t)),
            None => return false,
        }
    } else {
        match chart.christoffels(&k, fd_step) {
            Some(g) => (g, None),
            None => return false,
        }
    };
    let acc = -gamma.contract(&u, &u);
    dy[0..4].copy_from_slice(u.as_slice());
    dy[4..8].copy_from_slice(acc.as_slice());
    let m = gamma.along(&u);
    let mut o = 8;
    for c in carried {
        match c {
            Carried::Parallel(_) => {
                let v = Vec4::from_column_slice(&y[o..o + 4]);
                dy[o..o + 4].copy_from_slice((-(m * v)).as_slice());
            }
            Carried::Jacobi(..) => {
                let j = Vec4::from_column_slice(&y[o..o + 4]);
                let dj = Vec4::from_column_slice(&y[o + 4..o + 8]);
                let tidal_j = match tidal.as_ref().and_then(|t| t.apply(chart, &k, &j, fd_step)) {
                    Some(t) => t,
                    None => return false,
                };
                dy[o..o + 4].copy_from_slice((dj - m * j).as_slice());
                dy[o + 4..o + 8].copy_from_slice((-tidal_j - m * dj).as_slice());
            }
        }
        o += c.width();
    }
    true
}

/// Metric condition number beyond which a step-size collapse is read as
/// reaching the chart edge.
const SINGULAR_METRIC_COND: f64 = 1e8;

fn metric_condition(g: &Mat4) -> f64 {
    let sv = g.singular_values();
    sv.max() / sv.min()
}

/// Integrates the geodesic of `ivp` from `s = 0` to `s_end`, carrying the
/// requested fields.
pub fn integrate_with(
    chart: &dyn Chart,
    ivp: &GeodesicIvp,
    s_end: f64,
    tols: &Tolerances,
    carried: &[Carried],
) -> Result<GeodesicSolution> {
    tols.validate()?;
    let k0 = ivp.start.coords;
    if !chart.contains(&k0) {
        return Err(Error::OutOfChart { chart: chart.id().to_string(), coords: [k0[0], k0[1], k0[2], k0[3]] });
    }
    if ivp.velocity.iter().any(|x| !x.is_finite()) || ivp.velocity.amax() == 0.0 {
        return Err(Error::InvalidInput("geodesic velocity must be finite and nonzero".into()));
    }
    let mut y0: Vec<f64> = k0.iter().chain(ivp.velocity.iter()).copied().collect();
    let mut offsets = Vec::with_capacity(carried.len());
    for c in carried {
        offsets.push(y0.len());
        match c {
            Carried::Parallel(v) => y0.extend(v.iter()),
            Carried::Jacobi(j, dj) => {
                y0.extend(j.iter());
                y0.extend(dj.iter());
            }
        }
    }
    let fd = tols.fd_step;
    let mut sol = integrate(|_, y, dy| geodesic_rhs(chart, fd, carried, y, dy), 0.0, &y0, s_end, &tols.ode_options())?;
    if sol.termination == Termination::StepUnderflow {
        // Steps collapse when the path runs into a coordinate singularity at
        // the chart edge (e.g. a Schwarzschild horizon); that is a chart exit.
        let last = Vec4::from_column_slice(&sol.last()[0..4]);
        let cond = metric_condition(&chart.metric_components(&last));
        if cond > SINGULAR_METRIC_COND {
            sol.termination = Termination::LeftDomain;
        } else {
            return Err(Error::Stiffness(sol.t_end()));
        }
    }
    if s_end != 0.0 && sol.is_empty() {
        return Err(Error::EmptySolution);
    }
    Ok(GeodesicSolution {
        chart_id: Arc::from(chart.id()),
        ivp: ivp.clone(),
        tols: *tols,
        sol,
        carried: carried.to_vec(),
        offsets,
    })
}

/// Solves `κ̈ + Γ(κ̇, κ̇) = 0`. Leaving the chart ends the solution early
/// (see [`GeodesicSolution::completed`]).
pub fn integrate_geodesic(chart: &dyn Chart, ivp: &GeodesicIvp, s_end: f64, tols: &Tolerances) -> Result<GeodesicSolution> {
    integrate_with(chart, ivp, s_end, tols, &[])
}

/// Integrates many geodesics in parallel; results keep the input order.
pub fn integrate_geodesics(
    chart: &dyn Chart,
    ivps: &[GeodesicIvp],
    s_end: f64,
    tols: &Tolerances,
) -> Vec<Result<GeodesicSolution>> {
    ivps.par_iter().map(|ivp| integrate_geodesic(chart, ivp, s_end, tols)).collect()
}

/// `exp_q(K)`, the endpoint of the geodesic with initial velocity `K`.
pub fn exp_map(chart: &dyn Chart, q: &Event, k: &Vec4, tols: &Tolerances) -> Result<Event> {
    if k.amax() == 0.0 {
        return Ok(q.clone());
    }
    let sol = integrate_geodesic(chart, &GeodesicIvp::new(q.clone(), *k), 1.0, tols)?;
    if !sol.completed() {
        return Err(Error::NotInExpDomain(sol.s_end()));
    }
    Ok(sol.event(1.0).unwrap())
}

/// Geodesic `s ↦ exp(sK)` on `[0, 1]` carrying the given Jacobi fields.
pub fn exp_with_jacobi(
    chart: &dyn Chart,
    q: &Event,
    k: &Vec4,
    fields: &[(Vec4, Vec4)],
    tols: &Tolerances,
) -> Result<GeodesicSolution> {
    let carried: Vec<Carried> = fields.iter().map(|(j, dj)| Carried::Jacobi(*j, *dj)).collect();
    let sol = integrate_with(chart, &GeodesicIvp::new(q.clone(), *k), 1.0, tols, &carried)?;
    if !sol.completed() {
        return Err(Error::NotInExpDomain(sol.s_end()));
    }
    Ok(sol)
}

/// A vector field parallel along a geodesic.
#[derive(Debug, Clone)]
pub struct ParallelField {
    pub path: GeodesicSolution,
}

impl ParallelField {
    pub fn at(&self, s: f64) -> Option<Vec4> {
        self.path.parallel(0, s)
    }
}

/// Solves `v̇ + Γ(κ̇, v) = 0` along the geodesic `along`.
pub fn parallel_transport(chart: &dyn Chart, along: &GeodesicSolution, v0: &Vec4) -> Result<ParallelField> {
    let path = integrate_with(chart, &along.ivp, along.s_target(), &along.tols, &[Carried::Parallel(*v0)])?;
    Ok(ParallelField { path })
}

/// Parallel-transports the columns of `frame` along `along`.
pub fn transport_frame(chart: &dyn Chart, along: &GeodesicSolution, frame: &Mat4) -> Result<GeodesicSolution> {
    let carried: Vec<Carried> = frame.column_iter().map(|c| Carried::Parallel(c.into_owned())).collect();
    integrate_with(chart, &along.ivp, along.s_target(), &along.tols, &carried)
}

/// Jacobi field `J` along a geodesic with its covariant derivative.
#[derive(Debug, Clone)]
pub struct JacobiSolution {
    pub path: GeodesicSolution,
}

impl JacobiSolution {
    pub fn j(&self, s: f64) -> Option<Vec4> {
        self.path.jacobi(0, s).map(|p| p.0)
    }

    pub fn dj(&self, s: f64) -> Option<Vec4> {
        self.path.jacobi(0, s).map(|p| p.1)
    }
}

/// Solves `∇²J/ds² + R(J, γ̇)γ̇ = 0` along `geodesic`.
pub fn integrate_jacobi(chart: &dyn Chart, geodesic: &GeodesicSolution, j0: &Vec4, dj0: &Vec4) -> Result<JacobiSolution> {
    let path = integrate_with(chart, &geodesic.ivp, geodesic.s_target(), &geodesic.tols, &[Carried::Jacobi(*j0, *dj0)])?;
    Ok(JacobiSolution { path })
}

/// Differential of `exp_q` at `K` applied to the tangent vector with
/// horizontal part `base_dir` and vertical part `fiber_dir`.
pub fn exp_differential(
    chart: &dyn Chart,
    q: &Event,
    k: &Vec4,
    base_dir: &Vec4,
    fiber_dir: &Vec4,
    tols: &Tolerances,
) -> Result<Vec4> {
    if k.amax() == 0.0 {
        return Ok(base_dir + fiber_dir);
    }
    let sol = exp_with_jacobi(chart, q, k, &[(*base_dir, *fiber_dir)], tols)?;
    Ok(sol.final_jacobi()[0].0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateReport {
    /// Parameters `s` at which `exp_q(sK)` is conjugate to `q`.
    pub values: Vec<f64>,
    /// Set when the grid is too coarse to detect anything.
    pub resolution_warning: bool,
    /// Largest parameter covered (smaller than `s_max` after a chart exit).
    pub reached: f64,
}

/// Three Euclidean-orthonormal vectors spanning `{w : g(K, w) = 0}`.
fn orthogonal_complement(kg: &Vec4) -> [Vec4; 3] {
    let n = kg.normalize();
    let mut basis: Vec<Vec4> = Vec::with_capacity(3);
    let mut candidates: Vec<(f64, usize)> = (0..4).map(|i| (n[i].abs(), i)).collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    for &(_, i) in &candidates {
        let mut v = Vec4::zeros();
        v[i] = 1.0;
        v -= n * n[i];
        for b in &basis {
            v -= b * b.dot(&v);
        }
        if v.norm() > 1e-8 {
            basis.push(v.normalize());
        }
        if basis.len() == 3 {
            break;
        }
    }
    [basis[0], basis[1], basis[2]]
}

/// Locates parameters where Jacobi fields vanishing at `q` and starting
/// orthogonal to `K` vanish again.
///
/// Tracks `D(s) = det[J₁, J₂, J₃, T] / s³`, where `J_i(0) = 0`,
/// `∇J_i/ds(0)` spans the `g`-orthogonal complement of `K`, and `T` is a
/// parallel-transported transversal. `D(0⁺)` is finite and nonzero; roots of
/// `D` are conjugate parameters. Sign changes on the grid are refined by
/// bisection; grid-local minima of `|D|` below a relative threshold are also
/// reported, refined by golden-section search.
pub fn detect_conjugate(
    chart: &dyn Chart,
    q: &Event,
    k: &Vec4,
    s_max: f64,
    grid_n: usize,
    tols: &Tolerances,
) -> Result<ConjugateReport> {
    if grid_n < 2 || !(s_max > 0.0) {
        return Ok(ConjugateReport { values: vec![], resolution_warning: true, reached: 0.0 });
    }
    let g = chart.metric_components(&q.coords);
    let kg = g * k;
    let basis = orthogonal_complement(&kg);
    let qk = k.dot(&kg);
    let transversal = if qk.abs() > 1e-10 * k.norm_squared().max(1e-300) {
        *k
    } else {
        // Lightlike: the future leg of the reference frame pairs nonzero with K.
        chart.reference_frame(&q.coords).column(0).into_owned()
    };
    let mut carried: Vec<Carried> = basis.iter().map(|b| Carried::Jacobi(Vec4::zeros(), *b)).collect();
    carried.push(Carried::Parallel(transversal));
    let sol = integrate_with(chart, &GeodesicIvp::new(q.clone(), *k), s_max, tols, &carried)?;
    let reached = sol.s_end();

    let d = |s: f64| -> f64 {
        let y = sol.state(s).unwrap();
        let mut m = Mat4::zeros();
        for i in 0..3 {
            m.set_column(i, &sol.slot(i, &y, 0));
        }
        m.set_column(3, &sol.slot(3, &y, 0));
        m.determinant() / (s * s * s)
    };
    let d0 = Mat4::from_columns(&[basis[0], basis[1], basis[2], transversal]).determinant().abs();

    let grid: Vec<f64> = (1..=grid_n).map(|i| reached * i as f64 / grid_n as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&s| d(s)).collect();
    let mut roots = Vec::new();
    for w in 0..grid.len() - 1 {
        let (a, b) = (grid[w], grid[w + 1]);
        let (fa, fb) = (vals[w], vals[w + 1]);
        if fa == 0.0 {
            roots.push(a);
        } else if fa.signum() != fb.signum() && fb != 0.0 {
            roots.push(bisect(&d, a, b, fa));
        }
    }
    if vals[grid_n - 1] == 0.0 {
        roots.push(grid[grid_n - 1]);
    }
    let threshold = 1e-6 * d0.max(1e-300);
    for w in 1..grid.len().saturating_sub(1) {
        let (l, m, r) = (vals[w - 1].abs(), vals[w].abs(), vals[w + 1].abs());
        if m < l && m < r && vals[w - 1].signum() == vals[w + 1].signum() && vals[w].signum() == vals[w - 1].signum()
        {
            let (s, v) = golden_min(&|s| d(s).abs(), grid[w - 1], grid[w + 1]);
            if v < threshold {
                roots.push(s);
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * (1.0 + b.abs()));
    Ok(ConjugateReport { values: roots, resolution_warning: false, reached })
}

fn bisect(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= 1e-13 * (1.0 + m.abs()) {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..100 {
        if (b - a).abs() <= 1e-12 * (1.0 + a.abs()) {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    if f1 < f2 { (x1, f1) } else { (x2, f2) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::Metric4;
    use crate::spacetime::{metric_at, Minkowski, Schwarzschild};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn mink() -> Minkowski {
        Minkowski::default()
    }

    fn schw() -> Schwarzschild {
        Schwarzschild::new(1.0, 1.0).unwrap()
    }

    fn g_at(chart: &dyn Chart, k: &Vec4) -> Metric4 {
        metric_at(chart, k).unwrap()
    }

    /// Equatorial circular timelike orbit at radius r around R = 1.
    fn circular_orbit(r: f64) -> GeodesicIvp {
        let omega = (1.0 / (2.0 * r.powi(3))).sqrt();
        let f = 1.0 - 1.0 / r;
        let ut = 1.0 / (f - r * r * omega * omega).sqrt();
        GeodesicIvp::new(Event::new("schwarzschild", [0.0, r, FRAC_PI_2, 0.0]), Vec4::new(ut, 0.0, 0.0, ut * omega))
    }

    #[test]
    fn straight_lines_in_minkowski() {
        let ivp = GeodesicIvp::new(Event::new("minkowski", [0.0; 4]), Vec4::new(1.0, 0.5, 0.0, 0.0));
        let sol = integrate_geodesic(&mink(), &ivp, 2.0, &Tolerances::default()).unwrap();
        assert!((sol.position(2.0).unwrap() - Vec4::new(2.0, 1.0, 0.0, 0.0)).amax() < 1e-14);

        let sol = integrate_geodesic(&mink(), &ivp, 0.0, &Tolerances::default()).unwrap();
        assert_eq!(sol.position(0.0).unwrap(), Vec4::zeros());
        assert_eq!(sol.velocity(0.0).unwrap(), ivp.velocity);
    }

    #[test]
    fn circular_orbit_conserves_norm() {
        let chart = schw();
        let ivp = circular_orbit(8.0);
        let sol = integrate_geodesic(&chart, &ivp, 10.0, &Tolerances::default()).unwrap();
        let n0 = g_at(&chart, &ivp.start.coords).norm2(&ivp.velocity);
        for i in 0..=100 {
            let s = 0.1 * i as f64;
            let k = sol.position(s).unwrap();
            let n = g_at(&chart, &k).norm2(&sol.velocity(s).unwrap());
            assert!((n - n0).abs() <= 1e-9 * (1.0 + n0.abs()));
            assert!((k[1] - 8.0).abs() < 1e-8);
        }
    }

    #[test]
    fn exp_map_examples() {
        let q = Event::new("minkowski", [0.0; 4]);
        let e = exp_map(&mink(), &q, &Vec4::new(-1.0, 1.0, 0.0, 0.0), &Tolerances::default()).unwrap();
        assert!((e.coords - Vec4::new(-1.0, 1.0, 0.0, 0.0)).amax() < 1e-14);

        let chart = schw();
        let q = Event::new("schwarzschild", [0.0, 10.0, 1.0, 0.0]);
        let k = Vec4::new(-1.0, 0.3, 0.02, 0.05);
        let small = exp_map(&chart, &q, &(k * 1e-8), &Tolerances::default()).unwrap();
        assert!((small.coords - q.coords).amax() < 1e-7);

        // Past-lightlike K built from the static frame.
        let x = chart.reference_frame(&q.coords);
        let k = -x.column(0) * 3.0 + x.column(1) * 1.8 + x.column(2) * 2.4;
        let g0 = g_at(&chart, &q.coords);
        assert!(g0.norm2(&k).abs() < 1e-12);
        let sol = integrate_geodesic(&chart, &GeodesicIvp::new(q.clone(), k), 1.0, &Tolerances::default()).unwrap();
        let g1 = g_at(&chart, &sol.final_position());
        assert!(g1.norm2(&sol.final_velocity()).abs() <= 1e-8);
    }

    #[test]
    fn exp_domain_exit() {
        let chart = schw();
        let q = Event::new("schwarzschild", [0.0, 3.0, FRAC_PI_2, 0.0]);
        let k = Vec4::new(-4.5, -3.0, 0.0, 0.0);
        assert!(matches!(exp_map(&chart, &q, &k, &Tolerances::default()), Err(Error::NotInExpDomain(_))));
        let bad = Event::new("schwarzschild", [0.0, 0.5, FRAC_PI_2, 0.0]);
        assert!(matches!(
            integrate_geodesic(&chart, &GeodesicIvp::new(bad, k), 1.0, &Tolerances::default()),
            Err(Error::OutOfChart { .. })
        ));
    }

    #[test]
    fn parallel_transport_examples() {
        let ivp = GeodesicIvp::new(Event::new("minkowski", [0.0; 4]), Vec4::new(1.0, 0.3, 0.1, 0.0));
        let along = integrate_geodesic(&mink(), &ivp, 3.0, &Tolerances::default()).unwrap();
        let v0 = Vec4::new(0.2, 1.0, -0.5, 0.3);
        let p = parallel_transport(&mink(), &along, &v0).unwrap();
        assert!((p.at(2.5).unwrap() - v0).amax() < 1e-14);

        let chart = schw();
        let ivp = circular_orbit(6.0);
        let along = integrate_geodesic(&chart, &ivp, 20.0, &Tolerances::default()).unwrap();
        let self_transport = parallel_transport(&chart, &along, &ivp.velocity).unwrap();
        let frame = Mat4::new(
            1.0, 0.2, 0.0, 0.1, //
            0.0, 1.0, 0.3, 0.0, //
            0.1, 0.0, 0.2, 0.05, //
            0.02, 0.0, 0.0, 0.15,
        );
        let transported = transport_frame(&chart, &along, &frame).unwrap();
        let gram0 = g_at(&chart, &ivp.start.coords).gram(&frame);
        for i in 0..=20 {
            let s = i as f64;
            let vel = along.velocity(s).unwrap();
            assert!((self_transport.at(s).unwrap() - vel).amax() < 1e-8);
            let gs = g_at(&chart, &transported.position(s).unwrap());
            let cols: Vec<Vec4> = (0..4).map(|c| transported.parallel(c, s).unwrap()).collect();
            let gram = gs.gram(&Mat4::from_columns(&cols));
            assert!((gram - gram0).amax() < 1e-9);
        }
    }

    #[test]
    fn jacobi_examples() {
        let ivp = GeodesicIvp::new(Event::new("minkowski", [0.0; 4]), Vec4::new(1.0, 0.3, 0.1, 0.0));
        let along = integrate_geodesic(&mink(), &ivp, 2.0, &Tolerances::default()).unwrap();
        let j0 = Vec4::new(0.1, 0.0, 1.0, 0.0);
        let dj0 = Vec4::new(0.0, 0.5, 0.0, -1.0);
        let jac = integrate_jacobi(&mink(), &along, &j0, &dj0).unwrap();
        assert!((jac.j(1.5).unwrap() - (j0 + dj0 * 1.5)).amax() < 1e-13);

        let zero = integrate_jacobi(&mink(), &along, &Vec4::zeros(), &Vec4::zeros()).unwrap();
        assert_eq!(zero.j(1.7).unwrap(), Vec4::zeros());
    }

    #[test]
    fn exp_differential_examples() {
        let q = Event::new("minkowski", [0.0; 4]);
        let tols = Tolerances::default();
        let e = Vec4::new(0.3, -1.0, 0.2, 0.7);
        let d = exp_differential(&mink(), &q, &Vec4::new(-1.0, 0.5, 0.5, 0.0), &Vec4::zeros(), &e, &tols).unwrap();
        assert!((d - e).amax() < 1e-13);

        // Against central differences of exp through a curve of initial data.
        let chart = schw();
        let q = Event::new("schwarzschild", [0.0, 6.0, 1.1, 0.2]);
        let k = Vec4::new(-1.5, 0.8, 0.05, -0.1);
        let fiber = Vec4::new(0.1, -0.2, 0.03, 0.05);
        let analytic = exp_differential(&chart, &q, &k, &Vec4::zeros(), &fiber, &tols).unwrap();
        let h = 1e-5;
        let plus = exp_map(&chart, &q, &(k + fiber * h), &tols).unwrap().coords;
        let minus = exp_map(&chart, &q, &(k - fiber * h), &tols).unwrap().coords;
        let fd = (plus - minus) / (2.0 * h);
        assert!((analytic - fd).norm() / fd.norm() < 1e-5);

        // Varying the base point along the geodesic itself: exp(sK) at s = 1 with
        // base direction K and no fiber change moves along γ̇(1).
        let sol = integrate_geodesic(&chart, &GeodesicIvp::new(q.clone(), k), 1.0, &tols).unwrap();
        let along = exp_differential(&chart, &q, &k, &k, &Vec4::zeros(), &tols).unwrap();
        assert!((along - sol.final_velocity()).amax() < 1e-8);
    }

    #[test]
    fn conjugate_detection() {
        let tols = Tolerances::default();
        let q = Event::new("minkowski", [0.0; 4]);
        let r = detect_conjugate(&mink(), &q, &Vec4::new(-1.0, 1.0, 0.0, 0.0), 10.0, 50, &tols).unwrap();
        assert!(r.values.is_empty() && !r.resolution_warning);
        let r = detect_conjugate(&mink(), &q, &Vec4::new(-1.0, 1.0, 0.0, 0.0), 10.0, 1, &tols).unwrap();
        assert!(r.values.is_empty() && r.resolution_warning);
    }

    #[test]
    fn conjugate_point_near_photon_sphere_is_grid_stable() {
        let chart = schw();
        let tols = Tolerances::default();
        let r0 = 4.0;
        let q = Event::new("schwarzschild", [0.0, r0, FRAC_PI_2, 0.0]);
        // Inward null ray with impact parameter slightly above 3√3/2.
        let b = 2.6;
        let f = 1.0 - 1.0 / r0;
        let ut = 1.0 / f;
        let uphi = b / (r0 * r0);
        let ur = -(1.0 - f * b * b / (r0 * r0)).sqrt();
        let k = Vec4::new(ut, ur, 0.0, uphi);
        assert!(g_at(&chart, &q.coords).norm2(&k).abs() < 1e-12);
        let a = detect_conjugate(&chart, &q, &k, 60.0, 200, &tols).unwrap();
        let b2 = detect_conjugate(&chart, &q, &k, 60.0, 400, &tols).unwrap();
        assert!(!a.values.is_empty());
        assert_eq!(a.values.len(), b2.values.len());
        for (x, y) in a.values.iter().zip(&b2.values) {
            assert!((x - y).abs() < 1e-4);
        }
        // The first conjugate point sits at azimuth advance π.
        let sol = integrate_geodesic(&chart, &GeodesicIvp::new(q, k), a.values[0], &tols).unwrap();
        assert!((sol.final_position()[3] - std::f64::consts::PI).abs() < 1e-5);
    }

    fn schw_samples() -> impl Strategy<Value = (Vec4, Vec4, Vec4, Vec4)> {
        (4.0..9.0f64, 0.6..2.4f64, -0.5..0.5f64, prop::array::uniform3(-0.4..0.4f64), prop::array::uniform4(-1.0..1.0f64), prop::array::uniform4(-1.0..1.0f64))
            .prop_map(|(r, th, ph, v, j, dj)| {
                (
                    Vec4::new(0.0, r, th, ph),
                    Vec4::new(1.4, v[0], v[1] / r, v[2] / r),
                    Vec4::from(j),
                    Vec4::from(dj),
                )
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn jacobi_pairing_is_affine((k0, u0, j0, dj0) in schw_samples()) {
            let chart = schw();
            let ivp = GeodesicIvp::new(Event::from_vec("schwarzschild", k0), u0);
            let along = integrate_geodesic(&chart, &ivp, 2.0, &Tolerances::default()).unwrap();
            prop_assume!(along.completed());
            let jac = integrate_jacobi(&chart, &along, &j0, &dj0).unwrap();
            let g0 = g_at(&chart, &k0);
            let (a, b) = (g0.dot(&dj0, &u0), g0.dot(&j0, &u0));
            for i in 0..=8 {
                let s = 0.25 * i as f64;
                let gs = g_at(&chart, &jac.path.position(s).unwrap());
                let pairing = gs.dot(&jac.j(s).unwrap(), &jac.path.velocity(s).unwrap());
                prop_assert!((pairing - (a * s + b)).abs() <= 1e-7);
            }
        }

        #[test]
        fn exp_differential_is_linear((k0, u0, j0, dj0) in schw_samples(), alpha in -2.0..2.0f64) {
            let chart = schw();
            let q = Event::from_vec("schwarzschild", k0);
            let tols = Tolerances::default();
            let k = -u0;
            let e1 = Vec4::new(0.1, 0.2, -0.05, 0.03);
            let both = exp_differential(&chart, &q, &k, &(j0 * alpha + e1), &dj0, &tols).unwrap();
            let a = exp_differential(&chart, &q, &k, &j0, &Vec4::zeros(), &tols).unwrap();
            let b = exp_differential(&chart, &q, &k, &e1, &dj0, &tols).unwrap();
            prop_assert!((both - (a * alpha + b)).amax() <= 1e-9 * (1.0 + both.amax()));
        }
    }
}
