//! Observers and their frames of reference.
//!
//! An observer is a future-directed timelike curve parametrized by proper
//! time, `g(γ̇, γ̇) = c²`. Frames along it are Fermi–Walker transported,
//! optionally followed by a time-dependent spatial rotation.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::error::{Error, Result};
use crate::geodesic::Tolerances;
use crate::lorentz::{
    adapted_frame, causal_character, eta, is_future_directed, validate_frame_of_reference, CausalCharacter,
    Frame4, Mat4, Metric4, Vec4, DEFAULT_CAUSAL_TOL,
};
use crate::ode::{integrate_two_sided, OdeStats, TwoSidedSolution};
use crate::spacetime::{Chart, Event, Minkowski, Schwarzschild};

/// Proper-acceleration program: frame components `A^a(τ)` along the
/// observer's own Fermi–Walker spatial legs.
pub type AccelerationProgram = Arc<dyn Fn(f64) -> Vector3<f64> + Send + Sync>;

/// Tolerance on frame and tangent checks when accepting initial frames.
const FRAME_CHECK_TOL: f64 = 1e-8;

#[derive(Clone)]
enum CurveForm {
    Inertial { q0: Vec4, u0: Vec4 },
    UniformlyAccelerated { a: f64 },
    Static { r: f64, theta: f64, phi: f64, lapse: f64, radius: f64 },
    Numeric(Arc<NumericCurve>),
}

struct NumericCurve {
    /// State `(κ, u, E₁, E₂, E₃)`; `E_a` are Fermi–Walker spatial legs.
    sol: TwoSidedSolution,
    program: Option<AccelerationProgram>,
}

impl fmt::Debug for CurveForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveForm::Inertial { q0, u0 } => f.debug_struct("Inertial").field("q0", q0).field("u0", u0).finish(),
            CurveForm::UniformlyAccelerated { a } => f.debug_struct("UniformlyAccelerated").field("a", a).finish(),
            CurveForm::Static { r, theta, phi, .. } => {
                f.debug_struct("Static").field("r", r).field("theta", theta).field("phi", phi).finish()
            }
            CurveForm::Numeric(n) => f
                .debug_struct("Numeric")
                .field("interval", &(n.sol.t_min(), n.sol.t_max()))
                .field("driven", &n.program.is_some())
                .finish(),
        }
    }
}

/// Position, velocity and covariant acceleration at one proper time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub position: Vec4,
    pub velocity: Vec4,
    pub acceleration: Vec4,
}

/// A worldline parametrized by proper time over a closed interval.
#[derive(Debug, Clone)]
pub struct ObserverCurve {
    chart: Arc<dyn Chart>,
    form: CurveForm,
    lo: f64,
    hi: f64,
}

fn check_interval(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidInput(format!("invalid proper-time interval [{lo}, {hi}]")));
    }
    Ok(())
}

/// Rescales `u0` to `g(u, u) = c²` after checking it is a future-directed
/// timelike vector.
fn normalized_observer_vector(chart: &dyn Chart, q0: &Vec4, u0: &Vec4) -> Result<Vec4> {
    let g = Metric4::new(chart.metric_components(q0))?;
    match causal_character(&g, u0, DEFAULT_CAUSAL_TOL)? {
        CausalCharacter::Timelike => {}
        other => return Err(Error::Domain(format!("observer tangent is {other:?}, not timelike"))),
    }
    let future = chart.reference_frame(q0).column(0).into_owned();
    if !is_future_directed(&g, &future, u0)? {
        return Err(Error::Domain("observer tangent is past-directed".into()));
    }
    Ok(u0 * (chart.c() / g.norm2(u0).sqrt()))
}

fn check_in_chart(chart: &dyn Chart, q: &Vec4) -> Result<()> {
    if chart.contains(q) {
        Ok(())
    } else {
        Err(Error::OutOfChart { chart: chart.id().to_string(), coords: [q[0], q[1], q[2], q[3]] })
    }
}

/// Geodesic observer through `q0` with tangent along `u0`, defined on
/// `[lo, hi]` with `γ(0) = q0`.
pub fn make_inertial_observer(
    chart: Arc<dyn Chart>,
    q0: &Event,
    u0: &Vec4,
    interval: (f64, f64),
    tols: &Tolerances,
) -> Result<ObserverCurve> {
    check_in_chart(chart.as_ref(), &q0.coords)?;
    let u = normalized_observer_vector(chart.as_ref(), &q0.coords, u0)?;
    if chart.is_flat_cartesian() {
        check_interval(interval.0, interval.1)?;
        return Ok(ObserverCurve {
            chart,
            form: CurveForm::Inertial { q0: q0.coords, u0: u },
            lo: interval.0,
            hi: interval.1,
        });
    }
    make_driven_observer(chart, q0, &u, None, None, interval, tols)
}

/// Minkowski observer with constant proper acceleration `a` along the first
/// spatial axis, starting at rest at the origin.
pub fn make_uniformly_accelerated_observer(a: f64, c: f64, interval: (f64, f64)) -> Result<ObserverCurve> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("acceleration must be positive, got {a}")));
    }
    check_interval(interval.0, interval.1)?;
    Ok(ObserverCurve {
        chart: Arc::new(Minkowski::new(c)?),
        form: CurveForm::UniformlyAccelerated { a },
        lo: interval.0,
        hi: interval.1,
    })
}

/// Observer at fixed `(r, θ, φ)` outside a Schwarzschild mass, with
/// coordinate time zero at `τ = 0`.
pub fn make_static_observer(chart: &Schwarzschild, r: f64, theta: f64, phi: f64, interval: (f64, f64)) -> Result<ObserverCurve> {
    check_in_chart(chart, &Vec4::new(0.0, r, theta, phi))?;
    check_interval(interval.0, interval.1)?;
    let lapse = (1.0 - chart.radius() / r).sqrt();
    Ok(ObserverCurve {
        chart: Arc::new(chart.clone()),
        form: CurveForm::Static { r, theta, phi, lapse, radius: chart.radius() },
        lo: interval.0,
        hi: interval.1,
    })
}

/// Observer obtained by integrating an acceleration program from `γ(0) = q0`,
/// `γ̇(0) ∝ u0`. Without a program the worldline is a geodesic.
///
/// `spatial` optionally fixes the initial spatial legs (columns 1–3); by
/// default they are adapted from the chart's reference frame.
pub fn make_driven_observer(
    chart: Arc<dyn Chart>,
    q0: &Event,
    u0: &Vec4,
    spatial: Option<&Mat4>,
    program: Option<AccelerationProgram>,
    interval: (f64, f64),
    tols: &Tolerances,
) -> Result<ObserverCurve> {
    check_interval(interval.0, interval.1)?;
    tols.validate()?;
    check_in_chart(chart.as_ref(), &q0.coords)?;
    let u = normalized_observer_vector(chart.as_ref(), &q0.coords, u0)?;
    let c = chart.c();
    let g = Metric4::new(chart.metric_components(&q0.coords))?;
    let e = match spatial {
        Some(x) => {
            let mut m = *x;
            m.set_column(0, &(u / c));
            let fr = Frame4::new(q0.clone(), m)?;
            let reference = Frame4::new(q0.clone(), chart.reference_frame(&q0.coords))?;
            let future = reference.column(0);
            if !validate_frame_of_reference(&g, &future, &reference, &fr, FRAME_CHECK_TOL) {
                return Err(Error::Domain("initial spatial legs do not complete a frame of reference".into()));
            }
            m
        }
        None => adapted_frame(&g, &chart.reference_frame(&q0.coords), &u)?,
    };
    let mut y0: Vec<f64> = q0.coords.iter().chain(u.iter()).copied().collect();
    for a in 1..4 {
        y0.extend(e.column(a).iter());
    }
    let ch = chart.clone();
    let prog = program.clone();
    let fd = tols.fd_step;
    let rhs = move |tau: f64, y: &[f64], dy: &mut [f64]| -> bool {
        let k = Vec4::from_column_slice(&y[0..4]);
        if !ch.contains(&k) {
            return false;
        }
        let Some(gamma) = ch.christoffels(&k, fd) else { return false };
        let u = Vec4::from_column_slice(&y[4..8]);
        let legs: [Vec4; 3] = std::array::from_fn(|a| Vec4::from_column_slice(&y[8 + 4 * a..12 + 4 * a]));
        let acc = match &prog {
            Some(p) => {
                let comps = p(tau);
                legs[0] * comps[0] + legs[1] * comps[1] + legs[2] * comps[2]
            }
            None => Vec4::zeros(),
        };
        let gm = ch.metric_components(&k);
        let m = gamma.along(&u);
        dy[0..4].copy_from_slice(u.as_slice());
        dy[4..8].copy_from_slice((acc - m * u).as_slice());
        let c2 = c * c;
        for (a, leg) in legs.iter().enumerate() {
            let d = -(m * leg) + acc * (u.dot(&(gm * leg)) / c2) - u * (acc.dot(&(gm * leg)) / c2);
            dy[8 + 4 * a..12 + 4 * a].copy_from_slice(d.as_slice());
        }
        true
    };
    let sol = integrate_two_sided(rhs, 0.0, &y0, interval.0, interval.1, &tols.ode_options())?;
    if !sol.completed() {
        return Err(Error::Domain(format!(
            "observer leaves the chart; covered proper times [{}, {}]",
            sol.t_min(),
            sol.t_max()
        )));
    }
    Ok(ObserverCurve {
        chart,
        form: CurveForm::Numeric(Arc::new(NumericCurve { sol, program })),
        lo: interval.0,
        hi: interval.1,
    })
}

impl ObserverCurve {
    pub fn chart(&self) -> &Arc<dyn Chart> {
        &self.chart
    }

    pub fn c(&self) -> f64 {
        self.chart.c()
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn contains(&self, tau: f64) -> bool {
        tau >= self.lo && tau <= self.hi
    }

    /// Short label of the curve family.
    pub fn kind(&self) -> &'static str {
        match &self.form {
            CurveForm::Inertial { .. } => "inertial",
            CurveForm::UniformlyAccelerated { .. } => "uniformly-accelerated",
            CurveForm::Static { .. } => "static",
            CurveForm::Numeric(n) if n.program.is_some() => "driven",
            CurveForm::Numeric(_) => "geodesic",
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.form, CurveForm::Numeric(_))
    }

    pub fn integrator_stats(&self) -> OdeStats {
        match &self.form {
            CurveForm::Numeric(n) => n.sol.stats(),
            _ => OdeStats::default(),
        }
    }

    fn check(&self, tau: f64) -> Result<()> {
        if self.contains(tau) {
            Ok(())
        } else {
            Err(Error::OutsideInterval { value: tau, lo: self.lo, hi: self.hi })
        }
    }

    pub fn kinematics(&self, tau: f64) -> Result<Kinematics> {
        self.check(tau)?;
        let c = self.c();
        Ok(match &self.form {
            CurveForm::Inertial { q0, u0 } => {
                Kinematics { position: q0 + u0 * tau, velocity: *u0, acceleration: Vec4::zeros() }
            }
            CurveForm::UniformlyAccelerated { a } => {
                let (sh, ch) = ((a * tau / c).sinh(), (a * tau / c).cosh());
                let l = c * c / a;
                Kinematics {
                    position: Vec4::new(l * sh, l * (ch - 1.0), 0.0, 0.0),
                    velocity: Vec4::new(c * ch, c * sh, 0.0, 0.0),
                    acceleration: Vec4::new(a * sh, a * ch, 0.0, 0.0),
                }
            }
            CurveForm::Static { r, theta, phi, lapse, radius } => Kinematics {
                position: Vec4::new(c * tau / lapse, *r, *theta, *phi),
                velocity: Vec4::new(c / lapse, 0.0, 0.0, 0.0),
                acceleration: Vec4::new(0.0, c * c * radius / (2.0 * r * r), 0.0, 0.0),
            },
            CurveForm::Numeric(n) => {
                let y = n.sol.eval(tau).ok_or(Error::OutsideInterval { value: tau, lo: self.lo, hi: self.hi })?;
                let acceleration = match &n.program {
                    Some(p) => {
                        let comps = p(tau);
                        (0..3).map(|a| Vec4::from_column_slice(&y[8 + 4 * a..12 + 4 * a]) * comps[a]).sum()
                    }
                    None => Vec4::zeros(),
                };
                Kinematics {
                    position: Vec4::from_column_slice(&y[0..4]),
                    velocity: Vec4::from_column_slice(&y[4..8]),
                    acceleration,
                }
            }
        })
    }

    pub fn position(&self, tau: f64) -> Result<Vec4> {
        Ok(self.kinematics(tau)?.position)
    }

    pub fn velocity(&self, tau: f64) -> Result<Vec4> {
        Ok(self.kinematics(tau)?.velocity)
    }

    pub fn event(&self, tau: f64) -> Result<Event> {
        Ok(Event::from_vec(self.chart.id(), self.position(tau)?))
    }

    pub fn metric(&self, tau: f64) -> Result<Metric4> {
        Ok(Metric4::new_unchecked(self.chart.metric_components(&self.position(tau)?)))
    }

    /// The curve's own Fermi–Walker frame (`E₀ = γ̇/c`), for numeric curves.
    fn carried_frame(&self, tau: f64) -> Option<Mat4> {
        let CurveForm::Numeric(n) = &self.form else { return None };
        let y = n.sol.eval(tau)?;
        let c = self.c();
        let mut m = Mat4::zeros();
        m.set_column(0, &(Vec4::from_column_slice(&y[4..8]) / c));
        for a in 1..4 {
            m.set_column(a, &Vec4::from_column_slice(&y[4 + 4 * a..8 + 4 * a]));
        }
        Some(m)
    }
}

/// `A = ∇γ̇/dτ` and its magnitude `sqrt(-g(A, A))`.
pub fn proper_acceleration(curve: &ObserverCurve, tau: f64) -> Result<(Vec4, f64)> {
    let k = curve.kinematics(tau)?;
    let g = curve.metric(tau)?;
    Ok((k.acceleration, (-g.norm2(&k.acceleration)).max(0.0).sqrt()))
}

/// Five-point central difference, shifted inward near the interval ends.
pub(crate) fn derivative5<F>(f: F, t: f64, h: f64, lo: f64, hi: f64) -> Result<Vec4>
where
    F: Fn(f64) -> Result<Vec4>,
{
    if hi - lo < 4.0 * h {
        return Err(Error::InvalidInput(format!("interval [{lo}, {hi}] too short for differencing")));
    }
    let center = t.clamp(lo + 2.0 * h, hi - 2.0 * h);
    let x = (t - center) / h;
    let v: Vec<Vec4> = (-2..=2).map(|k| f(center + k as f64 * h)).collect::<Result<_>>()?;
    // Derivative of the quartic through the five samples, at offset x.
    let w = [
        (2.0 * x.powi(3) - 3.0 * x * x - x + 1.0) / 12.0,
        (-4.0 * x.powi(3) + 3.0 * x * x + 8.0 * x - 4.0) / 6.0,
        (2.0 * x.powi(3) - 5.0 * x) / 2.0,
        (-4.0 * x.powi(3) - 3.0 * x * x + 8.0 * x + 4.0) / 6.0,
        (2.0 * x.powi(3) + 3.0 * x * x - x - 1.0) / 12.0,
    ];
    Ok(v.iter().zip(w).map(|(vi, wi)| vi * wi).sum::<Vec4>() / h)
}

/// Step for differencing fields along observers, in proper-time units.
const FIELD_DIFF_STEP: f64 = 1e-3;

/// Fermi–Walker derivative of the field `y` along `curve` at `tau`:
/// `∇Y/dτ - c⁻² g(γ̇, Y) A + c⁻² g(A, Y) γ̇`.
pub fn fermi_walker_derivative<F>(curve: &ObserverCurve, y: F, tau: f64, fd_step: f64) -> Result<Vec4>
where
    F: Fn(f64) -> Result<Vec4>,
{
    let k = curve.kinematics(tau)?;
    let (lo, hi) = curve.interval();
    let dy = derivative5(&y, tau, FIELD_DIFF_STEP.min((hi - lo) / 8.0), lo, hi)?;
    let gamma = curve
        .chart
        .christoffels(&k.position, fd_step)
        .ok_or_else(|| Error::Domain("connection unavailable at observer position".into()))?;
    let yv = y(tau)?;
    let cov = dy + gamma.contract(&k.velocity, &yv);
    let g = curve.metric(tau)?;
    let c2 = curve.c().powi(2);
    Ok(cov - k.acceleration * (g.dot(&k.velocity, &yv) / c2) + k.velocity * (g.dot(&k.acceleration, &yv) / c2))
}

#[derive(Debug, Clone)]
enum FrameBase {
    /// Frame columns integrated along an analytic curve.
    Integrated(Arc<TwoSidedSolution>),
    /// Constant recombination `X = E M` of a numeric curve's carried frame.
    Carried(Mat4),
}

/// A frame of reference along an observer.
#[derive(Debug, Clone)]
pub struct FrameField {
    curve: ObserverCurve,
    base: FrameBase,
    /// Angular velocities of successive spatial rotations, applied in order.
    rotations: Vec<Vector3<f64>>,
}

/// Residuals of the frame-of-reference conditions at one proper time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameCheck {
    pub gram_residual: f64,
    pub tangent_residual: f64,
    pub valid: bool,
}

fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0)
}

fn embed(r: &Matrix3<f64>) -> Mat4 {
    crate::lorentz::spatial_embed(r)
}

/// `c⁻²[g(γ̇, X) A - g(A, X) γ̇]` column by column: the covariant derivative
/// of a Fermi–Walker transported frame.
fn fw_rate(g: &Metric4, k: &Kinematics, x: &Mat4, c: f64) -> Mat4 {
    let c2 = c * c;
    let mut out = Mat4::zeros();
    for i in 0..4 {
        let xi = x.column(i).into_owned();
        let col = k.acceleration * (g.dot(&k.velocity, &xi) / c2) - k.velocity * (g.dot(&k.acceleration, &xi) / c2);
        out.set_column(i, &col);
    }
    out
}

/// Fermi–Walker transports the frame `x0` given at `γ(tau0)` over the whole
/// curve interval.
pub fn fermi_walker_transport(curve: &ObserverCurve, tau0: f64, x0: &Mat4, tols: &Tolerances) -> Result<FrameField> {
    let k0 = curve.kinematics(tau0)?;
    let g0 = curve.metric(tau0)?;
    let c = curve.c();
    let q0 = Event::from_vec(curve.chart.id(), k0.position);
    let frame = Frame4::new(q0.clone(), *x0)?;
    let reference = Frame4::new(q0, curve.chart.reference_frame(&k0.position))?;
    if frame.gram_residual(&g0) > FRAME_CHECK_TOL {
        return Err(Error::Domain(format!("initial frame is not orthonormal (residual {:e})", frame.gram_residual(&g0))));
    }
    let tangent = (frame.column(0) - k0.velocity / c).amax();
    if tangent > FRAME_CHECK_TOL * (1.0 + (k0.velocity / c).amax()) {
        return Err(Error::Domain(format!("initial frame's timelike leg is not γ̇/c (residual {tangent:e})")));
    }
    if !validate_frame_of_reference(&g0, &reference.column(0), &reference, &frame, FRAME_CHECK_TOL) {
        return Err(Error::Domain("initial frame is not a frame of reference".into()));
    }
    if let Some(e) = curve.carried_frame(tau0) {
        let inv = e.try_inverse().ok_or(Error::Domain("carried frame is singular".into()))?;
        return Ok(FrameField { curve: curve.clone(), base: FrameBase::Carried(inv * x0), rotations: vec![] });
    }
    tols.validate()?;
    let chart = curve.chart.clone();
    let cv = curve.clone();
    let fd = tols.fd_step;
    let rhs = move |tau: f64, y: &[f64], dy: &mut [f64]| -> bool {
        let Ok(k) = cv.kinematics(tau) else { return false };
        if !chart.contains(&k.position) {
            return false;
        }
        let Some(gamma) = chart.christoffels(&k.position, fd) else { return false };
        let g = Metric4::new_unchecked(chart.metric_components(&k.position));
        let x = Mat4::from_column_slice(y);
        let d = fw_rate(&g, &k, &x, c) - gamma.along(&k.velocity) * x;
        dy.copy_from_slice(d.as_slice());
        true
    };
    let (lo, hi) = curve.interval();
    let sol = integrate_two_sided(rhs, tau0, x0.as_slice(), lo, hi, &tols.ode_options())?;
    if !sol.completed() {
        return Err(Error::Domain("frame transport left the chart".into()));
    }
    Ok(FrameField { curve: curve.clone(), base: FrameBase::Integrated(Arc::new(sol)), rotations: vec![] })
}

/// Fermi–Walker frame adapted from the chart's reference frame at `γ(0)`
/// (or the nearest end of the interval).
pub fn standard_frame(curve: &ObserverCurve, tols: &Tolerances) -> Result<FrameField> {
    let (lo, hi) = curve.interval();
    let tau0 = 0.0_f64.clamp(lo, hi);
    let k = curve.kinematics(tau0)?;
    let g = curve.metric(tau0)?;
    let x0 = adapted_frame(&g, &curve.chart.reference_frame(&k.position), &k.velocity)?;
    fermi_walker_transport(curve, tau0, &x0, tols)
}

/// Rotates the spatial legs of `base` about its leg `axis` (1, 2 or 3) with
/// angular velocity `omega`; the rotation angle is `ωτ`.
pub fn rotating_frame(base: &FrameField, omega: f64, axis: usize) -> Result<FrameField> {
    if !(1..=3).contains(&axis) {
        return Err(Error::InvalidInput(format!("rotation axis must be 1, 2 or 3, got {axis}")));
    }
    let mut w = Vector3::zeros();
    w[axis - 1] = omega;
    rotating_frame_about(base, &w)
}

/// Rotates the spatial legs of `base` with constant angular velocity vector
/// `w` (frame components); the rotation at `τ` is `exp(τ [w]×)`.
pub fn rotating_frame_about(base: &FrameField, w: &Vector3<f64>) -> Result<FrameField> {
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite angular velocity".into()));
    }
    let mut out = base.clone();
    if w.amax() != 0.0 {
        out.rotations.push(*w);
    }
    Ok(out)
}

impl FrameField {
    pub fn curve(&self) -> &ObserverCurve {
        &self.curve
    }

    pub fn chart(&self) -> &Arc<dyn Chart> {
        &self.curve.chart
    }

    pub fn c(&self) -> f64 {
        self.curve.c()
    }

    pub fn is_rotating(&self) -> bool {
        !self.rotations.is_empty()
    }

    pub fn integrator_stats(&self) -> OdeStats {
        let mut s = self.curve.integrator_stats();
        if let FrameBase::Integrated(sol) = &self.base {
            s.merge(&sol.stats());
        }
        s
    }

    fn fermi_walker_columns(&self, tau: f64) -> Result<Mat4> {
        self.curve.check(tau)?;
        let (lo, hi) = self.curve.interval();
        let missing = Error::OutsideInterval { value: tau, lo, hi };
        match &self.base {
            FrameBase::Integrated(sol) => sol.eval(tau).map(|y| Mat4::from_column_slice(&y)).ok_or(missing),
            FrameBase::Carried(m) => self.curve.carried_frame(tau).map(|e| e * m).ok_or(missing),
        }
    }

    /// Spatial rotation `R(τ)` and its derivative, embedded as `1 ⊕ R`.
    fn rotation(&self, tau: f64) -> (Mat4, Mat4) {
        let mats: Vec<Matrix3<f64>> =
            self.rotations.iter().map(|w| *Rotation3::from_scaled_axis(w * tau).matrix()).collect();
        let mut r = Matrix3::identity();
        for m in &mats {
            r *= m;
        }
        let mut dr = Matrix3::zeros();
        for (i, w) in self.rotations.iter().enumerate() {
            let mut term = Matrix3::identity();
            for (j, m) in mats.iter().enumerate() {
                term *= if j == i { skew(w) * m } else { *m };
            }
            dr += term;
        }
        let mut d = embed(&dr);
        d[(0, 0)] = 0.0;
        (embed(&r), d)
    }

    /// Frame components `X(τ)` (columns `X₀…X₃`).
    pub fn columns_at(&self, tau: f64) -> Result<Mat4> {
        let x = self.fermi_walker_columns(tau)?;
        if self.rotations.is_empty() {
            return Ok(x);
        }
        Ok(x * self.rotation(tau).0)
    }

    pub fn frame_at(&self, tau: f64) -> Result<Frame4> {
        Frame4::new(self.curve.event(tau)?, self.columns_at(tau)?)
    }

    /// Covariant derivative `∇X/dτ` of every column.
    pub fn derivative_at(&self, tau: f64) -> Result<Mat4> {
        let x = self.fermi_walker_columns(tau)?;
        let k = self.curve.kinematics(tau)?;
        let g = self.curve.metric(tau)?;
        let dx = fw_rate(&g, &k, &x, self.c());
        if self.rotations.is_empty() {
            return Ok(dx);
        }
        let (r, dr) = self.rotation(tau);
        Ok(dx * r + x * dr)
    }

    /// Frame-of-reference residuals at `tau`.
    pub fn check(&self, tau: f64) -> Result<FrameCheck> {
        let x = self.columns_at(tau)?;
        let k = self.curve.kinematics(tau)?;
        let g = self.curve.metric(tau)?;
        let gram_residual = (g.gram(&x) - eta()).amax();
        let tangent_residual = (x.column(0) - k.velocity / self.c()).amax();
        let q = Event::from_vec(self.curve.chart.id(), k.position);
        let reference = Frame4::new(q.clone(), self.curve.chart.reference_frame(&k.position))?;
        let valid = validate_frame_of_reference(&g, &reference.column(0), &reference, &Frame4::new(q, x)?, 1e-8);
        Ok(FrameCheck { gram_residual, tangent_residual, valid })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{integrate_geodesic, parallel_transport, GeodesicIvp};
    use crate::lorentz::projectors;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    fn mink() -> Arc<dyn Chart> {
        Arc::new(Minkowski::default())
    }

    fn schw() -> Schwarzschild {
        Schwarzschild::new(1.0, 1.0).unwrap()
    }

    fn free_faller() -> ObserverCurve {
        let chart = schw();
        let f: f64 = 1.0 - 1.0 / 10.0;
        let q0 = Event::new("schwarzschild", [0.0, 10.0, 1.2, 0.3]);
        make_inertial_observer(Arc::new(chart), &q0, &Vec4::new(1.0 / f.sqrt(), 0.0, 0.0, 0.0), (-3.0, 5.0), &tols())
            .unwrap()
    }

    #[test]
    fn inertial_observer_examples() {
        let q0 = Event::new("minkowski", [0.0; 4]);
        let obs = make_inertial_observer(mink(), &q0, &Vec4::new(1.0, 0.0, 0.0, 0.0), (-5.0, 5.0), &tols()).unwrap();
        assert_eq!(obs.position(2.5).unwrap(), Vec4::new(2.5, 0.0, 0.0, 0.0));
        assert_eq!(obs.position(0.0).unwrap(), q0.coords);
        // Tangents are normalized internally.
        let obs = make_inertial_observer(mink(), &q0, &Vec4::new(2.0, 1.0, 0.0, 0.0), (0.0, 1.0), &tols()).unwrap();
        let g = obs.metric(0.5).unwrap();
        assert!((g.norm2(&obs.velocity(0.5).unwrap()) - 1.0).abs() < 1e-14);
        assert!(matches!(
            make_inertial_observer(mink(), &q0, &Vec4::new(1.0, 1.0, 0.0, 0.0), (0.0, 1.0), &tols()),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            make_inertial_observer(mink(), &q0, &Vec4::new(-1.0, 0.0, 0.0, 0.0), (0.0, 1.0), &tols()),
            Err(Error::Domain(_))
        ));

        let ff = free_faller();
        for i in 0..=40 {
            let tau = -3.0 + 0.2 * i as f64;
            let k = ff.kinematics(tau).unwrap();
            let g = ff.metric(tau).unwrap();
            assert!((g.norm2(&k.velocity) - 1.0).abs() <= 1e-9);
        }
        assert!(ff.position(4.0).unwrap()[1] < 10.0);
    }

    #[test]
    fn uniformly_accelerated_examples() {
        let obs = make_uniformly_accelerated_observer(1.0, 1.0, (-3.0, 3.0)).unwrap();
        assert_eq!(obs.position(0.0).unwrap(), Vec4::zeros());
        let p = obs.position(1.0).unwrap();
        assert!((p - Vec4::new(1f64.sinh(), 1f64.cosh() - 1.0, 0.0, 0.0)).amax() < 1e-15);
        for i in 0..=12 {
            let tau = -3.0 + 0.5 * i as f64;
            let (_, a) = proper_acceleration(&obs, tau).unwrap();
            assert!((a - 1.0).abs() <= 1e-10);
        }
        assert!(matches!(make_uniformly_accelerated_observer(0.0, 1.0, (0.0, 1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn proper_acceleration_matches_differences() {
        let q0 = Event::new("minkowski", [0.0; 4]);
        let inertial = make_inertial_observer(mink(), &q0, &Vec4::new(1.0, 0.2, 0.0, 0.0), (0.0, 2.0), &tols()).unwrap();
        let (a_vec, a) = proper_acceleration(&inertial, 1.0).unwrap();
        assert_eq!((a_vec, a), (Vec4::zeros(), 0.0));

        let s = schw();
        let obs = make_static_observer(&s, 4.0, 1.0, 0.0, (-1.0, 1.0)).unwrap();
        let tau = 0.3;
        let (acc, mag) = proper_acceleration(&obs, tau).unwrap();
        let k = obs.kinematics(tau).unwrap();
        let g = obs.metric(tau).unwrap();
        assert!(g.dot(&acc, &k.velocity).abs() <= 1e-8 * mag);
        let vel = |t: f64| obs.velocity(t);
        let dv = derivative5(vel, tau, 1e-3, -1.0, 1.0).unwrap();
        let gamma = s.analytic_christoffels(&k.position).unwrap();
        let fd_acc = dv + gamma.contract(&k.velocity, &k.velocity);
        assert!((fd_acc - acc).norm() / acc.norm() <= 1e-6);
        // Known magnitude: R c² / (2 r² sqrt(1 - R/r)).
        assert!((mag - 1.0 / (32.0 * 0.75f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn fermi_walker_derivative_examples() {
        let acc = make_uniformly_accelerated_observer(1.0, 1.0, (-2.0, 2.0)).unwrap();
        let vel = |t: f64| acc.velocity(t);
        let d = fermi_walker_derivative(&acc, vel, 0.7, 1e-5).unwrap();
        assert!(d.amax() < 1e-9);

        let q0 = Event::new("minkowski", [0.0; 4]);
        let inertial = make_inertial_observer(mink(), &q0, &Vec4::new(1.0, 0.0, 0.0, 0.0), (0.0, 2.0), &tols()).unwrap();
        let y = |t: f64| Ok(Vec4::new(t * t, t.sin(), 1.0, -t));
        let d = fermi_walker_derivative(&inertial, y, 1.0, 1e-5).unwrap();
        assert!((d - Vec4::new(2.0, 1f64.cos(), 0.0, -1.0)).amax() < 1e-9);

        // Projector form: P_perp ∇(P_perp Y)/dτ + P_par ∇(P_par Y)/dτ.
        let y = |t: f64| Ok(Vec4::new(1.0 + 0.3 * t, t.cos(), 0.2 * t * t, 0.5));
        let tau = 0.4;
        let fw = fermi_walker_derivative(&acc, y, tau, 1e-5).unwrap();
        let g = Metric4::minkowski();
        let par_y = |t: f64| -> Result<Vec4> {
            let (p, _) = projectors(&g, &acc.velocity(t)?)?;
            Ok(p * y(t)?)
        };
        let perp_y = |t: f64| -> Result<Vec4> {
            let (_, q) = projectors(&g, &acc.velocity(t)?)?;
            Ok(q * y(t)?)
        };
        let (p, q) = projectors(&g, &acc.velocity(tau).unwrap()).unwrap();
        let d_par = derivative5(par_y, tau, 1e-3, -2.0, 2.0).unwrap();
        let d_perp = derivative5(perp_y, tau, 1e-3, -2.0, 2.0).unwrap();
        let oracle = p * d_par + q * d_perp;
        assert!((fw - oracle).amax() <= 1e-8);
    }

    fn accelerated_frame_columns(tau: f64, omega: f64) -> Mat4 {
        let (s, ch) = (tau.sinh(), tau.cosh());
        let (sw, cw) = (omega * tau).sin_cos();
        Mat4::new(
            ch, s, 0.0, 0.0, //
            s, ch, 0.0, 0.0, //
            0.0, 0.0, cw, -sw, //
            0.0, 0.0, sw, cw,
        )
    }

    #[test]
    fn fermi_walker_transport_examples() {
        let q0 = Event::new("minkowski", [0.0; 4]);
        let inertial = make_inertial_observer(mink(), &q0, &Vec4::new(1.0, 0.0, 0.0, 0.0), (-1.0, 3.0), &tols()).unwrap();
        let fw = standard_frame(&inertial, &tols()).unwrap();
        assert!((fw.columns_at(2.0).unwrap() - Mat4::identity()).amax() < 1e-14);

        let acc = make_uniformly_accelerated_observer(1.0, 1.0, (-2.0, 5.0)).unwrap();
        let fw = standard_frame(&acc, &tols()).unwrap();
        for i in 0..=35 {
            let tau = -2.0 + 0.2 * i as f64;
            let x = fw.columns_at(tau).unwrap();
            if tau <= 2.0 {
                assert!((x - accelerated_frame_columns(tau, 0.0)).amax() <= 1e-8, "tau={tau}");
            }
            let chk = fw.check(tau).unwrap();
            assert!(chk.gram_residual <= 1e-9 && chk.valid);
        }

        let bad = Mat4::from_diagonal(&Vec4::new(1.0, 1.0, 1.2, 1.0));
        assert!(matches!(fermi_walker_transport(&acc, 0.0, &bad, &tols()), Err(Error::Domain(_))));
    }

    #[test]
    fn rotating_frame_examples() {
        let acc = make_uniformly_accelerated_observer(1.0, 1.0, (-2.0, 2.0)).unwrap();
        let fw = standard_frame(&acc, &tols()).unwrap();
        let same = rotating_frame(&fw, 0.0, 1).unwrap();
        assert_eq!(same.columns_at(1.1).unwrap(), fw.columns_at(1.1).unwrap());

        let rot = rotating_frame(&fw, 1.0, 1).unwrap();
        let x = rot.columns_at(std::f64::consts::FRAC_PI_2).unwrap();
        assert!((x.column(2) - Vec4::new(0.0, 0.0, 0.0, 1.0)).amax() < 1e-8);
        assert!((x.column(3) - Vec4::new(0.0, 0.0, -1.0, 0.0)).amax() < 1e-8);
        for i in 0..=8 {
            let tau = -2.0 + 0.5 * i as f64;
            assert!((rot.columns_at(tau).unwrap() - accelerated_frame_columns(tau, 1.0)).amax() < 1e-8);
        }

        // Rotation is visible to the Fermi–Walker derivative.
        let leg2 = |t: f64| Ok(rot.columns_at(t)?.column(2).into_owned());
        let d = fermi_walker_derivative(rot.curve(), leg2, 0.5, 1e-5).unwrap();
        assert!(d.amax() > 0.5);
        let leg2_fw = |t: f64| Ok(fw.columns_at(t)?.column(2).into_owned());
        assert!(fermi_walker_derivative(fw.curve(), leg2_fw, 0.5, 1e-5).unwrap().amax() < 1e-8);

        // Analytic covariant derivative of the rotating frame agrees with differencing.
        let dx = rot.derivative_at(0.5).unwrap();
        for i in 0..4 {
            let col = |t: f64| Ok(rot.columns_at(t)?.column(i).into_owned());
            let d = derivative5(col, 0.5, 1e-3, -2.0, 2.0).unwrap();
            assert!((d - dx.column(i)).amax() < 1e-8);
        }
        assert!(rotating_frame(&fw, 1.0, 4).is_err());
    }

    #[test]
    fn geodesic_observers_transport_like_parallel_frames() {
        let ff = free_faller();
        let fw = standard_frame(&ff, &tols()).unwrap();
        let x0 = fw.columns_at(0.0).unwrap();
        let k0 = ff.kinematics(0.0).unwrap();
        let ivp = GeodesicIvp::new(Event::from_vec("schwarzschild", k0.position), k0.velocity);
        let chart = schw();
        let along = integrate_geodesic(&chart, &ivp, 4.0, &tols()).unwrap();
        for i in 0..4 {
            let p = parallel_transport(&chart, &along, &x0.column(i).into_owned()).unwrap();
            for s in [1.0, 2.5, 4.0] {
                assert!((p.at(s).unwrap() - fw.columns_at(s).unwrap().column(i)).amax() <= 1e-8);
            }
        }
        for i in 0..=16 {
            let tau = -3.0 + 0.5 * i as f64;
            let chk = fw.check(tau).unwrap();
            assert!(chk.gram_residual <= 1e-8 && chk.tangent_residual <= 1e-9 && chk.valid);
        }
    }

    #[test]
    fn driven_observer_in_flat_space_matches_hyperbolic_motion() {
        let program: AccelerationProgram = Arc::new(|_| Vector3::new(1.0, 0.0, 0.0));
        let q0 = Event::new("minkowski", [0.0; 4]);
        let obs =
            make_driven_observer(mink(), &q0, &Vec4::new(1.0, 0.0, 0.0, 0.0), None, Some(program), (-2.0, 2.0), &tols())
                .unwrap();
        let exact = make_uniformly_accelerated_observer(1.0, 1.0, (-2.0, 2.0)).unwrap();
        for i in 0..=8 {
            let tau = -2.0 + 0.5 * i as f64;
            let a = obs.kinematics(tau).unwrap();
            let b = exact.kinematics(tau).unwrap();
            assert!((a.position - b.position).amax() < 1e-8);
            assert!((a.acceleration - b.acceleration).amax() < 1e-8);
        }
        let fw = standard_frame(&obs, &tols()).unwrap();
        let x = fw.columns_at(1.5).unwrap();
        assert!((x - accelerated_frame_columns(1.5, 0.0)).amax() < 1e-8);
    }
}
