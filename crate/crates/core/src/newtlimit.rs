//! Expansions in `ε = 1/c` and numerical checks of the Newtonian limit.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodesic::Tolerances;
use crate::lorentz::{Mat4, Vec4};
use crate::observer::{
    make_inertial_observer, make_static_observer, make_uniformly_accelerated_observer, rotating_frame,
    standard_frame, FrameField,
};
use crate::spacetime::{Chart, Event, Minkowski, Schwarzschild};
use crate::splitting::{
    observe_curve, pullback_metric_alpha, relative_force, tau_dot, InversionConfig, ObserveConfig, ObservedEvent,
    Vec3, Worldline,
};

/// Truncated power series `c₀ + c₁ε + c₂ε² + O(ε³)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Series2 {
    pub c: [f64; 3],
}

impl Series2 {
    pub const ONE: Series2 = Series2 { c: [1.0, 0.0, 0.0] };

    pub fn new(c0: f64, c1: f64, c2: f64) -> Self {
        Self { c: [c0, c1, c2] }
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    /// Cauchy product truncated at `ε²`.
    pub fn mul(&self, g: &Series2) -> Series2 {
        let (f, g) = (self.c, g.c);
        Series2::new(f[0] * g[0], f[0] * g[1] + f[1] * g[0], f[0] * g[2] + f[1] * g[1] + f[2] * g[0])
    }

    /// Multiplicative inverse `(1/c₀, -c₁/c₀², c₁²/c₀³ - c₂/c₀²)`.
    pub fn inv(&self) -> Result<Series2> {
        let [c0, c1, c2] = self.c;
        if c0 == 0.0 || !c0.is_finite() {
            return Err(Error::NonInvertible);
        }
        Ok(Series2::new(1.0 / c0, -c1 / (c0 * c0), c1 * c1 / (c0 * c0 * c0) - c2 / (c0 * c0)))
    }

    pub fn add(&self, g: &Series2) -> Series2 {
        Series2::new(self.c[0] + g.c[0], self.c[1] + g.c[1], self.c[2] + g.c[2])
    }

    pub fn scale(&self, k: f64) -> Series2 {
        Series2::new(self.c[0] * k, self.c[1] * k, self.c[2] * k)
    }

    pub fn eval(&self, eps: f64) -> f64 {
        self.c[0] + eps * (self.c[1] + eps * self.c[2])
    }
}

/// Second-order expansion of `τ̇` for two inertial observers in Minkowski
/// space, in powers of `1/c`: `(1, (x̂·v̂)v, ((x̂·v̂)² + ½)v²)`.
pub fn sr_tau_dot_series(xv: f64, v: f64) -> Result<Series2> {
    if !(xv.abs() <= 1.0 + 1e-12) || !(v >= 0.0) {
        return Err(Error::InvalidInput(format!("need |x̂·v̂| ≤ 1 and v ≥ 0, got {xv}, {v}")));
    }
    Ok(Series2::new(1.0, xv * v, (xv * xv + 0.5) * v * v))
}

/// Expansions of `τ̈/τ̇²` and `1/τ̇²` in powers of `1/c` for inertial frames
/// in Minkowski space.
///
/// With `A = x̂·v⃗` and `A' = x̂·dv⃗/dτ + v²(1 - (x̂·v̂)²)/|x⃗|`:
/// `τ̈/τ̇² = A' ε + (v⃗·dv⃗/dτ + A A') ε²` and `1/τ̇² = 1 - 2A ε + (A² - v²) ε²`.
pub fn sr_force_correction(xhat: &Vec3, v: &Vec3, dv_dtau: &Vec3, r: f64) -> Result<(Series2, Series2)> {
    if !(r > 0.0) {
        return Err(Error::InvalidInput("need |x| > 0".into()));
    }
    let xhat = xhat.normalize();
    let a = xhat.dot(v);
    let v2 = v.norm_squared();
    let a_dot = xhat.dot(dv_dtau) + (v2 - a * a) / r;
    let ratio = Series2::new(0.0, a_dot, v.dot(dv_dtau) + a * a_dot);
    let inv_sq = Series2::new(1.0, -2.0 * a, a * a - v2);
    Ok((ratio, inv_sq))
}

/// Exact `τ̈/τ̇²` for inertial frames in Minkowski space.
pub fn sr_tau_ratio_exact(xhat: &Vec3, v: &Vec3, dv_dtau: &Vec3, r: f64, c: f64) -> f64 {
    let xhat = xhat.normalize();
    let eps = 1.0 / c;
    let a = xhat.dot(v);
    let v2 = v.norm_squared();
    let a_dot = xhat.dot(dv_dtau) + (v2 - a * a) / r;
    let q = 1.0 - 2.0 * a * eps + (a * a - v2) * eps * eps;
    let dq = -2.0 * a_dot * eps + 2.0 * (a * a_dot - v.dot(dv_dtau)) * eps * eps;
    -0.5 * dq / q
}

/// Outcome of expanding `τ̇` for a general pulled-back metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauDotExpansion {
    Series(Series2),
    /// `α₀₀ ≠ 1`: no Newtonian limit with `c`-independent `α`.
    Obstructed { alpha00: f64 },
}

/// Second-order expansion of `τ̇ = (α₀₀ + 2α₀ₐvᵃ/c + α_ab vᵃvᵇ/c²)^{-1/2}`
/// for `α` independent of `c`.
pub fn general_tau_dot_series(alpha: &Mat4, v: &Vec3) -> Result<TauDotExpansion> {
    let a00 = alpha[(0, 0)];
    if !(a00 > 0.0) {
        return Err(Error::Signature(a00));
    }
    if (a00 - 1.0).abs() > 1e-12 {
        return Ok(TauDotExpansion::Obstructed { alpha00: a00 });
    }
    let a0v: f64 = (0..3).map(|a| alpha[(0, a + 1)] * v[a]).sum();
    let avv: f64 = (0..3).map(|a| (0..3).map(|b| alpha[(a + 1, b + 1)] * v[a] * v[b]).sum::<f64>()).sum();
    Ok(TauDotExpansion::Series(Series2::new(
        1.0 / a00.sqrt(),
        -a0v / a00.powf(1.5),
        (3.0 * a0v * a0v - a00 * avv) / (2.0 * a00.powf(2.5)),
    )))
}

/// `α` as a function of `(τ, x⃗)`.
pub type AlphaField<'a> = dyn Fn(f64, &Vec3) -> Result<Mat4> + 'a;

/// Zeroth-order relative force in the Newtonian limit, or why it does not
/// exist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitForce {
    Force(Vec3),
    Obstructed {
        alpha00: f64,
        /// `max |ᾱ^{ca} ∂τ α_{a0}|`.
        time_drift: f64,
        /// `max |ᾱ^{cb} (α_{b0,a} - α_{0a,b})|`.
        curl: f64,
    },
}

/// Step for differencing `α` in the limit formulas.
pub const LIMIT_FD_STEP: f64 = 1e-3;

fn five_point<F: Fn(f64) -> Result<Mat4>>(f: F, h: f64) -> Result<Mat4> {
    Ok((f(-2.0 * h)? - f(-h)? * 8.0 + f(h)? * 8.0 - f(2.0 * h)?) / (12.0 * h))
}

/// Zeroth-order force `-m ᾱ^{cb} ∂τα_ab vᵃ - (m/2) ᾱ^{cl}(α_la,b + α_lb,a - δ_lᵈ α_ab,d) vᵃvᵇ`,
/// after checking that `α₀₀ = 1` and that the divergent terms vanish to `tol`.
pub fn limit_case_pseudo_forces(
    m: f64,
    alpha: &AlphaField<'_>,
    tau: f64,
    x: &Vec3,
    v: &Vec3,
    tol: f64,
) -> Result<LimitForce> {
    let h = LIMIT_FD_STEP;
    let a = alpha(tau, x)?;
    let ainv = a.try_inverse().ok_or(Error::NonInvertible)?;
    let dtau = five_point(|d| alpha(tau + d, x), h)?;
    let dx: Vec<Mat4> = (0..3)
        .map(|k| {
            five_point(
                |d| {
                    let mut y = *x;
                    y[k] += d;
                    alpha(tau, &y)
                },
                h,
            )
        })
        .collect::<Result<_>>()?;
    // ∂_d for spatial d, indexed by 1..=3.
    let d = |idx: usize| &dx[idx - 1];

    let mut time_drift: f64 = 0.0;
    let mut curl: f64 = 0.0;
    for c in 1..4 {
        let s: f64 = (1..4).map(|aa| ainv[(c, aa)] * dtau[(aa, 0)]).sum();
        time_drift = time_drift.max(s.abs());
        for aa in 1..4 {
            let s: f64 = (1..4).map(|b| ainv[(c, b)] * (d(aa)[(b, 0)] - d(b)[(0, aa)])).sum();
            curl = curl.max(s.abs());
        }
    }
    let alpha00 = a[(0, 0)];
    if (alpha00 - 1.0).abs() > tol || time_drift > tol || curl > tol {
        return Ok(LimitForce::Obstructed { alpha00, time_drift, curl });
    }
    let mut f = Vec3::zeros();
    for c in 1..4 {
        let mut first = 0.0;
        for b in 1..4 {
            for aa in 1..4 {
                first += ainv[(c, b)] * dtau[(aa, b)] * v[aa - 1];
            }
        }
        let mut second = 0.0;
        for l in 0..4 {
            for aa in 1..4 {
                for b in 1..4 {
                    let mut t = d(b)[(l, aa)] + d(aa)[(l, b)];
                    if l > 0 {
                        t -= d(l)[(aa, b)];
                    }
                    second += ainv[(c, l)] * t * v[aa - 1] * v[b - 1];
                }
            }
        }
        f[c - 1] = -m * first - 0.5 * m * second;
    }
    Ok(LimitForce::Force(f))
}

/// `α` of a frame field as a function of `(τ, x⃗)`.
pub fn alpha_field<'a>(frames: &'a FrameField, tols: &'a Tolerances) -> impl Fn(f64, &Vec3) -> Result<Mat4> + 'a {
    move |tau, x| pullback_metric_alpha(frames, &ObservedEvent::new(tau, *x)?, tols)
}

/// Scenarios swept over `c` by [`newtonian_limit_report`].
#[derive(Debug, Clone, PartialEq)]
pub enum LimitScenario {
    /// Inertial frames in Minkowski space observing a free particle with
    /// coordinate velocity `w` that passes `start` at `t = 0`.
    SrInertial { w: Vec3, start: Vec3, samples: Vec<f64>, box_half: f64 },
    /// Inertial frames observing the comoving curve at fixed `x`.
    Comoving { x: Vec3, samples: Vec<f64> },
    /// Uniformly accelerated, rotating frames observing a comoving point.
    /// No Newtonian limit is asserted.
    AcceleratedRotating { a: f64, omega: f64, x: Vec3, samples: Vec<f64> },
    /// Static observer in Schwarzschild with radius `2GM/c²` observing a
    /// comoving point. No Newtonian limit is asserted.
    SchwarzschildStatic { gm: f64, r: f64, x: Vec3, samples: Vec<f64> },
}

impl LimitScenario {
    pub fn id(&self) -> &'static str {
        match self {
            LimitScenario::SrInertial { .. } => "sr-inertial",
            LimitScenario::Comoving { .. } => "comoving",
            LimitScenario::AcceleratedRotating { .. } => "accelerated-rotating",
            LimitScenario::SchwarzschildStatic { .. } => "schwarzschild-static",
        }
    }

    /// Whether the scenario carries pass/fail expectations.
    pub fn is_exploratory(&self) -> bool {
        matches!(self, LimitScenario::AcceleratedRotating { .. } | LimitScenario::SchwarzschildStatic { .. })
    }
}

/// Measurements at one value of `c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitRow {
    pub c: f64,
    pub samples: usize,
    /// `max |τ̇ - 1|`.
    pub max_tau_dot_dev: f64,
    /// `max |τ̇ - series|`, with the second-order series where applicable.
    pub tau_series_residual: f64,
    /// `max |c₁ ε|` of the series.
    pub first_order_correction: f64,
    /// `max ‖Σ pseudo-forces‖`.
    pub pseudo_force: f64,
    /// `max ‖pseudo-force - second-order series prediction‖`.
    pub pseudo_remainder: f64,
    /// `max ‖m dv⃗/dτ - F⃗‖ / (m (‖dv⃗/dτ‖ + ε_floor))`.
    pub force_consistency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitReport {
    pub scenario: String,
    pub exploratory: bool,
    pub rows: Vec<LimitRow>,
    /// Log-log slope of the `τ̇` series residual against `1/c`.
    pub tau_series_slope: Option<f64>,
    /// Log-log slope of the pseudo-force magnitude against `1/c`.
    pub pseudo_force_slope: Option<f64>,
    /// Log-log slope of the pseudo-force remainder against `1/c`.
    pub pseudo_remainder_slope: Option<f64>,
}

/// Floor added to `‖dv⃗/dτ‖` in the relative force-consistency measure.
pub const CONSISTENCY_FLOOR: f64 = 1e-12;

/// Values below this are treated as exact zeros when fitting slopes.
const SLOPE_FLOOR: f64 = 1e-13;

/// Least-squares slope of `ln y` against `ln x`; `None` unless at least two
/// points have `y` above the floor.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, &y)| y > SLOPE_FLOOR).map(|(&x, &y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

const MASS: f64 = 1.0;

fn inertial_frames(c: f64, interval: (f64, f64), tols: &Tolerances) -> Result<FrameField> {
    let chart: Arc<dyn Chart> = Arc::new(Minkowski::new(c)?);
    let obs = make_inertial_observer(chart, &Event::new("minkowski", [0.0; 4]), &Vec4::new(c, 0.0, 0.0, 0.0), interval, tols)?;
    standard_frame(&obs, tols)
}

fn comoving_row(frames: &FrameField, x: &Vec3, samples: &[f64], tols: &Tolerances) -> Result<LimitRow> {
    let c = frames.c();
    let rep = observe_curve(frames, &Worldline::Comoving(*x), samples, &ObserveConfig::default(), tols)?;
    let mut row = empty_row(c, rep.samples.len());
    for s in &rep.samples {
        let fb = relative_force(MASS, frames, s, &Vec3::zeros(), tols)?;
        row.max_tau_dot_dev = row.max_tau_dot_dev.max((s.tau_dot - 1.0).abs());
        row.pseudo_force = row.pseudo_force.max(fb.pseudo_total().norm());
        if let Some(r) = fb.consistency_residual() {
            let scale = MASS * (s.dv_dtau.map(|a| a.norm()).unwrap_or(0.0) + CONSISTENCY_FLOOR);
            row.force_consistency = row.force_consistency.max(r / scale);
        }
    }
    Ok(row)
}

fn empty_row(c: f64, samples: usize) -> LimitRow {
    LimitRow {
        c,
        samples,
        max_tau_dot_dev: 0.0,
        tau_series_residual: 0.0,
        first_order_correction: 0.0,
        pseudo_force: 0.0,
        pseudo_remainder: 0.0,
        force_consistency: 0.0,
    }
}

fn sr_inertial_row(
    c: f64,
    w: &Vec3,
    start: &Vec3,
    samples: &[f64],
    box_half: f64,
    tols: &Tolerances,
) -> Result<LimitRow> {
    if w.norm() >= c {
        return Err(Error::Superluminal(w.norm() / c));
    }
    let s_max = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let span = 2.0 * (s_max + box_half / c) + 10.0;
    let frames = inertial_frames(c, (-span, span), tols)?;
    let chart = frames.chart().clone();
    let u = Vec4::new(c, w[0], w[1], w[2]);
    let target = make_inertial_observer(
        chart,
        &Event::new("minkowski", [0.0, start[0], start[1], start[2]]),
        &u,
        (-s_max - 1.0, s_max + 1.0),
        tols,
    )?;
    let cfg = ObserveConfig { inversion: InversionConfig::with_box((-span, span), box_half), ..Default::default() };
    let rep = observe_curve(&frames, &Worldline::Observer(target), samples, &cfg, tols)?;
    if rep.branch_lost {
        return Err(Error::EmptySolution);
    }
    let eps = 1.0 / c;
    let mut row = empty_row(c, rep.samples.len());
    for s in &rep.samples {
        let r = s.x.norm();
        let xhat = s.x / r;
        let vn = s.v.norm();
        let xv = if vn > 0.0 { xhat.dot(&s.v) / vn } else { 0.0 };
        let series = sr_tau_dot_series(xv.clamp(-1.0, 1.0), vn)?;
        row.max_tau_dot_dev = row.max_tau_dot_dev.max((s.tau_dot - 1.0).abs());
        row.tau_series_residual = row.tau_series_residual.max((s.tau_dot - series.eval(eps)).abs());
        row.first_order_correction = row.first_order_correction.max((series.c[1] * eps).abs());
        let fb = relative_force(MASS, &frames, s, &Vec3::zeros(), tols)?;
        let pseudo = fb.pseudo_total();
        row.pseudo_force = row.pseudo_force.max(pseudo.norm());
        if let Some(dv) = s.dv_dtau {
            let (ratio, _) = sr_force_correction(&xhat, &s.v, &dv, r)?;
            let predicted = -s.v * (MASS * ratio.eval(eps));
            row.pseudo_remainder = row.pseudo_remainder.max((pseudo - predicted).norm());
            let resid = (dv * MASS - fb.total).norm();
            row.force_consistency = row.force_consistency.max(resid / (MASS * (dv.norm() + CONSISTENCY_FLOOR)));
        }
    }
    Ok(row)
}

fn exploratory_row(frames: &FrameField, x: &Vec3, samples: &[f64], tols: &Tolerances) -> Result<LimitRow> {
    comoving_row(frames, x, samples, tols)
}

/// Runs `scenario` for each `c` and fits residual scalings against `1/c`.
pub fn newtonian_limit_report(scenario: &LimitScenario, c_sweep: &[f64], tols: &Tolerances) -> Result<LimitReport> {
    if c_sweep.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::InvalidInput("c values must be positive".into()));
    }
    let rows: Vec<LimitRow> = c_sweep
        .iter()
        .map(|&c| match scenario {
            LimitScenario::SrInertial { w, start, samples, box_half } => {
                sr_inertial_row(c, w, start, samples, *box_half, tols)
            }
            LimitScenario::Comoving { x, samples } => {
                let span = samples.iter().fold(0.0f64, |m, s| m.max(s.abs())) + 1.0;
                comoving_row(&inertial_frames(c, (-span, span), tols)?, x, samples, tols)
            }
            LimitScenario::AcceleratedRotating { a, omega, x, samples } => {
                let span = samples.iter().fold(0.0f64, |m, s| m.max(s.abs())) + 1.0;
                let obs = make_uniformly_accelerated_observer(*a, c, (-span, span))?;
                let frames = rotating_frame(&standard_frame(&obs, tols)?, *omega, 1)?;
                exploratory_row(&frames, x, samples, tols)
            }
            LimitScenario::SchwarzschildStatic { gm, r, x, samples } => {
                let span = samples.iter().fold(0.0f64, |m, s| m.max(s.abs())) + 1.0;
                let chart = Schwarzschild::new(2.0 * gm / (c * c), c)?;
                let obs = make_static_observer(&chart, *r, std::f64::consts::FRAC_PI_2, 0.0, (-span, span))?;
                let frames = standard_frame(&obs, tols)?;
                exploratory_row(&frames, x, samples, tols)
            }
        })
        .collect::<Result<_>>()?;
    let inv_c: Vec<f64> = rows.iter().map(|r| 1.0 / r.c).collect();
    let col = |f: fn(&LimitRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    Ok(LimitReport {
        scenario: scenario.id().to_string(),
        exploratory: scenario.is_exploratory(),
        tau_series_slope: log_log_slope(&inv_c, &col(|r| r.tau_series_residual)),
        pseudo_force_slope: log_log_slope(&inv_c, &col(|r| r.pseudo_force)),
        pseudo_remainder_slope: log_log_slope(&inv_c, &col(|r| r.pseudo_remainder)),
        rows,
    })
}

/// `τ̇` of the SR pullback metric at `x`, for cross-checks against the series.
pub fn sr_tau_dot_exact(x: &Vec3, v: &Vec3, c: f64) -> Result<f64> {
    tau_dot(&sr_alpha(x), v, c)
}

/// Pullback metric of inertial frames in Minkowski space.
pub fn sr_alpha(x: &Vec3) -> Mat4 {
    let xh = x.normalize();
    let mut a = Mat4::zeros();
    a[(0, 0)] = 1.0;
    for i in 0..3 {
        a[(0, i + 1)] = -xh[i];
        a[(i + 1, 0)] = -xh[i];
        for j in 0..3 {
            a[(i + 1, j + 1)] = xh[i] * xh[j] - if i == j { 1.0 } else { 0.0 };
        }
    }
    a
}

/// Speed of a jet fighter, 7000 km/h, in m/s.
pub const JET_FIGHTER_SPEED: f64 = 7000.0 / 3.6;
/// Rounded speed of light used for the jet-fighter estimate, 3·10⁵ km/s, in m/s.
pub const ROUNDED_LIGHT_SPEED: f64 = 3.0e8;

/// Largest first-order clock-rate correction `|x̂·v̂| v/c` for a jet fighter.
pub fn jet_fighter_first_order() -> f64 {
    let s = sr_tau_dot_series(1.0, JET_FIGHTER_SPEED).expect("valid inputs");
    s.c[1] / ROUNDED_LIGHT_SPEED
}
