//! Observer mappings and relative kinematics.
//!
//! An observer with frame `X` at `γ(τ)` labels the event
//! `exp_{γ(τ)}(-|x⃗| X₀ + x^a X_a)` with observer coordinates `(cτ, x⃗)`.
//! Internally observer coordinates are `y = (y⁰, y¹, y², y³) = (cτ, x⃗)`;
//! reports expose `τ`.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geodesic::{exp_map, exp_with_jacobi, GeodesicSolution, Tolerances};
use crate::lorentz::{projectors, Frame4, Mat4, Metric4, Vec4};
use crate::observer::{FrameField, Kinematics, ObserverCurve};
use crate::spacetime::{Chart, Christoffels, Event};

pub type Vec3 = Vector3<f64>;

/// A point `(τ, x⃗)` of observer space; the origin `x⃗ = 0` is excluded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedEvent {
    pub tau: f64,
    pub x: Vec3,
}

impl ObservedEvent {
    pub fn new(tau: f64, x: Vec3) -> Result<Self> {
        if !tau.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite observer coordinates".into()));
        }
        if x.norm() == 0.0 {
            return Err(Error::InvalidInput("observer coordinates exclude x = 0".into()));
        }
        Ok(Self { tau, x })
    }

    /// `(cτ, x⃗)` as a 4-vector.
    pub fn coords(&self, c: f64) -> Vec4 {
        Vec4::new(c * self.tau, self.x[0], self.x[1], self.x[2])
    }

    fn from_coords(y: &Vec4, c: f64) -> Self {
        Self { tau: y[0] / c, x: Vec3::new(y[1], y[2], y[3]) }
    }
}

/// The past-lightlike initial vector `-|x⃗| X₀ + x^a X_a`.
pub fn cone_vector(frame: &Mat4, x: &Vec3) -> Vec4 {
    frame.column(0) * (-x.norm()) + frame.column(1) * x[0] + frame.column(2) * x[1] + frame.column(3) * x[2]
}

fn unreachable(e: Error) -> Error {
    match e {
        Error::NotInExpDomain(s) => Error::UnreachableDirection(s),
        other => other,
    }
}

/// Static observer mapping `x⃗ ↦ exp_q(-|x⃗| X₀ + x^a X_a)` for a frame at `q`.
pub fn static_observer_map(chart: &dyn Chart, frame: &Frame4, x: &Vec3, tols: &Tolerances) -> Result<Event> {
    if x.norm() == 0.0 {
        return Err(Error::InvalidInput("observer coordinates exclude x = 0".into()));
    }
    exp_map(chart, &frame.base, &cone_vector(&frame.columns, x), tols).map_err(unreachable)
}

/// Spatial distance between two past-lightlike vectors at `q` as measured by
/// the observer with unit timelike leg `x0`.
pub fn static_distance(g: &Metric4, x0: &Vec4, k: &Vec4, k2: &Vec4) -> Result<f64> {
    let (_, perp) = projectors(g, x0)?;
    let d = perp * (k - k2);
    Ok((-g.norm2(&d)).max(0.0).sqrt())
}

/// Observer-side data of a kinematic map evaluation.
#[derive(Debug, Clone)]
pub struct MapPoint {
    pub event: Event,
    /// Base event `γ(τ)`.
    pub base: Event,
    /// Initial vector of the lightlike geodesic.
    pub initial: Vec4,
    /// `g(K, K) / (c² |x⃗|²)` at the base.
    pub lightlike_residual: f64,
    /// `g(γ̇, K)`; negative for a past-directed initial vector.
    pub time_pairing: f64,
}

fn map_setup(frames: &FrameField, p: &ObservedEvent) -> Result<(Kinematics, Mat4, Vec4)> {
    if p.x.norm() == 0.0 {
        return Err(Error::InvalidInput("observer coordinates exclude x = 0".into()));
    }
    let kin = frames.curve().kinematics(p.tau)?;
    let x = frames.columns_at(p.tau)?;
    Ok((kin, x, cone_vector(&x, &p.x)))
}

fn map_point(frames: &FrameField, p: &ObservedEvent, kin: &Kinematics, k: &Vec4, event: Event) -> MapPoint {
    let chart = frames.chart();
    let g = Metric4::new_unchecked(chart.metric_components(&kin.position));
    let c = frames.c();
    MapPoint {
        event,
        base: Event::from_vec(chart.id(), kin.position),
        initial: *k,
        lightlike_residual: g.norm2(k) / (c * c * p.x.norm_squared()),
        time_pairing: g.dot(&kin.velocity, k),
    }
}

/// Kinematic observer mapping `(cτ, x⃗) ↦ exp_{γ(τ)}(-|x⃗| X₀(τ) + x^a X_a(τ))`.
pub fn kinematic_observer_map(frames: &FrameField, p: &ObservedEvent, tols: &Tolerances) -> Result<Event> {
    Ok(kinematic_observer_map_detailed(frames, p, tols)?.event)
}

pub fn kinematic_observer_map_detailed(frames: &FrameField, p: &ObservedEvent, tols: &Tolerances) -> Result<MapPoint> {
    let (kin, _, k) = map_setup(frames, p)?;
    let q = Event::from_vec(frames.chart().id(), kin.position);
    let event = exp_map(frames.chart().as_ref(), &q, &k, tols).map_err(unreachable)?;
    Ok(map_point(frames, p, &kin, &k, event))
}

/// Forward map together with its differential.
#[derive(Debug, Clone)]
pub struct MapJacobian {
    pub point: MapPoint,
    /// Columns `∂φ/∂(cτ)`, `∂φ/∂x¹`, `∂φ/∂x²`, `∂φ/∂x³`.
    pub jacobian: Mat4,
}

/// Differential of the kinematic observer map from four Jacobi fields along
/// the lightlike geodesic.
///
/// Spatial columns start from `J = 0`, `∇J/ds = -x̂_a X₀ + X_a`; the
/// temporal column starts from `J = γ̇`, `∇J/ds = ∇K/dτ` and is divided by `c`.
pub fn observer_map_jacobian(frames: &FrameField, p: &ObservedEvent, tols: &Tolerances) -> Result<MapJacobian> {
    let (kin, x, k) = map_setup(frames, p)?;
    let dx = frames.derivative_at(p.tau)?;
    let c = frames.c();
    let r = p.x.norm();
    let xhat = p.x / r;
    let dk = cone_vector(&dx, &p.x);
    let mut fields = vec![(kin.velocity, dk)];
    for a in 0..3 {
        fields.push((Vec4::zeros(), x.column(0) * (-xhat[a]) + x.column(a + 1)));
    }
    let q = Event::from_vec(frames.chart().id(), kin.position);
    let sol = exp_with_jacobi(frames.chart().as_ref(), &q, &k, &fields, tols).map_err(unreachable)?;
    let js = sol.final_jacobi();
    let mut jac = Mat4::zeros();
    jac.set_column(0, &(js[0].0 / c));
    for a in 0..3 {
        jac.set_column(a + 1, &js[a + 1].0);
    }
    let event = sol.event(1.0).unwrap();
    Ok(MapJacobian { point: map_point(frames, p, &kin, &k, event), jacobian: jac })
}

/// Pullback `α = Jᵀ g(φ(p)) J` of the metric to observer coordinates.
pub fn pullback_metric_alpha(frames: &FrameField, p: &ObservedEvent, tols: &Tolerances) -> Result<Mat4> {
    let mj = observer_map_jacobian(frames, p, tols)?;
    Ok(alpha_from(frames.chart().as_ref(), &mj))
}

fn alpha_from(chart: &dyn Chart, mj: &MapJacobian) -> Mat4 {
    let g = chart.metric_components(&mj.point.event.coords);
    mj.jacobian.transpose() * g * mj.jacobian
}

fn condition_number(m: &Mat4) -> f64 {
    let sv = m.singular_values();
    let min = sv.min();
    if min == 0.0 { f64::INFINITY } else { sv.max() / min }
}

/// Multistart Newton settings for inverting the observer map.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionConfig {
    /// Proper-time range of start points; defaults to the curve interval.
    pub tau_range: Option<(f64, f64)>,
    /// Box of spatial start points, per axis.
    pub x_range: [(f64, f64); 3],
    /// Start-grid counts along `(τ, x¹, x², x³)`.
    pub grid: [usize; 4],
    /// Upper bound on Newton runs launched from the grid.
    pub max_seeds: usize,
    pub max_iter: usize,
    pub inv_tol: f64,
    pub merge_tol: f64,
    pub cond_max: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            tau_range: None,
            x_range: [(-10.0, 10.0); 3],
            grid: [3, 9, 9, 9],
            max_seeds: 48,
            max_iter: 50,
            inv_tol: 1e-10,
            merge_tol: 1e-6,
            cond_max: 1e8,
        }
    }
}

impl InversionConfig {
    pub fn with_box(tau_range: (f64, f64), half_width: f64) -> Self {
        Self { tau_range: Some(tau_range), x_range: [(-half_width, half_width); 3], ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preimage {
    pub point: ObservedEvent,
    /// `‖φ(p) - target‖∞`.
    pub residual: f64,
    pub condition: f64,
    pub regular: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InversionResult {
    pub preimages: Vec<Preimage>,
    pub seeds: usize,
    pub converged_runs: usize,
    /// Some Newton run collapsed onto `x⃗ = 0`, i.e. the target appears to lie
    /// on the observer's own worldline.
    pub origin_excluded: bool,
}

enum NewtonOutcome {
    Converged(Preimage),
    Origin,
    Failed,
}

/// Radius below which a Newton iterate is considered to have hit the origin.
const ORIGIN_EPS: f64 = 1e-9;

fn newton(
    frames: &FrameField,
    target: &Vec4,
    start: ObservedEvent,
    cfg: &InversionConfig,
    tols: &Tolerances,
) -> NewtonOutcome {
    let c = frames.c();
    let (lo, hi) = frames.curve().interval();
    let mut p = start;
    let Ok(mut mj) = observer_map_jacobian(frames, &p, tols) else { return NewtonOutcome::Failed };
    let mut r = mj.point.event.coords - target;
    let mut rn = r.amax();
    for _ in 0..=cfg.max_iter {
        if rn <= cfg.inv_tol {
            let condition = condition_number(&mj.jacobian);
            return NewtonOutcome::Converged(Preimage {
                point: p,
                residual: rn,
                condition,
                regular: condition < cfg.cond_max,
            });
        }
        let step = match mj.jacobian.lu().solve(&(-r)) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => match mj.jacobian.svd(true, true).solve(&(-r), 1e-14) {
                Ok(s) => s,
                Err(_) => return NewtonOutcome::Failed,
            },
        };
        let y = p.coords(c);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut yn = y + step * lambda;
            yn[0] = yn[0].clamp(c * lo, c * hi);
            let cand = ObservedEvent::from_coords(&yn, c);
            if cand.x.norm() < ORIGIN_EPS * (1.0 + target.amax()) {
                return NewtonOutcome::Origin;
            }
            if let Ok(e) = kinematic_observer_map(frames, &cand, tols) {
                let rn_new = (e.coords - target).amax();
                if rn_new < rn || rn_new <= cfg.inv_tol {
                    accepted = Some(cand);
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some(next) = accepted else { return NewtonOutcome::Failed };
        p = next;
        match observer_map_jacobian(frames, &p, tols) {
            Ok(m) => mj = m,
            Err(_) => return NewtonOutcome::Failed,
        }
        r = mj.point.event.coords - target;
        rn = r.amax();
    }
    NewtonOutcome::Failed
}

fn axis_points(range: (f64, f64), n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (range.0 + range.1)],
        _ => (0..n).map(|i| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Sorts by `(τ, x¹, x², x³)` and merges roots closer than `merge_tol` in
/// `(cτ, x⃗)`, keeping the smaller residual.
fn merge_roots(mut roots: Vec<Preimage>, c: f64, merge_tol: f64) -> Vec<Preimage> {
    let key = |p: &Preimage| p.point.coords(c);
    roots.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        (0..4).map(|i| ka[i].total_cmp(&kb[i])).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out: Vec<Preimage> = Vec::new();
    for r in roots {
        match out.iter_mut().find(|o| (key(o) - key(&r)).amax() <= merge_tol) {
            Some(o) => {
                if r.residual < o.residual {
                    *o = r;
                }
            }
            None => out.push(r),
        }
    }
    out
}

/// Finds observer coordinates of `target` by damped Newton iteration from
/// promising points of a start grid.
///
/// The forward map is evaluated on the whole grid; Newton runs start from
/// grid points whose residual is a local minimum along every grid axis,
/// plus the best few overall, up to `max_seeds`.
pub fn invert_observer_map(
    frames: &FrameField,
    target: &Event,
    cfg: &InversionConfig,
    tols: &Tolerances,
) -> Result<InversionResult> {
    let chart = frames.chart();
    if !chart.contains(&target.coords) {
        let k = target.coords;
        return Err(Error::OutOfChart { chart: chart.id().to_string(), coords: [k[0], k[1], k[2], k[3]] });
    }
    let (clo, chi) = frames.curve().interval();
    let tau_range = cfg.tau_range.unwrap_or((clo, chi));
    let tau_range = (tau_range.0.max(clo), tau_range.1.min(chi));
    let axes = [
        axis_points(tau_range, cfg.grid[0]),
        axis_points(cfg.x_range[0], cfg.grid[1]),
        axis_points(cfg.x_range[1], cfg.grid[2]),
        axis_points(cfg.x_range[2], cfg.grid[3]),
    ];
    let dims = [axes[0].len(), axes[1].len(), axes[2].len(), axes[3].len()];
    let total: usize = dims.iter().product();
    let index = |i: [usize; 4]| ((i[0] * dims[1] + i[1]) * dims[2] + i[2]) * dims[3] + i[3];
    let unindex = |mut n: usize| {
        let mut i = [0; 4];
        for d in (0..4).rev() {
            i[d] = n % dims[d];
            n /= dims[d];
        }
        i
    };
    let residuals: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|n| {
            let i = unindex(n);
            let x = Vec3::new(axes[1][i[1]], axes[2][i[2]], axes[3][i[3]]);
            match ObservedEvent::new(axes[0][i[0]], x) {
                Ok(p) => kinematic_observer_map(frames, &p, tols)
                    .map(|e| (e.coords - target.coords).amax())
                    .unwrap_or(f64::INFINITY),
                Err(_) => f64::INFINITY,
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..total).filter(|&n| residuals[n].is_finite()).collect();
    order.sort_by(|&a, &b| residuals[a].total_cmp(&residuals[b]).then(a.cmp(&b)));
    let is_local_min = |n: usize| {
        let i = unindex(n);
        (0..4).all(|d| {
            [-1isize, 1].iter().all(|&o| {
                let j = i[d] as isize + o;
                if j < 0 || j >= dims[d] as isize {
                    return true;
                }
                let mut nb = i;
                nb[d] = j as usize;
                residuals[index(nb)] >= residuals[n]
            })
        })
    };
    let mut seeds: Vec<usize> = order.iter().copied().filter(|&n| is_local_min(n)).collect();
    for &n in order.iter().take(4) {
        if !seeds.contains(&n) {
            seeds.push(n);
        }
    }
    seeds.sort_by(|&a, &b| residuals[a].total_cmp(&residuals[b]).then(a.cmp(&b)));
    seeds.truncate(cfg.max_seeds);

    let outcomes: Vec<NewtonOutcome> = seeds
        .par_iter()
        .map(|&n| {
            let i = unindex(n);
            let p = ObservedEvent { tau: axes[0][i[0]], x: Vec3::new(axes[1][i[1]], axes[2][i[2]], axes[3][i[3]]) };
            newton(frames, &target.coords, p, cfg, tols)
        })
        .collect();
    let mut result = InversionResult { seeds: seeds.len(), ..Default::default() };
    let mut roots = Vec::new();
    for o in outcomes {
        match o {
            NewtonOutcome::Converged(p) => {
                result.converged_runs += 1;
                roots.push(p);
            }
            NewtonOutcome::Origin => result.origin_excluded = true,
            NewtonOutcome::Failed => {}
        }
    }
    result.preimages = merge_roots(roots, frames.c(), cfg.merge_tol);
    Ok(result)
}

/// Newton refinement from a single guess, used for continuation.
pub fn refine_preimage(
    frames: &FrameField,
    target: &Event,
    guess: &ObservedEvent,
    cfg: &InversionConfig,
    tols: &Tolerances,
) -> Option<Preimage> {
    match newton(frames, &target.coords, *guess, cfg, tols) {
        NewtonOutcome::Converged(p) => Some(p),
        _ => None,
    }
}

/// `1 / sqrt(α₀₀ + 2α₀ₐvᵃ/c + α_ab vᵃvᵇ/c²)`.
pub fn tau_dot(alpha: &Mat4, v: &Vec3, c: f64) -> Result<f64> {
    let w = Vec4::new(1.0, v[0] / c, v[1] / c, v[2] / c);
    let rad = w.dot(&(alpha * w));
    if !(rad > 0.0) {
        return Err(Error::Superluminal(rad));
    }
    Ok(1.0 / rad.sqrt())
}

/// Time component `F'⁰` making the chart-space force `F'` orthogonal to the
/// observed worldline: `g(γ̇', F') = 0`.
///
/// `jinv` is the inverse observer-map Jacobian `∂y/∂κ`.
pub fn force_zero_component(alpha: &Mat4, v: &Vec3, c: f64, jinv: &Mat4, f_spatial: &Vec3) -> Result<f64> {
    let u = Vec4::new(1.0, v[0] / c, v[1] / c, v[2] / c);
    // w_m = α_{m0} + α_{mb} v^b / c, then row (w J⁻¹).
    let row = (alpha * u).transpose() * jinv;
    let den = row[0];
    let scale = row.amax().max(f64::MIN_POSITIVE);
    if den.abs() <= 1e-12 * scale {
        return Err(Error::IllPosedForce(den));
    }
    let num: f64 = (0..3).map(|b| row[b + 1] * f_spatial[b]).sum();
    Ok(-num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpsilonMethod {
    /// Inverse Jacobian and differenced Jacobian (Hessian of the map).
    Jacobian,
    /// Differenced pullback metric `α`.
    Pullback,
}

/// Step in observer coordinates `(cτ, x⃗)` for differencing the Jacobian or
/// `α`.
pub const UPSILON_STEP: f64 = 1e-3;

fn shifted(p: &ObservedEvent, axis: usize, h: f64, c: f64) -> ObservedEvent {
    let mut y = p.coords(c);
    y[axis] += h;
    ObservedEvent::from_coords(&y, c)
}

/// Five-point derivative of a matrix-valued function of the observer
/// coordinates along `axis`.
fn coord_derivative<F>(f: &F, p: &ObservedEvent, axis: usize, h: f64, c: f64) -> Result<Mat4>
where
    F: Fn(&ObservedEvent) -> Result<Mat4>,
{
    let v: Vec<Mat4> = [-2.0, -1.0, 1.0, 2.0].iter().map(|&k| f(&shifted(p, axis, k * h, c))).collect::<Result<_>>()?;
    Ok((v[0] - v[1] * 8.0 + v[2] * 8.0 - v[3]) / (12.0 * h))
}

/// Connection coefficients `Υ^c_ij` in observer coordinates `(cτ, x⃗)`.
pub fn transformed_christoffels(
    frames: &FrameField,
    p: &ObservedEvent,
    method: UpsilonMethod,
    tols: &Tolerances,
) -> Result<Christoffels> {
    let c = frames.c();
    let chart = frames.chart().as_ref();
    let h = UPSILON_STEP;
    let mj = observer_map_jacobian(frames, p, tols)?;
    let cond = condition_number(&mj.jacobian);
    let jinv = mj.jacobian.try_inverse().filter(|_| cond < 1e12).ok_or(Error::CriticalPoint(cond))?;
    let mut ups = Christoffels::zero();
    match method {
        UpsilonMethod::Jacobian => {
            let jac_at = |q: &ObservedEvent| Ok(observer_map_jacobian(frames, q, tols)?.jacobian);
            // hess[j] column i = ∂²κ/∂y^i∂y^j
            let hess: Vec<Mat4> = (0..4).map(|j| coord_derivative(&jac_at, p, j, h, c)).collect::<Result<_>>()?;
            let gamma = chart
                .christoffels(&mj.point.event.coords, tols.fd_step)
                .ok_or_else(|| Error::Domain("connection unavailable at image point".into()))?;
            for i in 0..4 {
                for j in 0..4 {
                    let ji = mj.jacobian.column(i).into_owned();
                    let jj = mj.jacobian.column(j).into_owned();
                    let second = hess[j].column(i).into_owned() + gamma.contract(&ji, &jj);
                    let y = jinv * second;
                    for cc in 0..4 {
                        ups.0[cc][i][j] = y[cc];
                    }
                }
            }
        }
        UpsilonMethod::Pullback => {
            let alpha_at = |q: &ObservedEvent| pullback_metric_alpha(frames, q, tols);
            let alpha = alpha_from(chart, &mj);
            let ainv = alpha.try_inverse().ok_or(Error::CriticalPoint(f64::INFINITY))?;
            let da: Vec<Mat4> = (0..4).map(|j| coord_derivative(&alpha_at, p, j, h, c)).collect::<Result<_>>()?;
            for cc in 0..4 {
                for i in 0..4 {
                    for j in 0..4 {
                        let mut s = 0.0;
                        for l in 0..4 {
                            s += ainv[(cc, l)] * (da[i][(l, j)] + da[j][(l, i)] - da[l][(i, j)]);
                        }
                        ups.0[cc][i][j] = 0.5 * s;
                    }
                }
            }
        }
    }
    Ok(ups)
}

/// Which curve is being observed.
#[derive(Debug, Clone)]
pub enum Worldline {
    /// An observer, parametrized by its proper time.
    Observer(ObserverCurve),
    /// A geodesic (e.g. a light ray), parametrized affinely.
    Geodesic(GeodesicSolution),
    /// The curve `τ ↦ φ(cτ, x⃗)` at fixed observer position, parametrized by `τ`.
    Comoving(Vec3),
}

impl Worldline {
    fn point(&self, s: f64) -> Result<(Vec4, Vec4)> {
        match self {
            Worldline::Observer(o) => {
                let k = o.kinematics(s)?;
                Ok((k.position, k.velocity))
            }
            Worldline::Geodesic(g) => {
                let (lo, hi) = (g.s_start().min(g.s_end()), g.s_start().max(g.s_end()));
                let missing = Error::OutsideInterval { value: s, lo, hi };
                Ok((g.position(s).ok_or(missing.clone())?, g.velocity(s).ok_or(missing)?))
            }
            Worldline::Comoving(_) => Err(Error::InvalidInput("comoving worldlines are evaluated through the map".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserveConfig {
    pub inversion: InversionConfig,
    /// Parameter step for differencing `v⃗` and `τ̇` (Richardson-extrapolated).
    pub diff_step: f64,
    /// Run a full multistart every this many samples to detect new branches;
    /// 0 only at the first sample.
    pub recheck_every: usize,
}

impl Default for ObserveConfig {
    fn default() -> Self {
        Self { inversion: InversionConfig::default(), diff_step: 0.02, recheck_every: 0 }
    }
}

/// Relative motion of an observed curve at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeMotionSample {
    pub s: f64,
    pub tau: f64,
    pub x: Vec3,
    /// `dτ/ds`.
    pub tau_dot: f64,
    /// `dx⃗/dτ`.
    pub v: Vec3,
    /// `dv⃗/dτ`; `None` near the ends of the parameter range.
    pub dv_dtau: Option<Vec3>,
    /// `d²τ/ds²`.
    pub tau_ddot: Option<f64>,
    /// More than one preimage was found at this sample.
    pub ambiguous: bool,
    /// The observed tangent is not timelike although an observer was expected.
    pub not_an_observer: bool,
    /// `g` of the observed tangent, normalized by `c²` for observers.
    pub tangent_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationReport {
    pub samples: Vec<RelativeMotionSample>,
    /// The tracked branch was lost; samples stop at the last success.
    pub branch_lost: bool,
    /// Parameter at which tracking failed, if it did.
    pub lost_at: Option<f64>,
}

struct Local {
    p: ObservedEvent,
    tau_dot: f64,
    v: Vec3,
    tangent_norm: f64,
    ambiguous: bool,
}

struct Tracker<'a> {
    frames: &'a FrameField,
    worldline: &'a Worldline,
    cfg: &'a ObserveConfig,
    tols: &'a Tolerances,
}

impl Tracker<'_> {
    fn local_from(&self, p: ObservedEvent, tangent: &Vec4, ambiguous: bool) -> Result<Local> {
        let c = self.frames.c();
        let mj = observer_map_jacobian(self.frames, &p, self.tols)?;
        let cond = condition_number(&mj.jacobian);
        let jinv = mj.jacobian.try_inverse().filter(|_| cond < self.cfg.inversion.cond_max).ok_or(Error::CriticalPoint(cond))?;
        let dy = jinv * tangent;
        let tau_dot = dy[0] / c;
        let v = Vec3::new(dy[1], dy[2], dy[3]) / tau_dot;
        let g = Metric4::new_unchecked(self.frames.chart().metric_components(&mj.point.event.coords));
        Ok(Local { p, tau_dot, v, tangent_norm: g.norm2(tangent), ambiguous })
    }

    fn comoving(&self, x: &Vec3, s: f64) -> Result<Local> {
        let p = ObservedEvent::new(s, *x)?;
        let mj = observer_map_jacobian(self.frames, &p, self.tols)?;
        let c = self.frames.c();
        let tangent = mj.jacobian.column(0) * c;
        let g = Metric4::new_unchecked(self.frames.chart().metric_components(&mj.point.event.coords));
        Ok(Local { p, tau_dot: 1.0, v: Vec3::zeros(), tangent_norm: g.norm2(&tangent.into_owned()), ambiguous: false })
    }

    /// Tracks the preimage at `s`, starting from `prev` when available.
    fn track(&self, s: f64, prev: Option<&ObservedEvent>, full_search: bool) -> Result<Local> {
        if let Worldline::Comoving(x) = self.worldline {
            return self.comoving(x, s);
        }
        let (pos, tangent) = self.worldline.point(s)?;
        let target = Event::from_vec(self.frames.chart().id(), pos);
        if !full_search {
            if let Some(prev) = prev {
                if let Some(pre) = refine_preimage(self.frames, &target, prev, &self.cfg.inversion, self.tols) {
                    return self.local_from(pre.point, &tangent, false);
                }
            }
        }
        let inv = invert_observer_map(self.frames, &target, &self.cfg.inversion, self.tols)?;
        let c = self.frames.c();
        let chosen = match prev {
            Some(prev) => {
                let d = |p: &Preimage| (p.point.coords(c) - prev.coords(c)).amax();
                let mut cands: Vec<&Preimage> = inv.preimages.iter().collect();
                cands.sort_by(|a, b| d(a).total_cmp(&d(b)));
                cands.first().copied()
            }
            None => inv.preimages.first(),
        };
        let Some(chosen) = chosen else { return Err(Error::EmptySolution) };
        self.local_from(chosen.point, &tangent, inv.preimages.len() > 1)
    }
}

/// Richardson-extrapolated central difference from values at
/// `s ± h` and `s ± h/2`.
fn richardson<T>(fm: T, fp: T, fm2: T, fp2: T, h: f64) -> T
where
    T: std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + Copy,
{
    let d1 = (fp - fm) * (1.0 / (2.0 * h));
    let d2 = (fp2 - fm2) * (1.0 / h);
    (d2 * 4.0 - d1) * (1.0 / 3.0)
}

/// Relative position, velocity and acceleration of `worldline` as seen in
/// the frames, at each parameter in `samples`.
pub fn observe_curve(
    frames: &FrameField,
    worldline: &Worldline,
    samples: &[f64],
    cfg: &ObserveConfig,
    tols: &Tolerances,
) -> Result<ObservationReport> {
    let tracker = Tracker { frames, worldline, cfg, tols };
    let expect_observer = !matches!(worldline, Worldline::Geodesic(_));
    let c2 = frames.c().powi(2);
    let mut report = ObservationReport::default();
    let mut prev: Option<ObservedEvent> = None;
    for (n, &s) in samples.iter().enumerate() {
        let full = prev.is_none() || (cfg.recheck_every > 0 && n % cfg.recheck_every == 0);
        let local = match tracker.track(s, prev.as_ref(), full) {
            Ok(l) => l,
            Err(Error::EmptySolution) | Err(Error::CriticalPoint(_)) => {
                report.branch_lost = true;
                report.lost_at = Some(s);
                break;
            }
            Err(e) => return Err(e),
        };
        let h = cfg.diff_step;
        let neighbours: Option<Vec<Local>> = [-h, h, -h / 2.0, h / 2.0]
            .iter()
            .map(|&d| tracker.track(s + d, Some(&local.p), false).ok())
            .collect();
        let (dv_dtau, tau_ddot) = match neighbours {
            Some(nb) => {
                let dv_ds = richardson(nb[0].v, nb[1].v, nb[2].v, nb[3].v, h);
                let ddot = richardson(nb[0].tau_dot, nb[1].tau_dot, nb[2].tau_dot, nb[3].tau_dot, h);
                (Some(dv_ds / local.tau_dot), Some(ddot))
            }
            None => (None, None),
        };
        let tangent_norm = if expect_observer { local.tangent_norm / c2 } else { local.tangent_norm };
        report.samples.push(RelativeMotionSample {
            s,
            tau: local.p.tau,
            x: local.p.x,
            tau_dot: local.tau_dot,
            v: local.v,
            dv_dtau,
            tau_ddot,
            ambiguous: local.ambiguous,
            not_an_observer: expect_observer && !(local.tangent_norm > 0.0),
            tangent_norm,
        });
        prev = Some(local.p);
    }
    Ok(report)
}

/// The terms of the relative force on a particle of mass `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceBreakdown {
    pub total: Vec3,
    /// `(1/τ̇²) (J⁻¹F')^c`.
    pub actual: Vec3,
    /// `-m c² Υ^c₀₀`.
    pub frame_acceleration: Vec3,
    /// `-m (τ̈/τ̇²) v^c`.
    pub clock_rate: Vec3,
    /// `-2 m c Υ^c₀ₐ v^a`.
    pub mixed: Vec3,
    /// `-m Υ^c_ab v^a v^b`.
    pub quadratic: Vec3,
    /// `m dv⃗/dτ` from the tracked motion, when available.
    pub measured: Option<Vec3>,
}

impl ForceBreakdown {
    pub fn pseudo_parts(&self) -> [Vec3; 4] {
        [self.frame_acceleration, self.clock_rate, self.mixed, self.quadratic]
    }

    pub fn pseudo_total(&self) -> Vec3 {
        self.pseudo_parts().iter().sum()
    }

    /// `‖total - actual - Σ pseudo‖∞`.
    pub fn closure_residual(&self) -> f64 {
        (self.total - self.actual - self.pseudo_total()).amax()
    }

    /// `‖m dv⃗/dτ - total‖`.
    pub fn consistency_residual(&self) -> Option<f64> {
        self.measured.map(|m| (m - self.total).norm())
    }
}

/// Relative force on a particle of mass `m` at a tracked sample, given the
/// spatial chart components of the applied force `F'` (per unit proper
/// time of the particle).
pub fn relative_force(
    m: f64,
    frames: &FrameField,
    sample: &RelativeMotionSample,
    f_spatial: &Vec3,
    tols: &Tolerances,
) -> Result<ForceBreakdown> {
    let c = frames.c();
    let p = ObservedEvent::new(sample.tau, sample.x)?;
    let mj = observer_map_jacobian(frames, &p, tols)?;
    let cond = condition_number(&mj.jacobian);
    let jinv = mj.jacobian.try_inverse().ok_or(Error::CriticalPoint(cond))?;
    let alpha = alpha_from(frames.chart().as_ref(), &mj);
    let v = sample.v;
    let f0 = if f_spatial.amax() == 0.0 { 0.0 } else { force_zero_component(&alpha, &v, c, &jinv, f_spatial)? };
    let fp = Vec4::new(f0, f_spatial[0], f_spatial[1], f_spatial[2]);
    let f_obs = jinv * fp;
    let td2 = sample.tau_dot * sample.tau_dot;
    let actual = Vec3::new(f_obs[1], f_obs[2], f_obs[3]) / td2;
    let ups = transformed_christoffels(frames, &p, UpsilonMethod::Jacobian, tols)?;
    let mut frame_acceleration = Vec3::zeros();
    let mut mixed = Vec3::zeros();
    let mut quadratic = Vec3::zeros();
    for cc in 0..3 {
        let u = &ups.0[cc + 1];
        frame_acceleration[cc] = -m * c * c * u[0][0];
        mixed[cc] = -2.0 * m * c * (0..3).map(|a| u[0][a + 1] * v[a]).sum::<f64>();
        quadratic[cc] = -m * (0..3).map(|a| (0..3).map(|b| u[a + 1][b + 1] * v[a] * v[b]).sum::<f64>()).sum::<f64>();
    }
    let ratio = sample.tau_ddot.map(|dd| dd / td2).unwrap_or(0.0);
    let clock_rate = -v * (m * ratio);
    let total = actual + frame_acceleration + clock_rate + mixed + quadratic;
    Ok(ForceBreakdown {
        total,
        actual,
        frame_acceleration,
        clock_rate,
        mixed,
        quadratic,
        measured: sample.dv_dtau.map(|a| a * m),
    })
}
