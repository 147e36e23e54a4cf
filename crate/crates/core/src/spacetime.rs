//! Chart-based spacetime models.
//!
//! Coordinates are lengths throughout (`κ⁰ = ct`), so the speed of light is a
//! plain chart parameter that Newtonian-limit sweeps can vary.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lorentz::{Mat4, Metric4, Vec4};

/// Default central-difference step in chart units.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// A point of a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub chart_id: Arc<str>,
    pub coords: Vec4,
}

impl Event {
    pub fn new(chart_id: &str, coords: [f64; 4]) -> Self {
        Self { chart_id: Arc::from(chart_id), coords: Vec4::from(coords) }
    }

    pub fn from_vec(chart_id: &str, coords: Vec4) -> Self {
        Self { chart_id: Arc::from(chart_id), coords }
    }
}

/// Connection coefficients `Γ^k_ij`, indexed `[k][i][j]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Christoffels(pub [[[f64; 4]; 4]; 4]);

impl Christoffels {
    pub fn zero() -> Self {
        Self([[[0.0; 4]; 4]; 4])
    }

    /// `Γ^k_ij u^i v^j`.
    pub fn contract(&self, u: &Vec4, v: &Vec4) -> Vec4 {
        let mut out = Vec4::zeros();
        for k in 0..4 {
            let mut s = 0.0;
            for i in 0..4 {
                if u[i] == 0.0 {
                    continue;
                }
                for j in 0..4 {
                    s += self.0[k][i][j] * u[i] * v[j];
                }
            }
            out[k] = s;
        }
        out
    }

    /// Matrix `M^k_j = Γ^k_ij u^i`, so that `Γ(u, v) = M v`.
    pub fn along(&self, u: &Vec4) -> Mat4 {
        let mut m = Mat4::zeros();
        for k in 0..4 {
            for j in 0..4 {
                m[(k, j)] = (0..4).map(|i| self.0[k][i][j] * u[i]).sum();
            }
        }
        m
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    worst = worst.max((self.0[k][i][j] - self.0[k][j][i]).abs());
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().flatten().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    fn axpy(&mut self, a: f64, other: &Christoffels) {
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    self.0[k][i][j] += a * other.0[k][i][j];
                }
            }
        }
    }
}

/// Riemann tensor `R^k_{l i j}`, indexed `[k][l][i][j]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Riemann(pub [[[[f64; 4]; 4]; 4]; 4]);

impl Riemann {
    /// `R^k_{l i j} a^l b^i c^j`.
    pub fn apply(&self, a: &Vec4, b: &Vec4, c: &Vec4) -> Vec4 {
        let mut out = Vec4::zeros();
        for k in 0..4 {
            let mut s = 0.0;
            for l in 0..4 {
                for i in 0..4 {
                    for j in 0..4 {
                        s += self.0[k][l][i][j] * a[l] * b[i] * c[j];
                    }
                }
            }
            out[k] = s;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().flatten().flatten().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Largest violation of antisymmetry in the last two slots.
    pub fn max_antisymmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..4 {
            for l in 0..4 {
                for i in 0..4 {
                    for j in 0..4 {
                        worst = worst.max((self.0[k][l][i][j] + self.0[k][l][j][i]).abs());
                    }
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureSample {
    pub christoffels: Christoffels,
    pub riemann: Riemann,
    pub ricci: Mat4,
}

/// A single coordinate chart of a spacetime.
///
/// Implementations must be pure: every method depends only on its arguments.
pub trait Chart: Send + Sync + fmt::Debug {
    fn id(&self) -> &str;

    /// Speed of light in chart units per time unit.
    fn c(&self) -> f64;

    fn contains(&self, kappa: &Vec4) -> bool;

    /// Raw metric components. Only called on points where `contains` holds.
    fn metric_components(&self, kappa: &Vec4) -> Mat4;

    fn analytic_christoffels(&self, _kappa: &Vec4) -> Option<Christoffels> {
        None
    }

    /// Designated future-pointing, right-handed orthonormal frame used as the
    /// time- and space-orientation reference of the model.
    fn reference_frame(&self, kappa: &Vec4) -> Mat4 {
        gram_schmidt_reference(&self.metric_components(kappa))
    }

    /// True when the metric is the constant Minkowski form in these
    /// coordinates, enabling closed-form shortcuts.
    fn is_flat_cartesian(&self) -> bool {
        false
    }

    /// Christoffel symbols without domain checks on the base point.
    fn christoffels(&self, kappa: &Vec4, fd_step: f64) -> Option<Christoffels> {
        if self.is_flat_cartesian() {
            return Some(Christoffels::zero());
        }
        if let Some(g) = self.analytic_christoffels(kappa) {
            return Some(g);
        }
        fd_christoffels(self, kappa, fd_step)
    }
}

/// Orthonormalizes the coordinate basis starting from `∂₀`.
///
/// Falls back to the identity when `∂₀` is not timelike.
fn gram_schmidt_reference(g: &Mat4) -> Mat4 {
    let sign = [1.0, -1.0, -1.0, -1.0];
    let dot = |a: &Vec4, b: &Vec4| a.dot(&(g * b));
    let mut cols: Vec<Vec4> = Vec::with_capacity(4);
    for i in 0..4 {
        let mut v = Vec4::zeros();
        v[i] = 1.0;
        for (j, e) in cols.iter().enumerate() {
            v -= e * (dot(e, &v) * sign[j]);
        }
        let n = dot(&v, &v) * sign[i];
        if !(n > 0.0) {
            return Mat4::identity();
        }
        cols.push(v / n.sqrt());
    }
    Mat4::from_columns(&cols)
}

fn out_of_chart(chart: &(impl Chart + ?Sized), kappa: &Vec4) -> Error {
    Error::OutOfChart { chart: chart.id().to_string(), coords: [kappa[0], kappa[1], kappa[2], kappa[3]] }
}

pub fn metric_at(chart: &dyn Chart, kappa: &Vec4) -> Result<Metric4> {
    if !chart.contains(kappa) {
        return Err(out_of_chart(chart, kappa));
    }
    Ok(Metric4::new_unchecked(chart.metric_components(kappa)))
}

/// First partial derivatives `∂_l g` of the metric by central differences.
pub fn metric_derivatives(chart: &(impl Chart + ?Sized), kappa: &Vec4, h: f64) -> Option<[Mat4; 4]> {
    let mut out = [Mat4::zeros(); 4];
    for (l, d) in out.iter_mut().enumerate() {
        let mut p = *kappa;
        let mut m = *kappa;
        p[l] += h;
        m[l] -= h;
        if !chart.contains(&p) || !chart.contains(&m) {
            return None;
        }
        *d = (chart.metric_components(&p) - chart.metric_components(&m)) / (2.0 * h);
    }
    Some(out)
}

/// Christoffel symbols from central differences of the metric, ignoring any
/// closed form the chart provides.
pub fn fd_christoffels(chart: &(impl Chart + ?Sized), kappa: &Vec4, h: f64) -> Option<Christoffels> {
    let dg = metric_derivatives(chart, kappa, h)?;
    let ginv = chart.metric_components(kappa).try_inverse()?;
    let mut gamma = Christoffels::zero();
    for k in 0..4 {
        for i in 0..4 {
            for j in i..4 {
                let mut s = 0.0;
                for l in 0..4 {
                    s += ginv[(k, l)] * (dg[j][(l, i)] + dg[i][(l, j)] - dg[l][(i, j)]);
                }
                gamma.0[k][i][j] = 0.5 * s;
                gamma.0[k][j][i] = 0.5 * s;
            }
        }
    }
    Some(gamma)
}

/// Step for differentiating Christoffel symbols. Symbols that are themselves
/// finite differences need a wider outer step to keep roundoff in check.
fn outer_step(chart: &(impl Chart + ?Sized), kappa: &Vec4, fd_step: f64) -> f64 {
    if chart.analytic_christoffels(kappa).is_some() {
        fd_step
    } else {
        fd_step.powf(2.0 / 3.0)
    }
}

pub fn christoffels_at(chart: &dyn Chart, kappa: &Vec4, fd_step: f64) -> Result<Christoffels> {
    if !chart.contains(kappa) {
        return Err(out_of_chart(chart, kappa));
    }
    if !(fd_step > 0.0) {
        return Err(Error::InvalidInput("fd_step must be positive".into()));
    }
    chart.christoffels(kappa, fd_step).ok_or_else(|| degenerate_or_edge(chart, kappa))
}

fn degenerate_or_edge(chart: &(impl Chart + ?Sized), kappa: &Vec4) -> Error {
    if chart.metric_components(kappa).try_inverse().is_none() {
        Error::DegenerateMetric([kappa[0], kappa[1], kappa[2], kappa[3]])
    } else {
        out_of_chart(chart, kappa)
    }
}

/// Directional derivative `(u·∂) Γ` by central differences along `u`.
fn christoffel_directional(
    chart: &(impl Chart + ?Sized),
    kappa: &Vec4,
    u: &Vec4,
    h: f64,
    fd_step: f64,
) -> Option<Christoffels> {
    let n = u.amax();
    if n == 0.0 {
        return Some(Christoffels::zero());
    }
    let dir = u / n;
    let p = kappa + dir * h;
    let m = kappa - dir * h;
    if !chart.contains(&p) || !chart.contains(&m) {
        return None;
    }
    let mut d = chart.christoffels(&p, fd_step)?;
    d.axpy(-1.0, &chart.christoffels(&m, fd_step)?);
    let scale = n / (2.0 * h);
    for x in d.0.iter_mut().flatten().flatten() {
        *x *= scale;
    }
    Some(d)
}

/// `R^k_{l i j} a^l b^i c^j` evaluated without assembling the full tensor.
///
/// Uses two directional derivatives of the connection.
pub fn riemann_apply(
    chart: &(impl Chart + ?Sized),
    kappa: &Vec4,
    a: &Vec4,
    b: &Vec4,
    c: &Vec4,
    fd_step: f64,
) -> Option<Vec4> {
    if chart.is_flat_cartesian() {
        return Some(Vec4::zeros());
    }
    let h = outer_step(chart, kappa, fd_step);
    let gamma = chart.christoffels(kappa, fd_step)?;
    // ∂_i Γ^k_{jl} b^i c^j a^l - ∂_j Γ^k_{il} c^j b^i a^l
    let db = christoffel_directional(chart, kappa, b, h, fd_step)?;
    let dc = christoffel_directional(chart, kappa, c, h, fd_step)?;
    let mut out = db.contract(c, a) - dc.contract(b, a);
    // Γ^k_{im} Γ^m_{jl} b^i c^j a^l - Γ^k_{jm} Γ^m_{il} c^j b^i a^l
    out += gamma.contract(b, &gamma.contract(c, a)) - gamma.contract(c, &gamma.contract(b, a));
    Some(out)
}

/// Connection data at a point of a curve with velocity `u`, cached so that
/// the tidal term `R(J, u)u` of several Jacobi fields shares the work.
#[derive(Debug, Clone, Copy)]
pub struct TidalOperator {
    pub gamma: Christoffels,
    du_gamma: Christoffels,
    u: Vec4,
    h: f64,
    flat: bool,
}

impl TidalOperator {
    pub fn new(chart: &(impl Chart + ?Sized), kappa: &Vec4, u: &Vec4, fd_step: f64) -> Option<Self> {
        let gamma = chart.christoffels(kappa, fd_step)?;
        if chart.is_flat_cartesian() {
            return Some(Self { gamma, du_gamma: Christoffels::zero(), u: *u, h: 0.0, flat: true });
        }
        let h = outer_step(chart, kappa, fd_step);
        let du_gamma = christoffel_directional(chart, kappa, u, h, fd_step)?;
        Some(Self { gamma, du_gamma, u: *u, h, flat: false })
    }

    /// `R^k_{l i j} u^l J^i u^j`.
    pub fn apply(&self, chart: &(impl Chart + ?Sized), kappa: &Vec4, j: &Vec4, fd_step: f64) -> Option<Vec4> {
        if self.flat {
            return Some(Vec4::zeros());
        }
        let u = &self.u;
        let g = &self.gamma;
        let dj = christoffel_directional(chart, kappa, j, self.h, fd_step)?;
        Some(dj.contract(u, u) - self.du_gamma.contract(j, u) + g.contract(j, &g.contract(u, u))
            - g.contract(u, &g.contract(j, u)))
    }
}

pub fn riemann_ricci_at(chart: &dyn Chart, kappa: &Vec4, fd_step: f64) -> Result<CurvatureSample> {
    let gamma = christoffels_at(chart, kappa, fd_step)?;
    let h = outer_step(chart, kappa, fd_step);
    // dgamma[i] = ∂_i Γ
    let mut dgamma = [Christoffels::zero(); 4];
    for (i, d) in dgamma.iter_mut().enumerate() {
        let mut e = Vec4::zeros();
        e[i] = 1.0;
        *d = christoffel_directional(chart, kappa, &e, h, fd_step)
            .ok_or_else(|| degenerate_or_edge(chart, kappa))?;
    }
    let g = &gamma.0;
    let mut riem = [[[[0.0; 4]; 4]; 4]; 4];
    for k in 0..4 {
        for l in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    let mut s = dgamma[i].0[k][j][l] - dgamma[j].0[k][i][l];
                    for m in 0..4 {
                        s += g[k][i][m] * g[m][j][l] - g[k][j][m] * g[m][i][l];
                    }
                    riem[k][l][i][j] = s;
                }
            }
        }
    }
    let mut ricci = Mat4::zeros();
    for l in 0..4 {
        for j in 0..4 {
            ricci[(l, j)] = (0..4).map(|k| riem[k][l][k][j]).sum();
        }
    }
    Ok(CurvatureSample { christoffels: gamma, riemann: Riemann(riem), ricci })
}

/// Flat spacetime in Cartesian coordinates `(ct, x, y, z)`.
#[derive(Debug, Clone)]
pub struct Minkowski {
    c: f64,
}

impl Minkowski {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidInput(format!("speed of light must be positive, got {c}")));
        }
        Ok(Self { c })
    }
}

impl Default for Minkowski {
    fn default() -> Self {
        Self { c: 1.0 }
    }
}

impl Chart for Minkowski {
    fn id(&self) -> &str {
        "minkowski"
    }
    fn c(&self) -> f64 {
        self.c
    }
    fn contains(&self, kappa: &Vec4) -> bool {
        kappa.iter().all(|x| x.is_finite())
    }
    fn metric_components(&self, _kappa: &Vec4) -> Mat4 {
        crate::lorentz::eta()
    }
    fn analytic_christoffels(&self, _kappa: &Vec4) -> Option<Christoffels> {
        Some(Christoffels::zero())
    }
    fn reference_frame(&self, _kappa: &Vec4) -> Mat4 {
        Mat4::identity()
    }
    fn is_flat_cartesian(&self) -> bool {
        true
    }
}

/// Exterior Schwarzschild spacetime in coordinates `(ct, r, θ, φ)`.
///
/// The domain is `r > R`, `0 < θ < π`. The azimuth is not wrapped, so a
/// geodesic crossing `φ = ±π` simply continues to larger `|φ|`.
#[derive(Debug, Clone)]
pub struct Schwarzschild {
    radius: f64,
    c: f64,
}

impl Schwarzschild {
    pub fn new(radius: f64, c: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput(format!("Schwarzschild radius must be positive, got {radius}")));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidInput(format!("speed of light must be positive, got {c}")));
        }
        Ok(Self { radius, c })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl Chart for Schwarzschild {
    fn id(&self) -> &str {
        "schwarzschild"
    }
    fn c(&self) -> f64 {
        self.c
    }
    fn contains(&self, k: &Vec4) -> bool {
        k.iter().all(|x| x.is_finite()) && k[1] > self.radius && k[2] > 0.0 && k[2] < std::f64::consts::PI
    }
    fn metric_components(&self, k: &Vec4) -> Mat4 {
        let (r, th) = (k[1], k[2]);
        let f = 1.0 - self.radius / r;
        let s = th.sin();
        Mat4::from_diagonal(&Vec4::new(f, -1.0 / f, -r * r, -r * r * s * s))
    }
    fn analytic_christoffels(&self, k: &Vec4) -> Option<Christoffels> {
        let (r, th) = (k[1], k[2]);
        let rs = self.radius;
        let f = 1.0 - rs / r;
        let (s, co) = th.sin_cos();
        let mut g = Christoffels::zero();
        let mut set = |a: usize, b: usize, c: usize, v: f64| {
            g.0[a][b][c] = v;
            g.0[a][c][b] = v;
        };
        set(0, 0, 1, rs / (2.0 * r * r * f));
        set(1, 0, 0, f * rs / (2.0 * r * r));
        set(1, 1, 1, -rs / (2.0 * r * r * f));
        set(1, 2, 2, -r * f);
        set(1, 3, 3, -r * f * s * s);
        set(2, 1, 2, 1.0 / r);
        set(2, 3, 3, -s * co);
        set(3, 1, 3, 1.0 / r);
        set(3, 2, 3, co / s);
        Some(g)
    }
    fn reference_frame(&self, k: &Vec4) -> Mat4 {
        let (r, th) = (k[1], k[2]);
        let f = 1.0 - self.radius / r;
        Mat4::from_diagonal(&Vec4::new(1.0 / f.sqrt(), f.sqrt(), 1.0 / r, 1.0 / (r * th.sin())))
    }
}

type MetricFn = dyn Fn(&Vec4) -> Mat4 + Send + Sync;
type DomainFn = dyn Fn(&Vec4) -> bool + Send + Sync;

/// A chart defined by a metric closure; connection and curvature come from
/// finite differences.
#[derive(Clone)]
pub struct CustomChart {
    id: String,
    c: f64,
    metric: Arc<MetricFn>,
    domain: Arc<DomainFn>,
}

impl CustomChart {
    pub fn new(
        id: &str,
        c: f64,
        metric: impl Fn(&Vec4) -> Mat4 + Send + Sync + 'static,
        domain: impl Fn(&Vec4) -> bool + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidInput(format!("speed of light must be positive, got {c}")));
        }
        Ok(Self { id: id.to_string(), c, metric: Arc::new(metric), domain: Arc::new(domain) })
    }
}

impl fmt::Debug for CustomChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomChart").field("id", &self.id).field("c", &self.c).finish_non_exhaustive()
    }
}

impl Chart for CustomChart {
    fn id(&self) -> &str {
        &self.id
    }
    fn c(&self) -> f64 {
        self.c
    }
    fn contains(&self, kappa: &Vec4) -> bool {
        kappa.iter().all(|x| x.is_finite()) && (self.domain)(kappa)
    }
    fn metric_components(&self, kappa: &Vec4) -> Mat4 {
        (self.metric)(kappa)
    }
}
