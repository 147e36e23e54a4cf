//! Dormand–Prince 5(4) integrator with continuous (dense) output.
//!
//! The right-hand side reports whether the state lies in its domain. A
//! rejected evaluation shrinks the step, so trajectories that leave a chart
//! stop just short of the boundary with a partial solution.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    /// Smallest step, relative to the integration span, before giving up.
    pub h_min_rel: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, h_init: None, h_min_rel: 1e-14, max_steps: 200_000 }
    }
}

impl OdeOptions {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self { rel_tol, abs_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::InvalidInput("integration tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Largest scaled local error estimate among accepted steps.
    pub max_error: f64,
}

impl OdeStats {
    pub fn merge(&mut self, other: &OdeStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.rhs_evals += other.rhs_evals;
        self.max_error = self.max_error.max(other.max_error);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Completed,
    /// The right-hand side refused a state; the solution ends before `t_end`.
    LeftDomain,
    /// Error control drove the step below the minimum; the solution ends at
    /// the last accepted step.
    StepUnderflow,
}

/// Piecewise quartic interpolant over the accepted steps.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    dim: usize,
    t: Vec<f64>,
    y: Vec<Vec<f64>>,
    /// Per step: four interpolation coefficient blocks of length `dim`.
    cont: Vec<Vec<f64>>,
    pub stats: OdeStats,
    pub termination: Termination,
    pub t_target: f64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_start(&self) -> f64 {
        self.t[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().unwrap()
    }

    /// Number of accepted steps stored.
    pub fn len(&self) -> usize {
        self.t.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    /// Converts a step-size underflow into [`Error::Stiffness`].
    pub fn require_smooth(self) -> Result<Self> {
        match self.termination {
            Termination::StepUnderflow => Err(Error::Stiffness(self.t_end())),
            _ => Ok(self),
        }
    }

    pub fn mesh(&self) -> &[f64] {
        &self.t
    }

    pub fn initial(&self) -> &[f64] {
        &self.y[0]
    }

    pub fn last(&self) -> &[f64] {
        self.y.last().unwrap()
    }

    pub fn contains(&self, t: f64) -> bool {
        let (a, b) = (self.t_start(), self.t_end());
        let tol = 1e-12 * (1.0 + a.abs().max(b.abs()));
        t >= a.min(b) - tol && t <= a.max(b) + tol
    }

    /// Interpolated state at `t`, or `None` outside the covered interval.
    pub fn eval(&self, t: f64) -> Option<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out).then_some(out)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> bool {
        if !self.contains(t) {
            return false;
        }
        if self.is_empty() {
            out.copy_from_slice(&self.y[0]);
            return true;
        }
        let forward = self.t_end() >= self.t_start();
        // First step whose right end passes t.
        let idx = if forward {
            self.t[1..].partition_point(|&x| x < t)
        } else {
            self.t[1..].partition_point(|&x| x > t)
        }
        .min(self.len() - 1);
        let (t0, t1) = (self.t[idx], self.t[idx + 1]);
        let h = t1 - t0;
        let th = (t - t0) / h;
        let th1 = 1.0 - th;
        let y0 = &self.y[idx];
        let c = &self.cont[idx];
        let n = self.dim;
        for i in 0..n {
            out[i] = y0[i] + th * (c[i] + th1 * (c[n + i] + th * (c[2 * n + i] + th1 * c[3 * n + i])));
        }
        true
    }
}

fn error_norm(y0: &[f64], y1: &[f64], err: &[f64], opts: &OdeOptions) -> f64 {
    let n = y0.len();
    let s: f64 = (0..n)
        .map(|i| {
            let sk = opts.abs_tol + opts.rel_tol * y0[i].abs().max(y1[i].abs());
            (err[i] / sk).powi(2)
        })
        .sum();
    (s / n as f64).sqrt()
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end` (either direction).
///
/// `f` writes the derivative into its output slice and returns `false` when
/// the state is outside the problem's domain.
pub fn integrate<F>(mut f: F, t0: f64, y0: &[f64], t_end: f64, opts: &OdeOptions) -> Result<DenseSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> bool,
{
    opts.validate()?;
    let n = y0.len();
    if y0.iter().any(|x| !x.is_finite()) || !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::InvalidInput("non-finite initial data".into()));
    }
    let mut stats = OdeStats::default();
    let mut k1 = vec![0.0; n];
    stats.rhs_evals += 1;
    if !f(t0, y0, &mut k1) {
        return Err(Error::EmptySolution);
    }
    let mut sol = DenseSolution {
        dim: n,
        t: vec![t0],
        y: vec![y0.to_vec()],
        cont: Vec::new(),
        stats,
        termination: Termination::Completed,
        t_target: t_end,
    };
    let span = t_end - t0;
    if span == 0.0 {
        return Ok(sol);
    }
    let dir = span.signum();
    let hmax = span.abs();
    let hmin = opts.h_min_rel * hmax.max(t0.abs()).max(1e-300);

    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut err = vec![0.0; n];

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = match opts.h_init {
        Some(h) => h.abs().min(hmax),
        None => initial_step(&mut f, t0, &y, &k1, dir, hmax, opts, &mut sol.stats),
    };
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;
    let beta = 0.04;
    let expo1 = 0.2 - beta * 0.75;

    loop {
        if (t_end - t) * dir <= 0.0 {
            break;
        }
        if sol.stats.accepted + sol.stats.rejected >= opts.max_steps {
            return Err(Error::Stiffness(t));
        }
        let mut last = false;
        if (t + dir * h - t_end) * dir >= 0.0 {
            h = (t_end - t).abs();
            last = true;
        }
        let hs = dir * h;

        // Stages; a domain refusal at any stage rejects the step.
        let mut ok = true;
        macro_rules! stage {
            ($k:expr, $c:expr, $($a:expr => $kk:expr),+) => {
                if ok {
                    for i in 0..n {
                        ytmp[i] = y[i] + hs * (0.0 $(+ $a * $kk[i])+);
                    }
                    sol.stats.rhs_evals += 1;
                    ok = ytmp.iter().all(|v| v.is_finite()) && f(t + $c * hs, &ytmp, &mut $k);
                }
            };
        }
        stage!(k2, C2, A21 => k1);
        stage!(k3, C3, A31 => k1, A32 => k2);
        stage!(k4, C4, A41 => k1, A42 => k2, A43 => k3);
        stage!(k5, C5, A51 => k1, A52 => k2, A53 => k3, A54 => k4);
        stage!(k6, 1.0, A61 => k1, A62 => k2, A63 => k3, A64 => k4, A65 => k5);
        if ok {
            for i in 0..n {
                y1[i] = y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            sol.stats.rhs_evals += 1;
            ok = y1.iter().all(|v| v.is_finite()) && f(t + hs, &y1, &mut k7);
        }
        if !ok {
            sol.stats.rejected += 1;
            h *= 0.5;
            if h < hmin {
                sol.termination = Termination::LeftDomain;
                break;
            }
            last_rejected = true;
            continue;
        }

        for i in 0..n {
            err[i] = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let e = error_norm(&y, &y1, &err, opts);
        let fac11 = e.powf(expo1);
        let fac = (fac11 / fac_old.powf(beta) / 0.9).clamp(0.1, 5.0);
        let mut h_new = h / fac;

        if e <= 1.0 {
            fac_old = e.max(1e-4);
            sol.stats.accepted += 1;
            sol.stats.max_error = sol.stats.max_error.max(e);
            let mut c = vec![0.0; 4 * n];
            for i in 0..n {
                let dy = y1[i] - y[i];
                let bspl = hs * k1[i] - dy;
                c[i] = dy;
                c[n + i] = bspl;
                c[2 * n + i] = dy - hs * k7[i] - bspl;
                c[3 * n + i] = hs
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            t = if last { t_end } else { t + hs };
            y.copy_from_slice(&y1);
            std::mem::swap(&mut k1, &mut k7);
            sol.t.push(t);
            sol.y.push(y.clone());
            sol.cont.push(c);
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new.min(hmax);
        } else {
            sol.stats.rejected += 1;
            h_new = h / (fac11 / 0.9).min(10.0);
            last_rejected = true;
            h = h_new;
            if h < hmin {
                sol.termination = Termination::StepUnderflow;
                break;
            }
        }
    }
    Ok(sol)
}

#[allow(clippy::too_many_arguments)]
fn initial_step<F>(
    f: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    dir: f64,
    hmax: f64,
    opts: &OdeOptions,
    stats: &mut OdeStats,
) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]) -> bool,
{
    let n = y0.len();
    let scale = |i: usize| opts.abs_tol + opts.rel_tol * y0[i].abs();
    let rms = |v: &dyn Fn(usize) -> f64| ((0..n).map(|i| v(i).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d0 = rms(&|i| y0[i] / scale(i));
    let d1 = rms(&|i| f0[i] / scale(i));
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(hmax);
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + dir * h0 * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    stats.rhs_evals += 1;
    if !f(t0 + dir * h0, &y1, &mut f1) {
        return (h0 * 0.1).min(hmax);
    }
    let d2 = rms(&|i| (f1[i] - f0[i]) / scale(i)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(hmax)
}

/// Solutions on both sides of an initial parameter, evaluated as one.
#[derive(Debug, Clone)]
pub struct TwoSidedSolution {
    pub t0: f64,
    forward: Option<DenseSolution>,
    backward: Option<DenseSolution>,
    initial: Vec<f64>,
}

impl TwoSidedSolution {
    pub fn t_min(&self) -> f64 {
        self.backward.as_ref().map_or(self.t0, |b| b.t_end())
    }

    pub fn t_max(&self) -> f64 {
        self.forward.as_ref().map_or(self.t0, |f| f.t_end())
    }

    /// True when both halves reached their targets.
    pub fn completed(&self) -> bool {
        self.forward.as_ref().is_none_or(|f| f.completed()) && self.backward.as_ref().is_none_or(|b| b.completed())
    }

    pub fn stats(&self) -> OdeStats {
        let mut s = OdeStats::default();
        for half in [&self.forward, &self.backward].into_iter().flatten() {
            s.merge(&half.stats);
        }
        s
    }

    pub fn eval(&self, t: f64) -> Option<Vec<f64>> {
        if t == self.t0 {
            return Some(self.initial.clone());
        }
        let half = if t > self.t0 { self.forward.as_ref() } else { self.backward.as_ref() }?;
        half.eval(t)
    }
}

/// Integrates from `t0` forward to `t_hi` and backward to `t_lo`.
pub fn integrate_two_sided<F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_lo: f64,
    t_hi: f64,
    opts: &OdeOptions,
) -> Result<TwoSidedSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> bool,
{
    if !(t_lo <= t0 && t0 <= t_hi) {
        return Err(Error::OutsideInterval { value: t0, lo: t_lo, hi: t_hi });
    }
    let forward = if t_hi > t0 { Some(integrate(&mut f, t0, y0, t_hi, opts)?.require_smooth()?) } else { None };
    let backward = if t_lo < t0 { Some(integrate(&mut f, t0, y0, t_lo, opts)?.require_smooth()?) } else { None };
    Ok(TwoSidedSolution { t0, forward, backward, initial: y0.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_with_dense_output() {
        let opts = OdeOptions::with_tolerances(1e-10, 1e-12);
        let sol = integrate(
            |_, y, dy| {
                dy[0] = -y[0];
                true
            },
            0.0,
            &[1.0],
            5.0,
            &opts,
        )
        .unwrap();
        assert!(sol.completed());
        assert!((sol.last()[0] - (-5.0_f64).exp()).abs() < 1e-10);
        for k in 0..=100 {
            let t = 0.05 * k as f64;
            let y = sol.eval(t).unwrap()[0];
            assert!((y - (-t).exp()).abs() < 1e-9, "t={t}");
        }
        assert!(sol.eval(5.1).is_none());
    }

    #[test]
    fn backward_harmonic_oscillator() {
        let opts = OdeOptions::default();
        let sol = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                true
            },
            0.0,
            &[0.0, 1.0],
            -3.0,
            &opts,
        )
        .unwrap();
        for k in 0..=30 {
            let t = -0.1 * k as f64;
            let y = sol.eval(t).unwrap();
            assert!((y[0] - t.sin()).abs() < 1e-9);
            assert!((y[1] - t.cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn domain_exit_yields_partial_solution() {
        let sol = integrate(
            |_, y, dy| {
                dy[0] = 1.0;
                y[0] < 1.0
            },
            0.0,
            &[0.0],
            3.0,
            &OdeOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.termination, Termination::LeftDomain);
        assert!(sol.t_end() < 1.0 && sol.t_end() > 0.99);
    }

    #[test]
    fn immediate_exit_is_empty() {
        let r = integrate(|_, _, _| false, 0.0, &[0.0], 1.0, &OdeOptions::default());
        assert_eq!(r.unwrap_err(), Error::EmptySolution);
    }

    #[test]
    fn two_sided_covers_both_directions() {
        let sol = integrate_two_sided(
            |_, y, dy| {
                dy[0] = y[0];
                true
            },
            1.0,
            &[1.0],
            -1.0,
            2.0,
            &OdeOptions::default(),
        )
        .unwrap();
        assert!(sol.completed());
        for t in [-1.0, -0.3, 0.99, 1.0, 1.01, 2.0] {
            assert!((sol.eval(t).unwrap()[0] - (t - 1.0_f64).exp()).abs() < 1e-9);
        }
        assert!(sol.eval(2.5).is_none());
    }

    #[test]
    fn zero_span_returns_initial_data() {
        let sol = integrate(
            |_, _, dy| {
                dy[0] = 1.0;
                true
            },
            2.0,
            &[4.0],
            2.0,
            &OdeOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.eval(2.0).unwrap(), vec![4.0]);
    }
}
