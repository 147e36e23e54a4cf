//! Command implementations. Each command returns its output files as text so
//! that writing, hashing and manifest assembly happen in one place.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geodesic::{integrate_geodesic, integrate_jacobi, GeodesicIvp};
use crate::lorentz::{validate_frame_of_reference, Frame4, Metric4, Vec4};
use crate::newtlimit::{newtonian_limit_report, sr_tau_dot_series, LimitReport};
use crate::ode::OdeStats;
use crate::spacetime::{fd_christoffels, riemann_ricci_at, Event};
use crate::splitting::{
    cone_vector, invert_observer_map, kinematic_observer_map, kinematic_observer_map_detailed, observe_curve,
    observer_map_jacobian, refine_preimage, ObservedEvent, Vec3,
};

use super::output::{csv_bool, csv_f64, Csv};
use super::scenario::{LimitPlan, Scenario};

/// Files and diagnostics produced by one command.
#[derive(Debug, Default)]
pub struct CommandOutput {
    pub files: Vec<(String, String)>,
    pub diagnostics: BTreeMap<String, toml::Value>,
    pub stats: OdeStats,
    /// Lines for the terminal.
    pub summary: Vec<String>,
    /// Some invariant check failed (`validate` only).
    pub validation_failed: bool,
}

fn add_stats(total: &mut OdeStats, s: &OdeStats) {
    total.merge(s);
}

/// Unit directions on a midpoint polar × uniform azimuth grid.
fn sphere_directions(n_polar: usize, n_azimuth: usize) -> Vec<Vec3> {
    let mut dirs = Vec::with_capacity(n_polar * n_azimuth);
    for i in 0..n_polar {
        let th = PI * (i as f64 + 0.5) / n_polar as f64;
        for j in 0..n_azimuth {
            let ph = 2.0 * PI * j as f64 / n_azimuth as f64;
            dirs.push(Vec3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()));
        }
    }
    dirs
}

/// Direction, endpoint and lightlike residual (if the ray stayed in the
/// chart), and integrator work for one cone ray.
type ConeRow = (Vec3, Option<(Vec4, f64)>, OdeStats);

/// Past light cone of `γ(τ)`: one row per direction and radius.
pub fn trace_cone(sc: &Scenario, tau: Option<f64>) -> Result<CommandOutput> {
    let curve = sc.observer()?;
    let frames = sc.frames(&curve)?;
    let tols = sc.tolerances();
    let chart = frames.chart().clone();
    let tau = tau.unwrap_or(sc.cone.tau_s);
    let base = curve.event(tau)?;
    let x = frames.columns_at(tau)?;
    let c = chart.c();
    let mut points = Vec::new();
    for &r in &sc.cone.radii_m {
        for d in sphere_directions(sc.cone.n_polar, sc.cone.n_azimuth) {
            points.push(d * r);
        }
    }
    let rows: Vec<Result<ConeRow>> = points
        .par_iter()
        .map(|p| {
            let k = cone_vector(&x, p);
            match integrate_geodesic(chart.as_ref(), &GeodesicIvp::new(base.clone(), k), 1.0, &tols) {
                Ok(sol) if sol.completed() => {
                    let end = sol.final_position();
                    let g = Metric4::new_unchecked(chart.metric_components(&end));
                    let resid = g.norm2(&sol.final_velocity()).abs() / (c * c * p.norm_squared());
                    Ok((*p, Some((end, resid)), sol.stats()))
                }
                Ok(sol) => Ok((*p, None, sol.stats())),
                Err(Error::NotInExpDomain(_)) | Err(Error::OutOfChart { .. }) => Ok((*p, None, OdeStats::default())),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut csv = Csv::new(&["tau", "x1", "x2", "x3", "k0", "k1", "k2", "k3", "reach", "lightlike_residual"]);
    let mut out = CommandOutput::default();
    let mut unreached = 0i64;
    let mut worst: f64 = 0.0;
    for row in rows {
        let (p, hit, stats) = row?;
        add_stats(&mut out.stats, &stats);
        let mut cells = vec![csv_f64(tau), csv_f64(p[0]), csv_f64(p[1]), csv_f64(p[2])];
        match hit {
            Some((k, resid)) => {
                worst = worst.max(resid);
                cells.extend(k.iter().map(|v| csv_f64(*v)));
                cells.push("1".into());
                cells.push(csv_f64(resid));
            }
            None => {
                unreached += 1;
                cells.extend((0..4).map(|_| csv_f64(f64::NAN)));
                cells.push("0".into());
                cells.push(csv_f64(f64::NAN));
            }
        }
        csv.row(cells);
    }
    out.diagnostics.insert("rays".into(), toml::Value::Integer(points.len() as i64));
    out.diagnostics.insert("unreached_rays".into(), toml::Value::Integer(unreached));
    out.diagnostics.insert("max_lightlike_residual".into(), toml::Value::Float(worst));
    out.summary.push(format!("traced {} rays at tau = {tau}, {unreached} left the chart", points.len()));
    out.files.push(("cone.csv".into(), csv.finish()));
    add_stats(&mut out.stats, &frames.integrator_stats());
    Ok(out)
}

/// Parses a targets file: one event `k0,k1,k2,k3` per line; blank lines,
/// `#` comments and a non-numeric header line are skipped.
pub fn parse_targets(text: &str) -> Result<Vec<Vec4>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == 4 => out.push(Vec4::new(v[0], v[1], v[2], v[3])),
            Ok(v) => {
                return Err(Error::Config(format!("targets line {}: expected 4 values, found {}", n + 1, v.len())))
            }
            Err(_) if out.is_empty() && fields.iter().all(|f| f.parse::<f64>().is_err()) => continue,
            Err(e) => return Err(Error::Config(format!("targets line {}: {e}", n + 1))),
        }
    }
    Ok(out)
}

/// Observer coordinates of each target event.
pub fn invert(sc: &Scenario, targets: &[Vec4]) -> Result<CommandOutput> {
    let curve = sc.observer()?;
    let frames = sc.frames(&curve)?;
    let tols = sc.tolerances();
    let cfg = sc.inversion_config();
    let chart_id = frames.chart().id().to_string();
    let mut csv = Csv::new(&[
        "target", "k0", "k1", "k2", "k3", "tau", "x1", "x2", "x3", "residual", "condition", "regular", "preimages",
    ]);
    let mut out = CommandOutput::default();
    let (mut missing, mut outside, mut origin) = (0i64, 0i64, 0i64);
    for (i, t) in targets.iter().enumerate() {
        let res = match invert_observer_map(&frames, &Event::from_vec(&chart_id, *t), &cfg, &tols) {
            Ok(r) => r,
            Err(Error::OutOfChart { .. }) => {
                outside += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        if res.preimages.is_empty() {
            missing += 1;
        }
        if res.origin_excluded {
            origin += 1;
        }
        for pre in &res.preimages {
            let mut cells = vec![i.to_string()];
            cells.extend(t.iter().map(|v| csv_f64(*v)));
            cells.extend([pre.point.tau, pre.point.x[0], pre.point.x[1], pre.point.x[2], pre.residual, pre.condition].map(csv_f64));
            cells.push(csv_bool(pre.regular));
            cells.push(res.preimages.len().to_string());
            csv.row(cells);
        }
    }
    out.diagnostics.insert("targets".into(), toml::Value::Integer(targets.len() as i64));
    out.diagnostics.insert("targets_without_preimage".into(), toml::Value::Integer(missing));
    out.diagnostics.insert("targets_outside_chart".into(), toml::Value::Integer(outside));
    out.diagnostics.insert("targets_on_worldline".into(), toml::Value::Integer(origin));
    out.summary.push(format!("inverted {} targets, {missing} without preimage, {outside} outside the chart", targets.len()));
    out.files.push(("preimages.csv".into(), csv.finish()));
    add_stats(&mut out.stats, &frames.integrator_stats());
    Ok(out)
}

/// Relative motion of the scenario's worldline.
pub fn observe(sc: &Scenario) -> Result<CommandOutput> {
    let curve = sc.observer()?;
    let frames = sc.frames(&curve)?;
    let tols = sc.tolerances();
    let cfg = sc.observe_config()?;
    let worldline = sc.worldline()?;
    let samples = sc.observe_samples()?;
    let rep = observe_curve(&frames, &worldline, &samples, &cfg, &tols)?;
    let mut csv = Csv::new(&[
        "status", "s", "tau", "x1", "x2", "x3", "tau_dot", "v1", "v2", "v3", "dv1_dtau", "dv2_dtau", "dv3_dtau",
        "tau_ddot", "ambiguous", "not_an_observer", "tangent_norm",
    ]);
    let nan3 = Vec3::repeat(f64::NAN);
    for s in &rep.samples {
        let dv = s.dv_dtau.unwrap_or(nan3);
        let mut cells = vec!["ok".to_string()];
        cells.extend([s.s, s.tau, s.x[0], s.x[1], s.x[2], s.tau_dot, s.v[0], s.v[1], s.v[2], dv[0], dv[1], dv[2]].map(csv_f64));
        cells.push(csv_f64(s.tau_ddot.unwrap_or(f64::NAN)));
        cells.push(csv_bool(s.ambiguous));
        cells.push(csv_bool(s.not_an_observer));
        cells.push(csv_f64(s.tangent_norm));
        csv.row(cells);
    }
    let mut out = CommandOutput::default();
    if let Some(s) = rep.lost_at {
        let mut cells = vec!["branch-lost".to_string(), csv_f64(s)];
        cells.extend((0..12).map(|_| csv_f64(f64::NAN)));
        cells.extend(["false".to_string(), "false".to_string(), csv_f64(f64::NAN)]);
        csv.row(cells);
        out.summary.push(format!("branch lost at s = {s}"));
    }
    let flagged = rep.samples.iter().filter(|s| s.not_an_observer).count();
    out.diagnostics.insert("samples".into(), toml::Value::Integer(rep.samples.len() as i64));
    out.diagnostics.insert("branch_lost".into(), toml::Value::Boolean(rep.branch_lost));
    out.diagnostics.insert("not_an_observer_samples".into(), toml::Value::Integer(flagged as i64));
    out.summary.push(format!("observed {} samples, {flagged} flagged not-an-observer", rep.samples.len()));
    out.files.push(("observation.csv".into(), csv.finish()));
    add_stats(&mut out.stats, &frames.integrator_stats());
    Ok(out)
}

#[derive(serde::Serialize)]
struct JetReport {
    scenario: &'static str,
    speed_m_per_s: f64,
    light_speed_m_per_s: f64,
    first_order_correction: f64,
    second_order_correction: f64,
    bound: f64,
    within_bound: bool,
}

/// Bound on the first-order clock-rate correction quoted for a jet fighter.
pub const JET_FIGHTER_BOUND: f64 = 6.5e-6;

/// Newtonian-limit sweep over `c`.
pub fn newton_limit(sc: &Scenario, c_override: &[f64]) -> Result<CommandOutput> {
    let spec = sc.newton_limit.as_ref().ok_or_else(|| Error::Config("scenario has no [newton_limit] section".into()))?;
    let mut out = CommandOutput::default();
    match spec.plan(c_override)? {
        LimitPlan::JetFighter { speed, light_speed } => {
            let s = sr_tau_dot_series(1.0, speed)?;
            let eps = 1.0 / light_speed;
            let first = s.c[1] * eps;
            let rep = JetReport {
                scenario: "jet-fighter",
                speed_m_per_s: speed,
                light_speed_m_per_s: light_speed,
                first_order_correction: first,
                second_order_correction: s.c[2] * eps * eps,
                bound: JET_FIGHTER_BOUND,
                within_bound: first.abs() <= JET_FIGHTER_BOUND,
            };
            out.summary.push(format!("first-order clock-rate correction {first:.6e} (bound {JET_FIGHTER_BOUND:e})"));
            out.files.push(("limit_report.toml".into(), toml::to_string(&rep).map_err(|e| Error::Io(e.to_string()))?));
        }
        LimitPlan::Sweep(scenario, cs) => {
            let rep = newtonian_limit_report(&scenario, &cs, &sc.tolerances())?;
            out.files.push(("limit_report.toml".into(), toml::to_string(&rep).map_err(|e| Error::Io(e.to_string()))?));
            out.files.push(("limit.csv".into(), limit_csv(&rep)));
            let slope = |s: Option<f64>| s.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into());
            out.summary.push(format!(
                "{}: tau series slope {}, pseudo-force slope {}, remainder slope {}",
                rep.scenario,
                slope(rep.tau_series_slope),
                slope(rep.pseudo_force_slope),
                slope(rep.pseudo_remainder_slope)
            ));
        }
    }
    Ok(out)
}

fn limit_csv(rep: &LimitReport) -> String {
    let mut csv = Csv::new(&[
        "c",
        "samples",
        "max_tau_dot_dev",
        "tau_series_residual",
        "first_order_correction",
        "pseudo_force",
        "pseudo_remainder",
        "force_consistency",
    ]);
    for r in &rep.rows {
        let mut cells = vec![csv_f64(r.c), r.samples.to_string()];
        cells.extend(
            [r.max_tau_dot_dev, r.tau_series_residual, r.first_order_correction, r.pseudo_force, r.pseudo_remainder, r.force_consistency]
                .map(csv_f64),
        );
        csv.row(cells);
    }
    csv.finish()
}

/// One invariant check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.measured <= self.tolerance
    }
}

/// Numerical invariants of the scenario, sampled with a seeded generator.
pub fn validation_checks(sc: &Scenario, seed: u64) -> Result<Vec<Check>> {
    let curve = sc.observer()?;
    let chart = curve.chart().clone();
    let tols = sc.tolerances();
    let c = chart.c();
    let (lo, hi) = curve.interval();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sc.validate.samples.max(1);
    let margin = 0.05 * (hi - lo);
    let taus: Vec<f64> = (0..n).map(|_| rng.random_range(lo + margin..hi - margin)).collect();
    let mut checks = Vec::new();

    let mut norm_dev: f64 = 0.0;
    for &t in &taus {
        let k = curve.kinematics(t)?;
        let g = curve.metric(t)?;
        norm_dev = norm_dev.max((g.norm2(&k.velocity) / (c * c) - 1.0).abs());
    }
    checks.push(Check { name: "observer_normalization", measured: norm_dev, tolerance: 1e-9 });

    if let Some(x0) = sc.explicit_frame() {
        let t0 = 0.0f64.clamp(lo, hi);
        let g = curve.metric(t0)?;
        let q = curve.event(t0)?;
        let gram = (g.gram(&x0) - crate::lorentz::eta()).amax();
        checks.push(Check { name: "initial_frame_gram_residual", measured: gram, tolerance: 1e-8 });
        let reference = Frame4::new(q.clone(), chart.reference_frame(&q.coords))?;
        let valid = Frame4::new(q, x0)
            .map(|fr| validate_frame_of_reference(&g, &reference.column(0), &reference, &fr, 1e-8))
            .unwrap_or(false);
        checks.push(Check { name: "initial_frame_is_frame_of_reference", measured: if valid { 0.0 } else { 1.0 }, tolerance: 0.0 });
        if !valid {
            return Ok(checks);
        }
    }

    let frames = sc.frames(&curve)?;
    let (mut gram, mut tangent): (f64, f64) = (0.0, 0.0);
    for &t in &taus {
        let fc = frames.check(t)?;
        gram = gram.max(fc.gram_residual);
        tangent = tangent.max(fc.tangent_residual);
    }
    checks.push(Check { name: "frame_gram_drift", measured: gram, tolerance: 1e-8 });
    checks.push(Check { name: "frame_tangent_residual", measured: tangent, tolerance: 1e-8 });

    let xmax = sc.validate.x_max_m;
    let points: Vec<ObservedEvent> = taus
        .iter()
        .map(|&t| {
            let dir = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let dir = if dir.norm() < 1e-3 { Vec3::x() } else { dir.normalize() };
            let r = rng.random_range(0.3 * xmax..xmax);
            ObservedEvent::new(t, dir * r)
        })
        .collect::<Result<_>>()?;

    let mut light_res: f64 = 0.0;
    for p in &points {
        let mp = kinematic_observer_map_detailed(&frames, p, &tols)?;
        light_res = light_res.max(mp.lightlike_residual.abs());
        if !(mp.time_pairing < 0.0) {
            light_res = f64::INFINITY;
        }
    }
    checks.push(Check { name: "initial_vector_lightlike_past", measured: light_res, tolerance: 1e-10 });

    let (mut drift, mut affinity): (f64, f64) = (0.0, 0.0);
    for p in &points {
        let x = frames.columns_at(p.tau)?;
        let base = curve.event(p.tau)?;
        let light = cone_vector(&x, &p.x);
        let timelike = x.column(0) * 1.5 + x.column(1) * (0.5 * p.x[0] / p.x.norm()) + x.column(2) * 0.3;
        for k in [light, timelike] {
            let sol = integrate_geodesic(chart.as_ref(), &GeodesicIvp::new(base.clone(), k), 1.0, &tols)?;
            let g0 = Metric4::new_unchecked(chart.metric_components(&base.coords));
            let n0 = g0.norm2(&k);
            let scale = k.norm_squared().max(1e-300);
            let j0 = Vec4::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.1, -0.2) * 0.1;
            let dj0 = Vec4::new(0.05, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.1) * 0.1;
            let jac = integrate_jacobi(chart.as_ref(), &sol, &j0, &dj0)?;
            let (a, b) = (g0.dot(&dj0, &k), g0.dot(&j0, &k));
            for i in 0..=4 {
                let s = 0.25 * i as f64;
                let pos = sol.position(s).ok_or(Error::EmptySolution)?;
                let gs = Metric4::new_unchecked(chart.metric_components(&pos));
                let u = sol.velocity(s).ok_or(Error::EmptySolution)?;
                drift = drift.max((gs.norm2(&u) - n0).abs() / scale);
                let j = jac.j(s).ok_or(Error::EmptySolution)?;
                affinity = affinity.max((gs.dot(&j, &u) - (a * s + b)).abs());
            }
        }
    }
    checks.push(Check { name: "geodesic_norm_drift", measured: drift, tolerance: 1e-9 });
    checks.push(Check { name: "jacobi_pairing_affinity", measured: affinity, tolerance: 1e-7 });

    let (mut ricci, mut christ): (f64, f64) = (0.0, 0.0);
    for p in &points {
        let e = kinematic_observer_map(&frames, p, &tols)?;
        let cs = riemann_ricci_at(chart.as_ref(), &e.coords, tols.fd_step)?;
        ricci = ricci.max(cs.ricci.amax());
        if let Some(an) = chart.analytic_christoffels(&e.coords) {
            let fd = fd_christoffels(chart.as_ref(), &e.coords, tols.fd_step).ok_or(Error::NonInvertible)?;
            for (a, b) in an.0.iter().flatten().flatten().zip(fd.0.iter().flatten().flatten()) {
                christ = christ.max((a - b).abs());
            }
        }
    }
    checks.push(Check { name: "ricci_flatness", measured: ricci, tolerance: 1e-5 });
    checks.push(Check { name: "christoffel_fd_vs_analytic", measured: christ, tolerance: 1e-6 });

    let mut jac_err: f64 = 0.0;
    let mut round_trip: f64 = 0.0;
    let cfg = sc.inversion_config();
    for p in &points {
        let mj = observer_map_jacobian(&frames, p, &tols)?;
        let h = 1e-5;
        for i in 0..4 {
            let shift = |d: f64| {
                let mut y = p.coords(c);
                y[i] += d;
                ObservedEvent::new(y[0] / c, Vec3::new(y[1], y[2], y[3]))
            };
            let fp = kinematic_observer_map(&frames, &shift(h)?, &tols)?.coords;
            let fm = kinematic_observer_map(&frames, &shift(-h)?, &tols)?.coords;
            let fd = (fp - fm) / (2.0 * h);
            let col = mj.jacobian.column(i).into_owned();
            jac_err = jac_err.max((fd - col).norm() / col.norm().max(1e-300));
        }
        let guess = ObservedEvent::new(p.tau + 0.01 * (hi - lo) / 100.0, p.x * 1.01)?;
        match refine_preimage(&frames, &mj.point.event, &guess, &cfg, &tols) {
            Some(pre) => {
                let back = kinematic_observer_map(&frames, &pre.point, &tols)?;
                round_trip = round_trip.max((back.coords - mj.point.event.coords).amax());
            }
            None => round_trip = f64::INFINITY,
        }
    }
    checks.push(Check { name: "jacobian_vs_finite_differences", measured: jac_err, tolerance: 1e-5 });
    checks.push(Check { name: "inversion_round_trip", measured: round_trip, tolerance: 1e-8 });
    Ok(checks)
}

pub fn validate(sc: &Scenario, seed: u64) -> Result<CommandOutput> {
    let checks = validation_checks(sc, seed)?;
    let mut csv = Csv::new(&["check", "measured", "tolerance", "pass"]);
    let mut out = CommandOutput::default();
    for ch in &checks {
        csv.row(vec![ch.name.to_string(), csv_f64(ch.measured), csv_f64(ch.tolerance), csv_bool(ch.passed())]);
        out.summary.push(format!(
            "{} {:<38} measured {:.3e} (tolerance {:.1e})",
            if ch.passed() { "PASS" } else { "FAIL" },
            ch.name,
            ch.measured,
            ch.tolerance
        ));
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    out.validation_failed = failed > 0;
    out.diagnostics.insert("checks".into(), toml::Value::Integer(checks.len() as i64));
    out.diagnostics.insert("failed_checks".into(), toml::Value::Integer(failed as i64));
    out.files.push(("validation.csv".into(), csv.finish()));
    Ok(out)
}
