//! Scenario files: schema, canonical hashing and construction of the
//! numerical objects they describe.
//!
//! Quantities are SI with the unit spelled in the key (`c_m_per_s`,
//! `a_m_per_s2`, ...). Chart coordinates are lengths, `κ⁰ = ct`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geodesic::{integrate_geodesic, GeodesicIvp, Tolerances};
use crate::lorentz::{Mat4, Vec4};
use crate::newtlimit::LimitScenario;
use crate::observer::{
    fermi_walker_transport, make_driven_observer, make_inertial_observer, make_static_observer,
    make_uniformly_accelerated_observer, rotating_frame, rotating_frame_about, standard_frame, AccelerationProgram,
    FrameField, ObserverCurve,
};
use crate::spacetime::{Chart, Event, Minkowski, Schwarzschild};
use crate::splitting::{InversionConfig, ObserveConfig, Vec3, Worldline};

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub spacetime: SpacetimeSpec,
    pub observer: ObserverSpec,
    #[serde(default)]
    pub frame: FrameSpec,
    #[serde(default)]
    pub tolerances: TolerancesSpec,
    #[serde(default)]
    pub inversion: InversionSpec,
    #[serde(default)]
    pub cone: ConeSpec,
    #[serde(default)]
    pub observe: Option<ObserveSpec>,
    #[serde(default)]
    pub newton_limit: Option<NewtonLimitSpec>,
    #[serde(default)]
    pub validate: ValidateSpec,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpacetimeSpec {
    Minkowski {
        #[serde(default = "one")]
        c_m_per_s: f64,
    },
    Schwarzschild {
        #[serde(default = "one")]
        c_m_per_s: f64,
        radius_m: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObserverSpec {
    /// Free fall from `start_event_m` with chart velocity `velocity`.
    Inertial {
        #[serde(default)]
        start_event_m: [f64; 4],
        #[serde(default = "unit_time")]
        velocity: [f64; 4],
        interval_s: [f64; 2],
    },
    UniformlyAccelerated {
        a_m_per_s2: f64,
        interval_s: [f64; 2],
    },
    Static {
        r_m: f64,
        #[serde(default = "equator")]
        theta_rad: f64,
        #[serde(default)]
        phi_rad: f64,
        interval_s: [f64; 2],
    },
    /// Constant proper acceleration along the transported spatial legs.
    Driven {
        #[serde(default)]
        start_event_m: [f64; 4],
        #[serde(default = "unit_time")]
        velocity: [f64; 4],
        acceleration_m_per_s2: [f64; 3],
        interval_s: [f64; 2],
    },
}

fn unit_time() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

fn equator() -> f64 {
    std::f64::consts::FRAC_PI_2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameKind {
    #[default]
    FermiWalker,
    Rotating,
    /// Constant angular-velocity vector relative to the Fermi–Walker frame.
    Program,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    #[serde(default)]
    pub kind: FrameKind,
    #[serde(default)]
    pub omega_rad_per_s: f64,
    #[serde(default = "first_axis")]
    pub axis: usize,
    #[serde(default)]
    pub omega_vec_rad_per_s: [f64; 3],
    /// Explicit initial frame at `τ = 0`, given as four columns.
    #[serde(default)]
    pub columns: Option<[[f64; 4]; 4]>,
}

fn first_axis() -> usize {
    1
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self {
            kind: FrameKind::default(),
            omega_rad_per_s: 0.0,
            axis: first_axis(),
            omega_vec_rad_per_s: [0.0; 3],
            columns: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesSpec {
    #[serde(default = "d_rel")]
    pub rel_tol: f64,
    #[serde(default = "d_abs")]
    pub abs_tol: f64,
    #[serde(default = "d_fd")]
    pub fd_step: f64,
    #[serde(default = "d_inv")]
    pub inv_tol: f64,
    #[serde(default = "d_merge")]
    pub merge_tol: f64,
    #[serde(default = "d_cond")]
    pub cond_max: f64,
}

fn d_rel() -> f64 {
    1e-10
}
fn d_abs() -> f64 {
    1e-12
}
fn d_fd() -> f64 {
    1e-5
}
fn d_inv() -> f64 {
    1e-10
}
fn d_merge() -> f64 {
    1e-6
}
fn d_cond() -> f64 {
    1e8
}

impl Default for TolerancesSpec {
    fn default() -> Self {
        Self { rel_tol: d_rel(), abs_tol: d_abs(), fd_step: d_fd(), inv_tol: d_inv(), merge_tol: d_merge(), cond_max: d_cond() }
    }
}

/// Keys accepted by `--tol-override`.
pub const TOLERANCE_KEYS: [&str; 6] = ["rel_tol", "abs_tol", "fd_step", "inv_tol", "merge_tol", "cond_max"];

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InversionSpec {
    #[serde(default)]
    pub tau_range_s: Option<[f64; 2]>,
    #[serde(default = "d_half")]
    pub x_half_width_m: f64,
    #[serde(default = "d_grid")]
    pub grid: [usize; 4],
    #[serde(default = "d_seeds")]
    pub max_seeds: usize,
    #[serde(default = "d_iter")]
    pub max_iter: usize,
}

fn d_half() -> f64 {
    10.0
}
fn d_grid() -> [usize; 4] {
    [3, 9, 9, 9]
}
fn d_seeds() -> usize {
    48
}
fn d_iter() -> usize {
    50
}

impl Default for InversionSpec {
    fn default() -> Self {
        Self { tau_range_s: None, x_half_width_m: d_half(), grid: d_grid(), max_seeds: d_seeds(), max_iter: d_iter() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConeSpec {
    #[serde(default)]
    pub tau_s: f64,
    #[serde(default = "d_radii")]
    pub radii_m: Vec<f64>,
    #[serde(default = "d_polar")]
    pub n_polar: usize,
    #[serde(default = "d_azimuth")]
    pub n_azimuth: usize,
}

fn d_radii() -> Vec<f64> {
    vec![1.0, 2.0]
}
fn d_polar() -> usize {
    4
}
fn d_azimuth() -> usize {
    8
}

impl Default for ConeSpec {
    fn default() -> Self {
        Self { tau_s: 0.0, radii_m: d_radii(), n_polar: d_polar(), n_azimuth: d_azimuth() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WorldlineSpec {
    /// Free particle through `start_event_m`; give either the chart
    /// velocity or the coordinate 3-velocity `dκ^a/dt` (with `dκ⁰/dt = c`).
    Inertial {
        start_event_m: [f64; 4],
        #[serde(default)]
        velocity: Option<[f64; 4]>,
        #[serde(default)]
        coordinate_velocity_m_per_s: Option<[f64; 3]>,
    },
    /// Fixed observer coordinates `x⃗`, parametrized by `τ`.
    Comoving { position_m: [f64; 3] },
    /// Lightlike geodesic with initial chart tangent `direction`.
    Light { start_event_m: [f64; 4], direction: [f64; 4], affine_end: f64 },
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ObserveSpec {
    pub worldline: WorldlineSpec,
    pub samples: Vec<f64>,
    #[serde(default = "d_diff")]
    pub diff_step: f64,
    #[serde(default)]
    pub recheck_every: usize,
}

fn d_diff() -> f64 {
    0.02
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitKind {
    SrInertial,
    Comoving,
    AcceleratedRotating,
    SchwarzschildStatic,
    JetFighter,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonLimitSpec {
    pub scenario: LimitKind,
    #[serde(default = "d_cs")]
    pub c_values_m_per_s: Vec<f64>,
    #[serde(default)]
    pub samples_s: Vec<f64>,
    #[serde(default)]
    pub w_m_per_s: Option<[f64; 3]>,
    #[serde(default)]
    pub start_m: Option<[f64; 3]>,
    #[serde(default)]
    pub position_m: Option<[f64; 3]>,
    #[serde(default = "d_half")]
    pub box_half_m: f64,
    #[serde(default)]
    pub a_m_per_s2: Option<f64>,
    #[serde(default)]
    pub omega_rad_per_s: Option<f64>,
    #[serde(default)]
    pub gm_m3_per_s2: Option<f64>,
    #[serde(default)]
    pub r_m: Option<f64>,
    #[serde(default)]
    pub speed_m_per_s: Option<f64>,
    #[serde(default)]
    pub light_speed_m_per_s: Option<f64>,
}

fn d_cs() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0]
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSpec {
    /// Random points per sampled check.
    #[serde(default = "d_samples")]
    pub samples: usize,
    /// Largest `|x⃗|` of random observer-space points.
    #[serde(default = "d_xmax")]
    pub x_max_m: f64,
}

fn d_samples() -> usize {
    8
}
fn d_xmax() -> f64 {
    2.0
}

impl Default for ValidateSpec {
    fn default() -> Self {
        Self { samples: d_samples(), x_max_m: d_xmax() }
    }
}

/// Parsed scenario plus its canonical form.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub canonical: String,
    pub hash: String,
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

/// Parses scenario text, applies `KEY=VAL` tolerance overrides and computes
/// the canonical hash.
pub fn load_scenario(text: &str, overrides: &[String]) -> Result<LoadedScenario> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| config_err(format!("scenario: {e}")))?;
    for ov in overrides {
        let (key, val) = ov
            .split_once('=')
            .ok_or_else(|| config_err(format!("--tol-override expects KEY=VAL, got `{ov}`")))?;
        let key = key.trim();
        if !TOLERANCE_KEYS.contains(&key) {
            return Err(config_err(format!("unknown tolerance `{key}`; expected one of {}", TOLERANCE_KEYS.join(", "))));
        }
        let v: f64 = val.trim().parse().map_err(|_| config_err(format!("tolerance `{key}`: `{val}` is not a number")))?;
        let tols = table
            .entry("tolerances")
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| config_err("`tolerances` must be a table"))?;
        tols.insert(key.to_string(), toml::Value::Float(v));
    }
    let canonical = toml::to_string(&table).map_err(config_err)?;
    let scenario: Scenario = toml::from_str(&canonical).map_err(|e| config_err(format!("scenario: {e}")))?;
    scenario.check()?;
    let hash = Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    Ok(LoadedScenario { scenario, canonical, hash })
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("`{name}` must be positive, got {v}")))
    }
}

fn interval(name: &str, i: [f64; 2]) -> Result<(f64, f64)> {
    if i[0] < i[1] && i.iter().all(|v| v.is_finite()) {
        Ok((i[0], i[1]))
    } else {
        Err(config_err(format!("`{name}` must be an increasing pair, got {i:?}")))
    }
}

impl Scenario {
    fn check(&self) -> Result<()> {
        let t = &self.tolerances;
        for (k, v) in TOLERANCE_KEYS.iter().zip([t.rel_tol, t.abs_tol, t.fd_step, t.inv_tol, t.merge_tol, t.cond_max]) {
            positive(&format!("tolerances.{k}"), v)?;
        }
        positive("inversion.x_half_width_m", self.inversion.x_half_width_m)?;
        if self.inversion.grid.contains(&0) {
            return Err(config_err("`inversion.grid` counts must be at least 1"));
        }
        if !(1..=3).contains(&self.frame.axis) {
            return Err(config_err(format!("`frame.axis` must be 1, 2 or 3, got {}", self.frame.axis)));
        }
        if self.cone.radii_m.iter().any(|&r| !(r > 0.0)) {
            return Err(config_err("`cone.radii_m` must be positive"));
        }
        Ok(())
    }

    pub fn c(&self) -> f64 {
        match self.spacetime {
            SpacetimeSpec::Minkowski { c_m_per_s } | SpacetimeSpec::Schwarzschild { c_m_per_s, .. } => c_m_per_s,
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances { rel_tol: self.tolerances.rel_tol, abs_tol: self.tolerances.abs_tol, fd_step: self.tolerances.fd_step }
    }

    pub fn inversion_config(&self) -> InversionConfig {
        let h = self.inversion.x_half_width_m;
        InversionConfig {
            tau_range: self.inversion.tau_range_s.map(|r| (r[0], r[1])),
            x_range: [(-h, h); 3],
            grid: self.inversion.grid,
            max_seeds: self.inversion.max_seeds,
            max_iter: self.inversion.max_iter,
            inv_tol: self.tolerances.inv_tol,
            merge_tol: self.tolerances.merge_tol,
            cond_max: self.tolerances.cond_max,
        }
    }

    pub fn chart(&self) -> Result<Arc<dyn Chart>> {
        Ok(match self.spacetime {
            SpacetimeSpec::Minkowski { c_m_per_s } => Arc::new(Minkowski::new(c_m_per_s)?),
            SpacetimeSpec::Schwarzschild { c_m_per_s, radius_m } => Arc::new(Schwarzschild::new(radius_m, c_m_per_s)?),
        })
    }

    pub fn observer(&self) -> Result<ObserverCurve> {
        let chart = self.chart()?;
        let tols = self.tolerances();
        match &self.observer {
            ObserverSpec::Inertial { start_event_m, velocity, interval_s } => make_inertial_observer(
                chart.clone(),
                &Event::new(chart.id(), *start_event_m),
                &Vec4::from(*velocity),
                interval("observer.interval_s", *interval_s)?,
                &tols,
            ),
            ObserverSpec::UniformlyAccelerated { a_m_per_s2, interval_s } => {
                if !matches!(self.spacetime, SpacetimeSpec::Minkowski { .. }) {
                    return Err(config_err("uniformly-accelerated observers need a minkowski spacetime"));
                }
                make_uniformly_accelerated_observer(*a_m_per_s2, self.c(), interval("observer.interval_s", *interval_s)?)
            }
            ObserverSpec::Static { r_m, theta_rad, phi_rad, interval_s } => {
                let SpacetimeSpec::Schwarzschild { c_m_per_s, radius_m } = self.spacetime else {
                    return Err(config_err("static observers need a schwarzschild spacetime"));
                };
                let s = Schwarzschild::new(radius_m, c_m_per_s)?;
                make_static_observer(&s, *r_m, *theta_rad, *phi_rad, interval("observer.interval_s", *interval_s)?)
            }
            ObserverSpec::Driven { start_event_m, velocity, acceleration_m_per_s2, interval_s } => {
                let a = Vec3::from(*acceleration_m_per_s2);
                let program: AccelerationProgram = Arc::new(move |_| a);
                make_driven_observer(
                    chart.clone(),
                    &Event::new(chart.id(), *start_event_m),
                    &Vec4::from(*velocity),
                    None,
                    Some(program),
                    interval("observer.interval_s", *interval_s)?,
                    &tols,
                )
            }
        }
    }

    /// Explicit initial frame columns, if the scenario gives them.
    pub fn explicit_frame(&self) -> Option<Mat4> {
        self.frame.columns.map(|cols| Mat4::from_columns(&cols.map(Vec4::from)))
    }

    pub fn frames(&self, curve: &ObserverCurve) -> Result<FrameField> {
        let tols = self.tolerances();
        let base = match self.explicit_frame() {
            Some(x0) => {
                let (lo, hi) = curve.interval();
                fermi_walker_transport(curve, 0.0f64.clamp(lo, hi), &x0, &tols)?
            }
            None => standard_frame(curve, &tols)?,
        };
        match self.frame.kind {
            FrameKind::FermiWalker => Ok(base),
            FrameKind::Rotating => rotating_frame(&base, self.frame.omega_rad_per_s, self.frame.axis),
            FrameKind::Program => rotating_frame_about(&base, &Vec3::from(self.frame.omega_vec_rad_per_s)),
        }
    }

    pub fn observe_config(&self) -> Result<ObserveConfig> {
        let spec = self.observe.as_ref().ok_or_else(|| config_err("scenario has no [observe] section"))?;
        positive("observe.diff_step", spec.diff_step)?;
        Ok(ObserveConfig { inversion: self.inversion_config(), diff_step: spec.diff_step, recheck_every: spec.recheck_every })
    }

    pub fn worldline(&self) -> Result<Worldline> {
        let spec = self.observe.as_ref().ok_or_else(|| config_err("scenario has no [observe] section"))?;
        let chart = self.chart()?;
        let tols = self.tolerances();
        let (lo, hi) = spec.samples.iter().fold((0.0f64, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
        let margin = 2.0 * spec.diff_step + 1.0;
        match &spec.worldline {
            WorldlineSpec::Inertial { start_event_m, velocity, coordinate_velocity_m_per_s } => {
                let u = match (velocity, coordinate_velocity_m_per_s) {
                    (Some(u), None) => Vec4::from(*u),
                    (None, Some(w)) => Vec4::new(self.c(), w[0], w[1], w[2]),
                    _ => {
                        return Err(config_err(
                            "observe.worldline: give exactly one of `velocity` and `coordinate_velocity_m_per_s`",
                        ))
                    }
                };
                let obs = make_inertial_observer(
                    chart.clone(),
                    &Event::new(chart.id(), *start_event_m),
                    &u,
                    (lo - margin, hi + margin),
                    &tols,
                )?;
                Ok(Worldline::Observer(obs))
            }
            WorldlineSpec::Comoving { position_m } => Ok(Worldline::Comoving(Vec3::from(*position_m))),
            WorldlineSpec::Light { start_event_m, direction, affine_end } => {
                let ivp = GeodesicIvp::new(Event::new(chart.id(), *start_event_m), Vec4::from(*direction));
                let sol = integrate_geodesic(chart.as_ref(), &ivp, *affine_end, &tols)?;
                Ok(Worldline::Geodesic(sol))
            }
        }
    }

    pub fn observe_samples(&self) -> Result<Vec<f64>> {
        Ok(self.observe.as_ref().ok_or_else(|| config_err("scenario has no [observe] section"))?.samples.clone())
    }
}

/// What `newton-limit` runs.
pub enum LimitPlan {
    Sweep(LimitScenario, Vec<f64>),
    JetFighter { speed: f64, light_speed: f64 },
}

fn need<T: Copy>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| config_err(format!("newton_limit.{key} is required for this scenario")))
}

impl NewtonLimitSpec {
    pub fn plan(&self, c_override: &[f64]) -> Result<LimitPlan> {
        let cs = if c_override.is_empty() { self.c_values_m_per_s.clone() } else { c_override.to_vec() };
        for &c in &cs {
            positive("newton_limit.c_values_m_per_s", c)?;
        }
        let samples = if self.samples_s.is_empty() { vec![0.0, 1.0, 2.0] } else { self.samples_s.clone() };
        let sc = match self.scenario {
            LimitKind::JetFighter => {
                return Ok(LimitPlan::JetFighter {
                    speed: need(self.speed_m_per_s, "speed_m_per_s")?,
                    light_speed: need(self.light_speed_m_per_s, "light_speed_m_per_s")?,
                })
            }
            LimitKind::SrInertial => LimitScenario::SrInertial {
                w: Vec3::from(need(self.w_m_per_s, "w_m_per_s")?),
                start: Vec3::from(need(self.start_m, "start_m")?),
                samples,
                box_half: self.box_half_m,
            },
            LimitKind::Comoving => {
                LimitScenario::Comoving { x: Vec3::from(need(self.position_m, "position_m")?), samples }
            }
            LimitKind::AcceleratedRotating => LimitScenario::AcceleratedRotating {
                a: need(self.a_m_per_s2, "a_m_per_s2")?,
                omega: self.omega_rad_per_s.unwrap_or(0.0),
                x: Vec3::from(need(self.position_m, "position_m")?),
                samples,
            },
            LimitKind::SchwarzschildStatic => LimitScenario::SchwarzschildStatic {
                gm: need(self.gm_m3_per_s2, "gm_m3_per_s2")?,
                r: need(self.r_m, "r_m")?,
                x: Vec3::from(need(self.position_m, "position_m")?),
                samples,
            },
        };
        Ok(LimitPlan::Sweep(sc, cs))
    }
}

/// Built-in scenarios, by name.
pub const PRESETS: [(&str, &str); 8] = [
    ("minkowski", include_str!("../../presets/minkowski.toml")),
    ("schwarzschild", include_str!("../../presets/schwarzschild.toml")),
    ("corrupted-frame", include_str!("../../presets/corrupted_frame.toml")),
    ("sr-inertial", include_str!("../../presets/sr_inertial.toml")),
    ("jet-fighter", include_str!("../../presets/jet_fighter.toml")),
    ("comoving", include_str!("../../presets/comoving.toml")),
    ("rotating", include_str!("../../presets/rotating.toml")),
    ("accelerated-rotating", include_str!("../../presets/accelerated_rotating.toml")),
];

pub fn preset(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| config_err(format!("unknown preset `{name}`; available: {}", preset_names().join(", "))))
}

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_build() {
        for (name, text) in PRESETS {
            let loaded = load_scenario(text, &[]).unwrap_or_else(|e| panic!("{name}: {e}"));
            let obs = loaded.scenario.observer().unwrap_or_else(|e| panic!("{name}: {e}"));
            if name != "corrupted-frame" {
                loaded.scenario.frames(&obs).unwrap_or_else(|e| panic!("{name}: {e}"));
            }
        }
    }

    #[test]
    fn hash_ignores_formatting_but_not_settings() {
        let a = "[spacetime]\nkind = \"minkowski\"\n[observer]\nkind = \"inertial\"\ninterval_s = [-1.0, 1.0]\n";
        let b = "# comment\n[observer]\ninterval_s = [ -1.0,1.0 ]\nkind = \"inertial\"\n\n[spacetime]\nkind = \"minkowski\"\n";
        let (la, lb) = (load_scenario(a, &[]).unwrap(), load_scenario(b, &[]).unwrap());
        assert_eq!(la.hash, lb.hash);
        let lc = load_scenario(a, &["rel_tol=1e-9".to_string()]).unwrap();
        assert_ne!(la.hash, lc.hash);
        assert_eq!(lc.scenario.tolerances.rel_tol, 1e-9);
    }

    #[test]
    fn config_errors_carry_locations() {
        let bad = "[spacetime]\nkind = \"minkowski\"\nc_m_per_s = \"fast\"\n";
        let err = load_scenario(bad, &[]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let typo = "[spacetime]\nkind = \"minkowski\"\n[observer]\nkind = \"inertial\"\ninterval = [0.0, 1.0]\n";
        assert!(load_scenario(typo, &[]).unwrap_err().to_string().contains("interval"));
        let broken = "[spacetime\nkind = 1";
        assert!(load_scenario(broken, &[]).unwrap_err().to_string().contains("line"));
        assert!(load_scenario(PRESETS[0].1, &["nope=1".into()]).is_err());
    }
}
