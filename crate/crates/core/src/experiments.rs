//! Scenario runners: configuration, diagnostics, fits and output files.

use std::collections::BTreeMap;
use std::f64::consts::{E, PI};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::VortexSystem;
use crate::error::{Error, Result};
use crate::exact::{omega_from_curvature, omega_symmetric, seed_unstable, stability, v_star, SymmetricOrbit};
use crate::geometry::{CatenoidParams, SurfacePoint};
use crate::integrator::{advance, fmt17, integrate, IntegratorSettings, StepStats, Trajectory};
use crate::numerics::{bisect, linear_fit};
use crate::reduction::{
    to_collective, write_reduced_csv, Branch, ReducedConstants, ReducedOrbit, ReducedSample,
};

/// Seed used for the cluster scenario when none is configured.
pub const DEFAULT_CLUSTER_SEED: u64 = 20_240_607;
/// Attempts at drawing a collision-free cluster before giving up.
pub const MAX_CLUSTER_DRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Rigid,
    Instability,
    GenericPair,
    ReducedCompare,
    Cluster,
    OmegaProfile,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Rigid,
        Scenario::Instability,
        Scenario::GenericPair,
        Scenario::ReducedCompare,
        Scenario::Cluster,
        Scenario::OmegaProfile,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Rigid => "rigid",
            Scenario::Instability => "instability",
            Scenario::GenericPair => "generic_pair",
            Scenario::ReducedCompare => "reduced_compare",
            Scenario::Cluster => "cluster",
            Scenario::OmegaProfile => "omega_profile",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "rigid" => Scenario::Rigid,
            "instability" => Scenario::Instability,
            "generic_pair" | "pair" => Scenario::GenericPair,
            "reduced_compare" | "reduce" => Scenario::ReducedCompare,
            "cluster" => Scenario::Cluster,
            "omega_profile" | "profile" => Scenario::OmegaProfile,
            other => return Err(Error::Config(format!("unknown scenario '{other}'"))),
        })
    }
}

/// Random cluster layout: `n` vortices uniform on a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSetup {
    pub n: usize,
    pub centre_u: f64,
    pub centre_v: f64,
    pub spread_u: f64,
    pub spread_v: f64,
}

impl Default for ClusterSetup {
    fn default() -> Self {
        Self {
            n: 10,
            centre_u: 0.0,
            centre_v: 0.7,
            spread_u: 0.12,
            spread_v: 0.12,
        }
    }
}

/// Grid `V = k·step`, `|V| ≤ v_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileGrid {
    pub v_max: f64,
    pub step: f64,
}

impl Default for ProfileGrid {
    fn default() -> Self {
        Self { v_max: 3.0, step: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub params: CatenoidParams,
    /// Circulation of every vortex.
    pub gamma: f64,
    /// Latitude of the antipodal pair (rigid, instability).
    pub v0: f64,
    /// Seed amplitude (instability).
    pub eta0: f64,
    /// Two-vortex initial positions (generic pair, reduced comparison).
    pub pair: [SurfacePoint; 2],
    pub cluster: ClusterSetup,
    pub profile: ProfileGrid,
    /// `None` picks the scenario default.
    pub t_final: Option<f64>,
    pub sample_dt: Option<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Length of the run used to measure the oscillation period.
    pub period_run: f64,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            params: CatenoidParams::unit(),
            gamma: 1.0,
            v0: 0.5,
            eta0: 1e-6,
            pair: [SurfacePoint::new(0.0, 0.0), SurfacePoint::new(PI / 4.0, PI / 3.0)],
            cluster: ClusterSetup::default(),
            profile: ProfileGrid::default(),
            t_final: None,
            sample_dt: None,
            rel_tol: IntegratorSettings::DEFAULT_TOL,
            abs_tol: IntegratorSettings::DEFAULT_TOL,
            max_step: 1.0,
            period_run: 100.0,
            seed: (scenario == Scenario::Cluster).then_some(DEFAULT_CLUSTER_SEED),
            output_dir: None,
        }
    }

    /// Reads a `key = value` file. A `scenario` key, if present, must agree
    /// with `expected` when that is given.
    pub fn from_text(text: &str, expected: Option<Scenario>) -> Result<Self> {
        let entries = parse_key_values(text)?;
        let named = entries.get("scenario").map(|s| s.parse::<Scenario>()).transpose()?;
        let scenario = match (named, expected) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!("config is for scenario '{a}', not '{b}'")))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::Config("missing 'scenario' key".into())),
        };
        let mut cfg = Self::new(scenario);
        for (key, value) in &entries {
            if key != "scenario" {
                cfg.set(key, value)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, expected: Option<Scenario>) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text, expected)
    }

    /// Sets one configuration key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let real = || parse_value::<f64>(key, value);
        match key {
            "a" => self.params = CatenoidParams::new(real()?)?,
            "gamma" => self.gamma = real()?,
            "v0" => self.v0 = real()?,
            "eta0" => self.eta0 = real()?,
            "v1" => self.pair[0].v = real()?,
            "u1" => self.pair[0].u = real()?,
            "v2" => self.pair[1].v = real()?,
            "u2" => self.pair[1].u = real()?,
            "n" => self.cluster.n = parse_value(key, value)?,
            "centre_u" => self.cluster.centre_u = real()?,
            "centre_v" => self.cluster.centre_v = real()?,
            "spread_u" => self.cluster.spread_u = real()?,
            "spread_v" => self.cluster.spread_v = real()?,
            "v_max" => self.profile.v_max = real()?,
            "v_step" => self.profile.step = real()?,
            "t_final" => self.t_final = Some(real()?),
            "sample_dt" => self.sample_dt = Some(real()?),
            "rtol" => self.rel_tol = real()?,
            "atol" => self.abs_tol = real()?,
            "max_step" => self.max_step = real()?,
            "period_run" => self.period_run = real()?,
            "seed" => self.seed = Some(parse_value(key, value)?),
            "output_dir" | "out" => self.output_dir = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match (self.scenario, self.seed) {
            (Scenario::Cluster, None) => return bad("the cluster scenario needs a seed".into()),
            (s, Some(_)) if s != Scenario::Cluster => {
                return bad(format!("'seed' applies only to the cluster scenario, not '{s}'"))
            }
            _ => {}
        }
        if !(self.gamma.is_finite() && self.gamma != 0.0) {
            return bad("gamma must be finite and nonzero".into());
        }
        if self.scenario == Scenario::Cluster {
            let c = &self.cluster;
            if c.n < 2 || !(c.spread_u > 0.0 && c.spread_v > 0.0) {
                return bad("cluster needs n >= 2 and positive spreads".into());
            }
        }
        if self.scenario == Scenario::OmegaProfile
            && !(self.profile.step > 0.0 && self.profile.v_max >= 0.0)
        {
            return bad("profile grid needs v_step > 0 and v_max >= 0".into());
        }
        if self.scenario == Scenario::ReducedCompare && !(self.period_run > 0.0) {
            return bad("period_run must be positive".into());
        }
        if let Some(t) = self.t_final {
            if !(t > 0.0 && t.is_finite()) {
                return bad("t_final must be positive".into());
            }
        }
        Ok(())
    }

    /// Run length, resolving the scenario default.
    pub fn resolved_t_final(&self) -> f64 {
        if let Some(t) = self.t_final {
            return t;
        }
        match self.scenario {
            Scenario::Rigid => 50.0,
            Scenario::Instability => {
                let lambda = stability(self.v0, self.gamma, &self.params).lambda;
                if lambda > 0.0 {
                    6.0 / lambda
                } else {
                    50.0
                }
            }
            Scenario::GenericPair | Scenario::ReducedCompare => 40.0,
            Scenario::Cluster => 60.0,
            Scenario::OmegaProfile => 0.0,
        }
    }

    pub fn resolved_sample_dt(&self) -> f64 {
        if let Some(dt) = self.sample_dt {
            return dt;
        }
        match self.scenario {
            Scenario::Rigid => 0.05,
            Scenario::Instability => self.resolved_t_final() / 3000.0,
            Scenario::GenericPair | Scenario::ReducedCompare => 0.01,
            Scenario::Cluster => 0.1,
            Scenario::OmegaProfile => 1.0,
        }
    }

    pub fn integrator(&self) -> IntegratorSettings {
        IntegratorSettings {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            t_final: self.resolved_t_final(),
            sample_dt: self.resolved_sample_dt(),
            max_step: self.max_step,
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::Config(format!("line {}: empty key or value", lineno + 1)));
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
    }
    Ok(out)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{value}' for '{key}'")))
}

/// Least-squares line over the samples in `window`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

impl FitResult {
    pub fn fit(ts: &[f64], ys: &[f64]) -> Result<Self> {
        let (slope, intercept, rms_residual) = linear_fit(ts, ys).ok_or(Error::WindowEmpty)?;
        Ok(Self {
            slope,
            intercept,
            rms_residual,
            window: (ts[0], ts[ts.len() - 1]),
            samples: ts.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSummary {
    pub max_energy_drift: f64,
    pub max_momentum_drift: f64,
    pub steps: StepStats,
}

impl DriftSummary {
    fn of(tr: &Trajectory) -> Self {
        let (max_energy_drift, max_momentum_drift) = tr.drift_report();
        Self {
            max_energy_drift,
            max_momentum_drift,
            steps: tr.stats,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RigidReport {
    pub omega: f64,
    pub omega_fit: f64,
    pub omega_rel_error: f64,
    pub max_dv_deviation: f64,
    pub max_du_deviation: f64,
    /// `max |u₁(t) - u₁(0) - Ω t|`.
    pub max_phase_deviation: f64,
    /// `max |v₁(t) - V₀|`.
    pub max_latitude_deviation: f64,
    pub drift: DriftSummary,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

pub fn run_rigid(cfg: &ScenarioConfig) -> Result<RigidReport> {
    let orbit = SymmetricOrbit::new(cfg.v0, cfg.gamma, cfg.params);
    let tr = integrate(&orbit.system(0.0)?, &cfg.integrator())?;
    let omega = orbit.omega;
    let (mut dv_dev, mut du_dev, mut phase_dev, mut lat_dev) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut u1 = Vec::with_capacity(tr.len());
    for (t, s) in tr.times.iter().zip(&tr.states) {
        let (p1, p2) = (s.positions[0], s.positions[1]);
        dv_dev = dv_dev.max((p1.v - p2.v).abs());
        du_dev = du_dev.max((p1.u - p2.u - PI).abs());
        phase_dev = phase_dev.max((p1.u - omega * t).abs());
        lat_dev = lat_dev.max((p1.v - cfg.v0).abs());
        u1.push(p1.u);
    }
    let omega_fit = FitResult::fit(&tr.times, &u1)?.slope;
    let omega_rel_error = if omega != 0.0 {
        ((omega_fit - omega) / omega).abs()
    } else {
        omega_fit.abs()
    };
    Ok(RigidReport {
        omega,
        omega_fit,
        omega_rel_error,
        max_dv_deviation: dv_dev,
        max_du_deviation: du_dev,
        max_phase_deviation: phase_dev,
        max_latitude_deviation: lat_dev,
        drift: DriftSummary::of(&tr),
        trajectory: tr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstabilityReport {
    pub lambda: f64,
    pub fit: FitResult,
    pub lambda_fit: f64,
    pub lambda_rel_error: f64,
    /// `max |η/η_lin - 1|` inside the fit window, `η_lin = η₀ e^{λt}`.
    pub max_linear_deviation: f64,
    pub drift: DriftSummary,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

/// Indices of the first contiguous run of samples with
/// `|η| ∈ [e·|η₀|, e³·|η₀|]`.
pub fn growth_window(etas: &[f64], eta0: f64) -> Result<std::ops::Range<usize>> {
    let (lo, hi) = (E * eta0.abs(), E.powi(3) * eta0.abs());
    let start = etas.iter().position(|x| x.abs() >= lo).ok_or(Error::WindowEmpty)?;
    let len = etas[start..]
        .iter()
        .take_while(|x| (lo..=hi).contains(&x.abs()))
        .count();
    if len < 2 {
        return Err(Error::WindowEmpty);
    }
    Ok(start..start + len)
}

pub fn run_instability(cfg: &ScenarioConfig) -> Result<InstabilityReport> {
    let sys = seed_unstable(cfg.v0, cfg.eta0, cfg.gamma, &cfg.params)?;
    let tr = integrate(&sys, &cfg.integrator())?;
    let lambda = stability(cfg.v0, cfg.gamma, &cfg.params).lambda;
    let etas: Vec<f64> = tr
        .states
        .iter()
        .map(|s| s.positions[0].v - s.positions[1].v)
        .collect();
    let window = growth_window(&etas, cfg.eta0)?;
    let ts = &tr.times[window.clone()];
    let logs: Vec<f64> = etas[window.clone()].iter().map(|x| x.abs().ln()).collect();
    let fit = FitResult::fit(ts, &logs)?;
    let max_linear_deviation = ts
        .iter()
        .zip(&etas[window])
        .map(|(t, eta)| (eta / (cfg.eta0 * (lambda * t).exp()) - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(InstabilityReport {
        lambda,
        lambda_fit: fit.slope,
        lambda_rel_error: ((fit.slope - lambda) / lambda).abs(),
        fit,
        max_linear_deviation,
        drift: DriftSummary::of(&tr),
        trajectory: tr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub chord_min: f64,
    pub chord_max: f64,
    /// Line fitted to the mean azimuth `U(t)`.
    pub mean_azimuth_fit: FitResult,
    pub drift: DriftSummary,
    #[serde(skip)]
    pub chord: Vec<f64>,
    #[serde(skip)]
    pub mean_azimuth: Vec<f64>,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

fn pair_system(cfg: &ScenarioConfig) -> Result<VortexSystem> {
    VortexSystem::new(cfg.params, vec![cfg.gamma; 2], cfg.pair.to_vec())
}

pub fn run_generic_pair(cfg: &ScenarioConfig) -> Result<PairReport> {
    let tr = integrate(&pair_system(cfg)?, &cfg.integrator())?;
    let chord: Vec<f64> = tr
        .states
        .iter()
        .map(|s| cfg.params.chord_distance(s.positions[0], s.positions[1]))
        .collect();
    let mean_azimuth: Vec<f64> = tr
        .states
        .iter()
        .map(|s| 0.5 * (s.positions[0].u + s.positions[1].u))
        .collect();
    Ok(PairReport {
        chord_min: chord.iter().copied().fold(f64::INFINITY, f64::min),
        chord_max: chord.iter().copied().fold(0.0, f64::max),
        mean_azimuth_fit: FitResult::fit(&tr.times, &mean_azimuth)?,
        drift: DriftSummary::of(&tr),
        chord,
        mean_azimuth,
        trajectory: tr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReduceReport {
    pub energy: f64,
    pub momentum: f64,
    pub turning_points: (f64, f64),
    pub half_period: f64,
    pub quadrature_period: f64,
    pub measured_period: f64,
    pub period_rel_error: f64,
    /// Branch flips of the full integration over the period run.
    pub flip_times: Vec<f64>,
    /// `sup |dΔv/dt (full) - reduced rate at (Δv, sign sin Δu)|`.
    pub max_rate_mismatch: f64,
    /// `sup |U (full) - U (reduced)|`.
    pub max_mean_azimuth_mismatch: f64,
    /// `sup |Δv (full) - Δv (reduced)|`.
    pub max_dv_mismatch: f64,
    /// `sup |𝒞(Δv) - cos Δu|` along the full run.
    pub max_identity_mismatch: f64,
    /// `sup max(0, |𝒞(Δv)| - 1)` along the full run.
    pub max_window_violation: f64,
    pub branch_flips_full: usize,
    pub branch_flips_reduced: usize,
    pub drift: DriftSummary,
    #[serde(skip)]
    pub reduced: Vec<ReducedSample>,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

/// Time at which `sin Δu` changes sign between `s0` (at `t0`) and a point
/// `dt` later, refined by re-integrating from `s0`.
fn refine_flip(s0: &VortexSystem, t0: f64, dt: f64, settings: &IntegratorSettings) -> Result<f64> {
    let g = |tau: f64| -> Result<f64> {
        let s = advance(s0, tau, settings)?;
        Ok((s.positions[0].u - s.positions[1].u).sin())
    };
    let (a, b) = bisect(g, 0.0, dt, 1e-13 * dt.max(1.0))?;
    Ok(t0 + 0.5 * (a + b))
}

/// Sign changes of `sin Δu` along a full two-vortex run, located to
/// integration accuracy.
pub fn branch_flip_times(tr: &Trajectory, settings: &IntegratorSettings) -> Result<Vec<f64>> {
    let mut flips = Vec::new();
    for k in 1..tr.len() {
        let prev = to_collective(&tr.states[k - 1])?;
        let next = to_collective(&tr.states[k])?;
        if prev.branch != next.branch {
            let dt = tr.times[k] - tr.times[k - 1];
            flips.push(refine_flip(&tr.states[k - 1], tr.times[k - 1], dt, settings)?);
        }
    }
    Ok(flips)
}

/// Full period from flip times: successive flips alternate between the two
/// turning points, so flips two apart are one period apart.
pub fn period_from_flips(flips: &[f64]) -> Result<f64> {
    if flips.len() < 3 {
        return Err(Error::NoRoot(format!(
            "need three turning points to measure a period, found {}",
            flips.len()
        )));
    }
    let spans: Vec<f64> = flips.windows(3).map(|w| w[2] - w[0]).collect();
    Ok(spans.iter().sum::<f64>() / spans.len() as f64)
}

pub fn run_reduced_compare(cfg: &ScenarioConfig) -> Result<ReduceReport> {
    let sys = pair_system(cfg)?;
    let settings = cfg.integrator();
    let tr = integrate(&sys, &settings)?;
    let rc = ReducedConstants::from_system(&sys)?;
    let orbit = ReducedOrbit::from_system(&sys)?;
    let reduced = orbit.sample(&tr.times)?;

    let mut rate_mismatch = 0.0f64;
    let mut u_mismatch = 0.0f64;
    let mut dv_mismatch = 0.0f64;
    let mut identity = 0.0f64;
    let mut violation = 0.0f64;
    let (mut flips_full, mut flips_reduced) = (0, 0);
    let mut prev: Option<(Branch, Branch)> = None;
    for (s, r) in tr.states.iter().zip(&reduced) {
        let cs = to_collective(s)?;
        let vf = s.vector_field()?;
        let full_rate = vf.dv[0] - vf.dv[1];
        rate_mismatch = rate_mismatch.max((full_rate - rc.reduced_dv_rate(cs.dv, cs.branch)?).abs());
        u_mismatch = u_mismatch.max((cs.u_mean - r.u_mean).abs());
        dv_mismatch = dv_mismatch.max((cs.dv - r.dv).abs());
        let c = rc.evaluate(cs.dv)?.cos_du;
        identity = identity.max((c - cs.du.cos()).abs());
        violation = violation.max(c.abs() - 1.0);
        if let Some((pf, pr)) = prev {
            flips_full += usize::from(pf != cs.branch);
            flips_reduced += usize::from(pr != r.branch);
        }
        prev = Some((cs.branch, r.branch));
    }

    let long = IntegratorSettings {
        t_final: cfg.period_run,
        sample_dt: settings.sample_dt.min(cfg.period_run),
        ..settings
    };
    let flip_times = branch_flip_times(&integrate(&sys, &long)?, &settings)?;
    let measured_period = period_from_flips(&flip_times)?;
    let quadrature_period = 2.0
        * rc.quadrature_time(orbit.lower_turning_point, orbit.upper_turning_point, Branch::of(cfg.gamma))?;

    Ok(ReduceReport {
        energy: rc.energy,
        momentum: rc.momentum,
        turning_points: (orbit.lower_turning_point, orbit.upper_turning_point),
        half_period: orbit.half_period,
        quadrature_period,
        measured_period,
        period_rel_error: ((quadrature_period - measured_period) / measured_period).abs(),
        flip_times,
        max_rate_mismatch: rate_mismatch,
        max_mean_azimuth_mismatch: u_mismatch,
        max_dv_mismatch: dv_mismatch,
        max_identity_mismatch: identity,
        max_window_violation: violation.max(0.0),
        branch_flips_full: flips_full,
        branch_flips_reduced: flips_reduced,
        drift: DriftSummary::of(&tr),
        reduced,
        trajectory: tr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterDiagnostics {
    pub times: Vec<f64>,
    pub uc_series: Vec<f64>,
    pub vc_series: Vec<f64>,
    pub mean_chord_series: Vec<f64>,
    pub omega_eff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterReport {
    pub seed: u64,
    /// Draws needed to obtain a collision-free layout.
    pub draws: usize,
    pub omega_eff: f64,
    pub fit: FitResult,
    pub uc_excursion: f64,
    /// Fit residual as a fraction of the `Uc` excursion.
    pub residual_fraction: f64,
    pub max_vc_drift: f64,
    pub initial_mean_chord: f64,
    pub max_mean_chord: f64,
    /// Rigid-pair rate at the cluster's initial mean latitude.
    pub omega_symmetric_at_centre: f64,
    pub drift: DriftSummary,
    #[serde(skip)]
    pub diagnostics: ClusterDiagnostics,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

/// Uniform layout on `[Uc ± εu] × [Vc ± εv]`, redrawn on near-collision.
pub fn draw_cluster(cfg: &ScenarioConfig, seed: u64) -> Result<(VortexSystem, usize)> {
    let c = &cfg.cluster;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = None;
    for attempt in 1..=MAX_CLUSTER_DRAWS {
        let positions = (0..c.n)
            .map(|_| {
                let u = rng.gen_range(c.centre_u - c.spread_u..=c.centre_u + c.spread_u);
                let v = rng.gen_range(c.centre_v - c.spread_v..=c.centre_v + c.spread_v);
                SurfacePoint::new(v, u)
            })
            .collect();
        match VortexSystem::new(cfg.params, vec![cfg.gamma; c.n], positions) {
            Ok(sys) => return Ok((sys, attempt)),
            Err(e @ Error::Collision { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one draw was attempted"))
}

fn mean_chord(sys: &VortexSystem) -> f64 {
    let n = sys.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += sys.params.chord_distance(sys.positions[i], sys.positions[j]);
        }
    }
    total / (n * (n - 1) / 2) as f64
}

pub fn run_cluster(cfg: &ScenarioConfig) -> Result<ClusterReport> {
    let seed = cfg
        .seed
        .ok_or_else(|| Error::Config("the cluster scenario needs a seed".into()))?;
    let (sys, draws) = draw_cluster(cfg, seed)?;
    let tr = integrate(&sys, &cfg.integrator())?;
    let n = sys.len() as f64;
    let uc: Vec<f64> = tr
        .states
        .iter()
        .map(|s| s.positions.iter().map(|p| p.u).sum::<f64>() / n)
        .collect();
    let vc: Vec<f64> = tr
        .states
        .iter()
        .map(|s| s.positions.iter().map(|p| p.v).sum::<f64>() / n)
        .collect();
    let chords: Vec<f64> = tr.states.iter().map(mean_chord).collect();
    let fit = FitResult::fit(&tr.times, &uc)?;
    let (lo, hi) = uc
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    let uc_excursion = hi - lo;
    let residual_fraction = if uc_excursion > 0.0 {
        fit.rms_residual / uc_excursion
    } else {
        0.0
    };
    Ok(ClusterReport {
        seed,
        draws,
        omega_eff: fit.slope,
        fit,
        uc_excursion,
        residual_fraction,
        max_vc_drift: vc.iter().map(|x| (x - vc[0]).abs()).fold(0.0, f64::max),
        initial_mean_chord: chords[0],
        max_mean_chord: chords.iter().copied().fold(0.0, f64::max),
        omega_symmetric_at_centre: omega_symmetric(vc[0], cfg.gamma, &cfg.params),
        drift: DriftSummary::of(&tr),
        diagnostics: ClusterDiagnostics {
            times: tr.times.clone(),
            uc_series: uc,
            vc_series: vc,
            mean_chord_series: chords,
            omega_eff: fit.slope,
        },
        trajectory: tr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileRow {
    pub v: f64,
    pub omega: f64,
    pub omega_from_curvature: f64,
    pub curvature: f64,
    pub curvature_gradient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileReport {
    pub rows: usize,
    pub argmax_v: f64,
    pub v_star: f64,
    pub argmax_deviation: f64,
    pub omega_at_zero: Option<f64>,
    /// Largest relative disagreement of the two rate formulas on the grid.
    pub max_identity_rel_error: f64,
    #[serde(skip)]
    pub table: Vec<ProfileRow>,
}

pub fn run_omega_profile(cfg: &ScenarioConfig) -> Result<ProfileReport> {
    let grid = cfg.profile;
    let p = &cfg.params;
    let m = (grid.v_max / grid.step).round() as i64;
    let table: Vec<ProfileRow> = (-m..=m)
        .map(|k| {
            let v = k as f64 * grid.step;
            ProfileRow {
                v,
                omega: omega_symmetric(v, cfg.gamma, p),
                omega_from_curvature: omega_from_curvature(v, cfg.gamma, p),
                curvature: p.gaussian_curvature(v),
                curvature_gradient: p.curvature_gradient(v),
            }
        })
        .collect();
    let best = table
        .iter()
        .max_by(|x, y| (cfg.gamma.signum() * x.omega).total_cmp(&(cfg.gamma.signum() * y.omega)))
        .expect("grid has at least one row");
    let max_identity_rel_error = table
        .iter()
        .map(|r| {
            if r.omega == 0.0 {
                r.omega_from_curvature.abs()
            } else {
                ((r.omega_from_curvature - r.omega) / r.omega).abs()
            }
        })
        .fold(0.0, f64::max);
    let vs = v_star(p);
    Ok(ProfileReport {
        rows: table.len(),
        argmax_v: best.v,
        v_star: vs,
        argmax_deviation: (best.v - vs).abs(),
        omega_at_zero: table.iter().find(|r| r.v == 0.0).map(|r| r.omega),
        max_identity_rel_error,
        table,
    })
}

/// Summary written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: Scenario,
    pub config: ScenarioConfig,
    pub wall_time_s: f64,
    pub max_energy_drift: Option<f64>,
    pub max_momentum_drift: Option<f64>,
    pub report: serde_json::Value,
    pub outputs: Vec<String>,
}

fn create(dir: &Path, name: &str, outputs: &mut Vec<String>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    outputs.push(path.display().to_string());
    Ok(BufWriter::new(File::create(path)?))
}

fn write_columns(w: &mut impl Write, header: &str, columns: &[&[f64]]) -> Result<()> {
    writeln!(w, "{header}")?;
    let rows = columns.first().map_or(0, |c| c.len());
    for k in 0..rows {
        let row: Vec<String> = columns.iter().map(|c| fmt17(c[k])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

fn to_json<T: Serialize>(x: &T) -> Result<serde_json::Value> {
    serde_json::to_value(x).map_err(|e| Error::Io(e.to_string()))
}

/// Runs the configured scenario, writes its files when an output directory
/// is set, and returns the summary.
pub fn execute(cfg: &ScenarioConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let start = Instant::now();
    let dir = cfg.output_dir.as_deref();
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
    }
    let mut outputs = Vec::new();
    let (report, drift) = match cfg.scenario {
        Scenario::Rigid => {
            let r = run_rigid(cfg)?;
            if let Some(d) = dir {
                r.trajectory.write_csv(create(d, "trajectory.csv", &mut outputs)?)?;
            }
            (to_json(&r)?, Some(r.drift))
        }
        Scenario::Instability => {
            let r = run_instability(cfg)?;
            if let Some(d) = dir {
                r.trajectory.write_csv(create(d, "trajectory.csv", &mut outputs)?)?;
            }
            (to_json(&r)?, Some(r.drift))
        }
        Scenario::GenericPair => {
            let r = run_generic_pair(cfg)?;
            if let Some(d) = dir {
                r.trajectory.write_csv(create(d, "trajectory.csv", &mut outputs)?)?;
                let mut w = create(d, "pair_diagnostics.csv", &mut outputs)?;
                let tr = &r.trajectory;
                write_columns(
                    &mut w,
                    "t,chord,U,dH,dJ",
                    &[&tr.times, &r.chord, &r.mean_azimuth, &tr.energy_drift, &tr.momentum_drift],
                )?;
            }
            (to_json(&r)?, Some(r.drift))
        }
        Scenario::ReducedCompare => {
            let r = run_reduced_compare(cfg)?;
            if let Some(d) = dir {
                r.trajectory.write_csv(create(d, "trajectory.csv", &mut outputs)?)?;
                write_reduced_csv(&r.reduced, create(d, "reduced.csv", &mut outputs)?)?;
            }
            (to_json(&r)?, Some(r.drift))
        }
        Scenario::Cluster => {
            let r = run_cluster(cfg)?;
            if let Some(d) = dir {
                r.trajectory.write_csv(create(d, "trajectory.csv", &mut outputs)?)?;
                let c = &r.diagnostics;
                let mut w = create(d, "cluster.csv", &mut outputs)?;
                write_columns(
                    &mut w,
                    "t,Uc,Vc,mean_chord",
                    &[&c.times, &c.uc_series, &c.vc_series, &c.mean_chord_series],
                )?;
            }
            (to_json(&r)?, Some(r.drift))
        }
        Scenario::OmegaProfile => {
            let r = run_omega_profile(cfg)?;
            if let Some(d) = dir {
                let mut w = create(d, "profile.csv", &mut outputs)?;
                writeln!(w, "V,Omega,Omega_curvature,K,K_prime")?;
                for row in &r.table {
                    writeln!(
                        w,
                        "{},{},{},{},{}",
                        fmt17(row.v),
                        fmt17(row.omega),
                        fmt17(row.omega_from_curvature),
                        fmt17(row.curvature),
                        fmt17(row.curvature_gradient)
                    )?;
                }
            }
            (to_json(&r)?, None)
        }
    };
    let mut summary = RunSummary {
        scenario: cfg.scenario,
        config: cfg.clone(),
        wall_time_s: 0.0,
        max_energy_drift: drift.map(|d| d.max_energy_drift),
        max_momentum_drift: drift.map(|d| d.max_momentum_drift),
        report,
        outputs,
    };
    if let Some(d) = dir {
        summary.outputs.push(d.join("summary.json").display().to_string());
        summary.wall_time_s = start.elapsed().as_secs_f64();
        let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(d.join("summary.json"), text + "\n")?;
    } else {
        summary.wall_time_s = start.elapsed().as_secs_f64();
    }
    Ok(summary)
}
