//! Adaptive Dormand–Prince 5(4) integration with fixed-cadence output.
//!
//! Steps are shortened so that every requested sample time is hit exactly by
//! a step end; samples therefore carry the full fifth-order accuracy of the
//! scheme. The proposed step length is restored after such a truncated step so
//! the controller is not disturbed by the output grid.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{hamiltonian_flat, momentum_flat, vector_field_flat, VortexSystem};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_final: f64,
    pub sample_dt: f64,
    pub max_step: f64,
}

impl IntegratorSettings {
    pub const DEFAULT_TOL: f64 = 1e-12;

    pub fn new(t_final: f64, sample_dt: f64) -> Self {
        Self {
            rel_tol: Self::DEFAULT_TOL,
            abs_tol: Self::DEFAULT_TOL,
            t_final,
            sample_dt,
            max_step: 1.0,
        }
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.t_final.is_finite() && self.sample_dt > 0.0 && self.sample_dt <= self.t_final) {
            return bad("need 0 < sample_dt <= t_final");
        }
        if !(self.max_step > 0.0) {
            return bad("max_step must be positive");
        }
        Ok(())
    }
}

/// Autonomous or time-dependent first-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

// Dormand–Prince 5(4) tableau.
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

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const MAX_STEPS: usize = 50_000_000;

/// Integrates `sys` from `t0` to `t_end`, calling `observe(t, y)` at `t0`,
/// at every positive multiple of `sample_dt` below `t_end`, and at `t_end`.
#[allow(clippy::too_many_arguments)]
pub fn solve<S, F>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    sample_dt: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_step: f64,
    mut observe: F,
) -> Result<StepStats>
where
    S: OdeSystem + ?Sized,
    F: FnMut(f64, &[f64]) -> Result<()>,
{
    let n = sys.dim();
    assert_eq!(y0.len(), n, "state dimension mismatch");
    assert!(t_end > t0 && sample_dt > 0.0);

    let mut stats = StepStats::default();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    sys.rhs(t, &y, &mut k[0]).map_err(|e| e.with_time(t))?;
    stats.evaluations += 1;
    observe(t, &y)?;

    let span = t_end - t0;
    let mut h = initial_step(sys, t, &y, &k[0], rel_tol, abs_tol, &mut stats)?
        .min(max_step)
        .min(span);
    let mut fac_old: f64 = 1e-4;
    let mut next_sample = 1usize;
    let sample_time = |i: usize| (t0 + i as f64 * sample_dt).min(t_end);

    loop {
        if stats.accepted + stats.rejected > MAX_STEPS {
            return Err(Error::StepFailure { time: t, step: h });
        }
        let target = sample_time(next_sample);
        let hit = t + h >= target - 1e-14 * target.abs().max(1.0);
        let h_step = if hit { target - t } else { h };
        let h_min = 16.0 * f64::EPSILON * t.abs().max(span);
        if h_step < h_min && !hit {
            return Err(Error::StepFailure { time: t, step: h_step });
        }

        let err = try_step(sys, t, &y, h_step, &mut k, &mut stage, &mut y_new, rel_tol, abs_tol)
            .map_err(|e| e.with_time(t))?;
        stats.evaluations += 6;

        if err <= 1.0 {
            stats.accepted += 1;
            t = if hit { target } else { t + h_step };
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            let fac = step_factor(err, fac_old);
            fac_old = err.max(1e-4);
            let proposed = (h_step / fac).min(max_step);
            // Keep the controller's step when the output grid truncated it.
            h = if hit { proposed.max(h.min(max_step)) } else { proposed };
            if hit {
                observe(t, &y)?;
                if t >= t_end {
                    return Ok(stats);
                }
                next_sample += 1;
            }
        } else {
            stats.rejected += 1;
            let fac = (err.powf(0.2) / SAFETY).min(1.0 / FAC_MIN);
            h = h_step / fac;
        }
    }
}

fn step_factor(err: f64, fac_old: f64) -> f64 {
    let expo = 0.2 - BETA * 0.75;
    let fac = err.max(1e-300).powf(expo) / fac_old.powf(BETA);
    (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN)
}

#[allow(clippy::too_many_arguments)]
fn try_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64],
    h: f64,
    k: &mut [Vec<f64>; 7],
    stage: &mut [f64],
    y_new: &mut [f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    let n = y.len();
    let [k1, k2, k3, k4, k5, k6, k7] = k;
    for i in 0..n {
        stage[i] = y[i] + h * A21 * k1[i];
    }
    sys.rhs(t + C2 * h, stage, k2)?;
    for i in 0..n {
        stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    sys.rhs(t + C3 * h, stage, k3)?;
    for i in 0..n {
        stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    sys.rhs(t + C4 * h, stage, k4)?;
    for i in 0..n {
        stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    sys.rhs(t + C5 * h, stage, k5)?;
    for i in 0..n {
        stage[i] =
            y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    sys.rhs(t + h, stage, k6)?;
    for i in 0..n {
        y_new[i] =
            y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
    }
    sys.rhs(t + h, y_new, k7)?;

    let mut acc = 0.0;
    for i in 0..n {
        let e = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = abs_tol + rel_tol * y[i].abs().max(y_new[i].abs());
        acc += (e / sc).powi(2);
    }
    Ok((acc / n as f64).sqrt())
}

fn initial_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64],
    f0: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    stats: &mut StepStats,
) -> Result<f64> {
    let n = y.len();
    let norm = |v: &dyn Fn(usize) -> f64| {
        ((0..n)
            .map(|i| {
                let sc = abs_tol + rel_tol * y[i].abs();
                (v(i) / sc).powi(2)
            })
            .sum::<f64>()
            / n as f64)
            .sqrt()
    };
    let d0 = norm(&|i| y[i]);
    let d1 = norm(&|i| f0[i]);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = (0..n).map(|i| y[i] + h0 * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    sys.rhs(t + h0, &y1, &mut f1)?;
    stats.evaluations += 1;
    let d2 = norm(&|i| f1[i] - f0[i]) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1))
}

/// The N-vortex vector field as an ODE on `[v.., u..]`.
pub struct VortexOde<'a> {
    pub system: &'a VortexSystem,
}

impl OdeSystem for VortexOde<'_> {
    fn dim(&self) -> usize {
        2 * self.system.len()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let s = self.system;
        vector_field_flat(&s.params, &s.circulations, y, s.collision_floor, dy)
    }
}

/// Sampled time series with the conserved-quantity diagnostics attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<VortexSystem>,
    pub energy: Vec<f64>,
    pub momentum: Vec<f64>,
    pub energy_drift: Vec<f64>,
    pub momentum_drift: Vec<f64>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &VortexSystem {
        self.states.last().expect("trajectory has at least the initial sample")
    }

    /// Single-sample trajectory holding `sys`.
    pub fn from_initial(sys: &VortexSystem) -> Result<Self> {
        let h = sys.hamiltonian()?;
        let j = sys.momentum();
        Ok(Self {
            times: vec![0.0],
            states: vec![sys.clone()],
            energy: vec![h],
            momentum: vec![j],
            energy_drift: vec![0.0],
            momentum_drift: vec![0.0],
            stats: StepStats::default(),
        })
    }

    /// `(max |δH|, max |δJ|)` over all samples.
    pub fn drift_report(&self) -> (f64, f64) {
        let max_abs = |xs: &[f64]| xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        (max_abs(&self.energy_drift), max_abs(&self.momentum_drift))
    }

    /// CSV with columns `t, v_1..v_N, u_1..u_N, H, J, dH, dJ`; 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.states.first().map_or(0, |s| s.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("v_{i}")));
        header.extend((1..=n).map(|i| format!("u_{i}")));
        header.extend(["H", "J", "dH", "dJ"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let s = &self.states[k];
            let mut row = vec![fmt17(self.times[k])];
            row.extend(s.positions.iter().map(|p| fmt17(p.v)));
            row.extend(s.positions.iter().map(|p| fmt17(p.u)));
            row.extend(
                [self.energy[k], self.momentum[k], self.energy_drift[k], self.momentum_drift[k]]
                    .map(fmt17),
            );
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Seventeen significant digits in scientific notation.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Integrates the N-vortex system over `[0, t_final]`, sampling every
/// `sample_dt` and recording `H`, `J` and their deviations from the start.
pub fn integrate(sys0: &VortexSystem, cfg: &IntegratorSettings) -> Result<Trajectory> {
    cfg.validate()?;
    let p = sys0.params;
    let gammas = &sys0.circulations;
    let floor = sys0.collision_floor;
    let h0 = sys0.hamiltonian().map_err(|e| e.with_time(0.0))?;
    let j0 = sys0.momentum();

    let mut tr = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        energy: Vec::new(),
        momentum: Vec::new(),
        energy_drift: Vec::new(),
        momentum_drift: Vec::new(),
        stats: StepStats::default(),
    };
    let ode = VortexOde { system: sys0 };
    let stats = solve(
        &ode,
        0.0,
        &sys0.state(),
        cfg.t_final,
        cfg.sample_dt,
        cfg.rel_tol,
        cfg.abs_tol,
        cfg.max_step,
        |t, y| {
            let h = hamiltonian_flat(&p, gammas, y, floor).map_err(|e| e.with_time(t))?;
            let j = momentum_flat(&p, gammas, y);
            tr.times.push(t);
            tr.states.push(sys0.with_state(y));
            tr.energy.push(h);
            tr.momentum.push(j);
            tr.energy_drift.push(h - h0);
            tr.momentum_drift.push(j - j0);
            Ok(())
        },
    )?;
    tr.stats = stats;
    Ok(tr)
}

/// State after evolving `sys` for `duration` (which may be zero).
pub fn advance(sys: &VortexSystem, duration: f64, cfg: &IntegratorSettings) -> Result<VortexSystem> {
    if duration == 0.0 {
        return Ok(sys.clone());
    }
    let (start, span) = if duration > 0.0 {
        (sys.clone(), duration)
    } else {
        (sys.time_reversed(), -duration)
    };
    let ode = VortexOde { system: &start };
    let mut last = start.state();
    solve(
        &ode,
        0.0,
        &start.state(),
        span,
        span,
        cfg.rel_tol,
        cfg.abs_tol,
        cfg.max_step,
        |_, y| {
            last.copy_from_slice(y);
            Ok(())
        },
    )?;
    Ok(sys.with_state(&last))
}
