//! Quadrature reduction of the two-vortex problem.
//!
//! With `V = (v₁+v₂)/2`, `Δv = v₁-v₂`, `U = (u₁+u₂)/2`, `Δu = u₁-u₂`, fixing
//! the momentum `J₀` determines `V(Δv)`, and fixing the energy `E` determines
//! `cos Δu = 𝒞(Δv) = cosh(Δv/a) - F_E(Δv)` with
//! `F_E = exp(4πE/Γ₁Γ₂) h(v₁)^{Γ₁/Γ₂} h(v₂)^{Γ₂/Γ₁}`. What remains is the
//! one-dimensional flow
//!
//! ```text
//! dΔv/dt = ε [Γ₂/h²(v₁) + Γ₁/h²(v₂)] √(1 - 𝒞²) / (4πa F_E)
//! ```
//!
//! whose turning points are the ends of the window `|𝒞| ≤ 1`. The mean angle
//! `U` follows by integrating its rate along `Δv(t)`.
//!
//! Times along a swing between turning points `lo` and `hi` are computed in the
//! angle variable `θ` with `Δv = c - r cos θ` (`c`, `r` the window centre and
//! half-width). The inverse-square-root singularities of `dt/dΔv` at both
//! turning points cancel against `dΔv/dθ = r sin θ`, leaving a smooth
//! integrand, and `θ` advances monotonically through turning points so the
//! branch sign flips automatically.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::dynamics::{kernel, DEFAULT_COLLISION_FLOOR};
use crate::error::{Error, Result};
use crate::dynamics::VortexSystem;
use crate::geometry::{CatenoidParams, SurfacePoint};
use crate::numerics::{bisect, cumulative_integral, integrate_adaptive, newton_bracketed};

/// Values of `|𝒞|` up to this far above one are treated as turning points.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

const QUAD_ABS_TOL: f64 = 1e-10;
const QUAD_REL_TOL: f64 = 1e-13;
const V_RESIDUAL_TOL: f64 = 1e-13;
/// Furthest a turning point is searched for, in units of `a`.
const WINDOW_SEARCH_LIMIT: f64 = 60.0;

/// Sign of `sin Δu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    /// `sign(x)` with zero resolved to `Plus`.
    pub fn of(x: f64) -> Self {
        if x < 0.0 {
            Branch::Minus
        } else {
            Branch::Plus
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }
}

/// Mean and relative coordinates of a vortex pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectiveState {
    pub v_mean: f64,
    pub dv: f64,
    pub u_mean: f64,
    pub du: f64,
    pub branch: Branch,
}

impl CollectiveState {
    pub fn from_positions(p1: SurfacePoint, p2: SurfacePoint) -> Self {
        let du = p1.u - p2.u;
        Self {
            v_mean: 0.5 * (p1.v + p2.v),
            dv: p1.v - p2.v,
            u_mean: 0.5 * (p1.u + p2.u),
            du,
            branch: Branch::of(du.sin()),
        }
    }

    pub fn positions(&self) -> (SurfacePoint, SurfacePoint) {
        (
            SurfacePoint::new(self.v_mean + 0.5 * self.dv, self.u_mean + 0.5 * self.du),
            SurfacePoint::new(self.v_mean - 0.5 * self.dv, self.u_mean - 0.5 * self.du),
        )
    }
}

pub fn to_collective(sys: &VortexSystem) -> Result<CollectiveState> {
    if sys.len() != 2 {
        return Err(Error::InvalidParameter(format!(
            "collective coordinates need exactly two vortices, got {}",
            sys.len()
        )));
    }
    Ok(CollectiveState::from_positions(sys.positions[0], sys.positions[1]))
}

pub fn from_collective(
    cs: &CollectiveState,
    circulations: [f64; 2],
    params: CatenoidParams,
) -> Result<VortexSystem> {
    let (p1, p2) = cs.positions();
    VortexSystem::new(params, circulations.to_vec(), vec![p1, p2])
}

/// Conserved values of a same-sign pair and everything derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedConstants {
    pub energy: f64,
    pub momentum: f64,
    pub circulations: [f64; 2],
    pub params: CatenoidParams,
    /// `exp(4πE / Γ₁Γ₂)`; for equal strengths this is `exp(4πE/Γ²)`.
    pub energy_constant: f64,
}

/// Everything the reduction knows at one separation `Δv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedPoint {
    pub dv: f64,
    pub v_mean: f64,
    pub v1: f64,
    pub v2: f64,
    /// `F_E(Δv)`.
    pub energy_factor: f64,
    /// `𝒞(Δv)`, unclamped.
    pub cos_du: f64,
}

impl ReducedConstants {
    pub fn new(
        energy: f64,
        momentum: f64,
        circulations: [f64; 2],
        params: CatenoidParams,
    ) -> Result<Self> {
        let [g1, g2] = circulations;
        if !(g1.is_finite() && g2.is_finite() && g1 != 0.0 && g2 != 0.0) {
            return Err(Error::InvalidParameter("circulations must be finite and nonzero".into()));
        }
        if g1 * g2 < 0.0 {
            return Err(Error::Unsupported(
                "the reduction is implemented for same-sign pairs only".into(),
            ));
        }
        if !(energy.is_finite() && momentum.is_finite()) {
            return Err(Error::InvalidParameter("energy and momentum must be finite".into()));
        }
        let energy_constant = (4.0 * PI * energy / (g1 * g2)).exp();
        Ok(Self {
            energy,
            momentum,
            circulations,
            params,
            energy_constant,
        })
    }

    /// Reads `E` and `J₀` off a two-vortex state.
    pub fn from_system(sys: &VortexSystem) -> Result<Self> {
        if sys.len() != 2 {
            return Err(Error::InvalidParameter("reduction needs exactly two vortices".into()));
        }
        Self::new(
            sys.hamiltonian()?,
            sys.momentum(),
            [sys.circulations[0], sys.circulations[1]],
            sys.params,
        )
    }

    fn orientation(&self) -> f64 {
        self.circulations[0].signum()
    }

    /// `J(V, Δv) = Γ₁ S(V+Δv/2) + Γ₂ S(V-Δv/2)`.
    pub fn momentum_at(&self, v_mean: f64, dv: f64) -> f64 {
        let [g1, g2] = self.circulations;
        g1 * self.params.momentum_density(v_mean + 0.5 * dv)
            + g2 * self.params.momentum_density(v_mean - 0.5 * dv)
    }

    /// Solves `J(V, Δv) = J₀` for the mean latitude `V`.
    pub fn solve_v(&self, dv: f64) -> Result<f64> {
        if !dv.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite separation {dv}")));
        }
        let a = self.params.a();
        let s = self.orientation();
        let [g1, g2] = self.circulations;
        let g_min = g1.abs().min(g2.abs());
        // s·J is increasing in V; scale by s to work with an increasing function.
        let target = s * self.momentum;
        let residual = |v: f64| {
            let value = s * self.momentum_at(v, dv) - target;
            let slope = a
                * (g1.abs() * self.params.conformal_factor(v + 0.5 * dv).powi(2)
                    + g2.abs() * self.params.conformal_factor(v - 0.5 * dv).powi(2));
            Ok((value, slope))
        };
        let reach = self.momentum.abs() / (g_min * a) + dv.abs();
        let (mut lo, mut hi) = (-reach, reach);
        let mut expansions = 0;
        loop {
            let (f_lo, _) = residual(lo)?;
            let (f_hi, _) = residual(hi)?;
            if f_lo <= 0.0 && f_hi >= 0.0 {
                break;
            }
            expansions += 1;
            if expansions > 200 || !(f_lo.is_finite() && f_hi.is_finite()) {
                return Err(Error::NoRoot(format!(
                    "could not bracket V for dv = {dv}, J0 = {}",
                    self.momentum
                )));
            }
            let width = (hi - lo).max(1.0);
            if f_lo > 0.0 {
                lo -= width;
            }
            if f_hi < 0.0 {
                hi += width;
            }
        }
        let tol = V_RESIDUAL_TOL * self.momentum.abs().max(1.0);
        newton_bracketed(residual, lo, hi, tol)
    }

    /// Latitudes, energy factor and `𝒞` at separation `dv`.
    pub fn evaluate(&self, dv: f64) -> Result<ReducedPoint> {
        let v_mean = self.solve_v(dv)?;
        let (v1, v2) = (v_mean + 0.5 * dv, v_mean - 0.5 * dv);
        let [g1, g2] = self.circulations;
        let p = &self.params;
        let energy_factor = if g1 == g2 {
            self.energy_constant * p.conformal_factor(v1) * p.conformal_factor(v2)
        } else {
            self.energy_constant
                * p.conformal_factor(v1).powf(g1 / g2)
                * p.conformal_factor(v2).powf(g2 / g1)
        };
        let cos_du = (dv / p.a()).cosh() - energy_factor;
        Ok(ReducedPoint {
            dv,
            v_mean,
            v1,
            v2,
            energy_factor,
            cos_du,
        })
    }

    /// `𝒞(Δv) = cos Δu`. Overshoots of at most [`CLAMP_TOLERANCE`] past ±1
    /// are clamped; larger ones mean `dv` is outside the allowed window.
    pub fn cos_relative_angle(&self, dv: f64) -> Result<f64> {
        clamp_cos(dv, self.evaluate(dv)?.cos_du)
    }

    /// `[Γ₂/h²(v₁) + Γ₁/h²(v₂)] / (4πa F_E)`: the rate prefactor in front of
    /// `ε √(1 - 𝒞²)`.
    fn rate_prefactor(&self, pt: &ReducedPoint) -> f64 {
        let [g1, g2] = self.circulations;
        let p = &self.params;
        let sum = g2 / p.conformal_factor(pt.v1).powi(2) + g1 / p.conformal_factor(pt.v2).powi(2);
        sum / (4.0 * PI * p.a() * pt.energy_factor)
    }

    /// Reduced relative velocity `dΔv/dt` on branch `eps`.
    pub fn reduced_dv_rate(&self, dv: f64, eps: Branch) -> Result<f64> {
        let pt = self.evaluate(dv)?;
        let c = clamp_cos(dv, pt.cos_du)?;
        Ok(eps.sign() * self.rate_prefactor(&pt) * sine_from_cos(c))
    }

    /// `|dΔv/dt|` at `dv`.
    pub fn speed(&self, dv: f64) -> Result<f64> {
        Ok(self.reduced_dv_rate(dv, Branch::Plus)?.abs())
    }

    /// Mean azimuthal velocity `U̇` at an arbitrary pair configuration with
    /// separations `(dv, du)` and `V` taken from the momentum constraint.
    pub fn drift_rate(&self, dv: f64, du: f64) -> Result<f64> {
        let f = kernel(dv, du, self.params.a());
        if !(f >= DEFAULT_COLLISION_FLOOR) {
            return Err(Error::Collision {
                i: 0,
                j: 1,
                kernel: f,
                time: None,
            });
        }
        let pt = self.evaluate(dv)?;
        Ok(self.mean_azimuthal_rate(&pt, f))
    }

    /// `U̇` on the reduced orbit, where `F = F_E(Δv)`; this depends on `dv`
    /// alone.
    pub fn reduced_drift_rate(&self, dv: f64) -> Result<f64> {
        let pt = self.evaluate(dv)?;
        clamp_cos(dv, pt.cos_du)?;
        Ok(self.mean_azimuthal_rate(&pt, pt.energy_factor))
    }

    fn mean_azimuthal_rate(&self, pt: &ReducedPoint, f: f64) -> f64 {
        let [g1, g2] = self.circulations;
        let a = self.params.a();
        let (x1, x2) = (pt.v1 / a, pt.v2 / a);
        let (h1sq, h2sq) = (x1.cosh().powi(2), x2.cosh().powi(2));
        let interaction = -(pt.dv / a).sinh() / f * (g2 / h1sq - g1 / h2sq);
        let self_terms = g1 * x1.tanh() / h1sq + g2 * x2.tanh() / h2sq;
        (interaction + self_terms) / (8.0 * PI * a * a)
    }

    /// Turning points `(lo, hi)` of the window that contains `dv`.
    pub fn admissible_window(&self, dv: f64) -> Result<(f64, f64)> {
        let c0 = self.cos_relative_angle(dv)?;
        let lo = self.find_turning_point(dv, -1.0)?;
        let hi = self.find_turning_point(dv, 1.0)?;
        if hi - lo <= 0.0 {
            return Err(Error::Unsupported(format!(
                "degenerate window at dv = {dv} (cos du = {c0}); the orbit is an equilibrium"
            )));
        }
        Ok((lo, hi))
    }

    /// `1 - 𝒞²`, unclamped; non-negative exactly on the admissible set.
    fn window_margin(&self, dv: f64) -> Result<f64> {
        let c = self.evaluate(dv)?.cos_du;
        Ok((1.0 - c) * (1.0 + c))
    }

    fn find_turning_point(&self, start: f64, direction: f64) -> Result<f64> {
        let a = self.params.a();
        let margin_at = |x: f64| self.window_margin(x);
        // A start that already sits on the boundary may be the turning point
        // itself in this direction.
        let probe = 1e-7 * a;
        let m0 = margin_at(start)?;
        if m0 <= 0.0 && margin_at(start + direction * probe)? < 0.0 {
            return Ok(start);
        }
        let mut inside = start;
        let mut step = 1e-3 * a;
        loop {
            let next = inside + direction * step;
            if (next - start).abs() > WINDOW_SEARCH_LIMIT * a {
                return Err(Error::NoRoot(format!(
                    "no turning point within {WINDOW_SEARCH_LIMIT} a of dv = {start}"
                )));
            }
            if margin_at(next)? < 0.0 {
                let xtol = 4.0 * f64::EPSILON * next.abs().max(a);
                let (admissible, _) = bisect(margin_at, inside, next, xtol)?;
                return Ok(admissible);
            }
            inside = next;
            step = (step * 1.5).min(0.05 * a);
        }
    }

    /// Signed time to move from `dv0` to `dv1` on branch `eps`. Both ends
    /// must lie in one admissible window; either may be a turning point.
    pub fn quadrature_time(&self, dv0: f64, dv1: f64, eps: Branch) -> Result<f64> {
        if dv0 == dv1 {
            return Ok(0.0);
        }
        let (lo, hi) = self.admissible_window(dv0)?;
        // Turning points found from different starts agree only to rounding.
        let slack = 1e-9 * self.params.a().max(lo.abs()).max(hi.abs());
        if dv1 < lo - slack || dv1 > hi + slack {
            let cos_du = self.evaluate(dv1)?.cos_du;
            return Err(Error::Inadmissible { dv: dv1, cos_du });
        }
        self.cos_relative_angle(dv1)?;
        let dv1 = dv1.clamp(lo, hi);
        let swing = Swing::new(lo, hi);
        let (t0, t1) = (swing.angle_of(dv0), swing.angle_of(dv1));
        let elapsed = swing.elapsed(self, t0, t1)?;
        // dv moves in the direction eps·sign(Γ); travelling against it takes negative time.
        let direction = eps.sign() * self.orientation();
        Ok(direction * (dv1 - dv0).signum() * elapsed.abs())
    }

    /// `U₀ + ∫ U̇(Δv(s)) ds` along a sampled reduced solution.
    pub fn reconstruct_u(&self, times: &[f64], dvs: &[f64], u0: f64) -> Result<Vec<f64>> {
        if times.len() != dvs.len() {
            return Err(Error::InvalidParameter("times and separations differ in length".into()));
        }
        let rates = dvs
            .iter()
            .map(|&dv| self.reduced_drift_rate(dv))
            .collect::<Result<Vec<_>>>()?;
        Ok(cumulative_integral(times, &rates)
            .into_iter()
            .map(|x| u0 + x)
            .collect())
    }
}

fn clamp_cos(dv: f64, c: f64) -> Result<f64> {
    if c.abs() > 1.0 + CLAMP_TOLERANCE || c.is_nan() {
        Err(Error::Inadmissible { dv, cos_du: c })
    } else {
        Ok(c.clamp(-1.0, 1.0))
    }
}

fn sine_from_cos(c: f64) -> f64 {
    ((1.0 - c) * (1.0 + c)).max(0.0).sqrt()
}

/// Angle parametrisation `Δv = centre - radius·cos θ` of one window.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Swing {
    centre: f64,
    radius: f64,
}

impl Swing {
    fn new(lo: f64, hi: f64) -> Self {
        Self {
            centre: 0.5 * (lo + hi),
            radius: 0.5 * (hi - lo),
        }
    }

    fn dv(&self, theta: f64) -> f64 {
        self.centre - self.radius * theta.cos()
    }

    /// Angle in `[0, π]` of a separation inside the window.
    fn angle_of(&self, dv: f64) -> f64 {
        ((self.centre - dv) / self.radius).clamp(-1.0, 1.0).acos()
    }

    /// `dt/dθ = r |sin θ| / |dΔv/dt|`, finite at the turning points.
    fn time_density(&self, rc: &ReducedConstants, theta: f64) -> Result<f64> {
        let mut th = theta;
        let mut nudge = 1e-6;
        // At a turning point both factors vanish; take the limit from inside.
        for _ in 0..12 {
            let dv = self.dv(th);
            let speed = rc.speed(dv)?;
            if speed > 0.0 {
                return Ok(self.radius * th.sin().abs() / speed);
            }
            let inward = if th.rem_euclid(TAU) < PI { 1.0 } else { -1.0 };
            let near_zero = th.rem_euclid(PI) < 0.5 * PI;
            th += if near_zero { inward } else { -inward } * nudge;
            nudge *= 2.0;
        }
        let dv = self.dv(theta);
        Err(Error::Inadmissible { dv, cos_du: rc.evaluate(dv)?.cos_du })
    }

    /// Time elapsed while θ moves from `from` to `to` (signed).
    fn elapsed(&self, rc: &ReducedConstants, from: f64, to: f64) -> Result<f64> {
        integrate_adaptive(|th| self.time_density(rc, th), from, to, QUAD_ABS_TOL, QUAD_REL_TOL)
    }
}

/// Reduced solution of one same-sign pair: the admissible window, its swing
/// time and the phase of the initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedOrbit {
    pub constants: ReducedConstants,
    pub lower_turning_point: f64,
    pub upper_turning_point: f64,
    /// Time to travel between the two turning points.
    pub half_period: f64,
    swing: Swing,
    theta0: f64,
    dv0: f64,
    u0: f64,
    du0: f64,
}

/// One sample of the reduced solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedSample {
    pub t: f64,
    pub dv: f64,
    pub du: f64,
    pub v_mean: f64,
    pub u_mean: f64,
    pub branch: Branch,
}

impl ReducedOrbit {
    pub fn from_system(sys: &VortexSystem) -> Result<Self> {
        let rc = ReducedConstants::from_system(sys)?;
        let cs = to_collective(sys)?;
        Self::new(rc, &cs)
    }

    pub fn new(constants: ReducedConstants, initial: &CollectiveState) -> Result<Self> {
        let (lo, hi) = constants.admissible_window(initial.dv)?;
        let swing = Swing::new(lo, hi);
        let half_period = swing.elapsed(&constants, 0.0, PI)?;
        // θ advances with time; dΔv/dt has the sign of sin θ, which equals
        // eps·sign(Γ).
        let base = swing.angle_of(initial.dv);
        let moving_up = initial.branch.sign() * constants.orientation() > 0.0;
        let theta0 = if moving_up { base } else { -base };
        Ok(Self {
            constants,
            lower_turning_point: lo,
            upper_turning_point: hi,
            half_period,
            swing,
            theta0,
            dv0: initial.dv,
            u0: initial.u_mean,
            du0: initial.du,
        })
    }

    pub fn period(&self) -> f64 {
        2.0 * self.half_period
    }

    /// Angle reached a time `dt ≥ 0` after the angle `from`.
    fn advance_angle(&self, from: f64, dt: f64) -> Result<f64> {
        // Whole periods first: θ ↦ θ + 2π takes exactly one period.
        let turns = (dt / self.period()).floor();
        let from = from + turns * TAU;
        let target = dt - turns * self.period();
        if target <= 0.0 {
            return Ok(from);
        }
        let elapsed = |th: f64| self.swing.elapsed(&self.constants, from, th);
        // dt/dθ is bounded away from zero, so a bracket sized from the local
        // density grows to cover the target in a few doublings.
        let density = self.swing.time_density(&self.constants, from)?;
        let mut width = (1.5 * target / density).min(PI);
        while elapsed(from + width)? < target {
            width *= 2.0;
        }
        let hi = from + width;
        let tol = 1e-13 * target.max(1.0);
        newton_bracketed(
            |th| Ok((elapsed(th)? - target, self.swing.time_density(&self.constants, th)?)),
            from,
            hi,
            tol,
        )
    }

    fn branch_at(&self, theta: f64) -> Branch {
        // dΔv/dt ∝ sin θ; at an exact turning point use the direction θ is heading.
        let upward = theta.rem_euclid(TAU) < PI;
        let eps = if upward { 1.0 } else { -1.0 } * self.constants.orientation();
        Branch::of(eps)
    }

    /// Reduced solution at the requested (increasing, non-negative) times.
    /// `Δu` is rebuilt from `arccos 𝒞` on the tracked branch and unwrapped
    /// continuously from its initial value; `U` is integrated from the
    /// reduced drift rate.
    pub fn sample(&self, times: &[f64]) -> Result<Vec<ReducedSample>> {
        let mut thetas = Vec::with_capacity(times.len());
        let (mut theta, mut t_prev) = (self.theta0, 0.0);
        for &t in times {
            if !(t >= t_prev) {
                return Err(Error::InvalidParameter("sample times must be increasing and >= 0".into()));
            }
            theta = self.advance_angle(theta, t - t_prev)?;
            t_prev = t;
            thetas.push(theta);
        }
        let dvs: Vec<f64> = thetas
            .iter()
            .zip(times)
            .map(|(&th, &t)| if t == 0.0 { self.dv0 } else { self.swing.dv(th) })
            .collect();
        let us = self.constants.reconstruct_u(times, &dvs, self.u0)?;

        let mut out = Vec::with_capacity(times.len());
        let mut prev_du = self.du0;
        for (k, (&th, &dv)) in thetas.iter().zip(&dvs).enumerate() {
            let pt = self.constants.evaluate(dv)?;
            let branch = self.branch_at(th);
            let principal = branch.sign() * clamp_cos(dv, pt.cos_du)?.acos();
            let du = principal + TAU * ((prev_du - principal) / TAU).round();
            prev_du = du;
            out.push(ReducedSample {
                t: times[k],
                dv,
                du,
                v_mean: pt.v_mean,
                u_mean: us[k],
                branch,
            });
        }
        Ok(out)
    }
}

/// Reduced-trajectory CSV: `t, dv, du, V, U_reconstructed, eps`.
pub fn write_reduced_csv<W: std::io::Write>(samples: &[ReducedSample], mut w: W) -> Result<()> {
    use crate::integrator::fmt17;
    writeln!(w, "t,dv,du,V,U_reconstructed,eps")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt17(s.t),
            fmt17(s.dv),
            fmt17(s.du),
            fmt17(s.v_mean),
            fmt17(s.u_mean),
            s.branch.sign() as i32
        )?;
    }
    Ok(())
}
