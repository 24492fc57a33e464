//! N-vortex Hamiltonian dynamics on the catenoid.
//!
//! Pair interaction `G = (1/4π) log F` with `F = cosh(Δv/a) - cos Δu`, plus the
//! curvature self-energy `-(Γ²/4π) log h(v)`. The symplectic weight of vortex
//! `i` is `Γᵢ a h²(vᵢ)`, so Hamilton's equations read
//! `Γᵢ a h² v̇ᵢ = ∂H/∂uᵢ`, `Γᵢ a h² u̇ᵢ = -∂H/∂vᵢ`.
//!
//! Phase-space states are also handled as flat slices laid out as
//! `[v_1..v_N, u_1..u_N]`; that is the layout the integrator works on.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CatenoidParams, SurfacePoint};

/// Default lower bound on the pair kernel `F` before a collision is reported.
pub const DEFAULT_COLLISION_FLOOR: f64 = 1e-12;

const FOUR_PI: f64 = 4.0 * PI;

/// Circulations and positions of `N` point vortices on a catenoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexSystem {
    pub params: CatenoidParams,
    pub circulations: Vec<f64>,
    pub positions: Vec<SurfacePoint>,
    #[serde(default = "default_floor")]
    pub collision_floor: f64,
}

fn default_floor() -> f64 {
    DEFAULT_COLLISION_FLOOR
}

/// Time derivatives of every vortex coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseVelocity {
    pub dv: Vec<f64>,
    pub du: Vec<f64>,
}

/// Values of the two conserved quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Invariants {
    pub energy: f64,
    pub momentum: f64,
}

impl VortexSystem {
    /// Validates the configuration: at least one vortex, finite nonzero
    /// circulations, finite coordinates and no pair closer than the floor.
    pub fn new(
        params: CatenoidParams,
        circulations: Vec<f64>,
        positions: Vec<SurfacePoint>,
    ) -> Result<Self> {
        Self::with_collision_floor(params, circulations, positions, DEFAULT_COLLISION_FLOOR)
    }

    pub fn with_collision_floor(
        params: CatenoidParams,
        circulations: Vec<f64>,
        positions: Vec<SurfacePoint>,
        collision_floor: f64,
    ) -> Result<Self> {
        if circulations.is_empty() {
            return Err(Error::InvalidParameter("need at least one vortex".into()));
        }
        if circulations.len() != positions.len() {
            return Err(Error::InvalidParameter(format!(
                "{} circulations for {} positions",
                circulations.len(),
                positions.len()
            )));
        }
        if let Some(g) = circulations.iter().find(|g| !(g.is_finite() && **g != 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "circulations must be finite and nonzero, got {g}"
            )));
        }
        if positions.iter().any(|p| !(p.v.is_finite() && p.u.is_finite())) {
            return Err(Error::InvalidParameter("non-finite vortex position".into()));
        }
        if !(collision_floor >= 0.0) {
            return Err(Error::InvalidParameter("collision floor must be >= 0".into()));
        }
        let sys = Self {
            params,
            circulations,
            positions,
            collision_floor,
        };
        sys.check_separation()?;
        Ok(sys)
    }

    pub fn len(&self) -> usize {
        self.circulations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.circulations.is_empty()
    }

    fn check_separation(&self) -> Result<()> {
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                pair_kernel_with_floor(
                    self.positions[i],
                    self.positions[j],
                    &self.params,
                    self.collision_floor,
                )
                .map_err(|e| relabel(e, i, j))?;
            }
        }
        Ok(())
    }

    /// Flat `[v.., u..]` state vector.
    pub fn state(&self) -> Vec<f64> {
        let mut y: Vec<f64> = self.positions.iter().map(|p| p.v).collect();
        y.extend(self.positions.iter().map(|p| p.u));
        y
    }

    /// Copy of `self` with positions replaced by a flat state vector.
    /// No separation check is performed.
    pub fn with_state(&self, y: &[f64]) -> Self {
        let n = self.len();
        debug_assert_eq!(y.len(), 2 * n);
        let positions = (0..n).map(|i| SurfacePoint::new(y[i], y[n + i])).collect();
        Self {
            params: self.params,
            circulations: self.circulations.clone(),
            positions,
            collision_floor: self.collision_floor,
        }
    }

    /// Same positions, all circulations negated. The vector field is linear in
    /// the circulations, so this runs the dynamics backwards in time.
    pub fn time_reversed(&self) -> Self {
        Self {
            circulations: self.circulations.iter().map(|g| -g).collect(),
            ..self.clone()
        }
    }

    pub fn hamiltonian(&self) -> Result<f64> {
        hamiltonian_flat(&self.params, &self.circulations, &self.state(), self.collision_floor)
    }

    /// `J = Σ Γᵢ S(vᵢ)`.
    pub fn momentum(&self) -> f64 {
        momentum_flat(&self.params, &self.circulations, &self.state())
    }

    pub fn invariants(&self) -> Result<Invariants> {
        Ok(Invariants {
            energy: self.hamiltonian()?,
            momentum: self.momentum(),
        })
    }

    pub fn vector_field(&self) -> Result<PhaseVelocity> {
        let n = self.len();
        let mut out = vec![0.0; 2 * n];
        vector_field_flat(
            &self.params,
            &self.circulations,
            &self.state(),
            self.collision_floor,
            &mut out,
        )?;
        let du = out.split_off(n);
        Ok(PhaseVelocity { dv: out, du })
    }
}

fn relabel(e: Error, i: usize, j: usize) -> Error {
    match e {
        Error::Collision { kernel, time, .. } => Error::Collision { i, j, kernel, time },
        other => other,
    }
}

/// `F = cosh((vᵢ - vⱼ)/a) - cos(uᵢ - uⱼ)` with the default collision floor.
pub fn pair_kernel(pi: SurfacePoint, pj: SurfacePoint, p: &CatenoidParams) -> Result<f64> {
    pair_kernel_with_floor(pi, pj, p, DEFAULT_COLLISION_FLOOR)
}

pub fn pair_kernel_with_floor(
    pi: SurfacePoint,
    pj: SurfacePoint,
    p: &CatenoidParams,
    floor: f64,
) -> Result<f64> {
    checked_kernel(kernel(pi.v - pj.v, pi.u - pj.u, p.a()), floor, 0, 1)
}

/// Green's function `G = (1/4π) log F`.
pub fn green_function(pi: SurfacePoint, pj: SurfacePoint, p: &CatenoidParams) -> Result<f64> {
    Ok(pair_kernel(pi, pj, p)?.ln() / FOUR_PI)
}

/// `cosh(dv/a) - cos(du)`, written as `2 sinh²(dv/2a) + 2 sin²(du/2)` so
/// it stays accurate when the two points are close.
#[inline]
pub(crate) fn kernel(dv: f64, du: f64, a: f64) -> f64 {
    let sh = (0.5 * dv / a).sinh();
    let s = (0.5 * du).sin();
    2.0 * (sh * sh + s * s)
}

#[inline]
fn checked_kernel(f: f64, floor: f64, i: usize, j: usize) -> Result<f64> {
    if f < floor || !f.is_finite() {
        Err(Error::Collision {
            i,
            j,
            kernel: f,
            time: None,
        })
    } else {
        Ok(f)
    }
}

pub(crate) fn hamiltonian_flat(
    p: &CatenoidParams,
    gammas: &[f64],
    y: &[f64],
    floor: f64,
) -> Result<f64> {
    let n = gammas.len();
    let (v, u) = y.split_at(n);
    let a = p.a();
    let mut pair = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let f = checked_kernel(kernel(v[i] - v[j], u[i] - u[j], a), floor, i, j)?;
            pair += gammas[i] * gammas[j] * f.ln();
        }
    }
    let mut self_energy = 0.0;
    for i in 0..n {
        self_energy += gammas[i] * gammas[i] * p.conformal_factor(v[i]).ln();
    }
    Ok((pair - self_energy) / FOUR_PI)
}

pub(crate) fn momentum_flat(p: &CatenoidParams, gammas: &[f64], y: &[f64]) -> f64 {
    gammas
        .iter()
        .zip(&y[..gammas.len()])
        .map(|(g, &v)| g * p.momentum_density(v))
        .sum()
}

/// Writes `[v̇.., u̇..]` into `out`. Pair terms are summed in a fixed
/// order so results are reproducible.
pub(crate) fn vector_field_flat(
    p: &CatenoidParams,
    gammas: &[f64],
    y: &[f64],
    floor: f64,
    out: &mut [f64],
) -> Result<()> {
    let n = gammas.len();
    let (v, u) = y.split_at(n);
    let (dv, du) = out.split_at_mut(n);
    let a = p.a();
    dv.fill(0.0);
    du.fill(0.0);
    for i in 0..n {
        for j in i + 1..n {
            let (ddv, ddu) = ((v[i] - v[j]) / a, u[i] - u[j]);
            let f = checked_kernel(kernel(v[i] - v[j], ddu, a), floor, i, j)?;
            let s = ddu.sin() / f;
            let sh = ddv.sinh() / f;
            // Antisymmetric in (i, j).
            dv[i] += gammas[j] * s;
            dv[j] -= gammas[i] * s;
            du[i] -= gammas[j] * sh;
            du[j] += gammas[i] * sh;
        }
    }
    for i in 0..n {
        let x = v[i] / a;
        let h2 = x.cosh().powi(2);
        dv[i] /= FOUR_PI * a * h2;
        du[i] = (du[i] + gammas[i] * x.tanh()) / (FOUR_PI * a * a * h2);
    }
    Ok(())
}

/// A scalar function on phase space.
pub type Observable<'a> = dyn Fn(&VortexSystem) -> Result<f64> + 'a;

/// Relative central-difference step used for derivative checks.
pub const FD_STEP: f64 = 1e-6;

/// Central-difference step for a coordinate of magnitude `x`.
pub fn fd_step(x: f64) -> f64 {
    FD_STEP * x.abs().max(1.0)
}

/// Partial derivatives `(∂f/∂vᵢ, ∂f/∂uᵢ)` of an observable, by central
/// differences with step `step · max(1, |coordinate|)`.
pub fn gradient(
    f: &Observable<'_>,
    sys: &VortexSystem,
    step: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = sys.len();
    let y = sys.state();
    let mut grad = vec![0.0; 2 * n];
    let mut probe = y.clone();
    for k in 0..2 * n {
        let h = step * y[k].abs().max(1.0);
        probe[k] = y[k] + h;
        let plus = f(&sys.with_state(&probe))?;
        probe[k] = y[k] - h;
        let minus = f(&sys.with_state(&probe))?;
        probe[k] = y[k];
        grad[k] = (plus - minus) / (2.0 * h);
    }
    let du = grad.split_off(n);
    Ok((grad, du))
}

/// `{A, B} = Σᵢ (∂A/∂vᵢ ∂B/∂uᵢ - ∂A/∂uᵢ ∂B/∂vᵢ) / (Γᵢ a h²(vᵢ))`, with the
/// partials taken by central differences.
pub fn poisson_bracket(
    fa: &Observable<'_>,
    fb: &Observable<'_>,
    sys: &VortexSystem,
    step: f64,
) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let (av, au) = gradient(fa, sys, step)?;
    let (bv, bu) = gradient(fb, sys, step)?;
    let a = sys.params.a();
    let mut acc = 0.0;
    for i in 0..sys.len() {
        let weight = sys.circulations[i] * a * sys.params.conformal_factor(sys.positions[i].v).powi(2);
        acc += (av[i] * bu[i] - au[i] * bv[i]) / weight;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LOG2_OVER_4PI: f64 = 0.055_158_900_038_162_9;
    const COSH_1: f64 = 1.543_080_634_815_243_7;
    const TWO_S_AT_1: f64 = 2.813_430_203_923_509_5;

    fn pair(v1: f64, u1: f64, v2: f64, u2: f64, g: f64) -> VortexSystem {
        VortexSystem::new(
            CatenoidParams::unit(),
            vec![g, g],
            vec![SurfacePoint::new(v1, u1), SurfacePoint::new(v2, u2)],
        )
        .unwrap()
    }

    fn random_system(rng: &mut ChaCha8Rng, n: usize) -> VortexSystem {
        let p = CatenoidParams::new(rng.gen_range(0.5..2.0)).unwrap();
        loop {
            let gammas: Vec<f64> = (0..n)
                .map(|_| {
                    let g: f64 = rng.gen_range(0.3..2.0);
                    if rng.gen_bool(0.3) { -g } else { g }
                })
                .collect();
            let pts: Vec<SurfacePoint> = (0..n)
                .map(|_| SurfacePoint::new(rng.gen_range(-1.5..1.5), rng.gen_range(0.0..std::f64::consts::TAU)))
                .collect();
            let ok = (0..n).all(|i| {
                (i + 1..n).all(|j| pair_kernel(pts[i], pts[j], &p).is_ok_and(|f| f > 0.02))
            });
            if ok {
                return VortexSystem::new(p, gammas, pts).unwrap();
            }
        }
    }

    #[test]
    fn kernel_values() {
        let p = CatenoidParams::unit();
        let f = pair_kernel(SurfacePoint::new(0.3, 0.0), SurfacePoint::new(0.3, PI), &p).unwrap();
        assert!((f - 2.0).abs() < 1e-15);
        let g = green_function(SurfacePoint::new(0.3, 0.0), SurfacePoint::new(0.3, PI), &p).unwrap();
        assert!((g - LOG2_OVER_4PI).abs() < 1e-16);
        let f = pair_kernel(SurfacePoint::new(1.0, PI / 2.0), SurfacePoint::new(0.0, 0.0), &p).unwrap();
        assert!((f - COSH_1).abs() < 1e-15);
        let err = pair_kernel(SurfacePoint::new(0.2, 1.0), SurfacePoint::new(0.2, 1.0), &p);
        assert!(matches!(err, Err(Error::Collision { .. })));
    }

    #[test]
    fn kernel_is_periodic_and_symmetric() {
        let p = CatenoidParams::new(0.8).unwrap();
        let a = SurfacePoint::new(0.4, 0.3);
        let b = SurfacePoint::new(-0.2, 2.1);
        let f = pair_kernel(a, b, &p).unwrap();
        assert_eq!(f, pair_kernel(b, a, &p).unwrap());
        let b_shift = SurfacePoint::new(-0.2, 2.1 + 2.0 * PI);
        assert!((f - pair_kernel(a, b_shift, &p).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn construction_rejects_collisions_and_zero_circulation() {
        let p = CatenoidParams::unit();
        let same = SurfacePoint::new(0.1, 0.1);
        assert!(VortexSystem::new(p, vec![1.0, 1.0], vec![same, same]).is_err());
        assert!(VortexSystem::new(p, vec![0.0], vec![same]).is_err());
        assert!(VortexSystem::new(p, vec![], vec![]).is_err());
        assert!(VortexSystem::new(p, vec![1.0], vec![same, same]).is_err());
    }

    #[test]
    fn symmetric_pair_energy_and_momentum() {
        let s = pair(0.0, 0.0, 0.0, PI, 1.0);
        assert!((s.hamiltonian().unwrap() - LOG2_OVER_4PI).abs() < 1e-16);
        assert_eq!(s.momentum(), 0.0);
        let s = pair(1.0, 0.0, 1.0, PI, 1.0);
        assert!((s.momentum() - TWO_S_AT_1).abs() < 1e-15);
        // Closed form for the antipodal pair at latitude V0.
        let v0: f64 = 1.0;
        let closed = 2f64.ln() / (4.0 * PI) - v0.cosh().ln() / (2.0 * PI);
        assert!((s.hamiltonian().unwrap() - closed).abs() < 1e-15);
    }

    #[test]
    fn single_vortex() {
        let p = CatenoidParams::unit();
        let s = VortexSystem::new(p, vec![1.0], vec![SurfacePoint::new(0.0, 0.4)]).unwrap();
        assert_eq!(s.hamiltonian().unwrap(), 0.0);
        let vf = s.vector_field().unwrap();
        assert_eq!(vf.dv, vec![0.0]);
        assert_eq!(vf.du, vec![0.0]);

        let s = VortexSystem::new(p, vec![-1.0], vec![SurfacePoint::new(1.0, 0.4)]).unwrap();
        assert_eq!(s.momentum(), -p.momentum_density(1.0));
        let s = VortexSystem::new(p, vec![1.3], vec![SurfacePoint::new(0.7, 0.0)]).unwrap();
        let vf = s.vector_field().unwrap();
        let expected = 1.3 * 0.7f64.tanh() / (4.0 * PI * 0.7f64.cosh().powi(2));
        assert_eq!(vf.dv, vec![0.0]);
        assert!((vf.du[0] - expected).abs() < 1e-16);
    }

    #[test]
    fn symmetric_pair_rotates_rigidly() {
        for v0 in [-0.8, 0.0, 0.5, 1.7] {
            let s = pair(v0, 0.25, v0, 0.25 + PI, 1.0);
            let vf = s.vector_field().unwrap();
            let omega = v0.tanh() / (4.0 * PI * v0.cosh().powi(2));
            for i in 0..2 {
                assert!(vf.dv[i].abs() < 1e-16);
                assert!((vf.du[i] - omega).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn hamiltonian_is_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 3, 5] {
            let s = random_system(&mut rng, n);
            let mut shifted = s.clone();
            shifted.positions.iter_mut().for_each(|p| p.u += 0.37);
            let (h0, h1) = (s.hamiltonian().unwrap(), shifted.hamiltonian().unwrap());
            assert!((h0 - h1).abs() <= 1e-14 * h0.abs().max(1e-300) + 1e-16);
        }
    }

    #[test]
    fn vector_field_satisfies_hamilton_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h: &Observable<'_> = &|s| s.hamiltonian();
        for trial in 0..100 {
            let n = [2, 3, 5][trial % 3];
            let s = random_system(&mut rng, n);
            let vf = s.vector_field().unwrap();
            let (dh_dv, dh_du) = gradient(h, &s, 1e-6).unwrap();
            let a = s.params.a();
            for i in 0..n {
                let w = s.circulations[i] * a * s.params.conformal_factor(s.positions[i].v).powi(2);
                let tol_u = 1e-6f64.max(1e-4 * dh_du[i].abs());
                let tol_v = 1e-6f64.max(1e-4 * dh_dv[i].abs());
                assert!((w * vf.dv[i] - dh_du[i]).abs() < tol_u, "trial {trial} i {i}");
                assert!((w * vf.du[i] + dh_dv[i]).abs() < tol_v, "trial {trial} i {i}");
            }
        }
    }

    #[test]
    fn vector_field_commutes_with_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let s = random_system(&mut rng, 4);
            let mut shifted = s.clone();
            shifted.positions.iter_mut().for_each(|p| p.u += 1.234);
            let (a, b) = (s.vector_field().unwrap(), shifted.vector_field().unwrap());
            for i in 0..4 {
                assert!((a.dv[i] - b.dv[i]).abs() < 1e-13);
                assert!((a.du[i] - b.du[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn time_reversal_negates_velocity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_system(&mut rng, 3);
        let (f, b) = (s.vector_field().unwrap(), s.time_reversed().vector_field().unwrap());
        for i in 0..3 {
            assert_eq!(f.dv[i], -b.dv[i]);
            assert_eq!(f.du[i], -b.du[i]);
        }
    }

    #[test]
    fn fundamental_brackets() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let s = random_system(&mut rng, 2);
            for i in 0..2 {
                let vi = move |s: &VortexSystem| Ok(s.positions[i].v);
                let ui = move |s: &VortexSystem| Ok(s.positions[i].u);
                let uj = move |s: &VortexSystem| Ok(s.positions[1 - i].u);
                let vj = move |s: &VortexSystem| Ok(s.positions[1 - i].v);
                let expected = 1.0
                    / (s.circulations[i] * s.params.a() * s.params.conformal_factor(s.positions[i].v).powi(2));
                let b = poisson_bracket(&vi, &ui, &s, 1e-6).unwrap();
                assert!((b - expected).abs() < 1e-8 * expected.abs().max(1.0));
                assert!(poisson_bracket(&vi, &uj, &s, 1e-6).unwrap().abs() < 1e-9);
                assert!(poisson_bracket(&vi, &vj, &s, 1e-6).unwrap().abs() < 1e-9);
                assert!(poisson_bracket(&ui, &uj, &s, 1e-6).unwrap().abs() < 1e-9);
                // {u_i, J} = -1
                let j: &Observable<'_> = &|s| Ok(s.momentum());
                assert!((poisson_bracket(&ui, j, &s, 1e-6).unwrap() + 1.0).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn bracket_is_antisymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let s = random_system(&mut rng, 2);
        let h: &Observable<'_> = &|s| s.hamiltonian();
        let j: &Observable<'_> = &|s| Ok(s.momentum());
        assert_eq!(poisson_bracket(h, h, &s, 1e-6).unwrap(), 0.0);
        let hj = poisson_bracket(h, j, &s, 1e-6).unwrap();
        let jh = poisson_bracket(j, h, &s, 1e-6).unwrap();
        assert_eq!(hj, -jh);
        assert!(poisson_bracket(h, j, &s, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn pair_momentum_flux_cancels(
            v1 in -2.0f64..2.0, u1 in 0.0f64..std::f64::consts::TAU,
            v2 in -2.0f64..2.0, u2 in 0.0f64..std::f64::consts::TAU,
            g1 in 0.2f64..3.0, g2 in -3.0f64..3.0,
        ) {
            let p = CatenoidParams::unit();
            prop_assume!(g2.abs() > 0.1);
            let pts = vec![SurfacePoint::new(v1, u1), SurfacePoint::new(v2, u2)];
            prop_assume!(pair_kernel(pts[0], pts[1], &p).is_ok_and(|f| f > 1e-3));
            let s = VortexSystem::new(p, vec![g1, g2], pts).unwrap();
            let vf = s.vector_field().unwrap();
            let w1 = g1 * p.conformal_factor(v1).powi(2);
            let w2 = g2 * p.conformal_factor(v2).powi(2);
            let flux = w1 * vf.dv[0] + w2 * vf.dv[1];
            let scale = (w1 * vf.dv[0]).abs().max(1.0);
            prop_assert!(flux.abs() < 1e-13 * scale);
        }
    }
}
