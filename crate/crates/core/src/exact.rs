//! Closed forms for the antipodal co-rotating pair.
//!
//! Two equal vortices at the same latitude `V0`, half a turn apart, rotate
//! rigidly at `Ω(V0) = (Γ/4πa²) tanh(V0/a) sech²(V0/a)`. The state is linearly
//! unstable with rate `λ = √3 |Ω|`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::VortexSystem;
use crate::error::{Error, Result};
use crate::geometry::{CatenoidParams, SurfacePoint};

/// Largest admissible seed amplitude, in units of `a`.
pub const MAX_SEED_AMPLITUDE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricOrbit {
    pub v0: f64,
    pub gamma: f64,
    pub params: CatenoidParams,
    pub omega: f64,
}

impl SymmetricOrbit {
    pub fn new(v0: f64, gamma: f64, params: CatenoidParams) -> Self {
        Self {
            v0,
            gamma,
            params,
            omega: omega_symmetric(v0, gamma, &params),
        }
    }

    /// Both vortices at `v0`, first at azimuth `u1`, second at `u1 - π`.
    pub fn system(&self, u1: f64) -> Result<VortexSystem> {
        VortexSystem::new(
            self.params,
            vec![self.gamma, self.gamma],
            vec![SurfacePoint::new(self.v0, u1), SurfacePoint::new(self.v0, u1 - PI)],
        )
    }

    /// Energy `(Γ²/4π) log 2 - (Γ²/2π) log h(V0)`.
    pub fn energy(&self) -> f64 {
        let g2 = self.gamma * self.gamma;
        g2 / (4.0 * PI) * 2f64.ln() - g2 / (2.0 * PI) * self.params.conformal_factor(self.v0).ln()
    }

    /// Momentum `2Γ S(V0)`.
    pub fn momentum(&self) -> f64 {
        2.0 * self.gamma * self.params.momentum_density(self.v0)
    }
}

/// Linearisation `η̇ = -A φ`, `φ̇ = -B η` about the antipodal state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityData {
    pub a_coupling: f64,
    pub b_coupling: f64,
    pub lambda: f64,
    /// `φ/η` along the growing mode.
    pub eigen_ratio: f64,
}

impl StabilityData {
    /// `M (η, φ)` for `M = [[0, -A], [-B, 0]]`.
    pub fn apply(&self, eta: f64, phi: f64) -> (f64, f64) {
        (-self.a_coupling * phi, -self.b_coupling * eta)
    }
}

pub fn omega_symmetric(v0: f64, gamma: f64, p: &CatenoidParams) -> f64 {
    let a = p.a();
    let x = v0 / a;
    let sech = 1.0 / x.cosh();
    gamma / (4.0 * PI * a * a) * x.tanh() * sech * sech
}

/// Same rate written through the curvature: `(Γ/16π) K'(V) / √(-K(V))`.
pub fn omega_from_curvature(v: f64, gamma: f64, p: &CatenoidParams) -> f64 {
    gamma / (16.0 * PI) * p.curvature_gradient(v) / (-p.gaussian_curvature(v)).sqrt()
}

/// Latitude of maximal rotation, `(a/2) ln(2 + √3)`.
pub fn v_star(p: &CatenoidParams) -> f64 {
    0.5 * p.a() * (2.0 + 3f64.sqrt()).ln()
}

pub fn stability(v0: f64, gamma: f64, p: &CatenoidParams) -> StabilityData {
    let a = p.a();
    let x = v0 / a;
    let sech2 = 1.0 / x.cosh().powi(2);
    let tanh = x.tanh();
    let a_coupling = gamma / (4.0 * PI * a) * sech2;
    let b_coupling = 3.0 * gamma / (4.0 * PI * a.powi(3)) * sech2 * tanh * tanh;
    let product = a_coupling * b_coupling;
    let lambda = if product >= 0.0 { product.sqrt() } else { 0.0 };
    let eigen_ratio = if a_coupling != 0.0 {
        -lambda / a_coupling
    } else {
        0.0
    };
    StabilityData {
        a_coupling,
        b_coupling,
        lambda,
        eigen_ratio,
    }
}

/// Antipodal pair at `V0` displaced by `η0` along the growing eigenvector:
/// `v₁,₂ = V0 ± η0/2`, `u₁,₂ = ±(π + φ0)/2` with `φ0 = (φ/η)·η0`.
pub fn seed_unstable(v0: f64, eta0: f64, gamma: f64, p: &CatenoidParams) -> Result<VortexSystem> {
    let bound = MAX_SEED_AMPLITUDE * p.a();
    if !(eta0.abs() <= bound) {
        return Err(Error::PerturbationTooLarge { eta0, bound });
    }
    let phi0 = stability(v0, gamma, p).eigen_ratio * eta0;
    let half_u = 0.5 * (PI + phi0);
    VortexSystem::new(
        *p,
        vec![gamma, gamma],
        vec![
            SurfacePoint::new(v0 + 0.5 * eta0, half_u),
            SurfacePoint::new(v0 - 0.5 * eta0, -half_u),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const V_STAR: f64 = 0.658_478_948_462_408_4;
    const OMEGA_AT_V_STAR: f64 = 0.030_629_383_078_988_447;
    const LAMBDA_AT_V_STAR: f64 = 0.053_051_647_697_298_45;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn omega_values() {
        let p = CatenoidParams::unit();
        assert_eq!(omega_symmetric(0.0, 1.0, &p), 0.0);
        assert!(rel(omega_symmetric(V_STAR, 1.0, &p), OMEGA_AT_V_STAR) < 1e-14);
        assert_eq!(omega_symmetric(-0.4, 1.0, &p), -omega_symmetric(0.4, 1.0, &p));
        // Far field ~ (Γ/πa²) e^{-2|V|/a}.
        let far = omega_symmetric(10.0, 1.0, &p);
        let asym = (-20f64).exp() / PI;
        assert!((far / asym - 1.0).abs() < 1e-4);
        let far = omega_symmetric(-10.0, 1.0, &p);
        assert!((far / -asym - 1.0).abs() < 1e-4);
    }

    #[test]
    fn curvature_form_agrees() {
        for a in [0.6, 1.0, 1.9] {
            let p = CatenoidParams::new(a).unwrap();
            assert_eq!(omega_from_curvature(0.0, 1.0, &p), 0.0);
            for k in 0..=1000 {
                let v = -5.0 * a + 10.0 * a * k as f64 / 1000.0;
                let (x, y) = (omega_from_curvature(v, 1.3, &p), omega_symmetric(v, 1.3, &p));
                if y != 0.0 {
                    assert!(rel(x, y) < 1e-13, "v = {v}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn v_star_is_the_maximum() {
        let p = CatenoidParams::unit();
        assert!(rel(v_star(&p), V_STAR) < 1e-15);
        let p2 = CatenoidParams::new(2.0).unwrap();
        assert_eq!(v_star(&p2), 2.0 * v_star(&p));
        let step = 1e-4;
        let (mut best_v, mut best) = (0.0, f64::MIN);
        for k in 0..=30_000 {
            let v = k as f64 * step;
            let w = omega_symmetric(v, 1.0, &p);
            if w > best {
                best = w;
                best_v = v;
            }
        }
        assert!((best_v - V_STAR).abs() <= step);
    }

    #[test]
    fn omega_rises_then_falls() {
        let p = CatenoidParams::unit();
        let vs = v_star(&p);
        let slope = |v: f64| (omega_symmetric(v + 1e-6, 1.0, &p) - omega_symmetric(v - 1e-6, 1.0, &p)) / 2e-6;
        for k in 1..60 {
            let v = vs * k as f64 / 60.0;
            assert!(slope(v) > 0.0, "v = {v}");
        }
        for k in 1..60 {
            let v = vs + 0.05 * k as f64;
            assert!(slope(v) < 0.0, "v = {v}");
        }
    }

    #[test]
    fn stability_values() {
        let p = CatenoidParams::unit();
        let s0 = stability(0.0, 1.0, &p);
        assert_eq!(s0.lambda, 0.0);
        let s = stability(V_STAR, 1.0, &p);
        assert!(rel(s.lambda, LAMBDA_AT_V_STAR) < 1e-14);
        assert!((s.eigen_ratio + 1.0).abs() < 1e-14);
        for v0 in [-1.2, 0.1, 0.3, 0.5, 1.0, 2.5] {
            let s = stability(v0, 1.0, &p);
            let omega = omega_symmetric(v0, 1.0, &p);
            assert!(rel(s.lambda, 3f64.sqrt() * omega.abs()) < 1e-13);
            assert!(rel(s.lambda * s.lambda, s.a_coupling * s.b_coupling) < 1e-14);
            // Growing mode has φ/η < 0 on both sides of the throat.
            assert!(rel(s.eigen_ratio, -3f64.sqrt() * v0.tanh().abs()) < 1e-13);
        }
    }

    #[test]
    fn seed_is_an_eigenvector() {
        let p = CatenoidParams::new(1.4).unwrap();
        for v0 in [-0.7, 0.3, 0.5, 1.0] {
            let s = stability(v0, 1.0, &p);
            let (me, mp) = s.apply(1.0, s.eigen_ratio);
            assert!(rel(me, s.lambda) < 1e-12);
            assert!(rel(mp, s.lambda * s.eigen_ratio) < 1e-12);

            let eta0 = 1e-4;
            let sys = seed_unstable(v0, eta0, 1.0, &p).unwrap();
            let eta = sys.positions[0].v - sys.positions[1].v;
            let phi = sys.positions[0].u - sys.positions[1].u - PI;
            assert!((eta - eta0).abs() < 4.0 * f64::EPSILON);
            assert!((phi - s.eigen_ratio * eta0).abs() < 8.0 * f64::EPSILON);
        }
    }

    #[test]
    fn linearisation_matches_finite_differences() {
        // Jacobian of (η̇, φ̇) from the full vector field, η = v₁-v₂, φ = u₁-u₂-π.
        let p = CatenoidParams::new(1.2).unwrap();
        for v0 in [-0.9, -0.3, 0.4, 1.1] {
            let s = stability(v0, 1.0, &p);
            let rates = |eta: f64, phi: f64| {
                let half = 0.5 * (PI + phi);
                let sys = VortexSystem::new(
                    p,
                    vec![1.0, 1.0],
                    vec![SurfacePoint::new(v0 + 0.5 * eta, half), SurfacePoint::new(v0 - 0.5 * eta, -half)],
                )
                .unwrap();
                let vf = sys.vector_field().unwrap();
                (vf.dv[0] - vf.dv[1], vf.du[0] - vf.du[1])
            };
            let d = 1e-6;
            let (ep, pp) = rates(d, 0.0);
            let (em, pm) = rates(-d, 0.0);
            let (eq, pq) = rates(0.0, d);
            let (en, pn) = rates(0.0, -d);
            let jac = [
                [(ep - em) / (2.0 * d), (eq - en) / (2.0 * d)],
                [(pp - pm) / (2.0 * d), (pq - pn) / (2.0 * d)],
            ];
            let scale = s.a_coupling.abs().max(s.b_coupling.abs());
            assert!(jac[0][0].abs() < 1e-8 * scale.max(1.0));
            assert!(jac[1][1].abs() < 1e-8 * scale.max(1.0));
            assert!((jac[0][1] + s.a_coupling).abs() < 1e-8, "v0 = {v0}");
            assert!((jac[1][0] + s.b_coupling).abs() < 1e-8, "v0 = {v0}");
        }
    }

    #[test]
    fn seed_values() {
        let p = CatenoidParams::unit();
        let sys = seed_unstable(0.5, 0.0, 1.0, &p).unwrap();
        assert_eq!(sys.positions[0].v, 0.5);
        assert_eq!(sys.positions[0].u - sys.positions[1].u, PI);

        let sys = seed_unstable(0.5, 1e-4, 1.0, &p).unwrap();
        let phi0 = -3f64.sqrt() * 0.5f64.tanh() * 1e-4;
        assert!(rel(phi0, -8.004_103_954_236_338e-5) < 1e-14);
        let du = sys.positions[0].u - sys.positions[1].u;
        assert!((du - (PI + phi0)).abs() < 1e-15);
        let dv = sys.positions[0].v - sys.positions[1].v;
        assert!((dv - 1e-4).abs() < 1e-16);

        assert!(matches!(
            seed_unstable(0.5, 0.02, 1.0, &p),
            Err(Error::PerturbationTooLarge { .. })
        ));
    }

    #[test]
    fn orbit_invariants_match_system() {
        let orbit = SymmetricOrbit::new(0.8, 1.5, CatenoidParams::new(0.9).unwrap());
        let sys = orbit.system(0.3).unwrap();
        assert!((sys.hamiltonian().unwrap() - orbit.energy()).abs() < 1e-15);
        assert!((sys.momentum() - orbit.momentum()).abs() < 1e-14);
    }
}
