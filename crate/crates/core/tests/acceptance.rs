//! Acceptance criteria, one line of output each.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use catenoid_vortex::dynamics::{gradient, poisson_bracket, FD_STEP};
use catenoid_vortex::experiments::{
    run_cluster, run_generic_pair, run_instability, run_omega_profile, run_reduced_compare,
    run_rigid, ClusterReport, Scenario, ScenarioConfig,
};
use catenoid_vortex::integrator::advance;
use catenoid_vortex::{CatenoidParams, IntegratorSettings, SurfacePoint, VortexSystem};

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(id: u32, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, name, pass, detail }
}

fn cluster_at(centre_v: f64) -> ClusterReport {
    let mut cfg = ScenarioConfig::new(Scenario::Cluster);
    cfg.cluster.centre_v = centre_v;
    run_cluster(&cfg).expect("cluster run")
}

fn conservation(cluster: &ClusterReport) -> Outcome {
    let bound = 1e-10;
    let rigid = run_rigid(&ScenarioConfig::new(Scenario::Rigid)).unwrap().drift;
    let unstable = run_instability(&ScenarioConfig::new(Scenario::Instability)).unwrap().drift;
    let pair = run_generic_pair(&ScenarioConfig::new(Scenario::GenericPair)).unwrap().drift;
    let runs = [("rigid", rigid), ("instability", unstable), ("pair", pair), ("cluster", cluster.drift)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, d) in runs {
        let ok = d.max_energy_drift <= bound && d.max_momentum_drift <= bound;
        pass &= ok;
        parts.push(format!(
            "{name} dH={:.1e} dJ={:.1e}{}",
            d.max_energy_drift,
            d.max_momentum_drift,
            if ok { "" } else { " (over bound)" }
        ));
    }
    check(1, "conservation", pass, parts.join("; "))
}

fn exact_solution() -> Outcome {
    let r = run_rigid(&ScenarioConfig::new(Scenario::Rigid)).unwrap();
    let pass = r.max_dv_deviation <= 1e-10
        && r.max_du_deviation <= 1e-10
        && r.max_phase_deviation <= 1e-8
        && r.omega_rel_error <= 1e-8;
    check(
        2,
        "exact rigid rotation",
        pass,
        format!(
            "|dv|={:.1e} |du-pi|={:.1e} phase={:.1e} omega rel={:.1e}",
            r.max_dv_deviation, r.max_du_deviation, r.max_phase_deviation, r.omega_rel_error
        ),
    )
}

fn instability_rate() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for v0 in [0.3, 0.5, 1.0] {
        let mut cfg = ScenarioConfig::new(Scenario::Instability);
        cfg.v0 = v0;
        cfg.eta0 = 1e-6;
        let r = run_instability(&cfg).unwrap();
        pass &= r.lambda_rel_error < 1e-3;
        parts.push(format!("V0={v0}: rel={:.1e}", r.lambda_rel_error));
    }
    check(3, "instability rate", pass, parts.join("; "))
}

fn omega_profile() -> Outcome {
    let r = run_omega_profile(&ScenarioConfig::new(Scenario::OmegaProfile)).unwrap();
    let mut wide = ScenarioConfig::new(Scenario::OmegaProfile);
    wide.profile.v_max = 5.0;
    let w = run_omega_profile(&wide).unwrap();
    let pass = r.argmax_deviation <= 1e-3 && w.max_identity_rel_error <= 1e-13;
    check(
        4,
        "rotation-rate profile",
        pass,
        format!(
            "argmax={} (off by {:.1e}); identity rel={:.1e} on |V|<=5",
            r.argmax_v, r.argmax_deviation, w.max_identity_rel_error
        ),
    )
}

fn reduction_and_period() -> (Outcome, Outcome) {
    let r = run_reduced_compare(&ScenarioConfig::new(Scenario::ReducedCompare)).unwrap();
    let five = check(
        5,
        "reduction equivalence",
        r.max_rate_mismatch <= 1e-8 && r.max_mean_azimuth_mismatch <= 1e-4,
        format!(
            "rate={:.1e} U={:.1e}",
            r.max_rate_mismatch, r.max_mean_azimuth_mismatch
        ),
    );
    let eight = check(
        8,
        "quadrature period",
        r.period_rel_error <= 1e-6,
        format!(
            "quadrature={:.10} measured={:.10} rel={:.1e}",
            r.quadrature_period, r.measured_period, r.period_rel_error
        ),
    );
    (five, eight)
}

fn random_pair(rng: &mut ChaCha8Rng, p: CatenoidParams) -> VortexSystem {
    loop {
        let gammas: Vec<f64> = vec![rng.gen_range(0.5..2.0), rng.gen_range(-2.0..2.0)];
        if gammas[1].abs() < 0.2 {
            continue;
        }
        let positions = (0..2)
            .map(|_| SurfacePoint::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.0..TAU)))
            .collect::<Vec<_>>();
        let du = positions[0].u - positions[1].u;
        let dv = positions[0].v - positions[1].v;
        if (dv / p.a()).cosh() - du.cos() < 1e-3 {
            continue;
        }
        return VortexSystem::new(p, gammas, positions).unwrap();
    }
}

fn integrability() -> Outcome {
    let p = CatenoidParams::unit();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let energy = |s: &VortexSystem| s.hamiltonian();
    let momentum = |s: &VortexSystem| Ok(s.momentum());
    let mut worst_bracket = 0.0f64;
    let mut hamilton_ok = true;
    for _ in 0..100 {
        let sys = random_pair(&mut rng, p);
        worst_bracket = worst_bracket.max(poisson_bracket(&energy, &momentum, &sys, FD_STEP).unwrap().abs());
        let (gv, gu) = gradient(&energy, &sys, FD_STEP).unwrap();
        let vf = sys.vector_field().unwrap();
        for i in 0..2 {
            let w = sys.circulations[i] * p.a() * p.conformal_factor(sys.positions[i].v).powi(2);
            let tol = |g: f64| 1e-6f64.max(1e-4 * g.abs());
            hamilton_ok &= (w * vf.dv[i] - gu[i]).abs() <= tol(gu[i]);
            hamilton_ok &= (w * vf.du[i] + gv[i]).abs() <= tol(gv[i]);
        }
    }

    let sys = VortexSystem::new(
        p,
        vec![1.0, 1.0],
        vec![SurfacePoint::new(0.0, 0.0), SurfacePoint::new(PI / 4.0, PI / 3.0)],
    )
    .unwrap();
    let cfg = IntegratorSettings::new(20.0, 20.0);
    let forward = advance(&sys, 20.0, &cfg).unwrap();
    let back = advance(&forward, -20.0, &cfg).unwrap();
    let round_trip = sys
        .state()
        .iter()
        .zip(back.state())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    check(
        6,
        "integrability",
        worst_bracket <= 1e-8 && hamilton_ok && round_trip <= 1e-8,
        format!(
            "max|{{H,J}}|={worst_bracket:.1e} hamilton={} reversal={round_trip:.1e}",
            if hamilton_ok { "ok" } else { "mismatch" }
        ),
    )
}

fn cluster_drift(main: &ClusterReport, throat: &ClusterReport) -> Outcome {
    let ratio = main.omega_eff.abs() / throat.omega_eff.abs();
    let pass = main.max_vc_drift <= 0.1
        && main.max_mean_chord <= 3.0 * main.initial_mean_chord
        && main.residual_fraction <= 0.1
        && ratio >= 5.0;
    check(
        7,
        "cluster drift",
        pass,
        format!(
            "Vc drift={:.1e} chord ratio={:.3} fit rms/excursion={:.1e} omega_eff={:.4} vs throat {:.1e} (x{ratio:.0})",
            main.max_vc_drift,
            main.max_mean_chord / main.initial_mean_chord,
            main.residual_fraction,
            main.omega_eff,
            throat.omega_eff
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let cluster = cluster_at(0.7);
    let throat = cluster_at(0.0);
    let (five, eight) = reduction_and_period();
    let mut outcomes = vec![
        conservation(&cluster),
        exact_solution(),
        instability_rate(),
        omega_profile(),
        five,
        integrability(),
        cluster_drift(&cluster, &throat),
        eight,
    ];
    outcomes.sort_by_key(|o| o.id);
    println!();
    for o in &outcomes {
        println!(
            "[{}] {}. {}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            o.detail
        );
    }
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
