mod common;

use common::{desk_run, grid, random_field, rel};
use proptest::prelude::*;
use sqg_core::solver::{
    advection_term, heat_oracle, run, spacetime_l2_norm, step, vanishing_viscosity_family, PrescribedVelocity,
    RunStatus, SolverConfig, VelocityMode,
};
use sqg_core::spectral::riesz_velocity;
use sqg_core::{ScalarField, SqgError};

/// Uniform transport composed with the exact semigroup: theta(t) = S(t) theta_0(x - v t).
fn transported(theta0: &ScalarField, t: f64, v: [f64; 2]) -> ScalarField {
    heat_oracle(theta0, &[t], 0.0).unwrap().remove(0).shifted([-v[0] * t, -v[1] * t])
}

#[test]
fn uniform_velocity_matches_transported_semigroup_at_second_order() {
    let g = grid(32, 0.45);
    let theta0 = random_field(g, 1, 6.0, 0.5);
    let v = [0.7, -0.4];
    let err = |dt: f64| {
        let cfg = SolverConfig::new(g, dt, 0.5)
            .unwrap()
            .with_velocity(VelocityMode::Prescribed(PrescribedVelocity::Uniform(v)));
        let out = run(&theta0, &cfg).unwrap().trajectory;
        let last = out.thetas.last().unwrap();
        let want = transported(&theta0, last.time(), v);
        last.zip_with(&want, |a, b| a - b).unwrap().l2_norm() / want.l2_norm()
    };
    let (e1, e2) = (err(2e-2), err(1e-2));
    assert!(e2 < 1e-3, "{e2}");
    let order = (e1 / e2).log2();
    assert!(order > 1.8, "observed order {order} ({e1}, {e2})");
}

#[test]
fn coupled_energy_equality_and_inequality_with_viscosity() {
    let out = desk_run(64, 0.45, 3, 0.5, 1e-3, 25);
    assert!(out.ledger.max_relative_defect() < 1e-4, "{}", out.ledger.max_relative_defect());
    let g = grid(64, 0.45);
    let cfg = SolverConfig::new(g, 1e-3, 0.5).unwrap().with_eps(1e-2).with_stride(25);
    let visc = run(&random_field(g, 3, 6.0, 1.0), &cfg).unwrap();
    assert!(visc.ledger.max_relative_defect() < 1e-4);
    assert!(visc.ledger.inequality_holds(1e-8));
    assert!(visc.ledger.rows.last().unwrap().visc_cum > 0.0);
}

#[test]
fn runs_are_bitwise_deterministic() {
    let a = desk_run(32, 0.4, 8, 0.3, 2e-3, 5).trajectory;
    let b = desk_run(32, 0.4, 8, 0.3, 2e-3, 5).trajectory;
    assert_eq!(a.times, b.times);
    for (x, y) in a.thetas.iter().zip(&b.thetas) {
        assert!(x.values().iter().zip(y.values()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

#[test]
fn coupled_frames_carry_the_riesz_velocity() {
    let tr = desk_run(32, 0.45, 4, 0.2, 2e-3, 20).trajectory;
    assert!(tr.coupled);
    for (th, u) in tr.thetas.iter().zip(&tr.velocities) {
        let w = riesz_velocity(th);
        let d = w.u1.zip_with(&u.u1, |a, b| a - b).unwrap().sup_norm() + w.u2.zip_with(&u.u2, |a, b| a - b).unwrap().sup_norm();
        assert!(d < 1e-14);
        assert!(u.relative_divergence() < 1e-10);
    }
}

#[test]
fn oversized_step_is_rejected_and_run_substeps() {
    let g = grid(32, 0.45);
    let theta0 = random_field(g, 5, 8.0, 0.0).scaled(50.0);
    let cfg = SolverConfig::new(g, 0.2, 0.4).unwrap();
    assert!(matches!(step(&theta0, &cfg), Err(SqgError::Cfl { .. })));
    let out = run(&theta0, &cfg).unwrap();
    assert!(out.cfl_violations > 0);
    assert_eq!(out.trajectory.status, RunStatus::Completed);
}

#[test]
fn sup_norm_limit_reports_blow_up() {
    let g = grid(32, 0.45);
    let theta0 = random_field(g, 5, 4.0, 0.0);
    let mut cfg = SolverConfig::new(g, 1e-2, 0.5).unwrap();
    cfg.linf_limit = 1e-6;
    let out = run(&theta0, &cfg).unwrap();
    assert!(matches!(out.trajectory.status, RunStatus::BlowUp { .. }));
    assert_eq!(out.trajectory.len(), 2);
}

#[test]
fn mismatched_grid_is_a_data_error() {
    let theta0 = random_field(grid(32, 0.45), 5, 4.0, 0.0);
    let cfg = SolverConfig::new(grid(64, 0.45), 1e-2, 0.1).unwrap();
    assert!(matches!(run(&theta0, &cfg), Err(SqgError::Data(_))));
    assert!(matches!(SolverConfig::new(grid(64, 0.45), -1.0, 0.1), Err(SqgError::Config(_))));
}

#[test]
fn vanishing_viscosity_family_converges() {
    let g = grid(32, 0.45);
    let theta0 = random_field(g, 6, 8.0, 0.5);
    let cfg = SolverConfig::new(g, 2e-3, 0.4).unwrap().with_stride(20);
    let fam = vanishing_viscosity_family(&theta0, &cfg, &[4e-2, 2e-2, 1e-2, 5e-3]).unwrap();
    // distances shrink roughly linearly in eps
    for w in fam.distances.windows(2) {
        assert!(w[1] < 0.7 * w[0], "{:?}", fam.distances);
    }
    let scale = spacetime_l2_norm(&fam.members[0].trajectory).unwrap();
    assert!(fam.distances[0] < 0.05 * scale);
    assert!(vanishing_viscosity_family(&theta0, &cfg, &[1e-2, 2e-2]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn advection_conserves_l2_and_mean(seed in 0u64..500) {
        let g = grid(32, 0.45);
        let theta = random_field(g, seed, 8.0, 0.5);
        let a = advection_term(&theta, &VelocityMode::Coupled).unwrap();
        // int theta (u . grad theta) = 0 and the term has zero mean
        let pair: f64 = theta.values().iter().zip(a.values()).map(|(x, y)| x * y).sum::<f64>() * g.cell_area();
        prop_assert!(pair.abs() < 1e-10 * a.l2_norm() * theta.l2_norm());
        prop_assert!(a.mean().abs() < 1e-12 * a.sup_norm().max(1e-300));
    }

    #[test]
    fn zero_velocity_run_equals_semigroup(seed in 0u64..500, t_end in 0.05f64..0.5) {
        let g = grid(32, 0.3);
        let theta0 = random_field(g, seed, 10.0, 0.0);
        let cfg = SolverConfig::new(g, 1e-2, t_end).unwrap()
            .with_velocity(VelocityMode::Prescribed(PrescribedVelocity::Zero));
        let tr = run(&theta0, &cfg).unwrap().trajectory;
        let exact = heat_oracle(&theta0, &tr.times, 0.0).unwrap();
        for (a, b) in tr.thetas.iter().zip(&exact) {
            prop_assert!(rel(a.l2_norm(), b.l2_norm()) < 1e-10);
            prop_assert!(a.zip_with(b, |x, y| x - y).unwrap().sup_norm() < 1e-10 * b.sup_norm());
        }
    }
}
