mod common;

use std::f64::consts::PI;

use common::{desk_run, grid, rel, vgrid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqg_core::regularity::{
    box_dimension, center_lattice, covering_radius, criterion_blabla, criterion_fixed_scale, criterion_scheffer,
    dilation_covers, dimension_formulas, dyadic_scales, is_disjoint, jensen_chain_ratio, screen, screen_density,
    vitali_cover, CriterionConfig, CriterionKind, DensityCriterion, DensityFrames, SpaceTimeBall,
};
use sqg_core::solver::Trajectory;
use sqg_core::SqgError;

fn desk() -> Trajectory {
    desk_run(64, 0.45, 1, 1.5, 2e-3, 10).trajectory
}

#[test]
fn criteria_are_p_homogeneous_in_amplitude() {
    let tr = desk();
    let vg = vgrid(tr.grid());
    let lambda: f64 = 2.5;
    let big = tr.scaled(lambda);
    let c = ([PI, 2.0], 1.0);
    let ps = 6.0 / (4.0 * 0.45 - 1.0);
    let s0 = criterion_scheffer(&tr, c, 0.1).unwrap();
    assert!(rel(criterion_scheffer(&big, c, 0.1).unwrap(), lambda.powf(ps) * s0) < 1e-10);
    let p = (1.0 + 0.45) / 0.45 + 1.0 / 8.0;
    let b0 = criterion_blabla(&tr, &vg, c, 0.1, 8.0, Some(1.0)).unwrap();
    assert!(rel(criterion_blabla(&big, &vg, c, 0.1, 8.0, Some(1.0)).unwrap(), lambda.powf(p) * b0) < 1e-10);
    let f0 = criterion_fixed_scale(&tr, &vg, c, 0.05, 8.0, Some(1.0)).unwrap();
    assert!(rel(criterion_fixed_scale(&big, &vg, c, 0.05, 8.0, Some(1.0)).unwrap(), lambda.powf(p) * f0) < 1e-10);
}

#[test]
fn screener_agrees_with_single_point_criteria() {
    let tr = desk();
    let vg = vgrid(tr.grid());
    let centers = center_lattice(tr.grid(), 3, &[1.0, 1.2]);
    assert_eq!(centers.len(), 18);
    for kind in [CriterionKind::Scheffer, CriterionKind::Blabla, CriterionKind::FixedScale] {
        let cfg = CriterionConfig { kind, epsilon: 1.0, r: 0.05, q: 8.0, alpha: 0.45, kq: Some(1.5) };
        let s = screen(&tr, cfg, &centers, &vg, None).unwrap();
        for k in [0, 10, 17] {
            let (pt, c) = (&s.points[k], centers[k]);
            let want = match kind {
                CriterionKind::Scheffer => criterion_scheffer(&tr, c, 0.05).unwrap(),
                CriterionKind::Blabla => criterion_blabla(&tr, &vg, c, 0.05, 8.0, Some(1.5)).unwrap(),
                CriterionKind::FixedScale => criterion_fixed_scale(&tr, &vg, c, 0.05, 8.0, Some(1.5)).unwrap(),
            };
            assert!(rel(pt.value.unwrap(), want) < 1e-12, "{kind:?}");
        }
        assert!((s.ball_radius - covering_radius(1.5, 0.05, 0.45, 8.0)).abs() < 1e-15);
    }
}

#[test]
fn jensen_chain_ratio_is_finite_and_positive() {
    let tr = desk();
    let vg = vgrid(tr.grid());
    for x in [[1.0, 1.0], [PI, PI], [5.0, 2.0]] {
        let r = jensen_chain_ratio(&tr, &vg, (x, 1.0), 0.1, 8.0, 1.0).unwrap();
        assert!(r.is_finite() && r > 0.0, "{r}");
    }
}

#[test]
fn uncovered_centers_count_as_exceedances() {
    let tr = desk();
    let vg = vgrid(tr.grid());
    let cfg = CriterionConfig { kind: CriterionKind::FixedScale, epsilon: 1e9, r: 0.1, q: 8.0, alpha: 0.45, kq: Some(1.0) };
    let s = screen(&tr, cfg, &[([1.0, 1.0], 1.0), ([1.0, 1.0], 0.05)], &vg, None).unwrap();
    assert_eq!(s.exceedance(), vec![1]);
    assert!(s.points[1].error.is_some());
    assert_eq!(s.covering, vec![1]);
}

#[test]
fn invalid_configurations_are_rejected() {
    let cfg = CriterionConfig { kind: CriterionKind::Blabla, epsilon: -1.0, r: 0.0, q: 4.0, alpha: 0.2, kq: None };
    match cfg.validate() {
        Err(SqgError::Config(v)) => assert_eq!(v.len(), 4, "{v:?}"),
        other => panic!("{other:?}"),
    }
    let g = grid(32, 0.45);
    assert!(DensityFrames::new(g, vec![0.0], vec![vec![-1.0; g.len()]]).is_err());
    assert!(DensityFrames::new(g, vec![0.0, 1.0], vec![vec![0.0; g.len()]]).is_err());
}

#[test]
fn box_dimension_of_tilted_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let scales = dyadic_scales(0.2, 6);
    let line: Vec<[f64; 3]> = (0..40000).map(|_| { let s: f64 = rng.gen(); [0.1 + 0.5 * s, 0.2 + 0.3 * s, 0.15 + 0.6 * s] }).collect();
    let plane: Vec<[f64; 3]> = (0..400000)
        .map(|_| { let (a, b): (f64, f64) = (rng.gen(), rng.gen()); [0.1 + 0.6 * a, 0.1 + 0.3 * a + 0.5 * b, 0.2 + 0.6 * b] })
        .collect();
    let d1 = box_dimension(&line, &scales).unwrap().slope;
    let d2 = box_dimension(&plane, &scales).unwrap().slope;
    assert!((d1 - 1.0).abs() < 0.2 && (d2 - 2.0).abs() < 0.2, "{d1} {d2}");
}

#[test]
fn beta_q_exceeds_its_limit_for_every_admissible_alpha() {
    for k in 1..50 {
        let a = 0.25 + 0.25 * k as f64 / 50.0;
        let lim = dimension_formulas(a, None).unwrap().limit_dim;
        for q in [8.0, 10.0, 100.0, 1e4] {
            assert!(dimension_formulas(a, Some(q)).unwrap().beta_q > lim);
        }
    }
}

fn spike_frames(n: usize, spike: usize, frame: usize, amp: f64) -> DensityFrames {
    let g = grid(n, 0.45);
    let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
    let mut frames = vec![vec![1e-3; g.len()]; times.len()];
    frames[frame][spike] += amp;
    DensityFrames::new(g, times, frames).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn vitali_selection_is_disjoint_and_covers_at_three(seed in 0u64..10_000, count in 1usize..150) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let balls: Vec<SpaceTimeBall> = (0..count)
            .map(|_| SpaceTimeBall { center: [rng.gen(), rng.gen(), rng.gen()], radius: rng.gen_range(0.001..0.3) })
            .collect();
        let sel = vitali_cover(&balls);
        prop_assert!(is_disjoint(&balls, &sel));
        prop_assert!(dilation_covers(&balls, &sel, 3.0));
    }

    #[test]
    fn exceedance_sets_are_nested_in_epsilon(e1 in 1e-4f64..1.0, factor in 1.0f64..100.0) {
        let crit = DensityCriterion { density: spike_frames(32, 300, 10, 50.0), alpha: 0.45, r: 0.1, q: 8.0, kq: 1.0 };
        let centers = center_lattice(&grid(32, 0.45), 8, &[0.4, 0.5, 0.6]);
        let s = screen_density(&crit, e1, &centers, None);
        let loose = s.with_epsilon(e1 * factor);
        let tight: std::collections::HashSet<usize> = s.exceedance().into_iter().collect();
        prop_assert!(loose.exceedance().iter().all(|i| tight.contains(i)));
    }

    #[test]
    fn spikes_are_localized(cell in 0usize..1024, frame in 8usize..13) {
        let g = grid(32, 0.45);
        let crit = DensityCriterion { density: spike_frames(32, cell, frame, 1e4), alpha: 0.45, r: 0.1, q: 8.0, kq: 1.0 };
        let base = DensityCriterion { density: spike_frames(32, cell, frame, 0.0), ..crit };
        let centers = center_lattice(&g, 16, &[0.45, 0.5, 0.55]);
        let eps = 2.0 * screen_density(&base, 1.0, &centers, None).points.iter().filter_map(|p| p.value).fold(0.0, f64::max);
        let s = screen_density(&crit, eps, &centers, None);
        let spike_x = g.point(cell);
        let spike_t = frame as f64 * 0.05;
        let cyl = crit.cylinder((spike_x, spike_t)).unwrap();
        for i in s.exceedance() {
            let p = &s.points[i];
            prop_assert!(g.periodic_distance(p.x, spike_x) <= 2.0 * cyl.spatial_radius());
            prop_assert!((p.t - spike_t).abs() <= 2.0 * cyl.depth());
        }
    }
}
