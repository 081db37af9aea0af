mod common;

use std::f64::consts::PI;

use common::{desk_run, grid};
use sqg_core::excess::ExcessParams;
use sqg_core::flow::{
    excess_after_cov, integrate_flow, integrate_flows, iterate_cov, residual_ball_average, shift_pair, FlowOptions,
    SAFE_RADIUS,
};
use sqg_core::solver::Trajectory;
use sqg_core::{ScalarField, SqgError, VectorField};

/// Rotating cellular flow u = (cos x_2, sin x_1) (1 + tau), sampled every 0.1.
fn cellular(n: usize) -> Trajectory {
    let g = grid(n, 0.45);
    let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
    let th = times.iter().map(|&t| ScalarField::from_fn(g, t, |x, y| (x + 2.0 * y).sin()).unwrap()).collect();
    let us = times
        .iter()
        .map(|&t| {
            VectorField::new(
                ScalarField::from_fn(g, t, |_, y| y.cos() * (1.0 + t)).unwrap(),
                ScalarField::from_fn(g, t, |x, _| x.sin() * (1.0 + t)).unwrap(),
            )
            .unwrap()
        })
        .collect();
    Trajectory::from_frames(th, us, false).unwrap()
}

#[test]
fn heun_steps_converge_at_second_order() {
    let tr = cellular(32);
    let end = |m: usize| integrate_flow(&tr, ([1.0, 0.5], 1.75), 1.0, FlowOptions { fraction: 0.25, substeps: m }).unwrap().endpoint();
    let e: Vec<[f64; 2]> = [8, 16, 32, 64].iter().map(|&m| end(m)).collect();
    let d: Vec<f64> = e.windows(2).map(|w| (w[0][0] - w[1][0]).hypot(w[0][1] - w[1][1])).collect();
    assert!(d[2] > 0.0);
    for w in d.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.15, "observed order {order} from {d:?}");
    }
}

#[test]
fn flow_commutes_with_grid_translations() {
    let tr = cellular(32);
    let h = tr.grid().spacing();
    let a = [3.0 * h, -5.0 * h];
    let moved = Trajectory::from_frames(
        tr.thetas.iter().map(|f| f.shifted(a)).collect(),
        tr.velocities.iter().map(|u| u.shifted(a)).collect(),
        false,
    )
    .unwrap();
    let x = [1.0, 0.5];
    let p = integrate_flow(&tr, (x, 1.6), 0.8, FlowOptions::default()).unwrap();
    let q = integrate_flow(&moved, ([x[0] - a[0], x[1] - a[1]], 1.6), 0.8, FlowOptions::default()).unwrap();
    assert_eq!(p.samples.len(), q.samples.len());
    for (s, t) in p.samples.iter().zip(&q.samples) {
        assert!((s.x0[0] - t.x0[0]).abs() < 1e-12 && (s.x0[1] - t.x0[1]).abs() < 1e-12);
    }
}

#[test]
fn shifted_pair_has_mean_zero_velocity_on_the_unit_ball() {
    let tr = desk_run(32, 0.45, 3, 1.0, 5e-3, 4).trajectory;
    let path = integrate_flow(&tr, ([2.0, 3.0], 0.9), 0.6, FlowOptions::default()).unwrap();
    let sh = shift_pair(&tr, &path).unwrap();
    assert!(!sh.coupled);
    assert!(residual_ball_average(&sh, &path).unwrap() < 1e-12);
    // theta_0 at the origin is theta at the moving point
    for (k, th) in sh.thetas.iter().enumerate() {
        let s = path.samples.iter().find(|s| (s.tau - th.time()).abs() < 1e-12).unwrap();
        let src = tr.thetas.iter().find(|f| (f.time() - th.time()).abs() < 1e-12).unwrap();
        let want = src.evaluate_at([2.0 + s.disp[0], 3.0 + s.disp[1]]);
        assert!((th.values()[0] - want).abs() < 1e-10, "frame {k}");
    }
}

#[test]
fn unit_scale_coordinates_follow_the_rescaling() {
    let tr = desk_run(32, 0.45, 5, 1.0, 5e-3, 4).trajectory;
    let r = 0.5;
    let path = integrate_flow(&tr, ([1.0, 1.0], 0.8), r, FlowOptions::default()).unwrap();
    let d = r.powf(2.0 * 0.45);
    for s in &path.samples {
        assert!((s.s - (s.tau - 0.8) / d).abs() < 1e-12);
        assert!((s.x0[0] - s.disp[0] / r).abs() < 1e-14);
        assert!((s.xdot[1] - s.vel[1] * r.powf(2.0 * 0.45 - 1.0)).abs() < 1e-12);
        assert_eq!(s.flagged, s.x0[0].hypot(s.x0[1]) > SAFE_RADIUS);
    }
    assert!(path.samples.windows(2).all(|w| w[1].tau < w[0].tau));
    assert!(path.samples.last().unwrap().s <= -1.0 + 1e-12);
    let mut buf = Vec::new();
    path.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("s,x01,x02,speed,flag\n"));
    assert_eq!(text.lines().count(), path.samples.len() + 1);
}

#[test]
fn anchors_outside_the_record_fail_with_coverage() {
    let tr = cellular(32);
    assert!(matches!(integrate_flow(&tr, ([0.0, 0.0], 0.2), 1.0, FlowOptions::default()), Err(SqgError::Coverage(_))));
    let all = integrate_flows(&tr, &[([0.0, 0.0], 1.5), ([0.0, 0.0], 0.1)], 1.0, FlowOptions::default());
    assert!(all[0].is_ok() && all[1].is_err());
}

#[test]
fn change_of_variables_keeps_the_excess_finite_through_levels() {
    let tr = desk_run(64, 0.45, 6, 1.5, 2e-3, 10).trajectory;
    let params = ExcessParams::default_for(0.45);
    let rep = excess_after_cov(&tr, ([PI, PI], 1.4), 1.0, &params, FlowOptions::default()).unwrap();
    assert!(rep.after.total.is_finite() && rep.before.total > 0.0);
    assert!((rep.after.cyl.r - 0.25).abs() < 1e-15);
    let levels = iterate_cov(&tr, ([PI, PI], 1.4), 1.0, &params, FlowOptions { fraction: 0.5, substeps: 4 }, 2).unwrap();
    let radii: Vec<f64> = levels.iter().map(|l| l.r).collect();
    assert_eq!(radii, vec![1.0, 0.5, 0.25]);
    assert!(levels.iter().all(|l| l.excess.total.is_finite()));
}
