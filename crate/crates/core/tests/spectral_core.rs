use std::f64::consts::PI;

use proptest::prelude::*;
use sqg_core::spectral::{fractional_laplacian, frac_heat_step, hs_seminorm_sq, riesz_velocity};
use sqg_core::{GridSpec, ScalarField};

fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// J_0 from (1/pi) int_0^pi cos(rho sin t) dt, periodic trapezoid.
fn j0(rho: f64) -> f64 {
    let m = (rho as usize + 40) * 2;
    let h = PI / m as f64;
    (0..m).map(|i| (rho * (h * (i as f64 + 0.5)).sin()).cos()).sum::<f64>() / m as f64
}

fn gauss_legendre_8() -> ([f64; 8], [f64; 8]) {
    (
        [
            -0.960_289_856_497_536_3,
            -0.796_666_477_413_626_7,
            -0.525_532_409_916_329,
            -0.183_434_642_495_649_8,
            0.183_434_642_495_649_8,
            0.525_532_409_916_329,
            0.796_666_477_413_626_7,
            0.960_289_856_497_536_3,
        ],
        [
            0.101_228_536_290_376_26,
            0.222_381_034_453_374_47,
            0.313_706_645_877_887_3,
            0.362_683_783_378_362,
            0.362_683_783_378_362,
            0.313_706_645_877_887_3,
            0.222_381_034_453_374_47,
            0.101_228_536_290_376_26,
        ],
    )
}

/// Hypersingular value C_{2,s} p.v. int (f(x) - f(x+z)) |z|^{-2-2s} dz for f = cos(x_1) at x = 0,
/// reduced to 2 pi int_0^inf (1 - J_0(rho)) rho^{-1-2s} d rho; the oscillatory tail is removed by
/// averaging the truncation radius over one period.
fn hypersingular_unit_mode(s: f64) -> f64 {
    let (xs, ws) = gauss_legendre_8();
    let panel = |a: f64, b: f64, f: &dyn Fn(f64) -> f64| {
        let (c, d) = (0.5 * (a + b), 0.5 * (b - a));
        xs.iter().zip(&ws).map(|(x, w)| w * d * f(c + d * x)).sum::<f64>()
    };
    let integrand = |r: f64| {
        let v = if r < 1e-3 { r * r / 4.0 - r.powi(4) / 64.0 } else { 1.0 - j0(r) };
        v * r.powf(-1.0 - 2.0 * s)
    };
    // graded panels near 0 keep the r^{1-2s} endpoint behaviour resolved
    let mut acc = 0.0;
    let mut a = 0.0;
    for k in (1..=30).rev() {
        let b = 2f64.powi(-k);
        acc += panel(a, b, &integrand);
        a = b;
    }
    let r0 = 150.0;
    let mut r = a;
    while r < r0 {
        let b = (r + 0.5).min(r0);
        acc += panel(r, b, &integrand);
        r = b;
    }
    // I(R) = acc + int_{r0}^R, averaged over R in [r0, r0 + 2 pi], plus the smooth tail R^{-2s}/(2s)
    let m = 64;
    let step = 2.0 * PI / m as f64;
    let mut partial = 0.0;
    let mut avg = 0.0;
    let mut tail = 0.0;
    for i in 0..m {
        let (lo, hi) = (r0 + step * i as f64, r0 + step * (i + 1) as f64);
        let mid = panel(lo, hi, &integrand);
        avg += partial + 0.5 * mid;
        partial += mid;
        tail += (0.5 * (lo + hi)).powf(-2.0 * s) / (2.0 * s);
    }
    avg /= m as f64;
    tail /= m as f64;
    let integral = acc + avg + tail;
    let c = 4f64.powf(s) * gamma(1.0 + s) / (PI * gamma(-s).abs());
    c * 2.0 * PI * integral
}

#[test]
fn multiplier_matches_hypersingular_integral() {
    for s in [0.3, 0.45, 0.7] {
        let unit = hypersingular_unit_mode(s);
        assert!((unit - 1.0).abs() < 2e-4, "s={s}: unit mode gives {unit}");
        // general mode: the operator is |k|^{2s} times the unit-mode value
        let g = GridSpec::new(32, 2.0 * PI, 0.45).unwrap();
        let f = ScalarField::from_fn(g, 0.0, |x, y| (2.0 * x - y).sin() + 0.5 * (3.0 * y).cos()).unwrap();
        let l = fractional_laplacian(&f, s).unwrap();
        let oracle = |x: f64, y: f64| unit * (5f64.powf(s) * (2.0 * x - y).sin() + 0.5 * 9f64.powf(s) * (3.0 * y).cos());
        for idx in [0, 77, 500, 1023] {
            let p = g.point(idx);
            let o = oracle(p[0], p[1]);
            assert!((l.values()[idx] - o).abs() < 5e-4 * (1.0 + o.abs()), "s={s} idx={idx}");
        }
    }
}

/// Real-space kernel of d_j (-Delta)^{-1/2}: -(x_j - y_j) / (2 pi |x - y|^3), summed over a large periodic window.
#[test]
fn riesz_velocity_matches_real_space_kernel() {
    let n = 64;
    let g = GridSpec::new(n, 2.0 * PI, 0.45).unwrap();
    let w = 0.5;
    let bump = |x: f64, y: f64| {
        let mut s = 0.0;
        for i in -2..=2 {
            for j in -2..=2 {
                let dx = x - PI + 2.0 * PI * i as f64;
                let dy = y - PI + 2.0 * PI * j as f64;
                s += (-(dx * dx + dy * dy) / (2.0 * w * w)).exp();
            }
        }
        s
    };
    let f = ScalarField::from_fn(g, 0.0, bump).unwrap().mean_zero();
    let u = riesz_velocity(&f);
    // the odd kernel on a cell-centered lattice handles the principal value
    let h = g.spacing();
    let fine = 8;
    let hf = h / fine as f64;
    let target = [PI + 0.9, PI - 0.4];
    let mean: f64 = (0..n * n).map(|i| bump(g.point(i)[0], g.point(i)[1])).sum::<f64>() / (n * n) as f64;
    let mut r1 = 0.0;
    let mut r2 = 0.0;
    let span = 6.0 * PI;
    let m = (span / hf) as i64;
    for j in -m..=m {
        for i in -m..=m {
            let dx = (i as f64 + 0.5) * hf;
            let dy = (j as f64 + 0.5) * hf;
            let d = (dx * dx + dy * dy).sqrt();
            if d > span {
                continue;
            }
            let v = bump(target[0] - dx, target[1] - dy) - mean;
            let k = hf * hf / (2.0 * PI * d * d * d);
            r1 += dx * k * v;
            r2 += dy * k * v;
        }
    }
    // r_j = -d_j (-Delta)^{-1/2} theta, so u = (-d_2, d_1)(-Delta)^{-1/2} theta = (r_2, -r_1)
    let (e1, e2) = (u.u1.evaluate_at(target), u.u2.evaluate_at(target));
    let scale = e1.abs().max(e2.abs());
    assert!((e1 - r2).abs() < 3e-3 * scale, "{e1} vs {r2}");
    assert!((e2 + r1).abs() < 3e-3 * scale, "{e2} vs {}", -r1);
}

#[test]
fn heat_step_matches_semigroup_composition() {
    let g = GridSpec::new(32, 2.0 * PI, 0.45).unwrap();
    let f = ScalarField::from_fn(g, 0.0, |x, y| (x + 2.0 * y).cos() + (4.0 * x).sin()).unwrap();
    let two = frac_heat_step(&frac_heat_step(&f, 0.1, 0.45, 0.01).unwrap(), 0.2, 0.45, 0.01).unwrap();
    let one = frac_heat_step(&f, 0.3, 0.45, 0.01).unwrap();
    let d = two.zip_with(&one, |a, b| a - b).unwrap().sup_norm();
    assert!(d < 1e-13);
    assert!((two.time() - 0.3).abs() < 1e-15);
    // exact decay factor of one mode
    let m = 5f64.powf(0.45) + 0.01 * 5.0;
    let c = ScalarField::from_fn(g, 0.0, |x, y| (x + 2.0 * y).cos()).unwrap();
    let e = frac_heat_step(&c, 0.3, 0.45, 0.01).unwrap();
    assert!((e.l2_norm() / c.l2_norm() - (-m * 0.3f64).exp()).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn velocity_is_divergence_free_and_l2_bounded(seed in 0u64..1000, kmax in 2usize..10) {
        let g = GridSpec::new(32, 2.0 * PI, 0.45).unwrap();
        let f = ScalarField::from_fn(g, 0.0, |x, y| {
            let mut s = 0.0;
            for k in 1..=kmax {
                let ph = (seed as f64 * 0.37 + k as f64 * 1.3).sin();
                s += (k as f64 * x + ph).cos() * ((k % 3) as f64 * y - ph).sin() / k as f64;
            }
            s
        }).unwrap().mean_zero();
        let u = riesz_velocity(&f);
        prop_assert!(u.relative_divergence() < 1e-12);
        // ||u||_2 <= ||theta||_2
        let ul2 = (u.u1.l2_norm_sq() + u.u2.l2_norm_sq()).sqrt();
        prop_assert!(ul2 <= f.l2_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn seminorm_is_two_homogeneous_and_shift_invariant(lambda in -3.0f64..3.0, a in 0.0f64..6.0, b in 0.0f64..6.0, s in 0.1f64..0.9) {
        let g = GridSpec::new(16, 2.0 * PI, 0.45).unwrap();
        let f = ScalarField::from_fn(g, 0.0, |x, y| (x - y).sin() + (2.0 * y).cos()).unwrap();
        let base = hs_seminorm_sq(&f, s);
        prop_assert!((hs_seminorm_sq(&f.scaled(lambda), s) - lambda * lambda * base).abs() <= 1e-12 * (1.0 + base * lambda * lambda));
        prop_assert!((hs_seminorm_sq(&f.shifted([a, b]), s) - base).abs() <= 1e-11 * base);
        prop_assert!((hs_seminorm_sq(&f.add_constant(a), s) - base).abs() <= 1e-11 * base);
    }
}
