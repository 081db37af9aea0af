//! Fourier-multiplier operators on periodic fields.

use num_complex::Complex64;

use crate::error::{Result, SqgError};
use crate::field::{ScalarField, VectorField};

fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(SqgError::Parameter(format!("order s={s} must lie in (0,1]")));
    }
    Ok(())
}

/// (-Delta)^s f; the mean mode is annihilated.
pub fn fractional_laplacian(f: &ScalarField, s: f64) -> Result<ScalarField> {
    check_order(s)?;
    Ok(f.map_spectral(move |k1, k2, _| Complex64::new((k1 * k1 + k2 * k2).powf(s), 0.0)))
}

/// u = grad^perp (-Delta)^{-1/2} theta, with u_hat(0) = 0.
pub fn riesz_velocity(theta: &ScalarField) -> VectorField {
    let g = *theta.grid();
    let n = g.n;
    let comp = |axis: usize| {
        theta.map_spectral(move |k1, k2, idx| {
            let (i, j) = (idx % n, idx / n);
            let k = k1.hypot(k2);
            if k == 0.0 || g.is_nyquist(i) || g.is_nyquist(j) {
                return Complex64::new(0.0, 0.0);
            }
            // i xi^perp / |xi| with xi^perp = (-k2, k1)
            let m = if axis == 0 { -k2 / k } else { k1 / k };
            Complex64::new(0.0, m)
        })
    };
    VectorField { u1: comp(0), u2: comp(1) }
}

/// exp(-(|xi|^{2s} + eps |xi|^2) dt) applied to every mode.
pub fn frac_heat_step(f: &ScalarField, dt: f64, s: f64, eps_visc: f64) -> Result<ScalarField> {
    check_order(s)?;
    if !(dt >= 0.0) || !(eps_visc >= 0.0) {
        return Err(SqgError::Parameter(format!("dt={dt}, eps_visc={eps_visc} must be nonnegative")));
    }
    let t = f.time() + dt;
    Ok(f
        .map_spectral(move |k1, k2, _| {
            let k2s = k1 * k1 + k2 * k2;
            Complex64::new((-(k2s.powf(s) + eps_visc * k2s) * dt).exp(), 0.0)
        })
        .with_time(t))
}

/// L^2 / n^4 sum |xi|^{2s} |F|^2.
pub fn hs_seminorm_sq(f: &ScalarField, s: f64) -> f64 {
    let g = f.grid();
    let n2 = g.len() as f64;
    let norm = g.box_length.powi(2) / (n2 * n2);
    f.spectral()
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let k = g.k_sq(idx);
            if k == 0.0 {
                0.0
            } else {
                k.powf(s) * c.norm_sqr()
            }
        })
        .sum::<f64>()
        * norm
}

/// Spectral H^s seminorm, the periodic stand-in for the W^{s,2} seminorm.
pub fn gagliardo_seminorm_global(f: &ScalarField, s: f64) -> f64 {
    hs_seminorm_sq(f, s).sqrt()
}
