use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Result, SqgError};
use crate::grid::{forward_real, inverse_real, GridSpec};

/// Time slice of a periodic scalar with its Fourier coefficients.
///
/// `spectral` holds the unnormalized DFT, so slot 0 equals `mean * n^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
    spectral: Vec<Complex64>,
    time: f64,
}

fn check_finite(values: &[f64]) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(SqgError::Data(format!("non-finite sample at index {i}")));
    }
    Ok(())
}

impl ScalarField {
    pub fn from_values(grid: GridSpec, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(SqgError::Data(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        check_finite(&values)?;
        let spectral = forward_real(grid.n, &values);
        Ok(Self { grid, values, spectral, time })
    }

    /// Real part of the inverse transform, re-synchronized.
    pub fn from_spectral(grid: GridSpec, spectral: &[Complex64], time: f64) -> Result<Self> {
        if spectral.len() != grid.len() {
            return Err(SqgError::Data("spectral length mismatch".into()));
        }
        Self::from_values(grid, inverse_real(grid.n, spectral), time)
    }

    pub fn from_fn(grid: GridSpec, time: f64, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<Self> {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let p = grid.point(idx);
                f(p[0], p[1])
            })
            .collect();
        Self::from_values(grid, values, time)
    }

    pub fn zeros(grid: GridSpec, time: f64) -> Self {
        Self::constant(grid, 0.0, time)
    }

    pub fn constant(grid: GridSpec, c: f64, time: f64) -> Self {
        let mut spectral = vec![Complex64::new(0.0, 0.0); grid.len()];
        spectral[0] = Complex64::new(c * grid.len() as f64, 0.0);
        Self { grid, values: vec![c; grid.len()], spectral, time }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spectral(&self) -> &[Complex64] {
        &self.spectral
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn set_time(&mut self, time: f64) {
        self.time = time;
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        let n = self.grid.n;
        self.values[(j % n) * n + (i % n)]
    }

    /// Apply a multiplier `m(k1, k2, slot)` to every coefficient.
    pub fn map_spectral(&self, m: impl Fn(f64, f64, usize) -> Complex64 + Sync) -> ScalarField {
        let g = self.grid;
        let k = g.wavenumbers();
        let n = g.n;
        let spec: Vec<Complex64> = self
            .spectral
            .par_iter()
            .enumerate()
            .map(|(idx, c)| c * m(k[idx % n], k[idx / n], idx))
            .collect();
        ScalarField::from_spectral(g, &spec, self.time).expect("finite multiplier output")
    }

    pub fn mean(&self) -> f64 {
        self.spectral[0].re / self.grid.len() as f64
    }

    /// h^2 sum f^2.
    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.cell_area() * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// L^2 norm squared computed from the coefficients.
    pub fn spectral_l2_norm_sq(&self) -> f64 {
        let n2 = self.grid.len() as f64;
        self.grid.box_length.powi(2) / (n2 * n2) * self.spectral.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        (self.grid.cell_area() * self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup norm of the trigonometric interpolant sampled on a `factor`-times finer grid.
    pub fn sup_norm_refined(&self, factor: usize) -> f64 {
        if factor <= 1 {
            return self.sup_norm();
        }
        self.resample(self.grid.n * factor.next_power_of_two()).sup_norm()
    }

    /// Spectral gradient.
    pub fn gradient(&self) -> [ScalarField; 2] {
        let n = self.grid.n;
        let g = self.grid;
        let d = |axis: usize| {
            self.map_spectral(move |k1, k2, idx| {
                let (i, j) = (idx % n, idx / n);
                if g.is_nyquist(i) || g.is_nyquist(j) {
                    return Complex64::new(0.0, 0.0);
                }
                Complex64::new(0.0, if axis == 0 { k1 } else { k2 })
            })
        };
        [d(0), d(1)]
    }

    /// |grad f|^2 per point.
    pub fn gradient_sq(&self) -> Vec<f64> {
        let [gx, gy] = self.gradient();
        gx.values.iter().zip(&gy.values).map(|(a, b)| a * a + b * b).collect()
    }

    /// `g(x) = f(x + a)` via Fourier phase shift.
    pub fn shifted(&self, a: [f64; 2]) -> ScalarField {
        self.map_spectral(move |k1, k2, _| Complex64::from_polar(1.0, k1 * a[0] + k2 * a[1]))
    }

    /// Trigonometric interpolant at an arbitrary point.
    pub fn evaluate_at(&self, p: [f64; 2]) -> f64 {
        let n = self.grid.n;
        let k = self.grid.wavenumbers();
        let ex: Vec<Complex64> = k.iter().map(|&kk| Complex64::from_polar(1.0, kk * p[0])).collect();
        let ey: Vec<Complex64> = k.iter().map(|&kk| Complex64::from_polar(1.0, kk * p[1])).collect();
        let mut acc = 0.0;
        for j in 0..n {
            let row = &self.spectral[j * n..(j + 1) * n];
            let mut r = Complex64::new(0.0, 0.0);
            for i in 0..n {
                r += row[i] * ex[i];
            }
            acc += (r * ey[j]).re;
        }
        acc / self.grid.len() as f64
    }

    /// Bilinear interpolation of the samples.
    pub fn sample_bilinear(&self, p: [f64; 2]) -> f64 {
        let h = self.grid.spacing();
        let n = self.grid.n as i64;
        let (fx, fy) = (p[0] / h, p[1] / h);
        let (i0, j0) = (fx.floor(), fy.floor());
        let (wx, wy) = (fx - i0, fy - j0);
        let idx = |i: i64, j: i64| (i.rem_euclid(n) as usize, j.rem_euclid(n) as usize);
        let (i0, j0) = (i0 as i64, j0 as i64);
        let v = |i: i64, j: i64| {
            let (a, b) = idx(i, j);
            self.at(a, b)
        };
        (1.0 - wx) * (1.0 - wy) * v(i0, j0)
            + wx * (1.0 - wy) * v(i0 + 1, j0)
            + (1.0 - wx) * wy * v(i0, j0 + 1)
            + wx * wy * v(i0 + 1, j0 + 1)
    }

    /// Band-limited resampling onto an `m x m` grid of the same box.
    pub fn resample(&self, m: usize) -> ScalarField {
        let n = self.grid.n;
        let target = self.grid.with_n(m).expect("valid target grid");
        if m == n {
            return self.clone();
        }
        let scale = (m * m) as f64 / (n * n) as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); m * m];
        let slots = |i: usize| -> Vec<(usize, f64)> {
            let md = self.grid.mode(i);
            if m > n {
                if self.grid.is_nyquist(i) {
                    vec![((m as i64 + md) as usize, 0.5), ((-md) as usize, 0.5)]
                } else {
                    vec![(md.rem_euclid(m as i64) as usize, 1.0)]
                }
            } else if 2 * md.abs() < m as i64 {
                vec![(md.rem_euclid(m as i64) as usize, 1.0)]
            } else {
                vec![]
            }
        };
        for j in 0..n {
            let sj = slots(j);
            for i in 0..n {
                let c = self.spectral[j * n + i];
                for &(ti, wi) in &slots(i) {
                    for &(tj, wj) in &sj {
                        out[tj * m + ti] += c * (wi * wj * scale);
                    }
                }
            }
        }
        ScalarField::from_spectral(target, &out, self.time).expect("finite resample")
    }

    /// theta_r(x, t) = r^{2 alpha - 1} theta(r x, r^{2 alpha} t) on the box `L / r`.
    pub fn rescaled(&self, r: f64) -> Result<ScalarField> {
        let g = self.grid.with_box_length(self.grid.box_length / r)?;
        let a = self.grid.alpha;
        let f = r.powf(2.0 * a - 1.0);
        ScalarField::from_values(
            g,
            self.values.iter().map(|v| v * f).collect(),
            self.time / r.powf(2.0 * a),
        )
    }

    pub fn scaled(&self, lambda: f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| v * lambda).collect(),
            spectral: self.spectral.iter().map(|c| c * lambda).collect(),
            time: self.time,
        }
    }

    pub fn add_constant(&self, c: f64) -> ScalarField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v += c);
        out.spectral[0] += Complex64::new(c * self.grid.len() as f64, 0.0);
        out
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        if self.grid != other.grid {
            return Err(SqgError::Data("grid mismatch".into()));
        }
        ScalarField::from_values(
            self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
            self.time,
        )
    }

    pub fn mean_zero(&self) -> ScalarField {
        self.add_constant(-self.mean())
    }
}

/// Velocity field on the same grid as its scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub u1: ScalarField,
    pub u2: ScalarField,
}

impl VectorField {
    pub fn new(u1: ScalarField, u2: ScalarField) -> Result<Self> {
        if u1.grid() != u2.grid() {
            return Err(SqgError::Data("component grids differ".into()));
        }
        Ok(Self { u1, u2 })
    }

    pub fn zeros(grid: GridSpec, time: f64) -> Self {
        Self { u1: ScalarField::zeros(grid, time), u2: ScalarField::zeros(grid, time) }
    }

    pub fn uniform(grid: GridSpec, v: [f64; 2], time: f64) -> Self {
        Self { u1: ScalarField::constant(grid, v[0], time), u2: ScalarField::constant(grid, v[1], time) }
    }

    pub fn grid(&self) -> &GridSpec {
        self.u1.grid()
    }

    pub fn time(&self) -> f64 {
        self.u1.time()
    }

    pub fn with_time(self, t: f64) -> Self {
        Self { u1: self.u1.with_time(t), u2: self.u2.with_time(t) }
    }

    pub fn components(&self) -> [&ScalarField; 2] {
        [&self.u1, &self.u2]
    }

    /// Pointwise |u|.
    pub fn magnitude(&self) -> Vec<f64> {
        self.u1.values().iter().zip(self.u2.values()).map(|(a, b)| a.hypot(*b)).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.magnitude().into_iter().fold(0.0, f64::max)
    }

    /// (h^2 sum |u|^q)^{1/q}.
    pub fn lq_norm(&self, q: f64) -> f64 {
        let h2 = self.grid().cell_area();
        (h2 * self.magnitude().iter().map(|m| m.powf(q)).sum::<f64>()).powf(1.0 / q)
    }

    /// max |i xi . u_hat| relative to max |xi| |u_hat|.
    pub fn relative_divergence(&self) -> f64 {
        let g = *self.grid();
        let n = g.n;
        let (s1, s2) = (self.u1.spectral(), self.u2.spectral());
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for idx in 0..g.len() {
            let (k1, k2) = (g.wavenumber(idx % n), g.wavenumber(idx / n));
            num = num.max((s1[idx] * k1 + s2[idx] * k2).norm());
            den = den.max(k1.hypot(k2) * (s1[idx].norm_sqr() + s2[idx].norm_sqr()).sqrt());
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    pub fn shifted(&self, a: [f64; 2]) -> VectorField {
        VectorField { u1: self.u1.shifted(a), u2: self.u2.shifted(a) }
    }

    pub fn rescaled(&self, r: f64) -> Result<VectorField> {
        Ok(VectorField { u1: self.u1.rescaled(r)?, u2: self.u2.rescaled(r)? })
    }

    pub fn scaled(&self, lambda: f64) -> VectorField {
        VectorField { u1: self.u1.scaled(lambda), u2: self.u2.scaled(lambda) }
    }

    pub fn add_uniform(&self, v: [f64; 2]) -> VectorField {
        VectorField { u1: self.u1.add_constant(v[0]), u2: self.u2.add_constant(v[1]) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> GridSpec {
        GridSpec::new(32, 2.0 * PI, 0.45).unwrap()
    }

    #[test]
    fn rejects_non_finite() {
        let g = grid();
        let mut v = vec![0.0; g.len()];
        v[3] = f64::NAN;
        assert!(matches!(ScalarField::from_values(g, v, 0.0), Err(SqgError::Data(_))));
    }

    #[test]
    fn parseval_holds() {
        let f = ScalarField::from_fn(grid(), 0.0, |x, y| (2.0 * x).sin() * y.cos() + 0.3).unwrap();
        let a = f.l2_norm_sq();
        assert!((a - f.spectral_l2_norm_sq()).abs() < 1e-12 * a);
        // sin^2 cos^2 averages to 1/4 over the box
        let exact = (2.0 * PI).powi(2) * (0.25 + 0.09);
        assert!((a - exact).abs() < 1e-10);
    }

    #[test]
    fn shift_and_evaluate_are_exact_on_trig_polynomials() {
        let f = ScalarField::from_fn(grid(), 0.0, |x, y| (3.0 * x + y).cos()).unwrap();
        let a = [0.37, -1.1];
        let g = f.shifted(a);
        let p = g.grid().point(77);
        assert!((g.values()[77] - (3.0 * (p[0] + a[0]) + p[1] + a[1]).cos()).abs() < 1e-12);
        let q = [0.123, 4.56];
        assert!((f.evaluate_at(q) - (3.0 * q[0] + q[1]).cos()).abs() < 1e-12);
    }

    #[test]
    fn resample_preserves_band_limited_content() {
        let f = ScalarField::from_fn(grid(), 0.0, |x, y| (2.0 * x).sin() + (5.0 * y - x).cos()).unwrap();
        let fine = f.resample(64);
        for idx in [0usize, 100, 2049, 4095] {
            let p = fine.grid().point(idx);
            let exact = (2.0 * p[0]).sin() + (5.0 * p[1] - p[0]).cos();
            assert!((fine.values()[idx] - exact).abs() < 1e-12);
        }
        let back = fine.resample(32);
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_sine() {
        let f = ScalarField::from_fn(grid(), 0.0, |x, _| (2.0 * x).sin()).unwrap();
        let [gx, gy] = f.gradient();
        let p = f.grid().point(45);
        assert!((gx.values()[45] - 2.0 * (2.0 * p[0]).cos()).abs() < 1e-12);
        assert!(gy.sup_norm() < 1e-12);
    }

    #[test]
    fn bilinear_exact_on_grid_points() {
        let f = ScalarField::from_fn(grid(), 0.0, |x, y| x.sin() * y.cos()).unwrap();
        let p = f.grid().point(300);
        assert!((f.sample_bilinear(p) - f.values()[300]).abs() < 1e-14);
    }
}
