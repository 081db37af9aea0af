use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SqgError};

/// Periodic square grid `[0, L)^2` with `n` points per axis and dissipation order `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub box_length: f64,
    pub alpha: f64,
}

impl GridSpec {
    pub fn new(n: usize, box_length: f64, alpha: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(SqgError::Parameter(format!("n={n} must be a power of two >= 8")));
        }
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(SqgError::Parameter(format!("box_length={box_length} must be positive")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(SqgError::Parameter(format!("alpha={alpha} must lie in (0,1]")));
        }
        Ok(Self { n, box_length, alpha })
    }

    /// Same geometry with a different order.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.n, self.box_length, alpha)
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(n, self.box_length, self.alpha)
    }

    pub fn with_box_length(&self, box_length: f64) -> Result<Self> {
        Self::new(self.n, box_length, self.alpha)
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// b = 1 - 2 alpha.
    pub fn weight_exponent(&self) -> f64 {
        1.0 - 2.0 * self.alpha
    }

    /// Integer mode index of FFT slot `i`, in `[-n/2, n/2)`.
    pub fn mode(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n / 2
    }

    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * PI / self.box_length * self.mode(i) as f64
    }

    /// Wavenumber vectors per slot (row index is the second coordinate).
    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.wavenumber(i)).collect()
    }

    /// |xi|^2 at row-major slot `idx`.
    pub fn k_sq(&self, idx: usize) -> f64 {
        let (j, i) = (idx / self.n, idx % self.n);
        let (k1, k2) = (self.wavenumber(i), self.wavenumber(j));
        k1 * k1 + k2 * k2
    }

    /// 2/3-rule mask: keeps modes with |m| < n/3 on both axes.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let n = self.n as i64;
        let keep: Vec<bool> = (0..self.n).map(|i| 3 * self.mode(i).abs() < n).collect();
        let mut mask = vec![false; self.len()];
        for j in 0..self.n {
            for i in 0..self.n {
                mask[j * self.n + i] = keep[i] && keep[j];
            }
        }
        mask
    }

    /// Coordinates of grid point `idx` (points at `j h`).
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let h = self.spacing();
        [(idx % self.n) as f64 * h, (idx / self.n) as f64 * h]
    }

    /// Periodic minimum-image displacement `a - b`.
    pub fn min_image(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let l = self.box_length;
        let wrap = |d: f64| d - l * (d / l).round();
        [wrap(a[0] - b[0]), wrap(a[1] - b[1])]
    }

    pub fn periodic_distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let d = self.min_image(a, b);
        d[0].hypot(d[1])
    }
}

/// Unnormalized 2-D complex FFT on an `n x n` row-major buffer.
pub(crate) struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    fn transpose(&self, data: &mut [Complex64]) {
        let n = self.n;
        for j in 0..n {
            for i in (j + 1)..n {
                data.swap(j * n + i, i * n + j);
            }
        }
    }

    fn run(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        plan.process(data);
        self.transpose(data);
        plan.process(data);
        self.transpose(data);
    }

    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(&self.fwd, data);
    }

    /// Inverse including the 1/n^2 factor.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(&self.inv, data);
        let s = 1.0 / (self.n * self.n) as f64;
        data.iter_mut().for_each(|c| *c *= s);
    }
}

static PLANS: OnceLock<Mutex<HashMap<usize, Arc<Fft2>>>> = OnceLock::new();

pub(crate) fn fft2(n: usize) -> Arc<Fft2> {
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard.entry(n).or_insert_with(|| Arc::new(Fft2::new(n))).clone()
}

pub(crate) fn forward_real(n: usize, values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(n).forward(&mut buf);
    buf
}

pub(crate) fn inverse_real(n: usize, spectral: &[Complex64]) -> Vec<f64> {
    let mut buf = spectral.to_vec();
    fft2(n).inverse(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(12, 1.0, 0.5).is_err());
        assert!(GridSpec::new(4, 1.0, 0.5).is_err());
        assert!(GridSpec::new(16, -1.0, 0.5).is_err());
        assert!(GridSpec::new(16, 1.0, 1.5).is_err());
        assert!(GridSpec::new(16, 1.0, 0.0).is_err());
        assert!(GridSpec::new(16, 1.0, 1.0).is_ok());
    }

    #[test]
    fn modes_cover_symmetric_range() {
        let g = GridSpec::new(8, 1.0, 0.5).unwrap();
        let m: Vec<i64> = (0..8).map(|i| g.mode(i)).collect();
        assert_eq!(m, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert!(g.is_nyquist(4));
    }

    #[test]
    fn fft_roundtrip_and_mean_mode() {
        let n = 16;
        let v: Vec<f64> = (0..n * n).map(|k| ((k * 37 % 11) as f64).sin()).collect();
        let s = forward_real(n, &v);
        let mean = v.iter().sum::<f64>() / (n * n) as f64;
        assert!((s[0].re - mean * (n * n) as f64).abs() < 1e-10);
        let back = inverse_real(n, &s);
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn fft_matches_naive_dft() {
        let n = 8;
        let v: Vec<f64> = (0..n * n).map(|k| (k as f64 * 0.37).cos() + 0.1 * k as f64).collect();
        let s = forward_real(n, &v);
        for (ky, kx) in [(0usize, 1usize), (3, 5), (7, 2)] {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                for i in 0..n {
                    let ph = -2.0 * PI * ((kx * i + ky * j) as f64) / n as f64;
                    acc += v[j * n + i] * Complex64::from_polar(1.0, ph);
                }
            }
            assert!((acc - s[ky * n + kx]).norm() < 1e-10);
        }
    }

    #[test]
    fn min_image_wraps() {
        let g = GridSpec::new(16, 2.0, 0.5).unwrap();
        let d = g.min_image([0.1, 1.9], [1.9, 0.1]);
        assert!((d[0] - 0.2).abs() < 1e-12 && (d[1] + 0.2).abs() < 1e-12);
    }
}
