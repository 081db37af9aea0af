//! Ball geometry, cell quadrature, disc convolutions and time integration.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cylinder::Cylinder;
use crate::error::{Result, SqgError};
use crate::field::ScalarField;
use crate::grid::{forward_real, GridSpec};

const EDGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Ball {
    pub fn new(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.iter().all(|c| c.is_finite()) {
            return Err(SqgError::Geometry(format!("invalid ball radius {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.radius > 0.0) || self.radius > 0.5 * grid.box_length * (1.0 + 1e-12) {
            return Err(SqgError::Geometry(format!(
                "ball radius {} exceeds half-period {}",
                self.radius,
                0.5 * grid.box_length
            )));
        }
        Ok(())
    }
}

/// Cell in a ball: flat index and physical offset from the center.
#[derive(Debug, Clone, Copy)]
pub struct BallCell {
    pub idx: usize,
    pub offset: [f64; 2],
}

/// Grid points within `ball` (inclusive, measured in cell units so the set is scale-free).
pub fn ball_cells(grid: &GridSpec, ball: &Ball) -> Result<Vec<BallCell>> {
    ball.validate(grid)?;
    let n = grid.n as i64;
    let h = grid.spacing();
    let (cx, cy) = (ball.center[0] / h, ball.center[1] / h);
    let rr = ball.radius / h;
    let lim = rr * rr + EDGE_TOL * rr.max(1.0).powi(2);
    let span = |c: f64| -> Vec<i64> {
        let lo = (c - rr).ceil() as i64 - 1;
        let hi = (c + rr).floor() as i64 + 1;
        if hi - lo + 1 >= n {
            let base = (c - 0.5 * n as f64).ceil() as i64;
            (base..base + n).collect()
        } else {
            (lo..=hi).collect()
        }
    };
    let (xs, ys) = (span(cx), span(cy));
    let mut out = Vec::new();
    for &j in &ys {
        let dy = j as f64 - cy;
        for &i in &xs {
            let dx = i as f64 - cx;
            if dx * dx + dy * dy <= lim {
                let idx = (j.rem_euclid(n) * n + i.rem_euclid(n)) as usize;
                out.push(BallCell { idx, offset: [dx * h, dy * h] });
            }
        }
    }
    if out.is_empty() {
        return Err(SqgError::Geometry(format!("ball of radius {} contains no grid point", ball.radius)));
    }
    Ok(out)
}

pub fn ball_average(f: &ScalarField, ball: &Ball) -> Result<f64> {
    let cells = ball_cells(f.grid(), ball)?;
    Ok(cells.iter().map(|c| f.values()[c.idx]).sum::<f64>() / cells.len() as f64)
}

/// (h^2 sum_{ball} |f|^p)^{1/p}.
pub fn lp_norm_ball(f: &ScalarField, ball: &Ball, p: f64) -> Result<f64> {
    let cells = ball_cells(f.grid(), ball)?;
    let s: f64 = cells.iter().map(|c| f.values()[c.idx].abs().powf(p)).sum();
    Ok((f.grid().cell_area() * s).powf(1.0 / p))
}

/// Spacetime L^p norm over a cylinder; frames carry their own times.
pub fn lp_norm_cylinder(frames: &[ScalarField], cyl: &Cylinder, p: f64) -> Result<f64> {
    let first = frames.first().ok_or_else(|| SqgError::Coverage("no frames".into()))?;
    let cells = ball_cells(first.grid(), &cyl.ball())?;
    let h2 = first.grid().cell_area();
    let times: Vec<f64> = frames.iter().map(|f| f.time()).collect();
    let (a, b) = cyl.time_interval();
    let total = time_integral(&times, a, b, |k| {
        h2 * cells.iter().map(|c| frames[k].values()[c.idx].abs().powf(p)).sum::<f64>()
    })?;
    Ok(total.powf(1.0 / p))
}

/// Frame indices and weights realizing the trapezoid rule on `[a, b]`,
/// with linear interpolation of the integrand at non-frame endpoints.
pub fn time_weights(times: &[f64], a: f64, b: f64) -> Result<Vec<(usize, f64)>> {
    if times.is_empty() {
        return Err(SqgError::Coverage("no frames".into()));
    }
    let (t0, t1) = (times[0], *times.last().unwrap());
    let tol = 1e-9 * (b - a).abs().max(t1 - t0).max(1e-300);
    if a < t0 - tol || b > t1 + tol {
        return Err(SqgError::Coverage(format!(
            "frames cover [{t0}, {t1}] but [{a}, {b}] was requested"
        )));
    }
    if b <= a {
        return Ok(Vec::new());
    }
    let a = a.max(t0);
    let b = b.min(t1);
    // sample points: a, interior frames, b; each expressed as a combination of frames
    let locate = |t: f64| -> Vec<(usize, f64)> {
        if let Some(k) = times.iter().position(|&s| (s - t).abs() <= tol) {
            return vec![(k, 1.0)];
        }
        let k = times.partition_point(|&s| s < t).clamp(1, times.len() - 1);
        let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
        vec![(k - 1, 1.0 - w), (k, w)]
    };
    let mut nodes: Vec<(f64, Vec<(usize, f64)>)> = vec![(a, locate(a))];
    for (k, &s) in times.iter().enumerate() {
        if s > a + tol && s < b - tol {
            nodes.push((s, vec![(k, 1.0)]));
        }
    }
    nodes.push((b, locate(b)));
    let mut acc: HashMap<usize, f64> = HashMap::new();
    for w in nodes.windows(2) {
        let half = 0.5 * (w[1].0 - w[0].0);
        for node in [&w[0].1, &w[1].1] {
            for &(k, c) in node {
                *acc.entry(k).or_insert(0.0) += half * c;
            }
        }
    }
    let mut out: Vec<(usize, f64)> = acc.into_iter().collect();
    out.sort_by_key(|e| e.0);
    Ok(out)
}

/// Trapezoid integral of a per-frame quantity over `[a, b]`.
pub fn time_integral(times: &[f64], a: f64, b: f64, g: impl Fn(usize) -> f64 + Sync) -> Result<f64> {
    let w = time_weights(times, a, b)?;
    let vals: Vec<f64> = w.par_iter().map(|&(k, _)| g(k)).collect();
    Ok(w.iter().zip(vals).map(|(&(_, c), v)| c * v).sum())
}

/// Frames whose time lies in `[a, b]` (with tolerance).
pub fn frames_in(times: &[f64], a: f64, b: f64) -> Vec<usize> {
    let tol = 1e-9 * (b - a).abs().max(1e-12);
    (0..times.len()).filter(|&k| times[k] >= a - tol && times[k] <= b + tol).collect()
}

/// Offsets (in cells) of the discrete disc of radius `radius_cells`.
pub fn disc_offsets(radius_cells: f64) -> Vec<(i64, i64)> {
    let lim = radius_cells * radius_cells + EDGE_TOL * radius_cells.max(1.0).powi(2);
    let k = radius_cells.floor() as i64 + 1;
    let mut out = Vec::new();
    for dj in -k..=k {
        for di in -k..=k {
            if ((di * di + dj * dj) as f64) <= lim {
                out.push((di, dj));
            }
        }
    }
    out
}

type KernelKey = (usize, u64);
static DISC_KERNELS: OnceLock<Mutex<HashMap<KernelKey, Arc<Vec<Complex64>>>>> = OnceLock::new();

/// Fourier transform of the normalized disc indicator.
pub fn disc_kernel_spectrum(grid: &GridSpec, radius: f64) -> Arc<Vec<Complex64>> {
    let rc = radius / grid.spacing();
    let key = (grid.n, rc.to_bits());
    let cache = DISC_KERNELS.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(k) = cache.lock().expect("kernel cache").get(&key) {
        return k.clone();
    }
    let n = grid.n as i64;
    let offs = disc_offsets(rc);
    let mut k = vec![0.0; grid.len()];
    let w = 1.0 / offs.len() as f64;
    for (di, dj) in offs {
        k[(dj.rem_euclid(n) * n + di.rem_euclid(n)) as usize] += w;
    }
    let spec = Arc::new(forward_real(grid.n, &k));
    cache.lock().expect("kernel cache").insert(key, spec.clone());
    spec
}

/// Ball averages of `f` centered at every grid point.
pub fn disc_average_field(f: &ScalarField, radius: f64) -> ScalarField {
    let k = disc_kernel_spectrum(f.grid(), radius);
    f.map_spectral(move |_, _, idx| k[idx])
}

/// c_s = integral over the unit cell of |w|^{-2s}.
pub fn ring_constant(s: f64) -> f64 {
    let e = 2.0 - 2.0 * s;
    let g = |phi: f64| (0.5 / phi.cos()).powf(e) / e;
    8.0 * simpson(g, 0.0, PI / 4.0, 2000)
}

/// Integral over the unit cell of |e . w|^p |w|^{-2-sp}, e at angle `psi`.
pub fn directional_cell_constant(s: f64, p: f64, psi: f64) -> f64 {
    let e = p - s * p;
    let m = 4096;
    let d = 2.0 * PI / m as f64;
    (0..m)
        .map(|k| {
            let phi = (k as f64 + 0.5) * d;
            let rho = 0.5 / phi.cos().abs().max(phi.sin().abs());
            (phi - psi).cos().abs().powf(p) * rho.powf(e) / e
        })
        .sum::<f64>()
        * d
}

pub(crate) fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let m = m + m % 2;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for k in 1..m {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// W^{s,p} seminorm over a ball by direct double quadrature with a local cell correction.
pub fn gagliardo_seminorm_ball(f: &ScalarField, ball: &Ball, s: f64, p: f64) -> Result<f64> {
    if p < 1.0 {
        return Err(SqgError::Parameter(format!("p={p} must be >= 1")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(SqgError::Parameter(format!("s={s} must lie in (0,1)")));
    }
    let g = f.grid();
    let cells = ball_cells(g, ball)?;
    let h = g.spacing();
    let h2 = g.cell_area();
    let grad = f.gradient();
    let vals: Vec<f64> = cells.iter().map(|c| f.values()[c.idx]).collect();
    let expo = 1.0 + 0.5 * s * p;
    let iso = (p == 2.0).then(|| 0.5 * ring_constant(s));
    let sum: f64 = (0..cells.len())
        .into_par_iter()
        .map(|a| {
            let (fa, xa) = (vals[a], cells[a].offset);
            let mut acc = 0.0;
            for (b, cb) in cells.iter().enumerate() {
                if a == b {
                    continue;
                }
                let (dx, dy) = (cb.offset[0] - xa[0], cb.offset[1] - xa[1]);
                acc += (fa - vals[b]).abs().powf(p) / (dx * dx + dy * dy).powf(expo);
            }
            let (gx, gy) = (grad[0].values()[cells[a].idx], grad[1].values()[cells[a].idx]);
            let gm = gx.hypot(gy);
            let corr = if gm == 0.0 {
                0.0
            } else {
                let c = iso.unwrap_or_else(|| directional_cell_constant(s, p, gy.atan2(gx)));
                gm.powf(p) * h.powf(p - s * p) * c
            };
            h2 * h2 * acc + h2 * corr
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(sum.powf(1.0 / p))
}
