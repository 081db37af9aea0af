//! Maximal functions, the D_{alpha,2} square function and Poincare-type ratio checks.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cylinder::Cylinder;
use crate::error::{Result, SqgError};
use crate::excess::local_dissipative_energy_from;
use crate::extension::{extend_to, weighted_dirichlet_energy, ExtensionRegion, VerticalGrid};
use crate::field::ScalarField;
use crate::grid::{forward_real, GridSpec};
use crate::quadrature::{
    ball_average, ball_cells, disc_average_field, disc_offsets, frames_in, gagliardo_seminorm_ball, ring_constant,
    time_integral, Ball,
};
use crate::solver::Trajectory;

/// Dyadic radii standing in for the supremum over r > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusLadder {
    radii: Vec<f64>,
}

impl RadiusLadder {
    /// r_min 2^j up to L/4; at least four rungs and r_min >= 2 cells.
    pub fn new(grid: &GridSpec, r_min: f64) -> Result<Self> {
        let h = grid.spacing();
        if r_min < 2.0 * h * (1.0 - 1e-12) {
            return Err(SqgError::Parameter(format!("r_min={r_min} below two cells ({})", 2.0 * h)));
        }
        let radii = Self::dyadic(r_min, 0.25 * grid.box_length);
        if radii.len() < 4 {
            return Err(SqgError::Parameter(format!(
                "ladder from {r_min} to L/4 has {} rungs, need 4 (refine the grid)",
                radii.len()
            )));
        }
        Ok(Self { radii })
    }

    pub fn default_for(grid: &GridSpec) -> Result<Self> {
        Self::new(grid, 2.0 * grid.spacing())
    }

    /// r/4 2^j up to L/4, the range used by the nonlocal excess.
    pub fn for_nonlocal(r: f64, grid: &GridSpec) -> Result<Self> {
        let radii = Self::dyadic(0.25 * r, 0.25 * grid.box_length);
        if radii.is_empty() {
            return Err(SqgError::Geometry(format!("r/4={} exceeds L/4", 0.25 * r)));
        }
        Ok(Self { radii })
    }

    pub fn from_radii(mut radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
            return Err(SqgError::Parameter("radii must be positive and nonempty".into()));
        }
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { radii })
    }

    fn dyadic(r0: f64, top: f64) -> Vec<f64> {
        let mut v = Vec::new();
        let mut r = r0;
        while r <= top * (1.0 + 1e-12) {
            v.push(r);
            r *= 2.0;
        }
        v
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    Maximal,
    SharpAlpha,
    SharpAlphaQ,
    DAlpha2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub kind: DiagnosticKind,
}

impl DiagnosticField {
    pub fn to_field(&self, time: f64) -> ScalarField {
        ScalarField::from_values(self.grid, self.values.clone(), time).expect("finite diagnostic")
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// h^2 sum v^e.
    pub fn integral_pow(&self, e: f64) -> f64 {
        self.grid.cell_area() * self.values.iter().map(|v| v.powf(e)).sum::<f64>()
    }
}

/// sup over rungs (and the cell itself) of ball averages of |f|.
pub fn maximal(f: &ScalarField, ladder: &RadiusLadder) -> DiagnosticField {
    let g = *f.grid();
    let abs = ScalarField::from_values(g, f.values().iter().map(|v| v.abs()).collect(), f.time()).unwrap();
    let mut out = abs.values().to_vec();
    for &r in ladder.radii() {
        let avg = disc_average_field(&abs, r);
        out.iter_mut().zip(avg.values()).for_each(|(o, a)| *o = o.max(a.max(0.0)));
    }
    DiagnosticField { grid: g, values: out, kind: DiagnosticKind::Maximal }
}

/// Kernel weights h^2 |z|^{-2-2s} over the fundamental domain, self cell excluded.
fn square_kernel(grid: &GridSpec, s: f64) -> Vec<(i64, i64, f64)> {
    let n = grid.n as i64;
    let h = grid.spacing();
    let h2 = grid.cell_area();
    let mut k = Vec::with_capacity((n * n - 1) as usize);
    for dj in -n / 2..n / 2 {
        for di in -n / 2..n / 2 {
            if di == 0 && dj == 0 {
                continue;
            }
            let d2 = ((di * di + dj * dj) as f64) * h * h;
            k.push((di, dj, h2 * d2.powf(-1.0 - s)));
        }
    }
    k
}

/// Squared D_{s,2} at every point.
///
/// The lattice sum expands to f^2 W - 2 f (w * f) + w * f^2, evaluated with two circular convolutions.
pub fn square_function_sq(f: &ScalarField, s: f64) -> Vec<f64> {
    let g = *f.grid();
    let n = g.n as i64;
    let mut k = vec![0.0; g.len()];
    let mut total = 0.0;
    for (di, dj, w) in square_kernel(&g, s) {
        k[(dj.rem_euclid(n) * n + di.rem_euclid(n)) as usize] += w;
        total += w;
    }
    let kh = forward_real(g.n, &k);
    let v = f.values();
    let conv = |vals: &[f64]| -> Vec<f64> {
        let spec: Vec<Complex64> = forward_real(g.n, vals).iter().zip(&kh).map(|(a, b)| a * b).collect();
        ScalarField::from_spectral(g, &spec, 0.0).expect("grid-sized spectrum").values().to_vec()
    };
    let wf = conv(v);
    let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
    let wf2 = conv(&sq);
    let corr = 0.5 * ring_constant(s) * g.spacing().powf(2.0 - 2.0 * s);
    let grad = f.gradient_sq();
    (0..g.len()).map(|i| (sq[i] * total - 2.0 * v[i] * wf[i] + wf2[i]).max(0.0) + corr * grad[i]).collect()
}

/// D_{alpha,2} f with alpha taken from the grid.
pub fn d_alpha_2(f: &ScalarField) -> DiagnosticField {
    let v = square_function_sq(f, f.grid().alpha).into_iter().map(f64::sqrt).collect();
    DiagnosticField { grid: *f.grid(), values: v, kind: DiagnosticKind::DAlpha2 }
}

/// Gagliardo W^{s,2} seminorm squared by the same quadrature, summed offset-major.
pub fn gagliardo_quadrature_global_sq(f: &ScalarField, s: f64) -> f64 {
    let g = *f.grid();
    let n = g.n as i64;
    let v = f.values();
    let h2 = g.cell_area();
    let kern = square_kernel(&g, s);
    let pair: f64 = kern
        .par_iter()
        .map(|&(di, dj, w)| {
            let mut acc = 0.0;
            for j in 0..n {
                for i in 0..n {
                    let o = ((j + dj).rem_euclid(n) * n + (i + di).rem_euclid(n)) as usize;
                    let d = v[(j * n + i) as usize] - v[o];
                    acc += d * d;
                }
            }
            w * acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let corr = 0.5 * ring_constant(s) * g.spacing().powf(2.0 - 2.0 * s);
    h2 * (pair + corr * f.gradient_sq().iter().sum::<f64>())
}

/// sup_r r^{-weight} avg_{B_r} |f - [f]_{B_r}|^power, per point.
fn oscillation_sup(f: &ScalarField, ladder: &RadiusLadder, power: f64, weight: f64) -> Vec<f64> {
    let g = *f.grid();
    let n = g.n as i64;
    let h = g.spacing();
    let v = f.values();
    let mut out = vec![0.0f64; g.len()];
    for &r in ladder.radii() {
        let avg = disc_average_field(f, r);
        let offs = disc_offsets(r / h);
        let scale = r.powf(-weight) / offs.len() as f64;
        let a = avg.values();
        let pad = offs.iter().map(|&(di, dj)| di.abs().max(dj.abs())).max().unwrap_or(0);
        let m = n + 2 * pad;
        let mut padded = vec![0.0; (m * m) as usize];
        for pj in 0..m {
            for pi in 0..m {
                padded[(pj * m + pi) as usize] = v[((pj - pad).rem_euclid(n) * n + (pi - pad).rem_euclid(n)) as usize];
            }
        }
        let mut rows: Vec<(i64, i64, i64)> = Vec::new();
        for &(di, dj) in &offs {
            match rows.iter_mut().find(|row| row.0 == dj) {
                Some(row) => {
                    row.1 = row.1.min(di);
                    row.2 = row.2.max(di);
                }
                None => rows.push((dj, di, di)),
            }
        }
        debug_assert_eq!(rows.iter().map(|r| (r.2 - r.1 + 1) as usize).sum::<usize>(), offs.len());
        let rung: Vec<f64> = (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j) = ((idx as i64) % n, (idx as i64) / n);
                let mean = a[idx];
                let mut acc = 0.0;
                for &(dj, lo, hi) in &rows {
                    let base = ((j + dj + pad) * m + i + pad) as usize;
                    let seg = &padded[(base as i64 + lo) as usize..=(base as i64 + hi) as usize];
                    if power == 1.0 {
                        acc += seg.iter().map(|x| (x - mean).abs()).sum::<f64>();
                    } else {
                        acc += seg.iter().map(|x| (x - mean).abs().powf(power)).sum::<f64>();
                    }
                }
                acc * scale
            })
            .collect();
        out.iter_mut().zip(rung).for_each(|(o, x)| *o = f64::max(*o, x));
    }
    out
}

/// f^#_alpha.
pub fn sharp_maximal_alpha(f: &ScalarField, ladder: &RadiusLadder) -> DiagnosticField {
    let a = f.grid().alpha;
    DiagnosticField { grid: *f.grid(), values: oscillation_sup(f, ladder, 1.0, a), kind: DiagnosticKind::SharpAlpha }
}

/// 2 (1 - 1/q^2).
pub fn sharp_power(q: f64) -> f64 {
    2.0 * (1.0 - 1.0 / (q * q))
}

/// f^#_{alpha,q}.
pub fn sharp_maximal_alpha_q(f: &ScalarField, ladder: &RadiusLadder, q: f64) -> Result<DiagnosticField> {
    if !(q > 2f64.sqrt()) {
        return Err(SqgError::Parameter(format!("q={q} must exceed sqrt(2)")));
    }
    let a = f.grid().alpha;
    let beta = sharp_power(q);
    Ok(DiagnosticField {
        grid: *f.grid(),
        values: oscillation_sup(f, ladder, beta, a * beta),
        kind: DiagnosticKind::SharpAlphaQ,
    })
}

/// Constant C with f^#_{alpha,q} <= C M((D_{alpha,2} f)^beta) on this grid and ladder.
pub fn jensen_constant(grid: &GridSpec, ladder: &RadiusLadder, q: f64) -> f64 {
    let a = grid.alpha;
    let beta = sharp_power(q);
    ladder
        .radii()
        .iter()
        .map(|&r| {
            let count = disc_offsets(r / grid.spacing()).len() as f64;
            ((2.0 * r).powf(2.0 + 2.0 * a) / (count * grid.cell_area() * r.powf(2.0 * a))).powf(0.5 * beta)
        })
        .fold(0.0, f64::max)
}

/// Continuum value (2^{2+2 alpha} / pi)^{1 - 1/q^2} of the same constant.
pub fn jensen_constant_continuum(alpha: f64, q: f64) -> f64 {
    (2f64.powf(2.0 + 2.0 * alpha) / PI).powf(0.5 * sharp_power(q))
}

/// Pointwise check f^#_{alpha,q} <= C M(D^beta); returns the largest observed ratio.
pub fn sharp_domination_ratio(f: &ScalarField, ladder: &RadiusLadder, q: f64) -> Result<f64> {
    let sharp = sharp_maximal_alpha_q(f, ladder, q)?;
    let beta = sharp_power(q);
    let dpow: Vec<f64> = square_function_sq(f, f.grid().alpha).into_iter().map(|d| d.powf(0.5 * beta)).collect();
    let md = maximal(&ScalarField::from_values(*f.grid(), dpow, f.time())?, ladder);
    Ok(sharp
        .values
        .iter()
        .zip(&md.values)
        .map(|(s, m)| if *m > 0.0 { s / m } else if *s > 0.0 { f64::INFINITY } else { 0.0 })
        .fold(0.0, f64::max))
}

/// (||f^#_alpha||_2^2 + ||f^#_{alpha,q}||_gamma^gamma) / [f]^2 with gamma = 1 + 1/(q^2 - 1).
pub fn sharp_maximal_global_bound(f: &ScalarField, q: f64) -> Result<f64> {
    let ladder = RadiusLadder::default_for(f.grid())?;
    sharp_maximal_global_bound_with(f, q, &ladder)
}

pub fn sharp_maximal_global_bound_with(f: &ScalarField, q: f64, ladder: &RadiusLadder) -> Result<f64> {
    let semi = gagliardo_quadrature_global_sq(f, f.grid().alpha);
    if semi == 0.0 {
        return Ok(0.0);
    }
    let gamma = 1.0 + 1.0 / (q * q - 1.0);
    let a = sharp_maximal_alpha(f, ladder).integral_pow(2.0);
    let b = sharp_maximal_alpha_q(f, ladder, q)?.integral_pow(gamma);
    Ok((a + b) / semi)
}

fn check_poincare_range(s: f64, p: f64, q: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) || !(p >= 1.0 && p < 2.0 / s) {
        return Err(SqgError::Parameter(format!("need s in (0,1) and 1 <= p < 2/s, got s={s}, p={p}")));
    }
    let pstar = 2.0 * p / (2.0 - p * s);
    if !(q >= p && q <= pstar * (1.0 + 1e-12)) {
        return Err(SqgError::Parameter(format!("q={q} outside [p, p*] = [{p}, {pstar}]")));
    }
    Ok(())
}

/// Cosine taper: 1 on B_{r/2}, 0 outside B_r.
pub fn taper_weight(dist: f64, r: f64) -> f64 {
    if dist <= 0.5 * r {
        1.0
    } else if dist >= r {
        0.0
    } else {
        0.5 * (1.0 + (PI * (2.0 * dist / r - 1.0)).cos())
    }
}

/// ||f - [f]_B||_{L^q(B)} / (r^{s - 2(1/p - 1/q)} [f]_{W^{s,p}(B)}).
pub fn poincare_check_standard(f: &ScalarField, ball: &Ball, s: f64, p: f64, q: f64) -> Result<f64> {
    check_poincare_range(s, p, q)?;
    let cells = ball_cells(f.grid(), ball)?;
    let m = ball_average(f, ball)?;
    let lhs = (f.grid().cell_area() * cells.iter().map(|c| (f.values()[c.idx] - m).abs().powf(q)).sum::<f64>())
        .powf(1.0 / q);
    let rhs = ball.radius.powf(s - 2.0 * (1.0 / p - 1.0 / q)) * gagliardo_seminorm_ball(f, ball, s, p)?;
    Ok(if rhs == 0.0 { 0.0 } else { lhs / rhs })
}

/// Weighted variant with the cosine taper.
pub fn poincare_check_weighted(f: &ScalarField, ball: &Ball, s: f64, p: f64, q: f64) -> Result<f64> {
    check_poincare_range(s, p, q)?;
    let cells = ball_cells(f.grid(), ball)?;
    let w: Vec<f64> = cells.iter().map(|c| taper_weight(c.offset[0].hypot(c.offset[1]), ball.radius)).collect();
    let wsum: f64 = w.iter().sum();
    let m = cells.iter().zip(&w).map(|(c, w)| w * f.values()[c.idx]).sum::<f64>() / wsum;
    let lhs = (f.grid().cell_area()
        * cells.iter().zip(&w).map(|(c, w)| w * (f.values()[c.idx] - m).abs().powf(q)).sum::<f64>())
    .powf(1.0 / q);
    let rhs = ball.radius.powf(s - 2.0 * (1.0 / p - 1.0 / q)) * gagliardo_seminorm_ball(f, ball, s, p)?;
    Ok(if rhs == 0.0 { 0.0 } else { lhs / rhs })
}

/// [f]_{W^{alpha,2}(B_r)} / (weighted extension energy on B_{4r/3} x [0, 4r/3))^{1/2}.
pub fn poincare_check_extension(f: &ScalarField, ball: &Ball, vgrid: &VerticalGrid) -> Result<f64> {
    let a = f.grid().alpha;
    let big = 4.0 * ball.radius / 3.0;
    let ext = extend_to(f, vgrid, big)?;
    let region = ExtensionRegion { ball: Ball::new(ball.center, big)?, cap: big };
    let e = weighted_dirichlet_energy(&ext, Some(&region))?.total;
    let lhs = gagliardo_seminorm_ball(f, ball, a, 2.0)?;
    Ok(if e == 0.0 { 0.0 } else { lhs / e.sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicPoincareReport {
    pub lhs: f64,
    pub energy: f64,
    pub velocity_factor: f64,
    pub ratio: f64,
    pub max_velocity_average: f64,
}

/// Parabolic Poincare ratio on Q_r(x, t): left side over E(3r)^{1/2} (1 + V^{1/2}).
pub fn parabolic_poincare_check(
    traj: &Trajectory,
    cyl: &Cylinder,
    q: f64,
    vgrid: &VerticalGrid,
) -> Result<ParabolicPoincareReport> {
    let a = traj.alpha();
    if !(q >= 2.0 && q <= 2.0 / (1.0 - a) * (1.0 + 1e-12)) {
        return Err(SqgError::Parameter(format!("q={q} outside [2, 2/(1-alpha)]")));
    }
    let (x, t, r) = (cyl.center_x, cyl.center_t, cyl.r);
    let g = *traj.grid();
    let b_r = Ball::new(x, r)?;
    let b_2r = Ball::new(x, 2.0 * r)?;
    let t2 = t - (2.0 * r).powf(2.0 * a);
    if traj.times[0] > t2 + 1e-9 * (t - t2) {
        return Err(SqgError::Coverage(format!("frames start at {} after {t2}", traj.times[0])));
    }
    // zero-average precondition
    let idx = frames_in(&traj.times, t2, t);
    let mut max_avg: f64 = 0.0;
    let mut umax: f64 = 0.0;
    for &k in &idx {
        let u = &traj.velocities[k];
        let m = ball_average(&u.u1, &b_r)?.hypot(ball_average(&u.u2, &b_r)?);
        max_avg = max_avg.max(m);
        umax = umax.max(u.sup_norm());
    }
    if max_avg > 1e-3 * umax.max(1e-300) && max_avg > 0.0 {
        return Err(SqgError::Precondition(format!(
            "velocity average on B_r reaches {max_avg:.3e} (sup |u| = {umax:.3e})"
        )));
    }
    let depth = r.powf(2.0 * a);
    let cells = ball_cells(&g, &b_r)?;
    let h2 = g.cell_area();
    let mean = time_integral(&traj.times, t - depth, t, |k| {
        h2 * cells.iter().map(|c| traj.thetas[k].values()[c.idx]).sum::<f64>()
    })? / (depth * h2 * cells.len() as f64);
    let inner = time_integral(&traj.times, t - depth, t, |k| {
        (h2 * cells.iter().map(|c| (traj.thetas[k].values()[c.idx] - mean).abs().powf(q)).sum::<f64>())
            .powf(2.0 / q)
    })?;
    let lhs = inner.sqrt() / r.powf((1.0 - 2.0 * a) + 2.0 / q + a);
    let energy = local_dissipative_energy_from(traj, &Cylinder::parabolic(x, t, 3.0 * r, a)?.starred(), vgrid)?;
    let cells2 = ball_cells(&g, &b_2r)?;
    let d2 = (2.0 * r).powf(2.0 * a);
    let vint = time_integral(&traj.times, t - d2, t, |k| {
        let u = &traj.velocities[k];
        let (m1, m2) = (
            cells2.iter().map(|c| u.u1.values()[c.idx]).sum::<f64>() / cells2.len() as f64,
            cells2.iter().map(|c| u.u2.values()[c.idx]).sum::<f64>() / cells2.len() as f64,
        );
        h2 * cells2
            .iter()
            .map(|c| (u.u1.values()[c.idx] - m1).powi(2) + (u.u2.values()[c.idx] - m2).powi(2))
            .sum::<f64>()
    })?;
    let velocity_factor = vint / r.powf(2.0 * (1.0 - 2.0 * a) + 2.0 + 2.0 * a);
    let rhs = energy.sqrt() * (1.0 + velocity_factor.sqrt());
    Ok(ParabolicPoincareReport {
        lhs,
        energy,
        velocity_factor,
        ratio: if rhs == 0.0 { 0.0 } else { lhs / rhs },
        max_velocity_average: max_avg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(32, 2.0 * PI, 0.45).unwrap()
    }

    #[test]
    fn ladder_rules() {
        // 2h, 4h, 8h only: three rungs
        assert!(RadiusLadder::default_for(&grid()).is_err());
        let g = grid().with_n(64).unwrap();
        let l = RadiusLadder::default_for(&g).unwrap();
        assert_eq!(l.radii().len(), 4);
        assert!((l.radii()[3] - 0.25 * g.box_length).abs() < 1e-12);
        assert!(RadiusLadder::new(&g, g.spacing()).is_err());
        let nl = RadiusLadder::for_nonlocal(1.0, &g).unwrap();
        assert_eq!(nl.radii()[0], 0.25);
    }

    #[test]
    fn constants_give_zero_oscillation() {
        let g = grid().with_n(64).unwrap();
        let l = RadiusLadder::default_for(&g).unwrap();
        let c = ScalarField::constant(g, -2.0, 0.0);
        assert!(maximal(&c, &l).values.iter().all(|v| (v - 2.0).abs() < 1e-12));
        assert!(sharp_maximal_alpha(&c, &l).max() < 1e-12);
        assert!(d_alpha_2(&c).max() == 0.0);
        assert!(sharp_maximal_alpha_q(&c, &l, 1.2).is_err());
    }

    #[test]
    fn taper_profile() {
        assert_eq!(taper_weight(0.4, 1.0), 1.0);
        assert_eq!(taper_weight(1.0, 1.0), 0.0);
        assert!((taper_weight(0.75, 1.0) - 0.5).abs() < 1e-15);
    }
}
