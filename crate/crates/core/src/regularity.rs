//! Epsilon-regularity criteria, screening over spacetime lattices, Vitali covers and box counting.

use std::collections::HashSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cylinder::Cylinder;
use crate::diagnostics::{maximal, sharp_maximal_alpha_q, square_function_sq, RadiusLadder};
use crate::error::{Result, SqgError};
use crate::excess::compute_kq;
use crate::extension::{energy_column_density, extend_to, VerticalGrid};
use crate::field::ScalarField;
use crate::grid::GridSpec;
use crate::quadrature::{ball_cells, time_weights};
use crate::solver::{least_squares, Trajectory};

pub type Center = ([f64; 2], f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    Scheffer,
    Blabla,
    FixedScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionConfig {
    pub kind: CriterionKind,
    pub epsilon: f64,
    pub r: f64,
    pub q: f64,
    pub alpha: f64,
    /// Fixed K_q for every center instead of the per-center value.
    pub kq: Option<f64>,
}

impl CriterionConfig {
    pub fn p(&self) -> f64 {
        match self.kind {
            CriterionKind::Scheffer => 6.0 / (4.0 * self.alpha - 1.0),
            _ => (1.0 + self.alpha) / self.alpha + 1.0 / self.q,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.epsilon > 0.0) {
            bad.push(format!("epsilon={} must be positive", self.epsilon));
        }
        if !(self.r > 0.0) {
            bad.push(format!("r={} must be positive", self.r));
        }
        if !(self.alpha > 0.25 && self.alpha <= 0.5) {
            bad.push(format!("alpha={} must lie in (1/4, 1/2]", self.alpha));
        }
        if self.kind != CriterionKind::Scheffer && !(self.q >= 8.0) {
            bad.push(format!("q={} must be >= 8", self.q));
        }
        if let Some(k) = self.kq {
            if !(k > 0.0) {
                bad.push(format!("kq={k} must be positive"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(SqgError::Config(bad))
        }
    }
}

/// Per-frame nonnegative densities integrated over cylinders.
#[derive(Debug, Clone)]
pub struct DensityFrames {
    grid: GridSpec,
    times: Vec<f64>,
    frames: Vec<Vec<f64>>,
}

impl DensityFrames {
    pub fn new(grid: GridSpec, times: Vec<f64>, frames: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != frames.len() || frames.iter().any(|f| f.len() != grid.len()) {
            return Err(SqgError::Data("density frames do not match the grid or times".into()));
        }
        if frames.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(SqgError::Data("densities must be finite and nonnegative".into()));
        }
        Ok(Self { grid, times, frames })
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Spacetime integral over the cylinder's ball and time span.
    pub fn integrate(&self, cyl: &Cylinder) -> Result<f64> {
        let (a, b) = cyl.time_interval();
        let cells = ball_cells(&self.grid, &cyl.ball())?;
        let w = time_weights(&self.times, a, b)?;
        let h2 = self.grid.cell_area();
        Ok(w
            .iter()
            .map(|&(k, c)| c * h2 * cells.iter().map(|cell| self.frames[k][cell.idx]).sum::<f64>())
            .sum())
    }

    pub fn add(&self, other: &DensityFrames) -> Result<DensityFrames> {
        if self.times != other.times {
            return Err(SqgError::Data("density frames sampled at different times".into()));
        }
        let frames = self
            .frames
            .iter()
            .zip(&other.frames)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Ok(Self { grid: self.grid, times: self.times.clone(), frames })
    }
}

fn per_frame(traj: &Trajectory, f: impl Fn(usize) -> Result<Vec<f64>> + Sync) -> Result<DensityFrames> {
    let frames = (0..traj.len()).into_par_iter().map(&f).collect::<Result<Vec<_>>>()?;
    DensityFrames::new(*traj.grid(), traj.times.clone(), frames)
}

/// (M theta^2)^{p/2} + |u|^p.
pub fn scheffer_density(traj: &Trajectory, p: f64) -> Result<DensityFrames> {
    let ladder = RadiusLadder::default_for(traj.grid())?;
    per_frame(traj, |k| {
        let th = &traj.thetas[k];
        let sq = ScalarField::from_values(*th.grid(), th.values().iter().map(|v| v * v).collect(), th.time())?;
        let m = maximal(&sq, &ladder);
        let u = &traj.velocities[k];
        Ok(m.values
            .iter()
            .zip(u.magnitude())
            .map(|(mv, um)| mv.powf(0.5 * p) + um.powf(p))
            .collect())
    })
}

/// Column energy of the extension up to `cap`.
pub fn energy_density(traj: &Trajectory, vgrid: &VerticalGrid, cap: f64) -> Result<DensityFrames> {
    per_frame(traj, |k| energy_column_density(&extend_to(&traj.thetas[k], vgrid, cap)?, cap))
}

/// M((D_{alpha,2} theta)^2).
pub fn maximal_square_density(traj: &Trajectory) -> Result<DensityFrames> {
    let ladder = RadiusLadder::default_for(traj.grid())?;
    per_frame(traj, |k| {
        let th = &traj.thetas[k];
        let d2 = ScalarField::from_values(*th.grid(), square_function_sq(th, th.grid().alpha), th.time())?;
        Ok(maximal(&d2, &ladder).values)
    })
}

/// |theta^#_{alpha,q}|^{1 + 1/(q^2-1)}.
pub fn sharp_density(traj: &Trajectory, q: f64) -> Result<DensityFrames> {
    let ladder = RadiusLadder::default_for(traj.grid())?;
    let e = 1.0 + 1.0 / (q * q - 1.0);
    per_frame(traj, |k| {
        Ok(sharp_maximal_alpha_q(&traj.thetas[k], &ladder, q)?.values.into_iter().map(|v| v.powf(e)).collect())
    })
}

fn scheffer_cylinder(center: Center, r: f64, alpha: f64) -> Result<Cylinder> {
    Cylinder::parabolic(center.0, center.1 + 0.25 * r.powf(2.0 * alpha), 4.0 * r, alpha)
}

fn scheffer_weight(r: f64, alpha: f64, p: f64) -> f64 {
    r.powf(-((1.0 - 2.0 * alpha) * p + 2.0 + 2.0 * alpha))
}

/// r^{-((1-2a)p+2+2a)} int_{Q_{4r}(x, t + r^{2a}/4)} (M theta^2)^{p/2} + |u|^p with p = 6/(4a-1).
pub fn criterion_scheffer(traj: &Trajectory, center: Center, r: f64) -> Result<f64> {
    let a = traj.alpha();
    if !(a > 0.25) {
        return Err(SqgError::Parameter(format!("alpha={a} must exceed 1/4")));
    }
    let p = 6.0 / (4.0 * a - 1.0);
    let cyl = scheffer_cylinder(center, r, a)?;
    let (lo, hi) = cyl.time_interval();
    time_weights(&traj.times, lo, hi)?;
    let sub = subtrajectory(traj, lo, hi)?;
    Ok(scheffer_weight(r, a, p) * scheffer_density(&sub, p)?.integrate(&cyl)?)
}

/// Frames bracketing [lo, hi].
fn subtrajectory(traj: &Trajectory, lo: f64, hi: f64) -> Result<Trajectory> {
    let w = time_weights(&traj.times, lo, hi)?;
    let (a, b) = (w.first().unwrap().0, w.last().unwrap().0);
    let mut t = Trajectory::from_frames(traj.thetas[a..=b].to_vec(), traj.velocities[a..=b].to_vec(), traj.coupled)?;
    t.initial_l2 = traj.initial_l2;
    Ok(t)
}

fn resolve_kq(traj: &Trajectory, center: Center, r: f64, q: f64, kq: Option<f64>) -> Result<f64> {
    match kq {
        Some(k) => Ok(k),
        None => Ok(compute_kq(traj, center.0, center.1, r, q)?.kq),
    }
}

fn sup_pow(traj: &Trajectory, a: f64, b: f64, e: f64) -> f64 {
    let s = traj.sup_over(a, b);
    if s == 0.0 {
        0.0
    } else {
        s.powf(e)
    }
}

/// Evaluator with the per-frame densities computed once.
pub struct Screener<'a> {
    traj: &'a Trajectory,
    cfg: CriterionConfig,
    density: DensityFrames,
}

impl<'a> Screener<'a> {
    pub fn new(traj: &'a Trajectory, cfg: CriterionConfig, vgrid: &VerticalGrid) -> Result<Self> {
        cfg.validate()?;
        if (cfg.alpha - traj.alpha()).abs() > 1e-12 {
            return Err(SqgError::Parameter(format!("criterion alpha {} differs from run alpha {}", cfg.alpha, traj.alpha())));
        }
        let density = match cfg.kind {
            CriterionKind::Scheffer => scheffer_density(traj, cfg.p())?,
            CriterionKind::Blabla => energy_density(traj, vgrid, cfg.r)?.add(&maximal_square_density(traj)?)?,
            CriterionKind::FixedScale => energy_density(traj, vgrid, 4.0 * cfg.r)?.add(&sharp_density(traj, cfg.q)?)?,
        };
        Ok(Self { traj, cfg, density })
    }

    pub fn config(&self) -> &CriterionConfig {
        &self.cfg
    }

    /// Spatial radius of the evaluation cylinder at `center`.
    pub fn cylinder(&self, center: Center) -> Result<Cylinder> {
        let (a, r, q) = (self.cfg.alpha, self.cfg.r, self.cfg.q);
        match self.cfg.kind {
            CriterionKind::Scheffer => scheffer_cylinder(center, r, a),
            CriterionKind::Blabla => {
                let kq = resolve_kq(self.traj, center, r, q, self.cfg.kq)?;
                Cylinder::modified_centered(center.0, center.1, r, a, kq, q)
            }
            CriterionKind::FixedScale => {
                let kq = resolve_kq(self.traj, center, 4.0 * r, q, self.cfg.kq)?;
                Cylinder::modified(center.0, center.1, 4.0 * r, a, kq, q)
            }
        }
    }

    pub fn evaluate(&self, center: Center) -> Result<f64> {
        let (a, r) = (self.cfg.alpha, self.cfg.r);
        let p = self.cfg.p();
        let cyl = self.cylinder(center)?;
        let integral = self.density.integrate(&cyl)?;
        Ok(match self.cfg.kind {
            CriterionKind::Scheffer => scheffer_weight(r, a, p) * integral,
            CriterionKind::Blabla => {
                let d = r.powf(2.0 * a);
                sup_pow(self.traj, center.1 - d, center.1 + d, p - 2.0) * r.powf(-(p * (1.0 - 2.0 * a) + 2.0)) * integral
            }
            CriterionKind::FixedScale => {
                let rr = 4.0 * r;
                let d = rr.powf(2.0 * a);
                sup_pow(self.traj, center.1 - d, center.1, p - 2.0) * rr.powf(-(p * (1.0 - 2.0 * a) + 2.0)) * integral
            }
        })
    }
}

/// ||theta||_inf^{p-2} r^{-(p(1-2a)+2)} (int_{C*} y^b |grad theta*|^2 + int_C M((D_{a,2} theta)^2)).
pub fn criterion_blabla(traj: &Trajectory, vgrid: &VerticalGrid, center: Center, r: f64, q: f64, kq: Option<f64>) -> Result<f64> {
    let cfg = CriterionConfig { kind: CriterionKind::Blabla, epsilon: 1.0, r, q, alpha: traj.alpha(), kq };
    let d = r.powf(2.0 * traj.alpha());
    let sub = subtrajectory(traj, center.1 - d, center.1 + d)?;
    let kq = Some(resolve_kq(traj, center, r, q, kq)?);
    Screener::new(&sub, CriterionConfig { kq, ..cfg }, vgrid)?.evaluate(center)
}

/// ||theta||_inf^{p-2} (4r)^{-(p(1-2a)+2)} (int_{Q*(4r)} y^b |grad theta*|^2 + int_{Q(4r)} |theta^#_{a,q}|^{1+1/(q^2-1)}).
pub fn criterion_fixed_scale(traj: &Trajectory, vgrid: &VerticalGrid, center: Center, r: f64, q: f64, kq: Option<f64>) -> Result<f64> {
    let cfg = CriterionConfig { kind: CriterionKind::FixedScale, epsilon: 1.0, r, q, alpha: traj.alpha(), kq };
    let d = (4.0 * r).powf(2.0 * traj.alpha());
    let kq = Some(resolve_kq(traj, center, 4.0 * r, q, kq)?);
    let sub = subtrajectory(traj, center.1 - d, center.1)?;
    Screener::new(&sub, CriterionConfig { kq, ..cfg }, vgrid)?.evaluate(center)
}

/// Fixed-scale value at radius r/4 and (x, t + r^{2a}/16) over the value at (x, t, r), same K_q.
pub fn jensen_chain_ratio(traj: &Trajectory, vgrid: &VerticalGrid, center: Center, r: f64, q: f64, kq: f64) -> Result<f64> {
    let big = criterion_blabla(traj, vgrid, center, r, q, Some(kq))?;
    let shifted = (center.0, center.1 + r.powf(2.0 * traj.alpha()) / 16.0);
    let small = criterion_fixed_scale(traj, vgrid, shifted, 0.25 * r, q, Some(kq))?;
    Ok(if big == 0.0 { 0.0 } else { small / big })
}

/// Value integrating user-supplied densities over the modified centered cylinder.
pub struct DensityCriterion {
    pub density: DensityFrames,
    pub alpha: f64,
    pub r: f64,
    pub q: f64,
    pub kq: f64,
}

impl DensityCriterion {
    pub fn p(&self) -> f64 {
        (1.0 + self.alpha) / self.alpha + 1.0 / self.q
    }

    pub fn cylinder(&self, center: Center) -> Result<Cylinder> {
        Cylinder::modified_centered(center.0, center.1, self.r, self.alpha, self.kq, self.q)
    }

    pub fn evaluate(&self, center: Center) -> Result<f64> {
        let a = self.alpha;
        Ok(self.r.powf(-(self.p() * (1.0 - 2.0 * a) + 2.0)) * self.density.integrate(&self.cylinder(center)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenPoint {
    pub x: [f64; 2],
    pub t: f64,
    pub value: Option<f64>,
    pub error: Option<String>,
    /// value <= epsilon
    pub regular: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityScreen {
    pub epsilon: f64,
    pub points: Vec<ScreenPoint>,
    /// Indices into `points` of the selected Vitali balls.
    pub covering: Vec<usize>,
    pub ball_radius: f64,
    pub dim_estimate: Option<BoxDimension>,
}

impl RegularityScreen {
    /// Centers whose value exceeds epsilon or could not be evaluated.
    pub fn exceedance(&self) -> Vec<usize> {
        (0..self.points.len()).filter(|&i| !self.points[i].regular).collect()
    }

    /// Same values against another threshold.
    pub fn with_epsilon(&self, epsilon: f64) -> RegularityScreen {
        let mut out = self.clone();
        out.epsilon = epsilon;
        for p in &mut out.points {
            p.regular = matches!(p.value, Some(v) if v <= epsilon);
        }
        out.refresh_cover();
        out
    }

    fn refresh_cover(&mut self) {
        let balls: Vec<SpaceTimeBall> = self
            .exceedance()
            .into_iter()
            .map(|i| SpaceTimeBall { center: [self.points[i].x[0], self.points[i].x[1], self.points[i].t], radius: self.ball_radius })
            .collect();
        let idx = self.exceedance();
        self.covering = vitali_cover(&balls).into_iter().map(|k| idx[k]).collect();
    }

    /// Rows (delta, count) of the box-counting fit.
    pub fn write_counts_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["delta", "count"]).map_err(|e| SqgError::Io(e.to_string()))?;
        if let Some(d) = &self.dim_estimate {
            for (s, c) in d.scales.iter().zip(&d.counts) {
                wr.write_record([format!("{s:.17e}"), c.to_string()]).map_err(|e| SqgError::Io(e.to_string()))?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

fn build_screen(
    centers: &[Center],
    epsilon: f64,
    ball_radius: f64,
    scales: Option<&[f64]>,
    eval: impl Fn(Center) -> Result<f64> + Sync,
) -> RegularityScreen {
    let points: Vec<ScreenPoint> = centers
        .par_iter()
        .map(|&c| match eval(c) {
            Ok(v) => ScreenPoint { x: c.0, t: c.1, value: Some(v), error: None, regular: v <= epsilon },
            Err(e) => ScreenPoint { x: c.0, t: c.1, value: None, error: Some(e.to_string()), regular: false },
        })
        .collect();
    let mut s = RegularityScreen { epsilon, points, covering: Vec::new(), ball_radius, dim_estimate: None };
    s.refresh_cover();
    if let Some(sc) = scales {
        let pts: Vec<[f64; 3]> = s.exceedance().iter().map(|&i| [s.points[i].x[0], s.points[i].x[1], s.points[i].t]).collect();
        s.dim_estimate = box_dimension(&pts, sc).ok();
    }
    s
}

/// sqrt(2) L_q r^{2a - 2/q}.
pub fn covering_radius(lq: f64, r: f64, alpha: f64, q: f64) -> f64 {
    2f64.sqrt() * lq * r.powf(2.0 * alpha - 2.0 / q)
}

/// Evaluates the configured criterion at every center; failed centers count as exceedances.
pub fn screen(traj: &Trajectory, cfg: CriterionConfig, centers: &[Center], vgrid: &VerticalGrid, scales: Option<&[f64]>) -> Result<RegularityScreen> {
    let s = Screener::new(traj, cfg, vgrid)?;
    let lq = match cfg.kq {
        Some(k) => k.max(1.0),
        None => centers
            .iter()
            .filter_map(|&c| compute_kq(traj, c.0, c.1, cfg.r, cfg.q).ok())
            .map(|k| k.kq)
            .fold(1.0, f64::max),
    };
    Ok(build_screen(centers, cfg.epsilon, covering_radius(lq, cfg.r, cfg.alpha, cfg.q), scales, |c| s.evaluate(c)))
}

pub fn screen_density(crit: &DensityCriterion, epsilon: f64, centers: &[Center], scales: Option<&[f64]>) -> RegularityScreen {
    let radius = covering_radius(crit.kq.max(1.0), crit.r, crit.alpha, crit.q);
    build_screen(centers, epsilon, radius, scales, |c| crit.evaluate(c))
}

/// Largest finite value over the reference screens times `safety`.
pub fn calibrate_threshold(screens: &[RegularityScreen], safety: f64) -> Result<f64> {
    let m = screens.iter().flat_map(|s| s.points.iter().filter_map(|p| p.value)).fold(f64::NAN, f64::max);
    if !m.is_finite() || !(safety >= 1.0) {
        return Err(SqgError::Parameter("calibration needs evaluated values and safety >= 1".into()));
    }
    Ok(if m > 0.0 { m * safety } else { f64::MIN_POSITIVE })
}

/// Product lattice of spatial points and times.
pub fn center_lattice(grid: &GridSpec, per_side: usize, times: &[f64]) -> Vec<Center> {
    let l = grid.box_length;
    let mut out = Vec::with_capacity(per_side * per_side * times.len());
    for &t in times {
        for j in 0..per_side {
            for i in 0..per_side {
                out.push(([l * i as f64 / per_side as f64, l * j as f64 / per_side as f64], t));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeBall {
    /// (x1, x2, t)
    pub center: [f64; 3],
    pub radius: f64,
}

fn dist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Greedy disjoint subfamily (largest radii first); indices into `balls`.
pub fn vitali_cover(balls: &[SpaceTimeBall]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&a, &b| balls[b].radius.partial_cmp(&balls[a].radius).unwrap().then(a.cmp(&b)));
    let mut chosen: Vec<usize> = Vec::new();
    for i in order {
        let bi = &balls[i];
        if chosen.iter().all(|&j| dist3(&bi.center, &balls[j].center) > bi.radius + balls[j].radius) {
            chosen.push(i);
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Every input ball lies inside the `factor`-dilation of some selected ball.
pub fn dilation_covers(balls: &[SpaceTimeBall], selected: &[usize], factor: f64) -> bool {
    balls
        .iter()
        .all(|b| selected.iter().any(|&j| dist3(&b.center, &balls[j].center) + b.radius <= factor * balls[j].radius * (1.0 + 1e-12)))
}

pub fn is_disjoint(balls: &[SpaceTimeBall], selected: &[usize]) -> bool {
    selected.iter().enumerate().all(|(k, &i)| {
        selected[k + 1..].iter().all(|&j| dist3(&balls[i].center, &balls[j].center) > balls[i].radius + balls[j].radius)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDimension {
    pub slope: f64,
    pub stderr: f64,
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
    /// Set when the input was empty and the slope is 0 by convention.
    pub empty: bool,
}

/// Least-squares slope of log N(delta) against log(1/delta).
pub fn box_dimension(points: &[[f64; 3]], scales: &[f64]) -> Result<BoxDimension> {
    if scales.len() < 4 || scales.iter().any(|s| !(*s > 0.0)) {
        return Err(SqgError::Parameter(format!("need at least 4 positive scales, got {}", scales.len())));
    }
    if points.is_empty() {
        return Ok(BoxDimension { slope: 0.0, stderr: 0.0, scales: scales.to_vec(), counts: vec![0; scales.len()], empty: true });
    }
    let counts: Vec<usize> = scales
        .iter()
        .map(|&d| {
            points
                .iter()
                .map(|p| [(p[0] / d).floor() as i64, (p[1] / d).floor() as i64, (p[2] / d).floor() as i64])
                .collect::<HashSet<_>>()
                .len()
        })
        .collect();
    let pts: Vec<(f64, f64)> = scales.iter().zip(&counts).map(|(s, c)| ((1.0 / s).ln(), (*c as f64).ln())).collect();
    let (slope, _, stderr) = least_squares(&pts);
    Ok(BoxDimension { slope, stderr, scales: scales.to_vec(), counts, empty: false })
}

/// delta_0 2^{-j}, j = 0..count.
pub fn dyadic_scales(delta0: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| delta0 * 0.5f64.powi(j as i32)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionFormulas {
    pub beta_q: f64,
    pub limit_dim: f64,
    pub alpha0: f64,
    pub delta_holder: f64,
    pub scheffer_p: f64,
}

/// (1 + sqrt 33) / 16.
pub fn alpha0() -> f64 {
    (1.0 + 33f64.sqrt()) / 16.0
}

/// Closed-form exponents; `q = None` is the q -> infinity limit.
pub fn dimension_formulas(alpha: f64, q: Option<f64>) -> Result<DimensionFormulas> {
    if !(alpha > 0.25 && alpha <= 0.5) {
        return Err(SqgError::Parameter(format!("alpha={alpha} must lie in (1/4, 1/2]")));
    }
    let inv_q = match q {
        Some(q) if q >= 8.0 => 1.0 / q,
        Some(q) => return Err(SqgError::Parameter(format!("q={q} must be >= 8"))),
        None => 0.0,
    };
    let pq = (1.0 + alpha) / alpha + inv_q;
    let beta_q = (pq * (1.0 - 2.0 * alpha) + 2.0) / (2.0 * alpha - 2.0 * inv_q);
    let limit_dim = ((1.0 + alpha) / alpha * (1.0 - 2.0 * alpha) + 2.0) / (2.0 * alpha);
    let gamma = 2.0 * alpha - 4.0 * alpha * alpha / (1.0 + alpha);
    let delta_holder = gamma - (1.0 - 2.0 * alpha + 2.0 * alpha / pq) / (pq - 1.0);
    Ok(DimensionFormulas { beta_q, limit_dim, alpha0: alpha0(), delta_holder, scheffer_p: 6.0 / (4.0 * alpha - 1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formulas_at_landmarks() {
        let f = dimension_formulas(0.5, None).unwrap();
        assert!((f.limit_dim - 2.0).abs() < 1e-15 && (f.scheffer_p - 6.0).abs() < 1e-15);
        assert!((dimension_formulas(alpha0(), None).unwrap().limit_dim - 3.0).abs() < 1e-9);
        assert!(dimension_formulas(0.2, None).is_err());
        assert!(dimension_formulas(0.45, Some(4.0)).is_err());
    }

    #[test]
    fn vitali_small_cases() {
        let b = |x: f64| SpaceTimeBall { center: [x, 0.0, 0.0], radius: 1.0 };
        assert_eq!(vitali_cover(&[b(0.0)]), vec![0]);
        assert_eq!(vitali_cover(&[b(0.0), b(5.0)]), vec![0, 1]);
        let fam = [b(0.0), b(1.5), b(3.0)];
        let sel = vitali_cover(&fam);
        assert_eq!(sel, vec![0, 2]);
        assert!(dilation_covers(&fam, &sel, 5.0) && is_disjoint(&fam, &sel));
    }

    #[test]
    fn box_dimension_of_a_point() {
        let d = box_dimension(&[[0.3, 0.2, 0.1]], &dyadic_scales(0.5, 5)).unwrap();
        assert!(d.slope.abs() < 1e-12);
        assert!(box_dimension(&[], &dyadic_scales(0.5, 5)).unwrap().empty);
        assert!(box_dimension(&[[0.0; 3]], &[1.0, 0.5]).is_err());
    }
}
