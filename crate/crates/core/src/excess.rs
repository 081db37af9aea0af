//! Excess functionals on parabolic cylinders and related scale-invariant quantities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cylinder::{Cylinder, CylinderShape};
use crate::diagnostics::RadiusLadder;
use crate::error::{Result, SqgError};
use crate::extension::{extend_to, weighted_dirichlet_energy, ExtendedField, ExtensionRegion, VerticalGrid};
use crate::quadrature::{ball_cells, frames_in, time_weights, Ball, BallCell};
use crate::solver::Trajectory;
use crate::spectral::riesz_velocity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessParams {
    pub p: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub q: f64,
}

impl ExcessParams {
    /// p = (1+a)/a + 1/q, sigma = 2a - 1/q^2, gamma = 2a - 4a^2/(1+a), q = 8.
    pub fn default_for(alpha: f64) -> Self {
        Self::with_q(alpha, 8.0)
    }

    pub fn with_q(alpha: f64, q: f64) -> Self {
        Self {
            p: (1.0 + alpha) / alpha + 1.0 / q,
            sigma: 2.0 * alpha - 1.0 / (q * q),
            gamma: 2.0 * alpha - 4.0 * alpha * alpha / (1.0 + alpha),
            q,
        }
    }

    pub fn validate(&self, alpha: f64) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.p > (1.0 + alpha) / alpha) {
            bad.push(format!("p={} must exceed (1+alpha)/alpha={}", self.p, (1.0 + alpha) / alpha));
        }
        if !(self.sigma > 0.0 && self.sigma < 2.0 * alpha) {
            bad.push(format!("sigma={} must lie in (0, 2 alpha)", self.sigma));
        }
        if !(self.q >= 8.0) {
            bad.push(format!("q={} must be >= 8", self.q));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(SqgError::Config(bad))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessReport {
    pub e_s: f64,
    pub e_v: f64,
    pub e_nl: f64,
    pub total: f64,
    pub cyl: Cylinder,
    pub params: ExcessParams,
    /// Share of the nonlocal part carried by the largest rung.
    pub last_rung_share: f64,
}

struct Window {
    cells: Vec<BallCell>,
    weights: Vec<(usize, f64)>,
    duration: f64,
}

fn window(traj: &Trajectory, ball: &Ball, a: f64, b: f64) -> Result<Window> {
    let cells = ball_cells(traj.grid(), ball)?;
    let weights = time_weights(&traj.times, a, b)?;
    Ok(Window { cells, weights, duration: b - a })
}

impl Window {
    fn integrate(&self, g: impl Fn(usize) -> f64 + Sync) -> f64 {
        let vals: Vec<f64> = self.weights.par_iter().map(|&(k, _)| g(k)).collect();
        self.weights.iter().zip(vals).map(|((_, w), v)| w * v).sum()
    }
}

/// (avg_Q |theta - (theta)_Q|^p)^{1/p}.
pub fn excess_s(traj: &Trajectory, cyl: &Cylinder, params: &ExcessParams) -> Result<f64> {
    let (a, b) = cyl.time_interval();
    let w = window(traj, &cyl.ball(), a, b)?;
    let n = w.cells.len() as f64;
    let mean = w.integrate(|k| w.cells.iter().map(|c| traj.thetas[k].values()[c.idx]).sum::<f64>() / n) / w.duration;
    let p = params.p;
    let s = w.integrate(|k| w.cells.iter().map(|c| (traj.thetas[k].values()[c.idx] - mean).abs().powf(p)).sum::<f64>() / n);
    Ok((s / w.duration).powf(1.0 / p))
}

/// (avg_Q |u - [u(s)]_B|^p)^{1/p}.
pub fn excess_v(traj: &Trajectory, cyl: &Cylinder, params: &ExcessParams) -> Result<f64> {
    let (a, b) = cyl.time_interval();
    let w = window(traj, &cyl.ball(), a, b)?;
    let n = w.cells.len() as f64;
    let p = params.p;
    let s = w.integrate(|k| {
        let u = &traj.velocities[k];
        let (v1, v2) = (u.u1.values(), u.u2.values());
        let m1 = w.cells.iter().map(|c| v1[c.idx]).sum::<f64>() / n;
        let m2 = w.cells.iter().map(|c| v2[c.idx]).sum::<f64>() / n;
        w.cells.iter().map(|c| (v1[c.idx] - m1).hypot(v2[c.idx] - m2).powf(p)).sum::<f64>() / n
    });
    Ok((s / w.duration).powf(1.0 / p))
}

/// Nonlocal excess and the share of its time integral coming from the last rung.
pub fn excess_nl_report(traj: &Trajectory, cyl: &Cylinder, params: &ExcessParams, ladder: &RadiusLadder) -> Result<(f64, f64)> {
    let (a, b) = cyl.time_interval();
    let r = cyl.spatial_radius();
    let w = window(traj, &cyl.ball(), a, b)?;
    let g = traj.grid();
    let rungs: Vec<Vec<BallCell>> = ladder
        .radii()
        .iter()
        .map(|&rr| ball_cells(g, &Ball::new(cyl.center_x, rr)?))
        .collect::<Result<_>>()?;
    let (p, sigma) = (params.p, params.sigma);
    let n = w.cells.len() as f64;
    let per_frame = |k: usize| -> (f64, f64) {
        let v = traj.thetas[k].values();
        let m = w.cells.iter().map(|c| v[c.idx]).sum::<f64>() / n;
        let terms: Vec<f64> = ladder
            .radii()
            .iter()
            .zip(&rungs)
            .map(|(&rr, cells)| {
                let avg = cells.iter().map(|c| (v[c.idx] - m).abs().powf(1.5)).sum::<f64>() / cells.len() as f64;
                (r / rr).powf(sigma * p) * avg.powf(2.0 * p / 3.0)
            })
            .collect();
        (terms.iter().copied().fold(0.0, f64::max), *terms.last().unwrap())
    };
    let vals: Vec<(f64, f64)> = w.weights.par_iter().map(|&(k, _)| per_frame(k)).collect();
    let sup: f64 = w.weights.iter().zip(&vals).map(|((_, c), v)| c * v.0).sum();
    let last: f64 = w.weights.iter().zip(&vals).map(|((_, c), v)| c * v.1).sum();
    let share = if sup > 0.0 { last / sup } else { 0.0 };
    Ok(((sup / w.duration).powf(1.0 / p), share))
}

pub fn excess_nl(traj: &Trajectory, cyl: &Cylinder, params: &ExcessParams, ladder: &RadiusLadder) -> Result<f64> {
    Ok(excess_nl_report(traj, cyl, params, ladder)?.0)
}

/// E = E^S + E^V + E^NL with the nonlocal ladder r/4 ... L/4.
pub fn excess(traj: &Trajectory, cyl: &Cylinder, params: &ExcessParams) -> Result<ExcessReport> {
    let ladder = RadiusLadder::for_nonlocal(cyl.spatial_radius(), traj.grid())?;
    excess_with(traj, cyl, params, &ladder)
}

pub fn excess_with(traj: &Trajectory, cyl: &Cylinder, params: &ExcessParams, ladder: &RadiusLadder) -> Result<ExcessReport> {
    let e_s = excess_s(traj, cyl, params)?;
    let e_v = excess_v(traj, cyl, params)?;
    let (e_nl, last_rung_share) = excess_nl_report(traj, cyl, params, ladder)?;
    Ok(ExcessReport { e_s, e_v, e_nl, total: e_s + e_v + e_nl, cyl: *cyl, params: *params, last_rung_share })
}

fn energy_normalization(cyl: &Cylinder) -> f64 {
    cyl.r.powf(2.0 * (1.0 - 2.0 * cyl.alpha) + 2.0)
}

/// r^{-(2(1-2a)+2)} times the weighted Dirichlet energy over the starred cylinder.
pub fn local_dissipative_energy(ext_frames: &[ExtendedField], cyl: &Cylinder) -> Result<f64> {
    let times: Vec<f64> = ext_frames.iter().map(|e| e.time()).collect();
    let (a, b) = cyl.time_interval();
    let region = ExtensionRegion { ball: cyl.ball(), cap: cyl.vertical_cap() };
    let w = time_weights(&times, a, b)?;
    let vals = w
        .par_iter()
        .map(|&(k, _)| weighted_dirichlet_energy(&ext_frames[k], Some(&region)).map(|e| e.total))
        .collect::<Result<Vec<_>>>()?;
    Ok(w.iter().zip(vals).map(|((_, c), v)| c * v).sum::<f64>() / energy_normalization(cyl))
}

/// Same as `local_dissipative_energy`, extending only the frames that are needed.
pub fn local_dissipative_energy_from(traj: &Trajectory, cyl: &Cylinder, vgrid: &VerticalGrid) -> Result<f64> {
    let (a, b) = cyl.time_interval();
    let region = ExtensionRegion { ball: cyl.ball(), cap: cyl.vertical_cap() };
    let w = time_weights(&traj.times, a, b)?;
    let vals = w
        .par_iter()
        .map(|&(k, _)| {
            let e = extend_to(&traj.thetas[k], vgrid, region.cap)?;
            weighted_dirichlet_energy(&e, Some(&region)).map(|e| e.total)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(w.iter().zip(vals).map(|((_, c), v)| c * v).sum::<f64>() / energy_normalization(cyl))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KqReport {
    pub kq: f64,
    /// sup over the centered window of ||u||_{L^q}
    pub velocity_norm: f64,
    /// ||u||_{L^inf L^q} / (||theta_0||_2 t^{-(1-2/q)/(2a)}), when t > 0
    pub c2_empirical: Option<f64>,
}

/// K_q = 2 max{ ||u||_{L^inf([t-r^{2a}, t+r^{2a}]; L^q)}, r^{1-2a+2/q} }.
pub fn compute_kq(traj: &Trajectory, x: [f64; 2], t: f64, r: f64, q: f64) -> Result<KqReport> {
    let _ = x;
    let a = traj.alpha();
    let d = r.powf(2.0 * a);
    let (lo, hi) = (t - d, t + d);
    time_weights(&traj.times, lo, hi)?;
    let idx = frames_in(&traj.times, lo, hi);
    let velocity_norm = idx
        .par_iter()
        .map(|&k| traj.velocities[k].lq_norm(q))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max);
    let kq = 2.0 * velocity_norm.max(r.powf(1.0 - 2.0 * a + 2.0 / q));
    let elapsed = t - traj.times[0];
    let c2_empirical = (elapsed > 0.0 && traj.initial_l2 > 0.0)
        .then(|| velocity_norm / (traj.initial_l2 * elapsed.powf(-(1.0 - 2.0 / q) / (2.0 * a))));
    Ok(KqReport { kq, velocity_norm, c2_empirical })
}

/// Max over frames of sup|u - R^perp theta - mean| relative to sup|u|.
pub fn velocity_form_defect(traj: &Trajectory) -> f64 {
    traj.thetas
        .par_iter()
        .zip(&traj.velocities)
        .map(|(th, u)| {
            let r = riesz_velocity(th);
            let d1 = u.u1.zip_with(&r.u1, |a, b| a - b).unwrap().mean_zero();
            let d2 = u.u2.zip_with(&r.u2, |a, b| a - b).unwrap().mean_zero();
            let scale = u.sup_norm().max(r.sup_norm()).max(1e-300);
            d1.sup_norm().max(d2.sup_norm()) / scale
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityExcessReport {
    pub e_v: f64,
    pub oscillation: f64,
    pub e_nl: f64,
    pub ratio: f64,
}

/// E^V(r) against the theta oscillation and E^NL on the 3r/2 cylinder.
pub fn velocity_excess_bound_check(traj: &Trajectory, cyl: &Cylinder, params: &ExcessParams) -> Result<VelocityExcessReport> {
    if !matches!(cyl.shape, CylinderShape::Parabolic) {
        return Err(SqgError::Parameter("velocity excess check needs a parabolic cylinder".into()));
    }
    let defect = velocity_form_defect(traj);
    if defect > 1e-8 {
        return Err(SqgError::Precondition(format!(
            "velocity is not R^perp theta plus a spatial constant (defect {defect:.2e})"
        )));
    }
    let e_v = excess_v(traj, cyl, params)?;
    let big = cyl.with_radius(1.5 * cyl.r);
    let (a, b) = big.time_interval();
    let w = window(traj, &big.ball(), a, b)?;
    let n = w.cells.len() as f64;
    let p = params.p;
    let osc = w.integrate(|k| {
        let v = traj.thetas[k].values();
        let m = w.cells.iter().map(|c| v[c.idx]).sum::<f64>() / n;
        w.cells.iter().map(|c| (v[c.idx] - m).abs().powf(p)).sum::<f64>() / n
    });
    let oscillation = (osc / w.duration).powf(1.0 / p);
    let e_nl = excess_nl(traj, &big, params, &RadiusLadder::for_nonlocal(big.r, traj.grid())?)?;
    let rhs = oscillation + e_nl;
    Ok(VelocityExcessReport { e_v, oscillation, e_nl, ratio: if rhs == 0.0 { 0.0 } else { e_v / rhs } })
}
