//! Change-of-variables flow driven by the ball-averaged velocity.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cylinder::Cylinder;
use crate::error::{Result, SqgError};
use crate::excess::{excess, ExcessParams, ExcessReport};
use crate::field::{ScalarField, VectorField};
use crate::quadrature::{ball_cells, disc_average_field, time_weights, Ball};
use crate::solver::Trajectory;

/// |x_0| beyond this (unit scale) leaves the safe region.
pub const SAFE_RADIUS: f64 = 3.0 / 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Averaging ball radius as a fraction of r.
    pub fraction: f64,
    /// RK2 steps per frame interval.
    pub substeps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { fraction: 0.25, substeps: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    /// Physical time.
    pub tau: f64,
    /// Unit-scale time (tau - t) / r^{2 alpha}.
    pub s: f64,
    /// Unit-scale position.
    pub x0: [f64; 2],
    /// Unit-scale velocity dx_0/ds.
    pub xdot: [f64; 2],
    /// Physical displacement and ball-averaged velocity.
    pub disp: [f64; 2],
    pub vel: [f64; 2],
    pub frame: Option<usize>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPath {
    pub anchor_x: [f64; 2],
    pub anchor_t: f64,
    pub r: f64,
    pub alpha: f64,
    pub options: FlowOptions,
    /// Sorted by decreasing time.
    pub samples: Vec<FlowSample>,
}

impl FlowPath {
    pub fn flagged(&self) -> bool {
        self.samples.iter().any(|s| s.flagged)
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.s).collect()
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.samples.iter().map(|s| s.x0).collect()
    }

    /// Unit-scale position at s = -1.
    pub fn endpoint(&self) -> [f64; 2] {
        let t0 = self.anchor_t - self.r.powf(2.0 * self.alpha);
        let i = self
            .samples
            .iter()
            .position(|s| s.tau <= t0 + 1e-12 * (1.0 + t0.abs()))
            .unwrap_or(self.samples.len() - 1);
        if i == 0 || (self.samples[i].tau - t0).abs() <= 1e-12 * (1.0 + t0.abs()) {
            return self.samples[i].x0;
        }
        let (a, b) = (&self.samples[i - 1], &self.samples[i]);
        let w = (a.tau - t0) / (a.tau - b.tau);
        [a.x0[0] + w * (b.x0[0] - a.x0[0]), a.x0[1] + w * (b.x0[1] - a.x0[1])]
    }

    fn at_frame(&self, k: usize) -> Option<&FlowSample> {
        self.samples.iter().find(|s| s.frame == Some(k))
    }

    /// Rows (s, x01, x02, |xdot|, flag).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["s", "x01", "x02", "speed", "flag"]).map_err(|e| SqgError::Io(e.to_string()))?;
        for s in &self.samples {
            wr.write_record([
                format!("{:.17e}", s.s),
                format!("{:.17e}", s.x0[0]),
                format!("{:.17e}", s.x0[1]),
                format!("{:.17e}", s.xdot[0].hypot(s.xdot[1])),
                (s.flagged as u8).to_string(),
            ])
            .map_err(|e| SqgError::Io(e.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }
}

struct Averaged {
    first: usize,
    fields: Vec<[ScalarField; 2]>,
}

impl Averaged {
    fn eval(&self, times: &[f64], tau: f64, p: [f64; 2]) -> [f64; 2] {
        let last = self.first + self.fields.len() - 1;
        let mut j = self.first;
        while j + 1 < last && times[j + 1] <= tau {
            j += 1;
        }
        let (t0, t1) = (times[j], times[(j + 1).min(last)]);
        let w = if t1 > t0 { ((tau - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { 0.0 };
        let at = |k: usize| {
            let f = &self.fields[k - self.first];
            [f[0].evaluate_at(p), f[1].evaluate_at(p)]
        };
        if w == 0.0 {
            return at(j);
        }
        if w == 1.0 {
            return at(j + 1);
        }
        let (a, b) = (at(j), at(j + 1));
        [(1.0 - w) * a[0] + w * b[0], (1.0 - w) * a[1] + w * b[1]]
    }
}

fn bracket(times: &[f64], lo: f64, hi: f64) -> (usize, usize) {
    let tol = 1e-9 * (hi - lo).max(times[times.len() - 1] - times[0]);
    let k_lo = times.iter().rposition(|&t| t <= lo + tol).unwrap_or(0);
    let k_hi = times.iter().position(|&t| t >= hi - tol).unwrap_or(times.len() - 1);
    (k_lo, k_hi)
}

/// Integrates dX/dtau = avg_{B_{fraction r}(x + X)} u(., tau) backward from X(t) = 0
/// over [t - r^{2 alpha}, t], with second-order Runge-Kutta.
pub fn integrate_flow(traj: &Trajectory, anchor: ([f64; 2], f64), r: f64, options: FlowOptions) -> Result<FlowPath> {
    let (x, t) = anchor;
    let alpha = traj.alpha();
    if !(r > 0.0) || !(options.fraction > 0.0 && options.fraction <= 1.0) || options.substeps == 0 {
        return Err(SqgError::Parameter(format!("bad flow parameters r={r}, {options:?}")));
    }
    let depth = r.powf(2.0 * alpha);
    let lo = t - depth;
    time_weights(&traj.times, lo, t)?;
    let times = &traj.times;
    let (k_lo, k_hi) = bracket(times, lo, t);
    let radius = options.fraction * r;
    Ball::new(x, radius)?.validate(traj.grid())?;
    let fields: Vec<[ScalarField; 2]> = (k_lo..=k_hi)
        .into_par_iter()
        .map(|k| {
            let u = &traj.velocities[k];
            [disc_average_field(&u.u1, radius), disc_average_field(&u.u2, radius)]
        })
        .collect();
    if fields.iter().any(|f| f[0].values().iter().chain(f[1].values()).any(|v| !v.is_finite())) {
        return Err(SqgError::Data("non-finite velocity in flow window".into()));
    }
    let avg = Averaged { first: k_lo, fields };
    let rhs = |tau: f64, d: [f64; 2]| avg.eval(times, tau, [x[0] + d[0], x[1] + d[1]]);
    let tol = 1e-9 * depth.max(times[times.len() - 1] - times[0]);
    let frame_of = |tau: f64| (k_lo..=k_hi).find(|&k| (times[k] - tau).abs() <= tol);
    let sample = |tau: f64, d: [f64; 2], v: [f64; 2]| {
        let x0 = [d[0] / r, d[1] / r];
        let c = r.powf(2.0 * alpha - 1.0);
        FlowSample {
            tau,
            s: (tau - t) / depth,
            x0,
            xdot: [v[0] * c, v[1] * c],
            disp: d,
            vel: v,
            frame: frame_of(tau),
            flagged: x0[0].hypot(x0[1]) > SAFE_RADIUS,
        }
    };
    let march = |nodes: &[f64]| -> Vec<FlowSample> {
        let mut d = [0.0, 0.0];
        let mut v = rhs(nodes[0], d);
        let mut out = vec![sample(nodes[0], d, v)];
        for w in nodes.windows(2) {
            let h = (w[1] - w[0]) / options.substeps as f64;
            for i in 0..options.substeps {
                let tau = w[0] + h * i as f64;
                let tau1 = if i + 1 == options.substeps { w[1] } else { tau + h };
                let pred = [d[0] + h * v[0], d[1] + h * v[1]];
                let v1 = rhs(tau1, pred);
                d = [d[0] + 0.5 * h * (v[0] + v1[0]), d[1] + 0.5 * h * (v[1] + v1[1])];
                v = rhs(tau1, d);
                out.push(sample(tau1, d, v));
            }
        }
        out
    };
    let mut back = vec![t];
    back.extend((k_lo..=k_hi).rev().map(|k| times[k]).filter(|&tk| tk < t - tol));
    let mut samples = march(&back);
    if times[k_hi] > t + tol {
        let mut fwd = march(&[t, times[k_hi]]);
        fwd.remove(0);
        fwd.reverse();
        fwd.extend(samples);
        samples = fwd;
    }
    Ok(FlowPath { anchor_x: x, anchor_t: t, r, alpha, options, samples })
}

pub fn integrate_flows(traj: &Trajectory, anchors: &[([f64; 2], f64)], r: f64, options: FlowOptions) -> Vec<Result<FlowPath>> {
    anchors.par_iter().map(|&a| integrate_flow(traj, a, r, options)).collect()
}

/// theta_0(y, tau) = theta(y + x + X(tau), tau), u_0 = u(y + x + X(tau), tau) - dX/dtau,
/// on the frames bracketing [t - r^{2 alpha}, t].
pub fn shift_pair(traj: &Trajectory, path: &FlowPath) -> Result<Trajectory> {
    let (lo, hi) = (path.anchor_t - path.r.powf(2.0 * path.alpha), path.anchor_t);
    let (k_lo, k_hi) = bracket(&traj.times, lo, hi);
    let frames = (k_lo..=k_hi)
        .into_par_iter()
        .map(|k| {
            let s = path
                .at_frame(k)
                .ok_or_else(|| SqgError::Coverage(format!("flow path has no sample at frame {k} (t={})", traj.times[k])))?;
            let a = [path.anchor_x[0] + s.disp[0], path.anchor_x[1] + s.disp[1]];
            let th = traj.thetas[k].shifted(a);
            let u = traj.velocities[k].shifted(a).add_uniform([-s.vel[0], -s.vel[1]]);
            Ok((th, u))
        })
        .collect::<Result<Vec<(ScalarField, VectorField)>>>()?;
    let (thetas, us): (Vec<_>, Vec<_>) = frames.into_iter().unzip();
    let mut out = Trajectory::from_frames(thetas, us, false)?;
    out.initial_l2 = traj.initial_l2;
    Ok(out)
}

/// Largest |[u_0(tau)]_B| / sup|u| over the shifted frames, B the averaging ball at the origin.
pub fn residual_ball_average(shifted: &Trajectory, path: &FlowPath) -> Result<f64> {
    let ball = Ball::new([0.0, 0.0], path.options.fraction * path.r)?;
    let cells = ball_cells(shifted.grid(), &ball)?;
    let n = cells.len() as f64;
    Ok(shifted
        .velocities
        .par_iter()
        .map(|u| {
            let m1 = cells.iter().map(|c| u.u1.values()[c.idx]).sum::<f64>() / n;
            let m2 = cells.iter().map(|c| u.u2.values()[c.idx]).sum::<f64>() / n;
            let scale = u.sup_norm().max(1e-300);
            m1.hypot(m2) / scale
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    /// (avg_{Q_1} |u_r|^p)^{1/p}
    pub velocity_mean: f64,
    pub max_ratio: f64,
    pub holds: bool,
}

/// |x_0(s)| <= fraction^{-2/p} (avg_{Q_1}|u_r|^p)^{1/p} |s|^{1-1/p} (1 + tol) at every sample s < 0.
pub fn drift_bound_check(traj: &Trajectory, path: &FlowPath, p: f64, tol: f64) -> Result<DriftReport> {
    let cyl = Cylinder::parabolic(path.anchor_x, path.anchor_t, path.r, path.alpha)?;
    let (a, b) = cyl.time_interval();
    let cells = ball_cells(traj.grid(), &cyl.ball())?;
    let w = time_weights(&traj.times, a, b)?;
    let n = cells.len() as f64;
    let vals: Vec<f64> = w
        .par_iter()
        .map(|&(k, _)| {
            let u = &traj.velocities[k];
            cells.iter().map(|c| u.u1.values()[c.idx].hypot(u.u2.values()[c.idx]).powf(p)).sum::<f64>() / n
        })
        .collect();
    let mean = w.iter().zip(vals).map(|((_, c), v)| c * v).sum::<f64>() / (b - a);
    let velocity_mean = path.r.powf(2.0 * path.alpha - 1.0) * mean.powf(1.0 / p);
    let lead = path.options.fraction.powf(-2.0 / p) * velocity_mean;
    let max_ratio = path
        .samples
        .iter()
        .filter(|s| s.s < 0.0 && s.s >= -1.0 - 1e-12)
        .map(|s| {
            let d = s.x0[0].hypot(s.x0[1]);
            let bound = lead * (-s.s).powf(1.0 - 1.0 / p);
            if d == 0.0 {
                0.0
            } else if bound == 0.0 {
                f64::INFINITY
            } else {
                d / bound
            }
        })
        .fold(0.0, f64::max);
    Ok(DriftReport { velocity_mean, max_ratio, holds: max_ratio <= 1.0 + tol })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovReport {
    pub before: ExcessReport,
    pub after: ExcessReport,
    pub ratio: f64,
    pub path_flagged: bool,
}

/// E(theta_0, u_0; 0, t, fraction r) against E(theta, u; x, t, r).
pub fn excess_after_cov(
    traj: &Trajectory,
    anchor: ([f64; 2], f64),
    r: f64,
    params: &ExcessParams,
    options: FlowOptions,
) -> Result<CovReport> {
    let alpha = traj.alpha();
    let before = excess(traj, &Cylinder::parabolic(anchor.0, anchor.1, r, alpha)?, params)?;
    let path = integrate_flow(traj, anchor, r, options)?;
    let shifted = shift_pair(traj, &path)?;
    let after = excess(&shifted, &Cylinder::parabolic([0.0, 0.0], anchor.1, options.fraction * r, alpha)?, params)?;
    let ratio = if before.total > 0.0 { after.total / before.total } else { 0.0 };
    Ok(CovReport { before, after, ratio, path_flagged: path.flagged() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovLevel {
    pub r: f64,
    pub excess: ExcessReport,
    pub path_flagged: bool,
}

/// Repeats flow, shift and shrink `depth` times, reporting the excess at each level.
pub fn iterate_cov(
    traj: &Trajectory,
    anchor: ([f64; 2], f64),
    r: f64,
    params: &ExcessParams,
    options: FlowOptions,
    depth: usize,
) -> Result<Vec<CovLevel>> {
    let alpha = traj.alpha();
    let mut cur = traj.clone();
    let mut x = anchor.0;
    let mut rr = r;
    let mut out = Vec::with_capacity(depth + 1);
    for level in 0..=depth {
        let e = excess(&cur, &Cylinder::parabolic(x, anchor.1, rr, alpha)?, params)?;
        if level == depth {
            out.push(CovLevel { r: rr, excess: e, path_flagged: false });
            break;
        }
        let path = integrate_flow(&cur, (x, anchor.1), rr, options)?;
        out.push(CovLevel { r: rr, excess: e, path_flagged: path.flagged() });
        cur = shift_pair(&cur, &path)?;
        x = [0.0, 0.0];
        rr *= options.fraction;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn steady(u: VectorField, times: &[f64]) -> Trajectory {
        let g = *u.grid();
        let th: Vec<_> = times
            .iter()
            .map(|&t| ScalarField::from_fn(g, t, |x, y| x.sin() * y.cos()).unwrap())
            .collect();
        let us = times.iter().map(|&t| u.clone().with_time(t)).collect();
        Trajectory::from_frames(th, us, false).unwrap()
    }

    #[test]
    fn zero_and_constant_velocity() {
        let g = GridSpec::new(32, std::f64::consts::TAU, 0.45).unwrap();
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let tr = steady(VectorField::zeros(g, 0.0), &times);
        let p = integrate_flow(&tr, ([1.0, 2.0], 0.95), 0.8, FlowOptions::default()).unwrap();
        assert!(p.samples.iter().all(|s| s.x0 == [0.0, 0.0]));
        assert_eq!(p.samples.iter().find(|s| s.tau == 0.95).unwrap().x0, [0.0, 0.0]);

        let v = [0.3, -0.2];
        let tr = steady(VectorField::uniform(g, v, 0.0), &times);
        let p = integrate_flow(&tr, ([1.0, 2.0], 0.9), 0.8, FlowOptions::default()).unwrap();
        for s in &p.samples {
            let tau = s.tau - 0.9;
            assert!((s.disp[0] - v[0] * tau).abs() < 1e-12 && (s.disp[1] - v[1] * tau).abs() < 1e-12);
        }
        let sh = shift_pair(&tr, &p).unwrap();
        assert!(sh.velocities.iter().all(|u| u.sup_norm() < 1e-12));
    }
}
