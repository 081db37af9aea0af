//! Integrating-factor RK2 time stepping with an energy ledger.

use std::collections::HashMap;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SqgError};
use crate::field::{ScalarField, VectorField};
use crate::grid::{fft2, GridSpec};
use crate::quadrature::time_integral;
use crate::spectral::{frac_heat_step, riesz_velocity};

/// Velocity fields imposed instead of the Riesz law.
#[derive(Debug, Clone, PartialEq)]
pub enum PrescribedVelocity {
    Zero,
    Uniform([f64; 2]),
    Steady(VectorField),
}

#[derive(Debug, Clone, PartialEq)]
pub enum VelocityMode {
    Coupled,
    Prescribed(PrescribedVelocity),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub grid: GridSpec,
    pub dt: f64,
    pub t_end: f64,
    pub eps_visc: f64,
    pub cfl_safety: f64,
    pub snapshot_stride: usize,
    pub velocity_mode: VelocityMode,
    /// Blow-up is declared once the grid sup norm exceeds this value.
    pub linf_limit: f64,
    /// Blow-up is declared once more steps than this needed CFL substepping.
    pub max_cfl_violations: usize,
    /// Upsampling factor for the ledger's sup norm.
    pub sup_refine: usize,
}

impl SolverConfig {
    pub fn new(grid: GridSpec, dt: f64, t_end: f64) -> Result<Self> {
        let cfg = Self {
            grid,
            dt,
            t_end,
            eps_visc: 0.0,
            cfl_safety: 0.5,
            snapshot_stride: 1,
            velocity_mode: VelocityMode::Coupled,
            linf_limit: 1e8,
            max_cfl_violations: 1000,
            sup_refine: 2,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            bad.push(format!("dt={} must be positive", self.dt));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            bad.push(format!("t_end={} must be positive", self.t_end));
        }
        if !(self.eps_visc >= 0.0) {
            bad.push(format!("eps_visc={} must be nonnegative", self.eps_visc));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            bad.push(format!("cfl_safety={} must lie in (0,1]", self.cfl_safety));
        }
        if self.snapshot_stride == 0 {
            bad.push("snapshot_stride must be >= 1".into());
        }
        if let VelocityMode::Prescribed(PrescribedVelocity::Steady(u)) = &self.velocity_mode {
            if *u.grid() != self.grid {
                bad.push("prescribed velocity grid differs from solver grid".into());
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(SqgError::Config(bad))
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps_visc = eps;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn with_velocity(mut self, mode: VelocityMode) -> Self {
        self.velocity_mode = mode;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BlowUp { t: f64, reason: String },
}

/// Time-ordered frames of (theta, u).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub thetas: Vec<ScalarField>,
    pub velocities: Vec<VectorField>,
    pub times: Vec<f64>,
    pub initial_l2: f64,
    pub coupled: bool,
    pub status: RunStatus,
}

impl Trajectory {
    pub fn from_frames(thetas: Vec<ScalarField>, velocities: Vec<VectorField>, coupled: bool) -> Result<Self> {
        if thetas.is_empty() || thetas.len() != velocities.len() {
            return Err(SqgError::Data("need matching, nonempty theta and u frames".into()));
        }
        let g = *thetas[0].grid();
        let times: Vec<f64> = thetas.iter().map(|f| f.time()).collect();
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SqgError::Data("frame times must be strictly increasing".into()));
        }
        if thetas.iter().any(|f| *f.grid() != g) || velocities.iter().any(|u| *u.grid() != g) {
            return Err(SqgError::Data("frames live on different grids".into()));
        }
        let initial_l2 = thetas[0].l2_norm();
        Ok(Self { thetas, velocities, times, initial_l2, coupled, status: RunStatus::Completed })
    }

    /// Frames with u = R^perp theta.
    pub fn coupled(thetas: Vec<ScalarField>) -> Result<Self> {
        let us = thetas.par_iter().map(riesz_velocity).collect();
        Self::from_frames(thetas, us, true)
    }

    pub fn grid(&self) -> &GridSpec {
        self.thetas[0].grid()
    }

    pub fn alpha(&self) -> f64 {
        self.grid().alpha
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// theta_r, u_r on the box L/r with times t / r^{2 alpha}.
    pub fn rescaled(&self, r: f64) -> Result<Self> {
        let thetas = self.thetas.iter().map(|f| f.rescaled(r)).collect::<Result<Vec<_>>>()?;
        let us = self.velocities.iter().map(|u| u.rescaled(r)).collect::<Result<Vec<_>>>()?;
        let mut t = Self::from_frames(thetas, us, self.coupled)?;
        t.initial_l2 = self.initial_l2 * r.powf(2.0 * self.alpha() - 2.0);
        Ok(t)
    }

    /// Joint amplitude scaling of theta and u.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            thetas: self.thetas.iter().map(|f| f.scaled(lambda)).collect(),
            velocities: self.velocities.iter().map(|u| u.scaled(lambda)).collect(),
            times: self.times.clone(),
            initial_l2: self.initial_l2 * lambda.abs(),
            coupled: self.coupled,
            status: self.status.clone(),
        }
    }

    /// Largest grid sup norm of theta over frames in `[a, b]`.
    pub fn sup_over(&self, a: f64, b: f64) -> f64 {
        crate::quadrature::frames_in(&self.times, a, b)
            .into_iter()
            .map(|k| self.thetas[k].sup_norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: f64,
    pub l2sq: f64,
    pub dissipation_cum: f64,
    pub visc_cum: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
}

impl EnergyLedger {
    /// |l2sq + 2 (diss + visc) - l2sq(0)| / l2sq(0) at each row.
    pub fn relative_defects(&self) -> Vec<f64> {
        let e0 = self.rows.first().map(|r| r.l2sq).unwrap_or(0.0);
        self.rows
            .iter()
            .map(|r| {
                let bal = r.l2sq + 2.0 * (r.dissipation_cum + r.visc_cum);
                if e0 == 0.0 {
                    bal.abs()
                } else {
                    (bal - e0).abs() / e0
                }
            })
            .collect()
    }

    pub fn max_relative_defect(&self) -> f64 {
        self.relative_defects().into_iter().fold(0.0, f64::max)
    }

    /// Energy inequality between every stored pair with multiplicative slack.
    pub fn inequality_holds(&self, slack: f64) -> bool {
        let r = &self.rows;
        (0..r.len()).all(|s| {
            (s + 1..r.len()).all(|t| {
                let spent = r[t].dissipation_cum - r[s].dissipation_cum + r[t].visc_cum - r[s].visc_cum;
                r[t].l2sq + 2.0 * spent <= r[s].l2sq * (1.0 + slack) + 1e-300
            })
        })
    }

    /// Sup norm never grows by more than `rel_slack` between rows.
    pub fn linf_non_increasing(&self, rel_slack: f64) -> bool {
        self.rows.windows(2).all(|w| w[1].linf <= w[0].linf * (1.0 + rel_slack) + 1e-300)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r).map_err(|e| SqgError::Io(e.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub ledger: EnergyLedger,
    pub cfl_violations: usize,
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Per-grid spectral tables shared by all steps of a run.
struct Tables {
    grid: GridSpec,
    k1: Vec<f64>,
    k2: Vec<f64>,
    frac: Vec<f64>,
    lap: Vec<f64>,
    mask: Vec<bool>,
    riesz: Vec<(f64, f64)>,
    eps: f64,
    velocity: VelocityMode,
}

impl Tables {
    fn new(cfg: &SolverConfig) -> Self {
        let g = cfg.grid;
        let n = g.n;
        let mut k1 = vec![0.0; g.len()];
        let mut k2 = vec![0.0; g.len()];
        let mut riesz = vec![(0.0, 0.0); g.len()];
        let mut frac = vec![0.0; g.len()];
        let mut lap = vec![0.0; g.len()];
        for idx in 0..g.len() {
            let (i, j) = (idx % n, idx / n);
            let nyq = g.is_nyquist(i) || g.is_nyquist(j);
            let (a, b) = (g.wavenumber(i), g.wavenumber(j));
            let ks = a * a + b * b;
            if !nyq {
                k1[idx] = a;
                k2[idx] = b;
            }
            if ks > 0.0 && !nyq {
                let k = ks.sqrt();
                riesz[idx] = (-b / k, a / k);
            }
            frac[idx] = ks.powf(g.alpha);
            lap[idx] = ks;
        }
        Self {
            grid: g,
            k1,
            k2,
            frac,
            lap,
            mask: g.dealias_mask(),
            riesz,
            eps: cfg.eps_visc,
            velocity: cfg.velocity_mode.clone(),
        }
    }

    fn decay(&self, dt: f64) -> Vec<f64> {
        self.frac.iter().zip(&self.lap).map(|(f, l)| (-(f + self.eps * l) * dt).exp()).collect()
    }

    /// Velocity samples for the current state.
    fn velocity(&self, spec: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.n;
        match &self.velocity {
            VelocityMode::Coupled => {
                let fft = fft2(n);
                let mut u1: Vec<Complex64> =
                    spec.iter().zip(&self.riesz).map(|(c, r)| c * Complex64::new(0.0, r.0)).collect();
                let mut u2: Vec<Complex64> =
                    spec.iter().zip(&self.riesz).map(|(c, r)| c * Complex64::new(0.0, r.1)).collect();
                fft.inverse(&mut u1);
                fft.inverse(&mut u2);
                (u1.iter().map(|c| c.re).collect(), u2.iter().map(|c| c.re).collect())
            }
            VelocityMode::Prescribed(PrescribedVelocity::Zero) => (vec![0.0; n * n], vec![0.0; n * n]),
            VelocityMode::Prescribed(PrescribedVelocity::Uniform(v)) => (vec![v[0]; n * n], vec![v[1]; n * n]),
            VelocityMode::Prescribed(PrescribedVelocity::Steady(u)) => (u.u1.values().to_vec(), u.u2.values().to_vec()),
        }
    }

    /// -div(u theta), dealiased, and max |u|.
    fn nonlinear(&self, spec: &[Complex64]) -> (Vec<Complex64>, f64) {
        if let VelocityMode::Prescribed(PrescribedVelocity::Zero) = self.velocity {
            return (vec![zero(); spec.len()], 0.0);
        }
        let n = self.grid.n;
        let fft = fft2(n);
        let mut th = spec.to_vec();
        fft.inverse(&mut th);
        let (u1, u2) = self.velocity(spec);
        let umax = u1.iter().zip(&u2).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max);
        let mut f1: Vec<Complex64> = th.iter().zip(&u1).map(|(t, u)| Complex64::new(t.re * u, 0.0)).collect();
        let mut f2: Vec<Complex64> = th.iter().zip(&u2).map(|(t, u)| Complex64::new(t.re * u, 0.0)).collect();
        fft.forward(&mut f1);
        fft.forward(&mut f2);
        let out = (0..spec.len())
            .map(|i| {
                if !self.mask[i] {
                    return zero();
                }
                -Complex64::new(0.0, 1.0) * (f1[i] * self.k1[i] + f2[i] * self.k2[i])
            })
            .collect();
        (out, umax)
    }

    fn advisory_dt(&self, umax: f64, safety: f64) -> f64 {
        if umax > 0.0 {
            safety * self.grid.spacing() / umax
        } else {
            f64::INFINITY
        }
    }

    /// One IFRK2 step given N(a) already evaluated.
    fn advance(&self, a: &[Complex64], na: &[Complex64], e: &[f64], dt: f64) -> Vec<Complex64> {
        let b: Vec<Complex64> = (0..a.len()).map(|i| (a[i] + na[i] * dt) * e[i]).collect();
        let (nb, _) = self.nonlinear(&b);
        (0..a.len()).map(|i| (a[i] + na[i] * (0.5 * dt)) * e[i] + nb[i] * (0.5 * dt)).collect()
    }

    /// Integrated dissipation over a step with exponential-in-time mode energies.
    fn dissipation(&self, a: &[Complex64], b: &[Complex64], dt: f64) -> (f64, f64) {
        let n2 = self.grid.len() as f64;
        let norm = self.grid.box_length.powi(2) / (n2 * n2);
        let per: Vec<(f64, f64)> = (0..a.len())
            .into_par_iter()
            .map(|i| {
                let (x, y) = (a[i].norm_sqr(), b[i].norm_sqr());
                let m = log_mean(x, y) * dt;
                (self.frac[i] * m, self.eps * self.lap[i] * m)
            })
            .collect();
        let (d, v) = per.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
        (d * norm, v * norm)
    }
}

/// (a - b) / ln(a / b), the time average of an exponential through a and b.
fn log_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.5 * (a + b);
    }
    let r = a / b;
    if (r - 1.0).abs() < 1e-6 {
        let x = r - 1.0;
        // series of x / ln(1 + x)
        b * (1.0 + x / 2.0 - x * x / 12.0 + x * x * x / 24.0)
    } else {
        (a - b) / r.ln()
    }
}

/// u . grad theta as computed by the stepper (dealiased divergence form).
pub fn advection_term(theta: &ScalarField, mode: &VelocityMode) -> Result<ScalarField> {
    let mut cfg = SolverConfig::new(*theta.grid(), 1.0, 1.0)?;
    cfg.velocity_mode = mode.clone();
    let t = Tables::new(&cfg);
    let (n, _) = t.nonlinear(theta.spectral());
    let neg: Vec<Complex64> = n.iter().map(|c| -c).collect();
    ScalarField::from_spectral(*theta.grid(), &neg, theta.time())
}

/// One step of size `cfg.dt`; rejected when it violates the advective CFL bound.
pub fn step(state: &ScalarField, cfg: &SolverConfig) -> Result<ScalarField> {
    cfg.validate()?;
    if state.grid() != &cfg.grid {
        return Err(SqgError::Data("state grid differs from solver grid".into()));
    }
    let t = Tables::new(cfg);
    let (na, umax) = t.nonlinear(state.spectral());
    let adv = t.advisory_dt(umax, cfg.cfl_safety);
    if cfg.dt > adv {
        return Err(SqgError::Cfl { dt: cfg.dt, advisory_dt: adv });
    }
    let next = t.advance(state.spectral(), &na, &t.decay(cfg.dt), cfg.dt);
    let out = ScalarField::from_spectral(cfg.grid, &next, state.time() + cfg.dt).map_err(|_| SqgError::BlowUp {
        t: state.time() + cfg.dt,
        reason: "non-finite state".into(),
    })?;
    Ok(out)
}

fn velocity_frame(theta: &ScalarField, mode: &VelocityMode) -> VectorField {
    let (g, t) = (*theta.grid(), theta.time());
    match mode {
        VelocityMode::Coupled => riesz_velocity(theta),
        VelocityMode::Prescribed(PrescribedVelocity::Zero) => VectorField::zeros(g, t),
        VelocityMode::Prescribed(PrescribedVelocity::Uniform(v)) => VectorField::uniform(g, *v, t),
        VelocityMode::Prescribed(PrescribedVelocity::Steady(u)) => u.clone().with_time(t),
    }
}

/// Integrate to `t_end`, storing every `snapshot_stride`-th step and the final state.
pub fn run(theta0: &ScalarField, cfg: &SolverConfig) -> Result<RunOutput> {
    cfg.validate()?;
    if theta0.grid() != &cfg.grid {
        return Err(SqgError::Data("initial datum grid differs from solver grid".into()));
    }
    let tables = Tables::new(cfg);
    let t0 = theta0.time();
    let n_steps = ((cfg.t_end / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
    let mut decays: HashMap<u64, Vec<f64>> = HashMap::new();
    let mut decay_for = |dt: f64| -> Vec<f64> { decays.entry(dt.to_bits()).or_insert_with(|| tables.decay(dt)).clone() };

    let mut spec = theta0.spectral().to_vec();
    let mut frames = vec![theta0.clone()];
    let mut rows = vec![LedgerRow {
        t: t0,
        l2sq: theta0.l2_norm_sq(),
        dissipation_cum: 0.0,
        visc_cum: 0.0,
        linf: theta0.sup_norm_refined(cfg.sup_refine),
    }];
    let (mut diss, mut visc) = (0.0, 0.0);
    let mut violations = 0usize;
    let mut status = RunStatus::Completed;
    let mut t = t0;

    for k in 0..n_steps {
        let dt = if k + 1 == n_steps { t0 + cfg.t_end - t } else { cfg.dt };
        let (na, umax) = tables.nonlinear(&spec);
        let adv = tables.advisory_dt(umax, cfg.cfl_safety);
        let next = if dt <= adv {
            tables.advance(&spec, &na, &decay_for(dt), dt)
        } else {
            violations += 1;
            if violations > cfg.max_cfl_violations {
                status = RunStatus::BlowUp { t, reason: format!("{violations} CFL violations") };
                break;
            }
            let m = (dt / adv).ceil() as usize;
            let sub = dt / m as f64;
            let e = decay_for(sub);
            let mut s = tables.advance(&spec, &na, &e, sub);
            for _ in 1..m {
                let (ns, _) = tables.nonlinear(&s);
                s = tables.advance(&s, &ns, &e, sub);
            }
            s
        };
        if next.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            status = RunStatus::BlowUp { t: t + dt, reason: "non-finite state".into() };
            break;
        }
        let (d, v) = tables.dissipation(&spec, &next, dt);
        diss += d;
        visc += v;
        spec = next;
        t = if k + 1 == n_steps { t0 + cfg.t_end } else { t + dt };

        let last = k + 1 == n_steps;
        if (k + 1) % cfg.snapshot_stride == 0 || last {
            let f = ScalarField::from_spectral(cfg.grid, &spec, t)?;
            let linf = f.sup_norm_refined(cfg.sup_refine);
            rows.push(LedgerRow { t, l2sq: f.l2_norm_sq(), dissipation_cum: diss, visc_cum: visc, linf });
            let over = f.sup_norm() > cfg.linf_limit;
            frames.push(f);
            if over {
                status = RunStatus::BlowUp { t, reason: format!("sup norm above {}", cfg.linf_limit) };
                break;
            }
        }
    }

    let velocities = frames.iter().map(|f| velocity_frame(f, &cfg.velocity_mode)).collect();
    let mut trajectory = Trajectory::from_frames(frames, velocities, cfg.velocity_mode == VelocityMode::Coupled)?;
    trajectory.status = status;
    Ok(RunOutput { trajectory, ledger: EnergyLedger { rows }, cfl_violations: violations })
}

/// Late-time sup-norm envelope against t^{-1/(2 alpha)}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub slope: Option<f64>,
    pub expected_slope: f64,
    /// sup_t ||theta(t)||_inf t^{1/(2 alpha)} / ||theta_0||_2
    pub implied_constant: f64,
    pub ratios: Vec<(f64, f64)>,
    pub bounded: bool,
    pub inconclusive: bool,
}

pub fn linf_decay_check(traj: &Trajectory) -> DecayReport {
    let a = traj.alpha();
    let expo = 1.0 / (2.0 * a);
    let t0 = traj.times[0];
    let l2 = traj.initial_l2;
    let samples: Vec<(f64, f64)> = traj
        .thetas
        .par_iter()
        .zip(&traj.times)
        .filter(|(_, &t)| t > t0)
        .map(|(f, &t)| (t - t0, f.sup_norm_refined(2)))
        .collect();
    if l2 == 0.0 || samples.iter().all(|s| s.1 == 0.0) {
        return DecayReport {
            slope: None,
            expected_slope: -expo,
            implied_constant: 0.0,
            ratios: samples.iter().map(|s| (s.0, 0.0)).collect(),
            bounded: true,
            inconclusive: false,
        };
    }
    let ratios: Vec<(f64, f64)> = samples.iter().map(|&(t, s)| (t, s * t.powf(expo) / l2)).collect();
    let implied_constant = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    let span_ok = samples.len() >= 4 && samples.last().unwrap().0 / samples[0].0 >= 10.0;
    let late: Vec<(f64, f64)> = {
        let tl = samples.last().unwrap().0;
        samples
            .iter()
            .filter(|s| s.0 >= tl / 10f64.sqrt() && s.1 > 0.0)
            .map(|s| (s.0.ln(), s.1.ln()))
            .collect()
    };
    let slope = (late.len() >= 2).then(|| least_squares(&late).0);
    let bounded = implied_constant.is_finite()
        && (slope.is_some_and(|s| s <= -expo + 0.05)
            || ratios.iter().rev().take(3).all(|r| r.1 <= implied_constant * (1.0 - 1e-12)));
    DecayReport {
        slope,
        expected_slope: -expo,
        implied_constant,
        ratios,
        bounded,
        inconclusive: !span_ok || slope.is_none(),
    }
}

/// Slope, intercept and slope standard error.
pub(crate) fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return (0.0, my, 0.0);
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let se = if pts.len() > 2 {
        let rss: f64 = pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
        (rss / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, icpt, se)
}

/// (integral of ||a - b||_2^2 dt)^{1/2} over shared frame times.
pub fn spacetime_l2_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.times.len() != b.times.len() || a.times.iter().zip(&b.times).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(SqgError::Data("trajectories do not share frame times".into()));
    }
    let (t0, t1) = (a.times[0], *a.times.last().unwrap());
    let d = time_integral(&a.times, t0, t1, |k| {
        a.thetas[k].zip_with(&b.thetas[k], |x, y| x - y).map(|f| f.l2_norm_sq()).unwrap_or(f64::NAN)
    })?;
    Ok(d.sqrt())
}

pub fn spacetime_l2_norm(a: &Trajectory) -> Result<f64> {
    let (t0, t1) = (a.times[0], *a.times.last().unwrap());
    Ok(time_integral(&a.times, t0, t1, |k| a.thetas[k].l2_norm_sq())?.sqrt())
}

#[derive(Debug, Clone)]
pub struct ViscosityFamily {
    pub eps: Vec<f64>,
    pub members: Vec<RunOutput>,
    /// Distances between consecutive members.
    pub distances: Vec<f64>,
}

pub fn vanishing_viscosity_family(theta0: &ScalarField, cfg: &SolverConfig, eps_list: &[f64]) -> Result<ViscosityFamily> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1] >= w[0]) || *eps_list.last().unwrap() < 0.0 {
        return Err(SqgError::Parameter("eps_list must be strictly decreasing to a floor >= 0".into()));
    }
    let members = eps_list
        .par_iter()
        .map(|&e| run(theta0, &cfg.clone().with_eps(e)))
        .collect::<Result<Vec<_>>>()?;
    let distances = members
        .windows(2)
        .map(|w| spacetime_l2_distance(&w[0].trajectory, &w[1].trajectory))
        .collect::<Result<Vec<_>>>()?;
    Ok(ViscosityFamily { eps: eps_list.to_vec(), members, distances })
}

/// Exact linear evolution sampled at the frame times of `traj`.
pub fn heat_oracle(theta0: &ScalarField, times: &[f64], eps_visc: f64) -> Result<Vec<ScalarField>> {
    times
        .iter()
        .map(|&t| {
            let dt = t - theta0.time();
            if dt == 0.0 {
                Ok(theta0.clone())
            } else {
                frac_heat_step(theta0, dt, theta0.grid().alpha, eps_visc)
            }
        })
        .collect()
}
