//! Weighted harmonic extension to the upper half-space and its Dirichlet energies.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::ExtensionProfile;
use crate::error::{Result, SqgError};
use crate::field::ScalarField;
use crate::quadrature::{ball_average, ball_cells, Ball};

/// Largest grading exponent; keeps the first gap ratio 2^kappa - 1 at most 4.
pub const MAX_KAPPA: f64 = 2.321_928_094_887_362; // log2(5)

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalGrid {
    y_levels: Vec<f64>,
    y_max: f64,
    b: f64,
}

impl VerticalGrid {
    /// y_j = y_max (j/J)^kappa with kappa = 2/(1+b), capped at log2(5).
    pub fn graded(y_max: f64, levels: usize, alpha: f64) -> Result<Self> {
        if levels < 2 || !(y_max > 0.0 && y_max.is_finite()) {
            return Err(SqgError::Parameter(format!("need >= 2 levels and y_max > 0 (got {levels}, {y_max})")));
        }
        let kappa = Self::kappa(alpha);
        let y = (0..=levels).map(|j| y_max * (j as f64 / levels as f64).powf(kappa)).collect();
        Self::from_levels(y, alpha)
    }

    pub fn kappa(alpha: f64) -> f64 {
        (1.0 / (1.0 - alpha)).min(MAX_KAPPA)
    }

    pub fn from_levels(y_levels: Vec<f64>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(SqgError::Parameter(format!("extension needs alpha in (0,1), got {alpha}")));
        }
        if y_levels.len() < 2 || y_levels[0] != 0.0 || y_levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SqgError::Parameter("levels must start at 0 and increase strictly".into()));
        }
        for w in y_levels.windows(3) {
            let r = (w[2] - w[1]) / (w[1] - w[0]);
            if !(r >= 1.0 - 1e-9 && r <= 4.0 + 1e-9) {
                return Err(SqgError::Parameter(format!("gap ratio {r} outside [1, 4]")));
            }
        }
        let y_max = *y_levels.last().unwrap();
        Ok(Self { y_levels, y_max, b: 1.0 - 2.0 * alpha })
    }

    pub fn y_levels(&self) -> &[f64] {
        &self.y_levels
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn alpha(&self) -> f64 {
        0.5 * (1.0 - self.b)
    }

    /// Levels up to the first one at or above `cap`.
    pub fn truncated(&self, cap: f64) -> Result<Self> {
        if cap > self.y_max * (1.0 + 1e-12) {
            return Err(SqgError::Geometry(format!("vertical cap {cap} exceeds y_max {}", self.y_max)));
        }
        let k = self.y_levels.iter().position(|&y| y >= cap * (1.0 - 1e-12)).unwrap_or(self.y_levels.len() - 1);
        let k = k.max(1);
        Ok(Self { y_levels: self.y_levels[..=k].to_vec(), y_max: self.y_levels[k], b: self.b })
    }

    /// Exact integral of y^b times the linear interpolant of `vals` over `[0, cap]`.
    pub fn weighted_integral(&self, vals: &[f64], cap: f64) -> f64 {
        let y = &self.y_levels;
        let mut acc = 0.0;
        for j in 0..y.len() - 1 {
            let (y0, y1) = (y[j], y[j + 1]);
            if y0 >= cap {
                break;
            }
            let top = y1.min(cap);
            let d = y1 - y0;
            let v_top = vals[j] + (vals[j + 1] - vals[j]) * (top - y0) / d;
            acc += self.linear_cell(y0, top, vals[j], v_top);
        }
        acc
    }

    /// Integral of y^b over [a, c].
    pub fn weight_moment(&self, a: f64, c: f64) -> f64 {
        let e = self.b + 1.0;
        (c.powf(e) - a.powf(e)) / e
    }

    /// Integral of y^{-b} over [a, c].
    pub fn conductance_moment(&self, a: f64, c: f64) -> f64 {
        let e = 1.0 - self.b;
        (c.powf(e) - a.powf(e)) / e
    }

    fn linear_cell(&self, a: f64, c: f64, fa: f64, fc: f64) -> f64 {
        let (e0, e1) = (self.b + 1.0, self.b + 2.0);
        let m0 = (c.powf(e0) - a.powf(e0)) / e0;
        let m1 = (c.powf(e1) - a.powf(e1)) / e1;
        (fa * (c * m0 - m1) + fc * (m1 - a * m0)) / (c - a)
    }
}

#[derive(Debug, Clone)]
pub struct ExtendedField {
    base: ScalarField,
    vgrid: VerticalGrid,
    levels: Vec<ScalarField>,
}

impl ExtendedField {
    /// Arbitrary extension-shaped data; level 0 must be the trace.
    pub fn from_levels(vgrid: VerticalGrid, levels: Vec<ScalarField>) -> Result<Self> {
        if levels.len() != vgrid.y_levels().len() {
            return Err(SqgError::Data("level count differs from vertical grid".into()));
        }
        if levels.iter().any(|l| l.grid() != levels[0].grid()) {
            return Err(SqgError::Data("levels live on different grids".into()));
        }
        Ok(Self { base: levels[0].clone(), vgrid, levels })
    }

    pub fn base(&self) -> &ScalarField {
        &self.base
    }

    pub fn vgrid(&self) -> &VerticalGrid {
        &self.vgrid
    }

    pub fn levels(&self) -> &[ScalarField] {
        &self.levels
    }

    pub fn time(&self) -> f64 {
        self.base.time()
    }

    /// Translate every level: g(x, y) = f(x + a, y).
    pub fn shifted(&self, a: [f64; 2]) -> Self {
        let levels: Vec<ScalarField> = self.levels.par_iter().map(|l| l.shifted(a)).collect();
        Self { base: levels[0].clone(), vgrid: self.vgrid.clone(), levels }
    }
}

/// theta*(xi, y) = m(|xi| y) theta_hat(xi) on every level.
pub fn extend(theta: &ScalarField, vgrid: &VerticalGrid) -> Result<ExtendedField> {
    let g = *theta.grid();
    if (vgrid.alpha() - g.alpha).abs() > 1e-12 {
        return Err(SqgError::Parameter("vertical grid and field disagree on alpha".into()));
    }
    let prof = ExtensionProfile::new(g.alpha);
    let n = g.n;
    // |xi| only depends on m1^2 + m2^2
    let msq: Vec<usize> = (0..g.len())
        .map(|idx| {
            let (a, b) = (g.mode(idx % n), g.mode(idx / n));
            (a * a + b * b) as usize
        })
        .collect();
    let max_msq = *msq.iter().max().unwrap();
    let mut present = vec![false; max_msq + 1];
    msq.iter().for_each(|&m| present[m] = true);
    let k0 = 2.0 * std::f64::consts::PI / g.box_length;
    let levels: Vec<ScalarField> = vgrid
        .y_levels()
        .par_iter()
        .enumerate()
        .map(|(j, &y)| {
            if j == 0 {
                return theta.clone();
            }
            let table: Vec<f64> = present
                .iter()
                .enumerate()
                .map(|(m, &p)| if p { prof.value(k0 * (m as f64).sqrt() * y) } else { 0.0 })
                .collect();
            let spec: Vec<Complex64> = theta.spectral().iter().zip(&msq).map(|(c, &m)| c * table[m]).collect();
            ScalarField::from_spectral(g, &spec, theta.time()).expect("finite extension level")
        })
        .collect();
    Ok(ExtendedField { base: theta.clone(), vgrid: vgrid.clone(), levels })
}

/// Extension computed only up to the first level above `cap`.
pub fn extend_to(theta: &ScalarField, vgrid: &VerticalGrid, cap: f64) -> Result<ExtendedField> {
    extend(theta, &vgrid.truncated(cap)?)
}

/// Ball x [0, cap) restriction of the half-space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtensionRegion {
    pub ball: Ball,
    pub cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub horizontal: f64,
    pub vertical: f64,
    pub total: f64,
}

/// Integral of y^b (|grad_x theta*|^2 + |d_y theta*|^2) over the region (whole half-space slab if `None`).
pub fn weighted_dirichlet_energy(ext: &ExtendedField, region: Option<&ExtensionRegion>) -> Result<EnergyBreakdown> {
    let g = *ext.base.grid();
    let vg = &ext.vgrid;
    let cap = match region {
        Some(r) => {
            if r.cap > vg.y_max() * (1.0 + 1e-12) {
                return Err(SqgError::Geometry(format!("region cap {} exceeds y_max {}", r.cap, vg.y_max())));
            }
            r.cap
        }
        None => vg.y_max(),
    };
    let cells: Option<Vec<usize>> = match region {
        Some(r) => Some(ball_cells(&g, &r.ball)?.into_iter().map(|c| c.idx).collect()),
        None => None,
    };
    let y = vg.y_levels();
    let used = y.iter().position(|&v| v >= cap * (1.0 - 1e-12)).unwrap_or(y.len() - 1).max(1);
    let h2 = g.cell_area();
    let sum_over = |vals: &dyn Fn(usize) -> f64| -> f64 {
        match &cells {
            Some(c) => c.iter().map(|&i| vals(i)).sum::<f64>() * h2,
            None => (0..g.len()).map(vals).sum::<f64>() * h2,
        }
    };
    let horiz: Vec<f64> = ext.levels[..=used]
        .par_iter()
        .map(|l| {
            let gs = l.gradient_sq();
            sum_over(&|i| gs[i])
        })
        .collect();
    let vert: Vec<f64> = (0..used)
        .into_par_iter()
        .map(|j| {
            // y^b d_y theta* is constant across a cell for the minimizing profile
            let w = vg.conductance_moment(y[j], y[j + 1]);
            let (a, b) = (ext.levels[j].values(), ext.levels[j + 1].values());
            let q = sum_over(&|i| (b[i] - a[i]).powi(2));
            q / (w * w) * vg.conductance_moment(y[j], y[j + 1].min(cap).max(y[j]))
        })
        .collect();
    let horizontal = vg.weighted_integral(&horiz, cap);
    let vertical: f64 = vert.iter().sum();
    Ok(EnergyBreakdown { horizontal, vertical, total: horizontal + vertical })
}

/// Per-cell column energy int_0^cap y^b |grad theta*|^2 dy; `h^2` times its sum over a ball
/// equals the regional `weighted_dirichlet_energy`.
pub fn energy_column_density(ext: &ExtendedField, cap: f64) -> Result<Vec<f64>> {
    let g = *ext.base.grid();
    let vg = &ext.vgrid;
    if cap > vg.y_max() * (1.0 + 1e-12) {
        return Err(SqgError::Geometry(format!("region cap {cap} exceeds y_max {}", vg.y_max())));
    }
    let y = vg.y_levels();
    let used = y.iter().position(|&v| v >= cap * (1.0 - 1e-12)).unwrap_or(y.len() - 1).max(1);
    let weights: Vec<f64> = (0..=used)
        .map(|l| {
            let mut e = vec![0.0; y.len()];
            e[l] = 1.0;
            vg.weighted_integral(&e, cap)
        })
        .collect();
    let mut out = vec![0.0; g.len()];
    for (l, w) in weights.iter().enumerate() {
        let gs = ext.levels[l].gradient_sq();
        out.iter_mut().zip(gs).for_each(|(o, v)| *o += w * v);
    }
    for j in 0..used {
        let c = vg.conductance_moment(y[j], y[j + 1]);
        let f = vg.conductance_moment(y[j], y[j + 1].min(cap).max(y[j])) / (c * c);
        let (a, b) = (ext.levels[j].values(), ext.levels[j + 1].values());
        out.iter_mut().enumerate().for_each(|(i, o)| *o += f * (b[i] - a[i]).powi(2));
    }
    Ok(out)
}

/// Discrete -y^b d_y theta* on the first cell; proportional to (-Delta)^alpha theta.
pub fn fractional_flux(ext: &ExtendedField) -> ScalarField {
    let y1 = ext.vgrid.y_levels()[1];
    let f = -1.0 / ext.vgrid.conductance_moment(0.0, y1);
    ext.levels[1].zip_with(&ext.levels[0], |a, b| f * (a - b)).expect("same grid")
}

/// (energy of the extension, energy of the competitor) on the competitor's vertical grid.
pub fn minimality_check(theta: &ScalarField, competitor: &ExtendedField) -> Result<(f64, f64)> {
    let trace = &competitor.levels[0];
    let scale = theta.sup_norm().max(1e-300);
    if trace.grid() != theta.grid()
        || trace.values().iter().zip(theta.values()).any(|(a, b)| (a - b).abs() > 1e-12 * scale)
    {
        return Err(SqgError::Precondition("competitor trace differs from theta".into()));
    }
    let cs = extend(theta, &competitor.vgrid)?;
    Ok((weighted_dirichlet_energy(&cs, None)?.total, weighted_dirichlet_energy(competitor, None)?.total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub lhs: f64,
    pub local: f64,
    pub tail: f64,
    pub ratio: f64,
}

/// Tail estimate at scale `unit` around `center`, in unit-scale normalization:
/// lhs = int_{B_1 x [0,1)} y^b |theta*|^p, rhs = int_{B_2} |theta|^p + sup_{R >= 1} R^{-sigma p} (avg_{B_R} |theta|)^p.
pub fn tail_estimate_check(
    theta: &ScalarField,
    sigma: f64,
    p: f64,
    center: [f64; 2],
    unit: f64,
    vgrid: &VerticalGrid,
) -> Result<TailReport> {
    let a = theta.grid().alpha;
    if !(sigma > 0.0 && sigma < 2.0 * a) || !(p > 1.0 && p.is_finite()) {
        return Err(SqgError::Parameter(format!("need sigma in (0, 2 alpha) and p in (1, inf); got {sigma}, {p}")));
    }
    let g = *theta.grid();
    let ext = extend_to(theta, vgrid, unit)?;
    let vg = ext.vgrid();
    let b = vg.b();
    let cells = ball_cells(&g, &Ball::new(center, unit)?)?;
    let h2 = g.cell_area();
    let per_level: Vec<f64> = ext
        .levels()
        .iter()
        .map(|l| cells.iter().map(|c| l.values()[c.idx].abs().powf(p)).sum::<f64>() * h2)
        .collect();
    let lhs = vg.weighted_integral(&per_level, unit) / unit.powf(3.0 + b);
    let abs = ScalarField::from_values(g, theta.values().iter().map(|v| v.abs()).collect(), theta.time())?;
    let local = ball_cells(&g, &Ball::new(center, 2.0 * unit)?)?
        .iter()
        .map(|c| abs.values()[c.idx].powf(p))
        .sum::<f64>()
        * h2
        / (unit * unit);
    let mut tail: f64 = 0.0;
    let mut r = unit;
    while r <= 0.5 * g.box_length * (1.0 + 1e-12) {
        let avg = ball_average(&abs, &Ball::new(center, r)?)?;
        tail = tail.max((r / unit).powf(-sigma * p) * avg.powf(p));
        r *= 2.0;
    }
    let rhs = local + tail;
    let ratio = if rhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(TailReport { lhs, local, tail, ratio })
}
