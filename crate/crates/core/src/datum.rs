//! Initial data.

use std::f64::consts::TAU;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SqgError};
use crate::field::ScalarField;
use crate::grid::GridSpec;
use crate::io::read_field;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumKind {
    GaussianBump {
        #[serde(default)]
        center: Option<[f64; 2]>,
        width: f64,
    },
    RandomBandlimited {
        #[serde(default = "one")]
        k_min: f64,
        k_max: f64,
        /// amplitude ~ |k|^{-slope}
        #[serde(default)]
        slope: f64,
    },
    ShearLayer {
        width: f64,
        #[serde(default)]
        perturbation: f64,
    },
    VortexPair {
        separation: f64,
        width: f64,
    },
    File {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    L2(f64),
    Linf(f64),
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDatum {
    #[serde(flatten)]
    pub kind: DatumKind,
    pub normalize: Normalization,
}

impl InitialDatum {
    pub fn validate(&self, grid: &GridSpec) -> Vec<String> {
        let mut bad = Vec::new();
        let pos = |name: &str, v: f64, bad: &mut Vec<String>| {
            if !(v > 0.0 && v.is_finite()) {
                bad.push(format!("datum.{name}={v} must be positive"));
            }
        };
        match &self.kind {
            DatumKind::GaussianBump { width, .. } => pos("width", *width, &mut bad),
            DatumKind::RandomBandlimited { k_min, k_max, slope } => {
                let nyq = (grid.n / 2) as f64 * TAU / grid.box_length;
                if !(*k_min >= 0.0 && k_max >= k_min) {
                    bad.push(format!("datum.k_min={k_min}, k_max={k_max} must satisfy 0 <= k_min <= k_max"));
                }
                if *k_max >= nyq {
                    bad.push(format!("datum.k_max={k_max} must stay below the Nyquist wavenumber {nyq}"));
                }
                if !slope.is_finite() {
                    bad.push("datum.slope must be finite".into());
                }
            }
            DatumKind::ShearLayer { width, perturbation } => {
                pos("width", *width, &mut bad);
                if !perturbation.is_finite() {
                    bad.push("datum.perturbation must be finite".into());
                }
            }
            DatumKind::VortexPair { separation, width } => {
                pos("separation", *separation, &mut bad);
                pos("width", *width, &mut bad);
            }
            DatumKind::File { .. } => {}
        }
        match self.normalize {
            Normalization::L2(v) | Normalization::Linf(v) if !(v > 0.0) => {
                bad.push(format!("datum.normalize target {v} must be positive"))
            }
            _ => {}
        }
        bad
    }
}

fn bump(g: &GridSpec, c: [f64; 2], w: f64) -> impl Fn(f64, f64) -> f64 + Sync + '_ {
    move |x, y| {
        let d = g.periodic_distance([x, y], c);
        (-0.5 * d * d / (w * w)).exp()
    }
}

/// Mean-zero field of the requested kind, normalized as asked; randomness comes only from `seed`.
pub fn generate_datum(spec: &InitialDatum, grid: &GridSpec, seed: u64) -> Result<ScalarField> {
    let bad = spec.validate(grid);
    if !bad.is_empty() {
        return Err(SqgError::Config(bad));
    }
    let l = grid.box_length;
    let raw = match &spec.kind {
        DatumKind::GaussianBump { center, width } => {
            let c = center.unwrap_or([0.5 * l, 0.5 * l]);
            ScalarField::from_fn(*grid, 0.0, bump(grid, c, *width))?
        }
        DatumKind::RandomBandlimited { k_min, k_max, slope } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k0 = TAU / l;
            let mmax = (k_max / k0).floor() as i64;
            let mut modes = Vec::new();
            // half plane: m2 > 0, or m2 = 0 and m1 > 0
            for m2 in 0..=mmax {
                for m1 in -mmax..=mmax {
                    if m2 == 0 && m1 <= 0 {
                        continue;
                    }
                    let k = k0 * ((m1 * m1 + m2 * m2) as f64).sqrt();
                    if k < *k_min || k > *k_max {
                        continue;
                    }
                    let amp = rng.gen_range(0.5..1.0) * k.powf(-slope);
                    let phase = rng.gen_range(0.0..TAU);
                    modes.push((k0 * m1 as f64, k0 * m2 as f64, amp, phase));
                }
            }
            if modes.is_empty() {
                return Err(SqgError::Config(vec![format!("datum band [{k_min}, {k_max}] holds no modes")]));
            }
            ScalarField::from_fn(*grid, 0.0, |x, y| {
                modes.iter().map(|&(a, b, amp, ph)| amp * (a * x + b * y + ph).cos()).sum()
            })?
        }
        DatumKind::ShearLayer { width, perturbation } => {
            let w = *width;
            let eps = *perturbation;
            // two smoothed interfaces at y = 0 and y = L/2
            ScalarField::from_fn(*grid, 0.0, move |x, y| {
                let yy = y + eps * (TAU * x / l).sin();
                ((TAU * yy / l).sin() * l / (TAU * w)).tanh()
            })?
        }
        DatumKind::VortexPair { separation, width } => {
            let c1 = [0.5 * (l - separation), 0.5 * l];
            let c2 = [0.5 * (l + separation), 0.5 * l];
            let (b1, b2) = (bump(grid, c1, *width), bump(grid, c2, *width));
            ScalarField::from_fn(*grid, 0.0, |x, y| b1(x, y) - b2(x, y))?
        }
        DatumKind::File { path } => {
            let f = read_field(path)?;
            if f.grid().n != grid.n || (f.grid().box_length - grid.box_length).abs() > 1e-12 * grid.box_length {
                return Err(SqgError::Data(format!(
                    "{} holds an n={} box {} field, expected n={} box {}",
                    path.display(),
                    f.grid().n,
                    f.grid().box_length,
                    grid.n,
                    grid.box_length
                )));
            }
            ScalarField::from_values(*grid, f.values().to_vec(), 0.0)?
        }
    };
    let f = raw.mean_zero();
    let scale = match spec.normalize {
        Normalization::L2(t) => t / f.l2_norm(),
        Normalization::Linf(t) => t / f.sup_norm(),
        Normalization::None => 1.0,
    };
    if !scale.is_finite() {
        return Err(SqgError::Data("datum is constant and cannot be normalized".into()));
    }
    Ok(f.scaled(scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bandlimited_is_normalized_and_seeded() {
        let g = GridSpec::new(32, TAU, 0.45).unwrap();
        let spec = InitialDatum {
            kind: DatumKind::RandomBandlimited { k_min: 1.0, k_max: 5.0, slope: 1.0 },
            normalize: Normalization::L2(1.0),
        };
        let a = generate_datum(&spec, &g, 3).unwrap();
        assert!((a.l2_norm() - 1.0).abs() < 1e-12);
        assert!(a.mean().abs() < 1e-14);
        assert_eq!(a.values(), generate_datum(&spec, &g, 3).unwrap().values());
        assert_ne!(a.values(), generate_datum(&spec, &g, 4).unwrap().values());
        // no energy outside the band
        let hi: f64 = (0..g.len()).filter(|&i| g.k_sq(i) > 25.0 + 1e-9).map(|i| a.spectral()[i].norm()).sum();
        assert!(hi < 1e-9);
    }
}
