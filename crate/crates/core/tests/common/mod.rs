#![allow(dead_code)]

use std::f64::consts::TAU;

use sqg_core::datum::{generate_datum, DatumKind, InitialDatum, Normalization};
use sqg_core::extension::VerticalGrid;
use sqg_core::solver::{run, RunOutput, SolverConfig};
use sqg_core::{GridSpec, ScalarField};

pub fn grid(n: usize, alpha: f64) -> GridSpec {
    GridSpec::new(n, TAU, alpha).unwrap()
}

/// Unit-L2, mean-zero field with modes 1 <= |k| <= k_max; the modes depend only on the seed,
/// so the same seed gives the same function on every grid that resolves it.
pub fn random_field(g: GridSpec, seed: u64, k_max: f64, slope: f64) -> ScalarField {
    let spec = InitialDatum {
        kind: DatumKind::RandomBandlimited { k_min: 1.0, k_max, slope },
        normalize: Normalization::L2(1.0),
    };
    generate_datum(&spec, &g, seed).unwrap()
}

pub fn vgrid(g: &GridSpec) -> VerticalGrid {
    VerticalGrid::graded(0.5 * g.box_length, 64, g.alpha).unwrap()
}

/// Smooth coupled run from a band-limited datum.
pub fn desk_run(n: usize, alpha: f64, seed: u64, t_end: f64, dt: f64, stride: usize) -> RunOutput {
    let g = grid(n, alpha);
    let theta0 = random_field(g, seed, 6.0, 1.0);
    let cfg = SolverConfig::new(g, dt, t_end).unwrap().with_stride(stride);
    run(&theta0, &cfg).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// max/min - 1 over positive values.
pub fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::MIN, f64::max);
    let lo = v.iter().copied().fold(f64::MAX, f64::min);
    hi / lo - 1.0
}

const GL8_X: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_W: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// 8-point Gauss-Legendre on [a, b].
pub fn panel(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (c, d) = (0.5 * (a + b), 0.5 * (b - a));
    GL8_X.iter().zip(&GL8_W).map(|(x, w)| w * d * f(c + d * x)).sum()
}
