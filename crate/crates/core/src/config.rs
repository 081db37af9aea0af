//! TOML experiment configuration.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datum::{InitialDatum, Normalization};
use crate::error::{Result, SqgError};
use crate::excess::ExcessParams;
use crate::extension::VerticalGrid;
use crate::grid::GridSpec;
use crate::regularity::{CriterionConfig, CriterionKind};
use crate::solver::{PrescribedVelocity, SolverConfig, VelocityMode};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub seed: Option<u64>,
    pub solver: Option<RawSolver>,
    pub datum: Option<toml::Value>,
    #[serde(default)]
    pub extension: RawExtension,
    #[serde(default)]
    pub diagnostics: RawDiagnostics,
    #[serde(default)]
    pub excess: RawExcess,
    #[serde(default)]
    pub regularity: RawRegularity,
    pub io: Option<RawIo>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSolver {
    pub n: Option<usize>,
    pub box_length: Option<f64>,
    pub alpha: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub eps_visc: Option<f64>,
    pub cfl_safety: Option<f64>,
    pub snapshot_stride: Option<usize>,
    pub velocity: Option<String>,
    pub linf_limit: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawExtension {
    pub y_max: Option<f64>,
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDiagnostics {
    pub q: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawExcess {
    pub p: Option<f64>,
    pub sigma: Option<f64>,
    pub gamma: Option<f64>,
    pub q: Option<f64>,
    /// [x1, x2, t] triples
    pub centers: Option<Vec<[f64; 3]>>,
    pub radii: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRegularity {
    pub kind: Option<CriterionKind>,
    pub epsilon: Option<f64>,
    pub r: Option<f64>,
    pub q: Option<f64>,
    pub kq: Option<f64>,
    pub lattice_per_side: Option<usize>,
    pub lattice_times: Option<Vec<f64>>,
    pub box_scales: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawIo {
    pub out_dir: Option<PathBuf>,
    pub write_fields: Option<bool>,
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub n: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub eps_visc: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtensionSection {
    pub y_max: f64,
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcessSection {
    pub params: ExcessParams,
    pub centers: Vec<[f64; 3]>,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularitySection {
    pub criterion: CriterionConfig,
    pub lattice_per_side: usize,
    pub lattice_times: Vec<f64>,
    pub box_scales: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IoSection {
    pub out_dir: PathBuf,
    pub write_fields: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub solver: SolverSection,
    pub datum: InitialDatum,
    pub extension: ExtensionSection,
    pub q: f64,
    pub excess: ExcessSection,
    pub regularity: RegularitySection,
    pub io: IoSection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSection {
    pub n: usize,
    pub box_length: f64,
    pub alpha: f64,
    pub dt: f64,
    pub t_end: f64,
    pub eps_visc: f64,
    pub cfl_safety: f64,
    pub snapshot_stride: usize,
    pub velocity: String,
    pub linf_limit: f64,
}

impl ExperimentConfig {
    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.solver.n, self.solver.box_length, self.solver.alpha)
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let s = &self.solver;
        let mut c = SolverConfig::new(self.grid()?, s.dt, s.t_end)?
            .with_eps(s.eps_visc)
            .with_stride(s.snapshot_stride)
            .with_velocity(velocity_mode(&s.velocity).expect("validated"));
        c.cfl_safety = s.cfl_safety;
        c.linf_limit = s.linf_limit;
        c.validate()?;
        Ok(c)
    }

    pub fn vertical_grid(&self) -> Result<VerticalGrid> {
        VerticalGrid::graded(self.extension.y_max, self.extension.levels, self.solver.alpha)
    }

    /// SHA-256 of the canonical JSON form, ignoring where outputs go.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(io) = v.get_mut("io").and_then(|io| io.as_object_mut()) {
            io.remove("out_dir");
        }
        let json = serde_json::to_vec(&v).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn velocity_mode(s: &str) -> Option<VelocityMode> {
    match s {
        "coupled" => Some(VelocityMode::Coupled),
        "zero" => Some(VelocityMode::Prescribed(PrescribedVelocity::Zero)),
        _ => None,
    }
}

pub fn parse_config(text: &str) -> Result<RawConfig> {
    toml::from_str(text).map_err(|e| SqgError::Config(vec![e.to_string()]))
}

pub fn load_config(path: &Path, ov: &Overrides) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| SqgError::Io(format!("{}: {e}", path.display())))?;
    validate(parse_config(&text)?, ov)
}

/// Resolves defaults and reports every offending field at once.
pub fn validate(mut raw: RawConfig, ov: &Overrides) -> Result<ExperimentConfig> {
    let mut bad = Vec::new();
    let mut s = raw.solver.take().unwrap_or_default();
    s.alpha = ov.alpha.or(s.alpha);
    s.n = ov.n.or(s.n);
    s.dt = ov.dt.or(s.dt);
    s.t_end = ov.t_end.or(s.t_end);
    s.eps_visc = ov.eps_visc.or(s.eps_visc);
    let seed = ov.seed.or(raw.seed);
    let need = |name: &str, present: bool, bad: &mut Vec<String>| {
        if !present {
            bad.push(format!("missing required field {name}"));
        }
    };
    need("seed", seed.is_some(), &mut bad);
    need("solver.n", s.n.is_some(), &mut bad);
    need("solver.alpha", s.alpha.is_some(), &mut bad);
    need("solver.dt", s.dt.is_some(), &mut bad);
    need("solver.t_end", s.t_end.is_some(), &mut bad);
    need("datum", raw.datum.is_some(), &mut bad);
    let io = raw.io.take().unwrap_or_default();
    let out_dir = ov.out.clone().or(io.out_dir);
    need("io.out_dir", out_dir.is_some(), &mut bad);

    let box_length = s.box_length.unwrap_or(TAU);
    let alpha = s.alpha.unwrap_or(0.45);
    let n = s.n.unwrap_or(0);
    let grid = GridSpec::new(n.max(4), box_length, alpha);
    if s.n.is_some() {
        if let Err(e) = GridSpec::new(n, box_length, alpha) {
            bad.push(e.to_string());
        }
    } else if let Err(e) = &grid {
        bad.push(e.to_string());
    }
    let velocity = s.velocity.clone().unwrap_or_else(|| "coupled".into());
    if velocity_mode(&velocity).is_none() {
        bad.push(format!("solver.velocity={velocity:?} must be \"coupled\" or \"zero\""));
    }
    let solver = SolverSection {
        n,
        box_length,
        alpha,
        dt: s.dt.unwrap_or(f64::NAN),
        t_end: s.t_end.unwrap_or(f64::NAN),
        eps_visc: s.eps_visc.unwrap_or(0.0),
        cfl_safety: s.cfl_safety.unwrap_or(0.5),
        snapshot_stride: s.snapshot_stride.unwrap_or(1),
        velocity,
        linf_limit: s.linf_limit.unwrap_or(1e8),
    };
    if s.n.is_some() && s.dt.is_some() && s.t_end.is_some() && s.alpha.is_some() {
        if let Ok(g) = &grid {
            match SolverConfig::new(*g, solver.dt, solver.t_end) {
                Ok(mut c) => {
                    c.eps_visc = solver.eps_visc;
                    c.cfl_safety = solver.cfl_safety;
                    c.snapshot_stride = solver.snapshot_stride;
                    c.linf_limit = solver.linf_limit;
                    if let Err(SqgError::Config(v)) = c.validate() {
                        bad.extend(v);
                    }
                }
                Err(SqgError::Config(v)) => bad.extend(v),
                Err(e) => bad.push(e.to_string()),
            }
        }
    }

    let datum = match raw.datum.take() {
        Some(v) => {
            let mut table = v.as_table().cloned().unwrap_or_default();
            if !table.contains_key("normalize") {
                table.insert("normalize".into(), toml::Value::try_from(Normalization::L2(1.0)).unwrap());
            }
            match toml::Value::Table(table).try_into::<InitialDatum>() {
                Ok(d) => {
                    if let Ok(g) = &grid {
                        bad.extend(d.validate(g));
                    }
                    Some(d)
                }
                Err(e) => {
                    bad.push(format!("datum: {e}"));
                    None
                }
            }
        }
        None => None,
    };

    let extension = ExtensionSection {
        y_max: raw.extension.y_max.unwrap_or(0.5 * box_length),
        levels: raw.extension.levels.unwrap_or(64),
    };
    if let Err(e) = VerticalGrid::graded(extension.y_max, extension.levels, alpha) {
        bad.push(format!("extension: {e}"));
    }
    let q = raw.diagnostics.q.unwrap_or(8.0);
    if !(q > 2f64.sqrt()) {
        bad.push(format!("diagnostics.q={q} must exceed sqrt(2)"));
    }

    let ex = &raw.excess;
    let mut params = ExcessParams::with_q(alpha, ex.q.unwrap_or(8.0));
    params.p = ex.p.unwrap_or(params.p);
    params.sigma = ex.sigma.unwrap_or(params.sigma);
    params.gamma = ex.gamma.unwrap_or(params.gamma);
    if let Err(SqgError::Config(v)) = params.validate(alpha) {
        bad.extend(v.into_iter().map(|m| format!("excess: {m}")));
    }
    let radii = ex.radii.clone().unwrap_or_else(|| vec![0.5]);
    if radii.iter().any(|r| !(*r > 0.0 && *r <= 0.5 * box_length)) {
        bad.push("excess.radii must lie in (0, L/2]".into());
    }
    let t_end = solver.t_end;
    let excess = ExcessSection {
        params,
        centers: ex.centers.clone().unwrap_or_else(|| vec![[0.5 * box_length, 0.5 * box_length, t_end]]),
        radii,
    };

    let rg = &raw.regularity;
    let criterion = CriterionConfig {
        kind: rg.kind.unwrap_or(CriterionKind::FixedScale),
        epsilon: rg.epsilon.unwrap_or(1.0),
        r: rg.r.unwrap_or(0.25),
        q: rg.q.unwrap_or(8.0),
        alpha,
        kq: rg.kq,
    };
    if let Err(SqgError::Config(v)) = criterion.validate() {
        bad.extend(v.into_iter().map(|m| format!("regularity: {m}")));
    }
    let regularity = RegularitySection {
        criterion,
        lattice_per_side: rg.lattice_per_side.unwrap_or(8),
        lattice_times: rg.lattice_times.clone().unwrap_or_else(|| vec![t_end]),
        box_scales: rg.box_scales.unwrap_or(4),
    };
    if regularity.lattice_per_side == 0 {
        bad.push("regularity.lattice_per_side must be positive".into());
    }
    if regularity.box_scales < 4 {
        bad.push("regularity.box_scales must be at least 4".into());
    }

    if !bad.is_empty() {
        return Err(SqgError::Config(bad));
    }
    Ok(ExperimentConfig {
        seed: seed.unwrap(),
        solver,
        datum: datum.unwrap(),
        extension,
        q,
        excess,
        regularity,
        io: IoSection { out_dir: out_dir.unwrap(), write_fields: io.write_fields.unwrap_or(false) },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_lists_required_fields() {
        match validate(parse_config("").unwrap(), &Overrides::default()) {
            Err(SqgError::Config(v)) => {
                for f in ["seed", "solver.n", "solver.alpha", "solver.dt", "solver.t_end", "datum", "io.out_dir"] {
                    assert!(v.iter().any(|m| m.ends_with(&format!(" {f}"))), "{f} not in {v:?}");
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_and_hash() {
        let text = r#"
seed = 1
[solver]
n = 32
alpha = 0.45
dt = 0.01
t_end = 0.1
[datum]
kind = "random_bandlimited"
k_max = 4.0
[io]
out_dir = "out"
"#;
        let a = validate(parse_config(text).unwrap(), &Overrides::default()).unwrap();
        assert_eq!(a.datum.normalize, Normalization::L2(1.0));
        let b = validate(parse_config(text).unwrap(), &Overrides { alpha: Some(0.4), ..Default::default() }).unwrap();
        assert_eq!(b.solver.alpha, 0.4);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), validate(parse_config(text).unwrap(), &Overrides::default()).unwrap().hash());
        assert!(parse_config("bogus = 1").is_err());
    }
}
