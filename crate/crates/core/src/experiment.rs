//! Orchestration of the CLI subcommands and their outputs.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::bessel::bessel_k;
use crate::config::ExperimentConfig;
use crate::cylinder::Cylinder;
use crate::datum::generate_datum;
use crate::error::{Result, SqgError};
use crate::excess::{compute_kq, excess};
use crate::extension::{extend, weighted_dirichlet_energy};
use crate::grid::GridSpec;
use crate::io::{sidecar_path, write_atomic, write_extension, write_field};
use crate::regularity::{center_lattice, dimension_formulas, dyadic_scales, screen, CriterionConfig};
use crate::solver::{heat_oracle, linf_decay_check, run, PrescribedVelocity, RunOutput, RunStatus, SolverConfig, VelocityMode};
use crate::spectral::gagliardo_seminorm_global;
use crate::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Run,
    Screen,
    Extend,
    Excess,
    Dims,
    Selftest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Screen => "screen",
            Command::Extend => "extend",
            Command::Excess => "excess",
            Command::Dims => "dims",
            Command::Selftest => "selftest",
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub fn exit_code(e: &SqgError) -> i32 {
    match e {
        SqgError::Config(_) | SqgError::Parameter(_) | SqgError::Geometry(_) | SqgError::Precondition(_) => EXIT_VALIDATION,
        SqgError::Io(_) => EXIT_IO,
        SqgError::Data(_) | SqgError::Coverage(_) | SqgError::Cfl { .. } | SqgError::BlowUp { .. } => EXIT_NUMERICAL,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub complete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitReport {
    pub command: Command,
    pub config_hash: String,
    pub code: i32,
    pub message: String,
    pub files: Vec<ManifestEntry>,
}

struct Outputs {
    dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| SqgError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), entries: Vec::new() })
    }

    fn record(&mut self, name: &str, r: Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let entry = match &r {
            Ok(()) => ManifestEntry {
                name: name.into(),
                complete: true,
                sha256: std::fs::read(&path).ok().map(|b| digest(&b)),
                error: None,
            },
            Err(e) => ManifestEntry { name: name.into(), complete: false, sha256: None, error: Some(e.to_string()) },
        };
        self.entries.push(entry);
        r
    }

    fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let r = write_atomic(&self.dir.join(name), bytes).map_err(io_err);
        self.record(name, r)
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v).map_err(|e| SqgError::Io(e.to_string()))?;
        s.push('\n');
        self.bytes(name, s.as_bytes())
    }

    fn field(&mut self, name: &str, f: &ScalarField, kind: &str) -> Result<()> {
        let r = write_field(&self.dir.join(name), f, kind).map_err(io_err);
        self.record(name, r.clone())?;
        self.record(&sidecar_name(name), r)
    }
}

fn sidecar_name(name: &str) -> String {
    sidecar_path(Path::new(name)).to_string_lossy().into_owned()
}

fn io_err(e: SqgError) -> SqgError {
    match e {
        SqgError::Io(_) => e,
        other => SqgError::Io(other.to_string()),
    }
}

/// Runs one subcommand, writes its outputs and a manifest, and returns the exit report.
pub fn run_experiment(cfg: &ExperimentConfig, command: Command) -> ExitReport {
    let hash = cfg.hash();
    let mut out = match Outputs::new(&cfg.io.out_dir) {
        Ok(o) => o,
        Err(e) => {
            return ExitReport { command, config_hash: hash, code: EXIT_IO, message: e.to_string(), files: Vec::new() }
        }
    };
    let result = match command {
        Command::Run => cmd_run(cfg, &mut out),
        Command::Screen => cmd_screen(cfg, &mut out),
        Command::Extend => cmd_extend(cfg, &mut out),
        Command::Excess => cmd_excess(cfg, &mut out),
        Command::Dims => cmd_dims(cfg, &mut out),
        Command::Selftest => cmd_selftest(cfg, &mut out),
    };
    let (code, message) = match result {
        Ok((c, m)) => (c, m),
        Err(e) => (exit_code(&e), e.to_string()),
    };
    let manifest = json!({
        "command": command.name(),
        "config_hash": hash,
        "seed": cfg.seed,
        "code": code,
        "message": message,
        "config": cfg,
        "files": out.entries,
    });
    let mut report = ExitReport { command, config_hash: hash, code, message, files: out.entries.clone() };
    let text = serde_json::to_string_pretty(&manifest).unwrap() + "\n";
    if let Err(e) = write_atomic(&out.dir.join("manifest.json"), text.as_bytes()) {
        report.code = EXIT_IO;
        report.message = format!("manifest: {e}");
    }
    report
}

fn simulate(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(RunOutput, i32, String)> {
    let grid = cfg.grid()?;
    let theta0 = generate_datum(&cfg.datum, &grid, cfg.seed)?;
    let scfg = cfg.solver_config()?;
    let res = run(&theta0, &scfg)?;
    let mut csv = Vec::new();
    res.ledger.write_csv(&mut csv)?;
    out.bytes("ledger.csv", &csv)?;
    if cfg.io.write_fields {
        for (k, f) in res.trajectory.thetas.iter().enumerate() {
            out.field(&format!("theta_{k:05}.bin"), f, "theta")?;
        }
    } else {
        out.field("theta_final.bin", res.trajectory.thetas.last().unwrap(), "theta")?;
    }
    let (code, msg) = match &res.trajectory.status {
        RunStatus::Completed => (EXIT_OK, "completed".to_string()),
        RunStatus::BlowUp { t, reason } => (EXIT_NUMERICAL, format!("blow-up at t={t}: {reason}")),
    };
    Ok((res, code, msg))
}

fn cmd_run(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(i32, String)> {
    let (res, code, msg) = simulate(cfg, out)?;
    let decay = linf_decay_check(&res.trajectory);
    out.json(
        "summary.json",
        &json!({
            "config_hash": cfg.hash(),
            "status": res.trajectory.status,
            "frames": res.trajectory.len(),
            "cfl_violations": res.cfl_violations,
            "max_relative_energy_defect": res.ledger.max_relative_defect(),
            "energy_inequality_holds": res.ledger.inequality_holds(1e-10),
            "linf_non_increasing": res.ledger.linf_non_increasing(1e-10),
            "linf_decay": decay,
        }),
    )?;
    Ok((code, msg))
}

fn cmd_excess(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(i32, String)> {
    let (res, code, msg) = simulate(cfg, out)?;
    let traj = &res.trajectory;
    let alpha = cfg.solver.alpha;
    let mut rows = Vec::new();
    for c in &cfg.excess.centers {
        for &r in &cfg.excess.radii {
            let row = Cylinder::parabolic([c[0], c[1]], c[2], r, alpha).and_then(|cyl| excess(traj, &cyl, &cfg.excess.params));
            rows.push(match row {
                Ok(e) => json!({
                    "center": c, "r": r, "variant": "parabolic",
                    "e_s": e.e_s, "e_v": e.e_v, "e_nl": e.e_nl, "total": e.total,
                    "last_rung_share": e.last_rung_share, "params": e.params,
                    "kq": compute_kq(traj, [c[0], c[1]], c[2], r, cfg.q).ok(),
                }),
                Err(e) => json!({ "center": c, "r": r, "variant": "parabolic", "error": e.to_string() }),
            });
        }
    }
    out.json("excess.json", &json!({ "config_hash": cfg.hash(), "rows": rows }))?;
    Ok((code, msg))
}

fn cmd_screen(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(i32, String)> {
    let (res, code, msg) = simulate(cfg, out)?;
    let grid = cfg.grid()?;
    let rg = &cfg.regularity;
    let centers = center_lattice(&grid, rg.lattice_per_side, &rg.lattice_times);
    let scales = dyadic_scales(0.25 * grid.box_length, rg.box_scales);
    let crit: CriterionConfig = rg.criterion;
    let s = screen(&res.trajectory, crit, &centers, &cfg.vertical_grid()?, Some(&scales))?;
    out.json("screen.json", &json!({ "config_hash": cfg.hash(), "criterion": crit, "screen": s }))?;
    let mut csv = Vec::new();
    s.write_counts_csv(&mut csv)?;
    out.bytes("box_counts.csv", &csv)?;
    Ok((code, msg))
}

fn cmd_extend(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(i32, String)> {
    let grid = cfg.grid()?;
    let theta0 = generate_datum(&cfg.datum, &grid, cfg.seed)?;
    let vg = cfg.vertical_grid()?;
    let ext = extend(&theta0, &vg)?;
    let e = weighted_dirichlet_energy(&ext, None)?;
    let semi = gagliardo_seminorm_global(&theta0, cfg.solver.alpha);
    let r = write_extension(&out.dir.join("extension.bin"), &ext).map_err(io_err);
    out.record("extension.bin", r.clone())?;
    out.record("extension.bin.json", r)?;
    out.json(
        "extension_energy.json",
        &json!({
            "config_hash": cfg.hash(),
            "energy": e,
            "gagliardo_seminorm_sq": semi * semi,
            "ratio": if semi > 0.0 { e.total / (semi * semi) } else { 0.0 },
            "levels": vg.y_levels().len(),
            "y_max": vg.y_max(),
        }),
    )?;
    Ok((EXIT_OK, "completed".into()))
}

fn cmd_dims(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(i32, String)> {
    let alpha = cfg.solver.alpha;
    let mut rows = Vec::new();
    for q in [8.0, 16.0, 32.0, 64.0, 128.0, 1e6] {
        rows.push(json!({ "q": q, "formulas": dimension_formulas(alpha, Some(q))? }));
    }
    out.json(
        "dims.json",
        &json!({ "config_hash": cfg.hash(), "alpha": alpha, "rows": rows, "limit": dimension_formulas(alpha, None)? }),
    )?;
    Ok((EXIT_OK, "completed".into()))
}

#[derive(Debug, Clone, Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
    pass: bool,
}

fn check(name: &'static str, value: f64, tolerance: f64) -> Check {
    Check { name, value, tolerance, pass: value.is_finite() && value <= tolerance }
}

fn cmd_selftest(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(i32, String)> {
    let g = GridSpec::new(32, std::f64::consts::TAU, cfg.solver.alpha)?;
    let theta0 = ScalarField::from_fn(g, 0.0, |x, y| (2.0 * x).sin() * y.cos() + 0.5 * (x + 3.0 * y).cos())?;
    let mut checks = Vec::new();

    let scfg = SolverConfig::new(g, 1e-2, 0.5)?.with_velocity(VelocityMode::Prescribed(PrescribedVelocity::Zero));
    let traj = run(&theta0, &scfg)?.trajectory;
    let exact = heat_oracle(&theta0, &traj.times, 0.0)?;
    let err = traj
        .thetas
        .iter()
        .zip(&exact)
        .map(|(a, b)| a.zip_with(b, |x, y| x - y).unwrap().l2_norm() / b.l2_norm())
        .fold(0.0, f64::max);
    checks.push(check("semigroup_oracle", err, 1e-8));

    let coupled = run(&theta0, &SolverConfig::new(g, 2e-3, 0.1)?)?;
    checks.push(check("energy_equality", coupled.ledger.max_relative_defect(), 1e-3));

    let k = bessel_k(0.5, 1.3);
    let kk = (std::f64::consts::PI / 2.6).sqrt() * (-1.3f64).exp();
    checks.push(check("bessel_half_order", (k - kk).abs() / kk, 1e-12));

    let f = dimension_formulas(crate::regularity::alpha0(), None)?;
    checks.push(check("alpha0_limit_dim", (f.limit_dim - 3.0).abs(), 1e-9));

    let all = checks.iter().all(|c| c.pass);
    out.json("selftest.json", &json!({ "config_hash": cfg.hash(), "checks": checks, "pass": all }))?;
    Ok(if all {
        (EXIT_OK, "all checks passed".into())
    } else {
        (EXIT_NUMERICAL, "selftest failure".into())
    })
}
