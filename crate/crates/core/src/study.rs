//! Refinement studies driven by JSON configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    geometric_and_normal_error, nodal_stress_error, optimize_gamma, stress_error, BenchmarkConfig,
    GammaSearch, LevelRow, StudyReport,
};
use crate::error::{Error, Result};
use crate::export::{write_vtk, Cell, PointData, Table};
use crate::levelset::{sample_nodal, AnalyticField};
use crate::membrane::{
    apply_constraints_and_solve, assemble_system, end_constraints, AssemblyOptions, Constraints,
    DisplacementField, MembraneSystem, StabilizationParams,
};
use crate::mesh::{active_submesh, build_background_mesh, Aabb, ActiveMesh, TetMesh};
use crate::reconstruct::{
    merge_surface_nodes, reconstruct_surface, LevelSet, Reconstruction, ReconstructionConfig,
    SourceKind,
};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    Reconstruct,
    Solve,
    Convergence,
    GammaSweep,
    GammaOptimize,
}

/// Background boxes per refinement level: level `k` uses `divisions[k-1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshLadder {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub divisions: Vec<[usize; 3]>,
}

/// Half width of the default box cross-section.
pub const DEFAULT_HALF_WIDTH: f64 = 1.1;

impl Default for MeshLadder {
    fn default() -> Self {
        let w = DEFAULT_HALF_WIDTH;
        Self {
            min: [0.0, -w, -w],
            max: [4.0, w, w],
            divisions: (1..=4).map(|k| [4 * k, 2 * k + 1, 2 * k + 1]).collect(),
        }
    }
}

impl MeshLadder {
    pub fn build(&self, k: usize, order: u8) -> Result<TetMesh> {
        let div = *self
            .divisions
            .get(k.wrapping_sub(1))
            .ok_or_else(|| Error::Config(format!("no mesh divisions for level {k}")))?;
        let mut mesh = build_background_mesh(Aabb::new(self.min, self.max), div, order)?;
        mesh.level = k;
        Ok(mesh)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GammaConfig {
    /// One weight pair per level (a single pair applies to every level).
    Fixed { values: Vec<[f64; 2]> },
    /// Per-level search for the weights minimizing the stress error.
    Optimize {
        search: GammaSearch,
        #[serde(default = "default_start")]
        start: [f64; 2],
        #[serde(default = "default_upper")]
        upper: f64,
    },
    /// Stress error for every listed weight pair.
    Sweep { values: Vec<[f64; 2]> },
}

fn default_start() -> [f64; 2] {
    [1.0, 1.0]
}

fn default_upper() -> f64 {
    100.0
}

impl Default for GammaConfig {
    fn default() -> Self {
        GammaConfig::Fixed { values: vec![[1.0, 1.0]] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssemblyConfig {
    pub surface_degree: usize,
    pub face_degree: usize,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        let d = AssemblyOptions::default();
        Self { surface_degree: d.surface_degree, face_degree: d.face_degree }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub vtk: bool,
    pub prefix: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { vtk: false, prefix: "study".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// Optional; when present it must agree with the requested study.
    pub study: Option<StudyKind>,
    pub bulk_order: u8,
    pub surface_order: u8,
    pub source: SourceKind,
    pub levels: Vec<usize>,
    pub mesh: MeshLadder,
    pub gamma: GammaConfig,
    pub benchmark: BenchmarkConfig,
    pub reconstruction: ReconstructionConfig,
    pub assembly: AssemblyConfig,
    pub output: OutputConfig,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            study: None,
            bulk_order: 2,
            surface_order: 2,
            source: SourceKind::Exact,
            levels: vec![1, 2, 3],
            mesh: MeshLadder::default(),
            gamma: GammaConfig::default(),
            benchmark: BenchmarkConfig::default(),
            reconstruction: ReconstructionConfig::default(),
            assembly: AssemblyConfig::default(),
            output: OutputConfig::default(),
            seed: 0,
        }
    }
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.bulk_order, 1 | 2) || !matches!(self.surface_order, 1 | 2) {
            return Err(Error::Config("orders must be 1 or 2".into()));
        }
        if self.levels.is_empty() || self.levels.iter().any(|&k| k == 0) {
            return Err(Error::Config("levels must be a non-empty list of k >= 1".into()));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("levels must be strictly increasing".into()));
        }
        for &k in &self.levels {
            if k > self.mesh.divisions.len() {
                return Err(Error::Config(format!("no mesh divisions for level {k}")));
            }
        }
        self.benchmark.validate()?;
        let check = |v: &[[f64; 2]]| {
            if v.is_empty() || v.iter().flatten().any(|g| !(*g >= 0.0)) {
                Err(Error::Config("gamma values must be a non-empty list of non-negative pairs".into()))
            } else {
                Ok(())
            }
        };
        match &self.gamma {
            GammaConfig::Fixed { values } => {
                check(values)?;
                if values.len() != 1 && values.len() != self.levels.len() {
                    return Err(Error::Config(
                        "fixed gamma needs one pair or one pair per level".into(),
                    ));
                }
            }
            GammaConfig::Sweep { values } => check(values)?,
            GammaConfig::Optimize { upper, start, .. } => {
                if !(*upper > 0.0) || start.iter().any(|g| !(*g >= 0.0)) {
                    return Err(Error::Config("invalid gamma search bounds".into()));
                }
            }
        }
        Ok(())
    }

    pub fn reconstruction_config(&self) -> ReconstructionConfig {
        ReconstructionConfig { surface_order: self.surface_order, ..self.reconstruction }
    }

    pub fn assembly_options(&self) -> AssemblyOptions {
        AssemblyOptions {
            surface_degree: self.assembly.surface_degree,
            face_degree: self.assembly.face_degree,
        }
    }

    fn fixed_gamma(&self, index: usize) -> Option<StabilizationParams> {
        match &self.gamma {
            GammaConfig::Fixed { values } => {
                let v = if values.len() == 1 { values[0] } else { values[index] };
                Some(StabilizationParams { gradient: v[0], hessian: v[1] })
            }
            _ => None,
        }
    }
}

/// Reconstructs the zero level of `field` from the exact function or from
/// its nodal interpolant.
pub fn reconstruct_from(
    mesh: &TetMesh,
    field: &AnalyticField,
    source: SourceKind,
    config: &ReconstructionConfig,
) -> Result<Reconstruction> {
    match source {
        SourceKind::Exact => reconstruct_surface(mesh, LevelSet::Exact(field), config),
        SourceKind::Discrete => {
            let nodal = sample_nodal(field, mesh)?;
            reconstruct_surface(mesh, LevelSet::Discrete(&nodal), config)
        }
    }
}

/// Everything needed to solve the cylinder benchmark on one level.
#[derive(Debug, Clone)]
pub struct MembraneLevel {
    pub mesh: TetMesh,
    pub reconstruction: Reconstruction,
    pub active: ActiveMesh,
    pub system: MembraneSystem,
    pub constraints: Constraints,
    pub benchmark: BenchmarkConfig,
}

impl MembraneLevel {
    pub fn new(
        mesh: TetMesh,
        source: SourceKind,
        reconstruction: &ReconstructionConfig,
        benchmark: BenchmarkConfig,
        assembly: &AssemblyOptions,
    ) -> Result<Self> {
        let reconstruction = reconstruct_from(&mesh, &benchmark.field(), source, reconstruction)?;
        let active = active_submesh(&mesh, &reconstruction.cut_flags)?;
        let material = benchmark.material()?;
        let system = assemble_system(
            &mesh,
            &active,
            &reconstruction.surface,
            &material,
            StabilizationParams::default(),
            |x| benchmark.load(x),
            assembly,
        )?;
        let constraints = end_constraints(&mesh, &active, benchmark.length);
        Ok(Self { mesh, reconstruction, active, system, constraints, benchmark })
    }

    pub fn from_config(config: &StudyConfig, k: usize) -> Result<Self> {
        Self::new(
            config.mesh.build(k, config.bulk_order)?,
            config.source,
            &config.reconstruction_config(),
            config.benchmark,
            &config.assembly_options(),
        )
    }

    pub fn solve(&self, stab: &StabilizationParams) -> Result<DisplacementField> {
        apply_constraints_and_solve(&self.system, stab, &self.constraints)
    }

    pub fn stress_error(&self, u: &DisplacementField) -> Result<f64> {
        stress_error(&self.mesh, &self.active, &self.reconstruction.surface, u, &self.benchmark)
    }

    /// Stress error for the given weights; the Hessian weight is ignored on
    /// first order meshes.
    pub fn error_for(&self, gamma: &[f64]) -> Result<f64> {
        let stab = StabilizationParams::new(gamma[0], gamma.get(1).copied().unwrap_or(0.0))?;
        self.stress_error(&self.solve(&stab)?)
    }

    pub fn h(&self) -> f64 {
        self.mesh.h()
    }

    /// Merged surface with displacement and stress error point data.
    pub fn write_vtk(&self, path: &Path, u: &DisplacementField) -> Result<()> {
        let surface = &self.reconstruction.surface;
        let merged = merge_surface_nodes(surface);
        let mut disp = vec![Vec3::zeros(); merged.points.len()];
        let basis = crate::basis::ReferenceElement::tet(self.mesh.order())?;
        for (el, (_, ids)) in surface.elements.iter().zip(&merged.cells) {
            let nodes = self.mesh.element(el.parent);
            for (local, &id) in ids.iter().enumerate() {
                let r = el.parent_ref[local];
                let vals = basis.values(&[r.x, r.y, r.z]);
                let mut v = Vec3::zeros();
                for (i, &n) in nodes.iter().enumerate() {
                    let slot = self.active.node_slot(n).expect("active node");
                    v += u.node(slot) * vals[i];
                }
                disp[id] = v;
            }
        }
        let magnitude: Vec<f64> = disp.iter().map(|d| d.norm()).collect();
        let err = nodal_stress_error(&self.mesh, &self.active, surface, &merged, u, &self.benchmark)?;
        write_vtk(
            path,
            &merged,
            "membrane solution",
            &[
                PointData::Vectors("displacement", &disp),
                PointData::Scalars("displacement_magnitude", &magnitude),
                PointData::Scalars("stress_error", &err),
            ],
        )
    }
}

/// Files written by a study.
#[derive(Debug, Clone, Default)]
pub struct StudyOutput {
    pub reports: Vec<StudyReport>,
    pub files: Vec<PathBuf>,
}

fn rate_cell(rate: Option<f64>) -> Cell {
    rate.into()
}

fn stress_table(report: &StudyReport) -> Result<Table> {
    let two = report.bulk_order == 2;
    let mut table = if two {
        Table::new(&["k", "h", "eps_sigma", "gamma1", "gamma2", "rate"])
    } else {
        Table::new(&["k", "h", "eps_sigma", "rate", "gamma1"])
    };
    for r in &report.rows {
        let g = |i: usize| Cell::Num(r.gamma.get(i).copied().unwrap_or(0.0));
        let row = if two {
            vec![Cell::Int(r.k as i64), Cell::Num(r.h), Cell::Num(r.error), g(0), g(1), rate_cell(r.rate)]
        } else {
            vec![Cell::Int(r.k as i64), Cell::Num(r.h), Cell::Num(r.error), rate_cell(r.rate), g(0)]
        };
        table.push(row)?;
    }
    Ok(table)
}

fn paired_table(label: &str, exact: &StudyReport, discrete: &StudyReport) -> Result<Table> {
    let a = format!("{label}_exact");
    let b = format!("{label}_discrete");
    let mut t = Table::new(&["k", "h", &a, "rate_exact", &b, "rate_discrete"]);
    for (x, y) in exact.rows.iter().zip(&discrete.rows) {
        t.push(vec![
            Cell::Int(x.k as i64),
            Cell::Num(x.h),
            Cell::Num(x.error),
            rate_cell(x.rate),
            Cell::Num(y.error),
            rate_cell(y.rate),
        ])?;
    }
    Ok(t)
}

fn report(name: &str, cfg: &StudyConfig, source: SourceKind, rows: Vec<LevelRow>) -> StudyReport {
    let mut r = StudyReport {
        name: name.into(),
        bulk_order: cfg.bulk_order,
        surface_order: cfg.surface_order,
        source: source.to_string(),
        rows,
    };
    r.compute_rates();
    r
}

type Progress<'a> = &'a mut dyn FnMut(&str);

/// Distance and normal errors of the exact and interpolated reconstructions.
pub fn run_reconstruct(cfg: &StudyConfig, out: &Path, log: Progress<'_>) -> Result<StudyOutput> {
    let field = cfg.benchmark.field();
    let rcfg = cfg.reconstruction_config();
    let mut rows = [[Vec::new(), Vec::new()], [Vec::new(), Vec::new()]];
    let mut files = Vec::new();
    for &k in &cfg.levels {
        let mesh = cfg.mesh.build(k, cfg.bulk_order)?;
        for (s, source) in [SourceKind::Exact, SourceKind::Discrete].into_iter().enumerate() {
            let rec = reconstruct_from(&mesh, &field, source, &rcfg)?;
            let (geom, normal) = geometric_and_normal_error(&rec.surface, &field)?;
            log(&format!(
                "k={k} h={:.4} source={source} elements={} eps_geom={geom:.4e} eps_n={normal:.4e}",
                mesh.h(),
                rec.surface.len()
            ));
            for (m, e) in [geom, normal].into_iter().enumerate() {
                rows[m][s].push(LevelRow {
                    k,
                    h: mesh.h(),
                    node_count: mesh.node_count(),
                    error: e,
                    rate: None,
                    gamma: vec![],
                });
            }
            if cfg.output.vtk {
                let path = out.join(format!("{}_surface_{source}_k{k}.vtk", cfg.output.prefix));
                let merged = merge_surface_nodes(&rec.surface);
                let dist: Vec<f64> = merged.points.iter().map(|x| field.value(x)).collect();
                write_vtk(&path, &merged, "reconstructed surface", &[PointData::Scalars("phi", &dist)])?;
                files.push(path);
            }
        }
    }
    let [[ge, gd], [ne, nd]] = rows;
    let ge = report("geometric", cfg, SourceKind::Exact, ge);
    let gd = report("geometric", cfg, SourceKind::Discrete, gd);
    let ne = report("normal", cfg, SourceKind::Exact, ne);
    let nd = report("normal", cfg, SourceKind::Discrete, nd);
    for (name, table) in [
        ("geometric", paired_table("eps_geom", &ge, &gd)?),
        ("normal", paired_table("eps_n", &ne, &nd)?),
    ] {
        let path = out.join(format!("{}_{name}.csv", cfg.output.prefix));
        table.write(&path)?;
        files.push(path);
    }
    Ok(StudyOutput { reports: vec![ge, gd, ne, nd], files })
}

fn search_gamma(
    cfg: &StudyConfig,
    level: &MembraneLevel,
    search: GammaSearch,
    start: [f64; 2],
    upper: f64,
) -> (Vec<f64>, f64) {
    let one_d = cfg.bulk_order == 1 || search == GammaSearch::Golden1d;
    let mode = if one_d { GammaSearch::Golden1d } else { GammaSearch::Simplex2d };
    let start = if one_d { vec![start[0]] } else { start.to_vec() };
    let opt = optimize_gamma(|g| level.error_for(g), mode, (0.0, upper), &start);
    let mut gamma = opt.gamma;
    if one_d && cfg.bulk_order == 2 {
        gamma.push(0.0);
    }
    (gamma, opt.error)
}

/// Stress error per level with fixed or optimized stabilization.
pub fn run_convergence(cfg: &StudyConfig, out: &Path, log: Progress<'_>) -> Result<StudyOutput> {
    let mut rows = Vec::new();
    let mut files = Vec::new();
    for (i, &k) in cfg.levels.iter().enumerate() {
        let level = MembraneLevel::from_config(cfg, k)?;
        let (gamma, error) = match &cfg.gamma {
            GammaConfig::Optimize { search, start, upper } => {
                search_gamma(cfg, &level, *search, *start, *upper)
            }
            _ => {
                let stab = cfg.fixed_gamma(i).unwrap_or_default();
                let u = level.solve(&stab)?;
                if cfg.output.vtk {
                    let path = out.join(format!("{}_solution_k{k}.vtk", cfg.output.prefix));
                    level.write_vtk(&path, &u)?;
                    files.push(path);
                }
                (vec![stab.gradient, stab.hessian], level.stress_error(&u)?)
            }
        };
        log(&format!(
            "k={k} h={:.4} dofs={} eps_sigma={error:.4e} gamma={gamma:?}",
            level.h(),
            level.system.n_dof()
        ));
        rows.push(LevelRow {
            k,
            h: level.h(),
            node_count: level.mesh.node_count(),
            error,
            rate: None,
            gamma: if cfg.bulk_order == 1 { vec![gamma[0]] } else { gamma },
        });
    }
    let rep = report("stress", cfg, cfg.source, rows);
    let path = out.join(format!("{}_stress.csv", cfg.output.prefix));
    stress_table(&rep)?.write(&path)?;
    files.push(path);
    Ok(StudyOutput { reports: vec![rep], files })
}

/// Single solve on the first configured level.
pub fn run_solve(cfg: &StudyConfig, out: &Path, log: Progress<'_>) -> Result<StudyOutput> {
    let single = StudyConfig {
        levels: vec![cfg.levels[0]],
        gamma: match &cfg.gamma {
            GammaConfig::Fixed { values } => GammaConfig::Fixed { values: vec![values[0]] },
            other => other.clone(),
        },
        output: OutputConfig { vtk: true, ..cfg.output.clone() },
        ..cfg.clone()
    };
    run_convergence(&single, out, log)
}

/// Stress error over a list of weights, or per-level optimum.
pub fn run_gamma(cfg: &StudyConfig, out: &Path, log: Progress<'_>) -> Result<StudyOutput> {
    match &cfg.gamma {
        GammaConfig::Sweep { values } => {
            let mut table = Table::new(&["k", "h", "gamma1", "gamma2", "eps_sigma"]);
            for &k in &cfg.levels {
                let level = MembraneLevel::from_config(cfg, k)?;
                for g in values {
                    let e = level.error_for(g).ok();
                    log(&format!("k={k} gamma={g:?} eps_sigma={e:?}"));
                    table.push(vec![
                        Cell::Int(k as i64),
                        Cell::Num(level.h()),
                        Cell::Num(g[0]),
                        Cell::Num(g[1]),
                        e.into(),
                    ])?;
                }
            }
            let path = out.join(format!("{}_gamma_sweep.csv", cfg.output.prefix));
            table.write(&path)?;
            Ok(StudyOutput { reports: vec![], files: vec![path] })
        }
        GammaConfig::Optimize { .. } => run_convergence(cfg, out, log),
        GammaConfig::Fixed { .. } => Err(Error::Config(
            "the gamma study needs a sweep or optimize gamma mode".into(),
        )),
    }
}

/// Runs `kind` after checking it against the config's own study field.
pub fn run_study(
    cfg: &StudyConfig,
    kind: StudyKind,
    out: &Path,
    log: Progress<'_>,
) -> Result<StudyOutput> {
    if let Some(k) = cfg.study {
        let compatible = k == kind
            || (kind == StudyKind::GammaSweep && k == StudyKind::GammaOptimize)
            || (kind == StudyKind::GammaOptimize && k == StudyKind::GammaSweep);
        if !compatible {
            return Err(Error::Config(format!(
                "config is for a {k:?} study but {kind:?} was requested"
            )));
        }
    }
    std::fs::create_dir_all(out)?;
    match kind {
        StudyKind::Reconstruct => run_reconstruct(cfg, out, log),
        StudyKind::Solve => run_solve(cfg, out, log),
        StudyKind::Convergence => run_convergence(cfg, out, log),
        StudyKind::GammaSweep | StudyKind::GammaOptimize => run_gamma(cfg, out, log),
    }
}
