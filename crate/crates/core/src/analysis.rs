//! Error measures, convergence rates and stabilization parameter search for
//! the cylinder benchmark.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levelset::AnalyticField;
use crate::linalg::symmetric_eigenvalues;
use crate::membrane::{
    evaluate_stress, lame_plane_stress, stress_from_strain, surface_strain, DisplacementField,
    Material,
};
use crate::mesh::{ActiveMesh, TetMesh};
use crate::optimize::{golden_section, nelder_mead, NelderMeadOptions};
use crate::reconstruct::{MergedSurface, SurfaceMesh};
use crate::surfgeom::{surface_quadrature, tangential_projector};
use crate::Vec3;

/// `N^{-1/3}`
pub fn mesh_size(node_count: usize) -> Result<f64> {
    if node_count == 0 {
        return Err(Error::InvalidInput("node count must be positive".into()));
    }
    Ok((node_count as f64).powf(-1.0 / 3.0))
}

/// Clamped cylinder under a linearly growing axial surface load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub radius: f64,
    pub thickness: f64,
    pub length: f64,
    pub force: f64,
    pub young: f64,
    pub poisson: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self { radius: 1.0, thickness: 0.01, length: 4.0, force: 1.0, young: 100.0, poisson: 0.5 }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.radius, self.thickness, self.length, self.force, self.young]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite())
            && self.poisson < 1.0
            && self.poisson > -1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid benchmark constants {self:?}")))
        }
    }

    pub fn field(&self) -> AnalyticField {
        AnalyticField::x_cylinder(self.radius)
    }

    pub fn material(&self) -> Result<Material> {
        lame_plane_stress(self.young, self.poisson)
    }

    /// Axial load per unit area `F x / (2 pi r L^2)`.
    pub fn load(&self, x: &Vec3) -> Vec3 {
        let f = self.force * x.x / (2.0 * std::f64::consts::PI * self.radius * self.length.powi(2));
        Vec3::new(f, 0.0, 0.0)
    }

    /// Axial stress `F (1 - (x/L)^2) / (4 pi r t)`.
    pub fn exact_stress(&self, x: f64) -> f64 {
        self.force * (1.0 - (x / self.length).powi(2))
            / (4.0 * std::f64::consts::PI * self.radius * self.thickness)
    }
}

pub fn exact_benchmark(config: &BenchmarkConfig, x: f64) -> (Vec3, f64) {
    (config.load(&Vec3::new(x, 0.0, 0.0)), config.exact_stress(x))
}

/// Magnitude of the principal stress vector (`|eigenvalues|`).
pub fn principal_magnitude(stress: &crate::Mat3) -> Result<f64> {
    let ev = symmetric_eigenvalues(stress)?;
    Ok((ev[0] * ev[0] + ev[1] * ev[1] + ev[2] * ev[2]).sqrt())
}

/// Quadrature degree used by all surface error integrals.
pub const ERROR_QUADRATURE_DEGREE: usize = 6;

/// `|| sigma_e - sigma_a ||` over the discrete surface. The membrane stress
/// (force per length) is divided by the thickness before comparison.
pub fn stress_error(
    mesh: &TetMesh,
    active: &ActiveMesh,
    surface: &SurfaceMesh,
    u: &DisplacementField,
    config: &BenchmarkConfig,
) -> Result<f64> {
    let material = config.material()?;
    let mut sum = 0.0;
    for el in &surface.elements {
        for q in surface_quadrature(el, ERROR_QUADRATURE_DEGREE)? {
            let p = tangential_projector(&q.frame.normal)?;
            let eps = surface_strain(mesh, active, el.parent, &q.parent_ref, &p, u)?;
            let sigma = stress_from_strain(&eps, &p, &material) / config.thickness;
            let approx = principal_magnitude(&sigma)?;
            let exact = config.exact_stress(q.frame.x.x.clamp(0.0, config.length));
            sum += q.weight * (exact - approx).powi(2);
        }
    }
    Ok(sum.sqrt())
}

/// `|sigma_e - sigma_a|` at every merged surface node, evaluated in the
/// first element that references the node.
pub fn nodal_stress_error(
    mesh: &TetMesh,
    active: &ActiveMesh,
    surface: &SurfaceMesh,
    merged: &MergedSurface,
    u: &DisplacementField,
    config: &BenchmarkConfig,
) -> Result<Vec<f64>> {
    let material = config.material()?;
    let mut out = vec![f64::NAN; merged.points.len()];
    for (el, (_, ids)) in surface.elements.iter().zip(&merged.cells) {
        let ref_nodes = el.kind.reference().nodes();
        for (local, &id) in ids.iter().enumerate() {
            if !out[id].is_nan() {
                continue;
            }
            let sigma = evaluate_stress(mesh, active, el, u, &material, &ref_nodes[local])?
                / config.thickness;
            let x = merged.points[id].x.clamp(0.0, config.length);
            out[id] = (config.exact_stress(x) - principal_magnitude(&sigma)?).abs();
        }
    }
    Ok(out)
}

/// `(||phi(x)||, ||n_e - n_h||)` over the discrete surface, with `n_e` the
/// exact level-set gradient and `n_h` the parametric normal.
pub fn geometric_and_normal_error(surface: &SurfaceMesh, field: &AnalyticField) -> Result<(f64, f64)> {
    let (mut geom, mut normal) = (0.0, 0.0);
    for el in &surface.elements {
        for q in surface_quadrature(el, ERROR_QUADRATURE_DEGREE)? {
            let x = q.frame.x;
            geom += q.weight * field.value(&x).powi(2);
            let ne = field.gradient(&x)?;
            normal += q.weight * (ne - q.frame.normal).norm_squared();
        }
    }
    Ok((geom.sqrt(), normal.sqrt()))
}

/// `log(e_{i-1}/e_i) / log(h_{i-1}/h_i)` for consecutive levels.
pub fn convergence_rates(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(Error::InvalidInput(
            "need at least two levels with matching error and h lists".into(),
        ));
    }
    if errors.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidInput("errors must be positive".into()));
    }
    if hs.windows(2).any(|w| !(w[1] < w[0]) || !(w[1] > 0.0)) {
        return Err(Error::InvalidInput("mesh sizes must be strictly decreasing".into()));
    }
    Ok(errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaSearch {
    /// Nelder-Mead over `(gamma1, gamma2) >= 0`.
    Simplex2d,
    /// Golden section over a single gamma.
    Golden1d,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaOptimum {
    pub gamma: Vec<f64>,
    pub error: f64,
    pub evaluations: usize,
}

/// Minimizes `objective` over the stabilization weights. Failing
/// evaluations count as `+inf`.
pub fn optimize_gamma(
    mut objective: impl FnMut(&[f64]) -> Result<f64>,
    mode: GammaSearch,
    bounds: (f64, f64),
    start: &[f64],
) -> GammaOptimum {
    let mut evaluations = 0;
    let mut f = |g: &[f64]| {
        evaluations += 1;
        objective(g).ok().filter(|v| v.is_finite()).unwrap_or(f64::INFINITY)
    };
    match mode {
        GammaSearch::Golden1d => {
            let (x, fx) = golden_section(|g| f(&[g]), bounds.0, bounds.1, 1e-2);
            GammaOptimum { gamma: vec![x], error: fx, evaluations }
        }
        GammaSearch::Simplex2d => {
            let opts = NelderMeadOptions { lower: bounds.0, ..Default::default() };
            let (x, fx) = nelder_mead(&mut f, start, &opts);
            GammaOptimum { gamma: x, error: fx, evaluations }
        }
    }
}

/// One refinement level of a study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRow {
    pub k: usize,
    pub h: f64,
    pub node_count: usize,
    pub error: f64,
    pub rate: Option<f64>,
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub name: String,
    pub bulk_order: u8,
    pub surface_order: u8,
    pub source: String,
    pub rows: Vec<LevelRow>,
}

impl StudyReport {
    /// Fills the rate column from the stored errors and mesh sizes.
    pub fn compute_rates(&mut self) {
        for i in 1..self.rows.len() {
            let (a, b) = (&self.rows[i - 1], &self.rows[i]);
            self.rows[i].rate = convergence_rates(&[a.error, b.error], &[a.h, b.h])
                .ok()
                .map(|r| r[0]);
        }
    }
}
