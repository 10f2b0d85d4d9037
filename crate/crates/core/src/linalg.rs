//! Sparse storage and solvers used by the membrane system.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::Mat3;

pub type Block = [[f64; 3]; 3];

/// Node-level sparsity pattern with 3x3 blocks, rows sorted by column.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
}

impl BlockPattern {
    /// Pattern in which every group of nodes couples all-to-all.
    pub fn from_cliques<'a>(n: usize, cliques: impl IntoIterator<Item = &'a [usize]>) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for clique in cliques {
            for &i in clique {
                rows[i].extend_from_slice(clique);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            cols.extend(r);
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols }
    }

    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn nnz_blocks(&self) -> usize {
        self.cols.len()
    }

    pub fn zeros(&self) -> Vec<Block> {
        vec![[[0.0; 3]; 3]; self.cols.len()]
    }

    /// `y = M x` for block values on this pattern.
    pub fn matvec(&self, values: &[Block], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; 3 * self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                let b = &values[k];
                for a in 0..3 {
                    y[3 * i + a] += b[a][0] * x[3 * j] + b[a][1] * x[3 * j + 1] + b[a][2] * x[3 * j + 2];
                }
            }
        }
        y
    }

    /// Largest `|M_ij - M_ji|` and largest `|M_ij|`.
    pub fn symmetry_defect(&self, values: &[Block]) -> (f64, f64) {
        let (mut defect, mut max) = (0.0f64, 0.0f64);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                let t = self.find(j, i).map(|kt| values[kt]);
                for a in 0..3 {
                    for b in 0..3 {
                        let v = values[k][a][b];
                        max = max.max(v.abs());
                        let vt = t.map(|t| t[b][a]).unwrap_or(0.0);
                        defect = defect.max((v - vt).abs());
                    }
                }
            }
        }
        (defect, max)
    }
}

/// `sum_k w_k M_k` over several value arrays sharing one pattern.
pub fn combine(parts: &[(&[Block], f64)]) -> Vec<Block> {
    let len = parts.first().map(|p| p.0.len()).unwrap_or(0);
    let mut out = vec![[[0.0; 3]; 3]; len];
    for (vals, w) in parts {
        if *w == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(vals.iter()) {
            for a in 0..3 {
                for b in 0..3 {
                    o[a][b] += w * v[a][b];
                }
            }
        }
    }
    out
}

/// Outcome of a sparse symmetric solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveInfo {
    pub relative_residual: f64,
    pub refinements: usize,
    /// `false` when the Cholesky factorization broke down and LU was used.
    pub cholesky: bool,
}

pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// Solves the symmetric system restricted to the free DOFs.
///
/// `free[d]` is the reduced index of global DOF `d` or `None` when it is
/// constrained to zero. Returns the full-length solution.
pub fn solve_reduced(
    pattern: &BlockPattern,
    values: &[Block],
    rhs: &[f64],
    free: &[Option<usize>],
) -> Result<(Vec<f64>, SolveInfo)> {
    let n_free = free.iter().filter(|f| f.is_some()).count();
    let mut full = vec![0.0; rhs.len()];
    if n_free == 0 {
        return Ok((full, SolveInfo { relative_residual: 0.0, refinements: 0, cholesky: true }));
    }
    let mut triplets = Vec::with_capacity(9 * values.len());
    for i in 0..pattern.n {
        for k in pattern.row_ptr[i]..pattern.row_ptr[i + 1] {
            let j = pattern.cols[k];
            for a in 0..3 {
                let Some(r) = free[3 * i + a] else { continue };
                for b in 0..3 {
                    let Some(c) = free[3 * j + b] else { continue };
                    let v = values[k][a][b];
                    if v != 0.0 || r == c {
                        triplets.push(Triplet::new(r, c, v));
                    }
                }
            }
        }
    }
    let mut b = vec![0.0; n_free];
    for (d, f) in free.iter().enumerate() {
        if let Some(r) = f {
            b[*r] = rhs[d];
        }
    }
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok((full, SolveInfo { relative_residual: 0.0, refinements: 0, cholesky: true }));
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n_free, n_free, &triplets)
        .map_err(|e| Error::SolverBreakdown(format!("matrix construction: {e:?}")))?;

    let residual = |x: &[f64]| -> Vec<f64> {
        let mut r = b.clone();
        for t in &triplets {
            r[t.row] -= t.val * x[t.col];
        }
        r
    };
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();

    enum Factor {
        Llt(faer::sparse::linalg::solvers::Llt<usize, f64>),
        Lu(faer::sparse::linalg::solvers::Lu<usize, f64>),
    }
    let (factor, cholesky) = match a.sp_cholesky(Side::Lower) {
        Ok(llt) => (Factor::Llt(llt), true),
        Err(chol_err) => match a.sp_lu() {
            Ok(lu) => (Factor::Lu(lu), false),
            Err(e) => {
                return Err(Error::SolverBreakdown(format!(
                    "matrix not positive definite ({chol_err:?}) and LU failed ({e:?})"
                )))
            }
        },
    };
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut m = Mat::<f64>::from_fn(v.len(), 1, |i, _| v[i]);
        match &factor {
            Factor::Llt(f) => f.solve_in_place(m.as_mut()),
            Factor::Lu(f) => f.solve_in_place(m.as_mut()),
        }
        (0..v.len()).map(|i| m[(i, 0)]).collect()
    };

    let mut x = apply(&b);
    let mut r = residual(&x);
    let mut rel = norm(&r) / bnorm;
    let mut refinements = 0;
    while refinements < 3 && rel > SOLVE_TOLERANCE * 1e-3 {
        let d = apply(&r);
        let cand: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
        let rc = residual(&cand);
        let relc = norm(&rc) / bnorm;
        refinements += 1;
        if !(relc < rel) {
            break;
        }
        x = cand;
        r = rc;
        rel = relc;
    }
    if !rel.is_finite() || rel > SOLVE_TOLERANCE {
        return Err(Error::SolverBreakdown(format!(
            "relative residual {rel:e} above {SOLVE_TOLERANCE:e}"
        )));
    }
    for (d, f) in free.iter().enumerate() {
        if let Some(r) = f {
            full[d] = x[*r];
        }
    }
    Ok((full, SolveInfo { relative_residual: rel, refinements, cholesky }))
}

pub const EIGEN_MAX_ITERATIONS: usize = 100;

/// Eigenvalues of a symmetric 3x3 matrix in ascending order.
pub fn symmetric_eigenvalues(m: &Mat3) -> Result<[f64; 3]> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym
        .try_symmetric_eigen(1e-15, EIGEN_MAX_ITERATIONS)
        .ok_or(Error::EigenNoConvergence(EIGEN_MAX_ITERATIONS))?;
    let mut v = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
    v.sort_by(f64::total_cmp);
    Ok(v)
}
