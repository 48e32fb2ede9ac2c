//! Sparse triplet/CSR containers, small dense solves, and the direct
//! sparse factorization used by every scheme.
//!
//! Assembly happens into [`Triplets`]; [`Triplets::compress`] sums
//! duplicates into a deterministic row-major [`CsrMatrix`]. The bordered
//! saddle-point systems are factorized by a sparse LU (faer) behind
//! [`direct_solve`] / [`LuFactors`], with a mandatory post-solve residual
//! check so no silent garbage escapes.

use std::sync::Once;

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};

use crate::{Error, Result};

/// Relative residual bound asserted after every direct solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

/// Pressure-multiplier magnitude (relative to the rhs) beyond which a
/// saddle solve is reported as an inf-sup failure.
pub const INF_SUP_MULTIPLIER_TOL: f64 = 1e8;

fn seq_parallelism() {
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        // Factorizations stay single-threaded; concurrency lives at the
        // level of independent solves.
        faer::set_global_parallelism(faer::Par::Seq);
    });
}

/// Unassembled sparse operator: (row, col, value) entries over a declared
/// shape. Duplicate positions accumulate.
#[derive(Debug, Clone)]
pub struct Triplets {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, val));
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Sum duplicates into row-major compressed form with columns sorted
    /// inside each row. Rejects entries outside the declared shape.
    pub fn compress(&self) -> Result<CsrMatrix> {
        for &(r, c, _) in &self.entries {
            if r >= self.nrows || c >= self.ncols {
                return Err(Error::IndexOutOfShape {
                    row: r,
                    col: c,
                    nrows: self.nrows,
                    ncols: self.ncols,
                });
            }
        }
        let mut sorted = self.entries.clone();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut cur_row = 0usize;
        for &(r, c, v) in &sorted {
            while cur_row < r {
                cur_row += 1;
                row_ptr[cur_row] = col_idx.len();
            }
            if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == c {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
            }
        }
        while cur_row < self.nrows {
            cur_row += 1;
            row_ptr[cur_row] = col_idx.len();
        }
        Ok(CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        })
    }
}

/// Row-major compressed sparse matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        match self.col_idx[lo..hi].binary_search(&c) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
        y
    }

    /// y = A^T x without materializing the transpose.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.values[k] * x[r];
            }
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = Triplets::new(self.ncols, self.nrows);
        for (r, c, v) in self.iter() {
            t.push(c, r, v);
        }
        t.compress().expect("transpose within shape")
    }
}

/// Block-structured assembly of one square system from operator pieces.
pub struct SystemBuilder {
    trips: Triplets,
    rhs: Vec<f64>,
}

impl SystemBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            trips: Triplets::new(n, n),
            rhs: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.rhs.len()
    }

    pub fn add_entry(&mut self, row: usize, col: usize, val: f64) {
        if val != 0.0 {
            self.trips.push(row, col, val);
        }
    }

    /// Place `block` scaled by `scale` at offset (row0, col0).
    pub fn add_block(&mut self, row0: usize, col0: usize, block: &CsrMatrix, scale: f64) {
        for (r, c, v) in block.iter() {
            if v != 0.0 {
                self.trips.push(row0 + r, col0 + c, scale * v);
            }
        }
    }

    /// Place the transpose of `block` scaled by `scale` at (row0, col0).
    pub fn add_block_transposed(&mut self, row0: usize, col0: usize, block: &CsrMatrix, scale: f64) {
        for (r, c, v) in block.iter() {
            if v != 0.0 {
                self.trips.push(row0 + c, col0 + r, scale * v);
            }
        }
    }

    pub fn rhs_mut(&mut self) -> &mut [f64] {
        &mut self.rhs
    }

    pub fn finish(self) -> Result<(CsrMatrix, Vec<f64>)> {
        Ok((self.trips.compress()?, self.rhs))
    }
}

fn to_faer(a: &CsrMatrix) -> Result<SparseColMat<usize, f64>> {
    let trips: Vec<Triplet<usize, usize, f64>> = a
        .iter()
        .map(|(r, c, v)| Triplet::new(r, c, v))
        .collect();
    SparseColMat::try_new_from_triplets(a.nrows, a.ncols, &trips)
        .map_err(|e| Error::SingularSystem(format!("matrix construction failed: {e:?}")))
}

fn check_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Result<()> {
    let ax = a.matvec(x);
    let mut res: f64 = 0.0;
    let mut bnorm: f64 = 0.0;
    for i in 0..b.len() {
        res = res.max((ax[i] - b[i]).abs());
        bnorm = bnorm.max(b[i].abs());
    }
    let rel = res / bnorm.max(1.0);
    if !rel.is_finite() {
        return Err(Error::SingularSystem(
            "solution contains non-finite values".into(),
        ));
    }
    if rel > SOLVE_RESIDUAL_TOL {
        return Err(Error::ResidualTooLarge {
            residual: rel,
            tol: SOLVE_RESIDUAL_TOL,
        });
    }
    Ok(())
}

/// Sparse LU factorization of a square system, reusable across right-hand
/// sides. Keeps the matrix for residual verification of every solve.
pub struct LuFactors {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    matrix: CsrMatrix,
}

impl LuFactors {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        seq_parallelism();
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidArgument(format!(
                "direct solve needs a square system, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let fa = to_faer(a)?;
        let lu = fa
            .sp_lu()
            .map_err(|e| Error::SingularSystem(format!("sparse LU failed: {e:?}")))?;
        Ok(Self {
            lu,
            matrix: a.clone(),
        })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let xv = self.solve_unchecked(b);
        check_residual(&self.matrix, &xv, b)?;
        Ok(xv)
    }

    /// Triangular solves without the residual verification (used where the
    /// caller checks a combined residual itself).
    pub fn solve_unchecked(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.matrix.nrows());
        let rhs = faer::Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }
}

/// One-shot sparse direct solve with the post-solve residual check.
pub fn direct_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    LuFactors::new(a)?.solve(b)
}

/// Blocks of a steady saddle-point system. The velocity block must already
/// carry its viscosity factor; `coupling` is the momentum pressure block
/// and `constraint` the mass-conservation rows.
pub struct SaddleBlocks<'a> {
    pub velocity: &'a CsrMatrix,
    /// nu x np momentum coupling.
    pub coupling: &'a CsrMatrix,
    /// np x nu constraint rows.
    pub constraint: &'a CsrMatrix,
    /// One weighted zero-mean constraint per pressure sub-block:
    /// (offset into the pressure dofs, weights).
    pub zero_mean: Vec<(usize, Vec<f64>)>,
}

pub struct SaddleSolution {
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub multipliers: Vec<f64>,
}

/// Square sparse system with a few dense constraint rows/columns appended
/// (Lagrange-multiplier bordering).
///
/// Direct factorization of the bordered matrix is pathological: the dense
/// rows explode the fill of the sparse LU. Instead the factorization
/// replaces each dense border pair by a unit pin (a sparse matrix with the
/// same dimensions), and the exact bordered solution is recovered through
/// the Woodbury identity on the rank-2-per-constraint difference, plus one
/// step of iterative refinement against the true matrix. Every solve still
/// passes the residual check on the true bordered system.
pub struct BorderedLu {
    /// True bordered matrix, for residuals and refinement.
    matrix: CsrMatrix,
    factors: LuFactors,
    /// Low-rank correction columns: Y = M0^-1 U and the small Schur
    /// factor of (I + V^T Y).
    u_cols: Vec<Vec<f64>>,
    v_cols: Vec<Vec<f64>>,
    y_cols: Vec<Vec<f64>>,
    schur: Option<SmallLu>,
}

impl BorderedLu {
    /// `body` is the sparse (singular) block of size n x n; `borders` are
    /// (column index base offset, weights) pairs appended as rows/columns
    /// n+k. Border weights must not be all zero.
    pub fn new(body: &Triplets, borders: &[(usize, Vec<f64>)]) -> Result<Self> {
        let n = body.nrows();
        assert_eq!(n, body.ncols());
        let k = borders.len();
        let nn = n + k;

        let mut full = Triplets::new(nn, nn);
        let mut pinned = Triplets::new(nn, nn);
        for &(r, c, v) in body.entries() {
            full.push(r, c, v);
            pinned.push(r, c, v);
        }
        // the pinned variant replaces each dense border by a unit vector at
        // the first nonzero weight position
        let mut u_cols = Vec::with_capacity(2 * k);
        let mut v_cols = Vec::with_capacity(2 * k);
        for (bk, (off, w)) in borders.iter().enumerate() {
            let pivot = w
                .iter()
                .position(|&x| x != 0.0)
                .ok_or_else(|| Error::InvalidArgument("empty border weights".into()))?;
            let scale = w[pivot];
            for (j, &wj) in w.iter().enumerate() {
                if wj != 0.0 {
                    full.push(off + j, n + bk, wj);
                    full.push(n + bk, off + j, wj);
                }
            }
            pinned.push(off + pivot, n + bk, scale);
            pinned.push(n + bk, off + pivot, scale);

            // difference columns: delta w in the border column/row slots
            let mut dw = vec![0.0; nn];
            for (j, &wj) in w.iter().enumerate() {
                if j != pivot {
                    dw[off + j] = wj;
                }
            }
            let mut e = vec![0.0; nn];
            e[n + bk] = 1.0;
            // M - M0 = sum_k ( dw e^T + e dw^T )
            u_cols.push(dw.clone());
            v_cols.push(e.clone());
            u_cols.push(e);
            v_cols.push(dw);
        }

        let matrix = full.compress()?;
        let factors = LuFactors::new(&pinned.compress()?)?;

        let mut y_cols = Vec::with_capacity(u_cols.len());
        for u in &u_cols {
            y_cols.push(factors.solve_unchecked(u));
        }
        let m = u_cols.len();
        let mut s = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                let dot: f64 = v_cols[i].iter().zip(&y_cols[j]).map(|(a, b)| a * b).sum();
                s[i * m + j] = if i == j { 1.0 + dot } else { dot };
            }
        }
        let schur = if m > 0 {
            Some(SmallLu::new(&s, m).ok_or_else(|| {
                Error::SingularSystem("bordered constraint correction is singular".into())
            })?)
        } else {
            None
        };

        Ok(Self {
            matrix,
            factors,
            u_cols,
            v_cols,
            y_cols,
            schur,
        })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    fn woodbury_apply(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.factors.solve_unchecked(b);
        if let Some(schur) = &self.schur {
            let m = self.u_cols.len();
            let vt: Vec<f64> = (0..m)
                .map(|i| self.v_cols[i].iter().zip(&x).map(|(a, b)| a * b).sum())
                .collect();
            let corr = schur.solve(&vt);
            for (y, &c) in self.y_cols.iter().zip(&corr) {
                for (xi, yi) in x.iter_mut().zip(y) {
                    *xi -= c * yi;
                }
            }
        }
        x
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.n());
        let mut x = self.woodbury_apply(b);
        // one round of iterative refinement against the true matrix
        let ax = self.matrix.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let dx = self.woodbury_apply(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        check_residual(&self.matrix, &x, b)?;
        Ok(x)
    }
}

/// Monolithic bordered solve of a saddle-point system.
pub fn solve_saddle(blocks: &SaddleBlocks, rhs_u: &[f64], rhs_p: &[f64]) -> Result<SaddleSolution> {
    let nu = blocks.velocity.nrows();
    let np = blocks.coupling.ncols();
    assert_eq!(blocks.constraint.nrows(), np);
    assert_eq!(blocks.constraint.ncols(), nu);
    assert_eq!(rhs_u.len(), nu);
    assert_eq!(rhs_p.len(), np);

    let n = nu + np;
    let mut body = Triplets::new(n, n);
    for (r, c, v) in blocks.velocity.iter() {
        body.push(r, c, v);
    }
    for (r, c, v) in blocks.coupling.iter() {
        body.push(r, nu + c, v);
    }
    for (r, c, v) in blocks.constraint.iter() {
        body.push(nu + r, c, v);
    }
    let borders: Vec<(usize, Vec<f64>)> = blocks
        .zero_mean
        .iter()
        .map(|(off, w)| (nu + off, w.clone()))
        .collect();
    let solver = BorderedLu::new(&body, &borders)?;

    let mut b = vec![0.0; solver.n()];
    b[..nu].copy_from_slice(rhs_u);
    b[nu..nu + np].copy_from_slice(rhs_p);
    let x = solver.solve(&b)?;

    let rhs_scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let multipliers = x[nu + np..].to_vec();
    for &m in &multipliers {
        if m.abs() > INF_SUP_MULTIPLIER_TOL * rhs_scale {
            return Err(Error::InfSupFailure(m.abs()));
        }
    }
    Ok(SaddleSolution {
        velocity: x[..nu].to_vec(),
        pressure: x[nu..nu + np].to_vec(),
        multipliers,
    })
}

/// Dense LU with partial pivoting for the small MPFA fan systems.
/// Solves against multiple right-hand sides and reports an infinity-norm
/// condition estimate from the explicit inverse (fans are tiny).
pub struct SmallLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl SmallLu {
    pub fn new(a: &[f64], n: usize) -> Option<Self> {
        assert_eq!(a.len(), n * n);
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut pivot = k;
            let mut best = lu[k * n + k].abs();
            for r in k + 1..n {
                let v = lu[r * n + k].abs();
                if v > best {
                    best = v;
                    pivot = r;
                }
            }
            if best == 0.0 {
                return None;
            }
            if pivot != k {
                for c in 0..n {
                    lu.swap(k * n + c, pivot * n + c);
                }
                perm.swap(k, pivot);
            }
            let diag = lu[k * n + k];
            for r in k + 1..n {
                let factor = lu[r * n + k] / diag;
                lu[r * n + k] = factor;
                for c in k + 1..n {
                    lu[r * n + c] -= factor * lu[k * n + c];
                }
            }
        }
        Some(Self { n, lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 1..n {
            for c in 0..r {
                x[r] -= self.lu[r * n + c] * x[c];
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                x[r] -= self.lu[r * n + c] * x[c];
            }
            x[r] /= self.lu[r * n + r];
        }
        x
    }

    /// ||A||_inf * ||A^-1||_inf via the explicit inverse.
    pub fn condition_estimate(&self, a: &[f64]) -> f64 {
        let n = self.n;
        let norm_a = (0..n)
            .map(|r| (0..n).map(|c| a[r * n + c].abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        let mut inv_rows = vec![0.0; n * n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.solve(&e);
            for r in 0..n {
                inv_rows[r * n + j] = col[r];
            }
        }
        let norm_inv = (0..n)
            .map(|r| (0..n).map(|c| inv_rows[r * n + c].abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        norm_a * norm_inv
    }
}
