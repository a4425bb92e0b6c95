//! Sparse matrices and abstract linear operators with exact matvec accounting.
//!
//! Every solver in this crate charges its work to the operator it applies, so
//! per-grid matvec counts in multigrid runs come out of the operators
//! themselves rather than out of solver bookkeeping.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::smallmat::DenseMatrix;
use crate::threads;

/// Compressed sparse row matrix. May be rectangular (grid transfers and
/// composed operators need that); `LinearOperator` itself is always square.
#[derive(Clone, Debug)]
pub struct SparseMatrixCsr {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrixCsr {
    /// Build from (row, col, value) triplets. Duplicates are summed, columns
    /// within a row end up strictly increasing. Exact zeros produced by
    /// duplicate cancellation are kept (structural nonzeros).
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::InvalidInput(format!(
                    "triplet index ({r}, {c}) out of bounds for {n_rows}x{n_cols}"
                )));
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_counts = vec![0usize; n_rows];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut prev = None;
        for (r, c, v) in sorted {
            if prev == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_counts[r] += 1;
                prev = Some((r, c));
            }
        }
        let mut row_offsets = vec![0usize; n_rows + 1];
        for i in 0..n_rows {
            row_offsets[i + 1] = row_offsets[i] + row_counts[i];
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols, "matvec input length");
        assert_eq!(y.len(), self.n_rows, "matvec output length");
        let ro = &self.row_offsets;
        let ci = &self.col_indices;
        let vs = &self.values;
        // rows are disjoint, so chunked execution is deterministic
        threads::parallel_write(y, 1 << 15, |start, chunk| {
            for (i, yi) in chunk.iter_mut().enumerate() {
                let r = start + i;
                let mut acc = 0.0;
                for k in ro[r]..ro[r + 1] {
                    acc += vs[k] * x[ci[k]];
                }
                *yi = acc;
            }
        });
    }

    /// y = Aᵀ x (scatter form; no transposed copy is materialized)
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_rows, "matvec_transpose input length");
        assert_eq!(y.len(), self.n_cols, "matvec_transpose output length");
        y.fill(0.0);
        for r in 0..self.n_rows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                y[self.col_indices[k]] += self.values[k] * xr;
            }
        }
    }

    /// Exact ‖A‖₁ = max over columns of the absolute column sum.
    pub fn one_norm(&self) -> f64 {
        let mut col_sums = vec![0.0f64; self.n_cols];
        for k in 0..self.values.len() {
            col_sums[self.col_indices[k]] += self.values[k].abs();
        }
        col_sums.into_iter().fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> SparseMatrixCsr {
        let mut trips = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                trips.push((self.col_indices[k], r, self.values[k]));
            }
        }
        SparseMatrixCsr::from_triplets(self.n_cols, self.n_rows, &trips)
            .expect("transpose of a valid matrix is valid")
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                d[(r, self.col_indices[k])] = self.values[k];
            }
        }
        d
    }

    /// Read a Matrix Market coordinate file (real, general or symmetric).
    pub fn read_matrix_market<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = File::open(path)?;
        let mut lines = BufReader::new(file).lines();

        let header = lines
            .next()
            .ok_or_else(|| Error::MatrixMarket("empty file".into()))??;
        let head: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
        if head.len() < 5
            || head[0] != "%%matrixmarket"
            || head[1] != "matrix"
            || head[2] != "coordinate"
            || head[3] != "real"
        {
            return Err(Error::MatrixMarket(format!(
                "unsupported header: {header}"
            )));
        }
        let symmetric = match head[4].as_str() {
            "general" => false,
            "symmetric" => true,
            other => {
                return Err(Error::MatrixMarket(format!(
                    "unsupported symmetry kind: {other}"
                )))
            }
        };

        let mut size_line = None;
        for line in lines.by_ref() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            size_line = Some(t.to_string());
            break;
        }
        let size_line =
            size_line.ok_or_else(|| Error::MatrixMarket("missing size line".into()))?;
        let dims: Vec<usize> = size_line
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::MatrixMarket(format!("bad size line: {e}")))?;
        if dims.len() != 3 {
            return Err(Error::MatrixMarket("size line must have 3 fields".into()));
        }
        let (n_rows, n_cols, nnz) = (dims[0], dims[1], dims[2]);

        let mut trips = Vec::with_capacity(nnz);
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            let fields: Vec<&str> = t.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::MatrixMarket(format!("bad entry line: {t}")));
            }
            let r: usize = fields[0]
                .parse()
                .map_err(|e| Error::MatrixMarket(format!("bad row index: {e}")))?;
            let c: usize = fields[1]
                .parse()
                .map_err(|e| Error::MatrixMarket(format!("bad col index: {e}")))?;
            let v: f64 = fields[2]
                .parse()
                .map_err(|e| Error::MatrixMarket(format!("bad value: {e}")))?;
            if r < 1 || c < 1 {
                return Err(Error::MatrixMarket("indices are 1-based".into()));
            }
            trips.push((r - 1, c - 1, v));
            if symmetric && r != c {
                trips.push((c - 1, r - 1, v));
            }
        }
        if !symmetric && trips.len() != nnz {
            return Err(Error::MatrixMarket(format!(
                "expected {} entries, found {}",
                nnz,
                trips.len()
            )));
        }
        Self::from_triplets(n_rows, n_cols, &trips)
    }

    /// Write in Matrix Market coordinate format (real general).
    pub fn write_matrix_market<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = File::create(path)?;
        let mut w = BufWriter::new(file);
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for r in 0..self.n_rows {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                writeln!(w, "{} {} {:.17e}", r + 1, self.col_indices[k] + 1, self.values[k])?;
            }
        }
        Ok(())
    }
}


type ApplyFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

pub enum OperatorKind {
    Csr(SparseMatrixCsr),
    MatrixFree {
        apply: Box<ApplyFn>,
        one_norm: Option<f64>,
    },
    /// Product of rectangular CSR factors, applied right to left.
    Composed(Vec<SparseMatrixCsr>),
}

impl std::fmt::Debug for OperatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OperatorKind::Csr(m) => write!(f, "Csr({}x{})", m.n_rows(), m.n_cols()),
            OperatorKind::MatrixFree { .. } => write!(f, "MatrixFree"),
            OperatorKind::Composed(fs) => write!(f, "Composed({} factors)", fs.len()),
        }
    }
}

/// A square linear map x ↦ Ax with matvec accounting.
///
/// Immutable after construction except the matvec counter, which is atomic so
/// concurrent solves on the same operator stay countable.
#[derive(Debug)]
pub struct LinearOperator {
    dim: usize,
    kind: OperatorKind,
    symmetric: bool,
    omega_hint: Option<f64>,
    matvec_count: AtomicU64,
}

impl LinearOperator {
    pub fn from_csr(matrix: SparseMatrixCsr, symmetric: bool) -> Result<Self> {
        if matrix.n_rows() != matrix.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.n_rows(),
                found: matrix.n_cols(),
                context: "LinearOperator::from_csr (square matrix required)",
            });
        }
        Ok(Self {
            dim: matrix.n_rows(),
            kind: OperatorKind::Csr(matrix),
            symmetric,
            omega_hint: None,
            matvec_count: AtomicU64::new(0),
        })
    }

    /// `one_norm`: supply the exact or estimated ‖A‖₁ if known; `one_norm()`
    /// errors without it.
    pub fn matrix_free<F>(dim: usize, symmetric: bool, one_norm: Option<f64>, apply: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            dim,
            kind: OperatorKind::MatrixFree {
                apply: Box::new(apply),
                one_norm,
            },
            symmetric,
            omega_hint: None,
            matvec_count: AtomicU64::new(0),
        }
    }

    /// Product factors[0]·factors[1]·…·factors[last]; the overall map must be square.
    pub fn composed(factors: Vec<SparseMatrixCsr>, symmetric: bool) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidInput("composed operator needs factors".into()));
        }
        for w in factors.windows(2) {
            if w[0].n_cols() != w[1].n_rows() {
                return Err(Error::DimensionMismatch {
                    expected: w[0].n_cols(),
                    found: w[1].n_rows(),
                    context: "LinearOperator::composed (factor chain)",
                });
            }
        }
        let dim = factors[0].n_rows();
        if factors.last().unwrap().n_cols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: factors.last().unwrap().n_cols(),
                context: "LinearOperator::composed (square overall map required)",
            });
        }
        Ok(Self {
            dim,
            kind: OperatorKind::Composed(factors),
            symmetric,
            omega_hint: None,
            matvec_count: AtomicU64::new(0),
        })
    }

    pub fn with_omega_hint(mut self, omega: f64) -> Result<Self> {
        if !(omega >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "omega_hint must be nonnegative, got {omega}"
            )));
        }
        self.omega_hint = Some(omega);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Lower bound ω ≥ 0 on the field of values of the symmetric part, when known.
    pub fn omega_hint(&self) -> Option<f64> {
        self.omega_hint
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    /// y = A x. Increments the matvec counter by exactly 1.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
                context: "apply input",
            });
        }
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: y.len(),
                context: "apply output",
            });
        }
        match &self.kind {
            OperatorKind::Csr(m) => m.matvec(x, y),
            OperatorKind::MatrixFree { apply, .. } => apply(x, y),
            OperatorKind::Composed(factors) => {
                let mut cur = x.to_vec();
                for f in factors.iter().rev() {
                    let mut next = vec![0.0; f.n_rows()];
                    f.matvec(&cur, &mut next);
                    cur = next;
                }
                y.copy_from_slice(&cur);
            }
        }
        self.matvec_count.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    pub fn apply_new(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.dim];
        self.apply(x, &mut y)?;
        Ok(y)
    }

    pub fn matvec_count(&self) -> u64 {
        self.matvec_count.load(Ordering::Relaxed)
    }

    /// Returns the accumulated count and resets it to zero.
    pub fn reset_and_read_matvec_count(&self) -> u64 {
        self.matvec_count.swap(0, Ordering::Relaxed)
    }

    /// ‖A‖₁. Exact for CSR; matrix-free operators must have been constructed
    /// with an estimate; composed operators have no cheap column-sum access.
    pub fn one_norm(&self) -> Result<f64> {
        match &self.kind {
            OperatorKind::Csr(m) => Ok(m.one_norm()),
            OperatorKind::MatrixFree { one_norm, .. } => one_norm.ok_or(Error::OneNormUnavailable),
            OperatorKind::Composed(_) => Err(Error::OneNormUnavailable),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn small_random(n_rows: usize, n_cols: usize, seed: u64) -> SparseMatrixCsr {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut trips = Vec::new();
        for r in 0..n_rows {
            for c in 0..n_cols {
                if rng.random::<f64>() < 0.4 {
                    trips.push((r, c, rng.random::<f64>() * 2.0 - 1.0));
                }
            }
        }
        SparseMatrixCsr::from_triplets(n_rows, n_cols, &trips).unwrap()
    }

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = SparseMatrixCsr::from_triplets(
            2,
            3,
            &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 0.5), (1, 1, -1.0)],
        )
        .unwrap();
        assert_eq!(m.nnz(), 3);
        let (cols, vals) = m.row(0);
        assert_eq!(cols, &[0, 2]);
        assert_abs_diff_eq!(vals[1], 1.5);
    }

    #[test]
    fn identity_applies() {
        let op = LinearOperator::from_csr(SparseMatrixCsr::identity(3), true).unwrap();
        let y = op.apply_new(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn zero_operator_maps_to_zero() {
        let op = LinearOperator::from_csr(SparseMatrixCsr::zeros(4, 4), true).unwrap();
        let y = op.apply_new(&[1.0, -2.0, 3.0, 4.0]).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matvec_matches_dense() {
        let m = small_random(17, 17, 7);
        let d = m.to_dense();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let x: Vec<f64> = (0..17).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut y = vec![0.0; 17];
        m.matvec(&x, &mut y);
        for i in 0..17 {
            let mut acc = 0.0;
            for j in 0..17 {
                acc += d[(i, j)] * x[j];
            }
            assert_abs_diff_eq!(y[i], acc, epsilon = 1e-14 * acc.abs().max(1.0));
        }
    }

    #[test]
    fn apply_is_linear() {
        let m = small_random(23, 23, 3);
        let op = LinearOperator::from_csr(m, false).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x: Vec<f64> = (0..23).map(|_| rng.random::<f64>() - 0.5).collect();
            let y: Vec<f64> = (0..23).map(|_| rng.random::<f64>() - 0.5).collect();
            let (a, b) = (rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0);
            let ax = op.apply_new(&x).unwrap();
            let ay = op.apply_new(&y).unwrap();
            let mixed: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| a * xi + b * yi).collect();
            let amixed = op.apply_new(&mixed).unwrap();
            let scale: f64 = a.abs() * crate::vecops::norm2(&ax) + b.abs() * crate::vecops::norm2(&ay);
            for i in 0..23 {
                assert!((amixed[i] - a * ax[i] - b * ay[i]).abs() <= 1e-12 * scale.max(1e-300));
            }
        }
    }

    #[test]
    fn transpose_matvec_agrees_with_transposed_matrix() {
        let m = small_random(11, 19, 5);
        let mt = m.transpose();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let x: Vec<f64> = (0..11).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut y1 = vec![0.0; 19];
        m.matvec_transpose(&x, &mut y1);
        let mut y2 = vec![0.0; 19];
        mt.matvec(&x, &mut y2);
        for i in 0..19 {
            assert_abs_diff_eq!(y1[i], y2[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn one_norm_matches_dense_column_sums() {
        let m = small_random(13, 13, 9);
        let d = m.to_dense();
        let mut best: f64 = 0.0;
        for j in 0..13 {
            let s: f64 = (0..13).map(|i| d[(i, j)].abs()).sum();
            best = best.max(s);
        }
        assert_abs_diff_eq!(m.one_norm(), best, epsilon = 1e-14);
        assert_abs_diff_eq!(
            LinearOperator::from_csr(SparseMatrixCsr::identity(5), true)
                .unwrap()
                .one_norm()
                .unwrap(),
            1.0
        );
    }

    #[test]
    fn matvec_counting() {
        let op = LinearOperator::from_csr(SparseMatrixCsr::identity(4), true).unwrap();
        assert_eq!(op.matvec_count(), 0);
        let x = vec![1.0; 4];
        let mut y = vec![0.0; 4];
        for _ in 0..3 {
            op.apply(&x, &mut y).unwrap();
        }
        assert_eq!(op.matvec_count(), 3);
        assert_eq!(op.reset_and_read_matvec_count(), 3);
        assert_eq!(op.matvec_count(), 0);
        op.apply(&x, &mut y).unwrap();
        assert_eq!(op.matvec_count(), 1);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let op = LinearOperator::from_csr(SparseMatrixCsr::identity(4), true).unwrap();
        let mut y = vec![0.0; 4];
        assert!(matches!(
            op.apply(&[1.0; 3], &mut y),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(LinearOperator::from_csr(SparseMatrixCsr::zeros(3, 4), false).is_err());
    }

    #[test]
    fn composed_operator_applies_right_to_left() {
        // Q (3x2) then R (2x3): overall 3x3? No — composed([R?]) must be square:
        // use P (3x2) * Rt (2x3) = 3x3
        let p = SparseMatrixCsr::from_triplets(3, 2, &[(0, 0, 1.0), (1, 0, 0.5), (1, 1, 0.5), (2, 1, 1.0)])
            .unwrap();
        let r = p.transpose();
        let op = LinearOperator::composed(vec![p.clone(), r.clone()], true).unwrap();
        let x = vec![1.0, 2.0, 3.0];
        let mut mid = vec![0.0; 2];
        r.matvec(&x, &mut mid);
        let mut want = vec![0.0; 3];
        p.matvec(&mid, &mut want);
        let got = op.apply_new(&x).unwrap();
        assert_eq!(got, want);
        assert_eq!(op.matvec_count(), 1);
        assert!(matches!(op.one_norm(), Err(Error::OneNormUnavailable)));
    }

    #[test]
    fn matrix_free_counts_and_norm() {
        let op = LinearOperator::matrix_free(3, true, Some(2.5), |x, y| {
            for i in 0..3 {
                y[i] = 2.5 * x[i];
            }
        });
        let y = op.apply_new(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(y, vec![2.5; 3]);
        assert_eq!(op.matvec_count(), 1);
        assert_abs_diff_eq!(op.one_norm().unwrap(), 2.5);
    }

    #[test]
    fn matrix_market_round_trip() {
        let m = small_random(9, 6, 11);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mtx");
        m.write_matrix_market(&path).unwrap();
        let back = SparseMatrixCsr::read_matrix_market(&path).unwrap();
        assert_eq!(back.n_rows(), 9);
        assert_eq!(back.n_cols(), 6);
        assert_eq!(back.nnz(), m.nnz());
        let d1 = m.to_dense();
        let d2 = back.to_dense();
        for i in 0..9 {
            for j in 0..6 {
                assert_abs_diff_eq!(d1[(i, j)], d2[(i, j)], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn matrix_market_symmetric_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.mtx");
        std::fs::write(
            &path,
            "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 2\n1 1 2.0\n2 1 -1.0\n",
        )
        .unwrap();
        let m = SparseMatrixCsr::read_matrix_market(&path).unwrap();
        let d = m.to_dense();
        assert_eq!(d[(0, 1)], -1.0);
        assert_eq!(d[(1, 0)], -1.0);
        assert_eq!(d[(0, 0)], 2.0);
    }
}
