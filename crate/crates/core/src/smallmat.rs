//! Dense small-matrix kernels: scaling-and-squaring matrix exponential,
//! the scalar φ(z) = (eᶻ − 1)/z, and the projected action u(t) = tφ(−tH)βe₁
//! evaluated through an augmented exponential.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(n_rows: usize, n_cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                expected: n_rows * n_cols,
                found: entries.len(),
                context: "DenseMatrix::from_row_major",
            });
        }
        Ok(Self {
            n_rows,
            n_cols,
            entries,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n_cols..(i + 1) * self.n_cols]
    }

    /// ‖M‖₁ (max absolute column sum)
    pub fn one_norm(&self) -> f64 {
        let mut best: f64 = 0.0;
        for j in 0..self.n_cols {
            let mut s = 0.0;
            for i in 0..self.n_rows {
                s += self[(i, j)].abs();
            }
            best = best.max(s);
        }
        best
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n_cols, rhs.n_rows, "matmul inner dimensions");
        let mut out = DenseMatrix::zeros(self.n_rows, rhs.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let lhs_row = i * rhs.n_cols;
                let rhs_row = k * rhs.n_cols;
                for j in 0..rhs.n_cols {
                    out.entries[lhs_row + j] += a * rhs.entries[rhs_row + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols, "matvec input length");
        (0..self.n_rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// self += a * rhs
    pub fn add_scaled(&mut self, a: f64, rhs: &DenseMatrix) {
        assert_eq!(self.n_rows, rhs.n_rows);
        assert_eq!(self.n_cols, rhs.n_cols);
        for (x, y) in self.entries.iter_mut().zip(&rhs.entries) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in self.entries.iter_mut() {
            *x *= a;
        }
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_rows, self.n_cols, &self.entries)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        let mut out = DenseMatrix::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[(i, j)] = m[(i, j)];
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.entries[i * self.n_cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.entries[i * self.n_cols + j]
    }
}

pub const DEFAULT_EXPM_CAP: usize = 256;

/// Scaling threshold for the degree-13 diagonal Padé approximant.
const THETA_13: f64 = 5.371920351148152;

const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// exp(M) for square M with n ≤ `DEFAULT_EXPM_CAP`.
pub fn expm(m: &DenseMatrix) -> Result<DenseMatrix> {
    expm_with_cap(m, DEFAULT_EXPM_CAP)
}

/// exp(M) with an explicit dimension cap (oracles and internal solvers need
/// more than the default 256).
pub fn expm_with_cap(m: &DenseMatrix, cap: usize) -> Result<DenseMatrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.n_rows(),
            found: m.n_cols(),
            context: "expm (square matrix required)",
        });
    }
    let n = m.n_rows();
    if n > cap {
        return Err(Error::SmallMatrixCap { dim: n, cap });
    }
    if n == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    if !m.is_finite() {
        return Err(Error::NumericalRange("expm input not finite".into()));
    }

    // scale so ‖M/2^s‖₁ ≤ θ₁₃, Padé-13, then square s times
    let norm = m.one_norm();
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let mut a = m.clone();
    if s > 0 {
        a.scale(0.5f64.powi(s as i32));
    }

    let b = &PADE_13;
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a2.matmul(&a4);

    // U = A (A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I)
    let mut inner = DenseMatrix::zeros(n, n);
    inner.add_scaled(b[13], &a6);
    inner.add_scaled(b[11], &a4);
    inner.add_scaled(b[9], &a2);
    let mut u = a6.matmul(&inner);
    u.add_scaled(b[7], &a6);
    u.add_scaled(b[5], &a4);
    u.add_scaled(b[3], &a2);
    u.add_scaled(b[1], &DenseMatrix::identity(n));
    let u = a.matmul(&u);

    // V = A6 (b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
    let mut inner = DenseMatrix::zeros(n, n);
    inner.add_scaled(b[12], &a6);
    inner.add_scaled(b[10], &a4);
    inner.add_scaled(b[8], &a2);
    let mut v = a6.matmul(&inner);
    v.add_scaled(b[6], &a6);
    v.add_scaled(b[4], &a4);
    v.add_scaled(b[2], &a2);
    v.add_scaled(b[0], &DenseMatrix::identity(n));

    // solve (V - U) X = (V + U)
    let mut vmu = v.clone();
    vmu.add_scaled(-1.0, &u);
    let mut vpu = v;
    vpu.add_scaled(1.0, &u);
    let lu = vmu.to_nalgebra().lu();
    let x = lu
        .solve(&vpu.to_nalgebra())
        .ok_or_else(|| Error::NumericalRange("singular Padé denominator in expm".into()))?;
    let mut e = DenseMatrix::from_nalgebra(&x);

    for _ in 0..s {
        e = e.matmul(&e);
    }
    if !e.is_finite() {
        return Err(Error::NumericalRange("expm overflow".into()));
    }
    Ok(e)
}

/// φ(z) = (eᶻ − 1)/z with φ(0) = 1. Taylor branch below |z| = 1e-4 avoids the
/// cancellation in eᶻ − 1.
pub fn phi_scalar(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        // truncation error ≤ |z|⁵/720 < 1.4e-23
        1.0 + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0)))
    } else {
        z.exp_m1() / z
    }
}

/// u(t) = t·φ(−tH)·βe₁ for square H (k×k), via the identity
///
///   exp([[−tH, βe₁], [0, 0]]) = [[exp(−tH), φ(−tH)βe₁], [0, 1]],
///
/// i.e. the top-right column of the (k+1)-dimensional augmented exponential,
/// times t.
pub fn phi_action(h: &DenseMatrix, t: f64, beta: f64) -> Result<Vec<f64>> {
    phi_action_with_cap(h, t, beta, DEFAULT_EXPM_CAP)
}

pub fn phi_action_with_cap(h: &DenseMatrix, t: f64, beta: f64, cap: usize) -> Result<Vec<f64>> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch {
            expected: h.n_rows(),
            found: h.n_cols(),
            context: "phi_action (square H required)",
        });
    }
    let k = h.n_rows();
    if t == 0.0 || beta == 0.0 {
        return Ok(vec![0.0; k]);
    }
    let mut aug = DenseMatrix::zeros(k + 1, k + 1);
    for i in 0..k {
        for j in 0..k {
            aug[(i, j)] = -t * h[(i, j)];
        }
    }
    aug[(0, k)] = beta;
    let e = expm_with_cap(&aug, cap.max(k + 1))?;
    Ok((0..k).map(|i| t * e[(i, k)]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn expm_zero_is_identity() {
        let e = expm(&DenseMatrix::zeros(4, 4)).unwrap();
        assert_eq!(e, DenseMatrix::identity(4));
    }

    #[test]
    fn expm_diagonal() {
        let mut m = DenseMatrix::zeros(2, 2);
        m[(0, 0)] = -1.0;
        m[(1, 1)] = -2.0;
        let e = expm(&m).unwrap();
        assert_abs_diff_eq!(e[(0, 0)], (-1.0f64).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(e[(1, 1)], (-2.0f64).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(e[(0, 1)], 0.0, epsilon = 1e-16);
    }

    #[test]
    fn expm_nilpotent() {
        let m = DenseMatrix::from_row_major(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let e = expm(&m).unwrap();
        assert_abs_diff_eq!(e[(0, 1)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e[(0, 0)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn expm_rotation() {
        // exp([[0, -a], [a, 0]]) = [[cos a, -sin a], [sin a, cos a]]
        let a = 1.3;
        let m = DenseMatrix::from_row_major(2, 2, vec![0.0, -a, a, 0.0]).unwrap();
        let e = expm(&m).unwrap();
        assert_abs_diff_eq!(e[(0, 0)], a.cos(), epsilon = 1e-13);
        assert_abs_diff_eq!(e[(1, 0)], a.sin(), epsilon = 1e-13);
    }

    #[test]
    fn expm_inverse_pair() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let m = DenseMatrix::from_row_major(
                8,
                8,
                (0..64).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(),
            )
            .unwrap();
            let mut neg = m.clone();
            neg.scale(-1.0);
            let prod = expm(&m).unwrap().matmul(&expm(&neg).unwrap());
            for i in 0..8 {
                for j in 0..8 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(prod[(i, j)], want, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn expm_large_norm_scaling() {
        // ‖M‖ = 100 exercises the squaring phase; diagonal keeps an exact answer
        let mut m = DenseMatrix::zeros(3, 3);
        m[(0, 0)] = -100.0;
        m[(1, 1)] = 3.0;
        m[(2, 2)] = -40.0;
        let e = expm(&m).unwrap();
        assert_abs_diff_eq!(e[(1, 1)], 3.0f64.exp(), epsilon = 1e-12 * 3.0f64.exp());
        assert!(e[(0, 0)] < 1e-40);
    }

    #[test]
    fn expm_cap_enforced() {
        let m = DenseMatrix::zeros(10, 10);
        assert!(matches!(
            expm_with_cap(&m, 8),
            Err(Error::SmallMatrixCap { dim: 10, cap: 8 })
        ));
    }

    #[test]
    fn phi_scalar_values() {
        assert_eq!(phi_scalar(0.0), 1.0);
        assert_abs_diff_eq!(phi_scalar(-1.0), 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(phi_scalar(1e-9), 1.0 + 0.5e-9, epsilon = 1e-16);
    }

    #[test]
    fn phi_scalar_branch_continuity() {
        for &z in &[9.9e-5f64, 1.01e-4, -9.9e-5, -1.01e-4] {
            let taylor = 1.0 + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0)));
            let direct = z.exp_m1() / z;
            assert_abs_diff_eq!(taylor, direct, epsilon = 1e-14);
            assert_abs_diff_eq!(phi_scalar(z), taylor, epsilon = 1e-14);
        }
    }

    #[test]
    fn phi_identity_scalar_sweep() {
        // z·φ(z) = eᶻ − 1, logarithmic sweep over both signs
        let mut z = 1e-8;
        while z <= 50.0 {
            for &s in &[z, -z] {
                let lhs = s * phi_scalar(s);
                let rhs = s.exp_m1();
                assert!(
                    (lhs - rhs).abs() <= 1e-13 * rhs.abs().max(1e-300),
                    "z={s}: {lhs} vs {rhs}"
                );
            }
            z *= 1.7;
        }
    }

    #[test]
    fn phi_action_degenerate_cases() {
        let h = DenseMatrix::identity(3);
        assert_eq!(phi_action(&h, 0.0, 2.0).unwrap(), vec![0.0; 3]);

        // k=1, H=(1), t=1, β=1 → 1 − e⁻¹
        let h1 = DenseMatrix::from_row_major(1, 1, vec![1.0]).unwrap();
        let u = phi_action(&h1, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(u[0], 1.0 - (-1.0f64).exp(), epsilon = 1e-14);

        // H = 0 (k=3), t=2, β=1 → (2, 0, 0)
        let h0 = DenseMatrix::zeros(3, 3);
        let u = phi_action(&h0, 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(u[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(u[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(u[2], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn phi_action_matches_matrix_identity() {
        // (−tH)·[tφ(−tH)βe₁] = (exp(−tH) − I)βe₁
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for k in [2usize, 5, 13, 30] {
            let mut h = DenseMatrix::zeros(k, k);
            for i in 0..k {
                // diagonally dominant keeps it well conditioned
                h[(i, i)] = 2.0 + rng.random::<f64>();
                if i + 1 < k {
                    let off = rng.random::<f64>() - 0.5;
                    h[(i, i + 1)] = off;
                    h[(i + 1, i)] = off;
                }
            }
            let (t, beta) = (0.7, 1.9);
            let u = phi_action(&h, t, beta).unwrap();
            let mut neg_th = h.clone();
            neg_th.scale(-t);
            let lhs = neg_th.matvec(&u);
            let e = expm(&neg_th).unwrap();
            let mut rhs: Vec<f64> = (0..k).map(|i| t * e[(i, 0)] * beta).collect();
            rhs[0] -= t * beta;
            let scale = rhs.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
            for i in 0..k {
                assert!((lhs[i] - rhs[i]).abs() <= 1e-10 * scale.max(1e-300));
            }
        }
    }
}
