//! Grid transfer between factor-2 coarsened tensor grids.
//!
//! Prolongation Q interpolates coarse-node values onto the fine nodes
//! (piecewise-linear or cubic spline, per axis; 3D operators act as tensor
//! products of the per-axis 1D matrices and are never materialized whole).
//! Restriction is the exact transpose action of Q. A vector split
//! ḡ = Q·g̃ + ĝ takes g̃ as the interpolation of ḡ onto the coarse nodes, so
//! the remainder ĝ is small exactly when ḡ is smooth enough for the coarse
//! grid to represent it.
//!
//! Node rule: axis nodes are x_i = i/(n+1), i = 1..n. Under factor-2
//! coarsening the coarse and fine node sets are not nested, hence genuine
//! interpolation (not injection) in both directions.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::operators::SparseMatrixCsr;
use crate::vecops::norm2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Dirichlet,
    Periodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransferMethod {
    Linear,
    CubicSpline,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSpec {
    extents: Vec<usize>,
    boundary: Boundary,
}

impl GridSpec {
    pub fn new_1d(n: usize, boundary: Boundary) -> Result<Self> {
        Self::new(vec![n], boundary)
    }

    pub fn new_3d(nx: usize, ny: usize, nz: usize, boundary: Boundary) -> Result<Self> {
        Self::new(vec![nx, ny, nz], boundary)
    }

    fn new(extents: Vec<usize>, boundary: Boundary) -> Result<Self> {
        if extents.len() != 1 && extents.len() != 3 {
            return Err(Error::InvalidGrid(format!(
                "grids are 1D or 3D, got {} axes",
                extents.len()
            )));
        }
        if let Some(&n) = extents.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidGrid(format!("axis extent {n} < 2")));
        }
        Ok(Self { extents, boundary })
    }

    pub fn dims(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn total_points(&self) -> usize {
        self.extents.iter().product()
    }

    /// Nodes x_i = i/(n+1), i = 1..n (0-based storage).
    pub fn axis_nodes(&self, axis: usize) -> Vec<f64> {
        let n = self.extents[axis];
        (0..n).map(|i| (i + 1) as f64 / (n + 1) as f64).collect()
    }

    /// Grid with every extent halved.
    pub fn coarsen(&self) -> Result<GridSpec> {
        let mut extents = Vec::with_capacity(self.extents.len());
        for &n in &self.extents {
            if n % 2 != 0 || n < 4 {
                return Err(Error::InvalidGrid(format!(
                    "extent {n} cannot be halved (must be even and ≥ 4)"
                )));
            }
            extents.push(n / 2);
        }
        GridSpec::new(extents, self.boundary)
    }
}

pub struct TransferOperator {
    fine: GridSpec,
    coarse: GridSpec,
    method: TransferMethod,
    /// per axis, fine_extent × coarse_extent
    axis_prolong: Vec<SparseMatrixCsr>,
    /// per axis, coarse_extent × fine_extent: exact transpose of axis_prolong
    axis_adjoint: Vec<SparseMatrixCsr>,
    /// per axis, coarse_extent × fine_extent: interpolation onto coarse nodes
    axis_sample: Vec<SparseMatrixCsr>,
    norm_cache: OnceLock<f64>,
}

/// Result of splitting a fine-grid vector across the grid pair.
#[derive(Clone, Debug)]
pub struct SplitVector {
    /// ḡ interpolated onto the coarse nodes.
    pub gtilde: Vec<f64>,
    /// ḡ − Q·g̃: the part prolongation cannot recover.
    pub ghat: Vec<f64>,
    pub beta: f64,
    pub beta_tilde: f64,
    pub beta_hat: f64,
}

pub fn build_prolongation(
    coarse: &GridSpec,
    fine: &GridSpec,
    method: TransferMethod,
) -> Result<TransferOperator> {
    if coarse.dims() != fine.dims() {
        return Err(Error::InvalidGrid(format!(
            "dimension mismatch: fine is {}D, coarse is {}D",
            fine.dims(),
            coarse.dims()
        )));
    }
    if coarse.boundary() != fine.boundary() {
        return Err(Error::UnsupportedBoundary(
            "fine and coarse grids must share the boundary type".into(),
        ));
    }
    for axis in 0..fine.dims() {
        if fine.extents()[axis] != 2 * coarse.extents()[axis] {
            return Err(Error::ExtentMismatch {
                axis,
                fine: fine.extents()[axis],
                coarse: coarse.extents()[axis],
            });
        }
    }
    let mut axis_prolong = Vec::new();
    let mut axis_adjoint = Vec::new();
    let mut axis_sample = Vec::new();
    for axis in 0..fine.dims() {
        let from = coarse.axis_nodes(axis);
        let to = fine.axis_nodes(axis);
        let p = interpolation_matrix(&from, &to, method, fine.boundary())?;
        axis_adjoint.push(p.transpose());
        axis_sample.push(interpolation_matrix(&to, &from, method, fine.boundary())?);
        axis_prolong.push(p);
    }
    Ok(TransferOperator {
        fine: fine.clone(),
        coarse: coarse.clone(),
        method,
        axis_prolong,
        axis_adjoint,
        axis_sample,
        norm_cache: OnceLock::new(),
    })
}

impl TransferOperator {
    /// Degenerate same-grid transfer with Q = I.
    pub fn identity(grid: &GridSpec) -> Self {
        let eyes: Vec<SparseMatrixCsr> = grid
            .extents()
            .iter()
            .map(|&n| SparseMatrixCsr::identity(n))
            .collect();
        Self {
            fine: grid.clone(),
            coarse: grid.clone(),
            method: TransferMethod::Linear,
            axis_prolong: eyes.clone(),
            axis_adjoint: eyes.clone(),
            axis_sample: eyes,
            norm_cache: OnceLock::new(),
        }
    }

    pub fn fine(&self) -> &GridSpec {
        &self.fine
    }

    pub fn coarse(&self) -> &GridSpec {
        &self.coarse
    }

    pub fn method(&self) -> TransferMethod {
        self.method
    }

    /// Q·xc: coarse values interpolated onto the fine grid.
    pub fn prolong(&self, xc: &[f64]) -> Result<Vec<f64>> {
        if xc.len() != self.coarse.total_points() {
            return Err(Error::DimensionMismatch {
                expected: self.coarse.total_points(),
                found: xc.len(),
                context: "prolong",
            });
        }
        Ok(self.apply_axes(&self.axis_prolong, xc, self.coarse.extents()))
    }

    /// Qᵀ·xf: the exact transpose action of prolongation.
    pub fn restrict(&self, xf: &[f64]) -> Result<Vec<f64>> {
        if xf.len() != self.fine.total_points() {
            return Err(Error::DimensionMismatch {
                expected: self.fine.total_points(),
                found: xf.len(),
                context: "restrict",
            });
        }
        Ok(self.apply_axes(&self.axis_adjoint, xf, self.fine.extents()))
    }

    /// Fine values interpolated onto the coarse nodes (the coarse-grid
    /// representation used by `split_vector`; not the transpose of Q).
    pub fn sample_to_coarse(&self, xf: &[f64]) -> Result<Vec<f64>> {
        if xf.len() != self.fine.total_points() {
            return Err(Error::DimensionMismatch {
                expected: self.fine.total_points(),
                found: xf.len(),
                context: "sample_to_coarse",
            });
        }
        Ok(self.apply_axes(&self.axis_sample, xf, self.fine.extents()))
    }

    /// ḡ = Q·g̃ + ĝ with g̃ the coarse interpolation of ḡ. The reconstruction
    /// identity holds by construction; β̂ ≪ β signals that the coarse grid
    /// carries almost all of ḡ.
    pub fn split_vector(&self, gbar: &[f64]) -> Result<SplitVector> {
        let gtilde = self.sample_to_coarse(gbar)?;
        let qg = self.prolong(&gtilde)?;
        let ghat: Vec<f64> = gbar.iter().zip(&qg).map(|(g, q)| g - q).collect();
        Ok(SplitVector {
            beta: norm2(gbar),
            beta_tilde: norm2(&gtilde),
            beta_hat: norm2(&ghat),
            gtilde,
            ghat,
        })
    }

    /// ‖Q‖₂ by power iteration on QᵀQ; computed once and cached.
    pub fn prolongation_norm_estimate(&self) -> f64 {
        *self.norm_cache.get_or_init(|| {
            let nc = self.coarse.total_points();
            let mut rng = ChaCha8Rng::seed_from_u64(0x51ce);
            let mut x: Vec<f64> = (0..nc).map(|_| rng.random::<f64>() - 0.5).collect();
            let nrm = norm2(&x);
            for xi in x.iter_mut() {
                *xi /= nrm;
            }
            let mut lambda = 0.0f64;
            for _ in 0..1000 {
                let qx = self
                    .prolong(&x)
                    .expect("power iteration uses matching dimensions");
                let mut w = self
                    .restrict(&qx)
                    .expect("power iteration uses matching dimensions");
                let new_lambda: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
                let wn = norm2(&w);
                if wn == 0.0 {
                    return 0.0;
                }
                for wi in w.iter_mut() {
                    *wi /= wn;
                }
                x = w;
                if (new_lambda - lambda).abs() <= 1e-6 * new_lambda.abs() {
                    lambda = new_lambda;
                    break;
                }
                lambda = new_lambda;
            }
            lambda.max(0.0).sqrt()
        })
    }

    fn apply_axes(
        &self,
        mats: &[SparseMatrixCsr],
        x: &[f64],
        from_extents: &[usize],
    ) -> Vec<f64> {
        if self.fine.dims() == 1 {
            assert_eq!(mats[0].n_cols(), x.len(), "dimension checked by caller");
            let mut out = vec![0.0; mats[0].n_rows()];
            mats[0].matvec(x, &mut out);
            return out;
        }
        let mut dims = [from_extents[0], from_extents[1], from_extents[2]];
        let mut data = x.to_vec();
        for (axis, m) in mats.iter().enumerate() {
            let (next, next_dims) = apply_axis_matrix(m, &data, &dims, axis);
            data = next;
            dims = next_dims;
        }
        data
    }
}

/// Apply a 1D matrix along one axis of an x-fastest 3D array.
fn apply_axis_matrix(
    m: &SparseMatrixCsr,
    src: &[f64],
    src_dims: &[usize; 3],
    axis: usize,
) -> (Vec<f64>, [usize; 3]) {
    let mut dst_dims = *src_dims;
    dst_dims[axis] = m.n_rows();
    let mut dst = vec![0.0; dst_dims[0] * dst_dims[1] * dst_dims[2]];
    let (na, nb) = match axis {
        0 => (src_dims[1], src_dims[2]),
        1 => (src_dims[0], src_dims[2]),
        _ => (src_dims[0], src_dims[1]),
    };
    let src_stride = match axis {
        0 => 1,
        1 => src_dims[0],
        _ => src_dims[0] * src_dims[1],
    };
    let dst_stride = match axis {
        0 => 1,
        1 => dst_dims[0],
        _ => dst_dims[0] * dst_dims[1],
    };
    let mut line = vec![0.0; src_dims[axis]];
    for b in 0..nb {
        for a in 0..na {
            let src_base = match axis {
                0 => src_dims[0] * (a + src_dims[1] * b),
                1 => a + src_dims[0] * src_dims[1] * b,
                _ => a + src_dims[0] * b,
            };
            let dst_base = match axis {
                0 => dst_dims[0] * (a + dst_dims[1] * b),
                1 => a + dst_dims[0] * dst_dims[1] * b,
                _ => a + dst_dims[0] * b,
            };
            for (i, li) in line.iter_mut().enumerate() {
                *li = src[src_base + i * src_stride];
            }
            for r in 0..m.n_rows() {
                let (cols, vals) = m.row(r);
                let mut s = 0.0;
                for (c, v) in cols.iter().zip(vals) {
                    s += line[*c] * v;
                }
                dst[dst_base + r * dst_stride] = s;
            }
        }
    }
    (dst, dst_dims)
}

/// Matrix of the 1D interpolation rule mapping values at `from` nodes to
/// values at `to` nodes (both strictly increasing inside (0,1)). Dirichlet
/// axes extend the end polynomial piece beyond the node hull; periodic axes
/// close the circle with the wrap interval [x_n, x_1 + 1].
fn interpolation_matrix(
    from: &[f64],
    to: &[f64],
    method: TransferMethod,
    boundary: Boundary,
) -> Result<SparseMatrixCsr> {
    // cubic interpolation needs ≥ 4 nodes; degrade gracefully below that
    let effective = if from.len() < 4 {
        TransferMethod::Linear
    } else {
        method
    };
    match (effective, boundary) {
        (TransferMethod::Linear, _) => linear_matrix(from, to, boundary),
        (TransferMethod::CubicSpline, Boundary::Dirichlet) => spline_matrix_dirichlet(from, to),
        (TransferMethod::CubicSpline, Boundary::Periodic) => spline_matrix_periodic(from, to),
    }
}

fn linear_matrix(from: &[f64], to: &[f64], boundary: Boundary) -> Result<SparseMatrixCsr> {
    let n = from.len();
    let mut trips = Vec::with_capacity(2 * to.len());
    for (r, &x) in to.iter().enumerate() {
        match boundary {
            Boundary::Dirichlet => {
                // bracketing interval, end intervals extended outward
                let i = locate_clamped(from, x);
                let h = from[i + 1] - from[i];
                let a = (x - from[i]) / h;
                push_weight(&mut trips, r, i, 1.0 - a);
                push_weight(&mut trips, r, i + 1, a);
            }
            Boundary::Periodic => {
                if x < from[0] || x >= from[n - 1] {
                    // wrap interval from the last node around to the first
                    let h = from[0] + 1.0 - from[n - 1];
                    let d = if x < from[0] {
                        x + 1.0 - from[n - 1]
                    } else {
                        x - from[n - 1]
                    };
                    let a = d / h;
                    push_weight(&mut trips, r, n - 1, 1.0 - a);
                    push_weight(&mut trips, r, 0, a);
                } else {
                    let i = locate_clamped(from, x);
                    let h = from[i + 1] - from[i];
                    let a = (x - from[i]) / h;
                    push_weight(&mut trips, r, i, 1.0 - a);
                    push_weight(&mut trips, r, i + 1, a);
                }
            }
        }
    }
    SparseMatrixCsr::from_triplets(to.len(), n, &trips)
}

fn push_weight(trips: &mut Vec<(usize, usize, f64)>, r: usize, c: usize, w: f64) {
    if w != 0.0 {
        trips.push((r, c, w));
    }
}

/// Index i with from[i] ≤ x < from[i+1], clamped to the end intervals.
fn locate_clamped(from: &[f64], x: f64) -> usize {
    let n = from.len();
    from.partition_point(|&t| t <= x)
        .saturating_sub(1)
        .min(n - 2)
}

/// Not-a-knot cubic spline interpolation matrix: one column per unit vector
/// at a `from` node, evaluated at all `to` nodes (end pieces extended beyond
/// the hull).
fn spline_matrix_dirichlet(from: &[f64], to: &[f64]) -> Result<SparseMatrixCsr> {
    let n = from.len();
    let mut trips = Vec::new();
    let mut y = vec![0.0; n];
    for j in 0..n {
        y[j] = 1.0;
        let m = not_a_knot_moments(from, &y);
        for (r, &x) in to.iter().enumerate() {
            let i = locate_clamped(from, x);
            let w = spline_piece(from[i], from[i + 1], y[i], y[i + 1], m[i], m[i + 1], x);
            push_weight(&mut trips, r, j, w);
        }
        y[j] = 0.0;
    }
    SparseMatrixCsr::from_triplets(to.len(), n, &trips)
}

fn spline_matrix_periodic(from: &[f64], to: &[f64]) -> Result<SparseMatrixCsr> {
    let n = from.len();
    let mut trips = Vec::new();
    let mut y = vec![0.0; n];
    for j in 0..n {
        y[j] = 1.0;
        let m = periodic_moments(from, &y);
        for (r, &x) in to.iter().enumerate() {
            let w = if x < from[0] || x >= from[n - 1] {
                let xx = if x < from[0] { x + 1.0 } else { x };
                spline_piece(from[n - 1], from[0] + 1.0, y[n - 1], y[0], m[n - 1], m[0], xx)
            } else {
                let i = locate_clamped(from, x);
                spline_piece(from[i], from[i + 1], y[i], y[i + 1], m[i], m[i + 1], x)
            };
            push_weight(&mut trips, r, j, w);
        }
        y[j] = 0.0;
    }
    SparseMatrixCsr::from_triplets(to.len(), n, &trips)
}

/// Cubic piece in moment (second-derivative) form on [t0, t1], evaluated at x
/// (x may lie outside the interval: polynomial extension).
fn spline_piece(t0: f64, t1: f64, y0: f64, y1: f64, m0: f64, m1: f64, x: f64) -> f64 {
    let h = t1 - t0;
    let ax = t1 - x;
    let bx = x - t0;
    m0 * ax * ax * ax / (6.0 * h)
        + m1 * bx * bx * bx / (6.0 * h)
        + (y0 - m0 * h * h / 6.0) * ax / h
        + (y1 - m1 * h * h / 6.0) * bx / h
}

/// Second derivatives of the not-a-knot cubic spline through (t_i, y_i).
/// Requires ≥ 4 knots. The two not-a-knot conditions are eliminated into the
/// first and last interior rows, leaving a tridiagonal system.
fn not_a_knot_moments(t: &[f64], y: &[f64]) -> Vec<f64> {
    let k = t.len();
    debug_assert!(k >= 4);
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let nu = k - 2; // unknowns M_1 .. M_{k-2}
    let mut sub = vec![0.0; nu - 1];
    let mut diag = vec![0.0; nu];
    let mut sup = vec![0.0; nu - 1];
    let mut rhs = vec![0.0; nu];
    for i in 1..=k - 2 {
        let (a, b, c) = (h[i - 1] / 6.0, (h[i - 1] + h[i]) / 3.0, h[i] / 6.0);
        let r = (y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1];
        let u = i - 1; // row in the reduced system
        rhs[u] = r;
        if i == 1 {
            // M_0 = ((h_0+h_1)M_1 − h_0·M_2)/h_1
            diag[u] = b + a * (h[0] + h[1]) / h[1];
            sup[u] = c - a * h[0] / h[1];
        } else if i == k - 2 {
            // M_{k−1} = ((h_{k−3}+h_{k−2})M_{k−2} − h_{k−2}·M_{k−3})/h_{k−3}
            sub[u - 1] = a - c * h[k - 2] / h[k - 3];
            diag[u] = b + c * (h[k - 3] + h[k - 2]) / h[k - 3];
        } else {
            sub[u - 1] = a;
            diag[u] = b;
            sup[u] = c;
        }
    }
    let inner = solve_tridiag(&sub, &diag, &sup, &rhs);
    let mut m = vec![0.0; k];
    m[1..k - 1].copy_from_slice(&inner);
    m[0] = ((h[0] + h[1]) * m[1] - h[0] * m[2]) / h[1];
    m[k - 1] = ((h[k - 3] + h[k - 2]) * m[k - 2] - h[k - 2] * m[k - 3]) / h[k - 3];
    m
}

/// Second derivatives of the periodic cubic spline (knots on the unit
/// circle; the wrap interval runs from t_{n−1} to t_0 + 1).
fn periodic_moments(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    debug_assert!(n >= 3);
    let mut h = vec![0.0; n];
    for i in 0..n - 1 {
        h[i] = t[i + 1] - t[i];
    }
    h[n - 1] = t[0] + 1.0 - t[n - 1];
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut r = vec![0.0; n];
    for i in 0..n {
        let hm = h[(i + n - 1) % n];
        let hp = h[i];
        a[i] = hm / 6.0;
        b[i] = (hm + hp) / 3.0;
        c[i] = hp / 6.0;
        let yp = y[(i + 1) % n];
        let ym = y[(i + n - 1) % n];
        r[i] = (yp - y[i]) / hp - (y[i] - ym) / hm;
    }
    solve_cyclic_tridiag(&a, &b, &c, &r)
}

/// Thomas algorithm. `sub[i]` multiplies x[i], `sup[i]` multiplies x[i+1] in
/// row i+1 and i respectively.
fn solve_tridiag(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = if n > 1 { sup[0] / diag[0] } else { 0.0 };
    dp[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i - 1] * cp[i - 1];
        cp[i] = if i < n - 1 { sup[i] / m } else { 0.0 };
        dp[i] = (rhs[i] - sub[i - 1] * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Cyclic tridiagonal solve (row i couples x[i−1], x[i], x[i+1] mod n) via
/// the rank-one Sherman–Morrison correction of a plain tridiagonal system.
fn solve_cyclic_tridiag(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    debug_assert!(n >= 3);
    let gamma = -b[0];
    let mut diag = b.to_vec();
    diag[0] -= gamma;
    diag[n - 1] -= c[n - 1] * a[0] / gamma;
    let sub: Vec<f64> = (1..n).map(|i| a[i]).collect();
    let sup: Vec<f64> = (0..n - 1).map(|i| c[i]).collect();
    let x1 = solve_tridiag(&sub, &diag, &sup, d);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = c[n - 1];
    let x2 = solve_tridiag(&sub, &diag, &sup, &u);
    let vx1 = x1[0] + a[0] / gamma * x1[n - 1];
    let vx2 = x2[0] + a[0] / gamma * x2[n - 1];
    let f = vx1 / (1.0 + vx2);
    (0..n).map(|i| x1[i] - f * x2[i]).collect()
}
