//! Independent reference solutions for y(t) = v + tφ(−tA)(g − Av), used to
//! validate the iterative solvers: a dense augmented-exponential route for
//! small matrices, a spectral route for symmetric ones, and a tight-tolerance
//! Krylov route for full-size problems.

use crate::error::{Error, Result};
use crate::krylov::{phi_rt_solve_opts, SolveOptions};
use crate::problems::HeatProblem;
use crate::smallmat::{expm_with_cap, phi_scalar, DenseMatrix};
use crate::vecops;

/// Largest matrix dimension accepted by the dense reference routes.
pub const DENSE_REFERENCE_CAP: usize = 512;

/// Tolerance and basis size used by [`reference_solution`].
pub const REFERENCE_REL_TOL: f64 = 1e-13;
pub const REFERENCE_MAX_DIM: usize = 100;

/// Dense ground truth from one augmented exponential:
/// exp([[−tA, ḡ],[0,0]]) = [[e^{−tA}, φ(−tA)ḡ],[0,1]] with ḡ = g − Av,
/// so y = v + t·(top-right column).
pub fn dense_phi_reference(a: &DenseMatrix, v: &[f64], g: &[f64], t: f64) -> Result<Vec<f64>> {
    let n = check_dense_inputs(a, v, g)?;
    if t == 0.0 {
        return Ok(v.to_vec());
    }
    let gbar = gbar_dense(a, v, g);
    let mut aug = DenseMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = -t * a[(i, j)];
        }
        aug[(i, n)] = gbar[i];
    }
    let e = expm_with_cap(&aug, n + 1)?;
    Ok((0..n).map(|i| v[i] + t * e[(i, n)]).collect())
}

/// Spectral ground truth for symmetric A: with A = UΛUᵀ,
/// y = v + t·U φ(−tΛ) Uᵀ ḡ. Structurally independent of the Padé route.
pub fn eigen_phi_reference(a: &DenseMatrix, v: &[f64], g: &[f64], t: f64) -> Result<Vec<f64>> {
    let n = check_dense_inputs(a, v, g)?;
    let scale = a.one_norm().max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidInput(
                    "spectral reference requires a symmetric matrix".into(),
                ));
            }
        }
    }
    if t == 0.0 {
        return Ok(v.to_vec());
    }
    let gbar = gbar_dense(a, v, g);
    let eig = nalgebra::linalg::SymmetricEigen::new(a.to_nalgebra());
    // w = Uᵀḡ, scaled by φ(−tλ), mapped back
    let mut w = vec![0.0; n];
    for k in 0..n {
        let mut s = 0.0;
        for i in 0..n {
            s += eig.eigenvectors[(i, k)] * gbar[i];
        }
        w[k] = s * phi_scalar(-t * eig.eigenvalues[k]);
    }
    let mut y = v.to_vec();
    for i in 0..n {
        let mut s = 0.0;
        for k in 0..n {
            s += eig.eigenvectors[(i, k)] * w[k];
        }
        y[i] += t * s;
    }
    Ok(y)
}

/// Tight-tolerance Krylov reference for problems too large for the dense
/// routes: relative tolerance 1e-13 with a 100-dimensional basis.
pub fn reference_solution(p: &HeatProblem, t: f64) -> Result<Vec<f64>> {
    let result = phi_rt_solve_opts(
        &p.operator,
        &p.v,
        &p.g,
        t,
        REFERENCE_REL_TOL,
        SolveOptions {
            max_dim: REFERENCE_MAX_DIM,
            ..Default::default()
        },
    )?;
    Ok(result.y)
}

/// ‖y − y_ref‖₂ / ‖y_ref‖₂.
pub fn relative_error(y: &[f64], y_ref: &[f64]) -> Result<f64> {
    if y.len() != y_ref.len() {
        return Err(Error::DimensionMismatch {
            expected: y_ref.len(),
            found: y.len(),
            context: "relative_error",
        });
    }
    let denom = vecops::norm2(y_ref);
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(vecops::norm2(&vecops::sub(y, y_ref)) / denom)
}

fn check_dense_inputs(a: &DenseMatrix, v: &[f64], g: &[f64]) -> Result<usize> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.n_rows(),
            found: a.n_cols(),
            context: "dense reference (square matrix required)",
        });
    }
    let n = a.n_rows();
    if n > DENSE_REFERENCE_CAP {
        return Err(Error::SmallMatrixCap {
            dim: n,
            cap: DENSE_REFERENCE_CAP,
        });
    }
    if v.len() != n || g.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if v.len() != n { v.len() } else { g.len() },
            context: "dense reference vectors",
        });
    }
    Ok(n)
}

fn gbar_dense(a: &DenseMatrix, v: &[f64], g: &[f64]) -> Vec<f64> {
    let av = a.matvec(v);
    g.iter().zip(&av).map(|(gi, ai)| gi - ai).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::heat1d;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let x = (rng.random::<f64>() * 2.0 - 1.0) * scale;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        m
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DenseMatrix {
        let b = random_symmetric(rng, n, scale);
        let mut m = b.matmul(&b.transpose());
        m.scale(1.0 / n as f64);
        for i in 0..n {
            m[(i, i)] += 0.01 * scale;
        }
        m
    }

    #[test]
    fn zero_matrix_gives_v_plus_tg() {
        let a = DenseMatrix::zeros(5, 5);
        let v = vec![1.0, -2.0, 0.5, 3.0, 0.0];
        let g = vec![0.25, 1.0, -1.0, 2.0, 4.0];
        let y = dense_phi_reference(&a, &v, &g, 0.75).unwrap();
        for i in 0..5 {
            assert_abs_diff_eq!(y[i], v[i] + 0.75 * g[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn scalar_closed_form() {
        // 1×1: y = e^{−at}v + (1 − e^{−at})g/a
        for &(a, v, g, t) in &[
            (2.0, 1.5, 0.5, 0.3),
            (0.1, -1.0, 2.0, 4.0),
            (50.0, 0.0, 1.0, 0.2),
        ] {
            let m = DenseMatrix::from_row_major(1, 1, vec![a]).unwrap();
            let want = (-a * t).exp() * v + (1.0 - (-a * t).exp()) * g / a;
            let y1 = dense_phi_reference(&m, &[v], &[g], t).unwrap();
            let y2 = eigen_phi_reference(&m, &[v], &[g], t).unwrap();
            assert_abs_diff_eq!(y1[0], want, epsilon = 1e-13 * want.abs().max(1.0));
            assert_abs_diff_eq!(y2[0], want, epsilon = 1e-13 * want.abs().max(1.0));
        }
    }

    #[test]
    fn pade_and_eigen_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_symmetric(&mut rng, 64, 3.0);
        let v = rand_vec(&mut rng, 64);
        let g = rand_vec(&mut rng, 64);
        let y1 = dense_phi_reference(&a, &v, &g, 0.7).unwrap();
        let y2 = eigen_phi_reference(&a, &v, &g, 0.7).unwrap();
        assert!(relative_error(&y1, &y2).unwrap() <= 1e-12);
    }

    #[test]
    fn eigen_route_rejects_nonsymmetric() {
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 5.0, 0.0, 1.0]).unwrap();
        assert!(eigen_phi_reference(&a, &[1.0, 1.0], &[0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn finite_difference_matches_ode() {
        // y′(t) = −Ay(t) + g, checked by central differences
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(&mut rng, 20, 2.0);
        let v = rand_vec(&mut rng, 20);
        let g = rand_vec(&mut rng, 20);
        let (t, eps) = (0.5, 1e-4);
        let yp = dense_phi_reference(&a, &v, &g, t + eps).unwrap();
        let ym = dense_phi_reference(&a, &v, &g, t - eps).unwrap();
        let y = dense_phi_reference(&a, &v, &g, t).unwrap();
        let ay = a.matvec(&y);
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..20 {
            let fd = (yp[i] - ym[i]) / (2.0 * eps);
            let rhs = -ay[i] + g[i];
            num += (fd - rhs) * (fd - rhs);
            den += rhs * rhs;
        }
        assert!((num / den).sqrt() <= 1e-6, "FD mismatch {}", (num / den).sqrt());
    }

    #[test]
    fn krylov_reference_matches_dense() {
        let p = heat1d(64).unwrap();
        let mut dense = DenseMatrix::zeros(64, 64);
        for j in 0..64 {
            let mut e = vec![0.0; 64];
            e[j] = 1.0;
            let col = p.operator.apply_new(&e).unwrap();
            for i in 0..64 {
                dense[(i, j)] = col[i];
            }
        }
        let want = dense_phi_reference(&dense, &p.v, &p.g, p.t_end).unwrap();
        let got = reference_solution(&p, p.t_end).unwrap();
        assert!(relative_error(&got, &want).unwrap() <= 1e-11);
    }

    #[test]
    fn krylov_reference_self_consistency() {
        let p = heat1d(256).unwrap();
        let y100 = reference_solution(&p, p.t_end).unwrap();
        let y120 = phi_rt_solve_opts(
            &p.operator,
            &p.v,
            &p.g,
            p.t_end,
            REFERENCE_REL_TOL,
            SolveOptions {
                max_dim: 120,
                ..Default::default()
            },
        )
        .unwrap()
        .y;
        assert!(relative_error(&y100, &y120).unwrap() <= 1e-11);
    }

    #[test]
    fn reference_at_t_zero_is_v() {
        let p = heat1d(32).unwrap();
        assert_eq!(reference_solution(&p, 0.0).unwrap(), p.v);
    }

    #[test]
    fn relative_error_basics() {
        assert_eq!(relative_error(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            relative_error(&[2.0, 0.0], &[1.0, 0.0]).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert!(matches!(
            relative_error(&[1.0], &[0.0]),
            Err(Error::ZeroReference)
        ));
        assert!(relative_error(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn dense_routes_enforce_cap() {
        let a = DenseMatrix::zeros(513, 513);
        let v = vec![0.0; 513];
        match dense_phi_reference(&a, &v, &v, 1.0) {
            Err(Error::SmallMatrixCap { dim: 513, cap: 512 }) => {}
            other => panic!("want SmallMatrixCap, got {other:?}"),
        }
    }

    #[test]
    fn spd_solution_decays_to_steady_state() {
        // for SPD A, ‖y(t) − A⁻¹g‖ is nonincreasing in t
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_spd(&mut rng, 24, 2.0);
        let v = rand_vec(&mut rng, 24);
        let g = rand_vec(&mut rng, 24);
        let lu = a.to_nalgebra().lu();
        let steady = lu
            .solve(&nalgebra::DVector::from_column_slice(&g))
            .expect("SPD solve");
        let mut prev = f64::INFINITY;
        for &t in &[0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 6.4] {
            let y = dense_phi_reference(&a, &v, &g, t).unwrap();
            let dist: f64 = y
                .iter()
                .enumerate()
                .map(|(i, yi)| (yi - steady[i]) * (yi - steady[i]))
                .sum::<f64>()
                .sqrt();
            assert!(dist <= prev * (1.0 + 1e-12), "distance grew at t = {t}");
            prev = dist;
        }
    }
}
