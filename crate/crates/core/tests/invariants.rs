//! Randomized invariant checks: algebraic identities that must hold for any
//! admissible input, exercised over generated instances.

use proptest::prelude::*;

use phicgc::cgc::{cgc_multigrid, CgcConfig};
use phicgc::krylov::ArnoldiDecomposition;
use phicgc::operators::{LinearOperator, SparseMatrixCsr};
use phicgc::problems::{build_hierarchy, heat1d, heat3d};
use phicgc::smallmat::{expm, phi_action, phi_scalar, DenseMatrix};
use phicgc::transfer::TransferMethod;

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Random sparse matrix as (dense mirror, CSR operator) for cross-checking.
fn random_pair(seed: &[f64], n: usize) -> (Vec<Vec<f64>>, LinearOperator) {
    let mut dense = vec![vec![0.0; n]; n];
    let mut triplets = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = seed[(i * n + j) % seed.len()] * (1.0 + ((i + 2 * j) % 7) as f64);
            if (i + j) % 3 != 0 || i == j {
                dense[i][j] = v;
                triplets.push((i, j, v));
            }
        }
    }
    let csr = SparseMatrixCsr::from_triplets(n, n, &triplets).unwrap();
    (dense, LinearOperator::from_csr(csr, false).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // z·φ(z) = e^z − 1 to 1e-13 relative across ±[1e-8, 50], log-distributed.
    #[test]
    fn scalar_phi_identity(exp10 in -8f64..1.69897f64, negative in any::<bool>()) {
        let z = if negative { -10f64.powf(exp10) } else { 10f64.powf(exp10) };
        let lhs = z * phi_scalar(z);
        let rhs = z.exp_m1();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * rhs.abs());
    }

    // tφ(−tω) ≤ min{t, 1/ω} for ω > 0, and equals t at ω = 0.
    #[test]
    fn phi_prefactor_bound(t in 0.0f64..100.0, omega in 0.0f64..1000.0) {
        let f = t * phi_scalar(-t * omega);
        if omega == 0.0 {
            prop_assert_eq!(f, t);
        } else {
            prop_assert!(f <= t.min(1.0 / omega) * (1.0 + 1e-15));
        }
    }

    // Operator application is linear and matches a dense mirror.
    #[test]
    fn operator_linearity(
        seed in prop::collection::vec(-1.0f64..1.0, 16),
        n in 2usize..24,
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
    ) {
        let (dense, op) = random_pair(&seed, n);
        let x: Vec<f64> = (0..n).map(|i| seed[i % seed.len()] + 0.1).collect();
        let y: Vec<f64> = (0..n).map(|i| seed[(i + 5) % seed.len()] - 0.2).collect();
        let ax = op.apply_new(&x).unwrap();
        let ay = op.apply_new(&y).unwrap();
        let combined: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| alpha * xi + beta * yi).collect();
        let a_comb = op.apply_new(&combined).unwrap();
        for i in 0..n {
            let expect = alpha * ax[i] + beta * ay[i];
            prop_assert!((a_comb[i] - expect).abs() <= 1e-12 * (alpha.abs() * norm2(&ax) + beta.abs() * norm2(&ay) + 1.0));
            let direct: f64 = dense[i].iter().zip(&x).map(|(a, b)| a * b).sum();
            prop_assert!((ax[i] - direct).abs() <= 1e-14 * (direct.abs() + 1.0));
        }
    }

    // (−tH)·[tφ(−tH)βe₁] = t·(exp(−tH) − I)βe₁ to 1e-10 relative.
    #[test]
    fn matrix_phi_identity(
        diag in prop::collection::vec(-1.0f64..3.0, 2..=30),
        t in 0.05f64..2.0,
        beta in 0.1f64..10.0,
    ) {
        let k = diag.len();
        let mut entries = vec![0.0; k * k];
        for i in 0..k {
            entries[i * k + i] = diag[i];
            if i + 1 < k {
                let off = 0.3 + 0.5 * diag[i].abs();
                entries[i * k + i + 1] = off;
                entries[(i + 1) * k + i] = off;
            }
        }
        let h = DenseMatrix::from_row_major(k, k, entries).unwrap();
        let u = phi_action(&h, t, beta).unwrap();
        let mut neg_th = h.clone();
        neg_th.scale(-t);
        let lhs = neg_th.matvec(&u);
        let e = expm(&neg_th).unwrap();
        let mut rhs: Vec<f64> = (0..k).map(|i| t * beta * e.row(i)[0]).collect();
        rhs[0] -= t * beta;
        // Natural evaluation scale: the forward pass amplifies by ‖tH‖.
        let scale = norm2(&rhs) + neg_th.one_norm() * norm2(&u);
        prop_assert!(norm2(&lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect::<Vec<_>>()) <= 1e-10 * scale);
    }

    // β times the first Arnoldi basis column reconstructs ḡ = g − Av.
    #[test]
    fn arnoldi_beta_reconstruction(
        seed in prop::collection::vec(-1.0f64..1.0, 16),
        n in 4usize..32,
    ) {
        let (_, op) = random_pair(&seed, n);
        let v: Vec<f64> = (0..n).map(|i| seed[(i + 3) % seed.len()]).collect();
        let g: Vec<f64> = (0..n).map(|i| seed[(i + 9) % seed.len()] + 0.5).collect();
        let av = op.apply_new(&v).unwrap();
        let gbar: Vec<f64> = g.iter().zip(&av).map(|(a, b)| a - b).collect();
        let dec = ArnoldiDecomposition::new(&op, &gbar, 5).unwrap();
        let v1 = &dec.basis()[0];
        let recon: Vec<f64> = v1.iter().map(|x| dec.beta() * x).collect();
        let diff = norm2(&recon.iter().zip(&gbar).map(|(a, b)| a - b).collect::<Vec<_>>());
        prop_assert!(diff <= 1e-13 * dec.beta());
    }

    // Splitting ḡ at any level reconstructs exactly: Q·g̃ + ĝ = ḡ.
    #[test]
    fn split_reconstruction(
        half in 4usize..40,
        shift in 0.0f64..1.0,
        spline in any::<bool>(),
    ) {
        let p = heat1d(2 * half).unwrap();
        let method = if spline { TransferMethod::CubicSpline } else { TransferMethod::Linear };
        let h = build_hierarchy(&p, 2, method).unwrap();
        let q = h.level(1).transfer_to_finer.as_ref().unwrap();
        let n = p.grid.total_points();
        let gbar: Vec<f64> = (0..n).map(|i| ((i as f64 + shift) * 0.37).sin()).collect();
        let s = q.split_vector(&gbar).unwrap();
        let qg = q.prolong(&s.gtilde).unwrap();
        let recon: Vec<f64> = qg.iter().zip(&s.ghat).map(|(a, b)| a + b).collect();
        let diff = norm2(&recon.iter().zip(&gbar).map(|(a, b)| a - b).collect::<Vec<_>>());
        prop_assert!(diff <= 1e-13 * s.beta.max(1e-300));
    }

    // Restriction is the exact transpose of prolongation: ⟨Qx, y⟩ = ⟨x, Qᵀy⟩.
    #[test]
    fn transfer_adjointness(
        half in 4usize..40,
        shift in 0.0f64..1.0,
        spline in any::<bool>(),
    ) {
        let p = heat1d(2 * half).unwrap();
        let method = if spline { TransferMethod::CubicSpline } else { TransferMethod::Linear };
        let h = build_hierarchy(&p, 2, method).unwrap();
        let q = h.level(1).transfer_to_finer.as_ref().unwrap();
        let nc = q.coarse().total_points();
        let nf = q.fine().total_points();
        let xc: Vec<f64> = (0..nc).map(|i| ((i as f64 + shift) * 0.83).cos()).collect();
        let yf: Vec<f64> = (0..nf).map(|i| ((i as f64 - shift) * 0.29).sin()).collect();
        let qx = q.prolong(&xc).unwrap();
        let qty = q.restrict(&yf).unwrap();
        let lhs = dot(&qx, &yf);
        let rhs = dot(&xc, &qty);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (lhs.abs() + rhs.abs() + 1.0));
    }

    // Every level of a correction run works at the same absolute residual
    // target: β_level·tol_level = β_root·tol_root wherever a solve happened.
    #[test]
    fn tolerance_identity(
        quarter in 4usize..20,
        tol_exp in -10f64..-2f64,
        levels in 2usize..4,
    ) {
        let p = heat1d(4 * quarter).unwrap();
        let h = build_hierarchy(&p, levels, TransferMethod::CubicSpline).unwrap();
        let tol = 10f64.powf(tol_exp);
        let cfg = CgcConfig { rel_tol: tol, num_levels: levels, ..Default::default() };
        let (_, report) = cgc_multigrid(&h, &p.v, &p.g, p.t_end, &cfg).unwrap();
        let target = report.beta_root * report.rel_tol_root;
        for level in &report.levels {
            if level.beta > 0.0 && level.effective_rel_tol.is_finite() {
                let product = level.beta * level.effective_rel_tol;
                prop_assert!(
                    (product - target).abs() <= 1e-13 * target,
                    "level {} works at {} instead of {}",
                    level.level, product, target
                );
            }
        }
    }
}

// The 3-D operator is matrix-free; its symmetry must hold pointwise:
// ⟨Ax, y⟩ = ⟨x, Ay⟩ on random pairs.
#[test]
fn stencil_symmetry() {
    let p = heat3d(8, 10, 12).unwrap();
    let n = p.operator.dim();
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    for _ in 0..5 {
        let x: Vec<f64> = (0..n).map(|_| next()).collect();
        let y: Vec<f64> = (0..n).map(|_| next()).collect();
        let ax = p.operator.apply_new(&x).unwrap();
        let ay = p.operator.apply_new(&y).unwrap();
        let lhs = dot(&ax, &y);
        let rhs = dot(&x, &ay);
        assert!((lhs - rhs).abs() <= 1e-10 * (lhs.abs() + rhs.abs() + 1.0));
    }
}
