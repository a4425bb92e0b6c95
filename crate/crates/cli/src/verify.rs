//! Invariant verification suite. Every check is a pure function returning
//! Ok or a one-line failure reason; the runner prints one status line per
//! check. The fast suite is the seconds-scale release gate; the full suite
//! adds the error-bound inequalities, the Δt-order fit, and the full-size
//! 1-D benchmark shape.
//!
//! Test hook: setting `PHICGC_VERIFY_CORRUPT_TOLERANCE` perturbs the
//! tolerance-identity products before they are checked, so the suite must
//! then fail that check (negative control for the gate itself).

use std::time::Instant;

use phicgc::cgc::{cgc_multigrid, cgc_two_grid, CgcConfig};
use phicgc::krylov::{phi_rt_solve, ArnoldiDecomposition, DEFAULT_MAX_DIM};
use phicgc::operators::{LinearOperator, SparseMatrixCsr};
use phicgc::oracle::{dense_phi_reference, eigen_phi_reference, reference_solution, relative_error};
use phicgc::problems::{build_hierarchy, heat1d, heat3d, HeatProblem};
use phicgc::smallmat::{expm, phi_action, phi_scalar, DenseMatrix};
use phicgc::transfer::{TransferMethod, TransferOperator};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::Suite;

type Check = fn() -> Result<(), String>;

const FAST: &[(&str, Check)] = &[
    ("scalar-phi-identity", check_scalar_phi),
    ("matrix-phi-identity", check_matrix_phi),
    ("residual-identity", check_residual_identity),
    ("posterior-bound", check_posterior_bound),
    ("split-reconstruction", check_split_reconstruction),
    ("transfer-adjointness", check_adjointness),
    ("tolerance-identity", check_tolerance_identity),
    ("estimate-dominance", check_estimate_dominance),
    ("reference-consistency", check_reference_consistency),
];

const FULL_EXTRA: &[(&str, Check)] = &[
    ("two-grid-bound", check_two_grid_bound),
    ("multilevel-bound", check_multilevel_bound),
    ("dt-slope", check_dt_slope),
    ("benchmark-1d", check_benchmark_1d),
];

pub fn cmd_verify(suite: Suite, only: Option<&str>) -> i32 {
    let mut checks: Vec<(&str, Check)> = FAST.to_vec();
    if suite == Suite::Full {
        checks.extend_from_slice(FULL_EXTRA);
    }
    if let Some(name) = only {
        checks.retain(|(n, _)| *n == name);
        if checks.is_empty() {
            eprintln!("unknown check: {name}");
            return 2;
        }
    }
    let total = checks.len();
    let mut failures = 0;
    for (name, f) in checks {
        let t0 = Instant::now();
        match f() {
            Ok(()) => println!(
                "check {name:<24} ok    [{:.2}s]",
                t0.elapsed().as_secs_f64()
            ),
            Err(msg) => {
                failures += 1;
                println!("check {name:<24} FAIL  {msg}");
            }
        }
    }
    println!("verify: {}/{} checks passed", total - failures, total);
    if failures == 0 {
        0
    } else {
        1
    }
}

// ---------------------------------------------------------------- helpers --

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fail<T>(e: impl std::fmt::Display) -> Result<T, String> {
    Err(e.to_string())
}

macro_rules! try_core {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return fail(e),
        }
    };
}

/// Random symmetric tridiagonal H (k×k) with diag ~U(-1,3), offdiag ~U(0.05,1.5).
fn random_tridiag(rng: &mut ChaCha8Rng, k: usize) -> DenseMatrix {
    let mut entries = vec![0.0; k * k];
    for i in 0..k {
        entries[i * k + i] = rng.random_range(-1.0..3.0);
    }
    for i in 0..k.saturating_sub(1) {
        let off = rng.random_range(0.05..1.5);
        entries[i * k + i + 1] = off;
        entries[(i + 1) * k + i] = off;
    }
    DenseMatrix::from_row_major(k, k, entries).unwrap()
}

/// Constant tridiagonal operator tridiag(a, b, a) with λmin placed exactly at
/// `omega`: eigenvalues are b + 2a·cos(jπ/(n+1)), so b = ω + 2a·cos(π/(n+1)).
fn tridiag_with_known_omega(n: usize, a: f64, omega: f64) -> (LinearOperator, DenseMatrix, f64) {
    let b = omega + 2.0 * a.abs() * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
    let mut triplets = Vec::new();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        triplets.push((i, i, b));
        entries[i * n + i] = b;
        if i + 1 < n {
            triplets.push((i, i + 1, a));
            triplets.push((i + 1, i, a));
            entries[i * n + i + 1] = a;
            entries[(i + 1) * n + i] = a;
        }
    }
    let csr = SparseMatrixCsr::from_triplets(n, n, &triplets).unwrap();
    let op = LinearOperator::from_csr(csr, true).unwrap();
    (op, DenseMatrix::from_row_major(n, n, entries).unwrap(), b)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn materialize(op: &LinearOperator) -> DenseMatrix {
    let n = op.dim();
    let mut entries = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = op.apply_new(&e).unwrap();
        e[j] = 0.0;
        for i in 0..n {
            entries[i * n + j] = col[i];
        }
    }
    DenseMatrix::from_row_major(n, n, entries).unwrap()
}

fn gbar_of(op: &LinearOperator, v: &[f64], g: &[f64]) -> Vec<f64> {
    let av = op.apply_new(v).unwrap();
    g.iter().zip(&av).map(|(gi, ai)| gi - ai).collect()
}

/// tφ(−tA)·w via the dense eigendecomposition route.
fn phi_apply_dense(a: &DenseMatrix, w: &[f64], t: f64) -> Vec<f64> {
    let zero = vec![0.0; w.len()];
    eigen_phi_reference(a, &zero, w, t).unwrap()
}

// ----------------------------------------------------------------- checks --

/// z·φ(z) = e^z − 1 to 1e-13 relative on ±[1e-8, 50], log-spaced; φ(0) = 1.
fn check_scalar_phi() -> Result<(), String> {
    ensure(phi_scalar(0.0) == 1.0, || "φ(0) ≠ 1".into())?;
    for i in 0..400 {
        let mag = 10f64.powf(-8.0 + (8.0 + 50f64.log10()) * (i as f64) / 399.0);
        for sgn in [1.0, -1.0] {
            let z = sgn * mag;
            let lhs = z * phi_scalar(z);
            let rhs = z.exp_m1();
            let rel = (lhs - rhs).abs() / rhs.abs();
            ensure(rel <= 1e-13, || {
                format!("z·φ(z) off by {rel:.3e} at z = {z:.6e}")
            })?;
        }
    }
    Ok(())
}

/// Kernel identities on 50 random tridiagonal H up to k=30:
/// (−tH)·u = t(e^{−tH} − I)βe₁ and u matches the eigendecomposition oracle.
fn check_matrix_phi() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..50 {
        let k = rng.random_range(2..=30);
        let h = random_tridiag(&mut rng, k);
        let t = rng.random_range(0.05..2.0);
        let beta = rng.random_range(0.1..10.0);
        let u = try_core!(phi_action(&h, t, beta));
        let mut neg_th = h.clone();
        neg_th.scale(-t);
        let lhs = neg_th.matvec(&u);
        let e = try_core!(expm(&neg_th));
        let mut rhs: Vec<f64> = (0..k).map(|i| t * beta * e.row(i)[0]).collect();
        rhs[0] -= t * beta;
        let scale = norm2(&rhs) + neg_th.one_norm() * norm2(&u);
        let gap = norm2(&sub(&lhs, &rhs));
        ensure(gap <= 1e-10 * scale, || {
            format!("trial {trial}: (−tH)u vs t(e^{{−tH}}−I)βe₁ off by {gap:.3e}")
        })?;
        let zero = vec![0.0; k];
        let mut g = vec![0.0; k];
        g[0] = beta;
        let u_ref = try_core!(eigen_phi_reference(&h, &zero, &g, t));
        let rel = norm2(&sub(&u, &u_ref)) / norm2(&u_ref);
        ensure(rel <= 1e-10, || {
            format!("trial {trial}: kernel vs eigensolve off by {rel:.3e}")
        })?;
    }
    Ok(())
}

/// Closed-form residual norm vs ‖g − A·y_k(s) − y_k′(s)‖ with a Richardson
/// finite-difference derivative, 1e-6 relative, on SPD instances.
fn check_residual_identity() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut done = 0;
    let mut draws = 0;
    while done < 5 {
        draws += 1;
        ensure(draws <= 50, || "no macroscopic-residual instances found".into())?;
        let n = rng.random_range(20..=60);
        let a = rng.random_range(-30.0..30.0);
        let (op, _, _) = tridiag_with_known_omega(n, a, rng.random_range(0.0..2.0));
        let v = random_vec(&mut rng, n);
        let g = random_vec(&mut rng, n);
        let gbar = gbar_of(&op, &v, &g);
        let k = rng.random_range(3..=6);
        let mut dec = try_core!(ArnoldiDecomposition::new(&op, &gbar, k));
        while dec.k() < k {
            if !try_core!(dec.arnoldi_extend(&op)) {
                break;
            }
        }
        let s = rng.random_range(0.15..0.5);
        let reported = try_core!(dec.residual_norm(s));
        if reported <= 1e-3 * dec.beta() {
            continue;
        }
        let h = 1e-3;
        let central = |step: f64| -> Vec<f64> {
            let yp = dec.evaluate_iterate(s + step, &v).unwrap();
            let ym = dec.evaluate_iterate(s - step, &v).unwrap();
            yp.iter().zip(&ym).map(|(p, m)| (p - m) / (2.0 * step)).collect()
        };
        let d1 = central(h);
        let d2 = central(0.5 * h);
        let deriv: Vec<f64> = d1.iter().zip(&d2).map(|(x, y)| (4.0 * y - x) / 3.0).collect();
        let y = try_core!(dec.evaluate_iterate(s, &v));
        let ay = try_core!(op.apply_new(&y));
        let direct = norm2(
            &g.iter()
                .zip(&ay)
                .zip(&deriv)
                .map(|((gi, ai), di)| gi - ai - di)
                .collect::<Vec<_>>(),
        );
        let rel = (reported - direct).abs() / direct;
        ensure(rel <= 1e-6, || {
            format!("closed-form {reported:.6e} vs direct {direct:.6e} (rel {rel:.3e})")
        })?;
        done += 1;
    }
    Ok(())
}

/// Solve error ≤ tφ(−tω)·max_s‖r(s)‖·(1+1e-6) on instances with ω placed
/// exactly, verified against the dense eigendecomposition reference.
fn check_posterior_bound() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for trial in 0..15 {
        let n = rng.random_range(16..=64);
        let a = rng.random_range(-25.0..25.0);
        let omega = if trial % 3 == 0 { 0.0 } else { rng.random_range(0.0..4.0) };
        let (op, dense, _) = tridiag_with_known_omega(n, a, omega);
        let v = random_vec(&mut rng, n);
        let g = random_vec(&mut rng, n);
        let t = rng.random_range(0.1..1.5);
        let tol = 10f64.powf(rng.random_range(-6.0..-4.0));
        let result = try_core!(phi_rt_solve(&op, &v, &g, t, tol, rng.random_range(6..=16)));
        let y_ref = try_core!(eigen_phi_reference(&dense, &v, &g, t));
        let err = norm2(&sub(&result.y, &y_ref));
        let bound = t * phi_scalar(-t * omega) * result.residual_bound * (1.0 + 1e-6);
        ensure(err <= bound, || {
            format!("trial {trial}: error {err:.3e} > bound {bound:.3e} (ω = {omega:.3})")
        })?;
    }
    Ok(())
}

fn split_cases() -> Vec<(HeatProblem, TransferMethod)> {
    vec![
        (heat1d(96).unwrap(), TransferMethod::CubicSpline),
        (heat1d(96).unwrap(), TransferMethod::Linear),
        (heat3d(8, 10, 12).unwrap(), TransferMethod::CubicSpline),
    ]
}

/// Q·g̃ + ĝ reconstructs ḡ exactly at one level, and the three-level
/// telescoping re-sum reconstructs it across levels.
fn check_split_reconstruction() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for (p, method) in split_cases() {
        let h = try_core!(build_hierarchy(&p, 2, method));
        let q = h.level(1).transfer_to_finer.as_ref().unwrap();
        let gbar = random_vec(&mut rng, p.operator.dim());
        let s = try_core!(q.split_vector(&gbar));
        let qg = try_core!(q.prolong(&s.gtilde));
        let recon: Vec<f64> = qg.iter().zip(&s.ghat).map(|(a, b)| a + b).collect();
        let gap = norm2(&sub(&recon, &gbar));
        ensure(gap <= 1e-13 * s.beta, || {
            format!("one-level reconstruction off by {gap:.3e} (β = {:.3e})", s.beta)
        })?;
    }
    // Telescoping: ḡ = Q₁(Q₂g̃₃ + ĝ₂) + ĝ₁ after splitting twice.
    let p = heat1d(96).unwrap();
    let h = try_core!(build_hierarchy(&p, 3, TransferMethod::CubicSpline));
    let q1 = h.level(1).transfer_to_finer.as_ref().unwrap();
    let q2 = h.level(2).transfer_to_finer.as_ref().unwrap();
    let gbar = random_vec(&mut rng, p.operator.dim());
    let s1 = try_core!(q1.split_vector(&gbar));
    let s2 = try_core!(q2.split_vector(&s1.gtilde));
    let mid: Vec<f64> = try_core!(q2.prolong(&s2.gtilde))
        .iter()
        .zip(&s2.ghat)
        .map(|(a, b)| a + b)
        .collect();
    let top: Vec<f64> = try_core!(q1.prolong(&mid))
        .iter()
        .zip(&s1.ghat)
        .map(|(a, b)| a + b)
        .collect();
    let gap = norm2(&sub(&top, &gbar));
    ensure(gap <= 1e-12 * s1.beta, || {
        format!("telescoping reconstruction off by {gap:.3e}")
    })
}

/// ⟨Qx, y⟩ = ⟨x, Qᵀy⟩ on random pairs for every transfer we build.
fn check_adjointness() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for (p, method) in split_cases() {
        let h = try_core!(build_hierarchy(&p, 2, method));
        let q: &TransferOperator = h.level(1).transfer_to_finer.as_ref().unwrap();
        for _ in 0..3 {
            let xc = random_vec(&mut rng, q.coarse().total_points());
            let yf = random_vec(&mut rng, q.fine().total_points());
            let lhs = dot(&try_core!(q.prolong(&xc)), &yf);
            let rhs = dot(&xc, &try_core!(q.restrict(&yf)));
            ensure((lhs - rhs).abs() <= 1e-12 * (lhs.abs() + rhs.abs() + 1.0), || {
                format!("⟨Qx,y⟩ = {lhs:.9e} but ⟨x,Qᵀy⟩ = {rhs:.9e}")
            })?;
        }
    }
    Ok(())
}

/// Every level of a correction run works at one absolute residual target:
/// β_level·tol_level = β_root·tol_root.
fn check_tolerance_identity() -> Result<(), String> {
    let corrupt = std::env::var_os("PHICGC_VERIFY_CORRUPT_TOLERANCE").is_some();
    let p = heat1d(256).unwrap();
    for levels in [2usize, 3] {
        let h = try_core!(build_hierarchy(&p, levels, TransferMethod::CubicSpline));
        let cfg = CgcConfig { rel_tol: p.rel_tol, num_levels: levels, ..Default::default() };
        let (_, report) = try_core!(cgc_multigrid(&h, &p.v, &p.g, p.t_end, &cfg));
        let target = report.beta_root * report.rel_tol_root;
        for level in &report.levels {
            if level.beta <= 0.0 || !level.effective_rel_tol.is_finite() {
                continue;
            }
            let mut product = level.beta * level.effective_rel_tol;
            if corrupt && level.level == levels {
                // Negative-control hook: mis-scale the coarsest level.
                product *= 1.001;
            }
            ensure((product - target).abs() <= 1e-13 * target, || {
                format!(
                    "level {} of {levels} works at {product:.9e}, root target {target:.9e}",
                    level.level
                )
            })?;
        }
    }
    Ok(())
}

/// The reported coarse-grid error estimate stays above the measured error
/// and below 1 on the mid-size benchmark (empirical regression).
fn check_estimate_dominance() -> Result<(), String> {
    let p = heat1d(256).unwrap();
    let y_ref = try_core!(reference_solution(&p, p.t_end));
    let h = try_core!(build_hierarchy(&p, 2, TransferMethod::CubicSpline));
    let cfg = CgcConfig { rel_tol: p.rel_tol, num_levels: 2, ..Default::default() };
    let (y, report) = try_core!(cgc_multigrid(&h, &p.v, &p.g, p.t_end, &cfg));
    let err = try_core!(relative_error(&y, &y_ref));
    let est = report.total_estimate;
    ensure(est > err, || format!("estimate {est:.3e} ≤ error {err:.3e}"))?;
    ensure(est <= 1.0, || format!("estimate {est:.3e} above sanity ceiling"))
}

/// The tight Krylov reference agrees with the dense brute-force oracle.
fn check_reference_consistency() -> Result<(), String> {
    let p = heat1d(64).unwrap();
    let y_krylov = try_core!(reference_solution(&p, p.t_end));
    let dense = materialize(&p.operator);
    let y_dense = try_core!(dense_phi_reference(&dense, &p.v, &p.g, p.t_end));
    let rel = try_core!(relative_error(&y_krylov, &y_dense));
    ensure(rel <= 1e-11, || {
        format!("Krylov reference vs dense oracle differ by {rel:.3e}")
    })
}

/// Two-grid error ≤ t‖(φ(−tA)Q − Qφ(−tÃ))g̃‖ + tφ(−tω̄)(‖Q‖+1)·β·tol with all
/// terms evaluated densely, N ∈ {64, 128} × tol ∈ {1e-4, 1e-8}.
fn check_two_grid_bound() -> Result<(), String> {
    for n in [64usize, 128] {
        let p = heat1d(n).unwrap();
        let h = try_core!(build_hierarchy(&p, 2, TransferMethod::CubicSpline));
        let a = &h.level(0).operator;
        let at = &h.level(1).operator;
        let q = h.level(1).transfer_to_finer.as_ref().unwrap();
        let a_dense = materialize(a);
        let at_dense = materialize(at);
        let q_norm = q.prolongation_norm_estimate();
        let y_ex = try_core!(eigen_phi_reference(&a_dense, &p.v, &p.g, p.t_end));
        let gbar = gbar_of(a, &p.v, &p.g);
        let beta = norm2(&gbar);
        let split = try_core!(q.split_vector(&gbar));
        let qg = try_core!(q.prolong(&split.gtilde));
        let fine_part = phi_apply_dense(&a_dense, &qg, p.t_end);
        let coarse_part =
            try_core!(q.prolong(&phi_apply_dense(&at_dense, &split.gtilde, p.t_end)));
        let mismatch = norm2(&sub(&fine_part, &coarse_part));
        for tol in [1e-4, 1e-8] {
            let (y_mg, _) = try_core!(cgc_two_grid(a, at, q, &p.v, &p.g, p.t_end, tol));
            let err = norm2(&sub(&y_ex, &y_mg));
            // ω̄ = 0: periodic Laplacian on both grids.
            let bound = mismatch + p.t_end * (q_norm + 1.0) * beta * tol;
            ensure(err <= bound, || {
                format!("N={n}, tol={tol:.0e}: error {err:.3e} > bound {bound:.3e}")
            })?;
        }
    }
    Ok(())
}

/// Three-level analogue with the ∏‖Q_i‖ weights, N = 128.
fn check_multilevel_bound() -> Result<(), String> {
    let p = heat1d(128).unwrap();
    let h = try_core!(build_hierarchy(&p, 3, TransferMethod::CubicSpline));
    let d1 = materialize(&h.level(0).operator);
    let d2 = materialize(&h.level(1).operator);
    let d3 = materialize(&h.level(2).operator);
    let q1 = h.level(1).transfer_to_finer.as_ref().unwrap();
    let q2 = h.level(2).transfer_to_finer.as_ref().unwrap();
    let nq1 = q1.prolongation_norm_estimate();
    let nq2 = q2.prolongation_norm_estimate();
    let y_ex = try_core!(eigen_phi_reference(&d1, &p.v, &p.g, p.t_end));
    let gbar1 = gbar_of(&h.level(0).operator, &p.v, &p.g);
    let beta = norm2(&gbar1);
    let s1 = try_core!(q1.split_vector(&gbar1));
    let s2 = try_core!(q2.split_vector(&s1.gtilde));
    let mismatch = |df: &DenseMatrix, dc: &DenseMatrix, q: &TransferOperator, gt: &[f64]| {
        let fine = phi_apply_dense(df, &q.prolong(gt).unwrap(), p.t_end);
        let coarse = q.prolong(&phi_apply_dense(dc, gt, p.t_end)).unwrap();
        norm2(&sub(&fine, &coarse))
    };
    let m1 = mismatch(&d1, &d2, q1, &s1.gtilde);
    let m2 = mismatch(&d2, &d3, q2, &s2.gtilde);
    for tol in [1e-4, 1e-8] {
        let cfg = CgcConfig { rel_tol: tol, num_levels: 3, ..Default::default() };
        let (y_mg, _) = try_core!(cgc_multigrid(&h, &p.v, &p.g, p.t_end, &cfg));
        let err = norm2(&sub(&y_ex, &y_mg));
        let bound = m1 + nq1 * m2 + p.t_end * beta * tol * (1.0 + nq1 + nq1 * nq2);
        ensure(err <= bound, || {
            format!("tol={tol:.0e}: error {err:.3e} > bound {bound:.3e}")
        })?;
    }
    Ok(())
}

/// Log-log slope of the two-grid error vs Δt on N=256 with crushing inner
/// tolerances, fit over Δt ∈ {1e-4, 2e-4, 4e-4, 8e-4}, expected in [1.7, 2.3].
fn check_dt_slope() -> Result<(), String> {
    let p = heat1d(256).unwrap();
    let dense = materialize(&p.operator);
    let h = try_core!(build_hierarchy(&p, 2, TransferMethod::CubicSpline));
    let cfg = CgcConfig { rel_tol: 1e-12, num_levels: 2, ..Default::default() };
    let dts = [1e-4, 2e-4, 4e-4, 8e-4];
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut errs = Vec::new();
    for &dt in &dts {
        let (y, _) = try_core!(cgc_multigrid(&h, &p.v, &p.g, dt, &cfg));
        let y_ex = try_core!(eigen_phi_reference(&dense, &p.v, &p.g, dt));
        let e = try_core!(relative_error(&y, &y_ex));
        errs.push(e);
        let (x, yv) = (dt.ln(), e.ln());
        sx += x;
        sy += yv;
        sxx += x * x;
        sxy += x * yv;
    }
    let n = dts.len() as f64;
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    ensure((1.7..=2.3).contains(&slope), || {
        format!(
            "observed order {slope:.3} outside [1.7, 2.3] (errors {})",
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", ")
        )
    })
}

/// Full-size 1-D benchmark shape: single-grid error ≤ 1e-10, two-grid error
/// in [1e-9, 1e-6], two-grid matvecs ≤ half the single-grid count, and the
/// reported fine tolerance is exactly (β/β̂)·1e-8.
fn check_benchmark_1d() -> Result<(), String> {
    let p = heat1d(1024).unwrap();
    let y_ref = try_core!(reference_solution(&p, p.t_end));
    let single = try_core!(phi_rt_solve(
        &p.operator, &p.v, &p.g, p.t_end, p.rel_tol, DEFAULT_MAX_DIM
    ));
    let err1 = try_core!(relative_error(&single.y, &y_ref));
    ensure(err1 <= 1e-10, || format!("single-grid error {err1:.3e} > 1e-10"))?;
    let h = try_core!(build_hierarchy(&p, 2, TransferMethod::CubicSpline));
    let cfg = CgcConfig { rel_tol: p.rel_tol, num_levels: 2, ..Default::default() };
    let (y2, report) = try_core!(cgc_multigrid(&h, &p.v, &p.g, p.t_end, &cfg));
    let err2 = try_core!(relative_error(&y2, &y_ref));
    ensure((1e-9..=1e-6).contains(&err2), || {
        format!("two-grid error {err2:.3e} outside [1e-9, 1e-6]")
    })?;
    let total = report.total_matvecs();
    ensure(total as f64 <= 0.5 * single.matvecs as f64, || {
        format!("two-grid matvecs {total} > half of single-grid {}", single.matvecs)
    })?;
    let fine = &report.levels[0];
    let expected = (report.beta_root / fine.beta) * 1e-8;
    ensure(fine.effective_rel_tol == expected, || {
        format!(
            "fine tolerance {:.17e} ≠ (β/β̂)·1e-8 = {expected:.17e}",
            fine.effective_rel_tol
        )
    })
}
