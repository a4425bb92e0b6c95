//! Coarse-grid correction for φ-function evaluations.
//!
//! A solve of y(t) = v + tφ(−tA)(g − Av) is split across a grid pair: the
//! right-hand side ḡ = g − Av is decomposed into a part Qg̃ that lives on the
//! coarse grid (where the φ evaluation is cheap) and a remainder ĝ that is
//! handled on the fine grid but with a proportionally relaxed tolerance, so
//! that both branches meet the same absolute residual threshold β·tol. The
//! construction applies recursively down a grid hierarchy; the fine-grid work
//! then shrinks level by level while the accuracy target is preserved.

use crate::error::{Error, Result};
use crate::krylov::{
    phi_rt_solve_opts, residual_restart_solve_opts, PhiSolveResult, SolveOptions,
    DEFAULT_MAX_DIM,
};
use crate::operators::LinearOperator;
use crate::problems::GridHierarchy;
use crate::smallmat::phi_scalar;
use crate::transfer::TransferOperator;
use crate::vecops::{self, is_zero, norm2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Solver used for the direct evaluation at the coarsest level. All other
/// levels always use the residual-time solver.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CoarseSolver {
    #[default]
    PhiRt,
    ResidualRestart,
}

#[derive(Clone, Copy, Debug)]
pub struct CgcConfig {
    /// Relative tolerance at the root: every branch targets β_root·rel_tol.
    pub rel_tol: f64,
    /// Number of hierarchy levels to use (1 = plain solve on the finest grid).
    pub num_levels: usize,
    pub krylov_max_dim: usize,
    pub coarse_solver: CoarseSolver,
    /// Compute the per-level coarse-correction error estimate (costs one
    /// extra fine and one extra coarse matvec per non-coarsest level).
    pub estimate_enabled: bool,
}

impl Default for CgcConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            num_levels: 2,
            krylov_max_dim: DEFAULT_MAX_DIM,
            coarse_solver: CoarseSolver::default(),
            estimate_enabled: true,
        }
    }
}

/// Work and tolerance bookkeeping for one level, finest = level 1.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelReport {
    pub level: usize,
    /// Matvecs on this level's operator (solver work only; estimate matvecs
    /// excluded). At the root this includes the one matvec forming ḡ = g − Av
    /// when v ≠ 0.
    pub matvecs: u64,
    /// Norm of the right-hand side solved on this level: β̂ at non-coarsest
    /// levels, the full local β at the coarsest. 0.0 when the branch was
    /// skipped.
    pub beta: f64,
    /// Relative tolerance handed to this level's solver; ∞ for a skipped
    /// branch (nothing to solve).
    pub effective_rel_tol: f64,
    /// tφ(−tω)·‖Q(Ãỹ) − A(Qỹ)‖ for the correction coming from the levels
    /// below; None at the coarsest level or when estimation is disabled.
    pub coarse_error_estimate: Option<f64>,
    /// Max over checked times of the absolute residual norm achieved by this
    /// level's solver.
    pub achieved_residual_bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgcReport {
    /// One entry per level used, finest first. Empty when ḡ = 0 at the root.
    pub levels: Vec<LevelReport>,
    /// Sum of the per-level coarse-correction estimates (0.0 when disabled).
    pub total_estimate: f64,
    /// β = ‖g − Av‖ at the root.
    pub beta_root: f64,
    pub rel_tol_root: f64,
}

impl CgcReport {
    pub fn achieved_residual_bounds(&self) -> Vec<f64> {
        self.levels
            .iter()
            .map(|l| l.achieved_residual_bound)
            .collect()
    }

    pub fn total_matvecs(&self) -> u64 {
        self.levels.iter().map(|l| l.matvecs).sum()
    }
}

/// Two-grid correction: split ḡ = g − Av across (A, Ã, Q), solve the coarse
/// part with tolerance (β/β̃)·rel_tol and the fine remainder with
/// (β/β̂)·rel_tol, and combine y = v + ŷ + Qỹ.
pub fn cgc_two_grid(
    a: &LinearOperator,
    atilde: &LinearOperator,
    q: &TransferOperator,
    v: &[f64],
    g: &[f64],
    t: f64,
    rel_tol: f64,
) -> Result<(Vec<f64>, CgcReport)> {
    if a.dim() != q.fine().total_points() || atilde.dim() != q.coarse().total_points() {
        return Err(Error::DimensionMismatch {
            expected: q.fine().total_points(),
            found: a.dim(),
            context: "two-grid operators vs transfer grids",
        });
    }
    let views = [
        LevelView { op: a, transfer_to_finer: None },
        LevelView { op: atilde, transfer_to_finer: Some(q) },
    ];
    let cfg = CgcConfig {
        rel_tol,
        num_levels: 2,
        ..Default::default()
    };
    solve_with_views(&views, v, g, t, &cfg)
}

/// Multigrid correction over the first `cfg.num_levels` levels of `h`.
pub fn cgc_multigrid(
    h: &GridHierarchy,
    v: &[f64],
    g: &[f64],
    t: f64,
    cfg: &CgcConfig,
) -> Result<(Vec<f64>, CgcReport)> {
    if cfg.num_levels > h.depth() {
        return Err(Error::InvalidInput(format!(
            "num_levels {} exceeds hierarchy depth {}",
            cfg.num_levels,
            h.depth()
        )));
    }
    let views: Vec<LevelView> = h.levels()[..cfg.num_levels]
        .iter()
        .map(|l| LevelView {
            op: &l.operator,
            transfer_to_finer: l.transfer_to_finer.as_ref(),
        })
        .collect();
    solve_with_views(&views, v, g, t, cfg)
}

/// tφ(−tω)·‖Q(Ãỹ) − A(Qỹ)‖: how much the coarse-grid evaluation can have
/// perturbed the fine-grid solution, valued at one coarse and one fine matvec
/// plus two transfers. ω = 0 is always safe (maximizes the prefactor).
pub fn coarse_error_estimate(
    a: &LinearOperator,
    atilde: &LinearOperator,
    q: &TransferOperator,
    ytilde: &[f64],
    t: f64,
    omega: f64,
) -> Result<f64> {
    if omega < 0.0 || !omega.is_finite() {
        return Err(Error::InvalidInput(format!(
            "omega must be a finite nonnegative real, got {omega}"
        )));
    }
    if ytilde.len() != atilde.dim() {
        return Err(Error::DimensionMismatch {
            expected: atilde.dim(),
            found: ytilde.len(),
            context: "coarse_error_estimate ytilde",
        });
    }
    if is_zero(ytilde) {
        return Ok(0.0);
    }
    let lhs = q.prolong(&atilde.apply_new(ytilde)?)?;
    let rhs = a.apply_new(&q.prolong(ytilde)?)?;
    Ok(t * phi_scalar(-t * omega) * norm2(&vecops::sub(&lhs, &rhs)))
}

/// Power-iteration estimate of ‖QÃ − AQ‖₂ to relative 10⁻³, for diagnostics
/// only. Needs the adjoint of the composite map, so both operators must be
/// symmetric (all shipped operators are).
pub fn commutator_norm_estimate(
    a: &LinearOperator,
    atilde: &LinearOperator,
    q: &TransferOperator,
) -> Result<f64> {
    if !a.is_symmetric() || !atilde.is_symmetric() {
        return Err(Error::InvalidInput(
            "commutator norm estimate needs symmetric operators (adjoint access)".into(),
        ));
    }
    let n_coarse = atilde.dim();
    let forward = |x: &[f64]| -> Result<Vec<f64>> {
        let l = q.prolong(&atilde.apply_new(x)?)?;
        let r = a.apply_new(&q.prolong(x)?)?;
        Ok(l.iter().zip(&r).map(|(p, m)| p - m).collect())
    };
    let adjoint = |y: &[f64]| -> Result<Vec<f64>> {
        let l = atilde.apply_new(&q.restrict(y)?)?;
        let r = q.restrict(&a.apply_new(y)?)?;
        Ok(l.iter().zip(&r).map(|(p, m)| p - m).collect())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0xc0_77);
    let mut x: Vec<f64> = (0..n_coarse).map(|_| rng.random::<f64>() - 0.5).collect();
    let nx = norm2(&x);
    vecops::scale(1.0 / nx, &mut x);
    let mut sigma = 0.0f64;
    for _ in 0..1000 {
        let bx = forward(&x)?;
        let next_sigma = norm2(&bx);
        if next_sigma == 0.0 {
            return Ok(0.0);
        }
        let mut xn = adjoint(&bx)?;
        let nn = norm2(&xn);
        if nn == 0.0 {
            return Ok(next_sigma);
        }
        vecops::scale(1.0 / nn, &mut xn);
        x = xn;
        // successive iterates approach the norm from below and the per-step
        // gain shrinks geometrically, so demanding 10⁻⁴ between steps leaves
        // the final value well within 10⁻³ of the limit
        if (next_sigma - sigma).abs() <= 1e-4 * next_sigma {
            return Ok(next_sigma);
        }
        sigma = next_sigma;
    }
    Ok(sigma)
}

struct LevelView<'a> {
    op: &'a LinearOperator,
    /// Prolongation from THIS level up to the next-finer one (None at the
    /// finest level).
    transfer_to_finer: Option<&'a TransferOperator>,
}

struct Engine<'a> {
    views: &'a [LevelView<'a>],
    t: f64,
    beta_root: f64,
    rel_tol_root: f64,
    opts: SolveOptions,
    coarse_solver: CoarseSolver,
    estimate_enabled: bool,
}

fn solve_with_views(
    views: &[LevelView],
    v: &[f64],
    g: &[f64],
    t: f64,
    cfg: &CgcConfig,
) -> Result<(Vec<f64>, CgcReport)> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("t must be > 0, got {t}")));
    }
    if !(cfg.rel_tol > 0.0) || !cfg.rel_tol.is_finite() {
        return Err(Error::InvalidInput(format!(
            "rel_tol must be > 0, got {}",
            cfg.rel_tol
        )));
    }
    if cfg.num_levels == 0 || cfg.num_levels != views.len() {
        return Err(Error::InvalidInput("num_levels must be ≥ 1".into()));
    }
    if cfg.krylov_max_dim == 0 {
        return Err(Error::InvalidInput("krylov_max_dim must be ≥ 1".into()));
    }
    let dim = views[0].op.dim();
    if v.len() != dim || g.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: if v.len() != dim { v.len() } else { g.len() },
            context: "root vectors vs finest operator",
        });
    }
    for (j, view) in views.iter().enumerate().skip(1) {
        let q = view.transfer_to_finer.ok_or_else(|| {
            Error::InvalidInput(format!("level {} has no transfer to the finer level", j + 1))
        })?;
        if q.coarse().total_points() != view.op.dim()
            || q.fine().total_points() != views[j - 1].op.dim()
        {
            return Err(Error::InvalidGrid(format!(
                "level {} transfer does not connect levels {} and {}",
                j + 1,
                j,
                j + 1
            )));
        }
    }
    let opts = SolveOptions {
        max_dim: cfg.krylov_max_dim,
        ..Default::default()
    };

    // Single level: delegate whole, so the result is exactly a plain solve.
    if cfg.num_levels == 1 {
        let r = run_solver(cfg.coarse_solver, views[0].op, v, g, t, cfg.rel_tol, opts)
            .map_err(|e| e.at_level(1))?;
        let report = if r.beta == 0.0 {
            CgcReport {
                levels: Vec::new(),
                total_estimate: 0.0,
                beta_root: 0.0,
                rel_tol_root: cfg.rel_tol,
            }
        } else {
            CgcReport {
                levels: vec![LevelReport {
                    level: 1,
                    matvecs: r.matvecs,
                    beta: r.beta,
                    effective_rel_tol: cfg.rel_tol,
                    coarse_error_estimate: None,
                    achieved_residual_bound: r.residual_bound,
                }],
                total_estimate: 0.0,
                beta_root: r.beta,
                rel_tol_root: cfg.rel_tol,
            }
        };
        return Ok((r.y, report));
    }

    // Step 0 at the root: ḡ = g − Av (one matvec unless v = 0 exactly).
    let (gbar, root_build_matvecs) = if is_zero(v) {
        (g.to_vec(), 0u64)
    } else {
        let av = views[0].op.apply_new(v).map_err(|e| e.at_level(1))?;
        let gbar: Vec<f64> = g.iter().zip(&av).map(|(gi, ai)| gi - ai).collect();
        (gbar, 1u64)
    };
    let beta_root = norm2(&gbar);
    if beta_root == 0.0 {
        // y ≡ v: nothing to solve anywhere
        return Ok((
            v.to_vec(),
            CgcReport {
                levels: Vec::new(),
                total_estimate: 0.0,
                beta_root: 0.0,
                rel_tol_root: cfg.rel_tol,
            },
        ));
    }

    let engine = Engine {
        views,
        t,
        beta_root,
        rel_tol_root: cfg.rel_tol,
        opts,
        coarse_solver: cfg.coarse_solver,
        estimate_enabled: cfg.estimate_enabled,
    };
    let mut slots: Vec<Option<LevelReport>> = vec![None; views.len()];
    let (w, _) = engine.solve_level(0, &gbar, &mut slots)?;

    let mut y = v.to_vec();
    vecops::axpy(1.0, &w, &mut y);
    let mut levels: Vec<LevelReport> = slots.into_iter().map(|s| s.expect("report slot")).collect();
    levels[0].matvecs += root_build_matvecs;
    let total_estimate = levels
        .iter()
        .filter_map(|l| l.coarse_error_estimate)
        .sum();
    Ok((
        y,
        CgcReport {
            levels,
            total_estimate,
            beta_root,
            rel_tol_root: cfg.rel_tol,
        },
    ))
}

impl Engine<'_> {
    /// Relaxed per-branch tolerance (β_root/β_local)·tol_root: every branch
    /// then stops at the same absolute residual β_root·tol_root.
    fn level_rel_tol(&self, beta: f64) -> f64 {
        (self.beta_root / beta) * self.rel_tol_root
    }

    /// Correction w ≈ tφ(−tA_j)·rhs for level j (0-based), recursing through
    /// the coarser levels. Returns the correction together with the smallest
    /// Ritz ω estimate seen among the subtree's solves (∞ if none ran).
    fn solve_level(
        &self,
        j: usize,
        rhs: &[f64],
        slots: &mut Vec<Option<LevelReport>>,
    ) -> Result<(Vec<f64>, f64)> {
        let lvl = j + 1;
        let beta = norm2(rhs);
        if beta == 0.0 {
            for (jj, slot) in slots.iter_mut().enumerate().skip(j) {
                *slot = Some(skipped_report(jj + 1));
            }
            return Ok((vec![0.0; self.views[j].op.dim()], f64::INFINITY));
        }

        if j + 1 == self.views.len() {
            // coarsest level: solve directly
            let local_tol = self.level_rel_tol(beta);
            let zero = vec![0.0; self.views[j].op.dim()];
            let r = run_solver(
                self.coarse_solver,
                self.views[j].op,
                &zero,
                rhs,
                self.t,
                local_tol,
                self.opts,
            )
            .map_err(|e| e.at_level(lvl))?;
            slots[j] = Some(LevelReport {
                level: lvl,
                matvecs: r.matvecs,
                beta,
                effective_rel_tol: local_tol,
                coarse_error_estimate: None,
                achieved_residual_bound: r.residual_bound,
            });
            return Ok((r.y, r.omega_ritz));
        }

        let q = self.views[j + 1].transfer_to_finer.expect("validated");
        let split = q.split_vector(rhs).map_err(|e| e.at_level(lvl))?;

        // coarse branch (recursion), then fine remainder on this level
        let (wtilde, ritz_coarse) = self.solve_level(j + 1, &split.gtilde, slots)?;
        let fine = if split.beta_hat == 0.0 {
            None
        } else {
            let zero = vec![0.0; self.views[j].op.dim()];
            let r = phi_rt_solve_opts(
                self.views[j].op,
                &zero,
                &split.ghat,
                self.t,
                self.level_rel_tol(split.beta_hat),
                self.opts,
            )
            .map_err(|e| e.at_level(lvl))?;
            Some(r)
        };

        let mut w = q.prolong(&wtilde).map_err(|e| e.at_level(lvl))?;
        if let Some(r) = &fine {
            vecops::axpy(1.0, &r.y, &mut w);
        }

        let estimate = if self.estimate_enabled {
            // ω from the coarse branch's own solves: those are the Ritz values
            // available once the coarse evaluation has finished
            let omega = if ritz_coarse.is_finite() {
                ritz_coarse.max(0.0)
            } else {
                0.0
            };
            Some(
                coarse_error_estimate(
                    self.views[j].op,
                    self.views[j + 1].op,
                    q,
                    &wtilde,
                    self.t,
                    omega,
                )
                .map_err(|e| e.at_level(lvl))?,
            )
        } else {
            None
        };

        slots[j] = Some(LevelReport {
            level: lvl,
            matvecs: fine.as_ref().map_or(0, |r| r.matvecs),
            beta: split.beta_hat,
            effective_rel_tol: if split.beta_hat == 0.0 {
                f64::INFINITY
            } else {
                self.level_rel_tol(split.beta_hat)
            },
            coarse_error_estimate: estimate,
            achieved_residual_bound: fine.as_ref().map_or(0.0, |r| r.residual_bound),
        });
        let ritz_here = fine.as_ref().map_or(f64::INFINITY, |r| r.omega_ritz);
        Ok((w, ritz_here.min(ritz_coarse)))
    }
}

fn skipped_report(level: usize) -> LevelReport {
    LevelReport {
        level,
        matvecs: 0,
        beta: 0.0,
        effective_rel_tol: f64::INFINITY,
        coarse_error_estimate: None,
        achieved_residual_bound: 0.0,
    }
}

fn run_solver(
    which: CoarseSolver,
    op: &LinearOperator,
    v: &[f64],
    g: &[f64],
    t: f64,
    rel_tol: f64,
    opts: SolveOptions,
) -> Result<PhiSolveResult> {
    match which {
        CoarseSolver::PhiRt => phi_rt_solve_opts(op, v, g, t, rel_tol, opts),
        CoarseSolver::ResidualRestart => residual_restart_solve_opts(op, v, g, t, rel_tol, opts),
    }
}
