//! Heat-equation test problems: y′ = −Ay + g with A the (negated) discrete
//! Laplacian on a uniform grid.
//!
//! Two families: a 1D periodic problem (3-point stencil stored as CSR) and a
//! 3D Dirichlet problem (7-point stencil applied matrix-free). Both carry
//! their source term, initial vector, time interval, target tolerance, and
//! the exact field-of-values lower bound ω of the operator.

use crate::error::{Error, Result};
use crate::operators::{LinearOperator, SparseMatrixCsr};
use crate::threads;
use crate::transfer::{
    build_prolongation, Boundary, GridSpec, TransferMethod, TransferOperator,
};

pub struct HeatProblem {
    pub operator: LinearOperator,
    pub v: Vec<f64>,
    pub g: Vec<f64>,
    /// End of the integration interval [0, T].
    pub t_end: f64,
    pub rel_tol: f64,
    pub grid: GridSpec,
    /// Exact smallest eigenvalue of A (0 for the periodic problem).
    pub omega: f64,
}

/// One level of a coarsened problem chain: the rediscretized operator on the
/// level's grid, the prolongation from this level up to the next-finer one
/// (absent at the finest level), and the operator's ω.
pub struct HierarchyLevel {
    pub operator: LinearOperator,
    pub grid: GridSpec,
    pub transfer_to_finer: Option<TransferOperator>,
    pub omega: f64,
}

/// Levels ordered finest (index 0) to coarsest.
pub struct GridHierarchy {
    levels: Vec<HierarchyLevel>,
}

impl GridHierarchy {
    pub fn new(levels: Vec<HierarchyLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidInput("hierarchy needs ≥ 1 level".into()));
        }
        for (j, level) in levels.iter().enumerate() {
            if level.operator.dim() != level.grid.total_points() {
                return Err(Error::DimensionMismatch {
                    expected: level.grid.total_points(),
                    found: level.operator.dim(),
                    context: "hierarchy level operator",
                });
            }
            if level.omega < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "level {} omega {} < 0",
                    j + 1,
                    level.omega
                )));
            }
            match (&level.transfer_to_finer, j) {
                (Some(_), 0) => {
                    return Err(Error::InvalidInput(
                        "finest level cannot have a transfer".into(),
                    ))
                }
                (None, j) if j > 0 => {
                    return Err(Error::InvalidInput(format!(
                        "level {} is missing its transfer",
                        j + 1
                    )))
                }
                (Some(t), j) => {
                    if t.coarse() != &level.grid || t.fine() != &levels[j - 1].grid {
                        return Err(Error::InvalidGrid(format!(
                            "level {} transfer does not connect to level {}",
                            j + 1,
                            j
                        )));
                    }
                }
                (None, _) => {}
            }
        }
        Ok(Self { levels })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Levels indexed 0 (finest) to depth−1 (coarsest).
    pub fn level(&self, j: usize) -> &HierarchyLevel {
        &self.levels[j]
    }

    pub fn levels(&self) -> &[HierarchyLevel] {
        &self.levels
    }
}

/// 1D heat problem with periodic boundary: A = (1/h²)·tridiag(−1, 2, −1)
/// with wrap-around coupling, h = 1/(N+1), nodes x_i = i/(N+1); v ≡ 1,
/// g(x) = exp(−500(x−½)²), T = 0.01, target tolerance 1e-8.
pub fn heat1d(n: usize) -> Result<HeatProblem> {
    let grid = check_heat_extents(&[n]).and_then(|_| GridSpec::new_1d(n, Boundary::Periodic))?;
    let operator = heat1d_operator(n)?;
    let x = grid.axis_nodes(0);
    let g: Vec<f64> = x
        .iter()
        .map(|&xi| (-500.0 * (xi - 0.5) * (xi - 0.5)).exp())
        .collect();
    Ok(HeatProblem {
        operator,
        v: vec![1.0; n],
        g,
        t_end: 0.01,
        rel_tol: 1e-8,
        grid,
        omega: 0.0,
    })
}

/// 3D heat problem with homogeneous Dirichlet boundary: 7-point Laplacian
/// with per-axis spacings h_a = 1/(n_a+1), matrix-free, unknowns ordered
/// x-fastest; v ≡ 0, g(x,y,z) = exp(−50(x−½)² − 100(y−½)² − 50(z−½)²),
/// T = 0.1, target tolerance 1e-5.
pub fn heat3d(nx: usize, ny: usize, nz: usize) -> Result<HeatProblem> {
    let grid = check_heat_extents(&[nx, ny, nz])
        .and_then(|_| GridSpec::new_3d(nx, ny, nz, Boundary::Dirichlet))?;
    let operator = heat3d_operator(nx, ny, nz)?;

    let xs = grid.axis_nodes(0);
    let ys = grid.axis_nodes(1);
    let zs = grid.axis_nodes(2);
    let mut g = vec![0.0; nx * ny * nz];
    for iz in 0..nz {
        let ez = -50.0 * (zs[iz] - 0.5) * (zs[iz] - 0.5);
        for iy in 0..ny {
            let ey = -100.0 * (ys[iy] - 0.5) * (ys[iy] - 0.5);
            for ix in 0..nx {
                let ex = -50.0 * (xs[ix] - 0.5) * (xs[ix] - 0.5);
                g[ix + nx * (iy + ny * iz)] = (ex + ey + ez).exp();
            }
        }
    }
    let omega = dirichlet_omega(&[nx, ny, nz]);
    Ok(HeatProblem {
        operator,
        v: vec![0.0; nx * ny * nz],
        g,
        t_end: 0.1,
        rel_tol: 1e-5,
        grid,
        omega,
    })
}

/// Coarsened problem chain: level j has every extent divided by 2^j, a
/// rediscretized operator, and the prolongation up to level j−1.
pub fn build_hierarchy(
    p: &HeatProblem,
    num_levels: usize,
    method: TransferMethod,
) -> Result<GridHierarchy> {
    if num_levels == 0 {
        return Err(Error::InvalidInput("num_levels must be ≥ 1".into()));
    }
    let factor = 1usize << (num_levels - 1);
    for &n in p.grid.extents() {
        if n % factor != 0 || n / factor < 4 {
            return Err(Error::Divisibility {
                extent: n,
                levels: num_levels,
                levels_minus_one: (num_levels - 1) as u32,
            });
        }
    }
    let mut levels: Vec<HierarchyLevel> = Vec::with_capacity(num_levels);
    let mut grid = p.grid.clone();
    for j in 0..num_levels {
        let operator = rediscretize(&grid)?;
        let omega = match grid.boundary() {
            Boundary::Periodic => 0.0,
            Boundary::Dirichlet => dirichlet_omega(grid.extents()),
        };
        let transfer_to_finer = if j == 0 {
            None
        } else {
            Some(build_prolongation(&grid, &levels[j - 1].grid, method)?)
        };
        let next = if j + 1 < num_levels {
            Some(grid.coarsen()?)
        } else {
            None
        };
        levels.push(HierarchyLevel {
            operator,
            grid: grid.clone(),
            transfer_to_finer,
            omega,
        });
        if let Some(g) = next {
            grid = g;
        }
    }
    GridHierarchy::new(levels)
}

// Root problems must be even (so they can be halved) and large enough for
// the transfer stencils; coarsened levels may be odd (e.g. 11 after 88→44→22→11).
fn check_heat_extents(extents: &[usize]) -> Result<()> {
    for &n in extents {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "heat problem extents must be even and ≥ 4, got {n}"
            )));
        }
    }
    Ok(())
}

fn check_stencil_extents(extents: &[usize]) -> Result<()> {
    for &n in extents {
        if n < 4 {
            return Err(Error::InvalidInput(format!(
                "grid extents must be ≥ 4, got {n}"
            )));
        }
    }
    Ok(())
}

fn rediscretize(grid: &GridSpec) -> Result<LinearOperator> {
    match grid.dims() {
        1 => heat1d_operator(grid.extents()[0]),
        _ => heat3d_operator(grid.extents()[0], grid.extents()[1], grid.extents()[2]),
    }
}

fn heat1d_operator(n: usize) -> Result<LinearOperator> {
    check_stencil_extents(&[n])?;
    let inv_h2 = ((n + 1) * (n + 1)) as f64;
    let mut trips = Vec::with_capacity(3 * n);
    for i in 0..n {
        trips.push((i, i, 2.0 * inv_h2));
        trips.push((i, (i + 1) % n, -inv_h2));
        trips.push((i, (i + n - 1) % n, -inv_h2));
    }
    let csr = SparseMatrixCsr::from_triplets(n, n, &trips)?;
    LinearOperator::from_csr(csr, true)?.with_omega_hint(0.0)
}

fn heat3d_operator(nx: usize, ny: usize, nz: usize) -> Result<LinearOperator> {
    check_stencil_extents(&[nx, ny, nz])?;
    let cx = ((nx + 1) * (nx + 1)) as f64;
    let cy = ((ny + 1) * (ny + 1)) as f64;
    let cz = ((nz + 1) * (nz + 1)) as f64;
    let diag = 2.0 * (cx + cy + cz);
    let n = nx * ny * nz;
    let stencil = move |src: &[f64], dst: &mut [f64]| {
        threads::parallel_write(dst, 1 << 15, |start, chunk| {
            for (off, out) in chunk.iter_mut().enumerate() {
                let idx = start + off;
                let ix = idx % nx;
                let iy = (idx / nx) % ny;
                let iz = idx / (nx * ny);
                let mut s = diag * src[idx];
                if ix > 0 {
                    s -= cx * src[idx - 1];
                }
                if ix + 1 < nx {
                    s -= cx * src[idx + 1];
                }
                if iy > 0 {
                    s -= cy * src[idx - nx];
                }
                if iy + 1 < ny {
                    s -= cy * src[idx + nx];
                }
                if iz > 0 {
                    s -= cz * src[idx - nx * ny];
                }
                if iz + 1 < nz {
                    s -= cz * src[idx + nx * ny];
                }
                *out = s;
            }
        });
    };
    // interior columns carry the full stencil mass: ‖A‖₁ = 2·diagonal
    LinearOperator::matrix_free(n, true, Some(2.0 * diag), stencil)
        .with_omega_hint(dirichlet_omega(&[nx, ny, nz]))
}

/// Smallest eigenvalue of the Dirichlet Laplacian:
/// Σ_axes 4·sin²(π/(2(n_a+1)))/h_a² with h_a = 1/(n_a+1).
fn dirichlet_omega(extents: &[usize]) -> f64 {
    extents
        .iter()
        .map(|&n| {
            let m = (n + 1) as f64;
            let s = (std::f64::consts::PI / (2.0 * m)).sin();
            4.0 * s * s * m * m
        })
        .sum()
}
