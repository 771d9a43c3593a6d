//! Cross-section cell problem and the quadratic speed-enhancement
//! coefficient.
//!
//! Given the mean-zero shear fluctuation `b1` on `Omega = [0, L]^dim`, the
//! corrector potential solves
//!
//! ```text
//! -Laplacian(chi) = b1,   zero Neumann on the walls,   <chi> = 0.
//! ```
//!
//! On the midpoint grid the Neumann eigenbasis is the tensor cosine family
//! `phi_j(x) = prod cos(j_k pi x_k / L)` with eigenvalues
//! `lambda_j = (pi/L)^2 |j|^2`, and the solve is exact mode division. The
//! module returns `chi`, its analytic gradient, the enhancement coefficient
//! `gamma = (c0/2) <|grad chi|^2>`, the test-function tilt
//! `alpha = -<|grad chi|^2>/2` (so `gamma + c0 alpha = 0` holds exactly),
//! and the cosine coefficients `a_j` of `|grad chi|^2` that force the
//! corrector modes.

use crate::error::Error;
use crate::grid::CrossGrid;
use crate::shear::ShearSample;
use crate::Result;
use std::f64::consts::PI;

/// Coefficients `a_j` smaller than this are dropped from the mode list;
/// their corrector response is below solver resolution anyway.
pub const MODE_DROP_TOL: f64 = 1e-10;

/// One cosine mode of the cross-section: index, Laplace eigenvalue, and the
/// coefficient of `|grad chi|^2` along it (sup-normalized basis).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossMode {
    pub jx: usize,
    pub jy: usize,
    pub lambda: f64,
    pub a: f64,
}

/// Solution of the cell problem for one shear sample.
#[derive(Debug, Clone)]
pub struct CellSolution {
    pub grid: CrossGrid,
    /// Mean-zero potential on the nodes.
    pub chi: Vec<f64>,
    /// Analytic (mode-wise) gradient components, one nodal field per axis.
    pub grad_chi: Vec<Vec<f64>>,
    /// Nodal `|grad chi|^2`.
    pub grad_sq: Vec<f64>,
    /// Cross-section average of `|grad chi|^2`; equals the zero-mode
    /// coefficient of `grad_sq` by midpoint-grid exactness.
    pub grad_sq_avg: f64,
    /// Cosine modes of `grad_sq` with `|a_j| >= MODE_DROP_TOL`, zero mode
    /// first, then ascending `|j|^2` (ties lexicographic).
    pub modes: Vec<CrossMode>,
    /// Quadratic speed coefficient `(c0/2) <|grad chi|^2>`.
    pub gamma: f64,
    /// Front-coordinate tilt `-<|grad chi|^2>/2`.
    pub alpha: f64,
    /// Flat-front speed the coefficients refer to.
    pub c0: f64,
}

/// Midpoint-grid cosine transform along one axis (type-II analysis).
struct DctPlan {
    n: usize,
    /// cos(k pi (i + 1/2) / n), row-major by mode k.
    cos_tab: Vec<f64>,
}

impl DctPlan {
    fn new(n: usize) -> Self {
        let mut cos_tab = vec![0.0; n * n];
        for k in 0..n {
            for i in 0..n {
                cos_tab[k * n + i] = (k as f64 * PI * (i as f64 + 0.5) / n as f64).cos();
            }
        }
        Self { n, cos_tab }
    }

    /// Coefficients of `v_i = sum_k c_k cos(k pi x_i / L)`.
    fn analyze(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            let row = &self.cos_tab[k * n..(k + 1) * n];
            let s: f64 = row.iter().zip(v).map(|(c, x)| c * x).sum();
            out[k] = if k == 0 { s / n as f64 } else { 2.0 * s / n as f64 };
        }
    }
}

/// Value of the sup-normalized mode at a flat node index.
pub fn mode_value(grid: &CrossGrid, jx: usize, jy: usize, node: usize) -> f64 {
    let l = grid.width();
    let xy = grid.coords(node);
    let mut v = (jx as f64 * PI * xy[0] / l).cos();
    if grid.dim() == 2 {
        v *= (jy as f64 * PI * xy[1] / l).cos();
    }
    v
}

/// Gradient of the mode at a flat node index (second component zero in 1D).
pub fn mode_gradient(grid: &CrossGrid, jx: usize, jy: usize, node: usize) -> [f64; 2] {
    let l = grid.width();
    let xy = grid.coords(node);
    let kx = jx as f64 * PI / l;
    let ky = jy as f64 * PI / l;
    match grid.dim() {
        1 => [-kx * (kx * xy[0]).sin(), 0.0],
        _ => {
            let cx = (kx * xy[0]).cos();
            let sx = (kx * xy[0]).sin();
            let cy = (ky * xy[1]).cos();
            let sy = (ky * xy[1]).sin();
            [-kx * sx * cy, -ky * cx * sy]
        }
    }
}

/// Laplace eigenvalue of mode `(jx, jy)` on the cross-section.
pub fn mode_lambda(grid: &CrossGrid, jx: usize, jy: usize) -> f64 {
    let k = PI / grid.width();
    k * k * ((jx * jx + jy * jy) as f64)
}

/// Solves the cell problem for the sample's fluctuation part and assembles
/// the speed coefficients relative to the flat-front speed `c0`.
pub fn solve_cell(sample: &ShearSample, c0: f64) -> Result<CellSolution> {
    if !(c0.is_finite() && c0 > 0.0) {
        return Err(Error::Parameter(format!("flat-front speed must be positive, got {c0}")));
    }
    let grid = sample.grid.clone();
    let n = grid.n_per_axis();
    let plan = DctPlan::new(n);
    let total = grid.total_nodes();

    // Cosine coefficients of b1, then exact mode division by lambda.
    let b_hat = transform(&grid, &plan, &sample.fluct);
    let mut chi_hat = vec![0.0; total];
    for (flat, &bh) in b_hat.iter().enumerate() {
        let (jx, jy) = split_index(&grid, flat);
        if jx == 0 && jy == 0 {
            // Solvability: the fluctuation has zero mean by construction.
            continue;
        }
        chi_hat[flat] = bh / mode_lambda(&grid, jx, jy);
    }

    // Nodal synthesis of chi and its analytic gradient.
    let mut chi = vec![0.0; total];
    let dim = grid.dim();
    let mut grad_chi = vec![vec![0.0; total]; dim];
    for (flat, &ch) in chi_hat.iter().enumerate() {
        if ch == 0.0 {
            continue;
        }
        let (jx, jy) = split_index(&grid, flat);
        for node in 0..total {
            chi[node] += ch * mode_value(&grid, jx, jy, node);
            let g = mode_gradient(&grid, jx, jy, node);
            for (axis, gc) in grad_chi.iter_mut().enumerate() {
                gc[node] += ch * g[axis];
            }
        }
    }

    let grad_sq: Vec<f64> = (0..total)
        .map(|node| grad_chi.iter().map(|gc| gc[node] * gc[node]).sum())
        .collect();
    let grad_sq_avg = grid.mean(&grad_sq);

    // Cosine modes of |grad chi|^2 (zero mode equals the average exactly).
    let a_hat = transform(&grid, &plan, &grad_sq);
    let mut modes = vec![CrossMode { jx: 0, jy: 0, lambda: 0.0, a: grad_sq_avg }];
    let mut rest: Vec<CrossMode> = a_hat
        .iter()
        .enumerate()
        .filter_map(|(flat, &a)| {
            let (jx, jy) = split_index(&grid, flat);
            if (jx, jy) == (0, 0) || a.abs() < MODE_DROP_TOL {
                None
            } else {
                Some(CrossMode { jx, jy, lambda: mode_lambda(&grid, jx, jy), a })
            }
        })
        .collect();
    rest.sort_by(|p, q| {
        (p.jx * p.jx + p.jy * p.jy, p.jx, p.jy).cmp(&(q.jx * q.jx + q.jy * q.jy, q.jx, q.jy))
    });
    modes.extend(rest);

    // alpha first, then gamma = -c0 * alpha: the cancellation
    // gamma + c0 * alpha = 0 is then exact in floating point.
    let alpha = -0.5 * grad_sq_avg;
    let gamma = -c0 * alpha;

    Ok(CellSolution {
        grid,
        chi,
        grad_chi,
        grad_sq,
        grad_sq_avg,
        modes,
        gamma,
        alpha,
        c0,
    })
}

/// Tensor cosine analysis of a nodal field (1D: single pass; 2D: rows then
/// columns). Returns coefficients indexed like the grid's flat nodes.
fn transform(grid: &CrossGrid, plan: &DctPlan, v: &[f64]) -> Vec<f64> {
    let n = grid.n_per_axis();
    match grid.dim() {
        1 => {
            let mut out = vec![0.0; n];
            plan.analyze(v, &mut out);
            out
        }
        _ => {
            let mut half = vec![0.0; n * n];
            // Transform along the second (contiguous) axis.
            for r in 0..n {
                plan.analyze(&v[r * n..(r + 1) * n], &mut half[r * n..(r + 1) * n]);
            }
            // Transform along the first axis.
            let mut out = vec![0.0; n * n];
            let mut col = vec![0.0; n];
            let mut coeffs = vec![0.0; n];
            for c in 0..n {
                for r in 0..n {
                    col[r] = half[r * n + c];
                }
                plan.analyze(&col, &mut coeffs);
                for r in 0..n {
                    out[r * n + c] = coeffs[r];
                }
            }
            out
        }
    }
}

fn split_index(grid: &CrossGrid, flat: usize) -> (usize, usize) {
    match grid.dim() {
        1 => (flat, 0),
        _ => (flat / grid.n_per_axis(), flat % grid.n_per_axis()),
    }
}

impl CellSolution {
    /// Residual of `-Laplacian(chi) = b1` measured with the second-order
    /// finite-difference Laplacian and mirror (Neumann) ghosts, i.e. a
    /// discretization independent of the spectral solve.
    pub fn fd_residual(&self, b1: &[f64]) -> f64 {
        let n = self.grid.n_per_axis();
        let h2 = self.grid.h() * self.grid.h();
        let total = self.grid.total_nodes();
        let mut worst = 0.0f64;
        let at = |v: &[f64], i: isize| -> f64 {
            // Mirror ghost across the midpoint-grid wall.
            let i = if i < 0 { 0 } else if i as usize >= n { n - 1 } else { i as usize };
            v[i]
        };
        for node in 0..total {
            let lap = match self.grid.dim() {
                1 => {
                    let i = node as isize;
                    (at(&self.chi, i - 1) - 2.0 * self.chi[node] + at(&self.chi, i + 1)) / h2
                }
                _ => {
                    let (r, c) = (node / n, node % n);
                    let row = |rr: isize| -> f64 {
                        let rr =
                            if rr < 0 { 0 } else if rr as usize >= n { n - 1 } else { rr as usize };
                        self.chi[rr * n + c]
                    };
                    let col = |cc: isize| -> f64 {
                        let cc =
                            if cc < 0 { 0 } else if cc as usize >= n { n - 1 } else { cc as usize };
                        self.chi[r * n + cc]
                    };
                    (row(r as isize - 1) - 2.0 * self.chi[node] + row(r as isize + 1)) / h2
                        + (col(c as isize - 1) - 2.0 * self.chi[node] + col(c as isize + 1)) / h2
                }
            };
            worst = worst.max((-lap - b1[node]).abs());
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shear::ShearSample;

    fn cosine_sample_1d(n: usize) -> ShearSample {
        let grid = CrossGrid::new(1, n, 1.0).unwrap();
        let vals: Vec<f64> = (0..n).map(|i| (PI * grid.axis_x(i)).cos()).collect();
        ShearSample::from_values(grid, &vals).unwrap()
    }

    const C0_QUARTER: f64 = 0.35355339059327373; // sqrt(2) * (1/2 - 1/4)

    #[test]
    fn cosine_shear_recovers_closed_form_potential() {
        let s = cosine_sample_1d(64);
        let cs = solve_cell(&s, C0_QUARTER).unwrap();
        let pi2 = PI * PI;
        for node in 0..64 {
            let x = cs.grid.axis_x(node);
            let expect = (PI * x).cos() / pi2;
            assert!(
                (cs.chi[node] - expect).abs() < 1e-10,
                "chi({x}) = {} vs {}",
                cs.chi[node],
                expect
            );
        }
        assert!(
            (cs.grad_sq_avg - 1.0 / (2.0 * pi2)).abs() < 1e-12,
            "<|grad chi|^2> = {} vs 1/(2 pi^2) = {}",
            cs.grad_sq_avg,
            1.0 / (2.0 * pi2)
        );
    }

    #[test]
    fn cosine_shear_mode_table_is_sparse() {
        let s = cosine_sample_1d(64);
        let cs = solve_cell(&s, C0_QUARTER).unwrap();
        let pi2 = PI * PI;
        // |grad chi|^2 = (1 - cos(2 pi x)) / (2 pi^2): zero mode and mode 2.
        assert_eq!(cs.modes[0].a, cs.grad_sq_avg, "zero mode stores the average");
        let m2 = cs.modes.iter().find(|m| m.jx == 2).expect("mode 2 present");
        assert!(
            (m2.a + 1.0 / (2.0 * pi2)).abs() < 1e-10,
            "a_2 = {} vs -1/(2 pi^2)",
            m2.a
        );
        assert!(
            (m2.lambda - 4.0 * pi2).abs() < 1e-10,
            "lambda_2 = {} vs 4 pi^2",
            m2.lambda
        );
        assert_eq!(cs.modes.len(), 2, "only the zero mode and mode 2 survive the drop tol");
    }

    #[test]
    fn product_cosine_2d_recovers_closed_form() {
        let n = 24;
        let grid = CrossGrid::new(2, n, 1.0).unwrap();
        let mut vals = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                vals[r * n + c] =
                    (PI * grid.axis_x(r)).cos() * (PI * grid.axis_x(c)).cos();
            }
        }
        let s = ShearSample::from_values(grid, &vals).unwrap();
        let cs = solve_cell(&s, C0_QUARTER).unwrap();
        let pi2 = PI * PI;
        for node in 0..n * n {
            let expect = s.values[node] / (2.0 * pi2);
            assert!((cs.chi[node] - expect).abs() < 1e-10);
        }
        assert!(
            (cs.grad_sq_avg - 1.0 / (8.0 * pi2)).abs() < 1e-12,
            "<|grad chi|^2> = {} vs 1/(8 pi^2) = {}",
            cs.grad_sq_avg,
            1.0 / (8.0 * pi2)
        );
    }

    #[test]
    fn speed_coefficients_satisfy_exact_identity() {
        let s = cosine_sample_1d(64);
        let cs = solve_cell(&s, C0_QUARTER).unwrap();
        assert_eq!(cs.gamma + cs.c0 * cs.alpha, 0.0, "gamma + c0*alpha must vanish exactly");
        assert!((cs.gamma - C0_QUARTER / (4.0 * PI * PI)).abs() < 1e-14);
        assert!(cs.gamma > 0.0 && cs.alpha < 0.0);
    }

    #[test]
    fn chi_has_zero_mean() {
        let grid = CrossGrid::new(1, 64, 1.0).unwrap();
        let model = crate::shear::CovarianceModel::ornstein_uhlenbeck(1.0, 0.5).unwrap();
        let basis = crate::shear::kl_decompose(model, &grid, 64).unwrap();
        for seed in 0..10 {
            let s = crate::shear::sample_field(&basis, seed);
            let cs = solve_cell(&s, C0_QUARTER).unwrap();
            let m = cs.grid.mean(&cs.chi);
            assert!(m.abs() < 1e-12, "chi mean {m:.3e} for seed {seed}");
        }
    }

    #[test]
    fn solve_is_linear_in_the_shear() {
        let grid = CrossGrid::new(1, 48, 1.0).unwrap();
        let f1: Vec<f64> = (0..48).map(|i| (PI * grid.axis_x(i)).cos()).collect();
        let f2: Vec<f64> =
            (0..48).map(|i| (3.0 * PI * grid.axis_x(i)).cos() + 0.3).collect();
        let s1 = ShearSample::from_values(grid.clone(), &f1).unwrap();
        let s2 = ShearSample::from_values(grid.clone(), &f2).unwrap();
        let combo: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| 2.0 * a - 0.7 * b).collect();
        let sc = ShearSample::from_values(grid, &combo).unwrap();
        let c1 = solve_cell(&s1, C0_QUARTER).unwrap();
        let c2 = solve_cell(&s2, C0_QUARTER).unwrap();
        let cc = solve_cell(&sc, C0_QUARTER).unwrap();
        for node in 0..48 {
            let lin = 2.0 * c1.chi[node] - 0.7 * c2.chi[node];
            assert!(
                (cc.chi[node] - lin).abs() < 1e-10,
                "superposition violated at node {node}"
            );
        }
    }

    #[test]
    fn quadratic_scaling_of_enhancement() {
        let s = cosine_sample_1d(48);
        let scaled_vals: Vec<f64> = s.values.iter().map(|v| 3.0 * v).collect();
        let ss = ShearSample::from_values(s.grid.clone(), &scaled_vals).unwrap();
        let a = solve_cell(&s, C0_QUARTER).unwrap();
        let b = solve_cell(&ss, C0_QUARTER).unwrap();
        let ratio = b.grad_sq_avg / a.grad_sq_avg;
        assert!(
            (ratio - 9.0).abs() < 1e-10,
            "grad_sq_avg must scale with the square of the shear, ratio {ratio}"
        );
    }

    #[test]
    fn finite_difference_residual_consistent_with_spectral_solve() {
        // Independent discretization: the FD Laplacian with mirror ghosts
        // agrees with the spectral solve at its own O(h^2) accuracy. This
        // ties the spectral basis to the grid convention the time stepper
        // uses for Neumann walls.
        let s = cosine_sample_1d(64);
        let cs = solve_cell(&s, C0_QUARTER).unwrap();
        let res = cs.fd_residual(&s.fluct);
        let h = cs.grid.h();
        let expect = PI * PI * h * h / 12.0; // leading FD error on the pi-mode
        assert!(
            res < 3.0 * expect,
            "FD residual {res:.3e} far above the O(h^2) level {expect:.3e}"
        );
        assert!(res > 0.01 * expect, "suspiciously small FD residual {res:.3e}");
    }

    #[test]
    fn gradient_matches_antiderivative_reduction() {
        // In a one-dimensional cross-section, chi' = -int_0^x b1. Midpoint
        // cumulative quadrature reproduces the spectral gradient to O(h^2).
        let s = cosine_sample_1d(64);
        let cs = solve_cell(&s, C0_QUARTER).unwrap();
        let h = cs.grid.h();
        let mut cum = 0.0;
        for node in 0..64 {
            // Integral up to the node: full cells before it, half cell to it.
            let half = 0.5 * h * s.fluct[node];
            let integral = cum + half;
            cum += h * s.fluct[node];
            assert!(
                (cs.grad_chi[0][node] + integral).abs() < 1e-3,
                "node {node}: chi' = {} vs -integral {}",
                cs.grad_chi[0][node],
                -integral
            );
        }
    }

    #[test]
    fn rejects_nonpositive_speed() {
        let s = cosine_sample_1d(16);
        assert!(solve_cell(&s, 0.0).is_err());
        assert!(solve_cell(&s, -1.0).is_err());
    }
}
