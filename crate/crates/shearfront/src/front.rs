//! Traveling-front profiles of `U'' - c U' + f(U) = 0` on a truncated line.
//!
//! The profile connects the two stable states, `U(-inf) = 0` and
//! `U(+inf) = 1`, is strictly increasing, and is pinned by `U(0) = 1/2`.
//! The speed is part of the unknown: the discrete system couples the nodal
//! values with `c` through a bordered tridiagonal Jacobian (one extra column
//! for the speed, one extra pinning row), solved by damped Newton steps that
//! reject non-monotone iterates.
//!
//! For the bistable nonlinearity `u(1-u)(u-mu)` the exact solution
//! `U(xi) = 1/(1 + exp(-xi/sqrt(2)))`, `c = sqrt(2)(1/2 - mu)` serves as the
//! reference the solver is tested against.

use crate::error::Error;
use crate::grid::{self, UniformGrid};
use crate::reaction::Nonlinearity;
use crate::Result;

/// Discrete traveling front on a symmetric grid.
///
/// `du` is strictly positive, `d2u` satisfies the profile equation
/// `d2u = c0 * du - f(u)` node-wise, and both tails sit below the truncation
/// tolerance used by [`validate`].
#[derive(Debug, Clone)]
pub struct FrontProfile {
    pub grid: UniformGrid,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub d2u: Vec<f64>,
    pub c0: f64,
    pub nonlinearity: Nonlinearity,
}

/// Default half-width of the front domain; ample for bistable tails.
/// Combustion fronts decay like `exp(c0 xi)` with small `c0` and need a
/// wider window, chosen by the caller.
pub const DEFAULT_HALF_WIDTH: f64 = 30.0;

/// Default node count. With second-order stencils this pushes the speed
/// discretization error below 1e-7 for bistable parameters.
pub const DEFAULT_NODES: usize = 16_385;

/// Tail truncation tolerance enforced by [`validate`].
pub const TAIL_TOL: f64 = 1e-6;

/// Closed-form bistable front sampled on the requested grid.
pub fn analytic_bistable_front(mu: f64, half_width: f64, n_nodes: usize) -> Result<FrontProfile> {
    let nl = Nonlinearity::bistable(mu)?;
    let grid = UniformGrid::symmetric(half_width, n_nodes)?;
    let c0 = nl.analytic_speed().expect("bistable has a closed-form speed");
    let inv_sqrt2 = 1.0 / std::f64::consts::SQRT_2;
    let n = grid.len();
    let mut u = vec![0.0; n];
    let mut du = vec![0.0; n];
    let mut d2u = vec![0.0; n];
    for i in 0..n {
        let t = grid.x(i) * inv_sqrt2;
        // Overflow-safe logistic.
        let ui = if t >= 0.0 { 1.0 / (1.0 + (-t).exp()) } else { t.exp() / (1.0 + t.exp()) };
        u[i] = ui;
        du[i] = ui * (1.0 - ui) * inv_sqrt2;
        d2u[i] = du[i] * (1.0 - 2.0 * ui) * inv_sqrt2;
    }
    Ok(FrontProfile { grid, u, du, d2u, c0, nonlinearity: nl })
}

/// Solves the front boundary-value problem by damped Newton iteration.
///
/// Equations: second-order collocation of the profile ODE at interior nodes,
/// exponential-decay closure at both ends (rate from the linearization at
/// the adjacent rest state, so the discrete tails stay strictly monotone),
/// and the pinning `U(0) = 1/2` that fixes translation and closes the
/// system for the speed unknown.
pub fn solve_front(nl: Nonlinearity, half_width: f64, n_nodes: usize) -> Result<FrontProfile> {
    if n_nodes < 512 {
        return Err(Error::Parameter(format!(
            "front solve needs >= 512 nodes for meaningful tails, got {n_nodes}"
        )));
    }
    let grid = UniformGrid::symmetric(half_width, n_nodes)?;
    let n = grid.len();
    let h = grid.h();
    let center = grid.center_index();

    // Initial guess: logistic ramp; for bistable this is already the answer
    // up to the speed, for combustion it is a monotone state in the basin.
    let init = analytic_bistable_front(0.25, half_width, n_nodes)?;
    let mut u = init.u;
    let mut c = match nl {
        Nonlinearity::Bistable { .. } => nl.analytic_speed().unwrap(),
        Nonlinearity::Combustion { .. } => 0.1,
    };

    // Tail rates from the linearization at the rest states: on the left the
    // stable branch grows rightward at sigma_l > 0, on the right the approach
    // to 1 decays at sigma_r < 0. For bistable both equal 1/sqrt(2) in
    // magnitude; for combustion the left rate degenerates to c itself.
    let disc_l = move |c: f64| (c * c - 4.0 * nl.f_prime(0.0)).sqrt();
    let disc_r = move |c: f64| (c * c - 4.0 * nl.f_prime(1.0)).sqrt();
    let rho_l = move |c: f64| (0.5 * (c + disc_l(c)) * h).exp();
    let rho_r = move |c: f64| (0.5 * (c - disc_r(c)) * h).exp();

    let residual = |u: &[f64], c: f64, out: &mut Vec<f64>| {
        out[0] = u[1] - rho_l(c) * u[0];
        let h2 = h * h;
        for i in 1..n - 1 {
            out[i] = (u[i - 1] - 2.0 * u[i] + u[i + 1]) / h2
                - c * (u[i + 1] - u[i - 1]) / (2.0 * h)
                + nl.f(u[i]);
        }
        out[n - 1] = (1.0 - u[n - 1]) - rho_r(c) * (1.0 - u[n - 2]);
    };
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let monotone = |u: &[f64]| u.windows(2).all(|w| w[1] >= w[0] - 1e-12);

    let mut res = vec![0.0; n];
    residual(&u, c, &mut res);
    let mut res_norm = norm(&res);

    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut col = vec![0.0; n];
    let mut row = vec![0.0; n];
    row[center] = 1.0;

    let max_iter = 60;
    for _ in 0..max_iter {
        let pin = u[center] - 0.5;
        if res_norm < 1e-10 && pin.abs() < 1e-13 {
            return finish(grid, u, c, nl);
        }

        let h2 = h * h;
        let (rl, rr) = (rho_l(c), rho_r(c));
        let (dl, dr) = (disc_l(c), disc_r(c));
        diag[0] = -rl;
        upper[0] = 1.0;
        let slope_l = if dl > 0.0 { 0.5 * (1.0 + c / dl) } else { 1.0 };
        col[0] = -h * slope_l * rl * u[0];
        for i in 1..n - 1 {
            lower[i] = 1.0 / h2 + c / (2.0 * h);
            diag[i] = -2.0 / h2 + nl.f_prime(u[i]);
            upper[i] = 1.0 / h2 - c / (2.0 * h);
            col[i] = -(u[i + 1] - u[i - 1]) / (2.0 * h);
        }
        lower[n - 1] = rr;
        diag[n - 1] = -1.0;
        let slope_r = if dr > 0.0 { 0.5 * (1.0 - c / dr) } else { 1.0 };
        col[n - 1] = -h * slope_r * rr * (1.0 - u[n - 2]);

        let neg_res: Vec<f64> = res.iter().map(|r| -r).collect();
        let (step_u, step_c) = grid::bordered_tridiag_solve(
            &lower, &diag, &upper, &col, &row, 0.0, &neg_res, -pin,
        )?;

        // Damped update: halve until the residual drops and the iterate
        // stays monotone. Monotonicity is part of the solution class, so a
        // step that leaves it is rejected rather than accepted and repaired.
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            // The min(1) is projection onto the u <= 1 solution class. It
            // only ever moves plateau noise where the right tail has
            // saturated below one ulp of 1; live nodes sit strictly inside.
            let trial_u: Vec<f64> =
                u.iter().zip(&step_u).map(|(ui, si)| (ui + t * si).min(1.0)).collect();
            let trial_c = c + t * step_c;
            residual(&trial_u, trial_c, &mut res);
            let trial_norm = norm(&res);
            let trial_pin = (trial_u[center] - 0.5).abs();
            if monotone(&trial_u)
                && (trial_norm + trial_pin < res_norm + pin.abs() || trial_norm < 1e-10)
            {
                u = trial_u;
                c = trial_c;
                res_norm = trial_norm;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence(
                "front Newton step rejected at minimal damping".into(),
            ));
        }
    }
    Err(Error::NonConvergence(format!(
        "front Newton did not converge in {max_iter} iterations (residual {res_norm:.3e})"
    )))
}

fn finish(grid: UniformGrid, u: Vec<f64>, c0: f64, nl: Nonlinearity) -> Result<FrontProfile> {
    let du = grid::first_derivative_o4(&u, grid.h());
    // Second derivative through the profile equation itself: consistent with
    // (u, du, c0) to rounding, which downstream ratio-type evaluations need.
    let d2u: Vec<f64> = u.iter().zip(&du).map(|(&ui, &di)| c0 * di - nl.f(ui)).collect();
    let fp = FrontProfile { grid, u, du, d2u, c0, nonlinearity: nl };
    validate(&fp)?;
    Ok(fp)
}

/// Profile-equation residual recomputed with fourth-order stencils, i.e. a
/// discretization independent of the solver's own second-order collocation.
/// Maximum over nodes at least two away from the boundary closure.
pub fn front_residual(fp: &FrontProfile) -> f64 {
    let h = fp.grid.h();
    let d1 = grid::first_derivative_o4(&fp.u, h);
    let d2 = grid::second_derivative_o4(&fp.u, h);
    let n = fp.u.len();
    let mut worst = 0.0f64;
    for i in 2..n - 2 {
        let r = d2[i] - fp.c0 * d1[i] + fp.nonlinearity.f(fp.u[i]);
        worst = worst.max(r.abs());
    }
    worst
}

/// Nodes with `1 - U` below this are saturated: the tail has decayed under
/// the spacing of doubles near 1, so the stored value rounds to 1.0 and the
/// slope there is quantization, not structure. Wide combustion domains
/// (slow left tail forces the width, fast right tail saturates) hit this.
const SATURATION: f64 = 1.0 - 1e-13;

/// Structural invariants of a front profile:
/// values in (0, 1] and strictly below 1 wherever `1 - U` is representable,
/// strict monotonicity away from the saturated fringe, tails below
/// [`TAIL_TOL`], center pinning, and log-linear (exponential) tail decay.
pub fn validate(fp: &FrontProfile) -> Result<()> {
    let n = fp.u.len();
    if fp.u.iter().any(|&v| v <= 0.0 || v > 1.0) {
        let lo = fp.u.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = fp.u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::Model(format!(
            "front values must lie in (0, 1]; range [{lo:.3e}, {hi:.17e}]"
        )));
    }
    if fp.du.iter().zip(&fp.u).any(|(&d, &v)| d <= 0.0 && v < SATURATION) {
        return Err(Error::Model("front slope must be strictly positive".into()));
    }
    if fp.u[0] >= TAIL_TOL || 1.0 - fp.u[n - 1] >= TAIL_TOL {
        return Err(Error::Model(format!(
            "front tails not closed: U(-Xi) = {:.3e}, 1 - U(Xi) = {:.3e}; widen the domain",
            fp.u[0],
            1.0 - fp.u[n - 1]
        )));
    }
    let center = fp.grid.center_index();
    if (fp.u[center] - 0.5).abs() > 1e-9 {
        return Err(Error::Model(format!(
            "front pinning violated: U(0) = {}",
            fp.u[center]
        )));
    }
    for (tail, label) in [(left_tail_fit(fp), "left"), (right_tail_fit(fp), "right")] {
        let (_, _, rms) = tail?;
        if rms > 1e-3 {
            return Err(Error::Model(format!(
                "{label} tail deviates from exponential decay (log-fit rms {rms:.3e})"
            )));
        }
    }
    Ok(())
}

/// Affine fit of `log U` on the left tail; returns (intercept, rate, rms).
/// Fit window: nodes with `U` between a floor above truncation noise and
/// 1e-4, so the fit sees the asymptotic regime, not the transition layer.
pub fn left_tail_fit(fp: &FrontProfile) -> Result<(f64, f64, f64)> {
    let floor = (4.0 * fp.u[0]).max(1e-12);
    let idx: Vec<usize> =
        (0..fp.u.len()).filter(|&i| fp.u[i] > floor && fp.u[i] < 1e-4).collect();
    tail_fit_on(fp, &idx, |v| v)
}

/// Affine fit of `log (1 - U)` on the right tail.
pub fn right_tail_fit(fp: &FrontProfile) -> Result<(f64, f64, f64)> {
    let n = fp.u.len();
    let floor = (4.0 * (1.0 - fp.u[n - 1])).max(1e-12);
    let idx: Vec<usize> =
        (0..n).filter(|&i| 1.0 - fp.u[i] > floor && 1.0 - fp.u[i] < 1e-4).collect();
    tail_fit_on(fp, &idx, |v| 1.0 - v)
}

fn tail_fit_on(
    fp: &FrontProfile,
    idx: &[usize],
    transform: impl Fn(f64) -> f64,
) -> Result<(f64, f64, f64)> {
    if idx.len() < 8 {
        return Err(Error::Model(
            "tail fit window too narrow; domain truncates the exponential regime".into(),
        ));
    }
    let xs: Vec<f64> = idx.iter().map(|&i| fp.grid.x(i)).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| transform(fp.u[i]).ln()).collect();
    Ok(grid::fit_line(&xs, &ys))
}
