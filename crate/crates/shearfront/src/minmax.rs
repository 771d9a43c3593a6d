//! Variational speed sandwich from the multi-scale test function.
//!
//! The functional `psi(v) = (Lap v + delta b d_x1 v + f(v)) / d_x1 v` is
//! constant, equal to the true front speed, exactly on the traveling wave;
//! for any admissible `v` its infimum and supremum over the channel bracket
//! the speed. The test function used here is
//!
//! ```text
//! v(x1, x) = U(xi) + delta^2 u_tilde(xi, x),
//! xi = (1 + alpha delta^2) x1 + delta chi(x),
//! ```
//!
//! built from the flat front, the cell potential, and the corrector modes.
//! The coordinate tilt `alpha = -<|grad chi|^2>/2` cancels the order-two
//! residual together with `gamma = -c0 alpha`, which the cell solver makes
//! exact in floating point; what is left of `psi - (c0 + delta b_bar +
//! delta^2 gamma)` is the explicitly known remainder starting at
//! `delta^3`. All derivatives flow through the chain rule and the
//! governing identities of the profile and the modes, so the evaluation
//! carries no finite differencing across the composed map.

use crate::cell::{mode_gradient, mode_value, CellSolution};
use crate::corrector::ModeSolution;
use crate::error::Error;
use crate::front::FrontProfile;
use crate::grid::{CubicInterp, UniformGrid};
use crate::shear::ShearSample;
use crate::Result;

/// Admissible multi-scale test function, flagged with its monotonicity
/// margin. An inadmissible instance is returned flagged, never silently
/// used for bounds.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub fp: FrontProfile,
    pub cell: CellSolution,
    pub modes: Vec<ModeSolution>,
    pub delta: f64,
    pub x1_grid: UniformGrid,
    /// Node-wise `d_x1 v > 0` and `0 < v < 1` both hold.
    pub admissible: bool,
    /// Min over the grid of `d_x1 v / U'(xi)`.
    pub margin: f64,
    /// `delta^2` ceiling `min(1/(2|alpha|), 1/(2 M))` with `M` the
    /// corrector derivative-ratio bound; below it admissibility is
    /// guaranteed a priori.
    pub threshold_delta_sq: f64,
    /// Empirical ratio constant `M / sup|b|^2` (zero for zero shear).
    pub c_hat: f64,
    /// Sup norm of the shear sample the cell data came from.
    pub sup_b: f64,
    /// Functional extrema recorded during the admissibility scan.
    bounds: (f64, f64),
}

/// Speed estimate record for one sample and one delta.
#[derive(Debug, Clone)]
pub struct SpeedEstimate {
    pub delta: f64,
    pub c0: f64,
    pub b_bar: f64,
    pub gamma: f64,
    pub lower: f64,
    pub upper: f64,
    pub asymptotic: f64,
    pub direct: Option<f64>,
    pub admissible: bool,
    pub margin: f64,
}

/// Max-norms of the remainder fields, each weighted by `1/U'`, plus the
/// defect of the exact decomposition identity.
#[derive(Debug, Clone, Copy)]
pub struct RemainderReport {
    /// `A = alpha b1 U' + 2 grad chi . grad_x u_tilde_xi`, order delta^3.
    pub a: f64,
    /// Order delta^4 block.
    pub b: f64,
    /// `D = alpha b1 u_tilde_xi`, order delta^5.
    pub d: f64,
    /// Order delta^6 block.
    pub e: f64,
    /// Nonlinear remainder `f(v) - f(U) - delta^2 f'(U) u_tilde`.
    pub f: f64,
    /// Max over nodes of `|N - S d_x1 v - R1|` with `R1` reassembled from
    /// the named blocks; zero up to round-off by construction.
    pub consistency_defect: f64,
}

/// `c0 + delta b_bar + delta^2 gamma`.
pub fn asymptotic_speed(c0: f64, b_bar: f64, gamma: f64, delta: f64) -> f64 {
    c0 + delta * b_bar + delta * delta * gamma
}

/// Builds the test function and scans it for admissibility.
///
/// The front, cell solution, and modes must come from one consistent run:
/// the cell's reference speed has to match the profile, and the sample has
/// to live on the cell's cross grid.
pub fn build_test_function(
    fp: &FrontProfile,
    cell: &CellSolution,
    modes: &[ModeSolution],
    sample: &ShearSample,
    delta: f64,
    x1_grid: &UniformGrid,
) -> Result<TestFunction> {
    if sample.grid != cell.grid {
        return Err(Error::Parameter("shear sample and cell solution use different cross grids".into()));
    }
    if cell.c0 != fp.c0 {
        return Err(Error::Parameter(format!(
            "cell solution was built for c0 = {} but the profile has c0 = {}",
            cell.c0, fp.c0
        )));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Parameter(format!("delta must be finite and nonnegative, got {delta}")));
    }
    let xi_half = fp.grid.hi();
    let need = 0.5 * xi_half;
    if x1_grid.lo() > -need || x1_grid.hi() < need {
        return Err(Error::Parameter(format!(
            "evaluation grid [{}, {}] must span at least [-{need}, {need}]",
            x1_grid.lo(),
            x1_grid.hi()
        )));
    }
    let m = 1.0 + cell.alpha * delta * delta;
    let chi_max = cell.chi.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    if m.abs() * x1_grid.hi().max(-x1_grid.lo()) + delta * chi_max > xi_half {
        return Err(Error::Parameter(
            "mapped xi leaves the front grid; widen the profile or shrink the evaluation grid".into(),
        ));
    }

    // Derivative-ratio bound M over the modes (triangle inequality across
    // the sup-normalized basis), then the a-priori admissibility ceiling.
    let mut m_bound = 0.0f64;
    for md in modes {
        if md.jx == 0 && md.jy == 0 {
            continue;
        }
        let r = md
            .du
            .iter()
            .zip(&fp.du)
            .map(|(d, w)| d.abs() / w.max(f64::MIN_POSITIVE))
            .fold(0.0f64, f64::max);
        m_bound += r;
    }
    let cap_alpha = if cell.alpha == 0.0 { f64::INFINITY } else { 0.5 / cell.alpha.abs() };
    let cap_ratio = if m_bound == 0.0 { f64::INFINITY } else { 0.5 / m_bound };
    let threshold_delta_sq = cap_alpha.min(cap_ratio);
    let sup_b = sample.sup_norm();
    let c_hat = if sup_b > 0.0 { m_bound / (sup_b * sup_b) } else { 0.0 };

    let mut tf = TestFunction {
        fp: fp.clone(),
        cell: cell.clone(),
        modes: modes.to_vec(),
        delta,
        x1_grid: x1_grid.clone(),
        admissible: false,
        margin: 0.0,
        threshold_delta_sq,
        c_hat,
        sup_b,
        bounds: (f64::NAN, f64::NAN),
    };
    let scan = core_sweep(&tf, sample, Collect::Admissibility)?;
    tf.admissible = scan.margin > 0.0 && scan.v_inside;
    tf.margin = scan.margin;
    tf.bounds = (scan.psi_min, scan.psi_max);
    Ok(tf)
}

/// Node-wise speed functional on the evaluation grid, row-major with the
/// cross index fastest. Demands an admissible test function.
pub fn eval_psi(tf: &TestFunction, sample: &ShearSample) -> Result<Vec<f64>> {
    require_admissible(tf)?;
    let out = core_sweep(tf, sample, Collect::Field)?;
    Ok(out.field.expect("field collection requested"))
}

/// Min and max of the functional over the grid: the variational bracket
/// around the true speed. The extrema were recorded while the test
/// function was built; the sample argument guards against mixing runs.
pub fn speed_bounds(tf: &TestFunction, sample: &ShearSample) -> Result<(f64, f64)> {
    require_admissible(tf)?;
    if sample.grid != tf.cell.grid {
        return Err(Error::Parameter("evaluation sample lives on a different cross grid".into()));
    }
    Ok(tf.bounds)
}

/// Remainder blocks, profile-weighted, plus the decomposition defect.
pub fn remainder_terms(tf: &TestFunction, sample: &ShearSample) -> Result<RemainderReport> {
    require_admissible(tf)?;
    let out = core_sweep(tf, sample, Collect::Remainder)?;
    Ok(out.remainder.expect("remainder collection requested"))
}

/// One-shot speed estimate for a sample: build, scan, and bracket. An
/// inadmissible test function yields NaN bounds and the flag down.
pub fn speed_estimate(
    fp: &FrontProfile,
    cell: &CellSolution,
    modes: &[ModeSolution],
    sample: &ShearSample,
    delta: f64,
    x1_grid: &UniformGrid,
) -> Result<SpeedEstimate> {
    let tf = build_test_function(fp, cell, modes, sample, delta, x1_grid)?;
    let asymptotic = asymptotic_speed(fp.c0, sample.mean, cell.gamma, delta);
    let (lower, upper) = if tf.admissible { tf.bounds } else { (f64::NAN, f64::NAN) };
    Ok(SpeedEstimate {
        delta,
        c0: fp.c0,
        b_bar: sample.mean,
        gamma: cell.gamma,
        lower,
        upper,
        asymptotic,
        direct: None,
        admissible: tf.admissible,
        margin: tf.margin,
    })
}

fn require_admissible(tf: &TestFunction) -> Result<()> {
    if !tf.admissible {
        return Err(Error::Model(format!(
            "test function at delta = {} is not admissible (margin {:.3e}); bounds are undefined",
            tf.delta, tf.margin
        )));
    }
    Ok(())
}

enum Collect {
    Admissibility,
    Field,
    Remainder,
}

struct SweepOut {
    psi_min: f64,
    psi_max: f64,
    margin: f64,
    v_inside: bool,
    field: Option<Vec<f64>>,
    remainder: Option<RemainderReport>,
}

/// Single pass over `x1_grid x cross`: evaluates the chain-rule fields,
/// the functional, the admissibility margin, and (on request) the
/// remainder decomposition.
fn core_sweep(tf: &TestFunction, sample: &ShearSample, collect: Collect) -> Result<SweepOut> {
    if sample.grid != tf.cell.grid {
        return Err(Error::Parameter("evaluation sample lives on a different cross grid".into()));
    }
    let fp = &tf.fp;
    let cell = &tf.cell;
    let delta = tf.delta;
    let d2 = delta * delta;
    let m = 1.0 + cell.alpha * d2;
    let nl = &fp.nonlinearity;
    let c0 = fp.c0;
    let gamma = cell.gamma;
    let alpha = cell.alpha;
    let b_bar = sample.mean;

    let u_interp = CubicInterp::new(&fp.grid, &fp.u);
    let du_interp = CubicInterp::new(&fp.grid, &fp.du);
    let active: Vec<&ModeSolution> =
        tf.modes.iter().filter(|md| !(md.jx == 0 && md.jy == 0)).collect();
    let mode_interp: Vec<(CubicInterp, CubicInterp)> = active
        .iter()
        .map(|md| (CubicInterp::new(&fp.grid, &md.u), CubicInterp::new(&fp.grid, &md.du)))
        .collect();

    let nc = cell.grid.total_nodes();
    let nx = tf.x1_grid.len();
    let dim = cell.grid.dim();
    // Per-cross-node mode tables: value and gradient dotted with grad chi.
    let mut phis = vec![0.0; active.len() * nc];
    let mut gdots = vec![0.0; active.len() * nc];
    for (j, md) in active.iter().enumerate() {
        for k in 0..nc {
            phis[j * nc + k] = mode_value(&cell.grid, md.jx, md.jy, k);
            let g = mode_gradient(&cell.grid, md.jx, md.jy, k);
            let mut dot = g[0] * cell.grad_chi[0][k];
            if dim == 2 {
                dot += g[1] * cell.grad_chi[1][k];
            }
            gdots[j * nc + k] = dot;
        }
    }

    let mut psi_min = f64::INFINITY;
    let mut psi_max = f64::NEG_INFINITY;
    let mut margin = f64::INFINITY;
    let mut v_inside = true;
    let mut field = match collect {
        Collect::Field => Some(vec![0.0; nx * nc]),
        _ => None,
    };
    let mut rem = match collect {
        Collect::Remainder => Some(RemainderReport {
            a: 0.0,
            b: 0.0,
            d: 0.0,
            e: 0.0,
            f: 0.0,
            consistency_defect: 0.0,
        }),
        _ => None,
    };

    for k in 0..nc {
        let chi = cell.chi[k];
        let theta = cell.grad_sq[k];
        let b1 = sample.fluct[k];
        let b_full = sample.values[k];
        for i in 0..nx {
            let xi = m * tf.x1_grid.x(i) + delta * chi;
            let u = u_interp.eval(xi);
            let up = du_interp.eval(xi);
            // Profile curvature through the traveling-wave identity.
            let upp = c0 * up - nl.f(u);
            let fpu = nl.f_prime(u);

            // Mode sums at the mapped point.
            let mut ut = 0.0; // u_tilde
            let mut ut_xi = 0.0;
            let mut ut_xixi = 0.0;
            let mut lap_cross = 0.0; // Laplacian of u_tilde in the cross variables
            let mut gdot_sum = 0.0; // grad chi . grad_x u_tilde_xi
            if delta > 0.0 {
                for (j, md) in active.iter().enumerate() {
                    let phi = phis[j * nc + k];
                    let uj = mode_interp[j].0.eval(xi);
                    let duj = mode_interp[j].1.eval(xi);
                    let d2uj = md.lambda * uj + c0 * duj - fpu * uj - md.a * upp;
                    ut += uj * phi;
                    ut_xi += duj * phi;
                    ut_xixi += d2uj * phi;
                    lap_cross -= md.lambda * uj * phi;
                    gdot_sum += duj * gdots[j * nc + k];
                }
            }

            let v = u + d2 * ut;
            let dv = m * (up + d2 * ut_xi);
            if !(v > 0.0 && v < 1.0) {
                v_inside = false;
            }
            let ratio = dv / up.max(f64::MIN_POSITIVE);
            if ratio < margin {
                margin = ratio;
            }

            // Laplacian in channel coordinates via the chain rule.
            let lap = m * m * (upp + d2 * ut_xixi) + d2 * theta * (upp + d2 * ut_xixi)
                - delta * b1 * (up + d2 * ut_xi)
                + 2.0 * delta * d2 * gdot_sum
                + d2 * lap_cross;
            let fv = nl.f(v);
            let n_val = lap + delta * b_full * dv + fv;
            let psi = n_val / dv;
            if psi < psi_min {
                psi_min = psi;
            }
            if psi > psi_max {
                psi_max = psi;
            }
            if let Some(fld) = field.as_mut() {
                fld[i * nc + k] = psi;
            }

            if let Some(r) = rem.as_mut() {
                let w = 1.0 / up.max(f64::MIN_POSITIVE);
                let a_t = alpha * b1 * up + 2.0 * gdot_sum;
                let b_t = alpha * alpha * upp + 2.0 * alpha * ut_xixi + theta * ut_xixi
                    - gamma * alpha * up
                    - c0 * alpha * ut_xi
                    - gamma * ut_xi;
                let d_t = alpha * b1 * ut_xi;
                let e_t = alpha * alpha * ut_xixi - alpha * gamma * ut_xi;
                let f_t = fv - nl.f(u) - d2 * fpu * ut;
                r.a = r.a.max((a_t * w).abs());
                r.b = r.b.max((b_t * w).abs());
                r.d = r.d.max((d_t * w).abs());
                r.e = r.e.max((e_t * w).abs());
                r.f = r.f.max((f_t * w).abs());
                let s_val = asymptotic_speed(c0, b_bar, gamma, delta);
                let r1 = delta * d2 * a_t
                    + d2 * d2 * b_t
                    + delta * d2 * d2 * d_t
                    + d2 * d2 * d2 * e_t
                    + f_t;
                let defect = (n_val - s_val * dv - r1).abs();
                r.consistency_defect = r.consistency_defect.max(defect);
            }
        }
    }

    Ok(SweepOut { psi_min, psi_max, margin, v_inside, field, remainder: rem })
}
