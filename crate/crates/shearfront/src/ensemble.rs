//! Monte Carlo harness over random shear ensembles.
//!
//! Draws Gaussian shears from a Karhunen-Loeve basis, runs the
//! per-sample pipeline (cell problem, corrector modes, variational
//! sandwich, optionally the direct simulation), and aggregates the
//! deviation statistics of the quadratic speed-enhancement law: the
//! fraction of samples with
//!
//! ```text
//!     |c - c0 - delta b_bar - delta^2 gamma(omega)| >= kappa delta^(3-q)
//! ```
//!
//! where c is the best independent speed the chosen route affords.
//! Also fits c(delta) across a sweep and estimates the order of the
//! remainder by comparing residuals between two windows related by an
//! exact factor-two rescaling of delta.

use rayon::prelude::*;

use crate::cell::solve_cell;
use crate::corrector::solve_modes;
use crate::direct::{integrate, logistic_ramp, SimGrid};
use crate::error::Error;
use crate::front::{solve_front, FrontProfile};
use crate::grid::{CrossGrid, UniformGrid};
use crate::minmax::speed_estimate;
use crate::reaction::Nonlinearity;
use crate::shear::{kl_decompose, sample_field, wilson_half_width, CovarianceModel, KlBasis};
use crate::Result;

/// How much machinery each sample gets, in increasing cost order.
///
/// Every route computes the cell coefficient and the variational
/// sandwich (both are cheap); the route decides which speed feeds the
/// exceedance event. `AsymptoticOnly` plugs the expansion itself in, so
/// its deviations are identically zero: it exists for coefficient
/// statistics over large ensembles, not for testing the law.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    AsymptoticOnly,
    WithBounds,
    WithDirect,
}

/// Which speed entered the exceedance event for one sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpeedSource {
    Asymptotic,
    SandwichMidpoint,
    Direct,
}

/// Ensemble experiment description. Build with [`EnsembleConfig::new`]
/// and override the resolution fields when the defaults do not fit.
#[derive(Clone, Debug)]
pub struct EnsembleConfig {
    pub model: CovarianceModel,
    pub nl: Nonlinearity,
    /// Cross-section dimension: 1 for a planar channel, 2 for a duct.
    pub cross_dim: usize,
    /// Nodes per cross axis for the KL basis and the cell solve.
    pub cross_nodes: usize,
    pub cross_len: f64,
    pub kl_modes: usize,
    pub n_samples: usize,
    pub delta: f64,
    /// Exponent defect in the threshold `kappa delta^(3-q)`.
    pub q: f64,
    pub kappa: f64,
    /// Exceedance probability the experiment is aimed at. The admissible
    /// range narrows with the cross dimension.
    pub epsilon_target: f64,
    pub seed: u64,
    pub route: Route,
    pub front_half_width: f64,
    pub front_nodes: usize,
    pub x1_half_width: f64,
    pub x1_nodes: usize,
    /// Direct-simulation grid; required by [`Route::WithDirect`]. Its
    /// cross grid must match (`cross_dim`, `cross_nodes`, `cross_len`).
    pub sim: Option<SimGrid>,
}

/// Direct-route sample counts above this get an advisory warning.
pub const DIRECT_BUDGET: usize = 64;

/// Perturbative admissibility marker: a sample is flagged admissible
/// when its advective sweep `delta sup|b|` stays under this fraction of
/// the reaction speed c0. The quadratic law concerns the regime where
/// the shear perturbs rather than dominates the front; the fraction
/// marks the boundary the ensemble statistics are conditioned on, the
/// way the probabilistic statements condition on norm-threshold events.
pub const ADMISSIBLE_SWEEP_FRACTION: f64 = 0.25;

impl EnsembleConfig {
    /// Planar-channel config with default resolutions: 33 cross nodes on
    /// `[0,1]`, 16 KL modes, front on `[-30,30]` with 4097 nodes, test
    /// functions on `[-15,15]` with 513 nodes.
    pub fn new(
        model: CovarianceModel,
        nl: Nonlinearity,
        n_samples: usize,
        delta: f64,
        q: f64,
        kappa: f64,
        epsilon_target: f64,
        seed: u64,
        route: Route,
    ) -> Result<Self> {
        let cfg = Self {
            model,
            nl,
            cross_dim: 1,
            cross_nodes: 33,
            cross_len: 1.0,
            kl_modes: 16,
            n_samples,
            delta,
            q,
            kappa,
            epsilon_target,
            seed,
            route,
            front_half_width: 30.0,
            front_nodes: 4097,
            x1_half_width: 15.0,
            x1_nodes: 513,
            sim: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cross_dim != 1 && self.cross_dim != 2 {
            return Err(Error::Parameter(format!(
                "cross dimension must be 1 or 2, got {}",
                self.cross_dim
            )));
        }
        if self.cross_nodes < 8 {
            return Err(Error::Parameter(format!(
                "cross grid needs >= 8 nodes per axis, got {}",
                self.cross_nodes
            )));
        }
        if !(self.cross_len > 0.0 && self.cross_len.is_finite()) {
            return Err(Error::Parameter(format!(
                "cross length must be positive and finite, got {}",
                self.cross_len
            )));
        }
        let total = self.cross_nodes.pow(self.cross_dim as u32);
        if self.kl_modes == 0 || self.kl_modes > total {
            return Err(Error::Parameter(format!(
                "KL mode count must lie in [1, {total}], got {}",
                self.kl_modes
            )));
        }
        if self.n_samples == 0 {
            return Err(Error::Parameter("ensemble needs at least one sample".into()));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Parameter(format!(
                "delta must be positive and finite, got {}",
                self.delta
            )));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::Parameter(format!(
                "threshold exponent defect q must lie in (0, 1), got {}",
                self.q
            )));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Parameter(format!(
                "threshold constant kappa must be positive and finite, got {}",
                self.kappa
            )));
        }
        // The admissible target range shrinks with the cross dimension.
        let eps_cap = if self.cross_dim == 1 { 0.25 } else { 0.2 };
        if !(self.epsilon_target > 0.0 && self.epsilon_target < eps_cap) {
            return Err(Error::Parameter(format!(
                "epsilon target must lie in (0, {eps_cap}) for a {}-dimensional cross-section, got {}",
                self.cross_dim, self.epsilon_target
            )));
        }
        match (&self.route, &self.sim) {
            (Route::WithDirect, None) => {
                return Err(Error::Parameter(
                    "the direct route needs a simulation grid (sim field)".into(),
                ));
            }
            (Route::WithDirect, Some(sim)) => {
                let c = sim.cross.clone();
                if c.dim() != self.cross_dim
                    || c.n_per_axis() != self.cross_nodes
                    || c.width() != self.cross_len
                {
                    return Err(Error::Parameter(format!(
                        "simulation cross grid (dim {}, {} nodes, width {}) disagrees with the \
                         ensemble cross grid (dim {}, {} nodes, width {})",
                        c.dim(),
                        c.n_per_axis(),
                        c.width(),
                        self.cross_dim,
                        self.cross_nodes,
                        self.cross_len
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Non-fatal advice attached to the report: the direct route costs
    /// seconds per sample, so large counts are flagged, not refused.
    pub fn advisory(&self) -> Option<String> {
        if self.route == Route::WithDirect && self.n_samples > DIRECT_BUDGET {
            return Some(format!(
                "direct route over {} samples exceeds the advisory budget of {DIRECT_BUDGET}; \
                 runtime grows linearly with the count",
                self.n_samples
            ));
        }
        None
    }

    /// Threshold `kappa delta^(3-q)` of the exceedance event.
    pub fn threshold(&self) -> f64 {
        self.kappa * self.delta.powf(3.0 - self.q)
    }
}

/// One sample's worth of pipeline output. A failed sample keeps its
/// seed and field statistics, carries the error text, and is excluded
/// from every aggregate.
#[derive(Clone, Debug)]
pub struct SampleRecord {
    pub index: usize,
    pub seed: u64,
    pub b_bar: f64,
    pub sup_b: f64,
    pub gamma: f64,
    pub c_asym: f64,
    /// Sandwich bounds; NaN when the test function lost monotonicity.
    pub c_lower: f64,
    pub c_upper: f64,
    pub c_direct: Option<f64>,
    /// Perturbative marker: `delta sup|b|` at most
    /// [`ADMISSIBLE_SWEEP_FRACTION`] of the reaction speed.
    pub admissible: bool,
    /// Monotonicity margin of the test function at this delta; the
    /// sandwich bounds exist exactly when it is positive.
    pub margin: f64,
    /// Speed that entered the event, and where it came from.
    pub c_event: f64,
    pub source: SpeedSource,
    /// `|c_event - c_asym|`.
    pub deviation: f64,
    pub exceeded: bool,
    pub error: Option<String>,
}

impl SampleRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Ensemble aggregates. All fractions are over the successful samples;
/// `n_failed` says how many were excluded.
#[derive(Clone, Debug)]
pub struct EnsembleReport {
    pub records: Vec<SampleRecord>,
    pub n_samples: usize,
    pub n_failed: usize,
    pub exceed_frac: f64,
    /// 95% Wilson half-width for `exceed_frac`.
    pub exceed_half_width: f64,
    /// Fraction of samples whose advective sweep breaches the
    /// perturbative marker, see [`ADMISSIBLE_SWEEP_FRACTION`].
    pub inadmissible_frac: f64,
    pub mean_gamma: f64,
    /// Standard error of `mean_gamma` (zero when fewer than two samples).
    pub se_gamma: f64,
    /// Lower quartile, median, upper quartile of gamma.
    pub gamma_quartiles: [f64; 3],
    pub delta: f64,
    pub q: f64,
    pub kappa: f64,
    pub threshold: f64,
    pub epsilon_target: f64,
    /// Point estimate against the target; the half-width is reported so
    /// callers can judge the comparison honestly.
    pub meets_target: bool,
    pub route: Route,
    pub seed: u64,
    pub warning: Option<String>,
}

/// Runs the ensemble described by `cfg`. Samples are independent and
/// processed in parallel; every aggregate is reduced in index order, so
/// a report is a pure function of the config.
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleReport> {
    cfg.validate()?;
    let cross = CrossGrid::new(cfg.cross_dim, cfg.cross_nodes, cfg.cross_len)?;
    let basis = kl_decompose(cfg.model, &cross, cfg.kl_modes)?;
    let fp = solve_front(cfg.nl, cfg.front_half_width, cfg.front_nodes)?;
    let x1 = UniformGrid::symmetric(cfg.x1_half_width, cfg.x1_nodes)?;
    let threshold = cfg.threshold();

    let records: Vec<SampleRecord> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|i| run_one(cfg, &basis, &fp, &x1, threshold, i))
        .collect();

    let ok: Vec<&SampleRecord> = records.iter().filter(|r| r.ok()).collect();
    let n_ok = ok.len();
    let n_failed = records.len() - n_ok;
    if n_ok == 0 {
        return Err(Error::Model(format!(
            "all {} samples failed; first error: {}",
            records.len(),
            records[0].error.as_deref().unwrap_or("unknown")
        )));
    }

    let exceed_frac = ok.iter().filter(|r| r.exceeded).count() as f64 / n_ok as f64;
    let inadmissible_frac = ok.iter().filter(|r| !r.admissible).count() as f64 / n_ok as f64;
    let mut gammas: Vec<f64> = ok.iter().map(|r| r.gamma).collect();
    let mean_gamma = gammas.iter().sum::<f64>() / n_ok as f64;
    let se_gamma = if n_ok > 1 {
        let var = gammas.iter().map(|g| (g - mean_gamma).powi(2)).sum::<f64>() / (n_ok - 1) as f64;
        (var / n_ok as f64).sqrt()
    } else {
        0.0
    };
    gammas.sort_by(|a, b| a.partial_cmp(b).expect("gamma values are finite"));
    let gamma_quartiles = [
        quantile_sorted(&gammas, 0.25),
        quantile_sorted(&gammas, 0.50),
        quantile_sorted(&gammas, 0.75),
    ];

    Ok(EnsembleReport {
        n_samples: records.len(),
        records,
        n_failed,
        exceed_frac,
        exceed_half_width: wilson_half_width(exceed_frac, n_ok),
        inadmissible_frac,
        mean_gamma,
        se_gamma,
        gamma_quartiles,
        delta: cfg.delta,
        q: cfg.q,
        kappa: cfg.kappa,
        threshold,
        epsilon_target: cfg.epsilon_target,
        meets_target: exceed_frac <= cfg.epsilon_target,
        route: cfg.route,
        seed: cfg.seed,
        warning: cfg.advisory(),
    })
}

/// Per-sample pipeline; never panics on solver trouble, errors become a
/// flagged record instead.
fn run_one(
    cfg: &EnsembleConfig,
    basis: &KlBasis,
    fp: &FrontProfile,
    x1: &UniformGrid,
    threshold: f64,
    index: usize,
) -> SampleRecord {
    let seed = cfg.seed.wrapping_add(index as u64);
    let sample = sample_field(basis, seed);
    let mut rec = SampleRecord {
        index,
        seed,
        b_bar: sample.mean,
        sup_b: sample.sup_norm(),
        gamma: f64::NAN,
        c_asym: f64::NAN,
        c_lower: f64::NAN,
        c_upper: f64::NAN,
        c_direct: None,
        admissible: false,
        margin: f64::NAN,
        c_event: f64::NAN,
        source: SpeedSource::Asymptotic,
        deviation: f64::NAN,
        exceeded: false,
        error: None,
    };
    // The marker needs only the field statistics, so failed samples
    // still report it.
    rec.admissible = cfg.delta * rec.sup_b <= ADMISSIBLE_SWEEP_FRACTION * fp.c0;

    let outcome = (|| -> Result<()> {
        let cell = solve_cell(&sample, fp.c0)?;
        let modes = solve_modes(&cell, fp)?;
        let est = speed_estimate(fp, &cell, &modes, &sample, cfg.delta, x1)?;
        rec.gamma = est.gamma;
        rec.c_asym = est.asymptotic;
        rec.c_lower = est.lower;
        rec.c_upper = est.upper;
        rec.margin = est.margin;

        if cfg.route == Route::WithDirect {
            let base = cfg.sim.as_ref().expect("validated: direct route carries a sim grid");
            let dt = base.dt.min(base.stable_dt(cfg.nl, cfg.delta, rec.sup_b));
            let sim = base.with_dt(dt)?;
            let trace = integrate(cfg.nl, &sample, cfg.delta, &sim, &logistic_ramp)?;
            if trace.unconverged {
                return Err(Error::NonConvergence(format!(
                    "direct speed fit left residual {:.3e} against speed {:.3e}",
                    trace.fit_residual, trace.fitted_speed
                )));
            }
            rec.c_direct = Some(trace.fitted_speed);
        }

        let (c_event, source) = match cfg.route {
            Route::AsymptoticOnly => (est.asymptotic, SpeedSource::Asymptotic),
            Route::WithBounds => {
                if est.admissible {
                    (0.5 * (est.lower + est.upper), SpeedSource::SandwichMidpoint)
                } else {
                    (est.asymptotic, SpeedSource::Asymptotic)
                }
            }
            Route::WithDirect => (
                rec.c_direct.expect("direct speed recorded above"),
                SpeedSource::Direct,
            ),
        };
        rec.c_event = c_event;
        rec.source = source;
        rec.deviation = (c_event - est.asymptotic).abs();
        rec.exceeded = rec.deviation >= threshold;
        Ok(())
    })();

    if let Err(e) = outcome {
        rec.error = Some(e.to_string());
    }
    rec
}

/// Calibrates the threshold constant as the 95th percentile of the
/// pooled deviation ratios `|c - c_asym| / delta^(3-q)` over pilot
/// seeds, inflated by `margin`. The theorems assert a constant exists;
/// this makes it operational. Validate on seeds disjoint from the pilot
/// set, or the exceedance fraction is an in-sample quantity.
pub fn calibrate_kappa(cfg: &EnsembleConfig, pilot_seeds: &[u64], margin: f64) -> Result<f64> {
    if pilot_seeds.is_empty() {
        return Err(Error::Parameter("kappa calibration needs at least one pilot seed".into()));
    }
    if !(1.0..=10.0).contains(&margin) {
        return Err(Error::Parameter(format!(
            "calibration margin must lie in [1, 10], got {margin}"
        )));
    }
    let scale = cfg.delta.powf(3.0 - cfg.q);
    let mut ratios = Vec::new();
    for &seed in pilot_seeds {
        let mut pilot = cfg.clone();
        pilot.seed = seed;
        let report = run_ensemble(&pilot)?;
        ratios.extend(report.records.iter().filter(|r| r.ok()).map(|r| r.deviation / scale));
    }
    if ratios.is_empty() {
        return Err(Error::Model("every pilot sample failed; nothing to calibrate on".into()));
    }
    ratios.sort_by(|a, b| a.partial_cmp(b).expect("deviation ratios are finite"));
    let kappa = quantile_sorted(&ratios, 0.95) * margin;
    if !(kappa > 0.0) {
        return Err(Error::Model(
            "pilot deviations are identically zero; calibration needs a route whose speed is \
             independent of the expansion"
                .into(),
        ));
    }
    Ok(kappa)
}

/// Ensemble mean of the enhancement coefficient for a one-dimensional
/// cross-section, by double quadrature of the covariance.
///
/// With the sample mean removed, the centered field has covariance
///
/// ```text
///     Cov1(y, z) = R(y - z) - I1(y)/L - I1(z)/L + I2/L^2
/// ```
///
/// with `I1(y)` the single and `I2` the double integral of `R` over the
/// cross-section, so
///
/// ```text
///     E[gamma] = (c0 / 2L) int_0^L int_[0,x]^2 Cov1(y, z) dy dz dx.
/// ```
///
/// Midpoint quadrature on `n_cells` cells; the inner square integral is
/// grown one border strip at a time, so the whole thing is O(n^2).
pub fn expected_gamma(model: CovarianceModel, len_l: f64, c0: f64, n_cells: usize) -> Result<f64> {
    if !(len_l > 0.0 && len_l.is_finite()) {
        return Err(Error::Parameter(format!(
            "cross length must be positive and finite, got {len_l}"
        )));
    }
    if n_cells < 64 {
        return Err(Error::Parameter(format!(
            "covariance quadrature needs >= 64 cells, got {n_cells}"
        )));
    }
    let n = n_cells;
    let h = len_l / n as f64;
    let y: Vec<f64> = (0..n).map(|a| (a as f64 + 0.5) * h).collect();
    let i1: Vec<f64> = y
        .iter()
        .map(|&ya| h * y.iter().map(|&yb| model.eval((ya - yb).abs())).sum::<f64>())
        .collect();
    let i2 = h * i1.iter().sum::<f64>();
    let cov1 = |a: usize, b: usize| -> f64 {
        model.eval((y[a] - y[b]).abs()) - (i1[a] + i1[b]) / len_l + i2 / (len_l * len_l)
    };

    // s holds the square integral over [0, x]^2 at cell boundary x = i h;
    // each step adds the new row and column strips plus the corner cell.
    let mut s = 0.0;
    let mut integral_over_x = 0.0;
    for i in 0..n {
        let mut border = cov1(i, i);
        for b in 0..i {
            border += 2.0 * cov1(i, b);
        }
        let s_next = s + h * h * border;
        integral_over_x += 0.5 * h * (s + s_next);
        s = s_next;
    }
    Ok(c0 / (2.0 * len_l) * integral_over_x)
}

/// Least-squares fit of `c(delta) = c0_hat + lin_hat delta + gamma_hat
/// delta^2` over a sweep, plus a remainder-order estimate.
#[derive(Clone, Debug)]
pub struct SweepFit {
    pub c0_hat: f64,
    pub lin_hat: f64,
    pub gamma_hat: f64,
    /// Estimated order of the remainder beyond the quadratic model.
    ///
    /// A least-squares quadratic absorbs every polynomial of degree two,
    /// so pointwise residuals of a smooth remainder alternate in sign
    /// with nearly flat magnitude: their log-log slope against delta
    /// estimates nothing. What does scale is the residual as a whole:
    /// restricting the fit to a window `W` and to `2W`, a remainder
    /// `C delta^p` leaves root-mean-square residuals in exact ratio
    /// `2^p`, because the quadratic projection commutes with scaling
    /// delta. The exponent is `log2(rms(2W) / rms(W))`, and it needs the
    /// sweep to contain at least [`MIN_WINDOW`] exact factor-two pairs.
    pub residual_exponent: f64,
    /// Root-mean-square window residuals behind the exponent.
    pub rms_window: f64,
    pub rms_window_doubled: f64,
    /// Full-sweep residuals, one per input delta.
    pub residuals: Vec<f64>,
}

/// Fewest factor-two delta pairs the remainder-order estimate accepts.
/// Three points determine a quadratic exactly, so anything below four
/// leaves no residual to measure.
pub const MIN_WINDOW: usize = 4;

pub fn fit_quadratic_law(deltas: &[f64], speeds: &[f64]) -> Result<SweepFit> {
    if deltas.len() != speeds.len() {
        return Err(Error::Parameter(format!(
            "{} deltas against {} speeds",
            deltas.len(),
            speeds.len()
        )));
    }
    if deltas.len() < 5 {
        return Err(Error::Parameter(format!(
            "quadratic-law fit needs >= 5 deltas, got {}",
            deltas.len()
        )));
    }
    if deltas.iter().any(|d| !(d.is_finite() && *d > 0.0))
        || speeds.iter().any(|c| !c.is_finite())
    {
        return Err(Error::Parameter("deltas must be positive and all values finite".into()));
    }
    if deltas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("deltas must be strictly increasing".into()));
    }
    let span = deltas[deltas.len() - 1] / deltas[0];
    if span < 8.0 {
        return Err(Error::Parameter(format!(
            "delta sweep must span a factor >= 8, got {span:.2}"
        )));
    }

    let (coef, residuals) = quad_fit(deltas, speeds)?;

    // Exact factor-two pairs, found by relative match so that a sweep
    // built from floating-point doubling qualifies.
    let pairs: Vec<(usize, usize)> = (0..deltas.len())
        .filter_map(|i| {
            deltas
                .iter()
                .position(|d| (d / deltas[i] - 2.0).abs() < 1e-9)
                .map(|j| (i, j))
        })
        .collect();
    if pairs.len() < MIN_WINDOW {
        return Err(Error::Parameter(format!(
            "remainder-order estimate needs >= {MIN_WINDOW} factor-two delta pairs, found {}; \
             extend the sweep with doubled deltas",
            pairs.len()
        )));
    }
    let w1: Vec<f64> = pairs.iter().map(|&(i, _)| deltas[i]).collect();
    let c1: Vec<f64> = pairs.iter().map(|&(i, _)| speeds[i]).collect();
    let w2: Vec<f64> = pairs.iter().map(|&(_, j)| deltas[j]).collect();
    let c2: Vec<f64> = pairs.iter().map(|&(_, j)| speeds[j]).collect();
    let rms_window = rms(&quad_fit(&w1, &c1)?.1);
    let rms_window_doubled = rms(&quad_fit(&w2, &c2)?.1);
    let residual_exponent = if rms_window == 0.0 {
        // Remainder below round-off in the small window: the law holds
        // to this sweep's resolution.
        f64::INFINITY
    } else {
        (rms_window_doubled / rms_window).log2()
    };

    Ok(SweepFit {
        c0_hat: coef[0],
        lin_hat: coef[1],
        gamma_hat: coef[2],
        residual_exponent,
        rms_window,
        rms_window_doubled,
        residuals,
    })
}

/// Degree-two least squares on a delta-normalized design, so the normal
/// matrix stays well conditioned for any admissible sweep.
fn quad_fit(deltas: &[f64], speeds: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let scale = deltas[deltas.len() - 1];
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atb = nalgebra::Vector3::<f64>::zeros();
    for (&d, &c) in deltas.iter().zip(speeds) {
        let t = d / scale;
        let row = nalgebra::Vector3::new(1.0, t, t * t);
        ata += row * row.transpose();
        atb += row * c;
    }
    let coef_t = ata.lu().solve(&atb).ok_or_else(|| {
        Error::Model("quadratic fit is singular: the deltas are numerically collinear".into())
    })?;
    let coef = vec![coef_t[0], coef_t[1] / scale, coef_t[2] / (scale * scale)];
    let residuals = deltas
        .iter()
        .zip(speeds)
        .map(|(&d, &c)| c - (coef[0] + coef[1] * d + coef[2] * d * d))
        .collect();
    Ok((coef, residuals))
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Linear-interpolation quantile of an ascending-sorted slice.
fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    debug_assert!(!v.is_empty());
    let pos = p * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    v[lo] * (1.0 - w) + v[hi] * w
}
