//! One-document TOML configuration. Section names mirror the solver types
//! they feed; every key has a default so a missing section simply means
//! "use the reference setup". Unknown keys are hard errors, so a typo in
//! an experiment file fails loudly instead of silently running defaults.

use serde::{Deserialize, Serialize};
use shearfront::shear::{kl_decompose, sample_field};
use shearfront::{
    CovarianceModel, CrossGrid, Error, KlBasis, Nonlinearity, Route, Scheme, ShearSample, SimGrid,
};

type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reaction: Option<ReactionSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub front: Option<FrontSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shear: Option<ShearSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross: Option<CrossSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub large_delta: Option<LargeDeltaSection>,
}

pub fn parse_doc(text: &str, origin: &str) -> Result<ConfigDoc> {
    toml::from_str(text).map_err(|e| Error::Parameter(format!("config {origin}: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionKind {
    Bistable,
    Combustion,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReactionSection {
    pub kind: ReactionKind,
    pub mu: f64,
    /// Combustion rate prefactor; ignored by the bistable kind.
    pub amplitude: f64,
}

impl Default for ReactionSection {
    fn default() -> Self {
        Self { kind: ReactionKind::Bistable, mu: 0.25, amplitude: 1.0 }
    }
}

impl ReactionSection {
    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        match self.kind {
            ReactionKind::Bistable => Nonlinearity::bistable(self.mu),
            ReactionKind::Combustion => Nonlinearity::combustion(self.mu, self.amplitude),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontSection {
    pub half_width: f64,
    pub n_nodes: usize,
}

impl Default for FrontSection {
    fn default() -> Self {
        Self { half_width: 30.0, n_nodes: 4097 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShearKind {
    Zero,
    Cosine,
    OrnsteinUhlenbeck,
    SquaredExponential,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShearSection {
    pub kind: ShearKind,
    /// Peak value of the deterministic cosine profile.
    pub amplitude: f64,
    pub sigma2: f64,
    pub corr_len: f64,
    pub kl_modes: usize,
}

impl Default for ShearSection {
    fn default() -> Self {
        Self {
            kind: ShearKind::Cosine,
            amplitude: 1.0,
            sigma2: 1.0,
            corr_len: 1.0,
            kl_modes: 16,
        }
    }
}

impl ShearSection {
    /// The covariance model, or None for the deterministic kinds.
    pub fn covariance(&self) -> Result<Option<CovarianceModel>> {
        match self.kind {
            ShearKind::Zero | ShearKind::Cosine => Ok(None),
            ShearKind::OrnsteinUhlenbeck => {
                CovarianceModel::ornstein_uhlenbeck(self.sigma2, self.corr_len).map(Some)
            }
            ShearKind::SquaredExponential => {
                CovarianceModel::squared_exponential(self.sigma2, self.corr_len).map(Some)
            }
        }
    }

    /// One shear profile on the cross grid: exact values for the
    /// deterministic kinds, a fresh draw at `seed` for the random ones.
    /// The basis is returned alongside so callers can report truncation.
    pub fn build_sample(
        &self,
        cross: &CrossSection,
        seed: u64,
    ) -> Result<(ShearSample, Option<KlBasis>)> {
        let grid = cross.grid()?;
        match self.kind {
            ShearKind::Zero => {
                let sample =
                    ShearSample::from_values(grid.clone(), &vec![0.0; grid.total_nodes()])?;
                Ok((sample, None))
            }
            ShearKind::Cosine => {
                let vals = cosine_values(&grid, self.amplitude);
                Ok((ShearSample::from_values(grid, &vals)?, None))
            }
            ShearKind::OrnsteinUhlenbeck | ShearKind::SquaredExponential => {
                let model = self.covariance()?.expect("random kind has a model");
                let basis = kl_decompose(model, &grid, self.kl_modes)?;
                let sample = sample_field(&basis, seed);
                Ok((sample, Some(basis)))
            }
        }
    }
}

/// Lowest nonconstant Neumann mode per axis, `cos(pi y / L)` tensored
/// across the cross dimensions and scaled to `amplitude`.
fn cosine_values(grid: &CrossGrid, amplitude: f64) -> Vec<f64> {
    let l = grid.width();
    (0..grid.total_nodes())
        .map(|k| {
            let c = grid.coords(k);
            let mut v = amplitude * (std::f64::consts::PI * c[0] / l).cos();
            if grid.dim() == 2 {
                v *= (std::f64::consts::PI * c[1] / l).cos();
            }
            v
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossSection {
    pub dim: usize,
    pub nodes: usize,
    pub len: f64,
}

impl Default for CrossSection {
    fn default() -> Self {
        Self { dim: 1, nodes: 33, len: 1.0 }
    }
}

impl CrossSection {
    pub fn grid(&self) -> Result<CrossGrid> {
        CrossGrid::new(self.dim, self.nodes, self.len)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSection {
    /// Shear strength for the single-sample commands (`bounds`, `direct`).
    pub delta: f64,
    pub x1_half_width: f64,
    pub x1_nodes: usize,
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self { delta: 0.1, x1_half_width: 15.0, x1_nodes: 513 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Explicit,
    Imex,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub half_width: f64,
    pub h1: f64,
    pub dt: f64,
    pub t_final: f64,
    pub scheme: SchemeKind,
}

impl Default for SimSection {
    fn default() -> Self {
        Self { half_width: 25.0, h1: 0.1, dt: 0.02, t_final: 40.0, scheme: SchemeKind::Imex }
    }
}

impl SimSection {
    pub fn scheme(&self) -> Scheme {
        match self.scheme {
            SchemeKind::Explicit => Scheme::ExplicitEulerUpwind,
            SchemeKind::Imex => Scheme::Imex,
        }
    }

    pub fn sim_grid(&self, cross: CrossGrid) -> Result<SimGrid> {
        SimGrid::new(self.half_width, self.h1, cross, self.dt, self.t_final, self.scheme())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub deltas: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        // Geometric ladder: every point has its double in the list, which
        // the remainder-order estimator needs; the plain pinned list
        // {0.025, 0.05, 0.1, 0.15, 0.2} only contains three such pairs.
        let r = std::f64::consts::SQRT_2;
        Self { deltas: vec![0.025, 0.025 * r, 0.05, 0.05 * r, 0.1, 0.1 * r, 0.15, 0.2] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteKind {
    AsymptoticOnly,
    WithBounds,
    WithDirect,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub n_samples: usize,
    pub delta: f64,
    pub q: f64,
    pub kappa: f64,
    pub epsilon_target: f64,
    pub route: RouteKind,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            n_samples: 64,
            delta: 0.05,
            q: 0.5,
            kappa: 1.0,
            epsilon_target: 0.05,
            route: RouteKind::WithBounds,
        }
    }
}

impl EnsembleSection {
    pub fn route(&self) -> Route {
        match self.route {
            RouteKind::AsymptoticOnly => Route::AsymptoticOnly,
            RouteKind::WithBounds => Route::WithBounds,
            RouteKind::WithDirect => Route::WithDirect,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LargeDeltaSection {
    pub deltas: Vec<f64>,
}

impl Default for LargeDeltaSection {
    fn default() -> Self {
        Self { deltas: vec![2.0, 4.0, 8.0, 16.0, 32.0] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_resolves_to_reference_defaults() {
        let doc = parse_doc("", "inline").unwrap();
        assert!(doc.reaction.is_none());
        let r = doc.reaction.unwrap_or_default();
        assert_eq!(r.kind, ReactionKind::Bistable);
        assert_eq!(r.mu, 0.25);
    }

    #[test]
    fn partial_sections_keep_defaults_for_missing_keys() {
        let doc = parse_doc("[reaction]\nmu = 0.4\n", "inline").unwrap();
        let r = doc.reaction.unwrap();
        assert_eq!(r.mu, 0.4);
        assert_eq!(r.kind, ReactionKind::Bistable, "unset keys fall back to defaults");
    }

    #[test]
    fn unknown_keys_are_hard_errors() {
        let err = parse_doc("[reaction]\nmuu = 0.4\n", "inline").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("muu"), "error should name the offending key: {msg}");
        let err = parse_doc("[reactoin]\nmu = 0.4\n", "inline").unwrap_err();
        assert!(err.to_string().contains("reactoin"), "typoed section must be rejected");
    }

    #[test]
    fn cosine_sample_has_zero_mean_and_unit_peak_scale() {
        let shear = ShearSection { kind: ShearKind::Cosine, ..Default::default() };
        let cross = CrossSection { dim: 2, nodes: 16, len: 1.0 };
        let (sample, basis) = shear.build_sample(&cross, 0).unwrap();
        assert!(basis.is_none(), "deterministic kinds carry no modal basis");
        assert!(
            sample.mean.abs() < 1e-14,
            "midpoint grid makes the cosine mean vanish exactly, got {}",
            sample.mean
        );
        assert!(sample.sup_norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn random_kinds_draw_reproducibly_from_the_seed() {
        let shear = ShearSection { kind: ShearKind::OrnsteinUhlenbeck, ..Default::default() };
        let cross = CrossSection::default();
        let (a, basis) = shear.build_sample(&cross, 42).unwrap();
        let (b, _) = shear.build_sample(&cross, 42).unwrap();
        assert_eq!(a.values, b.values, "same seed must reproduce the draw bitwise");
        assert_eq!(basis.unwrap().m, 16);
    }

    #[test]
    fn sweep_default_contains_the_pinned_deltas_and_doubling_pairs() {
        let sweep = SweepSection::default();
        for pinned in [0.025, 0.05, 0.1, 0.15, 0.2] {
            assert!(
                sweep.deltas.iter().any(|&d| (d - pinned).abs() < 1e-12),
                "default sweep must include {pinned}"
            );
        }
        let pairs = sweep
            .deltas
            .iter()
            .filter(|&&d| sweep.deltas.iter().any(|&e| (e / d - 2.0).abs() < 1e-9))
            .count();
        assert!(pairs >= 4, "need four doubling pairs for the remainder probe, got {pairs}");
    }
}
