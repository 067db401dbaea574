//! Confidence intervals for a subgroup proportion.
//!
//! [`binomial_ci`] is the ordinary normal-approximation interval on the exact
//! proportion. The private interval comes from a parametric bootstrap run
//! entirely on an already-noised release:
//!
//! 1. `θ̂ = p + Lap(Δf / (Nε))`
//! 2. for each of `B` replicates draw `k ~ Binom(N, clamp(θ̂, 0, 1))` and
//!    record `θ̃ = k/N + Lap(Δf / (Nε))`
//! 3. take the `α/2` and `1 − α/2` empirical quantiles of the replicates.
//!
//! Noise is calibrated on counts (scale `Δf/ε`) and divided by `N`, so the
//! proportion-space scale is `Δf / (Nε)`. Because the input is a DP output,
//! the whole procedure is post-processing and spends no budget.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::laplace::{laplace_noise, Noised, PrivacyBudget, Sensitivity};
use crate::rng::{DpRng, RandomSeed};

/// Replicate count used by the planner.
pub const DEFAULT_REPLICATES: usize = 500;

/// The three interval levels drawn as nested gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CiLevel {
    #[serde(rename = "0.50")]
    P50,
    #[serde(rename = "0.80")]
    P80,
    #[serde(rename = "0.95")]
    P95,
}

impl CiLevel {
    pub const ALL: [CiLevel; 3] = [CiLevel::P50, CiLevel::P80, CiLevel::P95];

    pub fn level(self) -> f64 {
        match self {
            CiLevel::P50 => 0.50,
            CiLevel::P80 => 0.80,
            CiLevel::P95 => 0.95,
        }
    }

    pub fn alpha(self) -> f64 {
        match self {
            CiLevel::P50 => 0.50,
            CiLevel::P80 => 0.20,
            CiLevel::P95 => 0.05,
        }
    }

    pub fn z(self) -> f64 {
        match self {
            CiLevel::P50 => 0.674_490,
            CiLevel::P80 => 1.281_552,
            CiLevel::P95 => 1.959_964,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl ConfidenceInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, other: &ConfidenceInterval) -> bool {
        self.lower <= other.lower && other.upper <= self.upper
    }

    fn clamped(lower: f64, upper: f64, level: f64) -> Self {
        ConfidenceInterval {
            lower: lower.clamp(0.0, 1.0),
            upper: upper.clamp(0.0, 1.0),
            level,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub levels: Vec<CiLevel>,
    pub seed: RandomSeed,
}

impl BootstrapConfig {
    pub fn new(seed: RandomSeed) -> Self {
        BootstrapConfig {
            replicates: DEFAULT_REPLICATES,
            levels: CiLevel::ALL.to_vec(),
            seed,
        }
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    fn check(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::domain(format!(
                "bootstrap needs at least 2 replicates, got {}",
                self.replicates
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSet {
    pub values: Vec<f64>,
    pub source_epsilon: f64,
    pub source_n: u64,
}

impl ReplicateSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn std_dev(&self) -> f64 {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        let ss: f64 = self.values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1.0)).sqrt()
    }
}

/// Two-sided critical value `z_{α/2}`. The planner's three levels use the
/// pinned six-digit constants; other α go through the normal quantile.
pub fn z_critical(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if let Some(level) = CiLevel::ALL.iter().find(|l| l.alpha() == alpha) {
        return Ok(level.z());
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(1.0 - alpha / 2.0))
}

/// `p̂ ∓ z·√(p̂(1−p̂)/N)`, clamped to [0, 1].
pub fn binomial_ci(p_hat: f64, n: u64, alpha: f64) -> Result<ConfidenceInterval> {
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(Error::domain(format!("proportion must lie in [0, 1], got {p_hat}")));
    }
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let z = z_critical(alpha)?;
    let half = z * (p_hat * (1.0 - p_hat) / n as f64).sqrt();
    Ok(ConfidenceInterval::clamped(p_hat - half, p_hat + half, 1.0 - alpha))
}

/// Bootstrap replicates for a noised proportion, seeded from `cfg.seed`.
pub fn bootstrap_replicates(
    p: Noised,
    n: u64,
    sens: Sensitivity,
    budget: PrivacyBudget,
    cfg: &BootstrapConfig,
) -> Result<ReplicateSet> {
    let mut rng = cfg.seed.derive(&["bootstrap"]);
    bootstrap_replicates_with(p, n, sens, budget, cfg.replicates, &mut rng)
}

/// As [`bootstrap_replicates`] but drawing from a caller-owned stream.
pub fn bootstrap_replicates_with<R: Rng + ?Sized>(
    p: Noised,
    n: u64,
    sens: Sensitivity,
    budget: PrivacyBudget,
    replicates: usize,
    rng: &mut R,
) -> Result<ReplicateSet> {
    if replicates < 2 {
        return Err(Error::domain(format!(
            "bootstrap needs at least 2 replicates, got {replicates}"
        )));
    }
    if n == 0 {
        return Err(Error::domain("group size must be at least 1"));
    }
    let nf = n as f64;
    let noise = |rng: &mut R| laplace_noise(sens, budget, rng) / nf;

    let theta_hat = p.value() + noise(rng);
    let plug_in = if theta_hat.is_nan() { 0.0 } else { theta_hat.clamp(0.0, 1.0) };
    let binom = Binomial::new(n, plug_in).map_err(|e| Error::domain(e.to_string()))?;

    let values = (0..replicates)
        .map(|_| binom.sample(rng) as f64 / nf + noise(rng))
        .collect();
    Ok(ReplicateSet {
        values,
        source_epsilon: budget.epsilon(),
        source_n: n,
    })
}

/// Linear interpolation between order statistics (Hyndman–Fan type 7).
/// `sorted` must be ascending and nonempty.
pub fn empirical_quantile(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted_values(reps: &ReplicateSet) -> Vec<f64> {
    let mut v = reps.values.clone();
    v.sort_by(f64::total_cmp);
    v
}

fn ci_from_sorted(sorted: &[f64], alpha: f64) -> ConfidenceInterval {
    ConfidenceInterval::clamped(
        empirical_quantile(sorted, alpha / 2.0),
        empirical_quantile(sorted, 1.0 - alpha / 2.0),
        1.0 - alpha,
    )
}

pub fn private_ci(reps: &ReplicateSet, alpha: f64) -> Result<ConfidenceInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if reps.is_empty() {
        return Err(Error::domain("replicate set is empty"));
    }
    Ok(ci_from_sorted(&sorted_values(reps), alpha))
}

/// One interval per level, sorting the replicates once.
pub fn private_cis(reps: &ReplicateSet, levels: &[CiLevel]) -> Result<Vec<ConfidenceInterval>> {
    if reps.is_empty() {
        return Err(Error::domain("replicate set is empty"));
    }
    let sorted = sorted_values(reps);
    Ok(levels.iter().map(|l| ci_from_sorted(&sorted, l.alpha())).collect())
}

pub fn binomial_cis(p_hat: f64, n: u64, levels: &[CiLevel]) -> Result<Vec<ConfidenceInterval>> {
    levels.iter().map(|l| binomial_ci(p_hat, n, l.alpha())).collect()
}

/// Bootstrap a noised proportion and return its intervals at `cfg.levels`,
/// drawing from `rng`.
pub(crate) fn private_cis_for_release(
    release: Noised,
    n: u64,
    sens: Sensitivity,
    budget: PrivacyBudget,
    cfg: &BootstrapConfig,
    rng: &mut DpRng,
) -> Result<Vec<ConfidenceInterval>> {
    cfg.check()?;
    let reps = bootstrap_replicates_with(release, n, sens, budget, cfg.replicates, rng)?;
    private_cis(&reps, &cfg.levels)
}

/// Expected private intervals at `budget`: the bounds of `trials`
/// hypothetical releases of `true_count`, each bootstrapped, averaged per level.
///
/// This is a planning aid. Each bootstrap still only sees a simulated
/// mechanism output, never `true_count` itself.
pub fn private_ci_preview(
    true_count: f64,
    n: u64,
    sens: Sensitivity,
    budget: PrivacyBudget,
    cfg: &BootstrapConfig,
    trials: usize,
) -> Result<Vec<ConfidenceInterval>> {
    if trials == 0 {
        return Err(Error::domain("preview needs at least one trial"));
    }
    cfg.check()?;
    let mut lower = vec![0.0; cfg.levels.len()];
    let mut upper = vec![0.0; cfg.levels.len()];
    for t in 0..trials as u64 {
        let mut rng = cfg.seed.derive(&[b"preview".as_slice(), &t.to_le_bytes()]);
        let release = crate::laplace::laplace_mechanism(true_count, sens, budget, &mut rng).to_proportion(n);
        let cis = private_cis_for_release(release, n, sens, budget, cfg, &mut rng)?;
        for (i, ci) in cis.iter().enumerate() {
            lower[i] += ci.lower;
            upper[i] += ci.upper;
        }
    }
    let k = trials as f64;
    Ok(cfg
        .levels
        .iter()
        .enumerate()
        .map(|(i, l)| ConfidenceInterval {
            lower: lower[i] / k,
            upper: upper[i] / k,
            level: l.level(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps(v: f64) -> PrivacyBudget {
        PrivacyBudget::new(v).unwrap()
    }

    fn reps(values: Vec<f64>) -> ReplicateSet {
        ReplicateSet {
            values,
            source_epsilon: 1.0,
            source_n: 1,
        }
    }

    #[test]
    fn binomial_ci_reference() {
        let ci = binomial_ci(0.5, 100, 0.05).unwrap();
        // 0.5 ∓ 1.959964 · 0.05
        assert!((ci.lower - 0.402_001_8).abs() < 1e-12);
        assert!((ci.upper - 0.597_998_2).abs() < 1e-12);
        assert_eq!(ci.level, 0.95);
    }

    #[test]
    fn binomial_ci_degenerate_and_clamped() {
        let ci = binomial_ci(0.0, 37, 0.05).unwrap();
        assert_eq!((ci.lower, ci.upper), (0.0, 0.0));
        let ci = binomial_ci(0.02, 10, 0.05).unwrap();
        assert_eq!(ci.lower, 0.0);
        assert!(ci.upper <= 1.0);
        assert!(binomial_ci(1.2, 10, 0.05).is_err());
        assert!(binomial_ci(0.5, 0, 0.05).is_err());
        assert!(binomial_ci(0.5, 10, 1.0).is_err());
    }

    #[test]
    fn binomial_ci_nesting_and_shrinkage() {
        let narrow = binomial_ci(0.3, 200, 0.5).unwrap();
        let wide = binomial_ci(0.3, 200, 0.05).unwrap();
        assert!(wide.lower < narrow.lower && narrow.upper < wide.upper);
        let big = binomial_ci(0.3, 20_000, 0.05).unwrap();
        assert!(big.width() < wide.width());
    }

    #[test]
    fn z_values() {
        assert_eq!(z_critical(0.05).unwrap(), 1.959_964);
        assert_eq!(z_critical(0.2).unwrap(), 1.281_552);
        assert_eq!(z_critical(0.5).unwrap(), 0.674_490);
        // general alpha falls back to the normal quantile
        assert!((z_critical(0.01).unwrap() - 2.575_829_303_548_901).abs() < 1e-8);
    }

    #[test]
    fn type7_quantiles() {
        let sorted = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(empirical_quantile(&sorted, 0.0), 1.0);
        assert_eq!(empirical_quantile(&sorted, 1.0), 4.0);
        assert_eq!(empirical_quantile(&sorted, 0.5), 2.5);
        assert!((empirical_quantile(&sorted, 0.25) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn private_ci_uniform_grid() {
        let r = reps((1..=500).map(|i| i as f64 / 500.0).collect());
        let ci = private_ci(&r, 0.05).unwrap();
        // type 7: 0.026 + 0.475·0.002 and 0.974 + 0.525·0.002
        assert!((ci.lower - 0.026_95).abs() < 1e-12);
        assert!((ci.upper - 0.975_05).abs() < 1e-12);
        assert!((ci.lower - 0.025).abs() < 1.0 / 500.0);
        assert!((ci.upper - 0.975).abs() < 1.0 / 500.0);
    }

    #[test]
    fn private_ci_constant_set() {
        let ci = private_ci(&reps(vec![0.4; 50]), 0.05).unwrap();
        assert_eq!((ci.lower, ci.upper), (0.4, 0.4));
    }

    #[test]
    fn private_ci_clamps() {
        let ci = private_ci(&reps(vec![-0.3, -0.1, 0.2, 1.4]), 0.05).unwrap();
        assert_eq!(ci.lower, 0.0);
        assert_eq!(ci.upper, 1.0);
    }

    #[test]
    fn private_cis_nest() {
        let cfg = BootstrapConfig::new(RandomSeed(9));
        let r = bootstrap_replicates(Noised::from_published(0.31), 800, Sensitivity::COUNT, eps(0.3), &cfg).unwrap();
        let cis = private_cis(&r, &CiLevel::ALL).unwrap();
        assert!(cis[1].contains(&cis[0]));
        assert!(cis[2].contains(&cis[1]));
    }

    #[test]
    fn replicate_count_and_determinism() {
        let cfg = BootstrapConfig::new(RandomSeed(4));
        let p = Noised::from_published(0.2);
        let a = bootstrap_replicates(p, 300, Sensitivity::COUNT, eps(1.0), &cfg).unwrap();
        let b = bootstrap_replicates(p, 300, Sensitivity::COUNT, eps(1.0), &cfg).unwrap();
        assert_eq!(a.len(), 500);
        assert_eq!(a, b);
        assert_eq!(a.source_n, 300);
    }

    #[test]
    fn too_few_replicates() {
        let cfg = BootstrapConfig::new(RandomSeed(4)).with_replicates(1);
        let p = Noised::from_published(0.2);
        assert!(bootstrap_replicates(p, 300, Sensitivity::COUNT, eps(1.0), &cfg).is_err());
    }

    #[test]
    fn noise_free_limit_concentrates() {
        let cfg = BootstrapConfig::new(RandomSeed(5));
        let p = Noised::from_published(0.3);
        let r = bootstrap_replicates(p, 10_000_000, Sensitivity::COUNT, eps(f64::INFINITY), &cfg).unwrap();
        assert!(r.values.iter().all(|v| (v - 0.3).abs() < 1e-3));
    }

    #[test]
    fn out_of_range_release_is_clamped_for_binomial() {
        let cfg = BootstrapConfig::new(RandomSeed(6)).with_replicates(50);
        for p in [-0.4, 1.7] {
            let r = bootstrap_replicates(Noised::from_published(p), 100, Sensitivity::COUNT, eps(0.5), &cfg);
            assert_eq!(r.unwrap().len(), 50);
        }
    }
}
