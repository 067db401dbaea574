//! Numbers behind the uncertainty displays.
//!
//! A quantile dotplot with `k` dots places dot `i` at the `(i − ½)/k`
//! quantile, so each dot carries probability `1/k` and tail probabilities
//! can be read by counting. A hypothetical-outcome stream is a batch of
//! independent mechanism draws, one per animation frame.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{private_cis_for_release, BootstrapConfig, ConfidenceInterval};
use crate::laplace::{laplace_mechanism, LaplaceParams, PrivacyBudget, Sensitivity};
use crate::rng::RandomSeed;

pub const DOT_COUNT: usize = 25;
pub const DEFAULT_BIN_COUNT: usize = 40;
/// Animation rate of hypothetical-outcome frames.
pub const HOP_FRAME_RATE: f64 = 2.5;
/// Lower bound on Monte Carlo trials for [`probability_of_superiority`].
pub const MIN_SUPERIORITY_TRIALS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DotBin {
    pub lower: f64,
    pub upper: f64,
    pub dot_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileDotplot {
    pub dots: Vec<f64>,
    pub bins: Vec<DotBin>,
    pub per_dot_probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinProbability {
    pub lower: f64,
    pub upper: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `X ≤ threshold`
    AtMost,
    /// `X > threshold`
    Above,
}

/// The standard 25-dot plot.
pub fn quantile_dotplot(params: &LaplaceParams, bin_count: usize) -> Result<QuantileDotplot> {
    quantile_dotplot_with(params, DOT_COUNT, bin_count)
}

pub fn quantile_dotplot_with(params: &LaplaceParams, dot_count: usize, bin_count: usize) -> Result<QuantileDotplot> {
    if dot_count == 0 {
        return Err(Error::domain("dotplot needs at least one dot"));
    }
    if bin_count == 0 {
        return Err(Error::domain("dotplot needs at least one bin"));
    }
    let k = dot_count as f64;
    let dots = (1..=dot_count)
        .map(|i| params.quantile((i as f64 - 0.5) / k))
        .collect::<Result<Vec<_>>>()?;

    let (lo, hi) = (dots[0], dots[dot_count - 1]);
    let width = (hi - lo) / bin_count as f64;
    let mut bins: Vec<DotBin> = (0..bin_count)
        .map(|j| DotBin {
            lower: lo + width * j as f64,
            upper: if j + 1 == bin_count { hi } else { lo + width * (j + 1) as f64 },
            dot_count: 0,
        })
        .collect();
    for &d in &dots {
        let j = if width > 0.0 {
            (((d - lo) / width).floor() as usize).min(bin_count - 1)
        } else {
            0
        };
        bins[j].dot_count += 1;
    }

    Ok(QuantileDotplot {
        dots,
        bins,
        per_dot_probability: 1.0 / k,
    })
}

impl QuantileDotplot {
    pub fn dot_count(&self) -> usize {
        self.dots.len()
    }

    /// Bin bounds and the probability carried by its dots.
    pub fn bin_probability(&self, index: usize) -> Result<BinProbability> {
        let bin = self.bins.get(index).ok_or_else(|| {
            Error::domain(format!("bin index {index} out of range (0..{})", self.bins.len()))
        })?;
        Ok(BinProbability {
            lower: bin.lower,
            upper: bin.upper,
            probability: bin.dot_count as f64 / self.dots.len() as f64,
        })
    }

    /// Fraction of dots on the requested side of `threshold`.
    pub fn cdf_judgment(&self, threshold: f64, direction: Direction) -> f64 {
        let hits = self
            .dots
            .iter()
            .filter(|&&d| match direction {
                Direction::AtMost => d <= threshold,
                Direction::Above => d > threshold,
            })
            .count();
        hits as f64 / self.dots.len() as f64
    }

    /// Distance between the outermost dots.
    pub fn spread(&self) -> f64 {
        self.dots[self.dots.len() - 1] - self.dots[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopFrame {
    pub index: u64,
    /// A hypothetical noised count.
    pub release_draw: f64,
    /// `release_draw / group_size`.
    pub release_proportion: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub private_cis: Option<Vec<ConfidenceInterval>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopStream {
    pub frames: Vec<HopFrame>,
    pub frame_rate: f64,
    pub seed: RandomSeed,
}

/// What to animate for one subgroup.
#[derive(Debug, Clone, PartialEq)]
pub struct HopSpec {
    pub true_count: f64,
    pub group_size: u64,
    pub sensitivity: Sensitivity,
    pub budget: PrivacyBudget,
    pub extrapolation: bool,
    /// Index of the first frame; later batches continue the same sequence.
    pub first_frame: u64,
    pub frame_count: usize,
}

/// Frames `first_frame..first_frame + frame_count`. Frame `i` draws from its
/// own stream keyed by `(cfg.seed, i)`, so batches are independent of how
/// the sequence is split.
pub fn hop_stream(spec: &HopSpec, cfg: &BootstrapConfig) -> Result<HopStream> {
    if spec.frame_count == 0 {
        return Err(Error::domain("hop stream needs at least one frame"));
    }
    if spec.group_size == 0 {
        return Err(Error::domain("group size must be at least 1"));
    }
    let frames = (spec.first_frame..spec.first_frame + spec.frame_count as u64)
        .map(|index| {
            let mut rng = cfg.seed.derive(&[b"hop".as_slice(), &index.to_le_bytes()]);
            let draw = laplace_mechanism(spec.true_count, spec.sensitivity, spec.budget, &mut rng);
            let proportion = draw.to_proportion(spec.group_size);
            let private_cis = if spec.extrapolation {
                Some(private_cis_for_release(
                    proportion,
                    spec.group_size,
                    spec.sensitivity,
                    spec.budget,
                    cfg,
                    &mut rng,
                )?)
            } else {
                None
            };
            Ok(HopFrame {
                index,
                release_draw: draw.value(),
                release_proportion: proportion.value(),
                private_cis,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HopStream {
        frames,
        frame_rate: HOP_FRAME_RATE,
        seed: cfg.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Superiority {
    pub probability: f64,
    /// Binomial standard error of the estimate, at most `0.5/√trials`.
    pub standard_error: f64,
    pub trials: usize,
}

/// Monte Carlo estimate of `Pr(A > B)` for independent draws.
pub fn probability_of_superiority(
    a: &LaplaceParams,
    b: &LaplaceParams,
    trials: usize,
    seed: RandomSeed,
) -> Result<Superiority> {
    if trials < MIN_SUPERIORITY_TRIALS {
        return Err(Error::domain(format!(
            "need at least {MIN_SUPERIORITY_TRIALS} trials, got {trials}"
        )));
    }
    let mut rng = seed.derive(&["superiority"]);
    let wins = (0..trials).filter(|_| greater(a, b, &mut rng)).count();
    let p = wins as f64 / trials as f64;
    Ok(Superiority {
        probability: p,
        standard_error: (p * (1.0 - p) / trials as f64).sqrt(),
        trials,
    })
}

fn greater<R: Rng>(a: &LaplaceParams, b: &LaplaceParams, rng: &mut R) -> bool {
    let x = a.sample(rng);
    let y = b.sample(rng);
    x > y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lap(mu: f64, b: f64) -> LaplaceParams {
        LaplaceParams::new(mu, b).unwrap()
    }

    #[test]
    fn middle_dot_is_median() {
        let dp = quantile_dotplot(&lap(0.0, 1.0), DEFAULT_BIN_COUNT).unwrap();
        assert_eq!(dp.dots.len(), 25);
        assert_eq!(dp.dots[12], 0.0);
        assert_eq!(dp.per_dot_probability, 0.04);
        assert!(dp.dots.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn bins_partition_dots() {
        let dp = quantile_dotplot(&lap(3.0, 0.5), 7).unwrap();
        assert_eq!(dp.bins.len(), 7);
        assert_eq!(dp.bins.iter().map(|b| b.dot_count).sum::<usize>(), 25);
        for w in dp.bins.windows(2) {
            assert_eq!(w[0].upper, w[1].lower);
        }
        let total: f64 = (0..7).map(|i| dp.bin_probability(i).unwrap().probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(dp.bins[0].lower, dp.dots[0]);
        assert_eq!(dp.bins[6].upper, dp.dots[24]);
    }

    #[test]
    fn bin_probabilities_are_multiples_of_four_percent() {
        let dp = quantile_dotplot(&lap(0.0, 1.0), DEFAULT_BIN_COUNT).unwrap();
        for i in 0..dp.bins.len() {
            let p = dp.bin_probability(i).unwrap().probability;
            assert!(((p / 0.04) - (p / 0.04).round()).abs() < 1e-9);
            if dp.bins[i].dot_count == 0 {
                assert_eq!(p, 0.0);
            }
            if dp.bins[i].dot_count == 5 {
                assert!((p - 0.2).abs() < 1e-12);
            }
        }
        assert!(dp.bin_probability(dp.bins.len()).is_err());
    }

    #[test]
    fn single_bin() {
        let dp = quantile_dotplot(&lap(0.0, 1.0), 1).unwrap();
        assert_eq!(dp.bins[0].dot_count, 25);
        assert!(quantile_dotplot(&lap(0.0, 1.0), 0).is_err());
    }

    #[test]
    fn twenty_dot_tail_reading() {
        // Laplace with scale 2, 20 dots: one dot left of -4
        let dp = quantile_dotplot_with(&lap(0.0, 2.0), 20, DEFAULT_BIN_COUNT).unwrap();
        assert_eq!(dp.cdf_judgment(-4.0, Direction::AtMost), 1.0 / 20.0);
    }

    #[test]
    fn cdf_judgment_examples() {
        let dp = quantile_dotplot(&lap(0.0, 1.0), DEFAULT_BIN_COUNT).unwrap();
        assert_eq!(dp.cdf_judgment(f64::NEG_INFINITY, Direction::AtMost), 0.0);
        assert!((dp.cdf_judgment(dp.dots[12], Direction::AtMost) - 0.52).abs() < 1e-12);

        let p = lap(0.25, 0.08);
        let dp = quantile_dotplot(&p, DEFAULT_BIN_COUNT).unwrap();
        let judged = dp.cdf_judgment(0.30, Direction::Above);
        assert!((judged - (1.0 - p.cdf(0.30))).abs() <= 0.04);
    }

    #[test]
    fn cdf_judgment_monotone() {
        let dp = quantile_dotplot(&lap(1.0, 0.3), DEFAULT_BIN_COUNT).unwrap();
        let mut last = 0.0;
        for i in 0..400 {
            let v = dp.cdf_judgment(-1.0 + i as f64 * 0.01, Direction::AtMost);
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn hop_stream_without_extrapolation_has_no_cis() {
        let spec = HopSpec {
            true_count: 120.0,
            group_size: 400,
            sensitivity: Sensitivity::COUNT,
            budget: PrivacyBudget::new(0.5).unwrap(),
            extrapolation: false,
            first_frame: 0,
            frame_count: 10,
        };
        let s = hop_stream(&spec, &BootstrapConfig::new(RandomSeed(1))).unwrap();
        assert_eq!(s.frames.len(), 10);
        assert_eq!(s.frame_rate, 2.5);
        assert!(s.frames.iter().all(|f| f.private_cis.is_none()));
        let json = serde_json::to_string(&s).unwrap();
        assert!(!json.contains("private_cis"));
    }

    #[test]
    fn hop_stream_with_extrapolation_and_batching() {
        let cfg = BootstrapConfig::new(RandomSeed(2)).with_replicates(100);
        let mut spec = HopSpec {
            true_count: 120.0,
            group_size: 400,
            sensitivity: Sensitivity::COUNT,
            budget: PrivacyBudget::new(0.5).unwrap(),
            extrapolation: true,
            first_frame: 0,
            frame_count: 6,
        };
        let whole = hop_stream(&spec, &cfg).unwrap();
        assert!(whole.frames.iter().all(|f| f.private_cis.as_ref().unwrap().len() == 3));
        assert_eq!(whole, hop_stream(&spec, &cfg).unwrap());
        spec.first_frame = 3;
        spec.frame_count = 3;
        let tail = hop_stream(&spec, &cfg).unwrap();
        assert_eq!(&whole.frames[3..], &tail.frames[..]);
    }

    #[test]
    fn superiority_symmetric_and_separated() {
        let a = lap(1.0, 0.5);
        let s = probability_of_superiority(&a, &a, 40_000, RandomSeed(3)).unwrap();
        assert!((s.probability - 0.5).abs() < 4.0 * 0.5 / 200.0);
        assert!(s.standard_error <= 0.5 / 200.0);
        let far = probability_of_superiority(&lap(100.0, 1e-3), &lap(0.0, 1e-3), 10_000, RandomSeed(3)).unwrap();
        assert_eq!(far.probability, 1.0);
        assert!(probability_of_superiority(&a, &a, 9_999, RandomSeed(3)).is_err());
    }

    #[test]
    fn superiority_matches_closed_form() {
        // For equal scales b and gap d ≥ 0: Pr(A > B) = 1 − ¼(2 + d/b)·e^(−d/b).
        let (a, b) = (lap(0.3, 0.02), lap(0.25, 0.02));
        let s = probability_of_superiority(&a, &b, 200_000, RandomSeed(11)).unwrap();
        assert!((s.probability - 0.907_654_376_548_113_9).abs() < 0.01);
    }
}
