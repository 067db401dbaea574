//! Laplace distribution and the Laplace mechanism.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Privacy-loss parameter ε. Any positive value is accepted here, including
/// `+∞` (the zero-noise limit); slider bounds live in [`crate::budget`].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PrivacyBudget(f64);

impl PrivacyBudget {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 {
            Ok(PrivacyBudget(epsilon))
        } else {
            Err(Error::domain(format!("epsilon must be positive, got {epsilon}")))
        }
    }

    pub fn epsilon(self) -> f64 {
        self.0
    }

    /// Laplace scale Δf/ε. Zero when ε is infinite.
    pub fn noise_scale(self, sens: Sensitivity) -> f64 {
        sens.delta_f() / self.0
    }
}

impl TryFrom<f64> for PrivacyBudget {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        PrivacyBudget::new(v)
    }
}

impl From<PrivacyBudget> for f64 {
    fn from(b: PrivacyBudget) -> f64 {
        b.0
    }
}

/// l1-sensitivity Δf of the released statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Sensitivity(f64);

impl Sensitivity {
    /// Adding or removing one record moves a COUNT by at most one.
    pub const COUNT: Sensitivity = Sensitivity(1.0);

    pub fn new(delta_f: f64) -> Result<Self> {
        if delta_f > 0.0 && delta_f.is_finite() {
            Ok(Sensitivity(delta_f))
        } else {
            Err(Error::domain(format!(
                "sensitivity must be positive and finite, got {delta_f}"
            )))
        }
    }

    pub fn delta_f(self) -> f64 {
        self.0
    }
}

impl Default for Sensitivity {
    fn default() -> Self {
        Sensitivity::COUNT
    }
}

impl TryFrom<f64> for Sensitivity {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Sensitivity::new(v)
    }
}

impl From<Sensitivity> for f64 {
    fn from(s: Sensitivity) -> f64 {
        s.0
    }
}

/// Laplace(μ, b) with density `exp(-|x-μ|/b) / 2b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceParams {
    location: f64,
    scale: f64,
}

impl LaplaceParams {
    pub fn new(location: f64, scale: f64) -> Result<Self> {
        if !location.is_finite() {
            return Err(Error::domain(format!("location must be finite, got {location}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::domain(format!(
                "scale must be positive and finite, got {scale}"
            )));
        }
        Ok(LaplaceParams { location, scale })
    }

    /// Output distribution of the Laplace mechanism applied to `true_value`.
    /// Fails for infinite ε, where the output is a point mass.
    pub fn for_mechanism(true_value: f64, sens: Sensitivity, budget: PrivacyBudget) -> Result<Self> {
        LaplaceParams::new(true_value, budget.noise_scale(sens))
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn variance(&self) -> f64 {
        2.0 * self.scale * self.scale
    }

    /// The same distribution after dividing the variable by `divisor`.
    pub fn rescaled(&self, divisor: f64) -> Result<Self> {
        LaplaceParams::new(self.location / divisor, self.scale / divisor)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        (-(x - self.location).abs() / self.scale).exp() / (2.0 * self.scale)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        if z < 0.0 {
            0.5 * z.exp()
        } else {
            1.0 - 0.5 * (-z).exp()
        }
    }

    /// Inverse CDF on the open interval (0, 1).
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!("quantile probability must lie in (0, 1), got {q}")));
        }
        Ok(self.quantile_unchecked(q))
    }

    // 2q and 2(1-q) are formed directly rather than as 1-2|q-1/2| so the
    // tails keep full relative precision.
    fn quantile_unchecked(&self, q: f64) -> f64 {
        if q < 0.5 {
            self.location + self.scale * (2.0 * q).ln()
        } else {
            self.location - self.scale * (2.0 * (1.0 - q)).ln()
        }
    }

    /// Half-width `e` with `Pr(|X - μ| <= e) = coverage`, i.e. `b·ln(1/(1-coverage))`.
    pub fn error_bound(&self, coverage: f64) -> Result<f64> {
        if !(coverage > 0.0 && coverage < 1.0) {
            return Err(Error::domain(format!("coverage must lie in (0, 1), got {coverage}")));
        }
        Ok(-self.scale * (1.0 - coverage).ln())
    }

    /// One draw by inverse-CDF transform of an open-interval uniform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        self.quantile_unchecked(u)
    }
}

/// Zero-mean Laplace noise at scale `Δf/ε`; exactly zero when ε is infinite.
pub fn laplace_noise<R: Rng + ?Sized>(sens: Sensitivity, budget: PrivacyBudget, rng: &mut R) -> f64 {
    let scale = budget.noise_scale(sens);
    if scale == 0.0 {
        return 0.0;
    }
    LaplaceParams { location: 0.0, scale }.sample(rng)
}

/// Output of a DP mechanism, or a deterministic function of one.
///
/// Confidence-interval routines only accept this type, so an exact query
/// result cannot be passed to them by accident.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Noised(f64);

impl Noised {
    /// Wrap a value that was already published under DP, e.g. read back from a
    /// release document.
    pub fn from_published(value: f64) -> Self {
        Noised(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Divide by a public group size. Post-processing keeps the value private.
    pub fn to_proportion(self, group_size: u64) -> Noised {
        Noised(self.0 / group_size as f64)
    }
}

/// `true_value + Lap(0, Δf/ε)`.
pub fn laplace_mechanism<R: Rng + ?Sized>(
    true_value: f64,
    sens: Sensitivity,
    budget: PrivacyBudget,
    rng: &mut R,
) -> Noised {
    Noised(true_value + laplace_noise(sens, budget, rng))
}
