//! Disclosure risk of a released ε.
//!
//! The adversary knows all `n` records and starts from a uniform prior over
//! which record is absent from the computation. After seeing an ε-DP output
//! their probability of guessing correctly is at most
//!
//! ```text
//! 1 / (1 + (n - 1) · exp(-ε / Δf))
//! ```
//!
//! which is `1/n` at ε → 0 and approaches 1 as ε grows. Several queries over
//! the same database compose sequentially, so the overall point uses the sum
//! of their budgets.

use serde::{Deserialize, Serialize};

use crate::budget::{SLIDER_MAX, SLIDER_MIN};
use crate::error::{Error, Result};
use crate::laplace::{PrivacyBudget, Sensitivity};

/// Number of points in [`default_grid`].
pub const DEFAULT_GRID_POINTS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskPoint {
    pub epsilon: f64,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCurve {
    pub n: u64,
    pub delta_f: f64,
    pub points: Vec<RiskPoint>,
}

pub fn disclosure_risk(budget: PrivacyBudget, n: u64, sens: Sensitivity) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(format!(
            "disclosure risk needs at least 2 records, got {n}"
        )));
    }
    let decay = (-budget.epsilon() / sens.delta_f()).exp();
    Ok(1.0 / (1.0 + (n - 1) as f64 * decay))
}

pub fn risk_point(budget: PrivacyBudget, n: u64, sens: Sensitivity) -> Result<RiskPoint> {
    Ok(RiskPoint {
        epsilon: budget.epsilon(),
        risk: disclosure_risk(budget, n, sens)?,
    })
}

/// `points` log-spaced values over the slider range, endpoints exact.
pub fn log_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![SLIDER_MIN],
        _ => {
            let (lo, hi) = (SLIDER_MIN.ln(), SLIDER_MAX.ln());
            let step = (hi - lo) / (points - 1) as f64;
            let mut grid: Vec<f64> = (0..points).map(|i| (lo + step * i as f64).exp()).collect();
            grid[0] = SLIDER_MIN;
            grid[points - 1] = SLIDER_MAX;
            grid
        }
    }
}

/// The 500-point log-spaced grid used for plotting.
pub fn default_grid() -> Vec<f64> {
    log_grid(DEFAULT_GRID_POINTS)
}

pub fn risk_curve(grid: &[f64], n: u64, sens: Sensitivity) -> Result<RiskCurve> {
    if grid.is_empty() {
        return Err(Error::domain("risk grid is empty"));
    }
    for (i, &eps) in grid.iter().enumerate() {
        if !(SLIDER_MIN..=SLIDER_MAX).contains(&eps) {
            return Err(Error::domain(format!(
                "grid value {eps} outside [{SLIDER_MIN}, {SLIDER_MAX}]"
            )));
        }
        if i > 0 && eps <= grid[i - 1] {
            return Err(Error::domain("risk grid must be strictly increasing"));
        }
    }
    let points = grid
        .iter()
        .map(|&eps| risk_point(PrivacyBudget::new(eps)?, n, sens))
        .collect::<Result<Vec<_>>>()?;
    Ok(RiskCurve {
        n,
        delta_f: sens.delta_f(),
        points,
    })
}

/// Risk after releasing every query, evaluated at `Σ ε_i`.
pub fn overall_risk(budgets: &[PrivacyBudget], n: u64, sens: Sensitivity) -> Result<RiskPoint> {
    if budgets.is_empty() {
        return Err(Error::domain("overall risk needs at least one query budget"));
    }
    let total: f64 = budgets.iter().map(|b| b.epsilon()).sum();
    risk_point(PrivacyBudget::new(total)?, n, sens)
}
