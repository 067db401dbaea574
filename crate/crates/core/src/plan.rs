//! Tabular what-if sweeps over an ε grid.

use serde::{Deserialize, Serialize};

use crate::budget::{SLIDER_MAX, SLIDER_MIN};
use crate::error::{Error, Result};
use crate::inference::{binomial_ci, private_ci_preview, BootstrapConfig, CiLevel};
use crate::laplace::{LaplaceParams, PrivacyBudget, Sensitivity};
use crate::query::{execute, Dataset, QuerySpec};
use crate::risk::disclosure_risk;
use crate::rng::RandomSeed;

/// Coverage of the reported release error bound.
pub const ERROR_BOUND_COVERAGE: f64 = 0.95;
/// Hypothetical releases averaged into each private CI width preview.
pub const PREVIEW_TRIALS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Table,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub grid: Vec<f64>,
    pub queries: Vec<QuerySpec>,
    #[serde(default)]
    pub format: OutputFormat,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::validation("grid", "epsilon grid is empty"));
        }
        for (i, &e) in self.grid.iter().enumerate() {
            if !(SLIDER_MIN..=SLIDER_MAX).contains(&e) {
                return Err(Error::validation(
                    format!("grid[{i}]"),
                    format!("{e} is outside [{SLIDER_MIN}, {SLIDER_MAX}]"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub query: String,
    pub subgroup: String,
    pub group_size: u64,
    pub epsilon: f64,
    /// Disclosure risk if only this query is released at `epsilon`.
    pub risk: f64,
    /// `e` with `Pr(|noise| ≤ e) = 0.95`, in counts.
    pub error_bound_count: f64,
    /// The same bound divided by the group size.
    pub error_bound_proportion: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonprivate_ci95_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub private_ci95_width: Option<f64>,
}

/// One row per (query, subgroup, ε). CI columns are filled for queries with
/// extrapolation on.
pub fn sweep(ds: &Dataset, spec: &SweepSpec, sens: Sensitivity, seed: RandomSeed) -> Result<Vec<PlanRow>> {
    spec.validate()?;
    let n = ds.len() as u64;
    let mut rows = Vec::new();
    for (qi, q) in spec.queries.iter().enumerate() {
        let result = execute(ds, q).map_err(|e| e.within(&format!("queries[{qi}]")))?;
        for &eps in &spec.grid {
            let budget = PrivacyBudget::new(eps)?;
            let risk = disclosure_risk(budget, n, sens)?;
            for sg in &result.subgroups {
                let noise = LaplaceParams::for_mechanism(sg.count as f64, sens, budget)?;
                let bound = noise.error_bound(ERROR_BOUND_COVERAGE)?;
                let (np, pv) = if q.extrapolation {
                    let np = binomial_ci(sg.proportion, sg.group_size, CiLevel::P95.alpha())?;
                    let cfg = BootstrapConfig {
                        levels: vec![CiLevel::P95],
                        ..BootstrapConfig::new(seed.child(&[
                            q.name.as_bytes(),
                            sg.label.as_bytes(),
                            &eps.to_le_bytes(),
                        ]))
                    };
                    let pv = private_ci_preview(sg.count as f64, sg.group_size, sens, budget, &cfg, PREVIEW_TRIALS)?;
                    (Some(np.width()), Some(pv[0].width()))
                } else {
                    (None, None)
                };
                rows.push(PlanRow {
                    query: q.name.clone(),
                    subgroup: sg.label.clone(),
                    group_size: sg.group_size,
                    epsilon: eps,
                    risk,
                    error_bound_count: bound,
                    error_bound_proportion: bound / sg.group_size as f64,
                    nonprivate_ci95_width: np,
                    private_ci95_width: pv,
                });
            }
        }
    }
    Ok(rows)
}

/// Fixed-width text rendering of [`sweep`] output.
pub fn render_table(rows: &[PlanRow]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |w| format!("{w:.4}"));
    let mut out = format!(
        "{:<16} {:<16} {:>8} {:>8} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
        "query", "subgroup", "N", "epsilon", "risk", "err95", "err95_p", "ci95", "pci95"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<16} {:<16} {:>8} {:>8.3} {:>10.6} {:>10.4} {:>10.6} {:>10} {:>10}\n",
            r.query,
            r.subgroup,
            r.group_size,
            r.epsilon,
            r.risk,
            r.error_bound_count,
            r.error_bound_proportion,
            opt(r.nonprivate_ci95_width),
            opt(r.private_ci95_width),
        ));
    }
    out
}
