//! Seeded synthetic patient cohorts with known ground truth.
//!
//! The generator tallies every marginal while it writes rows, so tests and
//! demos can compare query output against counts that never went through
//! the query engine.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::query::{ColumnSpec, ColumnType, Schema};
use crate::rng::RandomSeed;

pub const ETHNICITIES: [(&str, f64); 4] = [("white", 0.55), ("hispanic", 0.2), ("black", 0.15), ("asian", 0.1)];
pub const DIAGNOSES: [(&str, f64); 4] = [("hypertension", 0.3), ("diabetes", 0.15), ("asthma", 0.1), ("none", 0.45)];
pub const SEXES: [(&str, f64); 2] = [("female", 0.52), ("male", 0.48)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortTruth {
    pub n: u64,
    /// Column → value → row count, for the categorical and boolean columns.
    pub marginals: BTreeMap<String, BTreeMap<String, u64>>,
    /// Hypertension rows per ethnicity.
    pub hypertension_by_ethnicity: BTreeMap<String, u64>,
    /// Rows with `age >= 65`.
    pub seniors: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub csv: String,
    pub schema: Schema,
    pub truth: CohortTruth,
}

impl Cohort {
    pub fn schema_json(&self) -> String {
        serde_json::to_string_pretty(&self.schema).expect("schema serializes")
    }
}

pub fn cohort_schema() -> Schema {
    let col = |kind, is_phi, is_identifier| ColumnSpec {
        kind,
        is_phi,
        is_identifier,
    };
    Schema {
        columns: BTreeMap::from([
            ("patient_id".to_owned(), col(ColumnType::Integer, true, true)),
            ("age".to_owned(), col(ColumnType::Integer, false, false)),
            ("sex".to_owned(), col(ColumnType::Categorical, false, false)),
            ("ethnicity".to_owned(), col(ColumnType::Categorical, false, false)),
            ("diagnosis".to_owned(), col(ColumnType::Categorical, true, false)),
            ("smoker".to_owned(), col(ColumnType::Boolean, true, false)),
        ]),
    }
}

fn pick<R: Rng>(rng: &mut R, table: &[(&'static str, f64)]) -> &'static str {
    let mut u: f64 = rng.random();
    for &(label, w) in table {
        if u < w {
            return label;
        }
        u -= w;
    }
    table[table.len() - 1].0
}

/// `rows` patients. Identical `(rows, seed)` give byte-identical output.
pub fn synthetic_cohort(rows: usize, seed: RandomSeed) -> Cohort {
    let mut rng = seed.derive(&["cohort"]);
    let mut csv = String::from("patient_id,age,sex,ethnicity,diagnosis,smoker\n");
    let mut marginals: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    let mut hypertension_by_ethnicity: BTreeMap<String, u64> =
        ETHNICITIES.iter().map(|&(e, _)| (e.to_owned(), 0)).collect();
    let mut seniors = 0;
    for id in 0..rows {
        let age: u32 = rng.random_range(18..=90);
        let sex = pick(&mut rng, &SEXES);
        let eth = pick(&mut rng, &ETHNICITIES);
        let dx = pick(&mut rng, &DIAGNOSES);
        let smoker = rng.random_bool(0.18);
        csv.push_str(&format!("{},{age},{sex},{eth},{dx},{smoker}\n", 100_000 + id));
        for (col, val) in [("sex", sex), ("ethnicity", eth), ("diagnosis", dx)] {
            *marginals.entry(col.into()).or_default().entry(val.into()).or_default() += 1;
        }
        *marginals
            .entry("smoker".into())
            .or_default()
            .entry(smoker.to_string())
            .or_default() += 1;
        if dx == "hypertension" {
            *hypertension_by_ethnicity.get_mut(eth).expect("known ethnicity") += 1;
        }
        if age >= 65 {
            seniors += 1;
        }
    }
    Cohort {
        csv,
        schema: cohort_schema(),
        truth: CohortTruth {
            n: rows as u64,
            marginals,
            hypertension_by_ethnicity,
            seniors,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for table in [&ETHNICITIES[..], &DIAGNOSES[..], &SEXES[..]] {
            let s: f64 = table.iter().map(|t| t.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_and_tallied() {
        let a = synthetic_cohort(500, RandomSeed(3));
        assert_eq!(a, synthetic_cohort(500, RandomSeed(3)));
        assert_ne!(a.csv, synthetic_cohort(500, RandomSeed(4)).csv);
        assert_eq!(a.csv.lines().count(), 501);
        for counts in a.truth.marginals.values() {
            assert_eq!(counts.values().sum::<u64>(), 500);
        }
        let htn: u64 = a.truth.hypertension_by_ethnicity.values().sum();
        assert_eq!(htn, a.truth.marginals["diagnosis"]["hypertension"]);
    }
}
