//! Curator sessions and the finalized release.
//!
//! A [`Session`] holds the exact results of the registered queries, the
//! current budget allocation and a master seed. What-if payloads are pure
//! reads: they simulate hypothetical releases but never touch the release
//! streams or the budget. [`Session::finalize`] draws exactly one Laplace
//! release per (query, subgroup) at that query's ε and freezes the document;
//! later calls return the stored copy.
//!
//! Exploring many ε values before finalizing is itself a leak that this
//! accounting does not charge for. The curator is trusted with it.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::budget::{AllocationState, ClampNotice, Mode, SLIDER_MAX, SLIDER_MIN};
use crate::error::{Error, Result};
use crate::inference::{
    binomial_cis, private_ci_preview, private_cis_for_release, BootstrapConfig, ConfidenceInterval,
    DEFAULT_REPLICATES,
};
use crate::laplace::{laplace_mechanism, LaplaceParams, PrivacyBudget, Sensitivity};
use crate::plan::PREVIEW_TRIALS;
use crate::query::{execute, metadata, Dataset, Metadata, QueryResult, QuerySpec, Subgroup};
use crate::risk::{default_grid, overall_risk, risk_curve, risk_point, RiskCurve, RiskPoint};
use crate::rng::RandomSeed;
use crate::viz::{hop_stream, quantile_dotplot, HopSpec, HopStream, QuantileDotplot, DEFAULT_BIN_COUNT};

/// Version stamped on every JSON payload and document.
pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_HOP_FRAMES: usize = 25;
pub const MAX_HOP_FRAMES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPlan {
    pub spec: QuerySpec,
    pub metadata: Metadata,
    pub result: QueryResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    id: String,
    dataset_id: String,
    dataset_n: u64,
    sensitivity: Sensitivity,
    queries: Vec<QueryPlan>,
    allocation: AllocationState,
    seed: RandomSeed,
    replicates: usize,
    release: Option<ReleaseDocument>,
    release_draws: u64,
}

/// Curator-facing snapshot of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub schema_version: u32,
    pub id: String,
    pub dataset_id: String,
    pub dataset_n: u64,
    pub finalized: bool,
    pub allocation: AllocationState,
    pub remaining_budget: f64,
    pub queries: Vec<QueryPlan>,
}

fn default_frames() -> usize {
    DEFAULT_HOP_FRAMES
}

fn default_bins() -> usize {
    DEFAULT_BIN_COUNT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfRequest {
    pub query: String,
    pub epsilon: f64,
    #[serde(default = "default_frames")]
    pub frames: usize,
    /// Selects frames `batch·frames ..`; the client asks for the next batch
    /// when it runs out.
    #[serde(default)]
    pub batch: u64,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

impl WhatIfRequest {
    pub fn new(query: impl Into<String>, epsilon: f64) -> Self {
        WhatIfRequest {
            query: query.into(),
            epsilon,
            frames: DEFAULT_HOP_FRAMES,
            batch: 0,
            bins: DEFAULT_BIN_COUNT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupWhatIf {
    pub label: String,
    /// Exact result, for the curator's reference line.
    pub query_result: Subgroup,
    /// Output distribution of the noised count.
    pub release_distribution: LaplaceParams,
    /// Quantile dotplot of the noised proportion.
    pub dotplot: QuantileDotplot,
    pub hops: HopStream,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonprivate_cis: Option<Vec<ConfidenceInterval>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub private_ci_preview: Option<Vec<ConfidenceInterval>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfPayload {
    pub schema_version: u32,
    pub query: String,
    pub epsilon: f64,
    pub extrapolation: bool,
    pub subgroups: Vec<SubgroupWhatIf>,
    pub risk_point: RiskPoint,
    /// Overall risk with this query moved to `epsilon`.
    pub overall_risk: RiskPoint,
    pub risk_curve: RiskCurve,
    /// Remaining budget with this query moved to `epsilon`.
    pub remaining_budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum BudgetMutation {
    SetEpsilon { query: String, value: f64 },
    ToggleLock { query: String },
    SetMode { mode: Mode },
    SetTotal { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetUpdate {
    pub schema_version: u32,
    pub allocation: AllocationState,
    pub remaining_budget: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notice: Option<ClampNotice>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRisk {
    pub query: String,
    pub point: RiskPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSummary {
    pub schema_version: u32,
    pub curve: RiskCurve,
    pub queries: Vec<QueryRisk>,
    pub overall: RiskPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleasedSubgroup {
    pub label: String,
    pub noised_count: f64,
    pub noised_proportion: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub private_cis: Option<Vec<ConfidenceInterval>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleasedQuery {
    pub name: String,
    pub epsilon_spent: f64,
    pub extrapolation: bool,
    pub subgroups: Vec<ReleasedSubgroup>,
}

/// The only artifact handed to data consumers. Holds no exact results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseDocument {
    pub schema_version: u32,
    pub session_id: String,
    pub dataset_id: String,
    pub created_at: DateTime<Utc>,
    pub seed_fingerprint: String,
    pub epsilon_spent: f64,
    pub overall_risk: RiskPoint,
    pub queries: Vec<ReleasedQuery>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finalized {
    pub schema_version: u32,
    /// True when the session was already finalized and the stored document
    /// was returned unchanged.
    pub idempotent_replay: bool,
    pub document: ReleaseDocument,
}

impl Session {
    pub fn create(
        id: impl Into<String>,
        dataset_id: impl Into<String>,
        ds: &Dataset,
        specs: Vec<QuerySpec>,
        total_budget: f64,
        seed: RandomSeed,
    ) -> Result<Session> {
        if specs.is_empty() {
            return Err(Error::validation("queries", "at least one query is required"));
        }
        if ds.len() < 2 {
            return Err(Error::validation("dataset", "disclosure risk needs at least 2 records"));
        }
        let mut queries = Vec::with_capacity(specs.len());
        for (i, spec) in specs.into_iter().enumerate() {
            let path = format!("queries[{i}]");
            if queries.iter().any(|p: &QueryPlan| p.spec.name == spec.name) {
                return Err(Error::validation(
                    format!("{path}.name"),
                    format!("duplicate query name `{}`", spec.name),
                ));
            }
            let result = execute(ds, &spec).map_err(|e| e.within(&path))?;
            let metadata = metadata(ds, &spec).map_err(|e| e.within(&path))?;
            queries.push(QueryPlan { spec, metadata, result });
        }
        let allocation = AllocationState::new(queries.iter().map(|q| q.spec.name.clone()), total_budget)?;
        Ok(Session {
            id: id.into(),
            dataset_id: dataset_id.into(),
            dataset_n: ds.len() as u64,
            sensitivity: Sensitivity::COUNT,
            queries,
            allocation,
            seed,
            replicates: DEFAULT_REPLICATES,
            release: None,
            release_draws: 0,
        })
    }

    /// Override the bootstrap replicate count (default 500).
    pub fn with_replicates(mut self, replicates: usize) -> Result<Session> {
        if replicates < 2 {
            return Err(Error::validation("replicates", "must be at least 2"));
        }
        self.replicates = replicates;
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    pub fn dataset_n(&self) -> u64 {
        self.dataset_n
    }

    pub fn seed(&self) -> RandomSeed {
        self.seed
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn allocation(&self) -> &AllocationState {
        &self.allocation
    }

    pub fn queries(&self) -> &[QueryPlan] {
        &self.queries
    }

    pub fn is_finalized(&self) -> bool {
        self.release.is_some()
    }

    /// Laplace draws spent on the release over the session's lifetime.
    pub fn release_draw_count(&self) -> u64 {
        self.release_draws
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            schema_version: SCHEMA_VERSION,
            id: self.id.clone(),
            dataset_id: self.dataset_id.clone(),
            dataset_n: self.dataset_n,
            finalized: self.is_finalized(),
            allocation: self.allocation.clone(),
            remaining_budget: self.allocation.remaining_budget(),
            queries: self.queries.clone(),
        }
    }

    fn plan(&self, name: &str) -> Result<&QueryPlan> {
        self.queries
            .iter()
            .find(|q| q.spec.name == name)
            .ok_or_else(|| Error::UnknownQuery(name.to_owned()))
    }

    fn budgets_with(&self, query: &str, epsilon: f64) -> Result<Vec<PrivacyBudget>> {
        self.allocation
            .queries
            .iter()
            .map(|q| PrivacyBudget::new(if q.query == query { epsilon } else { q.epsilon }))
            .collect()
    }

    /// Everything the query panel needs to preview `req.epsilon`. Read-only.
    pub fn whatif(&self, req: &WhatIfRequest) -> Result<WhatIfPayload> {
        if self.is_finalized() {
            return Err(Error::Finalized);
        }
        let plan = self.plan(&req.query)?;
        if !(SLIDER_MIN..=SLIDER_MAX).contains(&req.epsilon) {
            return Err(Error::validation(
                "epsilon",
                format!("{} is outside [{SLIDER_MIN}, {SLIDER_MAX}]", req.epsilon),
            ));
        }
        if req.frames == 0 || req.frames > MAX_HOP_FRAMES {
            return Err(Error::validation("frames", format!("must lie in 1..={MAX_HOP_FRAMES}")));
        }
        if req.bins == 0 {
            return Err(Error::validation("bins", "must be at least 1"));
        }
        let budget = PrivacyBudget::new(req.epsilon)?;
        let sens = self.sensitivity;
        let extrapolation = plan.spec.extrapolation;

        let subgroups = plan
            .result
            .subgroups
            .iter()
            .map(|sg| {
                let seed = self.seed.child(&[
                    b"whatif".as_slice(),
                    plan.spec.name.as_bytes(),
                    sg.label.as_bytes(),
                    &req.epsilon.to_le_bytes(),
                ]);
                let cfg = BootstrapConfig::new(seed).with_replicates(self.replicates);
                let dist = LaplaceParams::for_mechanism(sg.count as f64, sens, budget)?;
                let dotplot = quantile_dotplot(&dist.rescaled(sg.group_size as f64)?, req.bins)?;
                let hops = hop_stream(
                    &HopSpec {
                        true_count: sg.count as f64,
                        group_size: sg.group_size,
                        sensitivity: sens,
                        budget,
                        extrapolation,
                        first_frame: req.batch.saturating_mul(req.frames as u64),
                        frame_count: req.frames,
                    },
                    &cfg,
                )?;
                let (nonprivate_cis, preview) = if extrapolation {
                    (
                        Some(binomial_cis(sg.proportion, sg.group_size, &cfg.levels)?),
                        Some(private_ci_preview(sg.count as f64, sg.group_size, sens, budget, &cfg, PREVIEW_TRIALS)?),
                    )
                } else {
                    (None, None)
                };
                Ok(SubgroupWhatIf {
                    label: sg.label.clone(),
                    query_result: sg.clone(),
                    release_distribution: dist,
                    dotplot,
                    hops,
                    nonprivate_cis,
                    private_ci_preview: preview,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let budgets = self.budgets_with(&req.query, req.epsilon)?;
        let spent: f64 = budgets.iter().map(|b| b.epsilon()).sum();
        Ok(WhatIfPayload {
            schema_version: SCHEMA_VERSION,
            query: req.query.clone(),
            epsilon: req.epsilon,
            extrapolation,
            subgroups,
            risk_point: risk_point(budget, self.dataset_n, sens)?,
            overall_risk: overall_risk(&budgets, self.dataset_n, sens)?,
            risk_curve: risk_curve(&default_grid(), self.dataset_n, sens)?,
            remaining_budget: self.allocation.total_budget - spent,
        })
    }

    pub fn risk_summary(&self) -> Result<RiskSummary> {
        let sens = self.sensitivity;
        let mut queries = Vec::new();
        let mut budgets = Vec::new();
        for q in &self.allocation.queries {
            let b = PrivacyBudget::new(q.epsilon)?;
            budgets.push(b);
            queries.push(QueryRisk {
                query: q.query.clone(),
                point: risk_point(b, self.dataset_n, sens)?,
            });
        }
        Ok(RiskSummary {
            schema_version: SCHEMA_VERSION,
            curve: risk_curve(&default_grid(), self.dataset_n, sens)?,
            queries,
            overall: overall_risk(&budgets, self.dataset_n, sens)?,
        })
    }

    pub fn update_budget(&mut self, mutation: &BudgetMutation) -> Result<BudgetUpdate> {
        if self.is_finalized() {
            return Err(Error::Finalized);
        }
        let (next, notice, iterations) = match mutation {
            BudgetMutation::SetEpsilon { query, value } => {
                let out = self.allocation.set_epsilon(query, *value)?;
                (out.state, out.notice, out.iterations)
            }
            BudgetMutation::ToggleLock { query } => (self.allocation.toggle_lock(query)?, None, 0),
            BudgetMutation::SetMode { mode } => (self.allocation.set_mode(*mode), None, 0),
            BudgetMutation::SetTotal { value } => (self.allocation.set_total(*value)?, None, 0),
        };
        self.allocation = next;
        Ok(BudgetUpdate {
            schema_version: SCHEMA_VERSION,
            remaining_budget: self.allocation.remaining_budget(),
            allocation: self.allocation.clone(),
            notice,
            iterations,
        })
    }

    /// Spend the budget and produce the release. Idempotent.
    pub fn finalize(&mut self, created_at: DateTime<Utc>) -> Result<Finalized> {
        if let Some(doc) = &self.release {
            return Ok(Finalized {
                schema_version: SCHEMA_VERSION,
                idempotent_replay: true,
                document: doc.clone(),
            });
        }
        let sens = self.sensitivity;
        let mut released = Vec::with_capacity(self.queries.len());
        let mut budgets = Vec::with_capacity(self.queries.len());
        let mut draws = 0u64;
        for plan in &self.queries {
            let name = &plan.spec.name;
            let eps = self
                .allocation
                .epsilon(name)
                .ok_or_else(|| Error::UnknownQuery(name.clone()))?;
            let budget = PrivacyBudget::new(eps)?;
            budgets.push(budget);
            let mut subgroups = Vec::with_capacity(plan.result.subgroups.len());
            // every subgroup is a disjoint slice of the data, so each gets the full query ε
            for sg in &plan.result.subgroups {
                let mut rng = self.seed.derive(&["release", name.as_str(), sg.label.as_str()]);
                let noised = laplace_mechanism(sg.count as f64, sens, budget, &mut rng);
                draws += 1;
                let proportion = noised.to_proportion(sg.group_size);
                let private_cis = if plan.spec.extrapolation {
                    let cfg = BootstrapConfig::new(self.seed.child(&["release-ci", name.as_str(), sg.label.as_str()]))
                        .with_replicates(self.replicates);
                    let mut ci_rng = cfg.seed.derive(&["bootstrap"]);
                    Some(private_cis_for_release(proportion, sg.group_size, sens, budget, &cfg, &mut ci_rng)?)
                } else {
                    None
                };
                subgroups.push(ReleasedSubgroup {
                    label: sg.label.clone(),
                    noised_count: noised.value(),
                    noised_proportion: proportion.value(),
                    private_cis,
                });
            }
            released.push(ReleasedQuery {
                name: name.clone(),
                epsilon_spent: eps,
                extrapolation: plan.spec.extrapolation,
                subgroups,
            });
        }
        let overall = overall_risk(&budgets, self.dataset_n, sens)?;
        let doc = ReleaseDocument {
            schema_version: SCHEMA_VERSION,
            session_id: self.id.clone(),
            dataset_id: self.dataset_id.clone(),
            created_at,
            seed_fingerprint: self.seed.fingerprint(),
            epsilon_spent: budgets.iter().map(|b| b.epsilon()).sum(),
            overall_risk: overall,
            queries: released,
        };
        self.release_draws += draws;
        self.release = Some(doc.clone());
        Ok(Finalized {
            schema_version: SCHEMA_VERSION,
            idempotent_replay: false,
            document: doc,
        })
    }

    pub fn release(&self) -> Result<&ReleaseDocument> {
        self.release.as_ref().ok_or(Error::NotFinalized)
    }

    /// Reinstate a previously persisted release without drawing again.
    pub fn restore_release(&mut self, doc: ReleaseDocument) -> Result<()> {
        if self.release.is_some() {
            return Err(Error::Finalized);
        }
        if doc.session_id != self.id {
            return Err(Error::State(format!(
                "document belongs to session `{}`, not `{}`",
                doc.session_id, self.id
            )));
        }
        self.release = Some(doc);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::{ingest_csv, Comparator, Schema, Value};

    fn dataset() -> Dataset {
        let schema = Schema::from_json(
            r#"{"eth": {"type": "categorical"}, "htn": {"type": "boolean", "is_phi": true}}"#,
        )
        .unwrap();
        let mut csv = String::from("eth,htn\n");
        for i in 0..300 {
            let eth = ["A", "B", "C"][i % 3];
            csv.push_str(&format!("{eth},{}\n", i % 7 == 0 || i % 5 == 0));
        }
        ingest_csv(csv.as_bytes(), &schema, "unit").unwrap()
    }

    fn specs() -> Vec<QuerySpec> {
        vec![
            QuerySpec::count("eth")
                .group_by("eth")
                .filter("htn", Comparator::Eq, Value::Bool(true))
                .extrapolate(),
            QuerySpec::count("total"),
        ]
    }

    fn session() -> Session {
        Session::create("s1", "d1", &dataset(), specs(), 2.0, RandomSeed(42))
            .unwrap()
            .with_replicates(50)
            .unwrap()
    }

    fn t0() -> DateTime<Utc> {
        DateTime::from_timestamp(1_700_000_000, 0).unwrap()
    }

    #[test]
    fn defaults_after_create() {
        let s = session();
        assert_eq!(s.allocation().mode, Mode::Manual);
        assert!((s.view().remaining_budget - 1.998).abs() < 1e-12);
        assert!(!s.is_finalized());
        assert_eq!(s.queries()[0].result.subgroups.len(), 3);
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = Session::create("s", "d", &dataset(), vec![QuerySpec::count("a"), QuerySpec::count("a")], 1.0, RandomSeed(1))
            .unwrap_err();
        assert!(matches!(err, Error::Validation { ref field_path, .. } if field_path == "queries[1].name"));
        let err = Session::create("s", "d", &dataset(), vec![QuerySpec::count("a").group_by("zip")], 1.0, RandomSeed(1))
            .unwrap_err();
        assert!(matches!(err, Error::Validation { ref field_path, .. } if field_path == "queries[0].group_by"));
    }

    #[test]
    fn whatif_is_deterministic_and_pure() {
        let s = session();
        let before = s.clone();
        let req = WhatIfRequest { frames: 3, ..WhatIfRequest::new("eth", 0.4) };
        let a = s.whatif(&req).unwrap();
        let b = s.whatif(&req).unwrap();
        assert_eq!(a, b);
        assert_eq!(s, before);
        assert_eq!(a.subgroups.len(), 3);
        assert_eq!(a.risk_curve.points.len(), 500);
    }

    #[test]
    fn whatif_omits_cis_without_extrapolation() {
        let p = session().whatif(&WhatIfRequest { frames: 2, ..WhatIfRequest::new("total", 0.4) }).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert!(!json.contains("_cis"));
        assert!(!json.contains("ci_preview"));
        let p = session().whatif(&WhatIfRequest { frames: 2, ..WhatIfRequest::new("eth", 0.4) }).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("nonprivate_cis") && json.contains("private_ci_preview"));
    }

    #[test]
    fn whatif_epsilon_doubling() {
        let s = session();
        let lo = s.whatif(&WhatIfRequest { frames: 1, ..WhatIfRequest::new("eth", 0.3) }).unwrap();
        let hi = s.whatif(&WhatIfRequest { frames: 1, ..WhatIfRequest::new("eth", 0.6) }).unwrap();
        assert!(hi.risk_point.risk > lo.risk_point.risk);
        for (a, b) in lo.subgroups.iter().zip(&hi.subgroups) {
            assert!(b.dotplot.spread() < a.dotplot.spread());
        }
    }

    #[test]
    fn whatif_errors() {
        let s = session();
        assert!(matches!(s.whatif(&WhatIfRequest::new("nope", 0.3)), Err(Error::UnknownQuery(_))));
        assert!(matches!(s.whatif(&WhatIfRequest::new("eth", 3.0)), Err(Error::Validation { .. })));
    }

    #[test]
    fn budget_mutations_delegate() {
        let mut s = session();
        s.update_budget(&BudgetMutation::SetMode { mode: Mode::Responsive }).unwrap();
        let u = s
            .update_budget(&BudgetMutation::SetEpsilon { query: "eth".into(), value: 1.4 })
            .unwrap();
        assert!((u.allocation.epsilon("total").unwrap() - 0.6).abs() < 1e-12);
        assert!(u.remaining_budget.abs() < 1e-12);
        assert!(s.update_budget(&BudgetMutation::ToggleLock { query: "x".into() }).is_err());
    }

    #[test]
    fn finalize_once() {
        let mut s = session();
        s.update_budget(&BudgetMutation::SetEpsilon { query: "eth".into(), value: 0.5 }).unwrap();
        let first = s.finalize(t0()).unwrap();
        assert!(!first.idempotent_replay);
        assert_eq!(s.release_draw_count(), 4);
        let again = s.finalize(Utc::now()).unwrap();
        assert!(again.idempotent_replay);
        assert_eq!(
            serde_json::to_vec(&first.document).unwrap(),
            serde_json::to_vec(&again.document).unwrap()
        );
        assert_eq!(s.release_draw_count(), 4);
        assert!(matches!(
            s.update_budget(&BudgetMutation::SetTotal { value: 1.0 }),
            Err(Error::Finalized)
        ));
        assert!(matches!(s.whatif(&WhatIfRequest::new("eth", 0.3)), Err(Error::Finalized)));
    }

    #[test]
    fn release_contents() {
        let mut s = session();
        s.update_budget(&BudgetMutation::SetEpsilon { query: "eth".into(), value: 0.5 }).unwrap();
        s.update_budget(&BudgetMutation::SetEpsilon { query: "total".into(), value: 0.25 }).unwrap();
        let doc = s.finalize(t0()).unwrap().document;
        assert_eq!(doc.queries[0].epsilon_spent, 0.5);
        assert_eq!(doc.queries[0].subgroups.len(), 3);
        assert!(doc.queries[0].subgroups.iter().all(|g| g.private_cis.as_ref().unwrap().len() == 3));
        assert!(doc.queries[1].subgroups[0].private_cis.is_none());
        assert_eq!(doc.epsilon_spent, 0.75);
        assert_eq!(
            doc.overall_risk,
            overall_risk(
                &[PrivacyBudget::new(0.5).unwrap(), PrivacyBudget::new(0.25).unwrap()],
                300,
                Sensitivity::COUNT
            )
            .unwrap()
        );
        let json = serde_json::to_string(&doc).unwrap();
        assert!(!json.contains("\"count\""));
        assert!(!json.contains("group_size"));
    }

    #[test]
    fn release_requires_finalize() {
        let s = session();
        assert!(matches!(s.release(), Err(Error::NotFinalized)));
    }

    #[test]
    fn restore_release_round_trip() {
        let mut s = session();
        let doc = s.finalize(t0()).unwrap().document;
        let mut fresh = session();
        fresh.restore_release(doc.clone()).unwrap();
        assert_eq!(fresh.release().unwrap(), &doc);
        assert_eq!(fresh.release_draw_count(), 0);
        assert!(fresh.restore_release(doc).is_err());
    }

    #[test]
    fn mutation_json() {
        let m: BudgetMutation = serde_json::from_str(r#"{"op": "set_epsilon", "query": "q", "value": 0.2}"#).unwrap();
        assert_eq!(m, BudgetMutation::SetEpsilon { query: "q".into(), value: 0.2 });
        let m: BudgetMutation = serde_json::from_str(r#"{"op": "set_mode", "mode": "responsive"}"#).unwrap();
        assert_eq!(m, BudgetMutation::SetMode { mode: Mode::Responsive });
    }
}
