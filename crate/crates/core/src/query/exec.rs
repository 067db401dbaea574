use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Schema, Value};
use crate::error::{Error, Result};

/// Label of the single subgroup produced when there is no `GROUP BY`.
pub const ALL_LABEL: &str = "all";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Aggregate {
    #[default]
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=", alias = "≠", alias = "<>")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=", alias = "≤")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=", alias = "≥")]
    Ge,
}

impl Comparator {
    fn holds(self, ord: Ordering) -> bool {
        match self {
            Comparator::Eq => ord == Ordering::Equal,
            Comparator::Ne => ord != Ordering::Equal,
            Comparator::Lt => ord == Ordering::Less,
            Comparator::Le => ord != Ordering::Greater,
            Comparator::Gt => ord == Ordering::Greater,
            Comparator::Ge => ord != Ordering::Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub attribute: String,
    pub comparator: Comparator,
    pub literal: Value,
}

/// `SELECT COUNT([DISTINCT] *) [GROUP BY attr] [WHERE attr op literal]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub name: String,
    #[serde(default)]
    pub aggregate: Aggregate,
    #[serde(default)]
    pub distinct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_by: Option<String>,
    #[serde(default, rename = "where", skip_serializing_if = "Option::is_none")]
    pub filter: Option<Predicate>,
    /// The data are a sample and the curator wants inference on the population.
    #[serde(default)]
    pub extrapolation: bool,
}

impl QuerySpec {
    pub fn count(name: impl Into<String>) -> Self {
        QuerySpec {
            name: name.into(),
            aggregate: Aggregate::Count,
            distinct: false,
            group_by: None,
            filter: None,
            extrapolation: false,
        }
    }

    pub fn group_by(mut self, attribute: impl Into<String>) -> Self {
        self.group_by = Some(attribute.into());
        self
    }

    pub fn filter(mut self, attribute: impl Into<String>, comparator: Comparator, literal: Value) -> Self {
        self.filter = Some(Predicate {
            attribute: attribute.into(),
            comparator,
            literal,
        });
        self
    }

    pub fn distinct(mut self) -> Self {
        self.distinct = true;
        self
    }

    pub fn extrapolate(mut self) -> Self {
        self.extrapolation = true;
        self
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::validation("name", "query name must not be empty"));
        }
        if let Some(attr) = &self.group_by {
            if schema.get(attr).is_none() {
                return Err(Error::validation("group_by", format!("unknown attribute `{attr}`")));
            }
        }
        if let Some(pred) = &self.filter {
            let Some(col) = schema.get(&pred.attribute) else {
                return Err(Error::validation(
                    "where.attribute",
                    format!("unknown attribute `{}`", pred.attribute),
                ));
            };
            if pred.literal.kind() != col.kind {
                return Err(Error::validation(
                    "where.literal",
                    format!("`{}` is {}, literal is {}", pred.attribute, col.kind, pred.literal.kind()),
                ));
            }
        }
        if self.distinct && schema.identifier().is_none() {
            return Err(Error::validation(
                "distinct",
                "DISTINCT needs a schema column marked is_identifier",
            ));
        }
        Ok(())
    }

    /// Attributes the query reads, in clause order, without duplicates.
    pub fn attributes<'a>(&'a self, schema: &'a Schema) -> Vec<&'a str> {
        let mut out: Vec<&str> = Vec::new();
        let distinct_col = if self.distinct { schema.identifier() } else { None };
        let candidates = [
            distinct_col,
            self.group_by.as_deref(),
            self.filter.as_ref().map(|p| p.attribute.as_str()),
        ];
        for a in candidates.into_iter().flatten() {
            if !out.contains(&a) {
                out.push(a);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subgroup {
    pub label: String,
    /// Exact filtered count f(D) for this subgroup.
    pub count: u64,
    /// Subgroup size N before the WHERE filter.
    pub group_size: u64,
    /// `count / group_size`.
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query: String,
    pub dataset_n: u64,
    pub subgroups: Vec<Subgroup>,
}

impl QueryResult {
    pub fn subgroup(&self, label: &str) -> Option<&Subgroup> {
        self.subgroups.iter().find(|s| s.label == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupRecords {
    pub label: String,
    pub records: u64,
}

/// Public facts about a query, shown before any budget is spent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub data_source: String,
    pub cohort_size: u64,
    pub subgroups: Vec<SubgroupRecords>,
    pub sensitive_variables: Vec<String>,
}

struct Tally<'a> {
    rows: u64,
    hits: u64,
    ids: HashSet<&'a Value>,
    hit_ids: HashSet<&'a Value>,
}

/// Run `q` over `ds`. Subgroups are sorted by descending size, then label.
pub fn execute(ds: &Dataset, q: &QuerySpec) -> Result<QueryResult> {
    q.validate(ds.schema())?;
    let col = |name: &str| ds.column_index(name).expect("validated against schema");
    let group_idx = q.group_by.as_deref().map(col);
    let filter = q.filter.as_ref().map(|p| (col(&p.attribute), p));
    let id_idx = if q.distinct { ds.schema().identifier().map(col) } else { None };

    let mut groups: BTreeMap<String, Tally> = BTreeMap::new();
    for row in ds.rows() {
        let label = match group_idx {
            Some(i) => row[i].to_string(),
            None => ALL_LABEL.to_owned(),
        };
        let hit = match filter {
            Some((i, p)) => row[i]
                .compare(&p.literal)
                .is_some_and(|ord| p.comparator.holds(ord)),
            None => true,
        };
        let t = groups.entry(label).or_insert_with(|| Tally {
            rows: 0,
            hits: 0,
            ids: HashSet::new(),
            hit_ids: HashSet::new(),
        });
        t.rows += 1;
        if hit {
            t.hits += 1;
        }
        if let Some(i) = id_idx {
            t.ids.insert(&row[i]);
            if hit {
                t.hit_ids.insert(&row[i]);
            }
        }
    }
    if groups.is_empty() {
        return Err(Error::EmptyResult(q.name.clone()));
    }

    let mut subgroups: Vec<Subgroup> = groups
        .into_iter()
        .map(|(label, t)| {
            let (count, group_size) = if id_idx.is_some() {
                (t.hit_ids.len() as u64, t.ids.len() as u64)
            } else {
                (t.hits, t.rows)
            };
            Subgroup {
                label,
                count,
                group_size,
                proportion: count as f64 / group_size as f64,
            }
        })
        .collect();
    subgroups.sort_by(|a, b| b.group_size.cmp(&a.group_size).then_with(|| a.label.cmp(&b.label)));

    Ok(QueryResult {
        query: q.name.clone(),
        dataset_n: ds.len() as u64,
        subgroups,
    })
}

/// Record counts per subgroup and the PHI attributes the query touches.
pub fn metadata(ds: &Dataset, q: &QuerySpec) -> Result<Metadata> {
    q.validate(ds.schema())?;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    match q.group_by.as_deref().and_then(|g| ds.column_index(g)) {
        Some(i) => {
            for row in ds.rows() {
                *counts.entry(row[i].to_string()).or_default() += 1;
            }
        }
        None => {
            counts.insert(ALL_LABEL.to_owned(), ds.len() as u64);
        }
    }
    let mut subgroups: Vec<SubgroupRecords> = counts
        .into_iter()
        .map(|(label, records)| SubgroupRecords { label, records })
        .collect();
    subgroups.sort_by(|a, b| b.records.cmp(&a.records).then_with(|| a.label.cmp(&b.label)));

    let mut sensitive_variables: Vec<String> = q
        .attributes(ds.schema())
        .into_iter()
        .filter(|a| ds.schema().get(a).is_some_and(|c| c.is_phi))
        .map(str::to_owned)
        .collect();
    sensitive_variables.sort();

    Ok(Metadata {
        data_source: ds.source().to_owned(),
        cohort_size: ds.len() as u64,
        subgroups,
        sensitive_variables,
    })
}
