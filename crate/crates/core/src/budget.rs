//! Splitting a total ε across queries.
//!
//! In manual mode each slider moves independently and the remaining budget
//! may go negative. In responsive mode, moving one slider hands whatever is
//! left of the total (after locked sliders and the moved one) out equally to
//! the other unlocked sliders. Shares that fall outside the slider range are
//! pinned to the bound and the rest is shared again among the unpinned
//! sliders until nothing moves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest ε a slider can hold.
pub const SLIDER_MIN: f64 = 0.001;
/// Largest ε a slider can hold.
pub const SLIDER_MAX: f64 = 2.0;
/// Slider increment for clients. The allocator itself does not round.
pub const SLIDER_STEP: f64 = 0.001;
/// Default ceiling on the total budget (four queries at the slider maximum).
pub const DEFAULT_MAX_TOTAL: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Manual,
    Responsive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryBudget {
    pub query: String,
    pub epsilon: f64,
    pub locked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationState {
    pub total_budget: f64,
    pub max_total: f64,
    pub mode: Mode,
    pub queries: Vec<QueryBudget>,
}

/// Emitted when a requested value was moved into range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClampNotice {
    pub query: String,
    pub requested: f64,
    pub applied: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetOutcome {
    pub state: AllocationState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notice: Option<ClampNotice>,
    /// Passes of the redistribution loop (0 in manual mode).
    pub iterations: usize,
}

pub fn clamp_epsilon(value: f64) -> f64 {
    if value.is_nan() {
        SLIDER_MIN
    } else {
        value.clamp(SLIDER_MIN, SLIDER_MAX)
    }
}

impl AllocationState {
    /// Manual mode, every slider at the minimum.
    pub fn new<S: Into<String>>(queries: impl IntoIterator<Item = S>, total_budget: f64) -> Result<Self> {
        Self::with_max_total(queries, total_budget, DEFAULT_MAX_TOTAL)
    }

    pub fn with_max_total<S: Into<String>>(
        queries: impl IntoIterator<Item = S>,
        total_budget: f64,
        max_total: f64,
    ) -> Result<Self> {
        if !(max_total > 0.0 && max_total.is_finite()) {
            return Err(Error::validation("max_total", "must be positive and finite"));
        }
        let mut entries: Vec<QueryBudget> = Vec::new();
        for (i, q) in queries.into_iter().enumerate() {
            let query = q.into();
            if entries.iter().any(|e| e.query == query) {
                return Err(Error::validation(
                    format!("queries[{i}].name"),
                    format!("duplicate query name `{query}`"),
                ));
            }
            entries.push(QueryBudget {
                query,
                epsilon: SLIDER_MIN,
                locked: false,
            });
        }
        let state = AllocationState {
            total_budget: 0.0,
            max_total,
            mode: Mode::Manual,
            queries: entries,
        };
        state.set_total(total_budget)
    }

    pub fn epsilon(&self, query: &str) -> Option<f64> {
        self.entry(query).map(|e| e.epsilon)
    }

    pub fn is_locked(&self, query: &str) -> Option<bool> {
        self.entry(query).map(|e| e.locked)
    }

    pub fn spent(&self) -> f64 {
        self.queries.iter().map(|q| q.epsilon).sum()
    }

    /// `total − Σε`; negative when overspent.
    pub fn remaining_budget(&self) -> f64 {
        self.total_budget - self.spent()
    }

    fn entry(&self, query: &str) -> Option<&QueryBudget> {
        self.queries.iter().find(|q| q.query == query)
    }

    fn index(&self, query: &str) -> Result<usize> {
        self.queries
            .iter()
            .position(|q| q.query == query)
            .ok_or_else(|| Error::UnknownQuery(query.to_owned()))
    }

    pub fn set_total(&self, total: f64) -> Result<Self> {
        if !(0.0..=self.max_total).contains(&total) {
            return Err(Error::validation(
                "total_budget",
                format!("must lie in [0, {}], got {total}", self.max_total),
            ));
        }
        let mut next = self.clone();
        next.total_budget = total;
        Ok(next)
    }

    pub fn set_epsilon(&self, query: &str, value: f64) -> Result<SetOutcome> {
        let target = self.index(query)?;
        let applied = clamp_epsilon(value);
        let notice = (applied != value).then(|| ClampNotice {
            query: query.to_owned(),
            requested: value,
            applied,
        });
        let mut next = self.clone();

        if self.mode == Mode::Manual {
            next.queries[target].epsilon = applied;
            return Ok(SetOutcome {
                state: next,
                notice,
                iterations: 0,
            });
        }

        if self.queries[target].locked {
            return Err(Error::State(format!("query `{query}` is locked")));
        }
        next.queries[target].epsilon = applied;

        let locked: f64 = next.queries.iter().filter(|q| q.locked).map(|q| q.epsilon).sum();
        let mut remaining = next.total_budget - locked - applied;
        let mut free: Vec<usize> = (0..next.queries.len())
            .filter(|&i| i != target && !next.queries[i].locked)
            .collect();

        let mut iterations = 0;
        while !free.is_empty() {
            iterations += 1;
            let share = remaining / free.len() as f64;
            let (pinned, open): (Vec<usize>, Vec<usize>) =
                free.iter().partition(|_| !(SLIDER_MIN..=SLIDER_MAX).contains(&share));
            if pinned.is_empty() {
                for &i in &open {
                    next.queries[i].epsilon = share;
                }
                break;
            }
            for &i in &pinned {
                let v = clamp_epsilon(share);
                next.queries[i].epsilon = v;
                remaining -= v;
            }
            free = open;
        }

        Ok(SetOutcome {
            state: next,
            notice,
            iterations,
        })
    }

    pub fn toggle_lock(&self, query: &str) -> Result<Self> {
        let i = self.index(query)?;
        if self.mode == Mode::Manual {
            return Err(Error::State("lock toggles are disabled in manual mode".into()));
        }
        let mut next = self.clone();
        next.queries[i].locked = !next.queries[i].locked;
        Ok(next)
    }

    /// Switching to manual clears locks; no slider moves either way.
    pub fn set_mode(&self, mode: Mode) -> Self {
        let mut next = self.clone();
        next.mode = mode;
        if mode == Mode::Manual {
            for q in &mut next.queries {
                q.locked = false;
            }
        }
        next
    }

    /// True when the unlocked non-target sliders can absorb the rest of the
    /// total without any of them dropping below the minimum.
    pub fn is_feasible_after(&self, query: &str, value: f64) -> bool {
        let applied = clamp_epsilon(value);
        let locked: f64 = self
            .queries
            .iter()
            .filter(|q| q.locked && q.query != query)
            .map(|q| q.epsilon)
            .sum();
        let free = self.queries.iter().filter(|q| !q.locked && q.query != query).count();
        free > 0 && locked + applied + free as f64 * SLIDER_MIN <= self.total_budget
    }
}
