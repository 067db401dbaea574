//! Planning and releasing differentially private COUNT queries.
//!
//! The crate covers the curator's whole loop: ingest a CSV against a
//! schema, run COUNT queries with optional GROUP BY, explore the accuracy
//! and disclosure risk of candidate ε values, split a total budget across
//! queries, and finally spend the budget on a single noisy release.
//!
//! ```
//! use dp_planner::laplace::{laplace_mechanism, PrivacyBudget, Sensitivity};
//! use dp_planner::risk::disclosure_risk;
//! use dp_planner::rng::RandomSeed;
//!
//! let eps = PrivacyBudget::new(1.0)?;
//! let risk = disclosure_risk(eps, 1000, Sensitivity::COUNT)?;
//! assert!((risk - 0.0027136).abs() < 1e-6);
//!
//! let mut rng = RandomSeed(7).derive(&["demo"]);
//! let noised = laplace_mechanism(120.0, Sensitivity::COUNT, eps, &mut rng);
//! assert!(noised.value().is_finite());
//! # Ok::<(), dp_planner::Error>(())
//! ```

pub mod budget;
pub mod error;
pub mod inference;
pub mod laplace;
pub mod plan;
pub mod query;
pub mod release;
pub mod risk;
pub mod rng;
pub mod synth;
pub mod viz;

pub use error::{Error, Result};
pub use release::SCHEMA_VERSION;
