//! Two-tier LTE downlink simulator: one macro cell overlaid with closed-access
//! femtocells, victim detection, per-femtocell almost-blank-subframe muting,
//! coalition alignment of the muting patterns, and a Monte-Carlo harness that
//! compares the adaptive scheme against fixed-rate baselines.
//!
//! ```
//! use absf_core::{config::ScenarioConfig, deployment::generate_scenario, harness};
//! use absf_core::propagation::ShadowingField;
//!
//! let cfg = ScenarioConfig::default();
//! let drop = generate_scenario(&cfg, 0).unwrap();
//! let analysis = harness::analyze_drop(&drop, &ShadowingField::for_scenario(&drop)).unwrap();
//! let plan = harness::plan_for(&harness::Scheme::proposed(), &analysis, &cfg);
//! assert_eq!(plan.patterns.len(), cfg.num_henbs);
//! ```

pub mod absf;
pub mod cli;
pub mod coalition;
pub mod config;
pub mod deployment;
pub mod harness;
pub mod propagation;
pub mod radio;
pub mod seeding;
pub mod units;

pub use absf::{MutedRateRequirement, MutingPlan, SubframePattern};
pub use coalition::{Coalition, VictimSets};
pub use config::{ConfigError, ScenarioConfig};
pub use deployment::{generate_scenario, NodeId, NodeKind, Point, Scenario};
pub use harness::{run_experiment, MetricsReport, Scheme};
pub use radio::{AggressorSets, SinrReport};
